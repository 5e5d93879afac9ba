#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dlht/status.hpp"

namespace dlht {

enum class OpKind : std::uint8_t { Get, Put, Insert, ShadowInsert, Delete, FinalizeShadow };

/// One request of an ordered batch. Inlined and HashSet tables use the word
/// fields; Allocator tables use the byte spans and the namespace.
struct BatchRequest {
  OpKind op = OpKind::Get;
  std::uint64_t key = 0;
  std::uint64_t value = 0;
  std::span<const std::byte> key_bytes{};
  std::span<const std::byte> value_bytes{};
  std::uint16_t ns = 0;
  Decision decision = Decision::Commit;

  static BatchRequest get(std::uint64_t k) { return {OpKind::Get, k}; }
  static BatchRequest insert(std::uint64_t k, std::uint64_t v = 0) { return {OpKind::Insert, k, v}; }
  static BatchRequest shadow_insert(std::uint64_t k, std::uint64_t v = 0) { return {OpKind::ShadowInsert, k, v}; }
  static BatchRequest erase(std::uint64_t k) { return {OpKind::Delete, k}; }
  static BatchRequest put(std::uint64_t k, std::uint64_t v) { return {OpKind::Put, k, v}; }
  static BatchRequest finalize(std::uint64_t k, Decision d) {
    BatchRequest r{OpKind::FinalizeShadow, k};
    r.decision = d;
    return r;
  }
};

struct BatchOutcome {
  std::vector<OpResult> results;  // results[i] answers requests[i]
  std::size_t executed = 0;
  bool success = true;  // no request failed
};

}  // namespace dlht
