#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace dlht {

/// How keys are reduced to bins. ModuloIdentity uses the key itself, so
/// bin = key % nbins; StrongMixer runs a multiply-fold avalanche mixer first.
enum class HashKind : std::uint8_t { ModuloIdentity, StrongMixer };

[[nodiscard]] std::uint64_t hash_word(std::uint64_t key, HashKind kind) noexcept;

/// Hash of a byte-string key. Keys of up to 8 bytes hash exactly like their
/// packed little-endian word, so an Allocator-mode table can rebuild the hash
/// of an inlined key from the slot alone.
[[nodiscard]] std::uint64_t hash_bytes(std::span<const std::byte> key, HashKind kind) noexcept;

/// Up to 8 bytes packed little-endian; longer keys yield their first 8 bytes
/// (the in-slot signature).
[[nodiscard]] std::uint64_t key_word_of(std::span<const std::byte> key) noexcept;

/// Bins are always a power of two, so the reduction is a mask.
[[nodiscard]] constexpr std::uint64_t bin_of_hash(std::uint64_t hash, std::uint64_t nbins) noexcept {
  return hash & (nbins - 1);
}

[[nodiscard]] inline std::uint64_t bin_of(std::uint64_t key, HashKind kind, std::uint64_t nbins) noexcept {
  return bin_of_hash(hash_word(key, kind), nbins);
}

}  // namespace dlht
