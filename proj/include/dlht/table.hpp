#pragma once

/// Client-facing concurrent hashtable.
///
///   dlht::Table t(dlht::Config{});
///   t.insert(42, 7);
///   auto r = t.get(42);   // r.status == Status::Found, r.value == 7
///
/// Inlined tables store 8-byte keys and values in the index. HashSet tables
/// store keys only. Allocator tables store arbitrary byte keys and values in
/// out-of-line records and return record handles.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "dlht/batch.hpp"
#include "dlht/hash.hpp"
#include "dlht/record.hpp"
#include "dlht/resize.hpp"
#include "dlht/status.hpp"

namespace dlht {

enum class Mode : std::uint8_t { Inlined, Allocator, HashSet };

struct Config {
  Mode mode = Mode::Inlined;
  HashKind hash = HashKind::ModuloIdentity;
  std::size_t initial_bins = 16384;  // rounded up to a power of two >= 16
  std::size_t max_bins = std::size_t{1} << 31;
  unsigned link_ratio = 8;  // bins per link bucket
  bool resize = true;
  /// Caller promises a single accessing thread; atomics become plain
  /// accesses and resizes run inline.
  bool single_thread = false;
  bool zero_memory = false;  // pre-fault the index instead of relying on fresh pages
  bool interleave = false;   // interleave index pages across memory nodes
  std::size_t max_threads = 256;

  // Allocator mode.
  std::shared_ptr<RecordAllocator> allocator;  // defaults to the heap
  RecordLayout layout{};
  bool reclamation = true;  // retire deleted records through epochs
};

struct TableStats {
  std::size_t nbins = 0;
  std::size_t nlinks = 0;
  std::uint64_t links_used = 0;
  std::uint64_t generation = 0;
  std::size_t resizes = 0;
  std::size_t pending_indexes = 0;  // retired generations not yet released
  std::uint64_t global_epoch = 0;
  std::uint64_t records_released = 0;
  std::size_t records_pending = 0;
};

/// Full-table consistency scan. Only meaningful while no thread mutates.
struct AuditReport {
  std::size_t bins = 0;
  std::size_t live = 0;        // Valid slots
  std::size_t shadow = 0;      // Shadow slots
  std::size_t try_insert = 0;  // slots stuck mid-insert
  std::size_t duplicate_keys = 0;
  std::size_t unreachable_slots = 0;  // non-Invalid slot without a chained bucket
  std::size_t misplaced_keys = 0;     // key stored in a bin it does not hash to
  std::size_t link_order_violations = 0;
  std::size_t bins_not_idle = 0;  // bin state other than NoTransfer
  [[nodiscard]] bool clean() const noexcept {
    return try_insert == 0 && duplicate_keys == 0 && unreachable_slots == 0 && misplaced_keys == 0 &&
           link_order_violations == 0 && bins_not_idle == 0;
  }
};

namespace detail {
struct TableCore;
}

[[nodiscard]] inline std::span<const std::byte> bytes_of(std::string_view s) noexcept {
  return std::as_bytes(std::span<const char>(s.data(), s.size()));
}

class Table {
 public:
  explicit Table(Config config = {});
  ~Table();
  Table(const Table&) = delete;
  Table& operator=(const Table&) = delete;

  // Inlined and HashSet modes. Inserting one of reserved_keys() throws
  // std::invalid_argument.
  OpResult get(std::uint64_t key);
  OpResult insert(std::uint64_t key, std::uint64_t value = 0);
  OpResult shadow_insert(std::uint64_t key, std::uint64_t value = 0);
  OpResult finalize_shadow(std::uint64_t key, Decision decision);
  OpResult erase(std::uint64_t key);
  /// Inlined mode only; other modes throw std::logic_error.
  OpResult put(std::uint64_t key, std::uint64_t value);
  bool contains(std::uint64_t key) { return get(key).status == Status::Found; }

  // Allocator mode.
  OpResult get(std::span<const std::byte> key, std::uint16_t ns = 0);
  OpResult insert(std::span<const std::byte> key, std::span<const std::byte> value, std::uint16_t ns = 0);
  OpResult shadow_insert(std::span<const std::byte> key, std::span<const std::byte> value, std::uint16_t ns = 0);
  OpResult finalize_shadow(std::span<const std::byte> key, Decision decision, std::uint16_t ns = 0);
  OpResult erase(std::span<const std::byte> key, std::uint16_t ns = 0);
  bool contains(std::span<const std::byte> key, std::uint16_t ns = 0) { return get(key, ns).status == Status::Found; }
  OpResult get(std::string_view key, std::uint16_t ns = 0) { return get(bytes_of(key), ns); }
  OpResult insert(std::string_view key, std::string_view value, std::uint16_t ns = 0) {
    return insert(bytes_of(key), bytes_of(value), ns);
  }
  OpResult erase(std::string_view key, std::uint16_t ns = 0) { return erase(bytes_of(key), ns); }

  /// Record behind an Allocator-mode result (empty view otherwise). Valid
  /// until the record is reclaimed.
  [[nodiscard]] RecordView record(const OpResult& r) const noexcept;
  [[nodiscard]] RecordView record(std::uint64_t key_word, std::uint64_t value_word) const noexcept;
  /// Frees a record handed back by erase when reclamation is off.
  void release_record(const OpResult& r);

  /// Runs the requests in order inside one announcement, prefetching every
  /// target bin first.
  BatchOutcome execute_batch(std::span<const BatchRequest> requests, bool stop_on_failure = false);
  /// Same, reusing `out` (its result vector keeps its capacity).
  void execute_batch(std::span<const BatchRequest> requests, BatchOutcome& out, bool stop_on_failure = false);

  /// Non-binding cache hint for the key's bin; no semantic effect.
  void prefetch(std::uint64_t key) const noexcept;
  void prefetch(std::span<const std::byte> key) const noexcept;

  /// Weakly consistent walk: pairs live for the whole walk are visited
  /// exactly once; concurrent changes may or may not show. Allocator tables
  /// pass the tagged record word as the value (see record()).
  void iterate_weak(const std::function<void(std::uint64_t key, std::uint64_t value)>& visit);

  /// Forces one resize of the current index. Throws std::logic_error when
  /// resizing is disabled. Returns NoSpace past max_bins.
  Status grow();

  [[nodiscard]] std::vector<ResizeRecord> resize_history() const;
  /// True while a resize of the current index is in flight.
  [[nodiscard]] bool resizing() const noexcept;
  [[nodiscard]] TableStats stats() const;
  /// Consistency scan of the current index; call only while quiescent.
  [[nodiscard]] AuditReport audit() const;
  /// Number of Valid slots (full scan).
  [[nodiscard]] std::size_t size() const;

  /// Publishes this thread's epoch and releases records that became safe.
  void advance_epoch();
  /// Drops this thread's registration (also happens at thread exit).
  void unregister_thread();
  /// Times this thread has entered the table (outermost enters only).
  [[nodiscard]] std::uint64_t thread_enter_count();

  /// Holds one announcement across several calls.
  class Scope {
   public:
    Scope(Scope&& other) noexcept;
    Scope& operator=(Scope&&) = delete;
    ~Scope();

   private:
    friend class Table;
    explicit Scope(detail::TableCore* core);
    detail::TableCore* core_;
  };
  [[nodiscard]] Scope enter();

  [[nodiscard]] Mode mode() const noexcept;
  [[nodiscard]] bool single_thread() const noexcept;
  [[nodiscard]] std::pair<std::uint64_t, std::uint64_t> reserved_keys() const noexcept;

 private:
  std::unique_ptr<detail::TableCore> core_;
};

}  // namespace dlht
