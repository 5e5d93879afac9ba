#pragma once

/// Per-thread registry shared by index reclamation (announcement cells) and
/// record reclamation (epochs).
///
/// Announcement: a thread inside the table publishes the generation number of
/// the index it entered with. A retired generation g may be released once no
/// cell announces a generation <= g; generations form a chain through
/// Index::next, so an announced generation also protects every later one.
///
/// Epochs: retired records carry the global epoch read at retirement. The
/// global epoch advances only once every registered thread has published the
/// current value, and a record retired at e is released once the global epoch
/// reaches e + 2.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

namespace dlht {

struct RetiredRecord {
  std::uint64_t epoch;
  std::uint64_t tagged;
};

struct alignas(64) ThreadCell {
  std::atomic<std::uint64_t> announced{0};  // 0 = outside the table
  std::atomic<std::uint64_t> local_epoch{0};
  std::atomic<bool> in_use{false};
  std::atomic<std::uint64_t> enter_count{0};

  // Owner thread only.
  unsigned depth = 0;
  std::deque<RetiredRecord> retired;
};

class ThreadRegistry {
 public:
  using Releaser = std::function<void(std::uint64_t tagged)>;

  ThreadRegistry(std::size_t max_threads, Releaser releaser);
  ~ThreadRegistry();
  ThreadRegistry(const ThreadRegistry&) = delete;
  ThreadRegistry& operator=(const ThreadRegistry&) = delete;

  /// Claims a free cell. Throws std::runtime_error when all cells are taken.
  ThreadCell& acquire();
  /// Returns a cell; its pending retirements move to a shared orphan list.
  void release(ThreadCell& cell);

  [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
  [[nodiscard]] std::size_t active_threads() const noexcept;

  /// Smallest non-zero announced generation, ignoring `exclude`; 0 if none.
  [[nodiscard]] std::uint64_t min_announced(const ThreadCell* exclude = nullptr) const noexcept;

  [[nodiscard]] std::uint64_t global_epoch() const noexcept { return global_epoch_.load(std::memory_order_seq_cst); }

  void retire(ThreadCell& cell, std::uint64_t tagged);

  /// Publishes the caller's epoch, advances the global epoch when every
  /// registered thread has caught up, and releases what became safe.
  /// Returns true when this call advanced the global epoch.
  bool advance(ThreadCell& cell);

  [[nodiscard]] std::uint64_t released_count() const noexcept { return released_.load(std::memory_order_relaxed); }
  [[nodiscard]] std::size_t pending_count() const noexcept;

  /// Releases every retired record regardless of epochs. Only for teardown.
  void release_all();

 private:
  void release_safe(std::deque<RetiredRecord>& list, std::uint64_t global);

  std::size_t capacity_;
  std::unique_ptr<ThreadCell[]> cells_;
  std::atomic<std::size_t> high_water_{0};
  std::atomic<std::uint64_t> global_epoch_{1};
  std::atomic<std::uint64_t> released_{0};
  Releaser releaser_;

  mutable std::mutex orphan_mutex_;
  std::deque<RetiredRecord> orphans_;
};

/// The calling thread's cell in `registry`, registering it on first use.
/// The registration is dropped automatically when the thread exits.
ThreadCell& thread_cell(const std::shared_ptr<ThreadRegistry>& registry, std::uint64_t registry_uid);

/// Drops the calling thread's registration, if any.
void forget_thread_cell(std::uint64_t registry_uid);

}  // namespace dlht
