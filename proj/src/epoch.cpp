#include "dlht/epoch.hpp"

#include <algorithm>
#include <stdexcept>

namespace dlht {

ThreadRegistry::ThreadRegistry(std::size_t max_threads, Releaser releaser)
    : capacity_{max_threads}, cells_{std::make_unique<ThreadCell[]>(max_threads)}, releaser_{std::move(releaser)} {
  if (max_threads == 0) throw std::invalid_argument("thread registry needs at least one cell");
}

ThreadRegistry::~ThreadRegistry() { release_all(); }

ThreadCell& ThreadRegistry::acquire() {
  for (std::size_t i = 0; i < capacity_; ++i) {
    ThreadCell& c = cells_[i];
    bool expected = false;
    if (c.in_use.load(std::memory_order_relaxed) ||
        !c.in_use.compare_exchange_strong(expected, true, std::memory_order_seq_cst)) {
      continue;
    }
    c.announced.store(0, std::memory_order_relaxed);
    c.depth = 0;
    c.local_epoch.store(global_epoch_.load(std::memory_order_seq_cst), std::memory_order_seq_cst);
    std::size_t hw = high_water_.load(std::memory_order_relaxed);
    while (hw < i + 1 && !high_water_.compare_exchange_weak(hw, i + 1, std::memory_order_seq_cst)) {
    }
    return c;
  }
  throw std::runtime_error("too many threads registered with the table");
}

void ThreadRegistry::release(ThreadCell& cell) {
  {
    std::lock_guard lock(orphan_mutex_);
    for (const auto& r : cell.retired) orphans_.push_back(r);
  }
  cell.retired.clear();
  cell.depth = 0;
  cell.announced.store(0, std::memory_order_seq_cst);
  cell.in_use.store(false, std::memory_order_seq_cst);
}

std::size_t ThreadRegistry::active_threads() const noexcept {
  std::size_t n = 0;
  const std::size_t hw = high_water_.load(std::memory_order_acquire);
  for (std::size_t i = 0; i < hw; ++i) n += cells_[i].in_use.load(std::memory_order_relaxed) ? 1 : 0;
  return n;
}

std::uint64_t ThreadRegistry::min_announced(const ThreadCell* exclude) const noexcept {
  std::uint64_t lowest = 0;
  const std::size_t hw = high_water_.load(std::memory_order_seq_cst);
  for (std::size_t i = 0; i < hw; ++i) {
    const ThreadCell& c = cells_[i];
    if (&c == exclude) continue;
    const std::uint64_t g = c.announced.load(std::memory_order_seq_cst);
    if (g != 0 && (lowest == 0 || g < lowest)) lowest = g;
  }
  return lowest;
}

void ThreadRegistry::retire(ThreadCell& cell, std::uint64_t tagged) {
  cell.retired.push_back(RetiredRecord{global_epoch_.load(std::memory_order_seq_cst), tagged});
}

void ThreadRegistry::release_safe(std::deque<RetiredRecord>& list, std::uint64_t global) {
  // Per-thread lists are appended in epoch order.
  while (!list.empty() && list.front().epoch + 2 <= global) {
    releaser_(list.front().tagged);
    list.pop_front();
    released_.fetch_add(1, std::memory_order_relaxed);
  }
}

bool ThreadRegistry::advance(ThreadCell& cell) {
  std::uint64_t g = global_epoch_.load(std::memory_order_seq_cst);
  cell.local_epoch.store(g, std::memory_order_seq_cst);

  bool everyone = true;
  const std::size_t hw = high_water_.load(std::memory_order_seq_cst);
  for (std::size_t i = 0; i < hw && everyone; ++i) {
    const ThreadCell& c = cells_[i];
    if (c.in_use.load(std::memory_order_seq_cst) && c.local_epoch.load(std::memory_order_seq_cst) != g) {
      everyone = false;
    }
  }
  const bool advanced = everyone && global_epoch_.compare_exchange_strong(g, g + 1, std::memory_order_seq_cst);

  const std::uint64_t now = global_epoch_.load(std::memory_order_seq_cst);
  release_safe(cell.retired, now);

  std::unique_lock lock(orphan_mutex_, std::try_to_lock);
  if (lock.owns_lock() && !orphans_.empty()) {
    const auto before = orphans_.size();
    std::erase_if(orphans_, [&](const RetiredRecord& r) {
      if (r.epoch + 2 > now) return false;
      releaser_(r.tagged);
      return true;
    });
    released_.fetch_add(before - orphans_.size(), std::memory_order_relaxed);
  }
  return advanced;
}

std::size_t ThreadRegistry::pending_count() const noexcept {
  std::size_t n = 0;
  const std::size_t hw = high_water_.load(std::memory_order_acquire);
  for (std::size_t i = 0; i < hw; ++i) n += cells_[i].retired.size();
  std::lock_guard lock(orphan_mutex_);
  return n + orphans_.size();
}

void ThreadRegistry::release_all() {
  for (std::size_t i = 0; i < capacity_; ++i) {
    for (const auto& r : cells_[i].retired) releaser_(r.tagged);
    released_.fetch_add(cells_[i].retired.size(), std::memory_order_relaxed);
    cells_[i].retired.clear();
  }
  std::lock_guard lock(orphan_mutex_);
  for (const auto& r : orphans_) releaser_(r.tagged);
  released_.fetch_add(orphans_.size(), std::memory_order_relaxed);
  orphans_.clear();
}

// ---------------------------------------------------------------------------

namespace {

struct Registration {
  std::uint64_t uid;
  std::weak_ptr<ThreadRegistry> registry;
  ThreadCell* cell;
};

struct ThreadRegistrations {
  std::vector<Registration> entries;
  std::uint64_t cached_uid = 0;
  ThreadCell* cached_cell = nullptr;

  ~ThreadRegistrations() {
    for (auto& e : entries) {
      if (auto reg = e.registry.lock()) reg->release(*e.cell);
    }
  }
};

thread_local ThreadRegistrations tls_registrations;

}  // namespace

ThreadCell& thread_cell(const std::shared_ptr<ThreadRegistry>& registry, std::uint64_t registry_uid) {
  auto& regs = tls_registrations;
  if (regs.cached_uid == registry_uid) return *regs.cached_cell;
  for (auto& e : regs.entries) {
    if (e.uid == registry_uid) {
      regs.cached_uid = registry_uid;
      regs.cached_cell = e.cell;
      return *e.cell;
    }
  }
  std::erase_if(regs.entries, [](const Registration& e) { return e.registry.expired(); });
  ThreadCell& cell = registry->acquire();
  regs.entries.push_back(Registration{registry_uid, registry, &cell});
  regs.cached_uid = registry_uid;
  regs.cached_cell = &cell;
  return cell;
}

void forget_thread_cell(std::uint64_t registry_uid) {
  auto& regs = tls_registrations;
  if (regs.cached_uid == registry_uid) {
    regs.cached_uid = 0;
    regs.cached_cell = nullptr;
  }
  std::erase_if(regs.entries, [&](Registration& e) {
    if (e.uid != registry_uid) return false;
    if (auto reg = e.registry.lock()) reg->release(*e.cell);
    return true;
  });
}

}  // namespace dlht
