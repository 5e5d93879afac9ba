#pragma once

// Access policies for the shared words of an index. AtomicSync is the normal
// lock-free build; PlainSync is the single-thread mode, where every CAS
// becomes a compare-and-store and atomic loads/stores become plain ones.

#include <atomic>
#include <cstdint>
#include <thread>

#include "dlht/index.hpp"

#if defined(__x86_64__)
#include <immintrin.h>
#endif

namespace dlht::detail {

inline void cpu_relax() noexcept {
#if defined(__x86_64__)
  _mm_pause();
#else
  std::atomic_signal_fence(std::memory_order_seq_cst);
#endif
}

/// Spin a little, then give the core away; waiting threads may share a CPU
/// with the thread they wait for.
class Backoff {
 public:
  void pause() noexcept {
    if (spins_ < kSpinLimit) {
      ++spins_;
      cpu_relax();
    } else {
      std::this_thread::yield();
    }
  }

 private:
  static constexpr unsigned kSpinLimit = 64;
  unsigned spins_ = 0;
};

inline void prefetch_read(const void* p) noexcept { __builtin_prefetch(p, 0, 3); }
inline void prefetch_write(const void* p) noexcept { __builtin_prefetch(p, 1, 3); }

/// 16-byte compare-and-swap. On failure `expected` receives the current contents.
/// Thread-sanitizer builds take the builtin path so the tool sees the access.
inline bool dwcas(Slot& target, Slot& expected, const Slot& desired) noexcept {
#if defined(__x86_64__) && !defined(__SANITIZE_THREAD__)
  bool ok;
  __asm__ __volatile__("lock cmpxchg16b %1"
                       : "=@ccz"(ok), "+m"(target), "+a"(expected.key), "+d"(expected.value)
                       : "b"(desired.key), "c"(desired.value)
                       : "memory");
  return ok;
#else
  auto* p = reinterpret_cast<unsigned __int128*>(&target);
  auto* e = reinterpret_cast<unsigned __int128*>(&expected);
  unsigned __int128 d;
  __builtin_memcpy(&d, &desired, sizeof d);
  return __atomic_compare_exchange_n(p, e, d, false, __ATOMIC_ACQ_REL, __ATOMIC_ACQUIRE);
#endif
}

struct AtomicSync {
  static constexpr bool kConcurrent = true;

  static std::uint64_t load_acquire(std::uint64_t& w) noexcept {
    return std::atomic_ref<std::uint64_t>(w).load(std::memory_order_acquire);
  }
  static std::uint64_t load_relaxed(std::uint64_t& w) noexcept {
    return std::atomic_ref<std::uint64_t>(w).load(std::memory_order_relaxed);
  }
  static void store_relaxed(std::uint64_t& w, std::uint64_t v) noexcept {
    std::atomic_ref<std::uint64_t>(w).store(v, std::memory_order_relaxed);
  }
  static void store_release(std::uint64_t& w, std::uint64_t v) noexcept {
    std::atomic_ref<std::uint64_t>(w).store(v, std::memory_order_release);
  }
  static bool cas(std::uint64_t& w, std::uint64_t& expected, std::uint64_t desired) noexcept {
    return std::atomic_ref<std::uint64_t>(w).compare_exchange_strong(expected, desired, std::memory_order_acq_rel,
                                                                     std::memory_order_acquire);
  }
  static std::uint64_t fetch_add(std::uint64_t& w, std::uint64_t n) noexcept {
    return std::atomic_ref<std::uint64_t>(w).fetch_add(n, std::memory_order_relaxed);
  }
  static bool dwcas(Slot& s, Slot& expected, const Slot& desired) noexcept {
    return detail::dwcas(s, expected, desired);
  }
  /// Orders preceding relaxed data loads before a following header re-read.
  static void read_fence() noexcept { std::atomic_thread_fence(std::memory_order_acquire); }
};

struct PlainSync {
  static constexpr bool kConcurrent = false;

  static std::uint64_t load_acquire(std::uint64_t& w) noexcept { return w; }
  static std::uint64_t load_relaxed(std::uint64_t& w) noexcept { return w; }
  static void store_relaxed(std::uint64_t& w, std::uint64_t v) noexcept { w = v; }
  static void store_release(std::uint64_t& w, std::uint64_t v) noexcept { w = v; }
  static bool cas(std::uint64_t& w, std::uint64_t& expected, std::uint64_t desired) noexcept {
    if (w != expected) {
      expected = w;
      return false;
    }
    w = desired;
    return true;
  }
  static std::uint64_t fetch_add(std::uint64_t& w, std::uint64_t n) noexcept {
    const std::uint64_t old = w;
    w = old + n;
    return old;
  }
  static bool dwcas(Slot& s, Slot& expected, const Slot& desired) noexcept {
    if (s.key != expected.key || s.value != expected.value) {
      expected = s;
      return false;
    }
    s = desired;
    return true;
  }
  static void read_fence() noexcept {}
};

}  // namespace dlht::detail
