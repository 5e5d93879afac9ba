#pragma once

// Shared machinery of the bench drivers: table construction, per-thread
// clients that issue requests singly or in batches, latency sampling and
// thread launching.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "dlht/bench/workload.hpp"
#include "dlht/table.hpp"

namespace dlht::bench::detail {

using Clock = std::chrono::steady_clock;

inline std::uint64_t elapsed_ns(Clock::time_point a, Clock::time_point b) noexcept {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
}

/// Uniform index in [0, n) from a 64-bit draw.
inline std::uint64_t below(std::uint64_t draw, std::uint64_t n) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(draw) * n) >> 64);
}

inline std::uint64_t thread_seed(std::uint64_t seed, unsigned tid) noexcept {
  return seed * 0x9E3779B97F4A7C15ull + (tid + 1) * 0xD1B54A32D192ED03ull;
}

/// Value stored with a key: the high half identifies the key, the low half
/// is a version, so a reader can tell a value written for another key.
inline std::uint64_t value_for(std::uint64_t key, std::uint32_t version) noexcept {
  const std::uint64_t tag = (key * 0x9E3779B97F4A7C15ull) & 0xFFFF'FFFF'0000'0000ull;
  return tag | version;
}
inline bool value_belongs(std::uint64_t key, std::uint64_t value) noexcept {
  return (value & 0xFFFF'FFFF'0000'0000ull) == value_for(key, 0);
}

/// Picks prepopulated key positions, optionally skewed toward a hot prefix.
class KeyPicker {
 public:
  KeyPicker(const WorkloadSpec& s, unsigned tid)
      : rng_{thread_seed(s.seed, tid)}, n_{s.keys}, hot_{std::min(s.hot, s.keys)}, skew_{s.skew} {}

  std::uint64_t next() noexcept {
    if (skew_ > 0.0 && hot_ > 0 && unit() < skew_) return below(rng_(), hot_);
    return below(rng_(), n_);
  }
  double unit() noexcept { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64& rng() noexcept { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::uint64_t n_;
  std::uint64_t hot_;
  double skew_;
};

/// One sample per 64 requests (per batch for batches of 64 or more).
class LatencySampler {
 public:
  explicit LatencySampler(unsigned batch) : every_{batch == 0 ? 64u : std::max(1u, 64u / batch)} {}
  [[nodiscard]] bool due() noexcept { return ++tick_ % every_ == 0; }
  void record(std::uint64_t ns) { samples_.push_back(ns); }
  [[nodiscard]] std::vector<std::uint64_t>& samples() noexcept { return samples_; }

 private:
  unsigned every_;
  std::uint64_t tick_ = 0;
  std::vector<std::uint64_t> samples_;
};

struct LatencySummary {
  double mean = 0.0;
  double p99 = 0.0;
  std::size_t count = 0;
};
LatencySummary summarize(std::vector<std::uint64_t>& samples);

struct Req {
  OpKind op = OpKind::Get;
  std::uint64_t key = 0;
  std::uint64_t value = 0;
  Decision decision = Decision::Commit;
  std::uint16_t ns = 0;
};

Config make_config(const WorkloadSpec& s, std::size_t initial_bins);
std::size_t default_bins(std::uint64_t keys);

/// Issues requests for one thread, batched or not, in any table mode.
/// Allocator-mode keys are the key word followed by filler bytes derived
/// from it; values carry the value word in their first 8 bytes.
class Client {
 public:
  Client(Table& t, const WorkloadSpec& s);

  /// Runs `reqs` in order; results[i] answers reqs[i]. With batching on,
  /// all of `reqs` goes into one batch.
  void run(std::span<const Req> reqs, std::span<OpResult> results, bool stop_on_failure = false);
  /// One request, never batched.
  OpResult one(const Req& r);

  /// Value word behind a result (record contents in Allocator mode).
  [[nodiscard]] std::uint64_t value_of(const OpResult& r) const;
  [[nodiscard]] LatencySampler& sampler() noexcept { return sampler_; }
  [[nodiscard]] unsigned batch() const noexcept { return batch_; }

 private:
  void encode_key(std::uint64_t k, std::byte* out) const noexcept;
  void encode_value(std::uint64_t v, std::byte* out) const noexcept;

  Table& t_;
  Mode mode_;
  unsigned batch_;
  unsigned key_size_;
  unsigned value_size_;
  LatencySampler sampler_;
  std::vector<BatchRequest> breqs_;
  std::vector<std::byte> keybuf_;
  std::vector<std::byte> valbuf_;
  BatchOutcome out_;
};

/// Runs fn(tid) on n threads released together; optionally pinned.
void run_threads(unsigned n, bool pin, const std::function<void(unsigned)>& fn);

/// Inserts key positions [0, spec.keys) with value_for(key, 0).
void prepopulate(Table& t, const WorkloadSpec& s);

/// Requests per thread and optional deadline derived from ops/seconds.
struct Budget {
  std::uint64_t per_thread = 0;  // 0 = run until the deadline
  Clock::time_point deadline{};
  bool timed = false;
  [[nodiscard]] bool more(std::uint64_t done) const noexcept {
    if (timed) return Clock::now() < deadline;
    return done < per_thread;
  }
};
Budget make_budget(const WorkloadSpec& s, unsigned threads);

void fill_table_stats(RunReport& r, Table& t, std::size_t resizes_before);

}  // namespace dlht::bench::detail
