#include "common.hpp"

#include <pthread.h>
#include <sched.h>

#include <barrier>
#include <bit>
#include <cmath>
#include <thread>

namespace dlht::bench::detail {

LatencySummary summarize(std::vector<std::uint64_t>& samples) {
  LatencySummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  long double sum = 0;
  for (auto v : samples) sum += v;
  s.mean = static_cast<double>(sum / samples.size());
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * samples.size())) - 1;
  std::nth_element(samples.begin(), samples.begin() + rank, samples.end());
  s.p99 = static_cast<double>(samples[rank]);
  return s;
}

std::size_t default_bins(std::uint64_t keys) {
  return std::bit_ceil(std::max<std::uint64_t>(keys, 16));
}

Config make_config(const WorkloadSpec& s, std::size_t initial_bins) {
  Config c;
  c.mode = s.mode;
  c.hash = s.hash;
  c.initial_bins = initial_bins;
  c.link_ratio = s.link_ratio;
  c.resize = s.resize;
  c.single_thread = s.single_thread;
  c.interleave = s.interleave;
  c.max_threads = std::max<std::size_t>(256, s.threads + s.readers + 8);
  if (s.mode == Mode::Allocator) {
    c.layout.key_size = s.key_size;
    c.layout.value_size = s.value_size;
  }
  return c;
}

Client::Client(Table& t, const WorkloadSpec& s)
    : t_{t},
      mode_{s.mode},
      batch_{s.batch},
      key_size_{s.key_size},
      value_size_{s.value_size},
      sampler_{s.batch} {
  const std::size_t n = std::max(1u, batch_) * 2;
  breqs_.reserve(n);
  if (mode_ == Mode::Allocator) {
    keybuf_.resize(n * key_size_);
    valbuf_.resize(n * value_size_);
  }
}

void Client::encode_key(std::uint64_t k, std::byte* out) const noexcept {
  std::memcpy(out, &k, 8);
  std::uint64_t f = k * 0xD6E8FEB86659FD93ull + 1;
  for (unsigned i = 8; i < key_size_; ++i) {
    out[i] = static_cast<std::byte>(f >> ((i % 8) * 8));
    if (i % 8 == 7) f = f * 0xD6E8FEB86659FD93ull + 1;
  }
}

void Client::encode_value(std::uint64_t v, std::byte* out) const noexcept {
  std::memcpy(out, &v, 8);
  for (unsigned i = 8; i < value_size_; ++i) out[i] = static_cast<std::byte>(i);
}

std::uint64_t Client::value_of(const OpResult& r) const {
  if (mode_ == Mode::HashSet) return 0;
  if (mode_ == Mode::Inlined) return r.value;
  const RecordView v = t_.record(r);
  if (!v || v.value_size() < 8) return 0;
  std::uint64_t w;
  std::memcpy(&w, v.value().data(), 8);
  return w;
}

OpResult Client::one(const Req& r) {
  if (mode_ != Mode::Allocator) {
    switch (r.op) {
      case OpKind::Get: return t_.get(r.key);
      case OpKind::Put: return t_.put(r.key, r.value);
      case OpKind::Insert: return t_.insert(r.key, r.value);
      case OpKind::ShadowInsert: return t_.shadow_insert(r.key, r.value);
      case OpKind::Delete: return t_.erase(r.key);
      case OpKind::FinalizeShadow: return t_.finalize_shadow(r.key, r.decision);
    }
    return {Status::Invalid};
  }
  std::byte* kb = keybuf_.data();
  std::byte* vb = valbuf_.data();
  encode_key(r.key, kb);
  const std::span<const std::byte> key{kb, key_size_};
  switch (r.op) {
    case OpKind::Get: return t_.get(key, r.ns);
    case OpKind::Insert:
    case OpKind::ShadowInsert: {
      encode_value(r.value, vb);
      const std::span<const std::byte> val{vb, value_size_};
      return r.op == OpKind::Insert ? t_.insert(key, val, r.ns) : t_.shadow_insert(key, val, r.ns);
    }
    case OpKind::Delete: return t_.erase(key, r.ns);
    case OpKind::FinalizeShadow: return t_.finalize_shadow(key, r.decision, r.ns);
    case OpKind::Put: break;
  }
  return {Status::Invalid};
}

void Client::run(std::span<const Req> reqs, std::span<OpResult> results, bool stop_on_failure) {
  if (batch_ == 0) {
    bool failed = false;
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      if (failed) {
        results[i] = {Status::NotExecuted};
        continue;
      }
      if (sampler_.due()) {
        const auto start = Clock::now();
        results[i] = one(reqs[i]);
        sampler_.record(elapsed_ns(start, Clock::now()));
      } else {
        results[i] = one(reqs[i]);
      }
      if (stop_on_failure && !results[i].ok()) failed = true;
    }
    return;
  }
  breqs_.clear();
  const std::size_t need = reqs.size();
  if (mode_ == Mode::Allocator && keybuf_.size() < need * key_size_) {
    keybuf_.resize(need * key_size_);
    valbuf_.resize(need * value_size_);
  }
  for (std::size_t i = 0; i < need; ++i) {
    const Req& r = reqs[i];
    BatchRequest b{r.op, r.key, r.value};
    b.decision = r.decision;
    b.ns = r.ns;
    if (mode_ == Mode::Allocator) {
      std::byte* kb = keybuf_.data() + i * key_size_;
      encode_key(r.key, kb);
      b.key_bytes = {kb, key_size_};
      if (r.op == OpKind::Insert || r.op == OpKind::ShadowInsert) {
        std::byte* vb = valbuf_.data() + i * value_size_;
        encode_value(r.value, vb);
        b.value_bytes = {vb, value_size_};
      }
    }
    breqs_.push_back(b);
  }
  // Batches are timed as a whole; the sample stands for every request in it.
  const bool timed = sampler_.due();
  const auto start = timed ? Clock::now() : Clock::time_point{};
  t_.execute_batch(breqs_, out_, stop_on_failure);
  if (timed) sampler_.record(elapsed_ns(start, Clock::now()));
  std::copy(out_.results.begin(), out_.results.end(), results.begin());
}

void run_threads(unsigned n, bool pin, const std::function<void(unsigned)>& fn) {
  std::barrier start(static_cast<std::ptrdiff_t>(n));
  std::vector<std::thread> pool;
  pool.reserve(n);
  const unsigned cpus = std::max(1u, std::thread::hardware_concurrency());
  for (unsigned t = 0; t < n; ++t) {
    pool.emplace_back([&, t] {
      if (pin) {
        cpu_set_t set;
        CPU_ZERO(&set);
        CPU_SET(t % cpus, &set);
        pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
      }
      start.arrive_and_wait();
      fn(t);
    });
  }
  for (auto& th : pool) th.join();
}

void prepopulate(Table& t, const WorkloadSpec& s) {
  WorkloadSpec p = s;
  p.batch = 32;
  const unsigned threads = std::max(1u, s.single_thread ? 1u : s.threads);
  run_threads(threads, s.pin, [&](unsigned tid) {
    Client c(t, p);
    std::vector<Req> reqs;
    std::vector<OpResult> res(32);
    for (std::uint64_t i = tid; i < s.keys;) {
      reqs.clear();
      for (; i < s.keys && reqs.size() < 32; i += threads) {
        const std::uint64_t k = key_at(i, s.seed);
        reqs.push_back({OpKind::Insert, k, value_for(k, 0)});
      }
      c.run(reqs, res);
    }
    if (s.mode == Mode::Allocator) t.advance_epoch();
  });
}

Budget make_budget(const WorkloadSpec& s, unsigned threads) {
  Budget b;
  if (s.seconds > 0.0) {
    b.timed = true;
    b.deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(s.seconds));
  } else {
    const std::uint64_t total = s.ops ? s.ops : 1'000'000;
    b.per_thread = (total + threads - 1) / threads;
  }
  return b;
}

void fill_table_stats(RunReport& r, Table& t, std::size_t resizes_before) {
  const auto st = t.stats();
  const auto hist = t.resize_history();
  r.resizes = hist.size() - std::min(hist.size(), resizes_before);
  r.resize_log.assign(hist.begin() + static_cast<std::ptrdiff_t>(std::min(hist.size(), resizes_before)), hist.end());
  const double nominal = static_cast<double>(st.nbins) * 3.0 + static_cast<double>(st.nlinks) * 4.0;
  r.occupancy = nominal > 0 ? static_cast<double>(t.size()) / nominal : 0.0;
  r.metrics["final_bins"] = static_cast<double>(st.nbins);
  r.metrics["links_used"] = static_cast<double>(st.links_used);
}

}  // namespace dlht::bench::detail
