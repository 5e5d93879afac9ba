// Throughput drivers: reads, insert/delete pairs, put mixes and population.

#include <atomic>
#include <cmath>
#include <mutex>

#include "common.hpp"

namespace dlht::bench {

using namespace detail;

namespace {

struct Timer {
  Clock::time_point start = Clock::now();
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(Clock::now() - start).count();
  }
};

/// Merges per-thread latency samples into the report.
void finish_latency(RunReport& r, std::vector<std::vector<std::uint64_t>>& per_thread) {
  std::vector<std::uint64_t> all;
  for (auto& v : per_thread) all.insert(all.end(), v.begin(), v.end());
  const auto s = summarize(all);
  r.mean_latency_ns = s.mean;
  r.p99_latency_ns = s.p99;
  r.metrics["latency_samples"] = static_cast<double>(s.count);
}

void finish_throughput(RunReport& r, double seconds) {
  r.seconds = seconds;
  r.requests = 0;
  for (const auto& [name, c] : r.ops) r.requests += c.issued;
  r.throughput = seconds > 0 ? static_cast<double>(r.requests) / seconds : 0.0;
}

void check_reconciles(RunReport& r) {
  bool ok = true;
  for (const auto& [name, c] : r.ops) ok = ok && c.reconciles();
  r.check("counts reconcile", ok);
}

std::size_t initial_bins_for(const WorkloadSpec& s) {
  return s.initial_bins ? s.initial_bins : default_bins(s.keys);
}

void tally(OpCounts& c, bool ok) {
  ++c.issued;
  if (ok)
    ++c.succeeded;
  else
    ++c.failed;
}

}  // namespace

RunReport run_get(const WorkloadSpec& in) {
  WorkloadSpec s = in;
  if (s.workload == Workload::Skew && s.skew == 0.0) s.skew = 0.9;
  Table t(make_config(s, initial_bins_for(s)));
  prepopulate(t, s);
  const std::size_t before = t.resize_history().size();

  RunReport r;
  r.workload = std::string(workload_name(s.workload));
  r.threads = s.threads;
  std::vector<OpCounts> counts(s.threads);
  std::vector<std::uint64_t> wrong(s.threads, 0);
  std::vector<std::vector<std::uint64_t>> lat(s.threads);
  const unsigned width = std::max(1u, s.batch);

  const Budget budget = make_budget(s, s.threads);
  const Timer timer;
  run_threads(s.threads, s.pin, [&](unsigned tid) {
    Client c(t, s);
    KeyPicker pick(s, tid);
    std::vector<Req> reqs(width);
    std::vector<OpResult> res(width);
    OpCounts local;
    std::uint64_t bad = 0;
    for (std::uint64_t done = 0; budget.more(done); done += width) {
      for (auto& q : reqs) q = {OpKind::Get, key_at(pick.next(), s.seed)};
      c.run(reqs, res);
      for (unsigned i = 0; i < width; ++i) {
        const bool found = res[i].status == Status::Found;
        tally(local, found);
        if (found && s.mode != Mode::HashSet && c.value_of(res[i]) != value_for(reqs[i].key, 0)) ++bad;
      }
    }
    counts[tid] = local;
    wrong[tid] = bad;
    lat[tid] = std::move(c.sampler().samples());
  });
  const double secs = timer.seconds();

  for (auto& c : counts) r.ops["get"] += c;
  std::uint64_t bad = 0;
  for (auto w : wrong) bad += w;
  finish_throughput(r, secs);
  finish_latency(r, lat);
  fill_table_stats(r, t, before);
  r.check("every get found its key", r.ops["get"].failed == 0, std::to_string(r.ops["get"].failed) + " misses");
  r.check("every value matches its key", bad == 0, std::to_string(bad) + " wrong values");
  check_reconciles(r);
  return r;
}

RunReport run_insdel(const WorkloadSpec& s) {
  Table t(make_config(s, initial_bins_for(s)));
  prepopulate(t, s);
  const std::size_t before = t.resize_history().size();

  RunReport r;
  r.workload = std::string(workload_name(s.workload));
  r.threads = s.threads;
  std::vector<OpCounts> ins(s.threads), del(s.threads);
  std::vector<std::vector<std::uint64_t>> lat(s.threads);
  // Pairs never straddle batches, so every batch leaves the size unchanged.
  const unsigned width = std::max(2u, s.batch + (s.batch & 1u));

  const Budget budget = make_budget(s, s.threads);
  const Timer timer;
  run_threads(s.threads, s.pin, [&](unsigned tid) {
    Client c(t, s);
    std::vector<Req> reqs(width);
    std::vector<OpResult> res(width);
    OpCounts li, ld;
    const std::uint64_t base = (std::uint64_t{tid} + 1) << 40;
    std::uint64_t j = 0;
    std::uint64_t rounds = 0;
    for (std::uint64_t done = 0; budget.more(done); done += width) {
      for (unsigned i = 0; i < width; i += 2) {
        const std::uint64_t k = key_at(base + j++, s.seed);
        reqs[i] = {OpKind::Insert, k, value_for(k, 1)};
        reqs[i + 1] = {OpKind::Delete, k};
      }
      c.run(reqs, res);
      for (unsigned i = 0; i < width; i += 2) {
        tally(li, res[i].status == Status::Inserted);
        tally(ld, res[i + 1].status == Status::Deleted);
      }
      if (s.mode == Mode::Allocator && ++rounds % 64 == 0) t.advance_epoch();
    }
    if (s.mode == Mode::Allocator) t.advance_epoch();
    ins[tid] = li;
    del[tid] = ld;
    lat[tid] = std::move(c.sampler().samples());
  });
  const double secs = timer.seconds();

  for (unsigned i = 0; i < s.threads; ++i) {
    r.ops["insert"] += ins[i];
    r.ops["delete"] += del[i];
  }
  finish_throughput(r, secs);
  finish_latency(r, lat);
  fill_table_stats(r, t, before);
  const std::size_t live = t.size();
  r.metrics["live_after"] = static_cast<double>(live);
  r.check("every insert succeeded", r.ops["insert"].failed == 0);
  r.check("every delete succeeded", r.ops["delete"].failed == 0);
  r.check("population unchanged", live == s.keys, std::to_string(live) + " live of " + std::to_string(s.keys));
  check_reconciles(r);
  return r;
}

RunReport run_mix(const WorkloadSpec& s) {
  double update = 0.5;
  const bool rmw = s.workload == Workload::YcsbF;
  const char* update_name = "put";
  if (s.workload == Workload::YcsbB) update = 0.05;
  if (s.workload == Workload::YcsbA || s.workload == Workload::YcsbB) update_name = "update";
  if (rmw) update_name = "rmw";

  Table t(make_config(s, initial_bins_for(s)));
  prepopulate(t, s);
  const std::size_t before = t.resize_history().size();

  RunReport r;
  r.workload = std::string(workload_name(s.workload));
  r.threads = s.threads;
  std::vector<OpCounts> reads(s.threads), updates(s.threads);
  std::vector<std::uint64_t> wrong(s.threads, 0), calls(s.threads, 0);
  std::vector<std::vector<std::uint64_t>> lat(s.threads);
  const unsigned width = std::max(1u, s.batch);

  const Budget budget = make_budget(s, s.threads);
  const Timer timer;
  run_threads(s.threads, s.pin, [&](unsigned tid) {
    Client c(t, s);
    KeyPicker pick(s, tid);
    std::vector<Req> reqs;
    reqs.reserve(width + 1);
    std::vector<OpResult> res(width + 1);
    std::vector<char> is_update;
    is_update.reserve(width + 1);
    OpCounts lr, lu;
    std::uint64_t bad = 0;
    std::uint64_t n = 0;
    std::uint32_t version = (tid + 1) << 24;
    for (std::uint64_t done = 0; budget.more(done);) {
      reqs.clear();
      is_update.clear();
      while (reqs.size() < width) {
        const std::uint64_t k = key_at(pick.next(), s.seed);
        const bool up = pick.unit() < update;
        if (up && rmw) {
          reqs.push_back({OpKind::Get, k});
          is_update.push_back(2);
        }
        if (up) {
          reqs.push_back({OpKind::Put, k, value_for(k, ++version)});
          is_update.push_back(1);
        } else {
          reqs.push_back({OpKind::Get, k});
          is_update.push_back(0);
        }
      }
      c.run(reqs, res);
      for (std::size_t i = 0; i < reqs.size(); ++i) {
        const OpResult& o = res[i];
        const bool ok_value = value_belongs(reqs[i].key, o.value);
        if (is_update[i] == 2) {
          // Read half of a read-modify-write; tallied with its put.
          const bool ok = o.status == Status::Found && ok_value;
          const bool put_ok = res[i + 1].status == Status::Updated && value_belongs(reqs[i].key, res[i + 1].value);
          tally(lu, ok && put_ok);
          if (!ok_value || !value_belongs(reqs[i].key, res[i + 1].value)) ++bad;
          ++i;
          continue;
        }
        if (is_update[i] == 1) {
          tally(lu, o.status == Status::Updated);
        } else {
          tally(lr, o.status == Status::Found);
        }
        if (!ok_value) ++bad;
      }
      n += reqs.size();
      done += reqs.size();
    }
    reads[tid] = lr;
    updates[tid] = lu;
    wrong[tid] = bad;
    calls[tid] = n;
    lat[tid] = std::move(c.sampler().samples());
  });
  const double secs = timer.seconds();

  std::uint64_t bad = 0, total_calls = 0;
  for (unsigned i = 0; i < s.threads; ++i) {
    r.ops["read"] += reads[i];
    r.ops[update_name] += updates[i];
    bad += wrong[i];
    total_calls += calls[i];
  }
  finish_throughput(r, secs);
  // A read-modify-write issues two table calls; throughput counts calls.
  r.requests = total_calls;
  r.throughput = secs > 0 ? static_cast<double>(total_calls) / secs : 0.0;
  finish_latency(r, lat);
  fill_table_stats(r, t, before);

  const double nops = static_cast<double>(r.ops["read"].issued + r.ops[update_name].issued);
  const double measured = nops > 0 ? static_cast<double>(r.ops[update_name].issued) / nops : 0.0;
  // 0.5% absolute once the sample is large; a 4-sigma band below that.
  const double tol = std::max(0.005, 4.0 * std::sqrt(update * (1 - update) / std::max(1.0, nops)));
  r.metrics["update_fraction"] = measured;
  r.metrics["update_fraction_target"] = update;
  r.check("mix ratio honored", std::abs(measured - update) <= tol,
          std::to_string(measured) + " vs " + std::to_string(update));
  r.check("every key stayed present", r.ops["read"].failed == 0 && r.ops[update_name].failed == 0);
  r.check("no value from another key", bad == 0, std::to_string(bad) + " foreign values");
  check_reconciles(r);
  return r;
}

RunReport run_population(const WorkloadSpec& in) {
  WorkloadSpec s = in;
  if (s.workload == Workload::Resizing && s.readers == 0) s.readers = 1;
  Table t(make_config(s, s.initial_bins ? s.initial_bins : 16384));

  RunReport r;
  r.workload = std::string(workload_name(s.workload));
  r.threads = s.threads + s.readers;
  const unsigned writers = s.threads;
  const unsigned width = std::max(1u, s.batch);
  std::vector<std::atomic<std::uint64_t>> progress(writers);
  std::atomic<unsigned> writers_left{writers};
  std::vector<OpCounts> ins(writers), gets(s.readers);
  std::vector<std::uint64_t> wrong(s.readers, 0);
  std::vector<std::vector<std::uint64_t>> lat(writers);
  std::vector<std::vector<std::uint64_t>> during(s.readers), quiet(s.readers);

  const Timer timer;
  run_threads(writers + s.readers, s.pin, [&](unsigned tid) {
    if (tid < writers) {
      Client c(t, s);
      std::vector<Req> reqs;
      reqs.reserve(width);
      std::vector<OpResult> res(width);
      OpCounts local;
      std::uint64_t j = 0;
      for (std::uint64_t i = tid; i < s.keys;) {
        reqs.clear();
        for (; i < s.keys && reqs.size() < width; i += writers) {
          const std::uint64_t k = key_at(i, s.seed);
          reqs.push_back({OpKind::Insert, k, value_for(k, 0)});
        }
        c.run(reqs, res);
        for (std::size_t q = 0; q < reqs.size(); ++q) tally(local, res[q].status == Status::Inserted);
        j += reqs.size();
        progress[tid].store(j, std::memory_order_release);
        if (s.mode == Mode::Allocator && (j & 4095) < width) t.advance_epoch();
      }
      ins[tid] = local;
      lat[tid] = std::move(c.sampler().samples());
      writers_left.fetch_sub(1, std::memory_order_release);
      return;
    }
    // Readers time every get of an already inserted key and file it under
    // whether a resize was in flight around it. Quiescent samples are
    // thinned 1 in 16 to bound memory.
    const unsigned rid = tid - writers;
    WorkloadSpec rs = s;
    rs.batch = 0;
    Client c(t, rs);
    KeyPicker pick(s, tid);
    OpCounts local;
    std::uint64_t bad = 0, n = 0;
    auto& dv = during[rid];
    auto& qv = quiet[rid];
    while (writers_left.load(std::memory_order_acquire) > 0) {
      const unsigned w = static_cast<unsigned>(below(pick.rng()(), writers));
      const std::uint64_t p = progress[w].load(std::memory_order_acquire);
      if (p == 0) continue;
      const std::uint64_t i = below(pick.rng()(), p) * writers + w;
      const std::uint64_t k = key_at(i, s.seed);
      const bool before = t.resizing();
      const auto start = Clock::now();
      const OpResult o = c.one({OpKind::Get, k});
      const std::uint64_t ns = elapsed_ns(start, Clock::now());
      const bool after = t.resizing();
      const bool found = o.status == Status::Found;
      tally(local, found);
      if (found && s.mode != Mode::HashSet && c.value_of(o) != value_for(k, 0)) ++bad;
      if (before || after)
        dv.push_back(ns);
      else if (++n % 16 == 0)
        qv.push_back(ns);
    }
    gets[rid] = local;
    wrong[rid] = bad;
  });
  const double secs = timer.seconds();

  for (auto& c : ins) r.ops["insert"] += c;
  for (auto& c : gets) r.ops["reader-get"] += c;
  finish_throughput(r, secs);
  r.requests = r.ops["insert"].issued;
  r.throughput = secs > 0 ? static_cast<double>(r.requests) / secs : 0.0;
  r.metrics["reader_requests"] = static_cast<double>(r.ops["reader-get"].issued);
  finish_latency(r, lat);
  fill_table_stats(r, t, 0);

  std::vector<std::uint64_t> dall, qall;
  for (auto& v : during) dall.insert(dall.end(), v.begin(), v.end());
  for (auto& v : quiet) qall.insert(qall.end(), v.begin(), v.end());
  const auto ds = summarize(dall);
  const auto qs = summarize(qall);
  r.metrics["reader_p99_transfer_ns"] = ds.p99;
  r.metrics["reader_p99_quiescent_ns"] = qs.p99;
  r.metrics["reader_mean_transfer_ns"] = ds.mean;
  r.metrics["reader_mean_quiescent_ns"] = qs.mean;
  r.metrics["reader_transfer_samples"] = static_cast<double>(ds.count);
  r.metrics["reader_quiescent_samples"] = static_cast<double>(qs.count);

  double min_occ = r.resize_log.empty() ? 0.0 : 1.0, sum_occ = 0.0;
  bool schedule = true;
  for (const auto& rec : r.resize_log) {
    min_occ = std::min(min_occ, rec.occupancy);
    sum_occ += rec.occupancy;
    schedule = schedule && rec.factor == growth_factor(rec.from_bins) && rec.to_bins == rec.from_bins * rec.factor;
  }
  r.metrics["occupancy_at_resize_min"] = min_occ;
  r.metrics["occupancy_at_resize_mean"] = r.resize_log.empty() ? 0.0 : sum_occ / r.resize_log.size();

  // Final sweep: every inserted key must be present with its value.
  std::uint64_t lost = 0, bad = 0;
  {
    WorkloadSpec vs = s;
    vs.batch = 32;
    Client c(t, vs);
    std::vector<Req> reqs;
    std::vector<OpResult> res(32);
    for (std::uint64_t i = 0; i < s.keys;) {
      reqs.clear();
      for (; i < s.keys && reqs.size() < 32; ++i) reqs.push_back({OpKind::Get, key_at(i, s.seed)});
      c.run(reqs, res);
      for (std::size_t q = 0; q < reqs.size(); ++q) {
        if (res[q].status != Status::Found)
          ++lost;
        else if (s.mode != Mode::HashSet && c.value_of(res[q]) != value_for(reqs[q].key, 0))
          ++bad;
      }
    }
  }
  for (auto w : wrong) bad += w;
  r.check("every insert succeeded", r.ops["insert"].failed == 0);
  r.check("no inserted key lost", lost == 0, std::to_string(lost) + " lost");
  r.check("readers never missed an inserted key", r.ops["reader-get"].failed == 0,
          std::to_string(r.ops["reader-get"].failed) + " misses");
  r.check("every value matches its key", bad == 0);
  r.check("growth follows the schedule", schedule);
  check_reconciles(r);
  return r;
}

}  // namespace dlht::bench
