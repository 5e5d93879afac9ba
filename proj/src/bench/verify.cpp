// Correctness drivers: sequential oracle replay, journaled concurrent stress
// and the lock-manager pattern.

#include <algorithm>
#include <atomic>
#include <unordered_map>
#include <unordered_set>

#include "common.hpp"

namespace dlht::bench {

using namespace detail;

namespace {

std::string describe(std::uint64_t n, const OpResult& got, Status want) {
  return "op " + std::to_string(n) + ": got " + to_string(got.status) + ", expected " + to_string(want);
}

bool carries_value(Status s) {
  return s == Status::Found || s == Status::AlreadyPresent || s == Status::Deleted || s == Status::Updated ||
         s == Status::Done;
}

std::uint64_t fnv(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= 0x100000001B3ull;
  }
  return h;
}

struct ModelEntry {
  std::uint64_t value = 0;
  bool shadow = false;
};

/// Reference semantics of one request against a plain map.
OpResult model_apply(std::unordered_map<std::uint64_t, ModelEntry>& m, std::uint64_t id, const Req& q) {
  auto it = m.find(id);
  const bool present = it != m.end();
  const bool live = present && !it->second.shadow;
  switch (q.op) {
    case OpKind::Get:
      return live ? OpResult{Status::Found, it->second.value} : OpResult{Status::NotFound};
    case OpKind::Insert:
    case OpKind::ShadowInsert:
      if (present) return {Status::AlreadyPresent, it->second.value};
      m[id] = {q.value, q.op == OpKind::ShadowInsert};
      return {Status::Inserted};
    case OpKind::Delete: {
      if (!live) return {Status::NotFound};
      const std::uint64_t v = it->second.value;
      m.erase(it);
      return {Status::Deleted, v};
    }
    case OpKind::Put: {
      if (!live) return {Status::NotFound};
      const std::uint64_t v = it->second.value;
      it->second.value = q.value;
      return {Status::Updated, v};
    }
    case OpKind::FinalizeShadow: {
      if (!present || !it->second.shadow) return {Status::NotFound};
      const std::uint64_t v = it->second.value;
      if (q.decision == Decision::Commit)
        it->second.shadow = false;
      else
        m.erase(it);
      return {Status::Done, v};
    }
  }
  return {Status::Invalid};
}

}  // namespace

RunReport run_verify_seq(const WorkloadSpec& s) {
  Config cfg = make_config(s, s.initial_bins ? s.initial_bins : 16);
  cfg.resize = true;
  Table t(cfg);
  RunReport r;
  r.workload = std::string(workload_name(s.workload));
  r.threads = 1;

  const bool inlined = s.mode == Mode::Inlined;
  const bool alloc = s.mode == Mode::Allocator;
  const std::uint64_t total = s.ops ? s.ops : 1'000'000;
  // Each model id packs a key position with a namespace (Allocator only).
  std::unordered_map<std::uint64_t, ModelEntry> model;
  std::mt19937_64 rng{thread_seed(s.seed, 0)};

  WorkloadSpec bs = s;
  bs.batch = 16;
  WorkloadSpec us = s;
  us.batch = 0;
  Client batched(t, bs), single(t, us);

  std::vector<Req> reqs;
  std::vector<std::uint64_t> ids;
  std::vector<OpResult> res(16);
  std::uint64_t n = 0, digest = 0xCBF29CE484222325ull;
  std::uint32_t version = 0;
  std::string first_error;
  std::uint64_t mismatches = 0;
  std::map<std::string, OpCounts> counts;

  // Weights: get, insert, delete, put, shadow insert, finalize.
  const std::array<unsigned, 6> weights{30, 25, 20, inlined ? 10u : 0u, 8, 7};
  const unsigned wsum = weights[0] + weights[1] + weights[2] + weights[3] + weights[4] + weights[5];
  const std::array<OpKind, 6> kinds{OpKind::Get,    OpKind::Insert,       OpKind::Delete,
                                    OpKind::Put,    OpKind::ShadowInsert, OpKind::FinalizeShadow};
  const std::array<const char*, 6> names{"get", "insert", "delete", "put", "shadow-insert", "finalize"};

  const auto start = Clock::now();
  while (n < total) {
    const std::size_t len = std::min<std::uint64_t>(1 + rng() % 16, total - n);
    const bool use_batch = (rng() & 1) != 0;
    reqs.clear();
    ids.clear();
    for (std::size_t i = 0; i < len; ++i) {
      unsigned pick = static_cast<unsigned>(rng() % wsum), kind = 0;
      while (pick >= weights[kind]) pick -= weights[kind++];
      const std::uint64_t pos = below(rng(), s.keys);
      const std::uint16_t ns = alloc ? static_cast<std::uint16_t>(rng() % 3) : 0;
      const std::uint64_t key = key_at(pos, s.seed);
      Req q{kinds[kind], key, value_for(key, ++version)};
      q.ns = ns;
      q.decision = (rng() & 1) ? Decision::Commit : Decision::Abort;
      reqs.push_back(q);
      ids.push_back(pos * 4 + ns);
    }
    (use_batch ? batched : single).run(reqs, std::span(res.data(), len));
    Client& reader = use_batch ? batched : single;
    for (std::size_t i = 0; i < len; ++i, ++n) {
      const OpResult want = model_apply(model, ids[i], reqs[i]);
      const OpResult& got = res[i];
      const std::uint64_t got_value = carries_value(got.status) ? reader.value_of(got) : 0;
      const unsigned kind = static_cast<unsigned>(
          std::find(kinds.begin(), kinds.end(), reqs[i].op) - kinds.begin());
      auto& c = counts[names[kind]];
      ++c.issued;
      got.ok() ? ++c.succeeded : ++c.failed;
      digest = fnv(fnv(digest, static_cast<std::uint64_t>(got.status)), got_value);
      bool same = got.status == want.status;
      if (same && s.mode != Mode::HashSet && carries_value(want.status)) same = got_value == want.value;
      if (!same) {
        if (mismatches++ == 0) {
          first_error = describe(n, got, want.status);
          if (got.status == want.status) first_error += " (value differs)";
        }
      }
    }
    if (alloc && n % 1024 < len) t.advance_epoch();
  }
  if (alloc) t.advance_epoch();
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();

  // Final state: every model entry answers with its value and nothing else
  // is live.
  std::uint64_t live = 0, shadows = 0, missing = 0;
  for (const auto& [id, e] : model) {
    if (e.shadow) {
      ++shadows;
      continue;
    }
    ++live;
    Req q{OpKind::Get, key_at(id / 4, s.seed)};
    q.ns = static_cast<std::uint16_t>(id % 4);
    const OpResult o = single.one(q);
    if (o.status != Status::Found || (s.mode != Mode::HashSet && single.value_of(o) != e.value)) ++missing;
  }
  std::uint64_t visited = 0;
  t.iterate_weak([&](std::uint64_t, std::uint64_t) { ++visited; });
  const AuditReport a = t.audit();

  r.ops = counts;
  r.requests = n;
  r.throughput = r.seconds > 0 ? static_cast<double>(n) / r.seconds : 0.0;
  fill_table_stats(r, t, 0);
  r.metrics["outcome_digest"] = static_cast<double>(digest >> 12);
  r.metrics["mismatches"] = static_cast<double>(mismatches);
  r.metrics["final_live"] = static_cast<double>(live);
  r.check("every outcome matches the oracle", mismatches == 0, first_error);
  r.check("final contents match the oracle", missing == 0 && visited == live && a.shadow == shadows,
          std::to_string(missing) + " missing, " + std::to_string(visited) + " visited of " + std::to_string(live));
  r.check("audit clean", a.clean());
  return r;
}

namespace {

struct JournalEntry {
  OpKind op;
  Status status;
  std::uint32_t pos;
  std::uint64_t written;  // value this request tried to store
  std::uint64_t seen;     // value the result carried
};

}  // namespace

RunReport run_verify_stress(const WorkloadSpec& s) {
  Config cfg = make_config(s, s.initial_bins ? s.initial_bins : 16);
  Table t(cfg);
  RunReport r;
  r.workload = std::string(workload_name(s.workload));
  r.threads = s.threads;
  const bool inlined = s.mode == Mode::Inlined;
  const bool has_values = s.mode != Mode::HashSet;
  const std::uint64_t keys = std::min<std::uint64_t>(s.keys, 0xFFFF'FFFFull);

  std::vector<std::vector<JournalEntry>> journals(s.threads);
  std::vector<std::vector<std::uint64_t>> lat(s.threads);
  const unsigned width = std::max(1u, s.batch);
  const Budget budget = make_budget(s, s.threads);
  const auto start = Clock::now();

  run_threads(s.threads, s.pin, [&](unsigned tid) {
    Client c(t, s);
    std::mt19937_64 rng{thread_seed(s.seed, tid)};
    auto& journal = journals[tid];
    if (!budget.timed) journal.reserve(budget.per_thread + width);
    std::vector<Req> reqs(width);
    std::vector<std::uint32_t> pos(width);
    std::vector<OpResult> res(width);
    std::uint64_t seq = 0;
    const std::uint64_t tag = std::uint64_t{tid + 1} << 48;
    for (std::uint64_t done = 0; budget.more(done); done += width) {
      for (unsigned i = 0; i < width; ++i) {
        const unsigned d = static_cast<unsigned>(rng() % 100);
        const OpKind op = d < 35 ? OpKind::Get
                          : d < 65 ? OpKind::Insert
                          : d < 90 ? OpKind::Delete
                                   : (inlined ? OpKind::Put : OpKind::Get);
        pos[i] = static_cast<std::uint32_t>(below(rng(), keys));
        reqs[i] = {op, key_at(pos[i], s.seed), has_values ? (tag | ++seq) : 0};
      }
      c.run(reqs, res);
      for (unsigned i = 0; i < width; ++i) {
        const bool writes = reqs[i].op == OpKind::Insert || reqs[i].op == OpKind::Put;
        journal.push_back({reqs[i].op, res[i].status, pos[i], writes ? reqs[i].value : 0,
                           carries_value(res[i].status) ? c.value_of(res[i]) : 0});
      }
      if (s.mode == Mode::Allocator && (done / width) % 8 == 7) t.advance_epoch();
    }
    if (s.mode == Mode::Allocator) t.advance_epoch();
    lat[tid] = std::move(c.sampler().samples());
  });
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();

  // Conservation per key: successful inserts minus successful deletes is
  // the final presence. Values seen must have been written to that key.
  std::vector<std::int64_t> balance(keys, 0);
  std::unordered_map<std::uint64_t, std::uint32_t> owner;  // written value -> key position
  for (const auto& j : journals)
    for (const auto& e : j)
      if (e.written != 0 && (e.op == OpKind::Insert || e.op == OpKind::Put)) owner.emplace(e.written, e.pos);

  std::uint64_t phantoms = 0, bad_status = 0;
  std::map<std::string, OpCounts> counts;
  for (const auto& j : journals) {
    for (const auto& e : j) {
      const char* name = e.op == OpKind::Get ? "get" : e.op == OpKind::Insert ? "insert" : e.op == OpKind::Delete ? "delete" : "put";
      auto& c = counts[name];
      ++c.issued;
      e.status == Status::Found || e.status == Status::Inserted || e.status == Status::Deleted ||
              e.status == Status::Updated
          ? ++c.succeeded
          : ++c.failed;
      if (e.op == OpKind::Insert && e.status == Status::Inserted) ++balance[e.pos];
      if (e.op == OpKind::Delete && e.status == Status::Deleted) --balance[e.pos];
      const bool legal = (e.op == OpKind::Get && (e.status == Status::Found || e.status == Status::NotFound)) ||
                         (e.op == OpKind::Insert && (e.status == Status::Inserted || e.status == Status::AlreadyPresent)) ||
                         (e.op == OpKind::Delete && (e.status == Status::Deleted || e.status == Status::NotFound)) ||
                         (e.op == OpKind::Put && (e.status == Status::Updated || e.status == Status::NotFound));
      if (!legal) ++bad_status;
      if (has_values && carries_value(e.status)) {
        auto it = owner.find(e.seen);
        if (it == owner.end() || it->second != e.pos) ++phantoms;
      }
    }
  }

  std::uint64_t conservation = 0, final_phantoms = 0;
  WorkloadSpec vs = s;
  vs.batch = 0;
  Client check(t, vs);
  for (std::uint64_t p = 0; p < keys; ++p) {
    const OpResult o = check.one({OpKind::Get, key_at(p, s.seed)});
    const bool present = o.status == Status::Found;
    if (balance[p] != (present ? 1 : 0)) ++conservation;
    if (present && has_values) {
      auto it = owner.find(check.value_of(o));
      if (it == owner.end() || it->second != p) ++final_phantoms;
    }
  }
  const AuditReport a = t.audit();
  const std::size_t live = t.size();
  std::int64_t expected_live = 0;
  for (auto b : balance) expected_live += b;

  r.ops = counts;
  for (const auto& [name, c] : counts) r.requests += c.issued;
  r.seconds = secs;
  r.throughput = secs > 0 ? static_cast<double>(r.requests) / secs : 0.0;
  {
    std::vector<std::uint64_t> all;
    for (auto& v : lat) all.insert(all.end(), v.begin(), v.end());
    const auto ls = summarize(all);
    r.mean_latency_ns = ls.mean;
    r.p99_latency_ns = ls.p99;
  }
  fill_table_stats(r, t, 0);
  r.metrics["audit_duplicates"] = static_cast<double>(a.duplicate_keys);
  r.check("statuses legal for their operation", bad_status == 0, std::to_string(bad_status));
  r.check("presence conserved per key", conservation == 0 && live == static_cast<std::size_t>(expected_live),
          std::to_string(conservation) + " keys disagree");
  r.check("no phantom values", phantoms == 0 && final_phantoms == 0,
          std::to_string(phantoms) + " during, " + std::to_string(final_phantoms) + " at end");
  r.check("audit clean", a.clean(),
          "dups " + std::to_string(a.duplicate_keys) + " misplaced " + std::to_string(a.misplaced_keys));
  return r;
}

RunReport run_lockmgr(const WorkloadSpec& s) {
  Table t(make_config(s, s.initial_bins ? s.initial_bins : default_bins(s.keys)));
  RunReport r;
  r.workload = std::string(workload_name(s.workload));
  r.threads = s.threads;
  constexpr unsigned kLocks = 4;
  const std::uint64_t nlocks = std::max<std::uint64_t>(s.keys, kLocks);
  std::vector<std::atomic<std::uint32_t>> holders(nlocks);

  struct Local {
    OpCounts lock, unlock;
    std::uint64_t granted = 0, conflicts = 0, overlaps = 0, skipped_wrong = 0;
  };
  std::vector<Local> locals(s.threads);
  std::vector<std::vector<std::uint64_t>> lat(s.threads);
  const Budget budget = make_budget(s, s.threads);
  const auto start = Clock::now();

  run_threads(s.threads, s.pin, [&](unsigned tid) {
    Client c(t, s);
    std::mt19937_64 rng{thread_seed(s.seed, tid)};
    Local& L = locals[tid];
    std::vector<std::uint64_t> pos;
    std::vector<Req> lock(kLocks), unlock;
    std::vector<OpResult> res(kLocks), ures(kLocks);
    for (std::uint64_t done = 0; budget.more(done);) {
      pos.clear();
      while (pos.size() < kLocks) {
        const std::uint64_t p = below(rng(), nlocks);
        if (std::find(pos.begin(), pos.end(), p) == pos.end()) pos.push_back(p);
      }
      // A global acquisition order rules out lock-order cycles.
      std::sort(pos.begin(), pos.end(),
                [&](auto a, auto b) { return key_at(a, s.seed) < key_at(b, s.seed); });
      for (unsigned i = 0; i < kLocks; ++i) lock[i] = {OpKind::Insert, key_at(pos[i], s.seed)};
      c.run(lock, res, true);
      done += kLocks;
      unsigned held = 0;
      bool stopped = false;
      for (unsigned i = 0; i < kLocks; ++i) {
        ++L.lock.issued;
        if (res[i].status == Status::Inserted) {
          ++L.lock.succeeded;
          if (!stopped) ++held;
          else ++L.skipped_wrong;
        } else if (res[i].status == Status::NotExecuted) {
          ++L.lock.not_executed;
          if (!stopped) ++L.skipped_wrong;
        } else {
          ++L.lock.failed;
          if (stopped) ++L.skipped_wrong;
          stopped = true;
        }
      }
      if (held == kLocks) {
        ++L.granted;
        for (unsigned i = 0; i < kLocks; ++i)
          if (holders[pos[i]].fetch_add(1, std::memory_order_acq_rel) != 0) ++L.overlaps;
        for (unsigned i = 0; i < kLocks; ++i) holders[pos[i]].fetch_sub(1, std::memory_order_acq_rel);
      } else {
        ++L.conflicts;
      }
      unlock.clear();
      for (unsigned i = 0; i < held; ++i) unlock.push_back({OpKind::Delete, key_at(pos[i], s.seed)});
      if (!unlock.empty()) {
        c.run(unlock, std::span(ures.data(), unlock.size()));
        for (std::size_t i = 0; i < unlock.size(); ++i) {
          ++L.unlock.issued;
          ures[i].status == Status::Deleted ? ++L.unlock.succeeded : ++L.unlock.failed;
        }
        done += unlock.size();
      }
    }
    lat[tid] = std::move(c.sampler().samples());
  });
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();

  Local total;
  for (const auto& L : locals) {
    total.lock += L.lock;
    total.unlock += L.unlock;
    total.granted += L.granted;
    total.conflicts += L.conflicts;
    total.overlaps += L.overlaps;
    total.skipped_wrong += L.skipped_wrong;
  }
  r.ops["lock"] = total.lock;
  r.ops["unlock"] = total.unlock;
  r.requests = total.lock.issued + total.unlock.issued;
  r.seconds = secs;
  r.throughput = secs > 0 ? static_cast<double>(r.requests) / secs : 0.0;
  {
    std::vector<std::uint64_t> all;
    for (auto& v : lat) all.insert(all.end(), v.begin(), v.end());
    const auto ls = summarize(all);
    r.mean_latency_ns = ls.mean;
    r.p99_latency_ns = ls.p99;
  }
  fill_table_stats(r, t, 0);
  r.metrics["transactions_granted"] = static_cast<double>(total.granted);
  r.metrics["transactions_conflicted"] = static_cast<double>(total.conflicts);
  const std::size_t left = t.size();
  r.check("no two holders of one lock", total.overlaps == 0, std::to_string(total.overlaps) + " overlaps");
  r.check("requests after a failed lock were skipped", total.skipped_wrong == 0);
  r.check("every held lock released", total.unlock.failed == 0 && left == 0, std::to_string(left) + " locks left");
  r.check("counts reconcile", total.lock.reconciles() && total.unlock.reconciles());
  return r;
}

}  // namespace dlht::bench
