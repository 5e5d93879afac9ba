// Acceptance suite: one PASS/FAIL line per criterion, with the measured
// values. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "dlht/bench/workload.hpp"
#include "dlht/table.hpp"
#include "dlht/wordcodec.hpp"
#include "golden.hpp"

using namespace dlht;
using namespace dlht::bench;

namespace {

struct Verdict {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string failed_checks(const RunReport& r) {
  std::string s;
  for (const auto& c : r.checks)
    if (!c.passed) s += (s.empty() ? "" : "; ") + c.name + (c.detail.empty() ? "" : " (" + c.detail + ")");
  return s;
}

WorkloadSpec spec_for(Workload w) {
  WorkloadSpec s;
  s.workload = w;
  return s;
}

// 1. Random traces over every operation type match a reference map.
Verdict sequential_oracle() {
  std::uint64_t runs = 0, bad = 0, resizes = 0;
  std::string why;
  for (Mode m : {Mode::Inlined, Mode::Allocator, Mode::HashSet}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      WorkloadSpec s = spec_for(Workload::VerifySeq);
      s.mode = m;
      s.keys = 4096;
      s.initial_bins = 16;
      s.ops = 1'000'000;
      s.seed = seed;
      if (m == Mode::Allocator) s.key_size = s.value_size = 16;
      const RunReport r = run_workload(s);
      ++runs;
      resizes += r.resizes;
      if (!r.passed() || r.resizes == 0) {
        ++bad;
        if (why.empty()) why = fmt("seed %llu: ", static_cast<unsigned long long>(seed)) + failed_checks(r);
      }
    }
  }
  return {bad == 0, fmt("%llu traces of 1M ops, %llu mismatching, %llu resizes", static_cast<unsigned long long>(runs),
                        static_cast<unsigned long long>(bad), static_cast<unsigned long long>(resizes)) +
                        (why.empty() ? "" : ", " + why)};
}

// 2. Journaled concurrent ops conserve the live set through resizes.
Verdict concurrent_conservation() {
  bool ok = true;
  std::string detail;
  for (Mode m : {Mode::Inlined, Mode::Allocator}) {
    WorkloadSpec s = spec_for(Workload::VerifyStress);
    s.mode = m;
    s.threads = 8;
    s.keys = 16384;
    s.initial_bins = 16;
    s.ops = 8 * 250'000;
    if (m == Mode::Allocator) s.key_size = s.value_size = 16;
    const RunReport r = run_workload(s);
    const bool pass = r.passed() && r.resizes >= 3;
    ok = ok && pass;
    detail += fmt("%s: %zu resizes%s; ", m == Mode::Inlined ? "inlined" : "allocator", r.resizes,
                  pass ? "" : (", " + failed_checks(r)).c_str());
  }
  return {ok, detail + "sanitizer runs are the stress_tsan and stress_asan tests"};
}

// 3. Insert/delete cycles reuse slots and never force growth.
Verdict slot_reclamation() {
  WorkloadSpec s = spec_for(Workload::InsDel);
  s.threads = 4;
  s.keys = 1'000'000;
  s.ops = 4 * 2'000'000;  // a cycle is one insert and one delete
  const RunReport r = run_workload(s);
  const bool ok = r.passed() && r.resizes == 0;
  return {ok, fmt("%llu cycles, %zu resizes, %.1f Mreq/s", static_cast<unsigned long long>(r.requests / 2), r.resizes,
                  r.throughput / 1e6) +
                  (r.passed() ? "" : ", " + failed_checks(r))};
}

// 4. Readers keep finding keys with bounded tails while a large transfer runs.
Verdict nonblocking_resize() {
  WorkloadSpec s = spec_for(Workload::Population);
  s.threads = 2;
  s.readers = 2;
  s.keys = 2'500'000;
  s.hash = HashKind::StrongMixer;
  s.initial_bins = 16384;
  const RunReport r = run_workload(s);
  std::uint64_t biggest = 0;
  for (const auto& rec : r.resize_log) biggest = std::max(biggest, rec.transferred);
  const double pt = r.metrics.at("reader_p99_transfer_ns"), pq = r.metrics.at("reader_p99_quiescent_ns");
  const std::uint64_t misses = r.ops.at("reader-get").failed;
  const bool ok = r.passed() && biggest >= 1'000'000 && misses == 0 && pq > 0 && pt <= 20 * pq;
  return {ok, fmt("largest transfer %llu keys, %llu reader misses, p99 during transfer %.0f ns vs quiescent %.0f ns "
                  "(%.2fx)",
                  static_cast<unsigned long long>(biggest), static_cast<unsigned long long>(misses), pt, pq,
                  pq > 0 ? pt / pq : 0.0) +
                  (r.passed() ? "" : ", " + failed_checks(r))};
}

// 5. Batched Gets beat one-at-a-time Gets on a table far larger than cache.
Verdict batching_speedup() {
  auto run = [](unsigned batch) {
    WorkloadSpec s = spec_for(Workload::Get);
    s.threads = 1;
    s.keys = 16u << 20;
    s.ops = 8'000'000;
    s.batch = batch;
    return run_workload(s);
  };
  const RunReport b = run(32), u = run(0);
  const double ratio = u.throughput > 0 ? b.throughput / u.throughput : 0.0;
  const bool ok = b.passed() && u.passed() && ratio >= 1.3;
  return {ok, fmt("16M keys, batch 32 %.2f Mreq/s vs unbatched %.2f Mreq/s = %.2fx", b.throughput / 1e6,
                  u.throughput / 1e6, ratio)};
}

// 6. The strong hash fills the index well before each resize.
Verdict occupancy() {
  WorkloadSpec s = spec_for(Workload::Population);
  s.threads = 2;
  s.keys = 4'000'000;
  s.hash = HashKind::StrongMixer;
  s.initial_bins = 1024;
  s.link_ratio = 5;
  const RunReport r = run_workload(s);
  bool ok = r.passed() && !r.resize_log.empty();
  std::string vals;
  for (const auto& rec : r.resize_log) {
    ok = ok && rec.occupancy >= 0.55;
    vals += fmt("%s%.3f", vals.empty() ? "" : " ", rec.occupancy);
  }
  return {ok, "occupancy at each trigger: " + vals};
}

// 7. Resize factors follow 8 / 4 / 2 by index size.
Verdict growth_schedule() {
  auto expected = [](std::size_t n) -> unsigned { return n < 4096 ? 8 : n < (std::size_t{1} << 26) ? 4 : 2; };
  bool ladder = true;
  for (unsigned b = 4; b <= 40; ++b) {
    const std::size_t n = std::size_t{1} << b;
    ladder = ladder && growth_factor(n) == expected(n) && growth_factor(n - 1) == expected(n - 1);
  }
  Config c;
  c.initial_bins = 16;
  Table t(c);
  for (std::uint64_t k = 0; k < 10000; ++k) t.insert(k * 7919 + 1, k);
  while (t.stats().nbins < (std::size_t{1} << 21)) t.grow();
  bool observed = true;
  std::string seq;
  for (const auto& rec : t.resize_history()) {
    observed = observed && rec.factor == expected(rec.from_bins) && rec.to_bins == rec.from_bins * rec.factor;
    seq += fmt("%s%zu(x%u)", seq.empty() ? "" : " ", rec.from_bins, rec.factor);
  }
  bool kept = t.size() == 10000;
  for (std::uint64_t k = 0; k < 10000 && kept; ++k) kept = t.get(k * 7919 + 1).value == k;
  return {ladder && observed && kept,
          "observed " + seq + "; factor 2 checked on the synthetic ladder up to 2^40 bins" +
              (kept ? "" : ", keys lost across growth")};
}

// 8. Tagged Puts stay atomic while resizes run underneath them.
Verdict put_atomicity() {
  constexpr unsigned kThreads = 8;
  constexpr std::uint64_t kKeys = 64;
  std::uint64_t bad = 0, resizes = 0, updates = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Config c;
    c.initial_bins = 16;
    Table t(c);
    for (std::uint64_t k = 1; k <= kKeys; ++k) t.insert(k, 0);
    std::atomic<bool> stop{false};
    std::vector<std::array<std::uint64_t, kKeys + 1>> last(kThreads);
    std::vector<std::uint64_t> counts(kThreads);
    std::vector<std::thread> pool;
    for (unsigned tid = 0; tid < kThreads; ++tid) {
      pool.emplace_back([&, tid] {
        std::mt19937_64 rng{seed * 1000 + tid};
        last[tid].fill(~0ull);
        for (std::uint64_t seq = 1; !stop.load(std::memory_order_relaxed) || seq < 2000; ++seq) {
          const std::uint64_t k = 1 + rng() % kKeys;
          const std::uint64_t v = (std::uint64_t{tid + 1} << 48) | seq;
          if (t.put(k, v).status == Status::Updated) {
            last[tid][k] = v;
            ++counts[tid];
          }
        }
      });
    }
    // Filler inserts drive the index from 16 bins through several resizes.
    for (std::uint64_t i = 0; i < 60'000; ++i) t.insert(kKeys + 1 + i, i);
    t.grow();
    stop = true;
    for (auto& th : pool) th.join();
    resizes += t.resize_history().size();
    for (auto n : counts) updates += n;
    for (std::uint64_t k = 1; k <= kKeys; ++k) {
      const OpResult r = t.get(k);
      bool any = false, match = false;
      for (unsigned tid = 0; tid < kThreads; ++tid) {
        any = any || last[tid][k] != ~0ull;
        match = match || last[tid][k] == r.value;
      }
      if (r.status != Status::Found || !(match || (!any && r.value == 0))) ++bad;
    }
  }
  return {bad == 0 && resizes >= 20 * 3,
          fmt("20 seeds, %llu updates, %llu resizes, %llu keys with a value no thread last wrote",
              static_cast<unsigned long long>(updates), static_cast<unsigned long long>(resizes),
              static_cast<unsigned long long>(bad))};
}

// 9. Shadow entries act as locks: hidden until committed, gone on abort.
Verdict shadow_semantics() {
  std::string broken;
  auto expect = [&](bool cond, const char* what) {
    if (!cond && broken.empty()) broken = what;
  };
  {
    Table t;
    expect(t.shadow_insert(9, 1).status == Status::Inserted, "shadow insert");
    expect(t.get(9).status == Status::NotFound, "get sees shadow");
    expect(t.put(9, 5).status == Status::NotFound, "put sees shadow");
    expect(t.erase(9).status == Status::NotFound, "delete sees shadow");
    expect(t.insert(9, 2).status == Status::AlreadyPresent, "insert over shadow");
    expect(t.finalize_shadow(9, Decision::Commit).status == Status::Done, "commit");
    expect(t.get(9).value == 1, "committed value");
    t.shadow_insert(11, 4);
    expect(t.finalize_shadow(11, Decision::Abort).status == Status::Done, "abort");
    expect(t.get(11).status == Status::NotFound, "abort leaves key absent");
    expect(t.insert(11, 5).status == Status::Inserted, "insert after abort");
    // Shadows survive a resize still hidden.
    t.shadow_insert(13, 6);
    t.grow();
    expect(t.get(13).status == Status::NotFound, "shadow visible after resize");
    expect(t.finalize_shadow(13, Decision::Commit).status == Status::Done, "commit after resize");
    expect(t.get(13).value == 6, "value after resize commit");
  }
  std::uint64_t overlaps = 0, granted = 0, failed_runs = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    WorkloadSpec s = spec_for(Workload::LockMgr);
    s.mode = Mode::HashSet;
    s.threads = 8;
    s.keys = 512;
    s.initial_bins = 64;
    s.ops = 400'000;
    s.batch = seed % 2 ? 4 : 0;
    s.seed = seed;
    const RunReport r = run_workload(s);
    if (!r.passed()) ++failed_runs;
    granted += static_cast<std::uint64_t>(r.metrics.at("transactions_granted"));
    for (const auto& c : r.checks)
      if (c.name == "no two holders of one lock" && !c.passed) ++overlaps;
  }
  const bool ok = broken.empty() && failed_runs == 0;
  return {ok, fmt("lock manager: 10 seeds, %llu transactions granted, %llu seeds with overlaps, %llu failing",
                  static_cast<unsigned long long>(granted), static_cast<unsigned long long>(overlaps),
                  static_cast<unsigned long long>(failed_runs)) +
                  (broken.empty() ? "" : ", semantics broken at: " + broken)};
}

// 10. Single-thread mode gives the same outcomes, faster.
Verdict single_thread_mode() {
  bool same = true;
  for (Mode m : {Mode::Inlined, Mode::Allocator, Mode::HashSet}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      WorkloadSpec s = spec_for(Workload::VerifySeq);
      s.mode = m;
      s.keys = 4096;
      s.initial_bins = 16;
      s.ops = 200'000;
      s.seed = seed;
      if (m == Mode::Allocator) s.key_size = s.value_size = 16;
      const RunReport a = run_workload(s);
      s.single_thread = true;
      const RunReport b = run_workload(s);
      same = same && a.passed() && b.passed() && a.metrics.at("outcome_digest") == b.metrics.at("outcome_digest");
    }
  }
  // Alternate the two builds and keep each one's best run, so a noisy
  // neighbour on a shared core penalises both sides alike.
  auto insdel = [](bool single) {
    WorkloadSpec s = spec_for(Workload::InsDel);
    s.keys = 1'000'000;
    s.ops = 8'000'000;
    s.single_thread = single;
    return run_workload(s).throughput;
  };
  double conc = 0, single = 0;
  for (int i = 0; i < 5; ++i) {
    conc = std::max(conc, insdel(false));
    single = std::max(single, insdel(true));
  }
  const double gain = conc > 0 ? single / conc : 0.0;
  return {same && gain >= 1.2, fmt("digests %s; best-of-5 InsDel %.2f vs %.2f Mreq/s = %.2fx", same ? "identical" : "differ",
                                   single / 1e6, conc / 1e6, gain)};
}

// 11. Word codecs round-trip exhaustively and match the frozen values.
Verdict codec_golden() {
  std::uint64_t failures = 0, words = 0;
  std::mt19937_64 rng{12345};
  constexpr std::array kSlot{SlotState::Invalid, SlotState::TryInsert, SlotState::Valid, SlotState::Shadow};
  constexpr std::array kBin{BinState::NoTransfer, BinState::InTransfer, BinState::DoneTransfer};
  for (int n = 0; n < 10000; ++n) {
    const std::uint64_t w = rng();
    const HeaderWord h{w};
    ++words;
    // A state change rewrites its own field and bumps the version, nothing else.
    auto only_changed = [&](HeaderWord n, std::uint64_t field) {
      const std::uint64_t keep = ~(field | codec::kVersionMask);
      return (n.bits() & keep) == (w & keep) && n.version() == static_cast<std::uint32_t>(h.version() + 1);
    };
    if (pack_header(h.version(), h.bin_state(), unpack_header(h).slots) != h) ++failures;
    for (BinState b : kBin) {
      const HeaderWord hb = with_bin_state(h, b);
      if (hb.bin_state() != b || !only_changed(hb, codec::kTwoBits << codec::kBinStateShift)) ++failures;
    }
    for (unsigned i = 0; i < kSlotsPerBin; ++i) {
      for (SlotState s : kSlot) {
        const HeaderWord hs = with_slot_state(h, i, s);
        if (hs.slot(i) != s || !only_changed(hs, codec::kTwoBits << (codec::kSlotShift + 2 * i))) ++failures;
      }
    }
    const LinkMeta lm{static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(w >> 32)};
    if (pack_link_meta(lm) != w || unpack_link_meta(w) != lm) ++failures;
    const TaggedValue tv{w & kAddressMask, static_cast<std::uint8_t>((w >> 48) % 16),
                         static_cast<std::uint16_t>((w >> 52) % 4096)};
    if (untag_address(tag_address(tv.address, tv.key_size, tv.ns)) != tv) ++failures;
  }
  std::array<SlotState, kSlotsPerBin> mixed{};
  for (unsigned i = 0; i < kSlotsPerBin; ++i) mixed[i] = kSlot[i % 4];
  std::array<SlotState, kSlotsPerBin> last_valid{};
  last_valid[14] = SlotState::Valid;
  const bool frozen =
      pack_header(0, BinState::InTransfer, {}).bits() == golden::kHeaderInTransferOnly &&
      pack_header(0, BinState::NoTransfer, last_valid).bits() == golden::kHeaderSlot14Valid &&
      pack_header(0xDEADBEEF, BinState::DoneTransfer, mixed).bits() == golden::kHeaderMixed &&
      pack_link_meta({5, kUnlinked}) == golden::kLinkMeta5Unlinked &&
      tag_address(kAddressMask, 8, 5) == golden::kTagMaxAddr8ns5 &&
      tag_address(0x123456789ABC, 0, 4095) == golden::kTag16ByteNs4095;
  return {failures == 0 && frozen, fmt("%llu random words x every state, %llu round-trip failures, frozen values %s",
                                       static_cast<unsigned long long>(words),
                                       static_cast<unsigned long long>(failures), frozen ? "match" : "differ")};
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {"sequential oracle equivalence", 60, sequential_oracle},
      {"concurrent conservation", 300, concurrent_conservation},
      {"slot reclamation without resizes", 120, slot_reclamation},
      {"non-blocking resize", 300, nonblocking_resize},
      {"batching speedup", 180, batching_speedup},
      {"occupancy at resize", 180, occupancy},
      {"growth schedule", 60, growth_schedule},
      {"put atomicity under resize", 180, put_atomicity},
      {"shadow insert semantics", 120, shadow_semantics},
      {"single-thread mode", 120, single_thread_mode},
      {"codec golden values", 5, codec_golden},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = all[i].run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= all[i].budget_s;
    const bool ok = v.ok && in_time;
    failed += !ok;
    std::printf("%s %2d %s: %s [%.1f s of %.0f s]\n", ok ? "PASS" : "FAIL", id, all[i].name, v.detail.c_str(), secs,
                all[i].budget_s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
