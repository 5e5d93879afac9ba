#include <doctest.h>

#include <atomic>
#include <barrier>
#include <latch>
#include <thread>
#include <vector>

#include "core.hpp"
#include "dlht/table.hpp"
#include "golden.hpp"

using namespace dlht;

TEST_CASE("growth factor schedule") {
  CHECK(growth_factor(16) == 8);
  CHECK(growth_factor(2048) == 8);
  CHECK(growth_factor(4096) == 4);
  CHECK(growth_factor(1048576) == 4);
  CHECK(growth_factor(std::size_t{32} << 20) == 4);
  CHECK(growth_factor(std::size_t{64} << 20) == 2);
  CHECK(growth_factor(std::size_t{1} << 27) == 2);
}

TEST_CASE("reserved keys match the oracle") {
  Config c;
  Table mod(c);
  CHECK(mod.reserved_keys() == std::pair{golden::kModuloKeyForEvenBins, golden::kModuloKeyForOddBins});
  c.hash = HashKind::StrongMixer;
  Table strong(c);
  CHECK(strong.reserved_keys() == std::pair{golden::kStrongKeyForEvenBins, golden::kStrongKeyForOddBins});
}

TEST_CASE("transfer keys never hash into the bin they are written to") {
  for (auto kind : {HashKind::ModuloIdentity, HashKind::StrongMixer}) {
    Config c;
    c.hash = kind;
    c.initial_bins = 16;
    detail::TableCore core(c);
    for (std::size_t nbins = 16; nbins <= (std::size_t{1} << 16); nbins <<= 1) {
      for (std::size_t b = 0; b < nbins; ++b) {
        const std::uint64_t key = core.transfer_key_for(b);
        REQUIRE(bin_of(key, kind, nbins) != b);
      }
    }
    CHECK(core.transfer_key_for(4) == core.key_for_even_bins);
    CHECK(core.transfer_key_for(7) == core.key_for_odd_bins);
  }
}

TEST_CASE("grow conserves every key and follows the schedule") {
  Config c;
  c.initial_bins = 1024;
  Table t(c);
  for (std::uint64_t k = 0; k < 800; ++k) t.insert(k * 13, k);
  t.shadow_insert(5, 55);
  CHECK(t.grow() == Status::Done);
  CHECK(t.stats().nbins == 8192);
  for (std::uint64_t k = 0; k < 800; ++k) {
    const OpResult r = t.get(k * 13);
    REQUIRE(r.status == Status::Found);
    CHECK(r.value == k);
  }
  // Shadow entries move as Shadow.
  CHECK(t.get(5).status == Status::NotFound);
  CHECK(t.finalize_shadow(5, Decision::Commit).status == Status::Done);
  CHECK(t.get(5).value == 55);
  const auto h = t.resize_history();
  REQUIRE(h.size() == 1);
  CHECK(h[0].from_bins == 1024);
  CHECK(h[0].to_bins == 8192);
  CHECK(h[0].factor == 8);
  CHECK(h[0].cause == ResizeCause::Manual);
  CHECK(h[0].transferred == 801);
  CHECK(t.audit().clean());
}

TEST_CASE("growth ladder from 16 bins") {
  Config c;
  c.initial_bins = 16;
  Table t(c);
  std::vector<std::size_t> sizes{16};
  for (int i = 0; i < 6; ++i) {
    REQUIRE(t.grow() == Status::Done);
    sizes.push_back(t.stats().nbins);
  }
  CHECK(sizes == std::vector<std::size_t>{16, 128, 1024, 8192, 32768, 131072, 524288});
}

TEST_CASE("grow past max_bins reports NoSpace; disabled resize throws") {
  Config c;
  c.initial_bins = 16;
  c.max_bins = 64;
  Table t(c);
  CHECK(t.grow() == Status::NoSpace);
  c.resize = false;
  Table fixed(c);
  CHECK_THROWS_AS((void)fixed.grow(), std::logic_error);
}

TEST_CASE("concurrent triggers on one generation allocate exactly once") {
  Config c;
  c.initial_bins = 1 << 16;  // four chunks to share
  detail::TableCore core(c);
  {
    ThreadCell& cell = core.cell();
    core.enter(cell);
    for (std::uint64_t k = 0; k < 100000; ++k)
      detail::Engine<detail::AtomicSync>::insert(core, cell, core.make_key(k), k, {}, false);
    core.exit(cell);
  }
  Index* from = core.index();
  constexpr int kThreads = 8;
  std::barrier sync(kThreads);
  std::vector<Status> out(kThreads);
  std::vector<std::thread> pool;
  for (int t = 0; t < kThreads; ++t) {
    pool.emplace_back([&, t] {
      ThreadCell& cell = core.cell();
      core.enter(cell);
      sync.arrive_and_wait();
      out[t] = detail::Engine<detail::AtomicSync>::trigger_resize(core, cell, from, ResizeCause::Manual);
      core.exit(cell);
    });
  }
  for (auto& th : pool) th.join();
  for (auto s : out) CHECK(s == Status::Done);
  REQUIRE(core.history.size() == 1);
  CHECK(core.history[0].participants >= 1);
  CHECK(core.history[0].duplicate_transfers == 0);
  CHECK(core.history[0].transferred == 100000);
  CHECK(core.index()->nbins() == (std::size_t{1} << 18));
}

TEST_CASE("a parked reader defers release of the old index") {
  Config c;
  c.initial_bins = 16;
  Table t(c);
  for (std::uint64_t k = 0; k < 10; ++k) t.insert(k, k);
  std::latch parked(1), resume(1);
  std::thread reader([&] {
    auto scope = t.enter();
    CHECK(t.get(3).value == 3);
    parked.count_down();
    resume.wait();
    CHECK(t.get(3).value == 3);
  });
  parked.wait();
  CHECK(t.grow() == Status::Done);
  CHECK(t.stats().pending_indexes == 1);
  resume.count_down();
  reader.join();
  CHECK(t.stats().pending_indexes == 0);
}

TEST_CASE("no reader: the old index goes right away") {
  Config c;
  c.initial_bins = 16;
  Table t(c);
  t.insert(1, 1);
  t.grow();
  t.grow();
  CHECK(t.stats().pending_indexes == 0);
  CHECK(t.get(1).value == 1);
}

TEST_CASE("inserts racing a resize all land") {
  Config c;
  c.initial_bins = 16;
  Table t(c);
  constexpr int kThreads = 4;
  constexpr std::uint64_t kPer = 50000;
  std::barrier sync(kThreads);
  std::vector<std::thread> pool;
  for (int th = 0; th < kThreads; ++th) {
    pool.emplace_back([&, th] {
      sync.arrive_and_wait();
      for (std::uint64_t i = 0; i < kPer; ++i) REQUIRE(t.insert(i * kThreads + th, i).status == Status::Inserted);
    });
  }
  for (auto& th : pool) th.join();
  CHECK(t.size() == kThreads * kPer);
  for (std::uint64_t k = 0; k < kThreads * kPer; ++k) REQUIRE(t.get(k).value == k / kThreads);
  CHECK(t.resize_history().size() >= 3);
  CHECK(t.audit().clean());
}
