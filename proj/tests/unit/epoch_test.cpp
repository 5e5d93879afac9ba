#include <doctest.h>

#include <barrier>
#include <thread>
#include <vector>

#include "dlht/epoch.hpp"
#include "dlht/table.hpp"

using namespace dlht;

namespace {

struct Released {
  std::vector<std::uint64_t> items;
  ThreadRegistry::Releaser fn() {
    return [this](std::uint64_t t) { items.push_back(t); };
  }
};

}  // namespace

TEST_CASE("a retired record is released after two epoch advances") {
  Released rel;
  ThreadRegistry reg(4, rel.fn());
  ThreadCell& a = reg.acquire();
  reg.retire(a, 0x100);
  CHECK(reg.pending_count() == 1);
  CHECK(reg.advance(a));
  CHECK(rel.items.empty());
  CHECK(reg.advance(a));
  CHECK(rel.items == std::vector<std::uint64_t>{0x100});
  CHECK(reg.released_count() == 1);
  reg.release(a);
}

TEST_CASE("a lagging thread holds back release") {
  Released rel;
  ThreadRegistry reg(4, rel.fn());
  ThreadCell& a = reg.acquire();
  ThreadCell& b = reg.acquire();
  reg.retire(a, 0x200);
  for (int i = 0; i < 10; ++i) reg.advance(a);
  CHECK(rel.items.empty());
  CHECK(reg.global_epoch() <= 2);
  reg.advance(b);
  reg.advance(a);
  reg.advance(b);
  reg.advance(a);
  CHECK(rel.items == std::vector<std::uint64_t>{0x200});
  reg.release(a);
  reg.release(b);
}

TEST_CASE("an exiting thread's retirements are released by others") {
  Released rel;
  ThreadRegistry reg(4, rel.fn());
  ThreadCell& a = reg.acquire();
  ThreadCell& b = reg.acquire();
  reg.retire(a, 0x300);
  reg.release(a);
  for (int i = 0; i < 3; ++i) reg.advance(b);
  CHECK(rel.items == std::vector<std::uint64_t>{0x300});
  reg.release(b);
}

TEST_CASE("concurrent advancing: one epoch per full round") {
  Released rel;
  constexpr int kThreads = 4, kRounds = 200;
  ThreadRegistry reg(8, rel.fn());
  std::vector<ThreadCell*> cells;
  for (int i = 0; i < kThreads; ++i) cells.push_back(&reg.acquire());
  const std::uint64_t start = reg.global_epoch();
  std::barrier sync(kThreads);
  std::vector<std::thread> pool;
  for (int t = 0; t < kThreads; ++t) {
    pool.emplace_back([&, t] {
      for (int r = 0; r < kRounds; ++r) {
        sync.arrive_and_wait();
        reg.advance(*cells[t]);
        sync.arrive_and_wait();
      }
    });
  }
  for (auto& th : pool) th.join();
  CHECK(reg.global_epoch() == start + kRounds);
  for (auto* c : cells) reg.release(*c);
}

TEST_CASE("announcements: smallest live generation") {
  ThreadRegistry reg(4, [](std::uint64_t) {});
  ThreadCell& a = reg.acquire();
  ThreadCell& b = reg.acquire();
  CHECK(reg.min_announced() == 0);
  a.announced.store(5);
  b.announced.store(3);
  CHECK(reg.min_announced() == 3);
  CHECK(reg.min_announced(&b) == 5);
  b.announced.store(0);
  CHECK(reg.min_announced() == 5);
  reg.release(a);
  reg.release(b);
}

TEST_CASE("registry capacity is enforced") {
  ThreadRegistry reg(2, [](std::uint64_t) {});
  ThreadCell& a = reg.acquire();
  ThreadCell& b = reg.acquire();
  CHECK_THROWS_AS(reg.acquire(), std::runtime_error);
  reg.release(a);
  ThreadCell& c = reg.acquire();
  CHECK(&c == &a);
  reg.release(b);
  reg.release(c);
}

TEST_CASE("table threads register on first use and unregister at exit") {
  Config c;
  c.max_threads = 4;
  Table t(c);
  for (int i = 0; i < 20; ++i) {
    std::thread th([&] { t.insert(i + 1, i); });
    th.join();
  }
  CHECK(t.size() == 20);
}
