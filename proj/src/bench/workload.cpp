#include "dlht/bench/workload.hpp"

#include <array>
#include <stdexcept>
#include <utility>

namespace dlht::bench {
namespace {

constexpr std::array<std::pair<Workload, std::string_view>, 13> kNames{{
    {Workload::Get, "get"},
    {Workload::InsDel, "insdel"},
    {Workload::PutHeavy, "putheavy"},
    {Workload::Population, "population"},
    {Workload::Resizing, "resizing"},
    {Workload::YcsbA, "ycsb-a"},
    {Workload::YcsbB, "ycsb-b"},
    {Workload::YcsbC, "ycsb-c"},
    {Workload::YcsbF, "ycsb-f"},
    {Workload::Skew, "skew"},
    {Workload::LockMgr, "lockmgr"},
    {Workload::VerifySeq, "verify-seq"},
    {Workload::VerifyStress, "verify-stress"},
}};

constexpr std::uint64_t kMask63 = (std::uint64_t{1} << 63) - 1;

bool uses_put(Workload w) {
  return w == Workload::PutHeavy || w == Workload::YcsbA || w == Workload::YcsbB || w == Workload::YcsbF;
}

}  // namespace

Workload parse_workload(std::string_view name) {
  for (const auto& [w, n] : kNames)
    if (n == name) return w;
  throw std::invalid_argument("unknown workload: " + std::string(name));
}

std::string_view workload_name(Workload w) noexcept {
  for (const auto& [k, n] : kNames)
    if (k == w) return n;
  return "unknown";
}

const std::vector<std::string>& workload_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [w, n] : kNames) v.emplace_back(n);
    return v;
  }();
  return names;
}

void WorkloadSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (threads == 0) fail("threads must be at least 1");
  if (single_thread && threads + readers != 1) fail("single-thread mode needs exactly one thread and no readers");
  if (keys == 0) fail("keys must be at least 1");
  if (keys >= (std::uint64_t{1} << 40)) fail("keys must be below 2^40");
  if (skew < 0.0 || skew > 1.0) fail("skew must be within [0, 1]");
  if (seconds < 0.0) fail("seconds must be non-negative");
  if (link_ratio == 0) fail("link ratio must be at least 1");
  if (batch > 4096) fail("batch must be at most 4096");
  if (mode == Mode::Allocator) {
    if (key_size < 8) fail("allocator mode needs key size >= 8");
    if (value_size < 8) fail("allocator mode needs value size >= 8");
  } else {
    if (key_size != 8) fail("inlined and hashset modes use 8-byte keys");
    if (mode == Mode::Inlined && value_size != 8) fail("inlined mode uses 8-byte values");
  }
  if (uses_put(workload) && mode != Mode::Inlined) fail(std::string(workload_name(workload)) + " needs inlined mode");
  if (workload == Workload::LockMgr && mode != Mode::HashSet) fail("lockmgr needs hashset mode");
  if ((workload == Workload::Population || workload == Workload::Resizing) && !resize)
    fail("population workloads need resizing on");
  if (workload == Workload::VerifySeq && !single_thread && threads != 1) fail("verify-seq runs on one thread");
  if (workload == Workload::VerifyStress && !resize) fail("verify-stress needs resizing on");
}

bool RunReport::passed() const noexcept {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

void RunReport::check(std::string name, bool ok, std::string detail) {
  checks.push_back({std::move(name), ok, std::move(detail)});
}

std::uint64_t key_at(std::uint64_t i, std::uint64_t seed) noexcept {
  // Odd multiplies and right xor-shifts are invertible modulo 2^63.
  std::uint64_t x = (i + seed * 0x632BE59BD9B4E019ull) & kMask63;
  x = (x * 0x9E3779B97F4A7C15ull) & kMask63;
  x ^= x >> 31;
  x = (x * 0xBF58476D1CE4E5B9ull) & kMask63;
  x ^= x >> 29;
  return x;
}

RunReport run_workload(const WorkloadSpec& spec) {
  spec.validate();
  switch (spec.workload) {
    case Workload::Get:
    case Workload::YcsbC:
    case Workload::Skew: return run_get(spec);
    case Workload::InsDel: return run_insdel(spec);
    case Workload::PutHeavy:
    case Workload::YcsbA:
    case Workload::YcsbB:
    case Workload::YcsbF: return run_mix(spec);
    case Workload::Population:
    case Workload::Resizing: return run_population(spec);
    case Workload::LockMgr: return run_lockmgr(spec);
    case Workload::VerifySeq: return run_verify_seq(spec);
    case Workload::VerifyStress: return run_verify_stress(spec);
  }
  throw std::invalid_argument("unhandled workload");
}

}  // namespace dlht::bench
