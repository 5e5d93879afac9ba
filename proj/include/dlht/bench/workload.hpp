#pragma once

/// Benchmark and verification workloads for the table.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dlht/table.hpp"

namespace dlht::bench {

enum class Workload : std::uint8_t {
  Get,
  InsDel,
  PutHeavy,
  Population,
  Resizing,
  YcsbA,
  YcsbB,
  YcsbC,
  YcsbF,
  Skew,
  LockMgr,
  VerifySeq,
  VerifyStress,
};

enum class Format : std::uint8_t { Table, Json, Csv };

[[nodiscard]] Workload parse_workload(std::string_view name);
[[nodiscard]] std::string_view workload_name(Workload w) noexcept;
[[nodiscard]] const std::vector<std::string>& workload_names();

struct WorkloadSpec {
  Workload workload = Workload::Get;
  unsigned threads = 1;
  std::uint64_t keys = 1'000'000;
  unsigned key_size = 8;
  unsigned value_size = 8;
  unsigned batch = 32;  // 0 = one call per request
  HashKind hash = HashKind::ModuloIdentity;
  Mode mode = Mode::Inlined;
  bool resize = true;
  double skew = 0.0;  // fraction of requests aimed at the hot set
  std::uint64_t hot = 1000;
  std::uint64_t ops = 0;  // total requests; 0 with seconds == 0 means 1M
  double seconds = 0.0;
  std::uint64_t seed = 1;
  bool pin = false;
  bool single_thread = false;
  std::size_t initial_bins = 0;  // 0 = sized for the key count
  unsigned link_ratio = 8;
  unsigned readers = 0;  // extra Get threads for population-style runs
  bool interleave = false;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;
};

struct OpCounts {
  std::uint64_t issued = 0;
  std::uint64_t succeeded = 0;
  std::uint64_t failed = 0;
  std::uint64_t not_executed = 0;
  [[nodiscard]] bool reconciles() const noexcept { return issued == succeeded + failed + not_executed; }
  OpCounts& operator+=(const OpCounts& o) noexcept {
    issued += o.issued;
    succeeded += o.succeeded;
    failed += o.failed;
    not_executed += o.not_executed;
    return *this;
  }
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunReport {
  std::string workload;
  unsigned threads = 0;
  std::uint64_t requests = 0;
  double seconds = 0.0;
  double throughput = 0.0;  // requests per second
  std::map<std::string, OpCounts> ops;
  double mean_latency_ns = 0.0;
  double p99_latency_ns = 0.0;
  double occupancy = 0.0;  // Valid slots over nominal slots at the end
  std::size_t resizes = 0;
  std::vector<ResizeRecord> resize_log;
  std::map<std::string, double> metrics;  // workload-specific measurements
  std::vector<Check> checks;

  [[nodiscard]] bool passed() const noexcept;
  void check(std::string name, bool ok, std::string detail = {});
};

[[nodiscard]] RunReport run_workload(const WorkloadSpec& spec);

// Individual drivers, all taking a validated spec.
[[nodiscard]] RunReport run_get(const WorkloadSpec& spec);
[[nodiscard]] RunReport run_insdel(const WorkloadSpec& spec);
[[nodiscard]] RunReport run_mix(const WorkloadSpec& spec);  // putheavy and YCSB mixes
[[nodiscard]] RunReport run_population(const WorkloadSpec& spec);
[[nodiscard]] RunReport run_lockmgr(const WorkloadSpec& spec);
[[nodiscard]] RunReport run_verify_seq(const WorkloadSpec& spec);
[[nodiscard]] RunReport run_verify_stress(const WorkloadSpec& spec);

/// Deterministic 63-bit key for stream position i (a bijection, so
/// distinct positions give distinct keys and no key is ever reserved).
[[nodiscard]] std::uint64_t key_at(std::uint64_t i, std::uint64_t seed) noexcept;

}  // namespace dlht::bench
