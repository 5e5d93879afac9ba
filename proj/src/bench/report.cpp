#include "dlht/bench/report.hpp"

#include <cstdio>
#include <sstream>

namespace dlht::bench {

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json j;
  j["workload"] = r.workload;
  j["threads"] = r.threads;
  j["requests"] = r.requests;
  j["seconds"] = r.seconds;
  j["throughput"] = r.throughput;
  j["mean_latency_ns"] = r.mean_latency_ns;
  j["p99_latency_ns"] = r.p99_latency_ns;
  j["occupancy"] = r.occupancy;
  j["resizes"] = r.resizes;
  auto& ops = j["ops"] = nlohmann::json::object();
  for (const auto& [name, c] : r.ops)
    ops[name] = {{"issued", c.issued}, {"succeeded", c.succeeded}, {"failed", c.failed}, {"not_executed", c.not_executed}};
  auto& log = j["resize_log"] = nlohmann::json::array();
  for (const auto& rec : r.resize_log) {
    log.push_back({{"from_bins", rec.from_bins},
                   {"to_bins", rec.to_bins},
                   {"factor", rec.factor},
                   {"cause", to_string(rec.cause)},
                   {"occupancy", rec.occupancy},
                   {"transferred", rec.transferred},
                   {"duration_ns", rec.duration_ns},
                   {"participants", rec.participants},
                   {"duplicate_transfers", rec.duplicate_transfers}});
  }
  j["metrics"] = r.metrics;
  auto& checks = j["checks"] = nlohmann::json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["passed"] = r.passed();
  return j;
}

std::string to_csv(const RunReport& r) {
  std::ostringstream h, d;
  h << "workload,threads,requests,seconds,throughput,mean_latency_ns,p99_latency_ns,occupancy,resizes,passed";
  d << r.workload << ',' << r.threads << ',' << r.requests << ',' << r.seconds << ',' << r.throughput << ','
    << r.mean_latency_ns << ',' << r.p99_latency_ns << ',' << r.occupancy << ',' << r.resizes << ','
    << (r.passed() ? 1 : 0);
  for (const auto& [name, c] : r.ops) {
    h << ',' << name << "_issued," << name << "_succeeded," << name << "_failed," << name << "_not_executed";
    d << ',' << c.issued << ',' << c.succeeded << ',' << c.failed << ',' << c.not_executed;
  }
  for (const auto& [name, v] : r.metrics) {
    h << ',' << name;
    d << ',' << v;
  }
  return h.str() + '\n' + d.str() + '\n';
}

std::string to_table(const RunReport& r) {
  std::ostringstream o;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %s\n", "workload", r.workload.c_str());
  o << buf;
  std::snprintf(buf, sizeof buf, "%-14s %u\n%-14s %llu in %.3f s\n%-14s %.3f Mreq/s\n", "threads", r.threads,
                "requests", static_cast<unsigned long long>(r.requests), r.seconds, "throughput",
                r.throughput / 1e6);
  o << buf;
  std::snprintf(buf, sizeof buf, "%-14s mean %.0f ns, p99 %.0f ns\n%-14s %.3f\n%-14s %zu\n", "latency",
                r.mean_latency_ns, r.p99_latency_ns, "occupancy", r.occupancy, "resizes", r.resizes);
  o << buf;
  o << "\noperation        issued   succeeded      failed  not-executed\n";
  for (const auto& [name, c] : r.ops) {
    std::snprintf(buf, sizeof buf, "%-12s %10llu  %10llu  %10llu  %12llu\n", name.c_str(),
                  static_cast<unsigned long long>(c.issued), static_cast<unsigned long long>(c.succeeded),
                  static_cast<unsigned long long>(c.failed), static_cast<unsigned long long>(c.not_executed));
    o << buf;
  }
  if (!r.resize_log.empty()) {
    o << "\nresize  from -> to bins  factor  cause            occupancy  duration\n";
    for (std::size_t i = 0; i < r.resize_log.size(); ++i) {
      const auto& rec = r.resize_log[i];
      std::snprintf(buf, sizeof buf, "%6zu  %zu -> %zu  %6u  %-15s  %9.3f  %.3f ms\n", i,
                    static_cast<std::size_t>(rec.from_bins), static_cast<std::size_t>(rec.to_bins),
                    static_cast<unsigned>(rec.factor), to_string(rec.cause), rec.occupancy,
                    static_cast<double>(rec.duration_ns) / 1e6);
      o << buf;
    }
  }
  if (!r.metrics.empty()) {
    o << '\n';
    for (const auto& [name, v] : r.metrics) {
      std::snprintf(buf, sizeof buf, "%-28s %.6g\n", name.c_str(), v);
      o << buf;
    }
  }
  o << '\n';
  for (const auto& c : r.checks) {
    o << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) o << " (" << c.detail << ')';
    o << '\n';
  }
  return o.str();
}

std::string render(const RunReport& r, Format f) {
  switch (f) {
    case Format::Json: return to_json(r).dump(2) + '\n';
    case Format::Csv: return to_csv(r);
    case Format::Table: break;
  }
  return to_table(r);
}

}  // namespace dlht::bench
