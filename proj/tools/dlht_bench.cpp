// dlht-bench: runs one workload against the table and reports throughput,
// latency and correctness checks. Exits 0 only when every check passes.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

#include "dlht/bench/report.hpp"
#include "dlht/bench/workload.hpp"

int main(int argc, char** argv) {
  using namespace dlht;
  using namespace dlht::bench;

  CLI::App app{"Concurrent hashtable benchmark and verifier"};
  app.require_subcommand(1);

  WorkloadSpec spec;
  std::string hash = "mod", mode = "inlined", resize = "on", format = "table", out;

  const std::map<std::string, HashKind> hashes{{"mod", HashKind::ModuloIdentity}, {"strong", HashKind::StrongMixer}};
  const std::map<std::string, Mode> modes{{"inlined", Mode::Inlined}, {"alloc", Mode::Allocator}, {"hashset", Mode::HashSet}};
  const std::map<std::string, Format> formats{{"table", Format::Table}, {"json", Format::Json}, {"csv", Format::Csv}};

  for (const auto& name : workload_names()) {
    CLI::App* sub = app.add_subcommand(name, "Run the " + name + " workload");
    sub->add_option("--threads", spec.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--keys", spec.keys, "Key count (prepopulated, inserted or key space)");
    sub->add_option("--key-size", spec.key_size, "Key bytes (Allocator mode)");
    sub->add_option("--value-size", spec.value_size, "Value bytes (Allocator mode)");
    sub->add_option("--batch", spec.batch, "Requests per batch; 0 issues one call per request");
    sub->add_option("--hash", hash, "Bin hash")->check(CLI::IsMember({"mod", "strong"}));
    sub->add_option("--mode", mode, "Table mode")->check(CLI::IsMember({"inlined", "alloc", "hashset"}));
    sub->add_option("--resize", resize, "Allow resizing")->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--skew", spec.skew, "Fraction of requests aimed at the hot keys");
    sub->add_option("--hot", spec.hot, "Hot key count for skewed runs");
    auto* ops = sub->add_option("--ops", spec.ops, "Total requests");
    sub->add_option("--seconds", spec.seconds, "Run for this long instead of a request count")->excludes(ops);
    sub->add_option("--seed", spec.seed, "Key and operation seed");
    sub->add_option("--out", out, "Also write the report to this file");
    sub->add_option("--format", format, "Report format")->check(CLI::IsMember({"table", "json", "csv"}));
    sub->add_flag("--pin", spec.pin, "Pin threads to CPUs");
    sub->add_option("--readers", spec.readers, "Reader threads for population runs");
    sub->add_option("--initial-bins", spec.initial_bins, "Initial bin count (0 sizes for the keys)");
    sub->add_option("--link-ratio", spec.link_ratio, "Bins per link bucket");
    sub->add_flag("--single-thread", spec.single_thread, "Use the single-thread table mode");
    sub->add_flag("--interleave", spec.interleave, "Interleave index pages across memory nodes");
  }

  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    spec.workload = parse_workload(name);
    spec.hash = hashes.at(hash);
    spec.mode = modes.at(mode);
    spec.resize = resize == "on";
    spec.validate();
  } catch (const std::exception& e) {
    std::cerr << "dlht-bench: " << e.what() << '\n';
    return 2;
  }

  RunReport report;
  try {
    report = run_workload(spec);
  } catch (const std::exception& e) {
    std::cerr << "dlht-bench: " << e.what() << '\n';
    return 3;
  }
  const std::string text = render(report, formats.at(format));
  std::cout << text;
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) {
      std::cerr << "dlht-bench: cannot write " << out << '\n';
      return 2;
    }
    f << text;
  }
  return report.passed() ? 0 : 1;
}
