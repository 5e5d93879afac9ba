#pragma once

#include <string>

#include <json.hpp>

#include "dlht/bench/workload.hpp"

namespace dlht::bench {

[[nodiscard]] nlohmann::json to_json(const RunReport& r);
/// Header line plus one data line.
[[nodiscard]] std::string to_csv(const RunReport& r);
/// Human-readable summary.
[[nodiscard]] std::string to_table(const RunReport& r);
[[nodiscard]] std::string render(const RunReport& r, Format f);

}  // namespace dlht::bench
