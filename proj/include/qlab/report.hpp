#pragma once

#include <string>
#include <utility>
#include <vector>

namespace qlab::report {

// One named check with its measured values. runtime_ms is informational and
// printed to stderr only; the machine report must be byte-stable across runs.
struct CheckReport {
  std::string name;
  std::vector<std::pair<std::string, double>> values;
  double tolerance = 0.0;
  bool pass = false;
  long runtime_ms = 0;

  CheckReport& add(const std::string& key, double value) {
    values.emplace_back(key, value);
    return *this;
  }
};

struct ReportSet {
  std::string command;
  std::string resolved_config;  // JSON text of the full resolved config
  std::vector<CheckReport> checks;

  bool all_pass() const;
};

std::string to_json(const ReportSet& reports);
std::string to_csv(const ReportSet& reports);

// canonical shortest-roundtrip formatting, stable across runs
std::string format_double(double v);

}  // namespace qlab::report
