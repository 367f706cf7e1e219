#include "qlab/report.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace qlab::report {

bool ReportSet::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return !checks.empty();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "null";
  if (std::isinf(v)) return v > 0 ? "1e999" : "-1e999";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

static std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string to_json(const ReportSet& r) {
  std::ostringstream os;
  os << "{\n  \"command\": \"" << escape(r.command) << "\",\n";
  os << "  \"config\": " << (r.resolved_config.empty() ? "{}" : r.resolved_config)
     << ",\n  \"checks\": [\n";
  for (size_t i = 0; i < r.checks.size(); ++i) {
    const auto& c = r.checks[i];
    os << "    {\"name\": \"" << escape(c.name) << "\", \"tolerance\": "
       << format_double(c.tolerance) << ", \"pass\": " << (c.pass ? "true" : "false")
       << ", \"values\": {";
    for (size_t k = 0; k < c.values.size(); ++k) {
      os << "\"" << escape(c.values[k].first) << "\": " << format_double(c.values[k].second);
      if (k + 1 < c.values.size()) os << ", ";
    }
    os << "}}";
    if (i + 1 < r.checks.size()) os << ",";
    os << "\n";
  }
  os << "  ],\n  \"all_pass\": " << (r.all_pass() ? "true" : "false") << "\n}\n";
  return os.str();
}

std::string to_csv(const ReportSet& r) {
  std::ostringstream os;
  os << "check,key,value,tolerance,pass\n";
  for (const auto& c : r.checks) {
    if (c.values.empty())
      os << c.name << ",,," << format_double(c.tolerance) << ","
         << (c.pass ? "true" : "false") << "\n";
    for (const auto& [k, v] : c.values)
      os << c.name << "," << k << "," << format_double(v) << ","
         << format_double(c.tolerance) << "," << (c.pass ? "true" : "false") << "\n";
  }
  return os.str();
}

}  // namespace qlab::report
