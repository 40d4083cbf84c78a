#include <charconv>
#include <fstream>

#include "karlin/error.hpp"
#include "karlin/harness.hpp"

namespace karlin::harness {

void Report::add_check(const std::string& name, double value, const std::string& relation, double threshold) {
  bool ok = false;
  if (relation == "<=") ok = value <= threshold;
  else if (relation == "<") ok = value < threshold;
  else if (relation == ">=") ok = value >= threshold;
  else if (relation == ">") ok = value > threshold;
  else if (relation == "==") ok = value == threshold;
  else throw DomainError("unknown relation " + relation);
  body["checks"].push_back(
      Json{{"name", name}, {"value", value}, {"relation", relation}, {"threshold", threshold}, {"pass", ok}});
  pass = pass && ok;
}

void Report::add_flag(const std::string& name, bool ok, const std::string& detail) {
  body["checks"].push_back(Json{{"name", name}, {"detail", detail}, {"pass", ok}});
  pass = pass && ok;
}

Json finalize(const ExperimentConfig& cfg, const Report& report, std::optional<double> seconds) {
  Json doc;
  doc["library_version"] = kLibraryVersion;
  doc["kind"] = to_string(cfg.kind);
  doc["config"] = config_to_json(cfg);
  doc["results"] = report.body.contains("results") ? report.body["results"] : Json::object();
  doc["checks"] = report.body.contains("checks") ? report.body["checks"] : Json::array();
  doc["pass"] = report.pass;
  if (seconds) doc["timing"] = {{"wall_seconds", *seconds}};
  return doc;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << row[i];
    }
    out << '\n';
  }
}

}  // namespace karlin::harness
