#include "lyacert/algorithms/report.hpp"

#include "lyacert/common.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace lyacert::algorithms {

namespace {

using Field = std::optional<double> ReportRow::*;

constexpr Field kFields[] = {&ReportRow::episode_return, &ReportRow::policy_loss,
                             &ReportRow::q_loss,         &ReportRow::value_loss,
                             &ReportRow::lyapunov_risk,  &ReportRow::certification_risk,
                             &ReportRow::violation_fraction};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream stream(line);
  std::string cell;
  while (std::getline(stream, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

const std::vector<std::string>& RunReport::columns() {
  static const std::vector<std::string> names{
      "step",       "episode_return",     "policy_loss",       "q_loss",
      "value_loss", "lyapunov_risk",      "certification_risk", "violation_fraction"};
  return names;
}

ReportRow& RunReport::row(long step) {
  if (!rows_.empty()) {
    require(step >= rows_.back().step, "RunReport: steps must not decrease");
    if (rows_.back().step == step) return rows_.back();
  }
  rows_.push_back(ReportRow{});
  rows_.back().step = step;
  return rows_.back();
}

void RunReport::add_episode(long step, double episode_return) {
  row(step).episode_return = episode_return;
}

std::vector<std::pair<long, double>> RunReport::episode_returns() const {
  std::vector<std::pair<long, double>> out;
  for (const ReportRow& r : rows_)
    if (r.episode_return) out.emplace_back(r.step, *r.episode_return);
  return out;
}

std::string RunReport::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns().size(); ++i) {
    if (i) out += ',';
    out += columns()[i];
  }
  out += '\n';
  char buffer[64];
  for (const ReportRow& r : rows_) {
    out += std::to_string(r.step);
    for (Field f : kFields) {
      out += ',';
      if (r.*f) {
        std::snprintf(buffer, sizeof buffer, "%.10g", *(r.*f));
        out += buffer;
      }
    }
    out += '\n';
  }
  return out;
}

void RunReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << to_csv();
}

RunReport RunReport::read_csv(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(file, line);
  if (split(line) != columns()) throw std::runtime_error("unexpected report header in " + path.string());
  RunReport report;
  while (std::getline(file, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != columns().size()) throw std::runtime_error("malformed report row: " + line);
    ReportRow& r = report.row(std::stol(cells[0]));
    for (std::size_t i = 0; i < std::size(kFields); ++i)
      if (!cells[i + 1].empty()) r.*kFields[i] = std::stod(cells[i + 1]);
  }
  return report;
}

std::optional<long> steps_to_threshold(const RunReport& report, double threshold,
                                       std::size_t window) {
  const auto returns = report.episode_returns();
  double sum = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    sum += returns[i].second;
    if (i >= window) sum -= returns[i - window].second;
    if (i + 1 >= window && sum / static_cast<double>(window) >= threshold) return returns[i].first;
  }
  return std::nullopt;
}

std::optional<double> final_mean_return(const RunReport& report, std::size_t window) {
  const auto returns = report.episode_returns();
  if (returns.empty()) return std::nullopt;
  const std::size_t n = std::min(window, returns.size());
  double sum = 0.0;
  for (std::size_t i = returns.size() - n; i < returns.size(); ++i) sum += returns[i].second;
  return sum / static_cast<double>(n);
}

}  // namespace lyacert::algorithms
