#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lyacert::algorithms {

/// One CSV line. Episode and update statistics logged at the same step share a row.
struct ReportRow {
  long step = 0;
  std::optional<double> episode_return;
  std::optional<double> policy_loss;
  std::optional<double> q_loss;
  std::optional<double> value_loss;
  std::optional<double> lyapunov_risk;
  std::optional<double> certification_risk;
  std::optional<double> violation_fraction;
};

/// Training log with rows strictly ordered by step.
class RunReport {
 public:
  static const std::vector<std::string>& columns();

  /// Row for `step`, appended if the last row is older. Steps must not decrease.
  ReportRow& row(long step);
  void add_episode(long step, double episode_return);

  const std::vector<ReportRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

  /// (step, return) for every finished episode.
  std::vector<std::pair<long, double>> episode_returns() const;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
  static RunReport read_csv(const std::filesystem::path& path);

 private:
  std::vector<ReportRow> rows_;
};

/// First step at which the mean of the last `window` episode returns reaches `threshold`.
std::optional<long> steps_to_threshold(const RunReport& report, double threshold,
                                       std::size_t window = 20);

/// Mean of the last `window` episode returns (fewer if the run is shorter).
std::optional<double> final_mean_return(const RunReport& report, std::size_t window = 20);

}  // namespace lyacert::algorithms
