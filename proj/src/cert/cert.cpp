#include "lyacert/cert/cert.hpp"

#include "lyacert/envs/pendulum.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace lyacert::cert {

namespace {

std::string fmt(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.10g", v);
  return buffer;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  return file;
}

nlohmann::json vector_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

PolicySummary evaluate_policy(envs::Environment& env, const nn::SquashedGaussianPolicy& policy,
                              int episodes, Rng& rng, Trajectory* first) {
  PolicySummary summary;
  if (episodes <= 0) {
    summary.error = "no episodes requested";
    return summary;
  }
  const envs::EnvSpec& spec = env.spec();
  double squared_tracking = 0.0;
  long visited = 0;
  for (int e = 0; e < episodes; ++e) {
    Vector obs = env.reset(rng);
    Trajectory* record = e == 0 ? first : nullptr;
    if (record) *record = Trajectory{spec.dt, {}, {}, {}};
    double episode_return = 0.0;
    while (true) {
      const double err = env.tracking_error(obs);
      squared_tracking += err * err;
      ++visited;
      const Vector action = policy.mean_action(obs);
      envs::StepResult result = env.step(action);
      episode_return += result.reward;
      if (record) {
        record->observations.push_back(obs);
        record->actions.push_back(action);
        record->rewards.push_back(result.reward);
      }
      obs = std::move(result.observation);
      if (result.terminal || result.truncated) break;
    }
    summary.returns.push_back(episode_return);
    summary.mean_final_distance += (obs - spec.goal).norm();
    summary.mean_final_tracking_error += env.tracking_error(obs);
  }
  const double n = static_cast<double>(episodes);
  for (double r : summary.returns) summary.mean_return += r;
  summary.mean_return /= n;
  for (double r : summary.returns)
    summary.std_return += (r - summary.mean_return) * (r - summary.mean_return);
  summary.std_return = std::sqrt(summary.std_return / n);
  summary.mean_final_distance /= n;
  summary.mean_final_tracking_error /= n;
  summary.rms_tracking_error = std::sqrt(squared_tracking / static_cast<double>(visited));
  summary.valid = true;
  return summary;
}

buffers::Batch collect_batch(envs::Environment& env, const nn::SquashedGaussianPolicy& policy,
                             long transitions, Rng& rng) {
  require(transitions > 0, "collect_batch: need at least one transition");
  std::vector<buffers::Transition> out;
  out.reserve(static_cast<std::size_t>(transitions));
  Vector obs = env.reset(rng);
  while (static_cast<long>(out.size()) < transitions) {
    const Vector action = policy.mean_action(obs);
    envs::StepResult result = env.step(action);
    out.push_back({obs, action, result.reward, result.observation, result.terminal});
    obs = std::move(result.observation);
    if (result.terminal || result.truncated) obs = env.reset(rng);
  }
  return buffers::make_batch(out);
}

ViolationReport violation_scan(const buffers::Batch& batch,
                               const nn::SquashedGaussianPolicy& policy,
                               const lyapunov::LyapunovFunction& lyap) {
  ViolationReport report;
  report.transitions = batch;
  report.lie = lyapunov::lie_derivatives(lyap, batch, policy);
  report.total = batch.size();
  report.mean_lie = report.lie.mean();
  report.max_lie = report.lie.maxCoeff();
  for (Eigen::Index j = 0; j < batch.size(); ++j) {
    if (report.lie(j) > 0.0) {
      ++report.violations;
      report.violating_states.push_back(batch.states.col(j));
    }
  }
  report.fraction = static_cast<double>(report.violations) / static_cast<double>(report.total);
  return report;
}

ViolationReport violation_scan(envs::Environment& env, const nn::SquashedGaussianPolicy& policy,
                               const lyapunov::LyapunovFunction& lyap, int episodes, Rng& rng) {
  require(episodes > 0, "violation_scan: need at least one episode");
  std::vector<buffers::Transition> out;
  for (int e = 0; e < episodes; ++e) {
    Vector obs = env.reset(rng);
    while (true) {
      const Vector action = policy.mean_action(obs);
      envs::StepResult result = env.step(action);
      out.push_back({obs, action, result.reward, result.observation, result.terminal});
      obs = std::move(result.observation);
      if (result.terminal || result.truncated) break;
    }
  }
  return violation_scan(buffers::make_batch(out), policy, lyap);
}

CertificateVerdict certify(const nn::SquashedGaussianPolicy& policy,
                           const lyapunov::LyapunovFunction& lyap, const buffers::Batch& batch,
                           const Thresholds& thresholds) {
  require(batch.size() > 0, "certify: empty batch");
  CertificateVerdict verdict;
  verdict.thresholds = thresholds;
  verdict.certification_risk = lyap.state_only
                                   ? lyapunov::on_policy_risk(batch, lyap).certification
                                   : lyapunov::certification_risk(batch, lyap, policy);
  const ViolationReport scan = violation_scan(batch, policy, lyap);
  verdict.total = scan.total;
  verdict.violations = scan.violations;
  verdict.violation_fraction = scan.fraction;
  for (const Vector& s : scan.violating_states)
    verdict.max_violation_distance = std::max(verdict.max_violation_distance, (s - lyap.goal).norm());
  verdict.risk_certified = verdict.certification_risk < thresholds.risk;
  verdict.almost_lyapunov = verdict.violation_fraction < thresholds.violation_fraction &&
                            (scan.violations == 0 ||
                             verdict.max_violation_distance < thresholds.radius);
  return verdict;
}

LevelSet level_set_grid(const lyapunov::LyapunovFunction& lyap,
                        const nn::SquashedGaussianPolicy& policy, const GridSpec& grid) {
  require(grid.theta_points >= 1 && grid.theta_dot_points >= 1 &&
              grid.theta_min <= grid.theta_max && grid.theta_dot_min <= grid.theta_dot_max,
          "level_set_grid: degenerate grid");
  require(grid.samples > 0, "level_set_grid: need at least one sample per cell");
  require(lyap.state_dim() == 3, "level_set_grid: pendulum Lyapunov function required");
  auto axis = [](int n, double lo, double hi) {
    return n == 1 ? Vector::Constant(1, 0.5 * (lo + hi)) : Vector(Vector::LinSpaced(n, lo, hi));
  };
  LevelSet levels{axis(grid.theta_points, grid.theta_min, grid.theta_max),
                  axis(grid.theta_dot_points, grid.theta_dot_min, grid.theta_dot_max),
                  Matrix(grid.theta_points, grid.theta_dot_points)};
  Rng rng(grid.seed);
  for (int i = 0; i < grid.theta_points; ++i) {
    for (int j = 0; j < grid.theta_dot_points; ++j) {
      const Vector obs = envs::pendulum_observe({levels.thetas(i), levels.theta_dots(j)});
      levels.values(i, j) = lyapunov::state_lyapunov(lyap, policy, obs, grid.samples, rng);
    }
  }
  return levels;
}

void write_level_set_csv(const std::filesystem::path& path, const LevelSet& levels) {
  std::ofstream file = open_csv(path);
  file << "theta,theta_dot,L\n";
  for (Eigen::Index i = 0; i < levels.thetas.size(); ++i)
    for (Eigen::Index j = 0; j < levels.theta_dots.size(); ++j)
      file << fmt(levels.thetas(i)) << ',' << fmt(levels.theta_dots(j)) << ','
           << fmt(levels.values(i, j)) << '\n';
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                          const envs::EnvSpec& spec) {
  std::ofstream file = open_csv(path);
  file << 't';
  for (const auto& name : spec.observation_names) file << ',' << name;
  for (const auto& name : spec.action_names) file << ',' << name;
  file << ",r\n";
  for (std::size_t t = 0; t < trajectory.rewards.size(); ++t) {
    file << fmt(static_cast<double>(t) * trajectory.dt);
    for (double v : trajectory.observations[t]) file << ',' << fmt(v);
    for (double v : trajectory.actions[t]) file << ',' << fmt(v);
    file << ',' << fmt(trajectory.rewards[t]) << '\n';
  }
}

void write_violations_csv(const std::filesystem::path& path, const ViolationReport& report,
                          const envs::EnvSpec& spec) {
  std::ofstream file = open_csv(path);
  for (std::size_t k = 0; k < spec.observation_names.size(); ++k)
    file << (k ? "," : "") << spec.observation_names[k];
  for (const auto& name : spec.observation_names) file << ",next_" << name;
  file << ",lie,violation\n";
  for (Eigen::Index j = 0; j < report.transitions.size(); ++j) {
    for (Eigen::Index k = 0; k < report.transitions.states.rows(); ++k)
      file << (k ? "," : "") << fmt(report.transitions.states(k, j));
    for (Eigen::Index k = 0; k < report.transitions.next_states.rows(); ++k)
      file << ',' << fmt(report.transitions.next_states(k, j));
    file << ',' << fmt(report.lie(j)) << ',' << (report.lie(j) > 0.0 ? 1 : 0) << '\n';
  }
}

nlohmann::json to_json(const PolicySummary& summary) {
  nlohmann::json doc{{"valid", summary.valid},
                     {"episodes", summary.returns.size()},
                     {"returns", summary.returns},
                     {"mean_return", summary.mean_return},
                     {"std_return", summary.std_return},
                     {"mean_final_distance", summary.mean_final_distance},
                     {"mean_final_tracking_error", summary.mean_final_tracking_error},
                     {"rms_tracking_error", summary.rms_tracking_error}};
  if (!summary.error.empty()) doc["error"] = summary.error;
  return doc;
}

nlohmann::json to_json(const ViolationReport& report) {
  nlohmann::json states = nlohmann::json::array();
  for (const Vector& s : report.violating_states) states.push_back(vector_json(s));
  return {{"total", report.total},         {"violations", report.violations},
          {"fraction", report.fraction},   {"mean_lie", report.mean_lie},
          {"max_lie", report.max_lie},     {"violating_states", states}};
}

nlohmann::json to_json(const CertificateVerdict& verdict) {
  return {{"certification_risk", verdict.certification_risk},
          {"total", verdict.total},
          {"violations", verdict.violations},
          {"violation_fraction", verdict.violation_fraction},
          {"max_violation_distance", verdict.max_violation_distance},
          {"risk_threshold", verdict.thresholds.risk},
          {"violation_threshold", verdict.thresholds.violation_fraction},
          {"radius", verdict.thresholds.radius},
          {"risk_certified", verdict.risk_certified},
          {"almost_lyapunov", verdict.almost_lyapunov}};
}

}  // namespace lyacert::cert
