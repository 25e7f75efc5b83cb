#pragma once

#include "lyacert/buffers/buffers.hpp"
#include "lyacert/envs/environment.hpp"
#include "lyacert/lyapunov/lyapunov.hpp"
#include "lyacert/nn/policy.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace lyacert::cert {

/// One closed-loop episode under the deterministic policy mean.
struct Trajectory {
  double dt = 0.0;
  std::vector<Vector> observations;  // observation before each action
  std::vector<Vector> actions;
  std::vector<double> rewards;
};

struct PolicySummary {
  bool valid = false;
  std::string error;
  std::vector<double> returns;
  double mean_return = 0.0;
  double std_return = 0.0;
  double mean_final_distance = 0.0;  // ||obs_T - s_G|| in observation units
  double mean_final_tracking_error = 0.0;
  double rms_tracking_error = 0.0;   // over every visited state of every episode
};

/// Rolls out `episodes` episodes with mean actions. When `first` is non-null the first
/// episode is recorded there.
PolicySummary evaluate_policy(envs::Environment& env, const nn::SquashedGaussianPolicy& policy,
                              int episodes, Rng& rng, Trajectory* first = nullptr);

/// Transitions from mean-action rollouts starting at random resets.
buffers::Batch collect_batch(envs::Environment& env, const nn::SquashedGaussianPolicy& policy,
                             long transitions, Rng& rng);

struct ViolationReport {
  long total = 0;
  long violations = 0;
  double fraction = 0.0;
  double mean_lie = 0.0;
  double max_lie = 0.0;
  buffers::Batch transitions;         // every scanned transition
  Vector lie;                         // Lie derivative per transition
  std::vector<Vector> violating_states;
};

/// Counts transitions with a strictly positive Lie derivative over mean-action rollouts.
ViolationReport violation_scan(envs::Environment& env, const nn::SquashedGaussianPolicy& policy,
                               const lyapunov::LyapunovFunction& lyap, int episodes, Rng& rng);

/// Scores an already collected batch.
ViolationReport violation_scan(const buffers::Batch& batch,
                               const nn::SquashedGaussianPolicy& policy,
                               const lyapunov::LyapunovFunction& lyap);

struct Thresholds {
  double risk = 1e-3;
  double violation_fraction = 0.05;
  double radius = 0.5;  // allowed distance of violating states from s_G
};

struct CertificateVerdict {
  double certification_risk = 0.0;
  long total = 0;
  long violations = 0;
  double violation_fraction = 0.0;
  double max_violation_distance = 0.0;
  Thresholds thresholds;
  bool risk_certified = false;    // risk below threshold
  bool almost_lyapunov = false;   // few violations, all near s_G
};

CertificateVerdict certify(const nn::SquashedGaussianPolicy& policy,
                           const lyapunov::LyapunovFunction& lyap, const buffers::Batch& batch,
                           const Thresholds& thresholds = {});

struct GridSpec {
  int theta_points = 101;
  int theta_dot_points = 101;
  double theta_min = -3.141592653589793;
  double theta_max = 3.141592653589793;
  double theta_dot_min = -8.0;
  double theta_dot_max = 8.0;
  int samples = 16;  // policy draws per cell
  std::uint64_t seed = 0;
};

/// state_lyapunov over a pendulum (theta, theta_dot) grid; values(i, j) belongs to
/// (thetas(i), theta_dots(j)).
struct LevelSet {
  Vector thetas;
  Vector theta_dots;
  Matrix values;
};

LevelSet level_set_grid(const lyapunov::LyapunovFunction& lyap,
                        const nn::SquashedGaussianPolicy& policy, const GridSpec& grid = {});

void write_level_set_csv(const std::filesystem::path& path, const LevelSet& levels);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                          const envs::EnvSpec& spec);
/// One row per scanned transition: state, next state, Lie derivative, violation flag.
void write_violations_csv(const std::filesystem::path& path, const ViolationReport& report,
                          const envs::EnvSpec& spec);

nlohmann::json to_json(const PolicySummary& summary);
nlohmann::json to_json(const ViolationReport& report);
nlohmann::json to_json(const CertificateVerdict& verdict);

}  // namespace lyacert::cert
