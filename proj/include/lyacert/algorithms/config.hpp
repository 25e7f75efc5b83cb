#pragma once

#include "lyacert/envs/environment.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <string>

namespace lyacert::algorithms {

enum class Algorithm { sac, lsac, ppo, lppo, lppo_onpolicy_risk };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm algo);
bool is_off_policy(Algorithm algo);

/// Thrown for invalid or unknown configuration entries.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every tunable of a run. Defaults depend on (algo, env); see RunConfig::defaults.
/// Values marked "tuned" are engineering choices, not published settings.
struct RunConfig {
  std::string algo = "lsac";
  std::string env = "pendulum";
  std::uint64_t seed = 0;
  long steps = 100000;  // K, total environment steps
  std::string out_dir = "runs";

  // Shared learning settings.
  double gamma = 0.99;
  double beta = 1.0;  // Lyapunov temperature (tuned)
  double mu = 0.01;   // minimum decrease rate (tuned)
  double lr_policy = 3e-4;
  double lr_q = 3e-4;
  double lr_value = 3e-4;
  double lr_lyapunov = 3e-4;
  int hidden_width = 64;
  int hidden_layers = 2;
  std::string activation = "tanh";
  int lyapunov_width = 64;
  bool lyapunov_fit = true;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  double policy_init_scale = 1.0;  // multiplies the initial output-layer weights of the policy
  double policy_init_log_std = 0.0;  // initial bias of the log-std outputs
  int log_interval = 1000;
  long checkpoint_interval = 0;  // 0: final checkpoint only

  // Off-policy (SAC family).
  double alpha = 0.2;
  double tau = 0.005;
  int batch_size = 256;
  long buffer_capacity = 1000000;
  int warmup_steps = 1000;
  int lyapunov_steps = 1;
  int policy_steps = 1;
  bool twin_q = false;

  // On-policy (PPO family).
  double clip_eps = 0.2;
  double gae_lambda = 0.95;
  int rollout_steps = 2048;
  int ppo_epochs = 10;
  int minibatch_size = 64;
  int lyapunov_epochs = 10;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  bool normalize_reward = true;

  // Environment.
  int episode_length = 200;
  double quad_mass = 1.0;
  double quad_position_weight = 1.0;
  double quad_velocity_weight = 0.1;
  double quad_attitude_weight = 0.1;
  double quad_rate_weight = 0.01;
  double quad_init_noise = 0.25;
  double quad_max_error = 3.0;
  std::string quad_reference = "";  // CSV path; empty selects the built-in reference

  static RunConfig defaults(const std::string& algo, const std::string& env);

  Algorithm algorithm() const { return algorithm_from_string(algo); }

  /// Throws ConfigError when a value is out of range or inconsistent.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);

/// Resolves a config from a flat JSON object: algo/env pick the defaults, every other key
/// overrides one field. Unknown keys and ill-typed values raise ConfigError.
RunConfig config_from_json(const nlohmann::json& doc);

/// Sets one field from its textual form (CLI override). Unknown keys raise ConfigError.
void set_field(RunConfig& config, const std::string& key, const std::string& value);

/// Names of every configuration key, in declaration order.
std::vector<std::string> config_keys();

std::unique_ptr<envs::Environment> make_environment(const RunConfig& config);

}  // namespace lyacert::algorithms
