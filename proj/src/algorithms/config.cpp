#include "lyacert/algorithms/config.hpp"

#include "lyacert/envs/pendulum.hpp"
#include "lyacert/envs/quadrotor.hpp"

#include <charconv>
#include <cmath>

namespace lyacert::algorithms {

using nlohmann::json;

namespace {

template <typename Config, typename Visitor>
void visit_fields(Config& c, Visitor&& v) {
  v("algo", c.algo);
  v("env", c.env);
  v("seed", c.seed);
  v("steps", c.steps);
  v("out_dir", c.out_dir);
  v("gamma", c.gamma);
  v("beta", c.beta);
  v("mu", c.mu);
  v("lr_policy", c.lr_policy);
  v("lr_q", c.lr_q);
  v("lr_value", c.lr_value);
  v("lr_lyapunov", c.lr_lyapunov);
  v("hidden_width", c.hidden_width);
  v("hidden_layers", c.hidden_layers);
  v("activation", c.activation);
  v("lyapunov_width", c.lyapunov_width);
  v("lyapunov_fit", c.lyapunov_fit);
  v("log_std_min", c.log_std_min);
  v("log_std_max", c.log_std_max);
  v("policy_init_scale", c.policy_init_scale);
  v("policy_init_log_std", c.policy_init_log_std);
  v("log_interval", c.log_interval);
  v("checkpoint_interval", c.checkpoint_interval);
  v("alpha", c.alpha);
  v("tau", c.tau);
  v("batch_size", c.batch_size);
  v("buffer_capacity", c.buffer_capacity);
  v("warmup_steps", c.warmup_steps);
  v("lyapunov_steps", c.lyapunov_steps);
  v("policy_steps", c.policy_steps);
  v("twin_q", c.twin_q);
  v("clip_eps", c.clip_eps);
  v("gae_lambda", c.gae_lambda);
  v("rollout_steps", c.rollout_steps);
  v("ppo_epochs", c.ppo_epochs);
  v("minibatch_size", c.minibatch_size);
  v("lyapunov_epochs", c.lyapunov_epochs);
  v("max_grad_norm", c.max_grad_norm);
  v("normalize_advantages", c.normalize_advantages);
  v("normalize_reward", c.normalize_reward);
  v("episode_length", c.episode_length);
  v("quad_mass", c.quad_mass);
  v("quad_position_weight", c.quad_position_weight);
  v("quad_velocity_weight", c.quad_velocity_weight);
  v("quad_attitude_weight", c.quad_attitude_weight);
  v("quad_rate_weight", c.quad_rate_weight);
  v("quad_init_noise", c.quad_init_noise);
  v("quad_max_error", c.quad_max_error);
  v("quad_reference", c.quad_reference);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("config: invalid value '" + text + "' for '" + key + "'");
  return value;
}

void parse_into(const std::string&, const std::string& text, std::string& field) {
  field = text;
}

void parse_into(const std::string& key, const std::string& text, bool& field) {
  if (text == "true" || text == "1") {
    field = true;
  } else if (text == "false" || text == "0") {
    field = false;
  } else {
    throw ConfigError("config: invalid boolean '" + text + "' for '" + key + "'");
  }
}

void parse_into(const std::string& key, const std::string& text, double& field) {
  try {
    std::size_t used = 0;
    field = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError("config: invalid number '" + text + "' for '" + key + "'");
  }
}

template <typename T>
  requires std::is_integral_v<T>
void parse_into(const std::string& key, const std::string& text, T& field) {
  // Accept "1e5"-style literals for step counts.
  if (text.find_first_of("eE.") != std::string::npos) {
    double d = 0.0;
    parse_into(key, text, d);
    if (d != std::floor(d) || (d < 0.0 && std::is_unsigned_v<T>))
      throw ConfigError("config: '" + key + "' must be an integer");
    field = static_cast<T>(d);
    return;
  }
  field = parse_number<T>(key, text);
}

template <typename T>
void read_json(const std::string& key, const json& value, T& field) {
  try {
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (value.is_number_float()) {
        const double d = value.get<double>();
        if (d != std::floor(d)) throw ConfigError("config: '" + key + "' must be an integer");
        field = static_cast<T>(d);
        return;
      }
      if (!value.is_number_integer()) throw ConfigError("config: '" + key + "' must be an integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!value.is_number()) throw ConfigError("config: '" + key + "' must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!value.is_boolean()) throw ConfigError("config: '" + key + "' must be a boolean");
    } else {
      if (!value.is_string()) throw ConfigError("config: '" + key + "' must be a string");
    }
    field = value.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "sac") return Algorithm::sac;
  if (name == "lsac") return Algorithm::lsac;
  if (name == "ppo") return Algorithm::ppo;
  if (name == "lppo") return Algorithm::lppo;
  if (name == "lppo-onpolicy-risk") return Algorithm::lppo_onpolicy_risk;
  throw ConfigError("unknown algo '" + name + "' (expected sac, lsac, ppo, lppo, lppo-onpolicy-risk)");
}

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::sac:
      return "sac";
    case Algorithm::lsac:
      return "lsac";
    case Algorithm::ppo:
      return "ppo";
    case Algorithm::lppo:
      return "lppo";
    case Algorithm::lppo_onpolicy_risk:
      return "lppo-onpolicy-risk";
  }
  return "sac";
}

bool is_off_policy(Algorithm algo) { return algo == Algorithm::sac || algo == Algorithm::lsac; }

RunConfig RunConfig::defaults(const std::string& algo_name, const std::string& env_name) {
  const Algorithm algo = algorithm_from_string(algo_name);
  RunConfig c;
  c.algo = algo_name;
  c.env = env_name;
  const bool lyapunov_guided = algo == Algorithm::lsac || algo == Algorithm::lppo ||
                               algo == Algorithm::lppo_onpolicy_risk;
  c.beta = lyapunov_guided ? 1.0 : 0.0;
  c.lyapunov_fit = lyapunov_guided;
  if (env_name == "pendulum") {
    c.steps = is_off_policy(algo) ? 100000 : 500000;
    c.episode_length = 200;
    c.hidden_width = 64;
    c.normalize_reward = true;
    if (algo == Algorithm::lsac) c.beta = 10.0;
  } else if (env_name == "quadrotor") {
    c.steps = is_off_policy(algo) ? 200000 : 1000000;
    c.episode_length = 500;
    c.hidden_width = 256;
    c.normalize_reward = true;
  } else {
    throw ConfigError("unknown env '" + env_name + "' (expected pendulum or quadrotor)");
  }
  // Near-zero initial mean actions, as in clean-RL PPO.
  if (!is_off_policy(algo)) c.policy_init_scale = 0.01;
  c.log_interval = is_off_policy(algo) ? 1000 : c.rollout_steps;
  return c;
}

void RunConfig::validate() const {
  const Algorithm a = algorithm();
  auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  if (env != "pendulum" && env != "quadrotor") fail("unknown env '" + env + "'");
  if (steps < 0) fail("steps must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (beta < 0.0) fail("beta must be >= 0");
  if (mu < 0.0) fail("mu must be >= 0");
  if (lr_policy <= 0 || lr_q <= 0 || lr_value <= 0 || lr_lyapunov <= 0)
    fail("learning rates must be positive");
  if (hidden_width <= 0 || hidden_layers < 0 || lyapunov_width <= 0)
    fail("network sizes must be positive");
  if (activation != "tanh" && activation != "relu") fail("activation must be tanh or relu");
  if (!(log_std_min < log_std_max)) fail("log_std_min must be below log_std_max");
  if (!(policy_init_scale > 0.0)) fail("policy_init_scale must be positive");
  if (log_interval <= 0) fail("log_interval must be positive");
  if (checkpoint_interval < 0) fail("checkpoint_interval must be >= 0");
  if (alpha < 0.0) fail("alpha must be >= 0");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
  if (batch_size <= 0 || buffer_capacity <= 0 || warmup_steps < 0) fail("bad replay settings");
  if (lyapunov_steps < 0 || policy_steps <= 0) fail("bad update cadence");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) fail("clip_eps must lie in (0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in [0, 1]");
  if (rollout_steps <= 0 || ppo_epochs <= 0 || minibatch_size <= 0 || lyapunov_epochs < 0)
    fail("bad rollout settings");
  if (max_grad_norm < 0.0) fail("max_grad_norm must be >= 0 (0 disables clipping)");
  if (episode_length <= 0) fail("episode_length must be positive");
  if (quad_mass <= 0.0) fail("quad_mass must be positive");
  if (quad_max_error < 0.0) fail("quad_max_error must be >= 0 (0 disables the bound)");
  if (beta > 0.0 && !lyapunov_fit) fail("beta > 0 requires lyapunov_fit");
  if (a == Algorithm::sac && beta != 0.0) fail("sac runs with beta = 0; use lsac");
  if (a == Algorithm::ppo && beta != 0.0) fail("ppo runs with beta = 0; use lppo");
}

json to_json(const RunConfig& config) {
  json doc = json::object();
  visit_fields(config, [&](const char* key, const auto& field) { doc[key] = field; });
  return doc;
}

RunConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  std::string algo = "lsac";
  std::string env = "pendulum";
  if (doc.contains("algo")) read_json("algo", doc.at("algo"), algo);
  if (doc.contains("env")) read_json("env", doc.at("env"), env);
  RunConfig config = RunConfig::defaults(algo, env);
  const auto keys = config_keys();
  for (const auto& [key, value] : doc.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError("config: unknown key '" + key + "'");
  }
  visit_fields(config, [&](const char* key, auto& field) {
    if (doc.contains(key)) read_json(key, doc.at(key), field);
  });
  return config;
}

void set_field(RunConfig& config, const std::string& key, const std::string& value) {
  bool found = false;
  visit_fields(config, [&](const char* name, auto& field) {
    if (key == name) {
      parse_into(key, value, field);
      found = true;
    }
  });
  if (!found) throw ConfigError("config: unknown key '" + key + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  RunConfig c;
  visit_fields(c, [&](const char* key, auto&) { keys.emplace_back(key); });
  return keys;
}

std::unique_ptr<envs::Environment> make_environment(const RunConfig& config) {
  if (config.env == "pendulum") {
    envs::PendulumParams p;
    p.episode_length = config.episode_length;
    return std::make_unique<envs::PendulumEnv>(p);
  }
  if (config.env == "quadrotor") {
    envs::QuadrotorParams p;
    p.mass = config.quad_mass;
    p.episode_length = config.episode_length;
    p.position_weight = config.quad_position_weight;
    p.velocity_weight = config.quad_velocity_weight;
    p.attitude_weight = config.quad_attitude_weight;
    p.rate_weight = config.quad_rate_weight;
    p.init_position_noise = config.quad_init_noise;
    p.max_position_error = config.quad_max_error;
    if (config.quad_reference.empty()) return std::make_unique<envs::QuadrotorEnv>(p);
    return std::make_unique<envs::QuadrotorEnv>(p, envs::read_reference_csv(config.quad_reference));
  }
  throw ConfigError("unknown env '" + config.env + "'");
}

}  // namespace lyacert::algorithms
