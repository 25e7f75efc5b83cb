#include "lyacert/cli/commands.hpp"

#include "lyacert/algorithms/train.hpp"
#include "lyacert/cert/cert.hpp"
#include "lyacert/envs/quadrotor.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace lyacert::cli {

namespace fs = std::filesystem;
using algorithms::ConfigError;
using algorithms::RunConfig;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

Overrides parse_overrides(const std::vector<std::string>& args) {
  Overrides out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& token = args[i];
    if (token.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + token + "'");
    std::string key = token.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= args.size()) throw ConfigError("missing value for '" + token + "'");
      value = args[++i];
    }
    for (char& c : key)
      if (c == '-') c = '_';
    out.emplace_back(key, value);
  }
  return out;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(file);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid config " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << doc.dump(2) << '\n';
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const auto s = std::stoull(text);
      return {s, s};
    }
    const auto lo = std::stoull(text.substr(0, dots));
    const auto hi = std::stoull(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("empty seed range '" + text + "'");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ConfigError("invalid seed range '" + text + "' (expected a..b)");
  }
}

algorithms::LoadedRun load(const std::string& path) {
  return algorithms::load_run(nn::load_checkpoint(path));
}

fs::path output_dir_for(const std::string& out, const std::string& checkpoint) {
  fs::path dir = out.empty() ? fs::path(checkpoint).parent_path() : fs::path(out);
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  return dir;
}

int cmd_train(const std::string& config_path, const std::string& seeds,
              const std::vector<std::string>& extras) {
  RunConfig config = resolve_config(config_path, parse_overrides(extras));
  if (seeds.empty()) {
    const fs::path dir = run_directory(config);
    train_to_directory(config, dir);
    std::cout << "wrote " << dir.string() << '\n';
    return kSuccess;
  }
  const auto [lo, hi] = parse_seed_range(seeds);
  const fs::path root = output_root(config);
  fs::create_directories(root);
  std::ofstream summary(root / "summary.csv", std::ios::binary);
  summary << "seed,final_return\n";
  for (std::uint64_t seed = lo; seed <= hi; ++seed) {
    config.seed = seed;
    const auto report = train_to_directory(config, run_directory(config));
    const auto final_return = algorithms::final_mean_return(report);
    char buffer[64] = "";
    if (final_return) std::snprintf(buffer, sizeof buffer, "%.10g", *final_return);
    summary << seed << ',' << buffer << '\n';
    summary.flush();
    std::cout << "seed " << seed << " final return " << buffer << '\n';
  }
  return kSuccess;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::uint64_t seed,
             const std::string& out) {
  const auto run = load(checkpoint);
  auto env = algorithms::make_environment(run.config);
  Rng rng(seed);
  cert::Trajectory trajectory;
  const cert::PolicySummary summary =
      cert::evaluate_policy(*env, run.policy, episodes, rng, &trajectory);
  if (!summary.valid) throw ConfigError(summary.error);
  const fs::path dir = output_dir_for(out, checkpoint);
  write_json(dir / "summary.json", cert::to_json(summary));
  cert::write_trajectory_csv(dir / "trajectory.csv", trajectory, env->spec());
  std::cout << cert::to_json(summary).dump(2) << '\n';
  return kSuccess;
}

int cmd_certify(const std::string& checkpoint, int episodes, std::uint64_t seed,
                const cert::Thresholds& thresholds, const std::string& out) {
  const auto run = load(checkpoint);
  if (!run.lyapunov) throw std::runtime_error("no Lyapunov function in checkpoint");
  auto env = algorithms::make_environment(run.config);
  Rng rng(seed);
  const cert::ViolationReport scan =
      cert::violation_scan(*env, run.policy, *run.lyapunov, episodes, rng);
  const cert::CertificateVerdict verdict =
      cert::certify(run.policy, *run.lyapunov, scan.transitions, thresholds);
  const fs::path dir = output_dir_for(out, checkpoint);
  nlohmann::json doc = cert::to_json(verdict);
  doc["episodes"] = episodes;
  doc["seed"] = seed;
  doc["scan"] = cert::to_json(scan);
  write_json(dir / "verdict.json", doc);
  cert::write_violations_csv(dir / "violations.csv", scan, env->spec());
  std::cout << cert::to_json(verdict).dump(2) << '\n';
  return kSuccess;
}

int cmd_levels(const std::string& checkpoint, const cert::GridSpec& grid, const std::string& out) {
  const auto run = load(checkpoint);
  if (run.config.env != "pendulum")
    throw std::runtime_error("levels: only defined for the pendulum (got " + run.config.env + ")");
  if (!run.lyapunov) throw std::runtime_error("no Lyapunov function in checkpoint");
  const cert::LevelSet levels = cert::level_set_grid(*run.lyapunov, run.policy, grid);
  const fs::path path =
      out.empty() ? output_dir_for("", checkpoint) / "levels.csv" : fs::path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  cert::write_level_set_csv(path, levels);
  std::cout << "wrote " << path.string() << '\n';
  return kSuccess;
}

int cmd_ref_gen(const std::string& out, int steps, double mass) {
  envs::QuadrotorParams params;
  params.episode_length = steps;
  params.mass = mass;
  if (steps <= 0) throw ConfigError("ref-gen: steps must be positive");
  if (mass <= 0.0) throw ConfigError("ref-gen: mass must be positive");
  const fs::path path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  envs::write_reference_csv(path, envs::default_reference(params));
  std::cout << "wrote " << path.string() << '\n';
  return kSuccess;
}

}  // namespace

RunConfig resolve_config(const std::string& config_path, const Overrides& overrides) {
  nlohmann::json doc = config_path.empty() ? nlohmann::json::object() : read_json_file(config_path);
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, value] : overrides)
    if (key == "algo" || key == "env") doc[key] = value;
  RunConfig config = algorithms::config_from_json(doc);
  for (const auto& [key, value] : overrides)
    if (key != "algo" && key != "env") algorithms::set_field(config, key, value);
  config.validate();
  return config;
}

fs::path output_root(const RunConfig& config) {
  if (const char* env = std::getenv("LYACERT_OUT"); env && *env) return fs::path(env);
  return fs::path(config.out_dir);
}

fs::path run_directory(const RunConfig& config) {
  return output_root(config) /
         (config.algo + "-" + config.env + "-seed" + std::to_string(config.seed));
}

algorithms::RunReport train_to_directory(const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  write_json(dir / "config.resolved.json", algorithms::to_json(config));
  const auto save = [&](long step, const nn::Checkpoint& ckpt) {
    nn::save_checkpoint(dir / ("checkpoint_" + std::to_string(step) + ".json"), ckpt);
  };
  try {
    algorithms::TrainResult result = algorithms::train(config, save);
    result.report.write_csv(dir / "report.csv");
    nn::save_checkpoint(dir / "checkpoint_final.json", result.checkpoint);
    return std::move(result.report);
  } catch (const algorithms::NumericalAbort& e) {
    e.report.write_csv(dir / "report.csv");
    throw;
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Stable reinforcement learning with learned Lyapunov certificates"};
  app.require_subcommand(1);

  std::string config_path, seeds;
  auto* train = app.add_subcommand("train", "train an agent; any --key value overrides a config field");
  train->add_option("--config", config_path, "flat JSON config file");
  train->add_option("--seeds", seeds, "sequential sweep over seeds a..b; writes summary.csv");
  train->allow_extras();

  std::string checkpoint, out;
  int episodes = 10;
  std::uint64_t seed = 0;
  auto* eval = app.add_subcommand("eval", "roll out the deterministic policy of a checkpoint");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--episodes", episodes)->capture_default_str();
  eval->add_option("--seed", seed)->capture_default_str();
  eval->add_option("--out", out, "output directory (default: next to the checkpoint)");

  int cert_episodes = 50;
  cert::Thresholds thresholds;
  auto* certify = app.add_subcommand("certify", "stability verdict and Lie-derivative violation scan");
  certify->add_option("--checkpoint", checkpoint)->required();
  certify->add_option("--episodes", cert_episodes)->capture_default_str();
  certify->add_option("--seed", seed)->capture_default_str();
  certify->add_option("--risk-threshold", thresholds.risk)->capture_default_str();
  certify->add_option("--violation-threshold", thresholds.violation_fraction)->capture_default_str();
  certify->add_option("--radius", thresholds.radius)->capture_default_str();
  certify->add_option("--out", out, "output directory (default: next to the checkpoint)");

  cert::GridSpec grid;
  auto* levels = app.add_subcommand("levels", "pendulum Lyapunov level-set grid as CSV");
  levels->add_option("--checkpoint", checkpoint)->required();
  levels->add_option("--theta-points", grid.theta_points)->capture_default_str();
  levels->add_option("--theta-dot-points", grid.theta_dot_points)->capture_default_str();
  levels->add_option("--samples", grid.samples)->capture_default_str();
  levels->add_option("--seed", grid.seed)->capture_default_str();
  levels->add_option("--out", out, "CSV path (default: levels.csv next to the checkpoint)");

  int ref_steps = 500;
  double ref_mass = 1.0;
  auto* ref = app.add_subcommand("ref-gen", "write the built-in quadrotor reference trajectory");
  ref->add_option("--out", out)->required();
  ref->add_option("--steps", ref_steps)->capture_default_str();
  ref->add_option("--mass", ref_mass)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    if (*train) return cmd_train(config_path, seeds, train->remaining());
    if (*eval) return cmd_eval(checkpoint, episodes, seed, out);
    if (*certify) return cmd_certify(checkpoint, cert_episodes, seed, thresholds, out);
    if (*levels) return cmd_levels(checkpoint, grid, out);
    if (*ref) return cmd_ref_gen(out, ref_steps, ref_mass);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const algorithms::NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << " (partial report written)\n";
    return kNumericalAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace lyacert::cli
