// Acceptance suite. Prints one PASS/FAIL line per criterion; the exit code is non-zero
// when any requested criterion fails.
//
// Usage: acceptance [criterion ...]   (default: all of 1-7)
// Trained runs are cached under $LYACERT_ACCEPT_DIR (default ./acceptance_runs) and reused
// when their resolved config matches.

#include "checks.hpp"
#include "lyacert/algorithms/train.hpp"
#include "lyacert/cert/cert.hpp"
#include "lyacert/cli/commands.hpp"
#include "lyacert/envs/quadrotor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

using namespace lyacert;
namespace fs = std::filesystem;
using algorithms::RunConfig;
using algorithms::RunReport;

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

struct Result {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

fs::path cache_root() {
  if (const char* dir = std::getenv("LYACERT_ACCEPT_DIR"); dir && *dir) return dir;
  return "acceptance_runs";
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return kNever;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct CachedRun {
  RunConfig config;
  fs::path dir;
  RunReport report;
  algorithms::LoadedRun loaded;
};

// Trains `config` unless an identical run is already on disk.
CachedRun cached_run(const RunConfig& config) {
  const fs::path dir =
      cache_root() / (config.algo + "-" + config.env + "-seed" + std::to_string(config.seed));
  const fs::path resolved = dir / "config.resolved.json";
  bool fresh = true;
  if (fs::exists(resolved) && fs::exists(dir / "report.csv") &&
      fs::exists(dir / "checkpoint_final.json")) {
    std::ifstream in(resolved);
    fresh = nlohmann::json::parse(in, nullptr, false) != algorithms::to_json(config);
  }
  if (fresh) {
    const auto start = std::chrono::steady_clock::now();
    std::cerr << "training " << dir.string() << " ..." << std::endl;
    cli::train_to_directory(config, dir);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "  done in " << fmt("%.0f", seconds) << " s" << std::endl;
  }
  CachedRun run{config, dir, RunReport::read_csv(dir / "report.csv"),
                algorithms::load_run(nn::load_checkpoint(dir / "checkpoint_final.json"))};
  return run;
}

std::vector<CachedRun> sweep(const std::string& algo, const std::string& env, int seeds,
                             const std::function<void(RunConfig&)>& adjust = {}) {
  std::vector<CachedRun> runs;
  for (int s = 0; s < seeds; ++s) {
    RunConfig config = RunConfig::defaults(algo, env);
    config.seed = static_cast<std::uint64_t>(s);
    if (adjust) adjust(config);
    config.validate();
    runs.push_back(cached_run(config));
  }
  return runs;
}

double steps_or_never(const RunReport& report, double threshold) {
  const auto steps = algorithms::steps_to_threshold(report, threshold);
  return steps ? static_cast<double>(*steps) : kNever;
}

Result outcome_result(const testing::Outcome& outcome, const std::string& what) {
  Result r;
  r.pass = outcome.pass();
  r.summary = what + (r.pass ? "" : fmt(" (%zu failures)", outcome.failures.size()));
  r.details = outcome.notes;
  for (const auto& f : outcome.failures) r.details.push_back("failed: " + f);
  return r;
}

template <typename Fn>
Result timed(Fn&& fn, double limit_seconds) {
  const auto start = std::chrono::steady_clock::now();
  Result r = fn();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.details.push_back(fmt("runtime %.1f s (limit %.0f s)", seconds, limit_seconds));
  if (seconds >= limit_seconds) {
    r.pass = false;
    r.summary += "; over time limit";
  }
  return r;
}

Result criterion_1() {
  return timed([] { return outcome_result(testing::gradient_suite(10),
                                          "finite-difference gradients over 10 configurations"); },
               60.0);
}

Result criterion_2() {
  return timed([] { return outcome_result(testing::oracle_suite(), "oracle suite"); }, 60.0);
}

Result criterion_3() {
  return outcome_result(testing::risk_identities(100), "risk identities over 100 batches");
}

// Pendulum runs shared by criteria 4 and 5.
std::vector<CachedRun> pendulum_runs(const std::string& algo) {
  return sweep(algo, "pendulum", 10, [](RunConfig& c) { c.steps = 100000; });
}

Result criterion_4() {
  constexpr double threshold = -200.0;
  const auto lsac = pendulum_runs("lsac");
  const auto sac = pendulum_runs("sac");
  Result r;
  std::vector<double> lsac_steps, sac_steps;
  int reached = 0;
  std::ofstream table(cache_root() / "criterion4.csv");
  table << "seed,lsac_final_return,lsac_steps_to_threshold,sac_final_return,sac_steps_to_threshold\n";
  for (std::size_t i = 0; i < lsac.size(); ++i) {
    const double ls = steps_or_never(lsac[i].report, threshold);
    const double ss = steps_or_never(sac[i].report, threshold);
    lsac_steps.push_back(ls);
    sac_steps.push_back(ss);
    if (std::isfinite(ls)) ++reached;
    const double lf = algorithms::final_mean_return(lsac[i].report).value_or(-kNever);
    const double sf = algorithms::final_mean_return(sac[i].report).value_or(-kNever);
    table << i << ',' << lf << ',' << ls << ',' << sf << ',' << ss << '\n';
    r.details.push_back(fmt("seed %zu: lsac final %.1f, steps %.0f | sac final %.1f, steps %.0f",
                            i, lf, ls, sf, ss));
  }
  const double lsac_median = median(lsac_steps);
  const double sac_median = median(sac_steps);
  r.pass = reached >= 8 && lsac_median <= sac_median;
  r.summary = fmt("LSAC reached %.0f on %d/10 seeds; median steps LSAC %.0f vs SAC %.0f",
                  threshold, reached, lsac_median, sac_median);
  return r;
}

// Slope of a least-squares line through the points; the residual spread is the noise level.
std::pair<double, double> trend(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (my + slope * (x[i] - mx));
    ss += e * e;
  }
  return {slope, std::sqrt(ss / static_cast<double>(std::max<std::size_t>(x.size(), 1)))};
}

cert::ViolationReport fresh_scan(const CachedRun& run, std::uint64_t seed, long transitions) {
  auto env = algorithms::make_environment(run.loaded.config);
  const int episodes =
      static_cast<int>((transitions + env->spec().episode_length - 1) / env->spec().episode_length);
  Rng rng(seed);
  return cert::violation_scan(*env, run.loaded.policy, *run.loaded.lyapunov, episodes, rng);
}

std::vector<CachedRun> quadrotor_runs(const std::string& algo) {
  // PPO also fits a Lyapunov function; it never feeds back into the policy update.
  return sweep(algo, "quadrotor", 5, [&](RunConfig& c) { c.lyapunov_fit = true; });
}

Result criterion_5() {
  const auto lsac = pendulum_runs("lsac");
  Result r;
  std::vector<double> risks, fractions;
  std::map<long, std::vector<double>> curve;
  for (std::size_t i = 0; i < lsac.size(); ++i) {
    const cert::ViolationReport scan = fresh_scan(lsac[i], 7000 + i, 10000);
    const cert::CertificateVerdict v =
        cert::certify(lsac[i].loaded.policy, *lsac[i].loaded.lyapunov, scan.transitions);
    risks.push_back(v.certification_risk);
    fractions.push_back(v.violation_fraction);
    r.details.push_back(fmt("lsac seed %zu: certification risk %.3g, violations %ld/%ld (%.2f%%)",
                            i, v.certification_risk, v.violations, v.total,
                            100.0 * v.violation_fraction));
    for (const auto& row : lsac[i].report.rows())
      if (row.certification_risk) curve[row.step].push_back(*row.certification_risk);
  }
  // Seed-averaged training curve of the certification risk, last quarter of logged points.
  std::vector<double> steps, values;
  for (const auto& [step, v] : curve) {
    steps.push_back(static_cast<double>(step));
    values.push_back(mean(v));
  }
  const std::size_t tail = std::max<std::size_t>(steps.size() / 4, 2);
  const std::size_t first = steps.size() > tail ? steps.size() - tail : 0;
  const std::vector<double> tx(steps.begin() + static_cast<long>(first), steps.end());
  const std::vector<double> ty(values.begin() + static_cast<long>(first), values.end());
  const auto [slope, noise] = trend(tx, ty);
  const double drift = tx.empty() ? 0.0 : slope * (tx.back() - tx.front());
  const bool downward = !tx.empty() && drift <= noise;
  r.details.push_back(fmt("training-curve drift over last %zu logged points: %.3g (noise %.3g)",
                          tx.size(), drift, noise));

  const auto lppo = quadrotor_runs("lppo");
  const auto ppo = quadrotor_runs("ppo");
  std::vector<double> lppo_fraction, ppo_fraction;
  for (std::size_t i = 0; i < lppo.size(); ++i) {
    lppo_fraction.push_back(fresh_scan(lppo[i], 8000 + i, 10000).fraction);
    ppo_fraction.push_back(fresh_scan(ppo[i], 8000 + i, 10000).fraction);
    r.details.push_back(fmt("quadrotor seed %zu: violations LPPO %.2f%% vs PPO %.2f%%", i,
                            100.0 * lppo_fraction.back(), 100.0 * ppo_fraction.back()));
  }
  const double risk = mean(risks);
  const double fraction = mean(fractions);
  const bool ordering = mean(lppo_fraction) < mean(ppo_fraction);
  r.pass = risk < 1e-2 && downward && fraction <= 0.05 && ordering;
  r.summary = fmt("LSAC risk %.3g (<1e-2), %s trend, violations %.2f%% (<=5%%); "
                  "LPPO %.2f%% vs PPO %.2f%%",
                  risk, downward ? "downward" : "rising", 100.0 * fraction,
                  100.0 * mean(lppo_fraction), 100.0 * mean(ppo_fraction));
  return r;
}

double bounding_box_diagonal(const envs::ReferenceTrajectory& ref) {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(kNever);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-kNever);
  for (const auto& s : ref.states) {
    lo = lo.cwiseMin(s.position);
    hi = hi.cwiseMax(s.position);
  }
  return (hi - lo).norm();
}

// RMS tracking error of uniformly random actions, measured like evaluate_policy.
double random_policy_rms(envs::Environment& env, int episodes, Rng& rng) {
  const auto& spec = env.spec();
  double squared = 0.0;
  long visited = 0;
  for (int e = 0; e < episodes; ++e) {
    Vector obs = env.reset(rng);
    for (;;) {
      const double err = env.tracking_error(obs);
      squared += err * err;
      ++visited;
      Vector u = uniform(spec.action_dim, 1, 0.0, 1.0, rng).col(0);
      const Vector action = spec.action_low.array() + u.array() * (spec.action_high - spec.action_low).array();
      const envs::StepResult step = env.step(action);
      obs = step.observation;
      if (step.terminal || step.truncated) break;
    }
  }
  return std::sqrt(squared / static_cast<double>(visited));
}

Result criterion_6() {
  const auto lppo = quadrotor_runs("lppo");
  const auto ppo = quadrotor_runs("ppo");
  Result r;
  std::vector<double> lppo_final, ppo_final;
  for (std::size_t i = 0; i < lppo.size(); ++i) {
    lppo_final.push_back(algorithms::final_mean_return(lppo[i].report).value_or(-kNever));
    ppo_final.push_back(algorithms::final_mean_return(ppo[i].report).value_or(-kNever));
  }
  const double lppo_return = mean(lppo_final);
  const double ppo_return = mean(ppo_final);
  // 0.9x of a negative return means at most 10% worse.
  const bool return_ok = lppo_return >= ppo_return - 0.1 * std::abs(ppo_return);

  std::vector<double> lppo_steps, ppo_steps;
  std::vector<double> rms;
  for (std::size_t i = 0; i < lppo.size(); ++i) {
    lppo_steps.push_back(steps_or_never(lppo[i].report, ppo_return));
    ppo_steps.push_back(steps_or_never(ppo[i].report, ppo_return));
    auto env = algorithms::make_environment(lppo[i].loaded.config);
    Rng rng(9000 + i);
    const cert::PolicySummary summary = cert::evaluate_policy(*env, lppo[i].loaded.policy, 10, rng);
    rms.push_back(summary.rms_tracking_error);
    r.details.push_back(fmt("seed %zu: final return LPPO %.1f vs PPO %.1f; steps to %.1f: "
                            "LPPO %.0f vs PPO %.0f; LPPO rms tracking %.3f m",
                            i, lppo_final[i], ppo_final[i], ppo_return, lppo_steps.back(),
                            ppo_steps.back(), rms.back()));
  }
  const bool faster = median(lppo_steps) < median(ppo_steps);

  auto env = algorithms::make_environment(lppo.front().loaded.config);
  const auto& quad = dynamic_cast<const envs::QuadrotorEnv&>(*env);
  const double diagonal = bounding_box_diagonal(quad.reference());
  Rng rng(9100);
  const double random_rms = random_policy_rms(*env, 10, rng);
  const double lppo_rms = mean(rms);
  const bool tracking_ok = lppo_rms < 0.1 * diagonal && lppo_rms * 10.0 <= random_rms;

  r.pass = return_ok && faster && tracking_ok;
  r.summary = fmt("return LPPO %.1f vs PPO %.1f; median steps LPPO %.0f vs PPO %.0f; "
                  "rms %.3f m vs 10%% diagonal %.3f m, random %.3f m",
                  lppo_return, ppo_return, median(lppo_steps), median(ppo_steps), lppo_rms,
                  0.1 * diagonal, random_rms);
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result criterion_7() {
  const fs::path root = fs::temp_directory_path() / "lyacert_determinism";
  std::vector<RunConfig> configs;
  for (const char* algo : {"lsac", "sac", "lppo", "ppo", "lppo-onpolicy-risk"}) {
    for (const char* env : {"pendulum", "quadrotor"}) {
      RunConfig c = RunConfig::defaults(algo, env);
      c.seed = 3;
      c.steps = algorithms::is_off_policy(c.algorithm()) ? 2000 : 4096;
      c.rollout_steps = 1024;
      c.warmup_steps = 500;
      c.batch_size = 64;
      c.log_interval = algorithms::is_off_policy(c.algorithm()) ? 250 : 1024;
      configs.push_back(c);
    }
  }
  Result r;
  int identical = 0;
  for (const RunConfig& c : configs) {
    const std::string name = c.algo + "-" + c.env;
    cli::train_to_directory(c, root / "a" / name);
    cli::train_to_directory(c, root / "b" / name);
    const std::string a = slurp(root / "a" / name / "report.csv");
    const std::string b = slurp(root / "b" / name / "report.csv");
    const bool same = !a.empty() && a == b;
    identical += same;
    r.details.push_back(name + (same ? ": identical" : ": differs"));
  }
  fs::remove_all(root);
  r.pass = identical == static_cast<int>(configs.size());
  r.summary = fmt("%d/%zu configurations reproduce report.csv byte-for-byte", identical,
                  configs.size());
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Result()>> criteria = {
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4},
      {5, criterion_5}, {6, criterion_6}, {7, criterion_7}};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [id, fn] : criteria) selected.push_back(id);

  bool all = true;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }
    Result r;
    try {
      r = it->second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.summary = std::string("error: ") + e.what();
    }
    for (const auto& d : r.details) std::cout << "  " << d << '\n';
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << r.summary
              << std::endl;
    all = all && r.pass;
  }
  return all ? 0 : 1;
}
