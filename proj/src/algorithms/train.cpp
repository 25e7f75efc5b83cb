#include "lyacert/algorithms/train.hpp"

#include "lyacert/nn/adam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lyacert::algorithms {

namespace {

struct Mean {
  double sum = 0.0;
  long count = 0;

  void add(double v) {
    sum += v;
    ++count;
  }
  std::optional<double> take() {
    if (count == 0) return std::nullopt;
    const double m = sum / static_cast<double>(count);
    *this = Mean{};
    return m;
  }
};

struct Log {
  Mean policy, q, value, risk, certification, violations;

  bool any() const {
    return policy.count || q.count || value.count || risk.count || certification.count ||
           violations.count;
  }
  void flush(RunReport& report, long step) {
    if (!any()) return;
    ReportRow& row = report.row(step);
    row.policy_loss = policy.take();
    row.q_loss = q.take();
    row.value_loss = value.take();
    row.lyapunov_risk = risk.take();
    row.certification_risk = certification.take();
    row.violation_fraction = violations.take();
  }
};

void check_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericalError(std::string("non-finite ") + what);
}

nn::AdamState adam_for(const nn::DenseNet& net, double lr) {
  nn::AdamConfig config;
  config.learning_rate = lr;
  return nn::AdamState(net, config);
}

nlohmann::json vector_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector json_vector(const nlohmann::json& doc) {
  const auto values = doc.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nn::Checkpoint make_checkpoint(const RunConfig& config, long step,
                               const nn::SquashedGaussianPolicy& policy,
                               const lyapunov::LyapunovFunction* lyap) {
  nn::Checkpoint ckpt;
  ckpt.nets["policy"] = policy.trunk();
  ckpt.meta["algo"] = config.algo;
  ckpt.meta["env"] = config.env;
  ckpt.meta["seed"] = config.seed;
  ckpt.meta["step"] = step;
  ckpt.meta["config"] = to_json(config);
  ckpt.meta["policy"] = {{"action_scale", vector_json(policy.action_scale())},
                         {"action_bias", vector_json(policy.action_bias())},
                         {"log_std_min", policy.log_std_min()},
                         {"log_std_max", policy.log_std_max()}};
  if (lyap) {
    ckpt.nets["lyapunov"] = lyap->net;
    ckpt.meta["lyapunov"] = {{"mu", lyap->mu},
                             {"dt", lyap->dt},
                             {"goal", vector_json(lyap->goal)},
                             {"state_only", lyap->state_only}};
  }
  return ckpt;
}

nn::Checkpoint sac_checkpoint(const RunConfig& config, long step, const SacAgent& agent,
                              const lyapunov::LyapunovFunction* lyap) {
  nn::Checkpoint ckpt = make_checkpoint(config, step, agent.policy, lyap);
  ckpt.nets["q"] = agent.q;
  if (agent.q2) ckpt.nets["q2"] = *agent.q2;
  ckpt.nets["value"] = agent.value;
  ckpt.nets["value_target"] = agent.value_target;
  return ckpt;
}

nn::Checkpoint ppo_checkpoint(const RunConfig& config, long step, const PpoAgent& agent,
                              const lyapunov::LyapunovFunction* lyap) {
  nn::Checkpoint ckpt = make_checkpoint(config, step, agent.policy, lyap);
  ckpt.nets["value"] = agent.value;
  return ckpt;
}

// Scales rewards by the running standard deviation of the discounted return.
class RewardScaler {
 public:
  explicit RewardScaler(double gamma) : gamma_(gamma) {}

  double operator()(double reward, bool episode_end) {
    ret_ = ret_ * gamma_ + reward;
    const double delta = ret_ - mean_;
    const double total = count_ + 1.0;
    mean_ += delta / total;
    var_ = (var_ * count_ + delta * delta * count_ / total) / total;
    count_ = total;
    if (episode_end) ret_ = 0.0;
    return std::clamp(reward / std::sqrt(var_ + 1e-8), -10.0, 10.0);
  }

 private:
  double gamma_;
  double ret_ = 0.0;
  double mean_ = 0.0;
  double var_ = 1.0;
  double count_ = 1e-4;
};

Vector random_action(const envs::EnvSpec& spec, Rng& rng) {
  const Vector u = uniform(spec.action_dim, 1, 0.0, 1.0, rng);
  return spec.action_low.array() + (spec.action_high - spec.action_low).array() * u.array();
}

void check_config(const envs::Environment& env, const RunConfig& config, bool off_policy) {
  config.validate();
  require(is_off_policy(config.algorithm()) == off_policy,
          "trainer does not handle algorithm " + config.algo);
  require(env.spec().observation_dim > 0, "trainer: environment without observations");
}

}  // namespace

TrainResult train_lsac(envs::Environment& env, const RunConfig& config, Rng& rng,
                       const CheckpointCallback& on_checkpoint) {
  check_config(env, config, true);
  const envs::EnvSpec& spec = env.spec();
  Rng lyap_rng(rng());
  SacAgent agent = make_sac_agent(spec, config, rng);
  std::optional<lyapunov::LyapunovFunction> lyap;
  if (config.lyapunov_fit) lyap = make_lyapunov(spec, config, lyap_rng);
  const LyapunovConfig lcfg{config.beta, config.mu, config.lyapunov_steps};

  nn::AdamState opt_policy = adam_for(agent.policy.trunk(), config.lr_policy);
  nn::AdamState opt_q = adam_for(agent.q, config.lr_q);
  std::optional<nn::AdamState> opt_q2;
  if (agent.q2) opt_q2 = adam_for(*agent.q2, config.lr_q);
  nn::AdamState opt_value = adam_for(agent.value, config.lr_value);
  std::optional<nn::AdamState> opt_lyap;
  if (lyap) opt_lyap = adam_for(lyap->net, config.lr_lyapunov);

  buffers::ReplayBuffer buffer(static_cast<std::size_t>(config.buffer_capacity),
                               spec.observation_dim, spec.action_dim);
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  RunReport report;
  Log log;
  auto checkpoint = [&](long step) {
    return sac_checkpoint(config, step, agent, lyap ? &*lyap : nullptr);
  };

  try {
    Vector obs = env.reset(rng);
    double episode_return = 0.0;
    for (long step = 0; step < config.steps; ++step) {
      Vector action;
      if (step < config.warmup_steps) {
        action = random_action(spec, rng);
      } else {
        action = agent.policy.sample(obs, standard_normal(spec.action_dim, 1, rng).col(0)).action;
      }
      envs::StepResult result = env.step(action);
      check_finite(result.reward, "reward");
      episode_return += result.reward;
      buffer.push({obs, action, result.reward, result.observation, result.terminal});
      obs = std::move(result.observation);
      if (result.terminal || result.truncated) {
        report.add_episode(step + 1, episode_return);
        episode_return = 0.0;
        obs = env.reset(rng);
      }

      if (step + 1 >= config.warmup_steps && buffer.size() >= batch_size) {
        if (lyap) {
          for (int k = 0; k < config.lyapunov_steps; ++k) {
            const buffers::Batch batch = sample_minibatch(buffer, batch_size, lyap_rng);
            const lyapunov::Risk risk = lyapunov::training_risk(batch, *lyap, agent.policy);
            check_finite(risk.value, "Lyapunov risk");
            nn::adam_step(lyap->net, risk.grad, *opt_lyap);
            log.risk.add(risk.value);
            log.certification.add(risk.certification);
            log.violations.add(static_cast<double>(risk.violations) /
                               static_cast<double>(batch.size()));
          }
        }
        for (int k = 0; k < config.policy_steps; ++k) {
          const buffers::Batch batch = sample_minibatch(buffer, batch_size, rng);
          const Matrix value_noise = standard_normal(spec.action_dim, batch.size(), rng);
          const SacValueLosses values = sac_value_losses(batch, agent, value_noise);
          check_finite(values.value.value, "value loss");
          check_finite(values.q.value, "Q loss");
          nn::adam_step(agent.value, values.value.grad, opt_value);
          nn::adam_step(agent.q, values.q.grad, opt_q);
          if (values.q2) nn::adam_step(*agent.q2, values.q2->grad, *opt_q2);

          const Matrix policy_noise = standard_normal(spec.action_dim, batch.size(), rng);
          const Loss policy = (lyap && config.beta > 0.0)
                                  ? lsac_policy_loss(batch, agent, *lyap, lcfg, policy_noise)
                                  : sac_policy_loss(batch, agent, policy_noise);
          check_finite(policy.value, "policy loss");
          nn::adam_step(agent.policy.trunk(), policy.grad, opt_policy);
          nn::polyak_update(agent.value_target, agent.value, agent.tau);

          log.value.add(values.value.value);
          log.q.add(values.q.value);
          log.policy.add(policy.value);
        }
      }

      if ((step + 1) % config.log_interval == 0) log.flush(report, step + 1);
      if (on_checkpoint && config.checkpoint_interval > 0 &&
          (step + 1) % config.checkpoint_interval == 0)
        on_checkpoint(step + 1, checkpoint(step + 1));
    }
    if (config.steps % config.log_interval != 0) log.flush(report, config.steps);
  } catch (const NumericalError& e) {
    throw NumericalAbort(e.what(), report);
  }
  return TrainResult{std::move(report), checkpoint(config.steps)};
}

TrainResult train_lppo(envs::Environment& env, const RunConfig& config, Rng& rng,
                       const CheckpointCallback& on_checkpoint) {
  check_config(env, config, false);
  const envs::EnvSpec& spec = env.spec();
  Rng lyap_rng(rng());
  PpoAgent agent = make_ppo_agent(spec, config, rng);
  std::optional<lyapunov::LyapunovFunction> lyap;
  if (config.lyapunov_fit) lyap = make_lyapunov(spec, config, lyap_rng);
  const LyapunovConfig lcfg{config.beta, config.mu, config.lyapunov_epochs};

  nn::AdamState opt_policy = adam_for(agent.policy.trunk(), config.lr_policy);
  nn::AdamState opt_value = adam_for(agent.value, config.lr_value);
  std::optional<nn::AdamState> opt_lyap;
  if (lyap) opt_lyap = adam_for(lyap->net, config.lr_lyapunov);

  RewardScaler scaler(config.gamma);
  buffers::RolloutBuffer rollout(spec.observation_dim, spec.action_dim);
  RunReport report;
  Log log;
  auto checkpoint = [&](long step) {
    return ppo_checkpoint(config, step, agent, lyap ? &*lyap : nullptr);
  };
  const buffers::ValueFn value_fn = [&](const Matrix& states) -> Vector {
    return agent.value.forward(states).row(0).transpose();
  };

  try {
    Vector obs = env.reset(rng);
    double episode_return = 0.0;
    long step = 0;
    while (step < config.steps) {
      rollout.clear();
      const long n = std::min<long>(config.rollout_steps, config.steps - step);
      for (long i = 0; i < n; ++i) {
        const auto sample =
            agent.policy.sample(obs, standard_normal(spec.action_dim, 1, rng).col(0));
        envs::StepResult result = env.step(sample.action);
        check_finite(result.reward, "reward");
        episode_return += result.reward;
        const bool episode_end = result.terminal || result.truncated;
        const double reward =
            config.normalize_reward ? scaler(result.reward, episode_end) : result.reward;
        buffers::RolloutStep record;
        record.transition = {obs, sample.action, reward, result.observation, result.terminal};
        record.pre_tanh = sample.pre_tanh;
        record.log_prob = sample.log_prob;
        record.episode_end = episode_end;
        rollout.push(std::move(record));
        obs = std::move(result.observation);
        ++step;
        if (episode_end) {
          report.add_episode(step, episode_return);
          episode_return = 0.0;
          obs = env.reset(rng);
        }
        if (on_checkpoint && config.checkpoint_interval > 0 &&
            step % config.checkpoint_interval == 0)
          on_checkpoint(step, checkpoint(step));
      }

      std::vector<std::size_t> order(rollout.size());
      const auto mb = static_cast<std::size_t>(config.minibatch_size);

      // Lyapunov fit on this rollout, before the policy moves.
      if (lyap) {
        for (int epoch = 0; epoch < config.lyapunov_epochs; ++epoch) {
          std::iota(order.begin(), order.end(), 0);
          std::shuffle(order.begin(), order.end(), lyap_rng);
          for (std::size_t start = 0; start < order.size(); start += mb) {
            const std::vector<std::size_t> idx(
                order.begin() + static_cast<long>(start),
                order.begin() + static_cast<long>(std::min(order.size(), start + mb)));
            const buffers::Batch batch = rollout.subset(idx);
            const lyapunov::Risk risk = lyap->state_only
                                            ? lyapunov::on_policy_risk(batch, *lyap)
                                            : lyapunov::training_risk(batch, *lyap, agent.policy);
            check_finite(risk.value, "Lyapunov risk");
            nn::adam_step(lyap->net, risk.grad, *opt_lyap);
            log.risk.add(risk.value);
            log.certification.add(risk.certification);
            log.violations.add(static_cast<double>(risk.violations) /
                               static_cast<double>(batch.size()));
          }
        }
      }

      const buffers::Advantages adv =
          buffers::compute_advantages(rollout, value_fn, config.gamma, config.gae_lambda);
      for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += mb) {
          const std::vector<std::size_t> idx(
              order.begin() + static_cast<long>(start),
              order.begin() + static_cast<long>(std::min(order.size(), start + mb)));
          const auto count = static_cast<Eigen::Index>(idx.size());
          PpoMinibatch minibatch{rollout.subset(idx), Matrix(spec.action_dim, count),
                                 Vector(count), Vector(count), Vector(count)};
          for (Eigen::Index j = 0; j < count; ++j) {
            const buffers::RolloutStep& s = rollout[idx[static_cast<std::size_t>(j)]];
            minibatch.pre_tanh.col(j) = s.pre_tanh;
            minibatch.old_log_probs(j) = s.log_prob;
            minibatch.advantages(j) = adv.advantages(static_cast<Eigen::Index>(idx[j]));
            minibatch.returns(j) = adv.returns(static_cast<Eigen::Index>(idx[j]));
          }
          if (config.normalize_advantages && count > 1) buffers::normalize(minibatch.advantages);

          Loss policy = (lyap && config.beta > 0.0)
                            ? lppo_policy_loss(minibatch, agent, *lyap, lcfg)
                            : ppo_policy_loss(minibatch, agent, minibatch.advantages);
          check_finite(policy.value, "policy loss");
          nn::clip_global_norm(policy.grad, config.max_grad_norm);
          nn::adam_step(agent.policy.trunk(), policy.grad, opt_policy);

          Loss value = ppo_value_loss(minibatch, agent);
          check_finite(value.value, "value loss");
          nn::clip_global_norm(value.grad, config.max_grad_norm);
          nn::adam_step(agent.value, value.grad, opt_value);

          log.policy.add(policy.value);
          log.value.add(value.value);
        }
      }
      log.flush(report, step);
    }
  } catch (const NumericalError& e) {
    throw NumericalAbort(e.what(), report);
  }
  return TrainResult{std::move(report), checkpoint(config.steps)};
}

TrainResult train(const RunConfig& config, const CheckpointCallback& on_checkpoint) {
  config.validate();
  auto env = make_environment(config);
  Rng rng(config.seed);
  return is_off_policy(config.algorithm()) ? train_lsac(*env, config, rng, on_checkpoint)
                                           : train_lppo(*env, config, rng, on_checkpoint);
}

LoadedRun load_run(const nn::Checkpoint& checkpoint) {
  if (!checkpoint.has("policy") || !checkpoint.meta.contains("policy") ||
      !checkpoint.meta.contains("config"))
    throw std::runtime_error("checkpoint has no policy");
  LoadedRun run;
  run.config = config_from_json(checkpoint.meta.at("config"));
  const auto& p = checkpoint.meta.at("policy");
  run.policy = nn::SquashedGaussianPolicy(checkpoint.at("policy"), json_vector(p.at("action_scale")),
                                          json_vector(p.at("action_bias")),
                                          p.at("log_std_min").get<double>(),
                                          p.at("log_std_max").get<double>());
  if (checkpoint.has("lyapunov") && checkpoint.meta.contains("lyapunov")) {
    const auto& l = checkpoint.meta.at("lyapunov");
    run.lyapunov = lyapunov::LyapunovFunction{
        checkpoint.at("lyapunov"), l.at("mu").get<double>(), l.at("dt").get<double>(),
        json_vector(l.at("goal")), l.at("state_only").get<bool>()};
  }
  run.step = checkpoint.meta.value("step", 0L);
  return run;
}

}  // namespace lyacert::algorithms
