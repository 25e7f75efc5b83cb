#pragma once

#include "lyacert/algorithms/config.hpp"
#include "lyacert/algorithms/losses.hpp"
#include "lyacert/algorithms/report.hpp"
#include "lyacert/envs/environment.hpp"
#include "lyacert/nn/checkpoint.hpp"

#include <functional>
#include <optional>

namespace lyacert::algorithms {

struct TrainResult {
  RunReport report;
  nn::Checkpoint checkpoint;  // networks after the last step
};

/// Raised when a loss, gradient or parameter turns non-finite. Carries the rows logged
/// up to that point.
class NumericalAbort : public NumericalError {
 public:
  NumericalAbort(const std::string& what, RunReport partial)
      : NumericalError(what), report(std::move(partial)) {}
  RunReport report;
};

/// Called every config.checkpoint_interval environment steps.
using CheckpointCallback = std::function<void(long step, const nn::Checkpoint&)>;

/// SAC and LSAC. The environment is reset by the trainer; `rng` drives every draw.
TrainResult train_lsac(envs::Environment& env, const RunConfig& config, Rng& rng,
                       const CheckpointCallback& on_checkpoint = {});

/// PPO, LPPO and the on-policy-risk baseline.
TrainResult train_lppo(envs::Environment& env, const RunConfig& config, Rng& rng,
                       const CheckpointCallback& on_checkpoint = {});

/// Builds the environment and RNG from the config and dispatches on config.algo.
TrainResult train(const RunConfig& config, const CheckpointCallback& on_checkpoint = {});

/// Networks and metadata recovered from a checkpoint.
struct LoadedRun {
  RunConfig config;
  nn::SquashedGaussianPolicy policy;
  std::optional<lyapunov::LyapunovFunction> lyapunov;
  long step = 0;
};

/// Throws std::runtime_error when the checkpoint lacks a policy or metadata.
LoadedRun load_run(const nn::Checkpoint& checkpoint);

}  // namespace lyacert::algorithms
