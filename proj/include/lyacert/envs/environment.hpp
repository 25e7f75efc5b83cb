#pragma once

#include "lyacert/common.hpp"

#include <memory>
#include <string>
#include <vector>

namespace lyacert::envs {

struct EnvSpec {
  std::string name;
  double dt = 0.0;  // seconds between consecutive observations
  int episode_length = 0;
  int observation_dim = 0;
  int action_dim = 0;
  Vector action_low;
  Vector action_high;
  Vector goal;  // s_G in observation coordinates
  std::vector<std::string> observation_names;
  std::vector<std::string> action_names;
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool terminal = false;   // true end of the task; no bootstrap past it
  bool truncated = false;  // time limit reached
};

/// Episodic control task seen through observations. Implementations are value-like:
/// clone() yields an independent copy with identical state.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual Vector reset(Rng& rng) = 0;
  virtual StepResult step(const Vector& action) = 0;
  /// Distance from the goal in task units (|theta| for the pendulum, metres for tracking).
  virtual double tracking_error(const Vector& observation) const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace lyacert::envs
