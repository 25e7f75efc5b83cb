#pragma once

#include "lyacert/envs/environment.hpp"

#include <utility>

namespace lyacert::envs {

/// theta = 0 is upright.
struct PendulumState {
  double theta = 0.0;
  double theta_dot = 0.0;
};

/// Classic gym Pendulum-v1 constants.
struct PendulumParams {
  double dt = 0.05;
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double max_torque = 2.0;
  double max_speed = 8.0;
  int episode_length = 200;
};

/// One semi-implicit Euler step. The reward is charged on the pre-step state and the
/// clipped torque.
std::pair<PendulumState, double> pendulum_step(const PendulumState& state, double torque,
                                               const PendulumParams& params = {});

/// theta ~ U(-pi, pi), theta_dot ~ U(-1, 1).
PendulumState pendulum_reset(Rng& rng);

/// [cos theta, sin theta, theta_dot]
Vector pendulum_observe(const PendulumState& state);

class PendulumEnv final : public Environment {
 public:
  explicit PendulumEnv(PendulumParams params = {});

  const EnvSpec& spec() const override { return spec_; }
  Vector reset(Rng& rng) override;
  StepResult step(const Vector& action) override;
  double tracking_error(const Vector& observation) const override;
  std::unique_ptr<Environment> clone() const override;

  const PendulumState& state() const { return state_; }
  void set_state(const PendulumState& state) { state_ = state; }

 private:
  PendulumParams params_;
  EnvSpec spec_;
  PendulumState state_;
  int step_index_ = 0;
};

}  // namespace lyacert::envs
