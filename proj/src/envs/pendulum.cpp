#include "lyacert/envs/pendulum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lyacert::envs {

std::pair<PendulumState, double> pendulum_step(const PendulumState& state, double torque,
                                               const PendulumParams& p) {
  const double u = std::clamp(torque, -p.max_torque, p.max_torque);
  const double angle = wrap_angle(state.theta);
  const double cost =
      angle * angle + 0.1 * state.theta_dot * state.theta_dot + 0.001 * u * u;

  const double accel = 3.0 * p.gravity / (2.0 * p.length) * std::sin(state.theta) +
                       3.0 / (p.mass * p.length * p.length) * u;
  PendulumState next;
  next.theta_dot = std::clamp(state.theta_dot + accel * p.dt, -p.max_speed, p.max_speed);
  next.theta = wrap_angle(state.theta + next.theta_dot * p.dt);
  return {next, -cost};
}

PendulumState pendulum_reset(Rng& rng) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> rate(-1.0, 1.0);
  PendulumState s;
  s.theta = angle(rng);
  s.theta_dot = rate(rng);
  return s;
}

Vector pendulum_observe(const PendulumState& state) {
  return Vector{{std::cos(state.theta), std::sin(state.theta), state.theta_dot}};
}

PendulumEnv::PendulumEnv(PendulumParams params) : params_(params) {
  require(params_.dt > 0.0, "pendulum: dt must be positive");
  require(params_.episode_length > 0, "pendulum: episode length must be positive");
  spec_.name = "pendulum";
  spec_.dt = params_.dt;
  spec_.episode_length = params_.episode_length;
  spec_.observation_dim = 3;
  spec_.action_dim = 1;
  spec_.action_low = Vector::Constant(1, -params_.max_torque);
  spec_.action_high = Vector::Constant(1, params_.max_torque);
  spec_.goal = pendulum_observe(PendulumState{});
  spec_.observation_names = {"cos_theta", "sin_theta", "theta_dot"};
  spec_.action_names = {"torque"};
}

Vector PendulumEnv::reset(Rng& rng) {
  state_ = pendulum_reset(rng);
  step_index_ = 0;
  return pendulum_observe(state_);
}

StepResult PendulumEnv::step(const Vector& action) {
  require(action.size() == 1, "pendulum: action must be one torque");
  auto [next, reward] = pendulum_step(state_, action(0), params_);
  state_ = next;
  ++step_index_;
  return StepResult{pendulum_observe(state_), reward, false,
                    step_index_ >= params_.episode_length};
}

double PendulumEnv::tracking_error(const Vector& observation) const {
  return std::abs(std::atan2(observation(1), observation(0)));
}

std::unique_ptr<Environment> PendulumEnv::clone() const {
  return std::make_unique<PendulumEnv>(*this);
}

}  // namespace lyacert::envs
