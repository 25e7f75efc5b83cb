#pragma once

#include "lyacert/envs/environment.hpp"

#include <Eigen/Geometry>

#include <filesystem>
#include <optional>
#include <vector>

namespace lyacert::envs {

struct QuadrotorState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();  // body -> world
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d body_rates = Eigen::Vector3d::Zero();
};

/// Rigid-body point-mass model with directly actuated body rates.
struct QuadrotorParams {
  double mass = 1.0;
  double gravity = 9.81;
  double dt = 0.02;
  double max_rate = 3.14159265358979323846;
  int episode_length = 500;

  // Reward weights on squared errors (position, velocity, body rate) and 1 - |<q, q_ref>|.
  double position_weight = 1.0;
  double velocity_weight = 0.1;
  double attitude_weight = 0.1;
  double rate_weight = 0.01;

  // Fixed observation normalization.
  double position_scale = 5.0;
  double velocity_scale = 5.0;
  double rate_scale = 3.14159265358979323846;

  double init_position_noise = 0.25;

  // Leaving this distance from the reference (m) ends the episode; the last reward is charged
  // for every remaining step. 0 disables the bound.
  double max_position_error = 3.0;

  double max_thrust() const { return 2.0 * mass * gravity; }
  double hover_thrust() const { return mass * gravity; }
};

/// Action layout: [F_z (N), omega_x, omega_y, omega_z (rad/s)]. Clipped to the bounds.
QuadrotorState quadrotor_step(const QuadrotorState& state, const Eigen::Vector4d& action,
                              const QuadrotorParams& params = {});

/// Negative weighted quadratic tracking cost of `state` against `reference`.
double quadrotor_reward(const QuadrotorState& state, const QuadrotorState& reference,
                        const QuadrotorParams& params = {});

struct ReferenceTrajectory {
  double dt = 0.02;
  std::vector<QuadrotorState> states;  // states[i] is recorded at t = i * dt

  std::size_t size() const { return states.size(); }
  double time(std::size_t i) const { return static_cast<double>(i) * dt; }
};

/// Open-loop rollout recording the initial state and every successor.
/// Throws NumericalError if the rollout leaves the finite range.
ReferenceTrajectory generate_reference(const std::vector<Eigen::Vector4d>& actions,
                                       const QuadrotorState& initial,
                                       const QuadrotorParams& params = {});

/// Smooth roll/pitch/thrust schedule used when no reference file is given.
std::vector<Eigen::Vector4d> default_reference_actions(int steps,
                                                       const QuadrotorParams& params = {});

/// Hover at (1, 0, 2), level, at rest.
QuadrotorState default_reference_start();

ReferenceTrajectory default_reference(const QuadrotorParams& params = {});

/// CSV with header t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz.
void write_reference_csv(const std::filesystem::path& path, const ReferenceTrajectory& ref);
ReferenceTrajectory read_reference_csv(const std::filesystem::path& path);

/// 13-vector [p_e/ps, q_e, v_e/vs, w_e/ws] with q_e = q_ref^-1 * q. Returns nullopt once
/// step_index runs past the trajectory (episode end).
std::optional<Vector> quadrotor_observe(const QuadrotorState& state,
                                        const ReferenceTrajectory& ref, std::size_t step_index,
                                        const QuadrotorParams& params = {});

class QuadrotorEnv final : public Environment {
 public:
  QuadrotorEnv(QuadrotorParams params, ReferenceTrajectory reference);
  explicit QuadrotorEnv(QuadrotorParams params = {});

  const EnvSpec& spec() const override { return spec_; }
  Vector reset(Rng& rng) override;
  StepResult step(const Vector& action) override;
  double tracking_error(const Vector& observation) const override;
  std::unique_ptr<Environment> clone() const override;

  const QuadrotorState& state() const { return state_; }
  void set_state(const QuadrotorState& state, std::size_t step_index);
  const ReferenceTrajectory& reference() const { return reference_; }

 private:
  QuadrotorParams params_;
  ReferenceTrajectory reference_;
  EnvSpec spec_;
  QuadrotorState state_;
  std::size_t step_index_ = 0;
};

}  // namespace lyacert::envs
