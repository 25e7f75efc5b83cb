#include "lyacert/envs/quadrotor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace lyacert::envs {

namespace {

Eigen::Vector4d clip_action(const Eigen::Vector4d& action, const QuadrotorParams& p) {
  Eigen::Vector4d a;
  a(0) = std::clamp(action(0), 0.0, p.max_thrust());
  for (int i = 1; i < 4; ++i) a(i) = std::clamp(action(i), -p.max_rate, p.max_rate);
  return a;
}

bool finite(const QuadrotorState& s) {
  return s.position.allFinite() && s.attitude.coeffs().allFinite() && s.velocity.allFinite() &&
         s.body_rates.allFinite();
}

}  // namespace

QuadrotorState quadrotor_step(const QuadrotorState& state, const Eigen::Vector4d& action,
                              const QuadrotorParams& p) {
  const Eigen::Vector4d a = clip_action(action, p);
  QuadrotorState next;
  // Perfect rate tracking: the commanded body rates take effect immediately.
  next.body_rates = a.tail<3>();

  const Eigen::Vector3d thrust_dir = state.attitude * Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d accel = thrust_dir * (a(0) / p.mass) - p.gravity * Eigen::Vector3d::UnitZ();
  next.velocity = state.velocity + accel * p.dt;
  next.position = state.position + next.velocity * p.dt;

  // q' = q + dt * 0.5 * q (x) (0, w), renormalized.
  const Eigen::Quaterniond& q = state.attitude;
  const Eigen::Quaterniond omega(0.0, next.body_rates.x(), next.body_rates.y(),
                                 next.body_rates.z());
  const Eigen::Quaterniond q_dot = q * omega;
  next.attitude = Eigen::Quaterniond(q.coeffs() + 0.5 * p.dt * q_dot.coeffs());
  next.attitude.normalize();
  return next;
}

double quadrotor_reward(const QuadrotorState& state, const QuadrotorState& reference,
                        const QuadrotorParams& p) {
  const double position = (state.position - reference.position).squaredNorm();
  const double velocity = (state.velocity - reference.velocity).squaredNorm();
  const double alignment = std::abs(state.attitude.coeffs().dot(reference.attitude.coeffs()));
  const double rates = (state.body_rates - reference.body_rates).squaredNorm();
  return -(p.position_weight * position + p.velocity_weight * velocity +
           p.attitude_weight * (1.0 - alignment) + p.rate_weight * rates);
}

ReferenceTrajectory generate_reference(const std::vector<Eigen::Vector4d>& actions,
                                       const QuadrotorState& initial,
                                       const QuadrotorParams& params) {
  ReferenceTrajectory ref;
  ref.dt = params.dt;
  ref.states.reserve(actions.size() + 1);
  ref.states.push_back(initial);
  for (const auto& action : actions) {
    QuadrotorState next = quadrotor_step(ref.states.back(), action, params);
    if (!finite(next))
      throw NumericalError("generate_reference: non-finite state at step " +
                           std::to_string(ref.states.size()));
    ref.states.push_back(next);
  }
  return ref;
}

std::vector<Eigen::Vector4d> default_reference_actions(int steps, const QuadrotorParams& p) {
  // Roll follows A sin(w t) and pitch B sin(w t / 2); rates are their time derivatives.
  // Thrust compensates the tilt and adds a slow vertical bob.
  constexpr double roll_amplitude = 0.06;
  constexpr double pitch_amplitude = 0.04;
  const double w = 2.0 * std::numbers::pi / 5.0;
  std::vector<Eigen::Vector4d> actions;
  actions.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double t = (k + 1) * p.dt;
    const double roll = roll_amplitude * std::sin(w * t);
    const double pitch = pitch_amplitude * std::sin(0.5 * w * t);
    const double thrust =
        p.hover_thrust() / (std::cos(roll) * std::cos(pitch)) * (1.0 + 0.03 * std::sin(w * t));
    actions.emplace_back(thrust, roll_amplitude * w * std::cos(w * t),
                         pitch_amplitude * 0.5 * w * std::cos(0.5 * w * t), 0.0);
  }
  return actions;
}

QuadrotorState default_reference_start() {
  QuadrotorState s;
  s.position = Eigen::Vector3d(1.0, 0.0, 2.0);
  return s;
}

ReferenceTrajectory default_reference(const QuadrotorParams& params) {
  return generate_reference(default_reference_actions(params.episode_length, params),
                            default_reference_start(), params);
}

void write_reference_csv(const std::filesystem::path& path, const ReferenceTrajectory& ref) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz\n";
  out.precision(17);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const QuadrotorState& s = ref.states[i];
    out << ref.time(i) << ',' << s.position.x() << ',' << s.position.y() << ','
        << s.position.z() << ',' << s.attitude.w() << ',' << s.attitude.x() << ','
        << s.attitude.y() << ',' << s.attitude.z() << ',' << s.velocity.x() << ','
        << s.velocity.y() << ',' << s.velocity.z() << ',' << s.body_rates.x() << ','
        << s.body_rates.y() << ',' << s.body_rates.z() << '\n';
  }
}

ReferenceTrajectory read_reference_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open reference " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,px,py,pz", 0) != 0)
    throw std::runtime_error("reference " + path.string() + ": unexpected header");
  ReferenceTrajectory ref;
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 14) throw std::runtime_error("reference: expected 14 columns");
    QuadrotorState s;
    s.position = {v[1], v[2], v[3]};
    s.attitude = Eigen::Quaterniond(v[4], v[5], v[6], v[7]).normalized();
    s.velocity = {v[8], v[9], v[10]};
    s.body_rates = {v[11], v[12], v[13]};
    times.push_back(v[0]);
    ref.states.push_back(s);
  }
  if (ref.states.size() < 2) throw std::runtime_error("reference: need at least two rows");
  ref.dt = times[1] - times[0];
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double step = times[i] - times[i - 1];
    if (!(step > 0.0) || std::abs(step - ref.dt) > 1e-9 * std::max(1.0, times[i]))
      throw std::runtime_error("reference: timestamps must be uniformly increasing");
  }
  return ref;
}

std::optional<Vector> quadrotor_observe(const QuadrotorState& state,
                                        const ReferenceTrajectory& ref, std::size_t step_index,
                                        const QuadrotorParams& p) {
  if (step_index >= ref.size()) return std::nullopt;
  const QuadrotorState& r = ref.states[step_index];
  const Eigen::Quaterniond q_e = r.attitude.conjugate() * state.attitude;
  Vector obs(13);
  obs.segment<3>(0) = (state.position - r.position) / p.position_scale;
  obs.segment<4>(3) << q_e.w(), q_e.x(), q_e.y(), q_e.z();
  obs.segment<3>(7) = (state.velocity - r.velocity) / p.velocity_scale;
  obs.segment<3>(10) = (state.body_rates - r.body_rates) / p.rate_scale;
  return obs;
}

QuadrotorEnv::QuadrotorEnv(QuadrotorParams params, ReferenceTrajectory reference)
    : params_(params), reference_(std::move(reference)) {
  require(params_.dt > 0.0, "quadrotor: dt must be positive");
  require(std::abs(reference_.dt - params_.dt) < 1e-12, "quadrotor: reference dt mismatch");
  require(reference_.size() >= static_cast<std::size_t>(params_.episode_length) + 1,
          "quadrotor: reference shorter than the episode");
  spec_.name = "quadrotor";
  spec_.dt = params_.dt;
  spec_.episode_length = params_.episode_length;
  spec_.observation_dim = 13;
  spec_.action_dim = 4;
  spec_.action_low = Vector{{0.0, -params_.max_rate, -params_.max_rate, -params_.max_rate}};
  spec_.action_high =
      Vector{{params_.max_thrust(), params_.max_rate, params_.max_rate, params_.max_rate}};
  spec_.goal = Vector::Zero(13);
  spec_.goal(3) = 1.0;
  spec_.observation_names = {"pe_x", "pe_y", "pe_z", "qe_w", "qe_x", "qe_y", "qe_z",
                             "ve_x", "ve_y", "ve_z", "we_x", "we_y", "we_z"};
  spec_.action_names = {"thrust", "rate_x", "rate_y", "rate_z"};
}

QuadrotorEnv::QuadrotorEnv(QuadrotorParams params)
    : QuadrotorEnv(params, default_reference(params)) {}

Vector QuadrotorEnv::reset(Rng& rng) {
  std::uniform_real_distribution<double> noise(-params_.init_position_noise,
                                               params_.init_position_noise);
  state_ = reference_.states.front();
  for (int i = 0; i < 3; ++i) state_.position(i) += noise(rng);
  step_index_ = 0;
  return *quadrotor_observe(state_, reference_, 0, params_);
}

StepResult QuadrotorEnv::step(const Vector& action) {
  require(action.size() == 4, "quadrotor: action must have 4 components");
  state_ = quadrotor_step(state_, Eigen::Vector4d(action), params_);
  ++step_index_;
  const auto obs = quadrotor_observe(state_, reference_, step_index_, params_);
  require(obs.has_value(), "quadrotor: stepped past the end of the reference");
  const QuadrotorState& ref = reference_.states[step_index_];
  const double reward = quadrotor_reward(state_, ref, params_);
  const auto remaining = static_cast<std::size_t>(params_.episode_length) - step_index_;
  if (params_.max_position_error > 0.0 &&
      (state_.position - ref.position).norm() > params_.max_position_error)
    return StepResult{*obs, reward * static_cast<double>(remaining + 1), true, false};
  return StepResult{*obs, reward, false, remaining == 0};
}

double QuadrotorEnv::tracking_error(const Vector& observation) const {
  return observation.head<3>().norm() * params_.position_scale;
}

std::unique_ptr<Environment> QuadrotorEnv::clone() const {
  return std::make_unique<QuadrotorEnv>(*this);
}

void QuadrotorEnv::set_state(const QuadrotorState& state, std::size_t step_index) {
  require(step_index <= static_cast<std::size_t>(params_.episode_length),
          "quadrotor: step index out of range");
  state_ = state;
  step_index_ = step_index;
}

}  // namespace lyacert::envs
