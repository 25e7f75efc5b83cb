#include "lyacert/buffers/buffers.hpp"

#include <cmath>

namespace lyacert::buffers {

Transition Batch::transition(Eigen::Index j) const {
  return Transition{states.col(j), actions.col(j), rewards(j), next_states.col(j),
                    dones(j) != 0.0};
}

Batch make_batch(const std::vector<Transition>& transitions) {
  require(!transitions.empty(), "make_batch: no transitions");
  const auto n = static_cast<Eigen::Index>(transitions.size());
  const auto sd = transitions.front().state.size();
  const auto ad = transitions.front().action.size();
  Batch b{Matrix(sd, n), Matrix(ad, n), Vector(n), Matrix(sd, n), Vector(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = transitions[static_cast<std::size_t>(j)];
    b.states.col(j) = t.state;
    b.actions.col(j) = t.action;
    b.rewards(j) = t.reward;
    b.next_states.col(j) = t.next_state;
    b.dones(j) = t.done ? 1.0 : 0.0;
  }
  return b;
}

namespace {

void check_shape(const Transition& t, int state_dim, int action_dim) {
  require(t.state.size() == state_dim && t.next_state.size() == state_dim &&
              t.action.size() == action_dim,
          "buffer: transition shape does not match the environment");
  require(std::isfinite(t.reward), "buffer: non-finite reward");
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  require(capacity_ > 0, "ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition transition) {
  check_shape(transition, state_dim_, action_dim_);
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(transition));
  } else {
    storage_[cursor_] = std::move(transition);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  require(i < storage_.size(), "ReplayBuffer::at: index out of range");
  const std::size_t oldest = storage_.size() < capacity_ ? 0 : cursor_;
  return storage_[(oldest + i) % storage_.size()];
}

Batch sample_minibatch(const ReplayBuffer& buffer, std::size_t n, Rng& rng) {
  require(!buffer.empty(), "sample_minibatch: empty buffer");
  require(n > 0 && buffer.size() >= n, "sample_minibatch: buffer holds fewer than n transitions");
  std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
  const auto cols = static_cast<Eigen::Index>(n);
  Batch b{Matrix(buffer.state_dim_, cols), Matrix(buffer.action_dim_, cols), Vector(cols),
          Matrix(buffer.state_dim_, cols), Vector(cols)};
  for (Eigen::Index j = 0; j < cols; ++j) {
    const Transition& t = buffer.storage_[pick(rng)];
    b.states.col(j) = t.state;
    b.actions.col(j) = t.action;
    b.rewards(j) = t.reward;
    b.next_states.col(j) = t.next_state;
    b.dones(j) = t.done ? 1.0 : 0.0;
  }
  return b;
}

RolloutBuffer::RolloutBuffer(int state_dim, int action_dim)
    : state_dim_(state_dim), action_dim_(action_dim) {}

void RolloutBuffer::push(RolloutStep step) {
  check_shape(step.transition, state_dim_, action_dim_);
  require(step.pre_tanh.size() == 0 || step.pre_tanh.size() == action_dim_,
          "RolloutBuffer: pre-squash action shape mismatch");
  if (step.transition.done) step.episode_end = true;
  steps_.push_back(std::move(step));
}

Batch RolloutBuffer::as_batch() const {
  std::vector<std::size_t> all(steps_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return subset(all);
}

Batch RolloutBuffer::subset(const std::vector<std::size_t>& indices) const {
  require(!indices.empty(), "RolloutBuffer::subset: no indices");
  const auto n = static_cast<Eigen::Index>(indices.size());
  Batch b{Matrix(state_dim_, n), Matrix(action_dim_, n), Vector(n), Matrix(state_dim_, n),
          Vector(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = steps_.at(indices[static_cast<std::size_t>(j)]).transition;
    b.states.col(j) = t.state;
    b.actions.col(j) = t.action;
    b.rewards(j) = t.reward;
    b.next_states.col(j) = t.next_state;
    b.dones(j) = t.done ? 1.0 : 0.0;
  }
  return b;
}

Advantages compute_advantages(const RolloutBuffer& rollout, const ValueFn& value_fn,
                              double gamma, double lambda) {
  require(!rollout.empty(), "compute_advantages: empty rollout");
  require(gamma > 0.0 && gamma <= 1.0, "compute_advantages: gamma must lie in (0, 1]");
  require(lambda >= 0.0 && lambda <= 1.0, "compute_advantages: lambda must lie in [0, 1]");
  const Batch batch = rollout.as_batch();
  const Vector values = value_fn(batch.states);
  const Vector next_values = value_fn(batch.next_states);
  const auto n = batch.size();

  Advantages out{Vector(n), Vector(n)};
  double running = 0.0;
  for (Eigen::Index t = n; t-- > 0;) {
    const RolloutStep& step = rollout[static_cast<std::size_t>(t)];
    const double bootstrap = step.transition.done ? 0.0 : gamma * next_values(t);
    const double delta = step.transition.reward + bootstrap - values(t);
    const bool chain = !step.episode_end && t + 1 < n;
    running = delta + (chain ? gamma * lambda * running : 0.0);
    out.advantages(t) = running;
  }
  out.returns = out.advantages + values;
  return out;
}

void normalize(Vector& values) {
  if (values.size() == 0) return;
  const double mean = values.mean();
  values.array() -= mean;
  const double std = std::sqrt(values.squaredNorm() / static_cast<double>(values.size()));
  values /= (std + 1e-8);
}

}  // namespace lyacert::buffers
