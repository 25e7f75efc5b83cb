#pragma once

#include "lyacert/common.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace lyacert::buffers {

struct Transition {
  Vector state;
  Vector action;
  double reward = 0.0;
  Vector next_state;
  bool done = false;  // terminal: no bootstrapping through next_state
};

/// Column-stacked transitions; column j of every matrix belongs to sample j.
struct Batch {
  Matrix states;
  Matrix actions;
  Vector rewards;
  Matrix next_states;
  Vector dones;  // 1.0 for terminal transitions

  Eigen::Index size() const { return states.cols(); }
  Transition transition(Eigen::Index j) const;
};

Batch make_batch(const std::vector<Transition>& transitions);

/// Fixed-capacity ring; the oldest transition is overwritten once full.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

  void push(Transition transition);
  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }
  /// i-th stored transition in insertion order (0 = oldest still retained).
  const Transition& at(std::size_t i) const;

 private:
  friend Batch sample_minibatch(const ReplayBuffer&, std::size_t, Rng&);

  std::size_t capacity_;
  int state_dim_;
  int action_dim_;
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;
};

/// n indices drawn uniformly with replacement over the filled slots.
Batch sample_minibatch(const ReplayBuffer& buffer, std::size_t n, Rng& rng);

struct RolloutStep {
  Transition transition;
  Vector pre_tanh;         // pre-squash action sample
  double log_prob = 0.0;   // log pi_old(a|s)
  double value = 0.0;      // V(s) at collection time
  bool episode_end = false;  // terminal or truncated; advantages do not cross it
};

/// Ordered on-policy transitions of one collection phase.
class RolloutBuffer {
 public:
  RolloutBuffer(int state_dim, int action_dim);

  void push(RolloutStep step);
  void clear() { steps_.clear(); }
  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  const RolloutStep& operator[](std::size_t i) const { return steps_[i]; }
  const std::vector<RolloutStep>& steps() const { return steps_; }

  Batch as_batch() const;
  Batch subset(const std::vector<std::size_t>& indices) const;

 private:
  int state_dim_;
  int action_dim_;
  std::vector<RolloutStep> steps_;
};

struct Advantages {
  Vector advantages;
  Vector returns;  // advantages + V(s_t)
};

/// Batched state-value function: columns in, one value per column out.
using ValueFn = std::function<Vector(const Matrix&)>;

/// GAE(lambda): A_t = sum_k (gamma lambda)^k delta_{t+k}, with
/// delta_t = r_t + gamma (1 - done_t) V(s_{t+1}) - V(s_t). The sum stops at episode ends and
/// at the end of the rollout. Values are recomputed with value_fn.
Advantages compute_advantages(const RolloutBuffer& rollout, const ValueFn& value_fn,
                              double gamma, double lambda);

/// In-place shift/scale to zero mean and unit variance (population std + 1e-8).
void normalize(Vector& values);

}  // namespace lyacert::buffers
