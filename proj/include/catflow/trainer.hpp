#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "catflow/policy.hpp"

// Trajectory-balance training over a sequential construction environment.
//
// An environment type must provide:
//   types   State, TerminalSpec
//   State   initial_state() const
//   bool    is_terminal(const State&) const
//   int     feature_dim() const
//   const std::vector<int>& stage_arities() const
//   int     stage_of(const State&) const            (non-terminal states)
//   std::vector<uint8_t> valid_actions(const State&) const
//   State   apply(const State&, int action_index) const
//   void    encode_active(const State&, std::vector<int>&) const
//   TerminalSpec decode_terminal(const State&) const
//
// The unique-parent property of such environments makes the backward policy
// identically one, so the objective reduces to
//   (log_z + sum_t log p(a_t | s_t) - log R)^2.

namespace catflow::policy {

struct TrainerConfig {
  int batch_size = 32;
  int steps = 5000;
  double learning_rate = 1e-3;
  double log_z_learning_rate = 1e-1;
  int hidden = 256;
  std::uint64_t seed = 0;
  double epsilon = 0.05;  // uniform exploration mixture weight

  void validate() const {
    if (batch_size <= 0) throw std::invalid_argument("trainer.batch_size: must be positive");
    if (steps <= 0) throw std::invalid_argument("trainer.steps: must be positive");
    if (learning_rate <= 0) throw std::invalid_argument("trainer.learning_rate: must be positive");
    if (log_z_learning_rate <= 0)
      throw std::invalid_argument("trainer.log_z_learning_rate: must be positive");
    if (hidden <= 0) throw std::invalid_argument("trainer.hidden: must be positive");
    if (epsilon < 0.0 || epsilon >= 1.0)
      throw std::invalid_argument("trainer.epsilon: must be in [0, 1)");
  }
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class State, class Spec>
struct Trajectory {
  struct Step {
    State state;
    int stage = 0;
    std::vector<int> active;           // nonzero feature indices of `state`
    std::vector<std::uint8_t> mask;    // valid actions at `state`
    int action = -1;
    double log_prob = 0.0;             // log p under the policy, not the mixture
  };
  std::vector<Step> steps;
  Spec terminal;
  double reward = 0.0;
};

template <class Env>
using TrajectoryOf = Trajectory<typename Env::State, typename Env::TerminalSpec>;

template <class Spec>
using RewardFn = std::function<double(const Spec&)>;

inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Seed-mixing for derived RNG streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline int sample_categorical(const Eigen::VectorXd& probs,
                              const std::vector<std::uint8_t>& mask,
                              std::mt19937_64& rng) {
  const double u = unit_uniform(rng);
  double acc = 0.0;
  int last_enabled = -1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (!mask[i]) continue;
    last_enabled = static_cast<int>(i);
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  if (last_enabled < 0) throw std::logic_error("sample_categorical: empty mask");
  return last_enabled;  // guards against rounding in the cumulative sum
}

// Draws one complete trajectory. Actions come from the epsilon-mixture of the
// policy with the uniform distribution over enabled actions; the recorded
// log-probabilities are always the policy's own.
template <class Env>
TrajectoryOf<Env> sample_trajectory(
    const Env& env, const PolicyParams& params, std::mt19937_64& rng,
    double epsilon, const RewardFn<typename Env::TerminalSpec>& reward_fn) {
  TrajectoryOf<Env> traj;
  typename Env::State state = env.initial_state();
  while (!env.is_terminal(state)) {
    typename TrajectoryOf<Env>::Step step;
    step.state = state;
    step.stage = env.stage_of(state);
    env.encode_active(state, step.active);
    step.mask = env.valid_actions(state);

    const Eigen::VectorXd h = trunk_hidden_active(params, step.active);
    const Eigen::VectorXd logits = stage_logits(params, h, step.stage);
    const MaskedDistribution dist = masked_softmax_with_log(logits, step.mask);

    int enabled = 0;
    for (auto m : step.mask) enabled += m;
    Eigen::VectorXd behavior = dist.probs;
    if (epsilon > 0.0) {
      const double u = epsilon / enabled;
      for (Eigen::Index i = 0; i < behavior.size(); ++i) {
        if (step.mask[i]) behavior[i] = (1.0 - epsilon) * behavior[i] + u;
      }
    }
    step.action = sample_categorical(behavior, step.mask, rng);
    step.log_prob = dist.log_probs[step.action];
    traj.steps.push_back(std::move(step));
    state = env.apply(state, traj.steps.back().action);
  }
  traj.terminal = env.decode_terminal(state);
  traj.reward = reward_fn(traj.terminal);
  if (!(traj.reward > 0.0) || !std::isfinite(traj.reward)) {
    throw TrainingError("sample_trajectory: reward must be strictly positive, got " +
                        std::to_string(traj.reward));
  }
  return traj;
}

// Recomputed log-probability sum under `params` (the stored log_probs may
// belong to an older snapshot).
template <class State, class Spec>
double log_prob_sum(const PolicyParams& params, const Trajectory<State, Spec>& traj) {
  double sum = 0.0;
  for (const auto& step : traj.steps) {
    const Eigen::VectorXd h = trunk_hidden_active(params, step.active);
    const Eigen::VectorXd logits = stage_logits(params, h, step.stage);
    const MaskedDistribution dist = masked_softmax_with_log(logits, step.mask);
    sum += dist.log_probs[step.action];
  }
  return sum;
}

template <class State, class Spec>
double tb_loss(const PolicyParams& params, const Trajectory<State, Spec>& traj) {
  if (!(traj.reward > 0.0)) {
    throw std::invalid_argument("tb_loss: reward must be strictly positive");
  }
  const double delta =
      params.log_z() + log_prob_sum(params, traj) - std::log(traj.reward);
  return delta * delta;
}

struct GradientResult {
  Eigen::VectorXd grad;  // gradient of the batch-mean loss, flat layout
  double loss = 0.0;     // batch-mean loss
};

// Reverse-mode gradient of the mean trajectory-balance loss.
template <class State, class Spec>
GradientResult tb_gradient(const PolicyParams& params,
                           const std::vector<Trajectory<State, Spec>>& batch) {
  if (batch.empty()) throw std::invalid_argument("tb_gradient: empty batch");
  GradientResult out;
  out.grad = Eigen::VectorXd::Zero(params.flat.size());
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const Eigen::Index trunk_b_off = static_cast<Eigen::Index>(params.hidden) * params.input_dim;

  for (const auto& traj : batch) {
    if (!(traj.reward > 0.0)) {
      throw std::invalid_argument("tb_gradient: reward must be strictly positive");
    }
    // Forward, keeping per-step activations.
    std::vector<Eigen::VectorXd> hiddens;
    std::vector<Eigen::VectorXd> probs;
    hiddens.reserve(traj.steps.size());
    probs.reserve(traj.steps.size());
    double delta = params.log_z() - std::log(traj.reward);
    for (const auto& step : traj.steps) {
      Eigen::VectorXd h = trunk_hidden_active(params, step.active);
      const Eigen::VectorXd logits = stage_logits(params, h, step.stage);
      MaskedDistribution dist = masked_softmax_with_log(logits, step.mask);
      delta += dist.log_probs[step.action];
      hiddens.push_back(std::move(h));
      probs.push_back(std::move(dist.probs));
    }
    out.loss += delta * delta * inv_batch;

    // d(mean loss)/d(delta) for this trajectory.
    const double c = 2.0 * delta * inv_batch;
    out.grad[out.grad.size() - 1] += c;  // log_z

    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& step = traj.steps[t];
      const Eigen::VectorXd& h = hiddens[t];
      const Eigen::VectorXd& p = probs[t];
      const int arity = static_cast<int>(step.mask.size());

      // d log p_a / d logits_j = [j == a] - p_j on enabled entries.
      Eigen::VectorXd g_logits = Eigen::VectorXd::Zero(arity);
      for (int j = 0; j < arity; ++j) {
        if (step.mask[j]) g_logits[j] = -c * p[j];
      }
      g_logits[step.action] += c;

      const Eigen::Index head_off = params.head_offset(step.stage);
      auto head_w = params.head_weight(step.stage);
      Eigen::Map<Eigen::MatrixXd> g_head_w(out.grad.data() + head_off, arity,
                                           params.hidden);
      Eigen::Map<Eigen::VectorXd> g_head_b(
          out.grad.data() + head_off + static_cast<Eigen::Index>(arity) * params.hidden,
          arity);
      g_head_w.noalias() += g_logits * h.transpose();
      g_head_b += g_logits;

      // Through tanh into the trunk.
      const Eigen::VectorXd dh = head_w.transpose() * g_logits;
      const Eigen::VectorXd dpre = dh.array() * (1.0 - h.array().square());
      Eigen::Map<Eigen::MatrixXd> g_trunk_w(out.grad.data(), params.hidden,
                                            params.input_dim);
      Eigen::Map<Eigen::VectorXd> g_trunk_b(out.grad.data() + trunk_b_off,
                                            params.hidden);
      for (int idx : step.active) g_trunk_w.col(idx) += dpre;
      g_trunk_b += dpre;
    }
  }
  return out;
}

struct TrainLogEntry {
  int step = 0;
  double loss = 0.0;
  double log_z = 0.0;
};

template <class Env>
struct TrainResult {
  PolicyParams params;
  AdamState optimizer;
  std::vector<TrainLogEntry> log;
  std::mt19937_64 rng;  // sampler state after the final step
};

// Stochastic-gradient training loop: sample a batch with the current
// parameters, take one Adam step on the mean TB loss, repeat.
template <class Env>
TrainResult<Env> train(const Env& env, const TrainerConfig& config,
                       const RewardFn<typename Env::TerminalSpec>& reward_fn) {
  config.validate();
  TrainResult<Env> result;
  result.params = PolicyParams::random_init(env.feature_dim(), config.hidden,
                                            env.stage_arities(), config.seed);
  result.optimizer = AdamState(result.params.size());
  result.rng.seed(splitmix64(config.seed ^ 0x7261696E6572ULL));
  result.log.reserve(config.steps);

  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  adam.log_z_learning_rate = config.log_z_learning_rate;

  std::vector<TrajectoryOf<Env>> batch;
  batch.reserve(config.batch_size);
  for (int step = 0; step < config.steps; ++step) {
    batch.clear();
    for (int b = 0; b < config.batch_size; ++b) {
      batch.push_back(sample_trajectory(env, result.params, result.rng,
                                        config.epsilon, reward_fn));
    }
    GradientResult g = tb_gradient(result.params, batch);
    if (!std::isfinite(g.loss)) {
      throw TrainingError("train: non-finite loss at step " + std::to_string(step) +
                          " (log_z=" + std::to_string(result.params.log_z()) + ")");
    }
    adam_step(result.params, g.grad, result.optimizer, adam);
    result.log.push_back({step, g.loss, result.params.log_z()});
  }
  return result;
}

}  // namespace catflow::policy
