#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace catflow::policy {

/// Stage-headed policy network: a shared tanh trunk feeding one linear head
/// per construction stage, plus a learned log-partition scalar.
///
/// All parameters live in one flat vector so that checkpointing, optimizer
/// state, and finite-difference probes address coordinates uniformly.
/// Layout: [trunk W (hidden x input) | trunk b | head_0 W (arity_0 x hidden) |
/// head_0 b | ... | log_z].
struct PolicyParams {
  int input_dim = 0;
  int hidden = 0;
  std::vector<int> arities;
  Eigen::VectorXd flat;

  static PolicyParams zeros(int input_dim, int hidden, std::vector<int> arities);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, log_z = 0.
  static PolicyParams random_init(int input_dim, int hidden,
                                  std::vector<int> arities, std::uint64_t seed);

  Eigen::Index size() const { return flat.size(); }

  Eigen::Map<Eigen::MatrixXd> trunk_weight();
  Eigen::Map<const Eigen::MatrixXd> trunk_weight() const;
  Eigen::Map<Eigen::VectorXd> trunk_bias();
  Eigen::Map<const Eigen::VectorXd> trunk_bias() const;
  Eigen::Map<Eigen::MatrixXd> head_weight(int stage);
  Eigen::Map<const Eigen::MatrixXd> head_weight(int stage) const;
  Eigen::Map<Eigen::VectorXd> head_bias(int stage);
  Eigen::Map<const Eigen::VectorXd> head_bias(int stage) const;
  double& log_z() { return flat[flat.size() - 1]; }
  double log_z() const { return flat[flat.size() - 1]; }

  // Offset of a head's weight block within the flat vector.
  Eigen::Index head_offset(int stage) const;
};

/// tanh(W x + b) for a dense feature vector. Throws on dimension mismatch.
Eigen::VectorXd trunk_hidden(const PolicyParams& params,
                             const Eigen::VectorXd& features);

/// Same trunk evaluated from the indices of the nonzero (0/1) features.
Eigen::VectorXd trunk_hidden_active(const PolicyParams& params,
                                    std::span<const int> active);

Eigen::VectorXd stage_logits(const PolicyParams& params,
                             const Eigen::VectorXd& hidden_activations,
                             int stage);

/// Logits for every stage head from one feature vector.
std::vector<Eigen::VectorXd> policy_forward(const PolicyParams& params,
                                            const Eigen::VectorXd& features);

/// Probabilities over enabled entries; masked entries are exactly zero.
/// Throws if no entry is enabled.
Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits,
                               const std::vector<std::uint8_t>& mask);

struct MaskedDistribution {
  Eigen::VectorXd probs;      // masked entries exactly 0
  Eigen::VectorXd log_probs;  // masked entries -inf
};

/// Softmax and its logarithm in one pass, computed stably.
MaskedDistribution masked_softmax_with_log(const Eigen::VectorXd& logits,
                                           const std::vector<std::uint8_t>& mask);

struct AdamConfig {
  double learning_rate = 1e-3;
  double log_z_learning_rate = 1e-1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;

  AdamState() = default;
  explicit AdamState(Eigen::Index n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// Bias-corrected Adam update in place. The trailing log_z coordinate uses
/// its own learning rate.
void adam_step(PolicyParams& params, const Eigen::VectorXd& grad,
               AdamState& state, const AdamConfig& config);

}  // namespace catflow::policy
