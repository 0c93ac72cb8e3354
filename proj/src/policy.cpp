#include "catflow/policy.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace catflow::policy {

namespace {

Eigen::Index total_size(int input_dim, int hidden, const std::vector<int>& arities) {
  Eigen::Index n = static_cast<Eigen::Index>(hidden) * input_dim + hidden;
  for (int a : arities) n += static_cast<Eigen::Index>(a) * hidden + a;
  return n + 1;  // log_z
}

}  // namespace

PolicyParams PolicyParams::zeros(int input_dim, int hidden,
                                 std::vector<int> arities) {
  if (input_dim <= 0 || hidden <= 0 || arities.empty()) {
    throw std::invalid_argument("PolicyParams: dimensions must be positive");
  }
  PolicyParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.arities = std::move(arities);
  p.flat = Eigen::VectorXd::Zero(total_size(input_dim, hidden, p.arities));
  return p;
}

PolicyParams PolicyParams::random_init(int input_dim, int hidden,
                                       std::vector<int> arities,
                                       std::uint64_t seed) {
  PolicyParams p = zeros(input_dim, hidden, std::move(arities));
  std::mt19937_64 gen(seed);
  auto uniform = [&gen](double scale) {
    // 53-bit mantissa draw in [0,1), implementation-independent
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * scale;
  };
  {
    auto w = p.trunk_weight();
    const double s = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = uniform(s);
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int stage = 0; stage < static_cast<int>(p.arities.size()); ++stage) {
    auto w = p.head_weight(stage);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = uniform(s);
  }
  return p;
}

Eigen::Map<Eigen::MatrixXd> PolicyParams::trunk_weight() {
  return {flat.data(), hidden, input_dim};
}

Eigen::Map<const Eigen::MatrixXd> PolicyParams::trunk_weight() const {
  return {flat.data(), hidden, input_dim};
}

Eigen::Map<Eigen::VectorXd> PolicyParams::trunk_bias() {
  return {flat.data() + static_cast<Eigen::Index>(hidden) * input_dim, hidden};
}

Eigen::Map<const Eigen::VectorXd> PolicyParams::trunk_bias() const {
  return {flat.data() + static_cast<Eigen::Index>(hidden) * input_dim, hidden};
}

Eigen::Index PolicyParams::head_offset(int stage) const {
  if (stage < 0 || stage >= static_cast<int>(arities.size())) {
    throw std::invalid_argument("head_offset: stage out of range");
  }
  Eigen::Index off = static_cast<Eigen::Index>(hidden) * input_dim + hidden;
  for (int s = 0; s < stage; ++s) {
    off += static_cast<Eigen::Index>(arities[s]) * hidden + arities[s];
  }
  return off;
}

Eigen::Map<Eigen::MatrixXd> PolicyParams::head_weight(int stage) {
  return {flat.data() + head_offset(stage), arities[stage], hidden};
}

Eigen::Map<const Eigen::MatrixXd> PolicyParams::head_weight(int stage) const {
  return {flat.data() + head_offset(stage), arities[stage], hidden};
}

Eigen::Map<Eigen::VectorXd> PolicyParams::head_bias(int stage) {
  return {flat.data() + head_offset(stage) +
              static_cast<Eigen::Index>(arities[stage]) * hidden,
          arities[stage]};
}

Eigen::Map<const Eigen::VectorXd> PolicyParams::head_bias(int stage) const {
  return {flat.data() + head_offset(stage) +
              static_cast<Eigen::Index>(arities[stage]) * hidden,
          arities[stage]};
}

Eigen::VectorXd trunk_hidden(const PolicyParams& params,
                             const Eigen::VectorXd& features) {
  if (features.size() != params.input_dim) {
    throw std::invalid_argument("trunk_hidden: feature length " +
                                std::to_string(features.size()) +
                                " != input_dim " +
                                std::to_string(params.input_dim));
  }
  Eigen::VectorXd pre = params.trunk_weight() * features + params.trunk_bias();
  return pre.array().tanh();
}

Eigen::VectorXd trunk_hidden_active(const PolicyParams& params,
                                    std::span<const int> active) {
  Eigen::VectorXd pre = params.trunk_bias();
  const auto w = params.trunk_weight();
  for (int idx : active) {
    if (idx < 0 || idx >= params.input_dim) {
      throw std::invalid_argument("trunk_hidden_active: index out of range");
    }
    pre += w.col(idx);
  }
  return pre.array().tanh();
}

Eigen::VectorXd stage_logits(const PolicyParams& params,
                             const Eigen::VectorXd& hidden_activations,
                             int stage) {
  if (hidden_activations.size() != params.hidden) {
    throw std::invalid_argument("stage_logits: hidden size mismatch");
  }
  return params.head_weight(stage) * hidden_activations + params.head_bias(stage);
}

std::vector<Eigen::VectorXd> policy_forward(const PolicyParams& params,
                                            const Eigen::VectorXd& features) {
  const Eigen::VectorXd h = trunk_hidden(params, features);
  std::vector<Eigen::VectorXd> logits;
  logits.reserve(params.arities.size());
  for (int stage = 0; stage < static_cast<int>(params.arities.size()); ++stage) {
    logits.push_back(stage_logits(params, h, stage));
  }
  return logits;
}

MaskedDistribution masked_softmax_with_log(const Eigen::VectorXd& logits,
                                           const std::vector<std::uint8_t>& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != logits.size()) {
    throw std::invalid_argument("masked_softmax: mask length mismatch");
  }
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double max_logit = kNegInf;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (mask[i] && logits[i] > max_logit) max_logit = logits[i];
  }
  if (max_logit == kNegInf) {
    throw std::invalid_argument("masked_softmax: all actions masked");
  }
  MaskedDistribution out;
  out.probs = Eigen::VectorXd::Zero(logits.size());
  out.log_probs = Eigen::VectorXd::Constant(logits.size(), kNegInf);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    const double e = std::exp(logits[i] - max_logit);
    out.probs[i] = e;
    total += e;
  }
  const double log_total = std::log(total);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    out.probs[i] /= total;
    out.log_probs[i] = (logits[i] - max_logit) - log_total;
  }
  return out;
}

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits,
                               const std::vector<std::uint8_t>& mask) {
  return masked_softmax_with_log(logits, mask).probs;
}

void adam_step(PolicyParams& params, const Eigen::VectorXd& grad,
               AdamState& state, const AdamConfig& config) {
  if (grad.size() != params.flat.size()) {
    throw std::invalid_argument("adam_step: gradient size mismatch");
  }
  if (state.m.size() != grad.size()) {
    throw std::invalid_argument("adam_step: optimizer state size mismatch");
  }
  state.t += 1;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
  state.v.array() =
      config.beta2 * state.v.array() + (1.0 - config.beta2) * grad.array().square();
  const double m_corr = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double v_corr = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  const Eigen::Index n = params.flat.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lr =
        (i == n - 1) ? config.log_z_learning_rate : config.learning_rate;
    const double m_hat = state.m[i] / m_corr;
    const double v_hat = state.v[i] / v_corr;
    params.flat[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

}  // namespace catflow::policy
