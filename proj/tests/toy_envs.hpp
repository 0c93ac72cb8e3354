#pragma once

// Minimal environments for exercising the trainer independently of the
// crystal construction. Terminal specs are flat action-index tuples.

#include <cstdint>
#include <vector>

namespace toy {

// Fixed number of stages with given arities; every action is always legal.
// The terminal spec is the chosen index sequence.
class ChainEnv {
 public:
  struct State {
    std::vector<int> choices;
  };
  using TerminalSpec = std::vector<int>;

  explicit ChainEnv(std::vector<int> arities) : arities_(std::move(arities)) {
    feature_dim_ = static_cast<int>(arities_.size()) + 1;  // stage one-hot
    for (int a : arities_) feature_dim_ += a;
  }

  State initial_state() const { return {}; }

  bool is_terminal(const State& s) const {
    return s.choices.size() == arities_.size();
  }

  int feature_dim() const { return feature_dim_; }

  const std::vector<int>& stage_arities() const { return arities_; }

  int stage_of(const State& s) const { return static_cast<int>(s.choices.size()); }

  std::vector<std::uint8_t> valid_actions(const State& s) const {
    return std::vector<std::uint8_t>(arities_[stage_of(s)], 1);
  }

  State apply(const State& s, int action) const {
    State next = s;
    next.choices.push_back(action);
    return next;
  }

  void encode_active(const State& s, std::vector<int>& out) const {
    out.clear();
    out.push_back(static_cast<int>(s.choices.size()));  // stage block
    int offset = static_cast<int>(arities_.size()) + 1;
    for (std::size_t i = 0; i < s.choices.size(); ++i) {
      out.push_back(offset + s.choices[i]);
      offset += arities_[i];
    }
  }

  TerminalSpec decode_terminal(const State& s) const { return s.choices; }

  std::int64_t count_terminal_states() const {
    std::int64_t n = 1;
    for (int a : arities_) n *= a;
    return n;
  }

 private:
  std::vector<int> arities_;
  int feature_dim_ = 0;
};

}  // namespace toy
