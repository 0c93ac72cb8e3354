#include "catflow/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace catflow::policy {

namespace {

constexpr std::int64_t kDfsLimit = 200000;

void dfs_terminals(const env::SurfaceEnv& env, const env::CrystalSurfaceState& state,
                   const SpecReward& reward, std::vector<double>& mass_per_element,
                   double& total) {
  if (env.is_terminal(state)) {
    const auto spec = env.decode_terminal(state);
    const double r = reward(spec);
    mass_per_element[spec.element_idx] += r;
    total += r;
    return;
  }
  const auto mask = env.valid_actions(state);
  for (int a = 0; a < static_cast<int>(mask.size()); ++a) {
    if (!mask[a]) continue;
    dfs_terminals(env, env.apply(state, a), reward, mass_per_element, total);
  }
}

// Deterministic probe specs for one element; rewards must agree on all of
// them for the factorized route to apply.
std::vector<env::CrystalSurfaceSpec> probe_specs(const env::SurfaceEnv& env,
                                                 int element_idx) {
  const auto& cfg = env.config();
  std::vector<env::CrystalSurfaceSpec> probes;
  const double width = (cfg.lattice_max - cfg.lattice_min) / cfg.lattice_bins;
  const std::array<std::array<int, 3>, 3> millers = {
      {{1, 1, 1}, {2, -1, 0}, {0, 0, 1}}};
  for (int sg : cfg.space_groups) {
    for (int bin : {0, cfg.lattice_bins - 1}) {
      for (const auto& miller : millers) {
        for (bool top : {true, false}) {
          env::CrystalSurfaceSpec spec;
          spec.element_idx = element_idx;
          spec.element = std::string(env::kElements[element_idx]);
          spec.space_group = sg;
          spec.n_atoms = env::atoms_per_cell(sg);
          spec.lattice_a = cfg.lattice_min + (bin + 0.5) * width;
          spec.miller = miller;
          spec.offset = 0.5 / cfg.offset_bins;
          spec.face_top = top;
          probes.push_back(std::move(spec));
        }
      }
    }
  }
  return probes;
}

}  // namespace

ElementMarginals enumerate_marginals_dfs(const env::SurfaceEnv& env,
                                         const SpecReward& reward) {
  if (env.count_terminal_states() > kDfsLimit) {
    throw std::invalid_argument(
        "enumerate_marginals_dfs: " + std::to_string(env.count_terminal_states()) +
        " terminal states exceed the exhaustive limit; reduce the bin counts");
  }
  ElementMarginals out;
  out.probability.assign(env::kElements.size(), 0.0);
  double total = 0.0;
  dfs_terminals(env, env.initial_state(), reward, out.probability, total);
  if (!(total > 0.0)) {
    throw std::invalid_argument("enumerate_marginals_dfs: total reward mass is zero");
  }
  for (auto& p : out.probability) p /= total;
  out.log_z = std::log(total);
  return out;
}

ElementMarginals enumerate_marginals(const env::SurfaceEnv& env,
                                     const SpecReward& reward) {
  const auto& cfg = env.config();

  // Probe whether the reward factorizes through the element.
  bool element_only = true;
  std::vector<double> per_element(env::kElements.size(), 0.0);
  std::vector<std::uint8_t> enabled(env::kElements.size(), 0);
  for (const auto& symbol : cfg.elements) {
    const int idx = env::element_index(symbol);
    enabled[idx] = 1;
    const auto probes = probe_specs(env, idx);
    const double first = reward(probes.front());
    per_element[idx] = first;
    for (const auto& spec : probes) {
      const double r = reward(spec);
      const double scale = std::max({1.0, std::abs(first), std::abs(r)});
      if (std::abs(r - first) > 1e-12 * scale) {
        element_only = false;
        break;
      }
    }
    if (!element_only) break;
  }

  if (!element_only) return enumerate_marginals_dfs(env, reward);

  double total = 0.0;
  for (std::size_t i = 0; i < per_element.size(); ++i) {
    if (!enabled[i]) per_element[i] = 0.0;
    if (!(per_element[i] >= 0.0)) {
      throw std::invalid_argument("enumerate_marginals: negative reward for " +
                                  std::string(env::kElements[i]));
    }
    total += per_element[i];
  }
  if (!(total > 0.0)) {
    throw std::invalid_argument("enumerate_marginals: total reward mass is zero");
  }

  ElementMarginals out;
  out.probability.resize(per_element.size());
  for (std::size_t i = 0; i < per_element.size(); ++i) {
    out.probability[i] = per_element[i] / total;
  }
  const auto states_per_element =
      env.count_terminal_states() / static_cast<std::int64_t>(cfg.elements.size());
  out.log_z = std::log(static_cast<double>(states_per_element)) + std::log(total);
  return out;
}

}  // namespace catflow::policy
