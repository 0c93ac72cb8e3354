#pragma once

#include <functional>
#include <vector>

#include "catflow/surface_env.hpp"

namespace catflow::policy {

struct ElementMarginals {
  // Probability per element index (kElements order); zero for elements
  // outside the configured search space.
  std::vector<double> probability;
  double log_z = 0.0;
};

using SpecReward = std::function<double(const env::CrystalSurfaceSpec&)>;

// Exact reward-proportional terminal marginals.
//
// When the reward is constant across everything but the element (verified on
// a deterministic probe set), the factorized state count gives
// P(e) = R(e) / sum R and Z = (states per element) * sum R. Otherwise falls
// back to exhaustive depth-first enumeration, which requires a reduced-bin
// environment.
ElementMarginals enumerate_marginals(const env::SurfaceEnv& env,
                                     const SpecReward& reward);

// Force the exhaustive route (cross-check oracle).
ElementMarginals enumerate_marginals_dfs(const env::SurfaceEnv& env,
                                         const SpecReward& reward);

}  // namespace catflow::policy
