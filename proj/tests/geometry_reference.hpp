#pragma once

// Reference oracles for the geometry tests, independent of the cell-list
// implementation path.

#include <algorithm>
#include <vector>

#include <Eigen/Core>

#include "catflow/geometry.hpp"

namespace georef {

// O(n^2 * 9) neighbor enumeration with the same undirected-edge convention
// as the production neighbor list.
inline std::vector<catflow::geom::Edge> brute_force_neighbors(
    const std::vector<Eigen::Vector3d>& positions, const Eigen::Vector3d& cell_u,
    const Eigen::Vector3d& cell_v, double cutoff) {
  std::vector<catflow::geom::Edge> edges;
  const int n = static_cast<int>(positions.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (int s1 = -1; s1 <= 1; ++s1) {
        for (int s2 = -1; s2 <= 1; ++s2) {
          if (i == j && !(s1 > 0 || (s1 == 0 && s2 > 0))) continue;
          // shift evaluated first, matching the production float association
          const Eigen::Vector3d shift = s1 * cell_u + s2 * cell_v;
          const Eigen::Vector3d q = positions[j] + shift;
          const double dist = (q - positions[i]).norm();
          if (dist <= cutoff) edges.push_back({i, j, dist, {s1, s2}});
        }
      }
    }
  }
  std::sort(edges.begin(), edges.end(),
            [](const catflow::geom::Edge& a, const catflow::geom::Edge& b) {
              if (a.i != b.i) return a.i < b.i;
              if (a.j != b.j) return a.j < b.j;
              if (a.shift[0] != b.shift[0]) return a.shift[0] < b.shift[0];
              return a.shift[1] < b.shift[1];
            });
  return edges;
}

// Sorted distinct z levels of the slab atoms (clustered at `tol`).
inline std::vector<double> layer_positions(const catflow::geom::Slab& slab,
                                           double tol = 1e-6) {
  std::vector<double> zs;
  zs.reserve(slab.atoms.size());
  for (const auto& atom : slab.atoms) zs.push_back(atom.position.z());
  std::sort(zs.begin(), zs.end());
  std::vector<double> levels;
  for (double z : zs) {
    if (levels.empty() || z - levels.back() > tol) levels.push_back(z);
  }
  return levels;
}

// Smallest gap between consecutive occupied layers.
inline double measured_layer_spacing(const catflow::geom::Slab& slab,
                                     double tol = 1e-6) {
  const auto levels = layer_positions(slab, tol);
  double spacing = 0.0;
  for (std::size_t i = 1; i < levels.size(); ++i) {
    const double gap = levels[i] - levels[i - 1];
    if (spacing == 0.0 || gap < spacing) spacing = gap;
  }
  return spacing;
}

// Multiset of pairwise minimum-image distances; equal multisets identify
// slabs that agree up to a rigid motion along the normal.
inline std::vector<double> pair_distance_multiset(const catflow::geom::Slab& slab) {
  std::vector<double> dists;
  const int n = static_cast<int>(slab.atoms.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double best = -1.0;
      for (int s1 = -1; s1 <= 1; ++s1) {
        for (int s2 = -1; s2 <= 1; ++s2) {
          const Eigen::Vector3d q =
              slab.atoms[j].position + s1 * slab.cell_u + s2 * slab.cell_v;
          const double d = (q - slab.atoms[i].position).norm();
          if (best < 0.0 || d < best) best = d;
        }
      }
      dists.push_back(best);
    }
  }
  std::sort(dists.begin(), dists.end());
  return dists;
}

}  // namespace georef
