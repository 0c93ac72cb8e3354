#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "catflow/bulk.hpp"

namespace catflow::geom {

// Interplanar spacing of the (hkl) family in a cubic lattice of parameter a:
// a / sqrt(h^2 + k^2 + l^2).
double d_spacing(double a, const std::array<int, 3>& miller);

// Integer basis adapted to a Miller plane: u1, u2 span the plane
// (u . m = 0), w advances the plane stack (w . m = gcd(|h|,|k|,|l|)), and
// det(u1, u2, w) > 0. u1, u2 come from a bounded minimal-norm search
// followed by Gauss reduction.
struct PlaneBasis {
  Eigen::Vector3i u1;
  Eigen::Vector3i u2;
  Eigen::Vector3i w;
};

PlaneBasis plane_basis(const std::array<int, 3>& miller);

struct SlabAtom {
  std::string element;
  Eigen::Vector3d position;  // Cartesian Angstrom, slab frame (normal = +z)
};

// Finite-thickness surface cell, periodic along cell_u and cell_v. Atoms are
// wrapped in-plane and sorted by (z, x, y); z spans [0, thickness).
struct Slab {
  Eigen::Vector3d cell_u = Eigen::Vector3d::Zero();
  Eigen::Vector3d cell_v = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  std::vector<SlabAtom> atoms;
  double thickness = 0.0;

  struct Provenance {
    std::array<int, 3> miller{};
    double offset = 0.0;
    bool face_top = true;
    int n_layers = 0;  // effective layer count after the thickness floor
  } provenance;
};

// Cuts an oriented slab out of the periodic bulk crystal.
//
// The Miller triple is reduced by its gcd for construction (a non-coprime
// triple denotes the same plane orientation with a finer indexing); the
// original triple is kept in the provenance. The cut plane sits at
// offset * d_spacing along the normal; face_top = false mirrors the crystal
// through the cut plane before extraction, exposing the opposite
// termination. Thickness is n_layers * d_spacing or min_thickness, whichever
// is larger.
Slab cut_slab(const bulk::BulkStructure& bulk, const std::array<int, 3>& miller,
              double offset, bool face_top, int n_layers = 4,
              double min_thickness = 8.0);

Slab cut_slab(const bulk::RelaxedStructure& relaxed,
              const std::array<int, 3>& miller, double offset, bool face_top,
              int n_layers = 4, double min_thickness = 8.0);

struct Edge {
  int i = 0;
  int j = 0;
  double distance = 0.0;
  std::array<int, 2> shift{};  // in-plane periodic image of j

  bool operator==(const Edge&) const = default;
};

// All pairs within `cutoff`, including images shifted by one in-plane cell in
// each direction. Each undirected pair appears once per distinct image shift;
// (i, j, s) and (j, i, -s) are the same edge. Cell-list implementation.
std::vector<Edge> neighbor_list(const std::vector<Eigen::Vector3d>& positions,
                                const Eigen::Vector3d& cell_u,
                                const Eigen::Vector3d& cell_v, double cutoff);

enum class NodeTag { Surface, Adsorbate };

struct AtomGraph {
  struct Node {
    std::string element;
    Eigen::Vector3d position;
    NodeTag tag = NodeTag::Surface;
  };
  std::vector<Node> nodes;
  std::vector<Edge> edges;
};

// Adsorbate placement convention: one atom of `species` placed `height`
// above the topmost surface atom along the normal.
struct AdsorbateSpec {
  std::string species = "H";
  double height = 2.0;

  static AdsorbateSpec none() { return {"", 0.0}; }
  bool empty() const { return species.empty(); }
};

// Surface nodes connected by neighbor_list; adsorbate nodes form their own
// component with no cross edges regardless of proximity.
AtomGraph to_graph(const Slab& slab, const AdsorbateSpec& adsorbate,
                   double cutoff = 6.0);

// Extended XYZ text: count line, comment line with the cell vectors and cut
// provenance, then one "element x y z" row per atom.
std::string to_extended_xyz(const Slab& slab);

// Same format with a tags column separating surface (0) from adsorbate (1)
// nodes; used for external proxy requests.
std::string graph_to_extended_xyz(const AtomGraph& graph, const Slab& slab);

Slab parse_extended_xyz(const std::string& text);

}  // namespace catflow::geom
