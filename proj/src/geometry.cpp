#include "catflow/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace catflow::geom {

namespace {

bool is_zero_triple(const std::array<int, 3>& m) {
  return m[0] == 0 && m[1] == 0 && m[2] == 0;
}

// ax + by = gcd(|a|, |b|) >= 0
struct Egcd {
  long g, x, y;
};

Egcd ext_gcd(long a, long b) {
  if (b == 0) {
    if (a < 0) return {-a, -1, 0};
    return {a, a == 0 ? 0 : 1, 0};
  }
  const Egcd sub = ext_gcd(b, a % b);
  return {sub.g, sub.y, sub.x - (a / b) * sub.y};
}

long dot3(const Eigen::Vector3i& v, const std::array<int, 3>& m) {
  return static_cast<long>(v[0]) * m[0] + static_cast<long>(v[1]) * m[1] +
         static_cast<long>(v[2]) * m[2];
}

// Subtract integer multiples of `axis` from `v` while that shrinks |v|^2.
void reduce_against(Eigen::Vector3i& v, const Eigen::Vector3i& axis) {
  const long axis_sq = axis.squaredNorm();
  if (axis_sq == 0) return;
  while (true) {
    const long d = static_cast<long>(v.dot(axis));
    const long mu = std::llround(static_cast<double>(d) / static_cast<double>(axis_sq));
    if (mu == 0) break;
    const Eigen::Vector3i candidate = v - static_cast<int>(mu) * axis;
    if (candidate.squaredNorm() >= v.squaredNorm()) break;
    v = candidate;
  }
}

// Adjugate of a 3x3 integer matrix: S * adj(S) = det(S) * I.
Eigen::Matrix3i adjugate(const Eigen::Matrix3i& s) {
  Eigen::Matrix3i a;
  a(0, 0) = s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1);
  a(0, 1) = s(0, 2) * s(2, 1) - s(0, 1) * s(2, 2);
  a(0, 2) = s(0, 1) * s(1, 2) - s(0, 2) * s(1, 1);
  a(1, 0) = s(1, 2) * s(2, 0) - s(1, 0) * s(2, 2);
  a(1, 1) = s(0, 0) * s(2, 2) - s(0, 2) * s(2, 0);
  a(1, 2) = s(0, 2) * s(1, 0) - s(0, 0) * s(1, 2);
  a(2, 0) = s(1, 0) * s(2, 1) - s(1, 1) * s(2, 0);
  a(2, 1) = s(0, 1) * s(2, 0) - s(0, 0) * s(2, 1);
  a(2, 2) = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  return a;
}

long det3(const Eigen::Matrix3i& s) {
  return static_cast<long>(s(0, 0)) * (s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1)) -
         static_cast<long>(s(0, 1)) * (s(1, 0) * s(2, 2) - s(1, 2) * s(2, 0)) +
         static_cast<long>(s(0, 2)) * (s(1, 0) * s(2, 1) - s(1, 1) * s(2, 0));
}

std::array<long, 3> mod_vec(const std::array<long, 3>& v, long m) {
  std::array<long, 3> out;
  for (int i = 0; i < 3; ++i) out[i] = ((v[i] % m) + m) % m;
  return out;
}

std::uint64_t pack_cell(int x, int y, int z) {
  constexpr std::uint64_t kBias = 1u << 20;
  return ((static_cast<std::uint64_t>(x) + kBias) << 42) |
         ((static_cast<std::uint64_t>(y) + kBias) << 21) |
         (static_cast<std::uint64_t>(z) + kBias);
}

void format_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

double d_spacing(double a, const std::array<int, 3>& miller) {
  if (is_zero_triple(miller)) {
    throw std::invalid_argument("d_spacing: Miller indices must not all be zero");
  }
  if (!(a > 0.0)) throw std::invalid_argument("d_spacing: a must be positive");
  const double s = static_cast<double>(miller[0]) * miller[0] +
                   static_cast<double>(miller[1]) * miller[1] +
                   static_cast<double>(miller[2]) * miller[2];
  return a / std::sqrt(s);
}

PlaneBasis plane_basis(const std::array<int, 3>& miller) {
  if (is_zero_triple(miller)) {
    throw std::invalid_argument("plane_basis: Miller indices must not all be zero");
  }
  constexpr int kBound = 4;

  // Candidates in the plane, ordered by norm then descending lexicographic
  // order so the choice is deterministic and axis-aligned when possible.
  std::vector<Eigen::Vector3i> in_plane;
  for (int x = -kBound; x <= kBound; ++x) {
    for (int y = -kBound; y <= kBound; ++y) {
      for (int z = -kBound; z <= kBound; ++z) {
        const Eigen::Vector3i v(x, y, z);
        if (v.squaredNorm() == 0) continue;
        if (dot3(v, miller) == 0) in_plane.push_back(v);
      }
    }
  }
  std::sort(in_plane.begin(), in_plane.end(),
            [](const Eigen::Vector3i& a, const Eigen::Vector3i& b) {
              const long na = a.squaredNorm();
              const long nb = b.squaredNorm();
              if (na != nb) return na < nb;
              if (a[0] != b[0]) return a[0] > b[0];
              if (a[1] != b[1]) return a[1] > b[1];
              return a[2] > b[2];
            });
  if (in_plane.empty()) {
    throw std::logic_error("plane_basis: no in-plane lattice vector found");
  }

  PlaneBasis basis;
  basis.u1 = in_plane.front();
  bool found = false;
  for (const auto& v : in_plane) {
    if (basis.u1.cross(v).squaredNorm() != 0) {
      basis.u2 = v;
      found = true;
      break;
    }
  }
  if (!found) throw std::logic_error("plane_basis: plane candidates are collinear");
  reduce_against(basis.u2, basis.u1);

  // w solves h w1 + k w2 + l w3 = gcd via chained extended gcd.
  const Egcd hk = ext_gcd(miller[0], miller[1]);
  const Egcd full = ext_gcd(hk.g, miller[2]);
  basis.w = Eigen::Vector3i(static_cast<int>(full.x * hk.x),
                            static_cast<int>(full.x * hk.y),
                            static_cast<int>(full.y));
  reduce_against(basis.w, basis.u1);
  reduce_against(basis.w, basis.u2);
  reduce_against(basis.w, basis.u1);

  // Positive orientation; u1 x u2 is parallel to the Miller direction.
  if (dot3(basis.u1.cross(basis.u2), miller) < 0) basis.u2 = -basis.u2;
  return basis;
}

Slab cut_slab(const bulk::BulkStructure& bulk, const std::array<int, 3>& miller,
              double offset, bool face_top, int n_layers, double min_thickness) {
  if (is_zero_triple(miller)) {
    throw std::invalid_argument("cut_slab: Miller indices must not all be zero");
  }
  if (offset < 0.0 || offset >= 1.0) {
    throw std::invalid_argument("cut_slab: offset must be in [0, 1)");
  }
  if (n_layers < 1) throw std::invalid_argument("cut_slab: n_layers must be >= 1");
  const double a = bulk.lattice_a;
  if (!(a > 0.0)) throw std::invalid_argument("cut_slab: lattice parameter must be positive");

  const int g = std::gcd(std::gcd(std::abs(miller[0]), std::abs(miller[1])),
                         std::abs(miller[2]));
  const std::array<int, 3> reduced = {miller[0] / g, miller[1] / g, miller[2] / g};
  const PlaneBasis pb = plane_basis(reduced);
  const double d = d_spacing(a, reduced);
  const int layers =
      std::max(n_layers, static_cast<int>(std::ceil(min_thickness / d - 1e-12)));

  Eigen::Matrix3i s;
  s.col(0) = pb.u1;
  s.col(1) = pb.u2;
  s.col(2) = pb.w;
  const long det = det3(s);
  if (det <= 0) throw std::logic_error("cut_slab: non-positive cell determinant");
  const Eigen::Matrix3i adj = adjugate(s);
  const long denom = 2 * det;

  // Fractional supercell coordinates of all lattice + basis sites, exact over
  // denominator 2*det. The lattice residues form a subgroup of size det.
  std::set<std::array<long, 3>> lattice_residues;
  lattice_residues.insert({0, 0, 0});
  std::vector<std::array<long, 3>> frontier = {{0, 0, 0}};
  std::array<std::array<long, 3>, 3> generators;
  for (int c = 0; c < 3; ++c) {
    generators[c] = mod_vec({2L * adj(0, c), 2L * adj(1, c), 2L * adj(2, c)}, denom);
  }
  while (!frontier.empty()) {
    const auto point = frontier.back();
    frontier.pop_back();
    for (const auto& gen : generators) {
      const std::array<long, 3> next = mod_vec(
          {point[0] + gen[0], point[1] + gen[1], point[2] + gen[2]}, denom);
      if (lattice_residues.insert(next).second) frontier.push_back(next);
    }
  }
  if (static_cast<long>(lattice_residues.size()) != det) {
    throw std::logic_error("cut_slab: residue enumeration size mismatch");
  }

  std::vector<std::array<long, 3>> site_fracs;  // numerators over denom
  for (const auto& b : bulk.basis) {
    std::array<long, 3> twice_b;
    for (int i = 0; i < 3; ++i) {
      const double scaled = 2.0 * b[i];
      twice_b[i] = std::llround(scaled);
      if (std::abs(scaled - static_cast<double>(twice_b[i])) > 1e-9) {
        throw std::invalid_argument(
            "cut_slab: basis positions must be multiples of 1/2");
      }
    }
    std::array<long, 3> base{};
    for (int r = 0; r < 3; ++r) {
      base[r] = adj(r, 0) * twice_b[0] + adj(r, 1) * twice_b[1] + adj(r, 2) * twice_b[2];
    }
    const auto base_mod = mod_vec(base, denom);
    for (const auto& res : lattice_residues) {
      site_fracs.push_back(mod_vec(
          {res[0] + base_mod[0], res[1] + base_mod[1], res[2] + base_mod[2]}, denom));
    }
  }

  // Slab frame: e1 along the first in-plane vector, e3 along the normal.
  const Eigen::Vector3d u1d = a * pb.u1.cast<double>();
  const Eigen::Vector3d u2d = a * pb.u2.cast<double>();
  const Eigen::Vector3d wd = a * pb.w.cast<double>();
  const Eigen::Vector3d normal =
      Eigen::Vector3d(reduced[0], reduced[1], reduced[2]).normalized();
  const Eigen::Vector3d e1 = u1d.normalized();
  const Eigen::Vector3d e2 = normal.cross(e1);

  const Eigen::Vector3d cell_u(u1d.norm(), 0.0, 0.0);
  const Eigen::Vector3d cell_v(u2d.dot(e1), u2d.dot(e2), 0.0);
  const Eigen::Vector3d w_rot(wd.dot(e1), wd.dot(e2), d);

  Slab slab;
  slab.cell_u = cell_u;
  slab.cell_v = cell_v;
  slab.normal = Eigen::Vector3d::UnitZ();
  slab.thickness = layers * d;
  slab.provenance = {miller, offset, face_top, layers};

  slab.atoms.reserve(site_fracs.size() * layers);
  for (const auto& frac : site_fracs) {
    const double f1 = static_cast<double>(frac[0]) / static_cast<double>(denom);
    const double f2 = static_cast<double>(frac[1]) / static_cast<double>(denom);
    const double f3 = static_cast<double>(frac[2]) / static_cast<double>(denom);
    // Stack index range keeping f3 + t inside the cut window; exactly
    // `layers` values per site column. Top keeps [offset, offset + L),
    // bottom keeps (offset - L, offset] and mirrors through the cut plane.
    int t_first;
    if (face_top) {
      t_first = offset > f3 ? 1 : 0;  // ceil(offset - f3)
    } else {
      const int t_last = offset >= f3 ? 0 : -1;  // floor(offset - f3)
      t_first = t_last - (layers - 1);
    }
    for (int step = 0; step < layers; ++step) {
      const int t = t_first + step;
      const double stack = f3 + t;
      const double z = face_top ? (stack - offset) * d : (offset - stack) * d;
      const Eigen::Vector3d raw = f1 * cell_u + f2 * cell_v + stack * w_rot;
      // Wrap in-plane; cell_u is x-aligned and cell_v has nonzero y.
      double c2 = raw.y() / cell_v.y();
      double c1 = (raw.x() - c2 * cell_v.x()) / cell_u.x();
      c1 -= std::floor(c1);
      c2 -= std::floor(c2);
      if (c1 >= 1.0) c1 -= 1.0;
      if (c2 >= 1.0) c2 -= 1.0;
      const Eigen::Vector3d wrapped = c1 * cell_u + c2 * cell_v;
      slab.atoms.push_back({bulk.element, {wrapped.x(), wrapped.y(), z}});
    }
  }

  std::sort(slab.atoms.begin(), slab.atoms.end(),
            [](const SlabAtom& lhs, const SlabAtom& rhs) {
              if (lhs.position.z() != rhs.position.z())
                return lhs.position.z() < rhs.position.z();
              if (lhs.position.x() != rhs.position.x())
                return lhs.position.x() < rhs.position.x();
              return lhs.position.y() < rhs.position.y();
            });
  return slab;
}

Slab cut_slab(const bulk::RelaxedStructure& relaxed,
              const std::array<int, 3>& miller, double offset, bool face_top,
              int n_layers, double min_thickness) {
  bulk::BulkStructure bulk = relaxed.bulk;
  bulk.lattice_a = relaxed.lattice_a_star;
  return cut_slab(bulk, miller, offset, face_top, n_layers, min_thickness);
}

std::vector<Edge> neighbor_list(const std::vector<Eigen::Vector3d>& positions,
                                const Eigen::Vector3d& cell_u,
                                const Eigen::Vector3d& cell_v, double cutoff) {
  if (!(cutoff > 0.0)) throw std::invalid_argument("neighbor_list: cutoff must be positive");
  std::vector<Edge> edges;
  if (positions.empty()) return edges;

  struct Ghost {
    Eigen::Vector3d q;
    int j;
    int s1, s2;
  };
  std::vector<Ghost> ghosts;
  ghosts.reserve(positions.size() * 9);
  Eigen::Vector3d lo = positions.front();
  for (int s1 = -1; s1 <= 1; ++s1) {
    for (int s2 = -1; s2 <= 1; ++s2) {
      const Eigen::Vector3d shift = s1 * cell_u + s2 * cell_v;
      for (int j = 0; j < static_cast<int>(positions.size()); ++j) {
        ghosts.push_back({positions[j] + shift, j, s1, s2});
        lo = lo.cwiseMin(ghosts.back().q);
      }
    }
  }

  std::unordered_map<std::uint64_t, std::vector<int>> grid;
  grid.reserve(ghosts.size());
  const auto cell_of = [&](const Eigen::Vector3d& q) {
    return std::array<int, 3>{static_cast<int>(std::floor((q.x() - lo.x()) / cutoff)),
                              static_cast<int>(std::floor((q.y() - lo.y()) / cutoff)),
                              static_cast<int>(std::floor((q.z() - lo.z()) / cutoff))};
  };
  for (int gi = 0; gi < static_cast<int>(ghosts.size()); ++gi) {
    const auto c = cell_of(ghosts[gi].q);
    grid[pack_cell(c[0], c[1], c[2])].push_back(gi);
  }

  for (int i = 0; i < static_cast<int>(positions.size()); ++i) {
    const auto c = cell_of(positions[i]);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find(pack_cell(c[0] + dx, c[1] + dy, c[2] + dz));
          if (it == grid.end()) continue;
          for (int gi : it->second) {
            const Ghost& ghost = ghosts[gi];
            if (ghost.j < i) continue;  // found from the other endpoint
            if (ghost.j == i &&
                !(ghost.s1 > 0 || (ghost.s1 == 0 && ghost.s2 > 0))) {
              continue;  // self image, canonical half only
            }
            const double dist = (ghost.q - positions[i]).norm();
            if (dist <= cutoff) {
              edges.push_back({i, ghost.j, dist, {ghost.s1, ghost.s2}});
            }
          }
        }
      }
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.i != b.i) return a.i < b.i;
    if (a.j != b.j) return a.j < b.j;
    if (a.shift[0] != b.shift[0]) return a.shift[0] < b.shift[0];
    return a.shift[1] < b.shift[1];
  });
  return edges;
}

AtomGraph to_graph(const Slab& slab, const AdsorbateSpec& adsorbate,
                   double cutoff) {
  if (!(cutoff > 0.0)) throw std::invalid_argument("to_graph: cutoff must be positive");
  AtomGraph graph;
  std::vector<Eigen::Vector3d> surface_positions;
  surface_positions.reserve(slab.atoms.size());
  for (const auto& atom : slab.atoms) {
    graph.nodes.push_back({atom.element, atom.position, NodeTag::Surface});
    surface_positions.push_back(atom.position);
  }
  graph.edges = neighbor_list(surface_positions, slab.cell_u, slab.cell_v, cutoff);

  if (!adsorbate.empty()) {
    if (slab.atoms.empty()) {
      throw std::invalid_argument("to_graph: cannot place adsorbate on an empty slab");
    }
    const auto top = std::max_element(
        slab.atoms.begin(), slab.atoms.end(),
        [](const SlabAtom& a, const SlabAtom& b) {
          return a.position.z() < b.position.z();
        });
    Eigen::Vector3d pos = top->position;
    pos.z() += adsorbate.height;
    graph.nodes.push_back({adsorbate.species, pos, NodeTag::Adsorbate});
    // A one-atom adsorbate has no internal edges, and cross edges are never
    // generated: the adsorbate is a disconnected component by construction.
  }
  return graph;
}

namespace {

void append_atom_line(std::string& out, const std::string& element,
                      const Eigen::Vector3d& p, const int* tag) {
  out += element;
  out += ' ';
  format_double(out, p.x());
  out += ' ';
  format_double(out, p.y());
  out += ' ';
  format_double(out, p.z());
  if (tag != nullptr) {
    out += ' ';
    out += std::to_string(*tag);
  }
  out += '\n';
}

std::string comment_line(const Slab& slab, bool with_tags) {
  std::string out = "Lattice=\"";
  const Eigen::Vector3d third(0.0, 0.0, slab.thickness);
  const std::array<Eigen::Vector3d, 3> cell = {slab.cell_u, slab.cell_v, third};
  bool first = true;
  for (const auto& v : cell) {
    for (int i = 0; i < 3; ++i) {
      if (!first) out += ' ';
      format_double(out, v[i]);
      first = false;
    }
  }
  out += "\" Properties=species:S:1:pos:R:3";
  if (with_tags) out += ":tags:I:1";
  out += " Miller=\"" + std::to_string(slab.provenance.miller[0]) + " " +
         std::to_string(slab.provenance.miller[1]) + " " +
         std::to_string(slab.provenance.miller[2]) + "\"";
  out += " Offset=";
  format_double(out, slab.provenance.offset);
  out += std::string(" Face=") + (slab.provenance.face_top ? "top" : "bottom");
  out += " Layers=" + std::to_string(slab.provenance.n_layers);
  return out;
}

}  // namespace

std::string to_extended_xyz(const Slab& slab) {
  std::string out = std::to_string(slab.atoms.size());
  out += '\n';
  out += comment_line(slab, false);
  out += '\n';
  for (const auto& atom : slab.atoms) {
    append_atom_line(out, atom.element, atom.position, nullptr);
  }
  return out;
}

std::string graph_to_extended_xyz(const AtomGraph& graph, const Slab& slab) {
  std::string out = std::to_string(graph.nodes.size());
  out += '\n';
  out += comment_line(slab, true);
  out += '\n';
  for (const auto& node : graph.nodes) {
    const int tag = node.tag == NodeTag::Adsorbate ? 1 : 0;
    append_atom_line(out, node.element, node.position, &tag);
  }
  return out;
}

Slab parse_extended_xyz(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("xyz: missing count line");
  const int count = std::stoi(line);
  if (!std::getline(in, line)) throw std::invalid_argument("xyz: missing comment line");

  Slab slab;
  const auto quoted_value = [&line](const std::string& key) {
    const auto pos = line.find(key + "=\"");
    if (pos == std::string::npos) {
      throw std::invalid_argument("xyz: missing " + key + " field");
    }
    const auto start = pos + key.size() + 2;
    const auto end = line.find('"', start);
    return line.substr(start, end - start);
  };
  const auto plain_value = [&line](const std::string& key) {
    const auto pos = line.find(key + "=");
    if (pos == std::string::npos) {
      throw std::invalid_argument("xyz: missing " + key + " field");
    }
    const auto start = pos + key.size() + 1;
    const auto end = line.find(' ', start);
    return line.substr(start, end == std::string::npos ? end : end - start);
  };

  {
    std::istringstream cells(quoted_value("Lattice"));
    std::array<double, 9> v{};
    for (auto& x : v) cells >> x;
    slab.cell_u = {v[0], v[1], v[2]};
    slab.cell_v = {v[3], v[4], v[5]};
    slab.thickness = Eigen::Vector3d(v[6], v[7], v[8]).norm();
    slab.normal = Eigen::Vector3d::UnitZ();
  }
  {
    std::istringstream miller(quoted_value("Miller"));
    miller >> slab.provenance.miller[0] >> slab.provenance.miller[1] >>
        slab.provenance.miller[2];
  }
  slab.provenance.offset = std::stod(plain_value("Offset"));
  slab.provenance.face_top = plain_value("Face") == "top";
  slab.provenance.n_layers = std::stoi(plain_value("Layers"));

  for (int i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw std::invalid_argument("xyz: truncated atom list");
    }
    std::istringstream row(line);
    SlabAtom atom;
    row >> atom.element >> atom.position.x() >> atom.position.y() >>
        atom.position.z();
    if (row.fail()) throw std::invalid_argument("xyz: malformed atom line " + line);
    slab.atoms.push_back(std::move(atom));
  }
  return slab;
}

}  // namespace catflow::geom
