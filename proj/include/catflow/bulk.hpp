#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace catflow::bulk {

// Conventional cubic cell with symmetry-fixed fractional basis positions.
struct BulkStructure {
  std::string element;
  int space_group = 0;
  double lattice_a = 0.0;  // Angstrom
  std::vector<Eigen::Vector3d> basis;
  int n_atoms = 0;
};

// Fractional positions forced by the space group: the face-centered set for
// (225, 4), the body-centered set for (229, 2).
std::vector<Eigen::Vector3d> basis_positions(int space_group, int n_atoms);

BulkStructure make_bulk(const std::string& element, int space_group,
                        double lattice_a);

struct EnergyTableEntry {
  double a0 = 0.0;    // equilibrium lattice parameter, Angstrom
  double e_coh = 0.0; // energy per atom at a0, eV
};

// Per-(element, space group) Morse-shaped lattice energy model:
//   E(a) = n_atoms * (e_coh + d * (1 - exp(-alpha (a - a0)))^2)
class EnergyTable {
 public:
  EnergyTable() = default;
  EnergyTable(std::map<std::pair<std::string, int>, EnergyTableEntry> entries,
              double d, double alpha);

  // File layout: one key per element mapping space group -> {a0, e_coh},
  // plus top-level "d" and "alpha" shape parameters.
  static EnergyTable from_json_text(const std::string& text);
  static EnergyTable load(const std::string& path);

  const EnergyTableEntry& at(const std::string& element, int space_group) const;
  bool has(const std::string& element, int space_group) const;
  std::vector<std::string> elements() const;

  double d() const { return d_; }
  double alpha() const { return alpha_; }

 private:
  std::map<std::pair<std::string, int>, EnergyTableEntry> entries_;
  double d_ = 1.0;
  double alpha_ = 2.0;
};

// Total energy of one conventional cell at lattice parameter `a`.
double lattice_energy(double a, const std::string& element, int space_group,
                      const EnergyTable& table);

struct RelaxedStructure {
  BulkStructure bulk;            // starting structure, lattice_a as sampled
  double lattice_a_star = 0.0;   // relaxed lattice parameter
  double total_energy = 0.0;     // eV per conventional cell
  double formation_energy = 0.0; // eV per atom
};

// Golden-section argmin of a unimodal function on [lo, hi], to `tol` on the
// argument.
double golden_section_minimize(const std::function<double(double)>& f,
                               double lo, double hi, double tol = 1e-6);

inline constexpr double kRelaxLowerBound = 1.5;  // Angstrom
inline constexpr double kRelaxUpperBound = 7.0;

// Basin-limited relaxation of the lattice scalar: argmin of lattice_energy
// over [a - window, a + window] clipped to the global bounds. Starts that are
// too far from equilibrium stop at the window edge.
RelaxedStructure relax(const BulkStructure& bulk, const EnergyTable& table,
                       double window = 1.0);

// Re-relaxing an already relaxed structure anchors the window at the original
// sampled lattice parameter, so the result is reproduced exactly.
RelaxedStructure relax(const RelaxedStructure& relaxed, const EnergyTable& table,
                       double window = 1.0);

enum class FilterStatus { Kept, DroppedEnergy, DroppedSpaceGroup };

const char* filter_status_name(FilterStatus status);

struct FilterKey {
  std::string element;
  int space_group = 0;
  double formation_energy = 0.0;
};

// Stability screen, applied per composition:
//   1. drop entries with formation energy above the composition minimum plus
//      `energy_window` (eV/atom);
//   2. of the survivors, keep only the space group that attains the
//      composition minimum.
std::vector<FilterStatus> classify_samples(const std::vector<FilterKey>& samples,
                                           double energy_window = 0.05);

std::vector<RelaxedStructure> filter_samples(
    const std::vector<RelaxedStructure>& samples, double energy_window = 0.05);

}  // namespace catflow::bulk
