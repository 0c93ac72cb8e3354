#include "catflow/bulk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace catflow::bulk {

std::vector<Eigen::Vector3d> basis_positions(int space_group, int n_atoms) {
  if (space_group == 225 && n_atoms == 4) {
    return {{0.0, 0.0, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}};
  }
  if (space_group == 229 && n_atoms == 2) {
    return {{0.0, 0.0, 0.0}, {0.5, 0.5, 0.5}};
  }
  throw std::invalid_argument("basis_positions: unsupported (space group, atoms) = (" +
                              std::to_string(space_group) + ", " +
                              std::to_string(n_atoms) + ")");
}

BulkStructure make_bulk(const std::string& element, int space_group,
                        double lattice_a) {
  if (!(lattice_a > 0.0)) {
    throw std::invalid_argument("make_bulk: lattice parameter must be positive");
  }
  BulkStructure bulk;
  bulk.element = element;
  bulk.space_group = space_group;
  bulk.lattice_a = lattice_a;
  bulk.n_atoms = space_group == 225 ? 4 : space_group == 229 ? 2 : 0;
  bulk.basis = basis_positions(space_group, bulk.n_atoms);
  return bulk;
}

EnergyTable::EnergyTable(
    std::map<std::pair<std::string, int>, EnergyTableEntry> entries, double d,
    double alpha)
    : entries_(std::move(entries)), d_(d), alpha_(alpha) {
  if (!(d_ > 0.0) || !(alpha_ > 0.0)) {
    throw std::invalid_argument("EnergyTable: d and alpha must be positive");
  }
}

EnergyTable EnergyTable::from_json_text(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  std::map<std::pair<std::string, int>, EnergyTableEntry> entries;
  double d = 1.0;
  double alpha = 2.0;
  for (const auto& [key, value] : j.items()) {
    if (key == "d") {
      d = value.get<double>();
    } else if (key == "alpha") {
      alpha = value.get<double>();
    } else {
      for (const auto& [sg_key, entry] : value.items()) {
        EnergyTableEntry e;
        e.a0 = entry.at("a0").get<double>();
        e.e_coh = entry.at("e_coh").get<double>();
        entries[{key, std::stoi(sg_key)}] = e;
      }
    }
  }
  return EnergyTable(std::move(entries), d, alpha);
}

EnergyTable EnergyTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("EnergyTable: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

const EnergyTableEntry& EnergyTable::at(const std::string& element,
                                        int space_group) const {
  const auto it = entries_.find({element, space_group});
  if (it == entries_.end()) {
    throw std::out_of_range("EnergyTable: no entry for " + element + "/" +
                            std::to_string(space_group));
  }
  return it->second;
}

bool EnergyTable::has(const std::string& element, int space_group) const {
  return entries_.count({element, space_group}) > 0;
}

std::vector<std::string> EnergyTable::elements() const {
  std::vector<std::string> out;
  for (const auto& [key, entry] : entries_) {
    if (out.empty() || out.back() != key.first) out.push_back(key.first);
  }
  return out;
}

double lattice_energy(double a, const std::string& element, int space_group,
                      const EnergyTable& table) {
  if (!(a > 0.0)) throw std::invalid_argument("lattice_energy: a must be positive");
  const EnergyTableEntry& entry = table.at(element, space_group);
  const int n_atoms = space_group == 225 ? 4 : 2;
  const double m = 1.0 - std::exp(-table.alpha() * (a - entry.a0));
  return n_atoms * (entry.e_coh + table.d() * m * m);
}

double golden_section_minimize(const std::function<double(double)>& f,
                               double lo, double hi, double tol) {
  if (!(lo <= hi)) throw std::invalid_argument("golden_section_minimize: lo > hi");
  if (hi - lo <= tol) return 0.5 * (lo + hi);
  constexpr double inv_phi = 0.6180339887498949;  // (sqrt(5) - 1) / 2
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

RelaxedStructure relax(const BulkStructure& bulk, const EnergyTable& table,
                       double window) {
  if (!(window > 0.0)) throw std::invalid_argument("relax: window must be positive");
  const double lo = std::max(bulk.lattice_a - window, kRelaxLowerBound);
  const double hi = std::min(bulk.lattice_a + window, kRelaxUpperBound);
  const auto energy = [&](double a) {
    return lattice_energy(a, bulk.element, bulk.space_group, table);
  };
  RelaxedStructure relaxed;
  relaxed.bulk = bulk;
  relaxed.lattice_a_star = golden_section_minimize(energy, lo, hi, 1e-6);
  relaxed.total_energy = energy(relaxed.lattice_a_star);
  relaxed.formation_energy = relaxed.total_energy / bulk.n_atoms;
  return relaxed;
}

RelaxedStructure relax(const RelaxedStructure& relaxed, const EnergyTable& table,
                       double window) {
  return relax(relaxed.bulk, table, window);
}

const char* filter_status_name(FilterStatus status) {
  switch (status) {
    case FilterStatus::Kept:
      return "kept";
    case FilterStatus::DroppedEnergy:
      return "dropped-energy";
    case FilterStatus::DroppedSpaceGroup:
      return "dropped-spacegroup";
  }
  return "unknown";
}

std::vector<FilterStatus> classify_samples(const std::vector<FilterKey>& samples,
                                           double energy_window) {
  // Per-composition minimum and the space group attaining it. Ties go to the
  // lower space group number for determinism.
  std::map<std::string, std::pair<double, int>> minimum;
  for (const auto& s : samples) {
    auto it = minimum.find(s.element);
    if (it == minimum.end()) {
      minimum[s.element] = {s.formation_energy, s.space_group};
    } else if (s.formation_energy < it->second.first ||
               (s.formation_energy == it->second.first &&
                s.space_group < it->second.second)) {
      it->second = {s.formation_energy, s.space_group};
    }
  }
  std::vector<FilterStatus> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const auto& [e_min, best_sg] = minimum.at(s.element);
    if (s.formation_energy > e_min + energy_window) {
      out.push_back(FilterStatus::DroppedEnergy);
    } else if (s.space_group != best_sg) {
      out.push_back(FilterStatus::DroppedSpaceGroup);
    } else {
      out.push_back(FilterStatus::Kept);
    }
  }
  return out;
}

std::vector<RelaxedStructure> filter_samples(
    const std::vector<RelaxedStructure>& samples, double energy_window) {
  std::vector<FilterKey> keys;
  keys.reserve(samples.size());
  for (const auto& s : samples) {
    keys.push_back({s.bulk.element, s.bulk.space_group, s.formation_energy});
  }
  const auto statuses = classify_samples(keys, energy_window);
  std::vector<RelaxedStructure> kept;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (statuses[i] == FilterStatus::Kept) kept.push_back(samples[i]);
  }
  return kept;
}

}  // namespace catflow::bulk
