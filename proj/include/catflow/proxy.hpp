#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "catflow/geometry.hpp"

namespace catflow::proxy {

// Per-element hydrogen adsorption free energies (eV) backing the tabular
// proxy. Keyed on the surface element only; the graph input keeps the
// interface identical to geometry-aware predictors.
class ProxyTable {
 public:
  ProxyTable() = default;
  explicit ProxyTable(std::map<std::string, double> adsorption_energies);

  static ProxyTable from_json_text(const std::string& text);
  static ProxyTable load(const std::string& path);

  double adsorption_energy(const std::string& element) const;
  bool has(const std::string& element) const;
  const std::map<std::string, double>& entries() const { return entries_; }

 private:
  std::map<std::string, double> entries_;
};

// Looks up the surface element's tabulated value. Requires at least one
// surface node; all surface nodes must share one element.
double predict_adsorption_energy(const ProxyTable& table,
                                 const geom::AtomGraph& graph);

struct RewardConfig {
  double b = 100.0;       // reward sharpness
  double e_corr = -0.24;  // Gibbs correction, eV
};

// eta = E_H + E_corr
double overpotential(double e_h, const RewardConfig& config = {});

// R = exp(-b eta^2), in (0, 1], symmetric in the sign of eta.
double reward(double eta, const RewardConfig& config = {});

struct CalibrationFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rss = 0.0;  // residual sum of squares
  int n = 0;
};

struct CalibrationPoint {
  double log10_j0 = 0.0;  // log10 exchange current density
  double eta = 0.0;       // experimental overpotential, eV
};

// Ordinary least squares of eta against log10(j0). Requires two or more
// points with distinct abscissae.
CalibrationFit fit_calibration(const std::vector<CalibrationPoint>& points);

double predict_overpotential(const CalibrationFit& fit, double log10_j0);

struct CalibrationRow {
  std::string element;
  double log10_j0 = 0.0;
  std::optional<double> eta_exp;  // empty for rows the fit should infer
};

// CSV columns: element, log10_j0, eta_exp (eta_exp may be empty).
std::vector<CalibrationRow> load_calibration_csv(const std::string& path);
std::vector<CalibrationRow> parse_calibration_csv(const std::string& text);

}  // namespace catflow::proxy
