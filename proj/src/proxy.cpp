#include "catflow/proxy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "json.hpp"

namespace catflow::proxy {

ProxyTable::ProxyTable(std::map<std::string, double> adsorption_energies)
    : entries_(std::move(adsorption_energies)) {}

ProxyTable ProxyTable::from_json_text(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  std::map<std::string, double> entries;
  for (const auto& [element, value] : j.items()) {
    entries[element] = value.get<double>();
  }
  return ProxyTable(std::move(entries));
}

ProxyTable ProxyTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ProxyTable: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

double ProxyTable::adsorption_energy(const std::string& element) const {
  const auto it = entries_.find(element);
  if (it == entries_.end()) {
    throw std::out_of_range("ProxyTable: no entry for element " + element);
  }
  return it->second;
}

bool ProxyTable::has(const std::string& element) const {
  return entries_.count(element) > 0;
}

double predict_adsorption_energy(const ProxyTable& table,
                                 const geom::AtomGraph& graph) {
  const std::string* element = nullptr;
  for (const auto& node : graph.nodes) {
    if (node.tag != geom::NodeTag::Surface) continue;
    if (element == nullptr) {
      element = &node.element;
    } else if (*element != node.element) {
      throw std::invalid_argument(
          "predict_adsorption_energy: mixed-element surface (" + *element +
          ", " + node.element + ") not supported by the tabular proxy");
    }
  }
  if (element == nullptr) {
    throw std::invalid_argument("predict_adsorption_energy: graph has no surface nodes");
  }
  return table.adsorption_energy(*element);
}

double overpotential(double e_h, const RewardConfig& config) {
  return e_h + config.e_corr;
}

double reward(double eta, const RewardConfig& config) {
  if (!(config.b > 0.0)) throw std::invalid_argument("reward: b must be positive");
  return std::exp(-config.b * eta * eta);
}

CalibrationFit fit_calibration(const std::vector<CalibrationPoint>& points) {
  if (points.size() < 2) {
    throw std::invalid_argument("fit_calibration: need at least two points");
  }
  bool distinct = false;
  for (const auto& p : points) {
    if (p.log10_j0 != points.front().log10_j0) {
      distinct = true;
      break;
    }
  }
  if (!distinct) {
    throw std::invalid_argument("fit_calibration: abscissae are degenerate");
  }
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = points[i].log10_j0;
    design(i, 1) = 1.0;
    target[i] = points[i].eta;
  }
  const Eigen::Vector2d beta = design.colPivHouseholderQr().solve(target);
  CalibrationFit fit;
  fit.slope = beta[0];
  fit.intercept = beta[1];
  fit.rss = (design * beta - target).squaredNorm();
  fit.n = static_cast<int>(points.size());
  return fit;
}

double predict_overpotential(const CalibrationFit& fit, double log10_j0) {
  if (fit.n < 2) throw std::invalid_argument("predict_overpotential: invalid fit");
  return fit.slope * log10_j0 + fit.intercept;
}

std::vector<CalibrationRow> parse_calibration_csv(const std::string& text) {
  std::vector<CalibrationRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {  // first row carries column names
      header = false;
      continue;
    }
    std::istringstream row(line);
    std::string element, j0_field, eta_field;
    if (!std::getline(row, element, ',') || !std::getline(row, j0_field, ',')) {
      throw std::invalid_argument("calibration csv line " + std::to_string(line_no) +
                                  ": expected element,log10_j0,eta_exp");
    }
    std::getline(row, eta_field, ',');
    CalibrationRow out;
    out.element = element;
    out.log10_j0 = std::stod(j0_field);
    if (!eta_field.empty()) out.eta_exp = std::stod(eta_field);
    rows.push_back(out);
  }
  return rows;
}

std::vector<CalibrationRow> load_calibration_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("calibration csv: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_calibration_csv(ss.str());
}

}  // namespace catflow::proxy
