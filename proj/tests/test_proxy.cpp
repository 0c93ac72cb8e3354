#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <random>

#include "catflow/bulk.hpp"
#include "catflow/geometry.hpp"
#include "catflow/proxy.hpp"
#include "test_util.hpp"

using namespace catflow;

namespace {

// Reference proxy overpotentials (eV); the shipped table stores eta + 0.24.
const std::vector<std::pair<std::string, double>> kEtaAscending = {
    {"Rh", 0.03}, {"Pt", 0.04}, {"Pd", 0.12}, {"Ir", 0.14},
    {"Co", 0.16}, {"Mo", 0.21}, {"W", 0.30},  {"Ni", 0.32},
    {"Nb", 0.35}, {"Cu", 0.39}, {"Au", 0.51}, {"Ag", 0.62}};

proxy::ProxyTable shipped_table() {
  return proxy::ProxyTable::load(testutil::data_path("proxy_table.json"));
}

geom::AtomGraph slab_graph(const std::string& element, int sg, double a,
                           const std::array<int, 3>& miller, double offset) {
  const auto slab = geom::cut_slab(bulk::make_bulk(element, sg, a), miller,
                                   offset, true);
  return geom::to_graph(slab, {"H", 2.0}, 6.0);
}

// Three-level grid refinement over (slope, intercept); RSS reference
// minimizer independent of the least-squares path.
std::pair<double, double> grid_search_ols(
    const std::vector<proxy::CalibrationPoint>& pts) {
  const auto rss = [&pts](double s, double c) {
    double total = 0.0;
    for (const auto& p : pts) {
      const double r = p.eta - (s * p.log10_j0 + c);
      total += r * r;
    }
    return total;
  };
  double best_s = 0.0, best_c = 0.0;
  double span_s = 4.0, span_c = 8.0;
  for (int level = 0; level < 14; ++level) {
    double local_s = best_s, local_c = best_c;
    double local_f = rss(best_s, best_c);
    for (int i = -40; i <= 40; ++i) {
      for (int j = -40; j <= 40; ++j) {
        const double s = best_s + span_s * i / 40.0;
        const double c = best_c + span_c * j / 40.0;
        const double f = rss(s, c);
        if (f < local_f) {
          local_f = f;
          local_s = s;
          local_c = c;
        }
      }
    }
    best_s = local_s;
    best_c = local_c;
    span_s *= 0.06;
    span_c *= 0.06;
  }
  return {best_s, best_c};
}

}  // namespace

TEST_CASE("shipped proxy table matches the reference overpotentials") {
  const auto table = shipped_table();
  for (const auto& [element, eta] : kEtaAscending) {
    REQUIRE(table.has(element));
    CHECK(table.adsorption_energy(element) ==
          doctest::Approx(eta + 0.24).epsilon(1e-12));
  }
  CHECK(table.adsorption_energy("Pt") == doctest::Approx(0.28).epsilon(1e-12));
  CHECK(table.adsorption_energy("Rh") == doctest::Approx(0.27).epsilon(1e-12));
  CHECK_THROWS_AS(table.adsorption_energy("Xx"), std::out_of_range);
}

TEST_CASE("tabular prediction depends only on the surface element") {
  const auto table = shipped_table();
  CHECK(proxy::predict_adsorption_energy(
            table, slab_graph("Pt", 225, 3.9242, {1, 1, 1}, 0.3)) ==
        doctest::Approx(0.28).epsilon(1e-12));
  CHECK(proxy::predict_adsorption_energy(
            table, slab_graph("Rh", 225, 3.8034, {1, 0, 0}, 0.0)) ==
        doctest::Approx(0.27).epsilon(1e-12));

  const double a = proxy::predict_adsorption_energy(
      table, slab_graph("Mo", 229, 3.147, {1, 1, 0}, 0.1));
  const double b = proxy::predict_adsorption_energy(
      table, slab_graph("Mo", 229, 3.4, {2, -1, 1}, 0.7));
  CHECK(a == b);

  SUBCASE("error paths") {
    auto graph = slab_graph("Pt", 225, 3.9242, {1, 1, 1}, 0.3);
    graph.nodes[0].element = "Rh";
    CHECK_THROWS_AS(proxy::predict_adsorption_energy(table, graph),
                    std::invalid_argument);

    geom::AtomGraph empty;
    CHECK_THROWS_AS(proxy::predict_adsorption_energy(table, empty),
                    std::invalid_argument);

    auto unknown = slab_graph("Pt", 225, 3.9242, {1, 1, 1}, 0.3);
    for (auto& node : unknown.nodes) {
      if (node.tag == geom::NodeTag::Surface) node.element = "Zz";
    }
    CHECK_THROWS_AS(proxy::predict_adsorption_energy(table, unknown),
                    std::out_of_range);
  }
}

TEST_CASE("overpotential and reward") {
  CHECK(proxy::overpotential(0.28) == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(proxy::overpotential(0.24) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(proxy::overpotential(0.75) == doctest::Approx(0.51).epsilon(1e-12));

  CHECK(proxy::reward(0.0) == 1.0);
  CHECK(proxy::reward(0.04) == doctest::Approx(0.8521437889662113).epsilon(1e-9));
  CHECK(std::abs(proxy::reward(0.04) - 0.852144) < 1e-6);

  SUBCASE("even in the sign of the overpotential") {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      const double eta = u(gen);
      CHECK(proxy::reward(eta) == proxy::reward(-eta));
      CHECK(proxy::reward(eta) > 0.0);
      CHECK(proxy::reward(eta) <= 1.0);
    }
  }

  SUBCASE("custom config") {
    const proxy::RewardConfig cfg{50.0, -0.3};
    CHECK(proxy::overpotential(0.3, cfg) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(proxy::reward(0.1, cfg) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK_THROWS_AS(proxy::reward(0.1, proxy::RewardConfig{0.0, -0.24}),
                    std::invalid_argument);
  }
}

TEST_CASE("reward ordering tracks the overpotential ordering") {
  const auto table = shipped_table();
  double previous = 2.0;
  for (const auto& [element, eta] : kEtaAscending) {
    const double r =
        proxy::reward(proxy::overpotential(table.adsorption_energy(element)));
    CHECK(r > 0.0);
    CHECK(r < previous);
    previous = r;
  }

  SUBCASE("argmax of reward is argmin of |eta| on random tables") {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (int trial = 0; trial < 200; ++trial) {
      double best_eta = 10.0;
      double best_reward = -1.0;
      int argmin_eta = -1, argmax_reward = -1;
      for (int e = 0; e < 12; ++e) {
        const double eta = u(gen);
        if (std::abs(eta) < std::abs(best_eta)) {
          best_eta = eta;
          argmin_eta = e;
        }
        const double r = proxy::reward(eta);
        if (r > best_reward) {
          best_reward = r;
          argmax_reward = e;
        }
      }
      CHECK(argmin_eta == argmax_reward);
    }
  }
}

TEST_CASE("ordinary least squares calibration") {
  SUBCASE("recovers an exact line") {
    std::vector<proxy::CalibrationPoint> pts;
    for (double x : {-8.0, -6.0, -4.5, -3.0}) pts.push_back({x, 2.0 * x + 1.0});
    const auto fit = proxy::fit_calibration(pts);
    CHECK(std::abs(fit.slope - 2.0) < 1e-12);
    CHECK(std::abs(fit.intercept - 1.0) < 1e-12);
    CHECK(fit.rss < 1e-20);
    CHECK(fit.n == 4);
    // interpolation reproduces the training ordinates
    for (const auto& p : pts) {
      CHECK(proxy::predict_overpotential(fit, p.log10_j0) ==
            doctest::Approx(p.eta).epsilon(1e-12));
    }
  }

  SUBCASE("underdetermined and degenerate inputs error") {
    CHECK_THROWS_AS(proxy::fit_calibration({{1.0, 2.0}}), std::invalid_argument);
    CHECK_THROWS_AS(proxy::fit_calibration({{1.0, 2.0}, {1.0, 3.0}}),
                    std::invalid_argument);
  }

  SUBCASE("matches a grid-search RSS minimizer on random data") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> x_dist(-8.0, -3.0);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<proxy::CalibrationPoint> pts;
      for (int i = 0; i < 8; ++i) {
        const double x = x_dist(gen);
        pts.push_back({x, -0.1 * x - 0.3 + noise(gen)});
      }
      const auto fit = proxy::fit_calibration(pts);
      const auto [gs, gc] = grid_search_ols(pts);
      CHECK(std::abs(fit.slope - gs) < 1e-6);
      CHECK(std::abs(fit.intercept - gc) < 1e-6);
    }
  }

  SUBCASE("residuals are orthogonal to the design") {
    std::mt19937_64 gen(10);
    std::uniform_real_distribution<double> u(-10.0, -1.0);
    std::vector<proxy::CalibrationPoint> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({u(gen), u(gen) * -0.05 + 0.1});
    const auto fit = proxy::fit_calibration(pts);
    double dot_x = 0.0, dot_1 = 0.0;
    for (const auto& p : pts) {
      const double r = p.eta - (fit.slope * p.log10_j0 + fit.intercept);
      dot_x += r * p.log10_j0;
      dot_1 += r;
    }
    CHECK(std::abs(dot_x) < 1e-9);
    CHECK(std::abs(dot_1) < 1e-9);
  }

  SUBCASE("predict requires a valid fit") {
    CHECK_THROWS_AS(proxy::predict_overpotential(proxy::CalibrationFit{}, 0.0),
                    std::invalid_argument);
    proxy::CalibrationFit fit;
    fit.slope = 2.0;
    fit.intercept = 1.0;
    fit.n = 2;
    CHECK(proxy::predict_overpotential(fit, 0.0) == doctest::Approx(1.0));
  }
}

TEST_CASE("shipped literature dataset reproduces the inferred overpotentials") {
  const auto rows =
      proxy::load_calibration_csv(testutil::data_path("calibration_her.csv"));
  REQUIRE(rows.size() == 12);

  std::vector<proxy::CalibrationPoint> fit_points;
  for (const auto& row : rows) {
    if (row.eta_exp) fit_points.push_back({row.log10_j0, *row.eta_exp});
  }
  CHECK(fit_points.size() == 6);
  const auto fit = proxy::fit_calibration(fit_points);
  CHECK(fit.slope < 0.0);  // faster exchange current means lower overpotential

  const std::map<std::string, double> inferred = {
      {"Rh", 0.071}, {"Pd", 0.036}, {"Co", 0.224},
      {"Mo", 0.394}, {"W", 0.318},  {"Nb", 0.488}};
  for (const auto& row : rows) {
    if (row.eta_exp) continue;
    const double predicted = proxy::predict_overpotential(fit, row.log10_j0);
    CHECK(std::abs(predicted - inferred.at(row.element)) < 0.02);
  }
}

TEST_CASE("calibration csv parsing errors") {
  CHECK_THROWS_AS(proxy::load_calibration_csv("/nonexistent/file.csv"),
                  std::runtime_error);
  CHECK_THROWS_AS(proxy::parse_calibration_csv("element,log10_j0,eta_exp\nPt\n"),
                  std::invalid_argument);
}
