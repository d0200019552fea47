#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "oracles.hpp"
#include "perfctl/diagnostics.hpp"
#include "perfctl/quadratic_form.hpp"

using namespace perfctl;

namespace {

struct Scalar {
  SystemModel model;
  LossSpec loss;
};

Scalar scalar_fixture() {
  const oracle::ScalarLtv sys{{1.0}, {1.0}, {0.0}, {1.0}, 1.0, 1.0};
  return {sys.model(-2.0, 2.0), sys.loss_spec()};
}

IterationHistory geometric(double rate, int count) {
  IterationHistory h;
  double u = 1.0;
  for (int i = 0; i < count; ++i) {
    IterationRecord rec;
    rec.i = i;
    rec.u = ControlTrajectory({Vector::Constant(1, u)});
    h.records.push_back(rec);
    u *= rate;
  }
  return h;
}

}  // namespace

TEST_CASE("theoretical_rate") {
  const auto r = theoretical_rate(2.0, 1.0, {0.3, 0.4});
  CHECK(r.alpha == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(r.contracts_ideal);
  CHECK(r.contracts_empirical);
  CHECK(theoretical_rate(2.0, 1.0, {0.0, 0.0}).alpha == 0.0);
  CHECK(theoretical_rate(2.0, 0.0, {0.3, 0.4}).alpha == 0.0);

  const auto mid = theoretical_rate(1.0, 1.5, {0.5});
  CHECK(mid.contracts_ideal);
  CHECK_FALSE(mid.contracts_empirical);
  CHECK_FALSE(theoretical_rate(1.0, 3.0, {0.5}).contracts_ideal);

  // Linear in beta, inverse in lambda.
  CHECK(theoretical_rate(2.0, 3.0, {0.3, 0.4}).alpha == doctest::Approx(0.75));
  CHECK(theoretical_rate(4.0, 1.0, {0.3, 0.4}).alpha == doctest::Approx(0.125));
  CHECK_THROWS(theoretical_rate(0.0, 1.0, {0.1}));
}

TEST_CASE("iterations_to_delta") {
  CHECK(iterations_to_delta(0.25, 0.005, 0.01) == 0);
  CHECK(iterations_to_delta(0.25, 0.01, 0.01) == 0);
  // (1 / 0.75) log 100 = 6.1402...
  CHECK(iterations_to_delta(0.25, 1.0, 0.01) == 7);
  CHECK_THROWS(iterations_to_delta(1.0, 1.0, 0.01));
  CHECK_THROWS(iterations_to_delta(0.5, 1.0, 0.0));
  CHECK(iterations_to_delta(0.999, 1.0, 0.01) > 4000);
}

TEST_CASE("ps_po_gap_bound") {
  CHECK(ps_po_gap_bound(1.0, 2.0, {0.3, 0.4}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ps_po_gap_bound(1.0, 2.0, {0.0, 0.0}) == 0.0);
  CHECK(ps_po_gap_bound(3.0, 2.0, {0.3, 0.4}) == doctest::Approx(1.5));
}

TEST_CASE("estimate_constants on the scalar Gaussian fixture") {
  const auto s = scalar_fixture();
  const NoiseModel noise(GaussianIsotropic{0.2, 0.1, 1e-12});
  const double p = 0.1;
  const auto est = estimate_constants(s.model, s.loss, noise, p, ProbeRegion::control_box(s.model));
  const double z = oracle::chi_quantile_bisect(1, 1.0 - p);
  REQUIRE(est.eps.size() == 1);
  CHECK(std::abs(est.eps[0] - 0.1 * z) <= 0.02 * 0.1 * z);
  CHECK_FALSE(est.degenerate);

  const QuadraticForm form = build_quadratic_form(s.model, s.loss);
  const double beta = Eigen::SelfAdjointEigenSolver<Matrix>(form.Hww).eigenvalues().maxCoeff();
  CHECK(std::abs(est.beta - beta) <= 1e-10);
  CHECK(est.lambda == doctest::Approx(4.0).epsilon(1e-12));
  // |dL/dw| = 2 |1 + u + w| peaks at u = 2 with the largest radius; random
  // probes approach it from below.
  const double sup = 2.0 * (3.0 + (0.2 + 0.1 * 2.0) * z);
  CHECK(est.lipschitz_w <= sup + 1e-9);
  CHECK(est.lipschitz_w >= 0.75 * sup);
}

TEST_CASE("estimate_constants on a single point is degenerate") {
  const auto s = scalar_fixture();
  ProbeRegion region{Vector::Constant(1, 0.5), Vector::Constant(1, 0.5)};
  const auto est = estimate_constants(s.model, s.loss, NoiseModel(GaussianIsotropic{0.2, 0.1, 1e-12}),
                                      0.1, region);
  CHECK(est.degenerate);
  CHECK(est.eps[0] == 0.0);
}

TEST_CASE("contraction_report recovers a geometric rate") {
  const auto rep = contraction_report(geometric(0.3, 12), ControlTrajectory({Vector::Zero(1)}));
  CHECK(rep.fitted_rate == doctest::Approx(0.3).epsilon(1e-6));
  REQUIRE(rep.ratios.size() == 11);
  for (double r : rep.ratios) CHECK(r == doctest::Approx(0.3).epsilon(1e-12));
  CHECK_THROWS(contraction_report(geometric(0.3, 2), ControlTrajectory({Vector::Zero(1)})));
}

TEST_CASE("contraction_report skips vanishing distances") {
  auto h = geometric(0.5, 5);
  h.records[2].u = ControlTrajectory({Vector::Zero(1)});
  const auto rep = contraction_report(h, ControlTrajectory({Vector::Zero(1)}));
  for (int idx : rep.index) CHECK(idx != 2);
}

TEST_CASE("I-IRPC ratios stay under the rate and the iteration bound holds") {
  const auto s = scalar_fixture();
  const NoiseModel noise(GaussianIsotropic{0.2, 0.1, 1e-12});
  RunConfig cfg;
  cfg.fix_tol = 1e-12;
  const double z = oracle::chi_quantile_bisect(1, 0.9);
  const double alpha = theoretical_rate(4.0, 2.0, {0.1 * z}).alpha;
  const auto ps = estimate_u_ps(s.model, noise, s.loss, cfg);
  const auto h = run_i_irpc(s.model, noise, s.loss, cfg);
  const auto rep = contraction_report(h, ps.u);
  for (std::size_t k = 0; k < rep.ratios.size(); ++k) {
    if (rep.index[k] >= 2 && rep.distances[static_cast<std::size_t>(rep.index[k])] > 1e-9) {
      CHECK(rep.ratios[k] <= alpha + 0.05);
    }
  }
  const double delta = 1e-4;
  const int bound = iterations_to_delta(alpha, rep.distances[0], delta);
  int first = -1;
  for (std::size_t i = 0; i < rep.distances.size(); ++i) {
    if (rep.distances[i] <= delta) {
      first = static_cast<int>(i);
      break;
    }
  }
  REQUIRE(first >= 0);
  CHECK(first <= bound);
}

TEST_CASE("E-IRPC ratios stay in the finite-sample regime") {
  const auto s = scalar_fixture();
  const NoiseModel noise(GaussianIsotropic{0.2, 0.1, 1e-12});
  RunConfig cfg;
  cfg.schedule = ConstantSchedule{999};
  cfg.iters_max = 15;
  cfg.seed = 4;
  const double z = oracle::chi_quantile_bisect(1, 0.9);
  const double alpha = theoretical_rate(4.0, 2.0, {0.1 * z}).alpha;
  const auto ps = estimate_u_ps(s.model, noise, s.loss, cfg);
  const auto h = run_e_irpc(s.model, noise, s.loss, cfg);
  const auto rep = contraction_report(h, ps.u);
  const double delta = 0.05;
  for (std::size_t k = 0; k < rep.ratios.size(); ++k) {
    if (rep.distances[static_cast<std::size_t>(rep.index[k]) + 1] > delta) {
      CHECK(rep.ratios[k] <= 2 * alpha + 0.1);
    }
  }
}

TEST_CASE("contraction summary and CSV") {
  const auto rep = contraction_report(geometric(0.5, 4), ControlTrajectory({Vector::Zero(1)}));
  std::ostringstream csv, text;
  write_contraction_csv(csv, rep);
  write_contraction_summary(text, rep);
  const std::string rows = csv.str();
  CHECK(rows.rfind("i,distance,ratio\n", 0) == 0);
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 5);
  CHECK(text.str().find("fitted") != std::string::npos);
}
