#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numbers>

#include "oracles.hpp"
#include "perfctl/cli.hpp"
#include "perfctl/diagnostics.hpp"
#include "perfctl/irpc.hpp"

using namespace perfctl;

namespace {

/// x(1) = x0 + u + w, J = x(1)^2 + r u^2, U = [lo, hi].
struct Scalar {
  SystemModel model;
  LossSpec loss;
};

Scalar scalar(double x0, double r, double lo = -2.0, double hi = 2.0, double p = 1.0) {
  const oracle::ScalarLtv sys{{1.0}, {1.0}, {0.0}, {r}, p, x0};
  return {sys.model(lo, hi), sys.loss_spec()};
}

ControlTrajectory controls(std::initializer_list<double> values) {
  std::vector<Vector> steps;
  for (double v : values) steps.push_back(Vector::Constant(1, v));
  return ControlTrajectory(steps);
}

void check_well_formed(const IterationHistory& h, const SystemModel& model) {
  REQUIRE_FALSE(h.records.empty());
  CHECK(h.records[0].radii.empty());
  for (std::size_t k = 0; k < h.records.size(); ++k) {
    const auto& rec = h.records[k];
    CHECK(rec.i == static_cast<int>(k));
    CHECK(rec.step_norm >= 0.0);
    CHECK(model.control_box.contains(rec.u));
    for (double r : rec.radii) CHECK(r >= 0.0);
    if (k > 0) CHECK(rec.radii.size() == static_cast<std::size_t>(model.T));
  }
}

}  // namespace

TEST_CASE("solve_nominal") {
  SUBCASE("unconstrained scalar") {
    const auto s = scalar(1.0, 1.0, -10, 10);
    CHECK(solve_nominal(s.model, s.loss)[0][0] == doctest::Approx(-0.5).epsilon(1e-9));
  }
  SUBCASE("pure control penalty") {
    const auto s = scalar(1.0, 1.0, -10, 10, 0.0);
    CHECK(std::abs(solve_nominal(s.model, s.loss)[0][0]) <= 1e-12);
  }
  SUBCASE("active box") {
    const auto s = scalar(1.0, 1.0, 0, 10);
    CHECK(solve_nominal(s.model, s.loss)[0][0] == 0.0);
  }
}

TEST_CASE("E-IRPC with zero noise stops after one step") {
  const auto s = scalar(1.0, 1.0);
  RunConfig cfg;
  cfg.schedule = ConstantSchedule{99};
  const auto h = run_e_irpc(s.model, NoiseModel(UniformBall{0.0, 0.0}), s.loss, cfg);
  CHECK(h.status == RunStatus::Converged);
  REQUIRE(h.records.size() == 2);
  CHECK(h.records[1].u == h.records[0].u);
  CHECK(h.records[1].N == 99);
  check_well_formed(h, s.model);
}

TEST_CASE("E-IRPC is a pure function of the master seed") {
  const auto s = scalar(1.0, 1.0);
  const NoiseModel noise(GaussianIsotropic{0.2, 0.1, 1e-12});
  RunConfig cfg;
  cfg.seed = 31;
  cfg.iters_max = 8;
  const auto a = run_e_irpc(s.model, noise, s.loss, cfg);
  cfg.workers = 4;
  const auto b = run_e_irpc(s.model, noise, s.loss, cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].u == b.records[k].u);
    CHECK(a.records[k].radii == b.records[k].radii);
    CHECK(a.records[k].inner_value == b.records[k].inner_value);
    CHECK(a.records[k].seed == b.records[k].seed);
  }
  check_well_formed(a, s.model);
  cfg.seed = 32;
  CHECK_FALSE(run_e_irpc(s.model, noise, s.loss, cfg).records[1].u == a.records[1].u);
}

TEST_CASE("E-IRPC surfaces sampling failures with the partial history") {
  const auto s = scalar(1.0, 1.0);
  RunConfig cfg;
  cfg.schedule = ConstantSchedule{3};
  try {
    run_e_irpc(s.model, NoiseModel(GaussianIsotropic{0.2, 0.1, 1e-12}), s.loss, cfg);
    FAIL("expected RunFailure");
  } catch (const RunFailure& e) {
    CHECK(e.history().records.size() == 1);
    CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
  }
}

TEST_CASE("I-IRPC without performativity settles after one correction") {
  const auto s = scalar(1.0, 1.0);
  RunConfig cfg;
  const auto h = run_i_irpc(s.model, NoiseModel(GaussianIsotropic{0.2, 0.0, 1e-12}), s.loss, cfg);
  CHECK(h.status == RunStatus::Converged);
  REQUIRE(h.records.size() == 3);
  CHECK(h.records[1].step_norm > 0.0);
  CHECK(h.records[2].step_norm <= cfg.fix_tol);
  for (const auto& rec : h.records) CHECK(rec.N == 0);
}

TEST_CASE("I-IRPC contracts at the theoretical rate") {
  const auto s = scalar(1.0, 1.0);
  const double p = 0.1;
  const NoiseModel noise(GaussianIsotropic{0.2, 0.1, 1e-12});
  // lambda = 2 + 2r, beta = 2, eps = sigma1 z.
  const double z = oracle::chi_quantile_bisect(1, 1.0 - p);
  const double alpha = theoretical_rate(4.0, 2.0, {0.1 * z}).alpha;
  CHECK(alpha < 0.5);
  RunConfig cfg;
  cfg.p = p;
  cfg.fix_tol = 1e-12;
  const auto h = run_i_irpc(s.model, noise, s.loss, cfg);
  CHECK(h.status == RunStatus::Converged);
  CHECK_FALSE(h.expansion_detected);
  for (std::size_t k = 3; k < h.records.size(); ++k) {
    if (h.records[k - 1].step_norm < 1e-11) break;
    CHECK(h.records[k].step_norm / h.records[k - 1].step_norm <= alpha + 0.05);
  }
}

TEST_CASE("I-IRPC flags expansion when the rate exceeds one") {
  const ExperimentConfig fx = fixture("diverging_alpha");
  REQUIRE(fx.alpha1);
  CHECK(*fx.alpha1 > 1.0);
  const auto h = run_i_irpc(fx.model, fx.noise, fx.loss, fx.run);
  CHECK(h.expansion_detected);
  check_well_formed(h, fx.model);
}

TEST_CASE("theoretical sample schedule") {
  CHECK(sample_schedule_theoretical(1, 1, {1}, 0.1, 0.1, 1, 1) == 1121);
  // 400 |log(0.6 / pi^2)| = 1120.1...
  const double raw = 400.0 * std::abs(std::log(0.6 / (std::numbers::pi * std::numbers::pi)));
  CHECK(raw > 1120.0);
  CHECK(raw < 1121.0);

  const double n1 = static_cast<double>(sample_schedule_theoretical(50, 1, {0.1}, 0.01, 0.1, 3, 2));
  const double n2 = static_cast<double>(sample_schedule_theoretical(50, 1, {0.1}, 0.02, 0.1, 3, 2));
  CHECK(n1 / n2 == doctest::Approx(4.0).epsilon(1e-6));

  std::size_t last = 0;
  for (int i = 1; i <= 50; ++i) {
    const std::size_t n = sample_schedule_theoretical(2, 1, {0.2, 0.3}, 0.05, 0.1, 2, i);
    CHECK(n >= last);
    last = n;
  }
  CHECK(sample_schedule_theoretical(1, 1, {1}, 0.1, 0.1, 1, 1, 2.5) ==
        static_cast<std::size_t>(std::ceil(2.5 * raw)));
}

TEST_CASE("E-IRPC follows the theoretical schedule") {
  const auto s = scalar(1.0, 1.0);
  RunConfig cfg;
  cfg.schedule = TheoreticalSchedule{1.0, 1.0, {1.0}, 0.5, 1.0};
  cfg.iters_max = 3;
  cfg.fix_tol = 1e-300;
  const auto h = run_e_irpc(s.model, NoiseModel(GaussianIsotropic{0.2, 0.1, 1e-12}), s.loss, cfg);
  for (std::size_t k = 1; k < h.records.size(); ++k) {
    CHECK(h.records[k].N ==
          sample_schedule_theoretical(1.0, 1.0, {1.0}, 0.5, cfg.p, 1, static_cast<int>(k)));
  }
}

TEST_CASE("estimate_u_ps") {
  const auto s = scalar(1.0, 1.0);
  const NoiseModel noise(GaussianIsotropic{0.2, 0.1, 1e-12});
  RunConfig cfg;
  const auto ps = estimate_u_ps(s.model, noise, s.loss, cfg);
  CHECK(ps.residual <= 1e-9);

  Rng rng(12);
  for (int k = 0; k < 5; ++k) {
    const auto start = controls({-2.0 + 4.0 * rng.uniform()});
    const auto other = estimate_u_ps(s.model, noise, s.loss, cfg, start);
    CHECK(distance(other.u, ps.u) <= 1e-7);
  }
}

TEST_CASE("without performativity the fixed point is the robust optimum") {
  const auto s = scalar(1.0, 1.0);
  const NoiseModel noise(GaussianIsotropic{0.3, 0.0, 1e-12});
  RunConfig cfg;
  const auto ps = estimate_u_ps(s.model, noise, s.loss, cfg);
  const auto conf = ideal_confidence_product(s.model, noise, ps.u, cfg.p);
  CHECK(distance(outer_min(s.model, s.loss, conf).u, ps.u) <= 1e-9);
  // The worst case is w = r sign(1 + u), so u = -(1 + r) / 2.
  CHECK(ps.u[0][0] == doctest::Approx(-(1.0 + conf.radii[0]) / 2).epsilon(1e-9));

  const auto grid = grid_search_u_po(s.model, noise, s.loss, cfg.p);
  CHECK(std::abs(grid.u[0][0] - ps.u[0][0]) <= grid.cell[0]);
}

TEST_CASE("grid refinement moves the answer by less than a coarse cell") {
  const auto s = scalar(1.0, 1.0);
  const NoiseModel noise(GaussianIsotropic{0.2, 0.1, 1e-12});
  GridSpec coarse{41, 1, 10}, fine{41, 2, 10};
  const auto a = grid_search_u_po(s.model, noise, s.loss, 0.1, coarse);
  const auto b = grid_search_u_po(s.model, noise, s.loss, 0.1, fine);
  CHECK(std::abs(a.u[0][0] - b.u[0][0]) < a.cell[0] * 10);
  CHECK(b.value <= a.value);
  CHECK(b.cell[0] == doctest::Approx(a.cell[0] / 10));
}

TEST_CASE("grid search rejects more than three control coordinates") {
  const oracle::ScalarLtv sys{{1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}, 1.0, 0.0};
  CHECK_THROWS_AS(grid_search_u_po(sys.model(), NoiseModel(GaussianIsotropic{}), sys.loss_spec(), 0.1),
                  UnsupportedError);
}
