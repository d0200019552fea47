// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "perfctl/cli.hpp"
#include "perfctl/conformal.hpp"
#include "perfctl/diagnostics.hpp"
#include "perfctl/dynamics.hpp"
#include "perfctl/irpc.hpp"
#include "perfctl/robust_solver.hpp"

using namespace perfctl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ControlTrajectory controls(const std::vector<double>& values) {
  std::vector<Vector> steps;
  for (double v : values) steps.push_back(Vector::Constant(1, v));
  return ControlTrajectory(steps);
}

// ---------------------------------------------------------------------------

Verdict coverage_identity() {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = fixture("coverage");
  const std::size_t N = 999;
  const double p = 0.1;
  const int T = cfg.model.T;
  const int reps = 200;
  const std::size_t fresh_count = 100'000;
  const double target = static_cast<double>(quantile_index(N, p, T)) / static_cast<double>(N + 1);
  const ControlTrajectory u = solve_nominal(cfg.model, cfg.loss, cfg.run.solver);

  double per_step_sum = 0.0;
  int joint_ok = 0;
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t rep_seed = derive_seed(20240601, static_cast<std::uint64_t>(r));
    const auto cal = sample_noise_batch(cfg.model, cfg.noise, u, N, derive_seed(rep_seed, 0));
    const auto fresh = sample_noise_batch(cfg.model, cfg.noise, u, fresh_count, derive_seed(rep_seed, 1));
    const auto audit = coverage_audit(build_confidence_product(cal, ScoreSpec::euclidean(), p), fresh);
    for (double c : audit.per_step) per_step_sum += c;
    if (audit.joint >= 1.0 - p) ++joint_ok;
  }
  const double mean = per_step_sum / (reps * T);
  const double secs = seconds_since(start);
  const bool mean_ok = std::abs(mean - target) <= 0.005;
  const bool joint_pass = joint_ok >= static_cast<int>(std::ceil(0.95 * reps));
  return {mean_ok && joint_pass && secs <= 120.0,
          fmt("mean per-step coverage %.5f vs target %.5f (|diff| %.5f <= 0.005: %s); "
              "joint >= %.2f in %d/%d repetitions (need >= 95%%: %s); %.1f s",
              mean, target, std::abs(mean - target), mean_ok ? "yes" : "no", 1.0 - p, joint_ok, reps,
              joint_pass ? "yes" : "no", secs)};
}

Verdict inner_max_exactness() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(0xACCE55);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int T = 2 + k % 5;
    oracle::ScalarLtv sys;
    std::vector<double> u, r;
    for (int t = 0; t < T; ++t) {
      sys.a.push_back(-1.3 + 2.6 * rng.uniform());
      sys.b.push_back(-1.5 + 3.0 * rng.uniform());
      sys.q.push_back(rng.uniform());
      sys.r.push_back(0.1 + rng.uniform());
      u.push_back(-2.0 + 4.0 * rng.uniform());
      r.push_back(0.01 + 1.5 * rng.uniform());
    }
    sys.p = 0.1 + rng.uniform();
    sys.x0 = -2.0 + 4.0 * rng.uniform();
    const double truth = oracle::sign_pattern_max(sys, u, r);
    const ConfidenceProduct conf{ScoreSpec::euclidean(), r, IdealProvenance{0.1}};
    const double got = inner_max(sys.model(), sys.loss_spec(), conf, controls(u)).value;
    worst = std::max(worst, std::abs(got - truth) / std::max(1.0, std::abs(truth)));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-8 && secs <= 30.0,
          fmt("100 instances, worst relative error %.3e (<= 1e-8); %.2f s", worst, secs)};
}

Verdict danskin_gradient() {
  Rng rng(0xDA5C1);
  double worst = 0.0;
  int checked = 0, skipped = 0;
  for (int k = 0; k < 50; ++k) {
    const int n = 2, m = 1, T = 2 + k % 3;
    LinearTimeVarying ltv;
    QuadraticLoss q;
    for (int t = 0; t < T; ++t) {
      Matrix A(n, n), B(n, m);
      for (int i = 0; i < n * n; ++i) A.data()[i] = -0.9 + 1.8 * rng.uniform();
      for (int i = 0; i < n * m; ++i) B.data()[i] = -1.0 + 2.0 * rng.uniform();
      ltv.A.push_back(A);
      ltv.B.push_back(B);
      ltv.c.push_back(Vector::Zero(n));
      const Matrix S = rng.normal_vector(n * n).reshaped(n, n);
      q.Q.push_back(0.3 * S * S.transpose());
      q.R.push_back(Matrix::Identity(m, m) * (0.2 + rng.uniform()));
    }
    q.P = Matrix::Identity(n, n);
    SystemModel model;
    model.n = n;
    model.m = m;
    model.T = T;
    model.x0 = rng.normal_vector(n);
    model.nominal = NominalDynamics(ltv);
    model.control_box = ControlBox::uniform(T, Vector::Constant(m, -5), Vector::Constant(m, 5));
    const LossSpec loss{q, 0.0};
    std::vector<double> r;
    for (int t = 0; t < T; ++t) r.push_back(0.05 + 0.5 * rng.uniform());
    const ConfidenceProduct conf{ScoreSpec::euclidean(), r, IdealProvenance{0.1}};
    const Vector v = rng.normal_vector(m * T);

    const auto sol = inner_max(model, loss, conf, ControlTrajectory::from_flat(v, m));
    // Locally unique: no other local maximum comes close in value.
    bool unique = true;
    for (std::size_t j = 1; j < sol.local_maxima.size(); ++j) {
      if (sol.value - sol.local_maxima[j].value < 1e-3 * (1.0 + std::abs(sol.value))) unique = false;
    }
    if (!unique) {
      ++skipped;
      continue;
    }
    const Vector analytic =
        loss_gradients(model, loss, ControlTrajectory::from_flat(v, m), sol.w_star).grad_u;
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      Vector e = Vector::Zero(v.size());
      e[i] = h;
      const double fp = inner_max(model, loss, conf, ControlTrajectory::from_flat(v + e, m)).value;
      const double fm = inner_max(model, loss, conf, ControlTrajectory::from_flat(v - e, m)).value;
      worst = std::max(worst, std::abs((fp - fm) / (2 * h) - analytic[i]));
    }
    ++checked;
  }
  return {worst <= 1e-5 && checked > 0,
          fmt("%d instances checked (%d skipped as non-unique), max abs diff %.3e (<= 1e-5)",
              checked, skipped, worst)};
}

Verdict ideal_contraction() {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = fixture("scalar_gaussian");
  const auto v = validate_model(cfg.model, cfg.loss);
  const double z = chi_quantile(1, 1.0 - cfg.run.p / cfg.model.T);
  const auto* g = cfg.noise.as<GaussianIsotropic>();
  const double alpha = theoretical_rate(*v.lambda, *v.beta, {g->sigma1 * z}).alpha;

  const auto ps = estimate_u_ps(cfg.model, cfg.noise, cfg.loss, cfg.run);
  const auto h = run_i_irpc(cfg.model, cfg.noise, cfg.loss, cfg.run);
  const auto rep = contraction_report(h, ps.u);
  double worst_ratio = 0.0;
  for (std::size_t k = 0; k < rep.ratios.size(); ++k) {
    // Ratio d(i)/d(i-1) belongs to iteration i = index + 1.
    if (rep.index[k] + 1 >= 2) worst_ratio = std::max(worst_ratio, rep.ratios[k]);
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
  const double secs = seconds_since(start);
  const bool pass = alpha <= 0.3 && worst_ratio <= alpha + 0.05 && first >= 0 && first <= bound &&
                    secs <= 60.0;
  return {pass, fmt("alpha1 %.4f; worst ratio from iteration 2 %.4f (<= %.4f); first iteration "
                    "within 1e-4: %d (bound %d); %.2f s",
                    alpha, worst_ratio, alpha + 0.05, first, bound, secs)};
}

Verdict ps_po_proximity() {
  const auto start = std::chrono::steady_clock::now();
  bool pass = true;
  std::string detail;
  for (const char* name : {"scalar_gaussian", "lq_2d"}) {
    const ExperimentConfig cfg = fixture(name);
    const auto ps = estimate_u_ps(cfg.model, cfg.noise, cfg.loss, cfg.run);
    const auto po = grid_search_u_po(cfg.model, cfg.noise, cfg.loss, cfg.run.p, cfg.gap.grid,
                                     cfg.run.solver, cfg.run.score, cfg.run.oracle);
    ProbeRegion region = ProbeRegion::control_box(cfg.model);
    region.probes = cfg.gap.probes;
    const auto c = estimate_constants(cfg.model, cfg.loss, cfg.noise, cfg.run.p, region,
                                      cfg.run.solver, cfg.run.oracle);
    const double gap = distance(ps.u, po.u);
    const double bound = ps_po_gap_bound(c.lipschitz_w, c.lambda, c.eps);
    pass = pass && gap <= bound;
    detail += fmt("%s gap %.4g <= bound %.4g: %s; ", name, gap, bound, gap <= bound ? "yes" : "no");
  }
  const double secs = seconds_since(start);
  return {pass && secs <= 300.0, detail + fmt("%.1f s", secs)};
}

Verdict finite_sample_convergence() {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig cfg = fixture("scalar_gaussian");
  cfg.run.schedule = ConstantSchedule{999};
  cfg.run.p = 0.1;
  const auto v = validate_model(cfg.model, cfg.loss);
  const double z = chi_quantile(1, 1.0 - cfg.run.p / cfg.model.T);
  const double alpha =
      theoretical_rate(*v.lambda, *v.beta, {cfg.noise.as<GaussianIsotropic>()->sigma1 * z}).alpha;
  const auto ps = estimate_u_ps(cfg.model, cfg.noise, cfg.loss, cfg.run);
  int within = 0;
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    RunConfig run = cfg.run;
    run.seed = s;
    const auto h = run_e_irpc(cfg.model, cfg.noise, cfg.loss, run);
    const double d = distance(h.final_control(), ps.u);
    worst = std::max(worst, d);
    if (d <= 0.05) ++within;
  }
  const double secs = seconds_since(start);
  return {alpha <= 0.2 && within >= 18 && secs <= 300.0,
          fmt("alpha1 %.4f; %d/20 seeds within 0.05 of the stable control (need 18), worst %.4f; %.1f s",
              alpha, within, worst, secs)};
}

Verdict consistency_in_n() {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = fixture("scalar_gaussian");
  const auto ideal = run_i_irpc(cfg.model, cfg.noise, cfg.loss, cfg.run);
  std::vector<double> medians;
  std::string detail;
  for (std::size_t N : {99u, 999u, 9999u}) {
    std::vector<double> d;
    for (std::uint64_t s = 1; s <= 20; ++s) {
      RunConfig run = cfg.run;
      run.schedule = ConstantSchedule{N};
      run.seed = s;
      const auto h = run_e_irpc(cfg.model, cfg.noise, cfg.loss, run);
      d.push_back(distance(h.final_control(), ideal.final_control()));
    }
    medians.push_back(median(d));
    detail += fmt("N=%zu median %.3e; ", N, medians.back());
  }
  const bool pass = medians[1] <= medians[0] && medians[2] <= medians[1];
  return {pass, detail + fmt("%.1f s", seconds_since(start))};
}

Verdict cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "perfctl-acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  auto cli = [](std::vector<std::string> args) {
    args.insert(args.begin(), "perfctl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    std::string dir = out.str();
    while (!dir.empty() && dir.back() == '\n') dir.pop_back();
    return std::pair<int, std::string>(code, dir);
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };

  bool pass = true;
  int compared = 0;
  for (const char* name : {"scalar_gaussian", "lq_2d", "uniform_ball"}) {
    const fs::path cfg = root / (std::string(name) + ".cfg");
    cli({"emit-fixture", name, "-o", cfg.string()});
    for (const char* experiment : {"e_irpc", "i_irpc"}) {
      std::vector<std::string> histories;
      for (const char* workers : {"1", "1", "8"}) {
        const auto [code, dir] =
            cli({"run", cfg.string(), "--seed", "7", "--out-dir", (root / "out").string(), "--override",
                 std::string("experiment=") + experiment, "--override", std::string("run.workers=") + workers});
        if (code != 0) pass = false;
        histories.push_back(slurp(fs::path(dir) / "history.jsonl"));
      }
      for (const auto& h : histories) {
        if (h.empty() || h != histories.front()) pass = false;
      }
      ++compared;
    }
  }
  fs::remove_all(root);
  return {pass, fmt("%d fixture/experiment pairs, each run twice with 1 worker and once with 8", compared)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"coverage identity", coverage_identity},
      {"inner-max exactness", inner_max_exactness},
      {"Danskin gradient", danskin_gradient},
      {"ideal refinement contraction", ideal_contraction},
      {"stable/optimal proximity", ps_po_proximity},
      {"empirical refinement convergence", finite_sample_convergence},
      {"consistency in N", consistency_in_n},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s criterion %zu (%s): %s\n", v.pass ? "PASS" : "FAIL", k + 1, criteria[k].first,
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
              criteria.size());
  return failed == 0 ? 0 : 1;
}
