#include "perfctl/irpc.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>

#include "perfctl/dynamics.hpp"

namespace perfctl {

namespace {

struct Calibration {
  ConfidenceProduct conf;
  std::size_t N = 0;
  std::uint64_t seed = 0;
};

using Calibrate = std::function<Calibration(int i, const ControlTrajectory& previous)>;

IterationHistory refine(const SystemModel& model, const LossSpec& loss, const RunConfig& cfg,
                        const ControlTrajectory& start, const Calibrate& calibrate,
                        int contraction_window = 0) {
  using clock = std::chrono::steady_clock;
  if (!(cfg.p > 0.0 && cfg.p < 1.0)) throw Error("p must lie in (0, 1)");
  if (!(cfg.fix_tol > 0.0)) throw Error("fix_tol must be positive");

  IterationHistory history;
  {
    IterationRecord first;
    first.i = 0;
    first.u = start;
    first.inner_value =
        evaluate_loss(model, loss, start, NoiseTrajectory::zeros(start.size(), model.n));
    history.records.push_back(std::move(first));
  }

  int growth = 0;
  for (int i = 1; i <= cfg.iters_max; ++i) {
    const auto began = clock::now();
    const ControlTrajectory& previous = history.records.back().u;
    IterationRecord record;
    record.i = i;
    try {
      Calibration cal = calibrate(i, previous);
      const OuterSolution sol = outer_min(model, loss, cal.conf, cfg.solver, previous);
      record.u = sol.u;
      record.radii = std::move(cal.conf.radii);
      record.inner_value = sol.value;
      record.N = cal.N;
      record.seed = cal.seed;
    } catch (const RunFailure&) {
      throw;
    } catch (const Error& e) {
      throw RunFailure("iteration " + std::to_string(i) + ": " + e.what(), std::move(history));
    }
    record.step_norm = distance(record.u, previous);
    record.wall_ms =
        std::chrono::duration<double, std::milli>(clock::now() - began).count();

    const double last_step = history.records.back().step_norm;
    growth = (i > 1 && record.step_norm > last_step) ? growth + 1 : 0;
    // Sampling jitter can grow a few times in a row; real expansion also
    // outgrows the first step.
    if (growth >= 3 && i > 1 && record.step_norm > history.records[1].step_norm) {
      history.expansion_detected = true;
    }

    const double step = record.step_norm;
    history.records.push_back(std::move(record));
    if (step <= cfg.fix_tol) {
      history.status = RunStatus::Converged;
      return history;
    }
    if (contraction_window > 0 && i > contraction_window) {
      const double old = history.records[static_cast<std::size_t>(i - contraction_window)].step_norm;
      if (step >= old) {
        throw RunFailure("refinement map is not contracting: step norm " + std::to_string(step) +
                             " did not decrease over " + std::to_string(contraction_window) +
                             " iterations",
                         std::move(history));
      }
    }
  }
  history.status = RunStatus::MaxIterations;
  return history;
}

std::size_t samples_for(const SampleSchedule& schedule, double p, int T, int i) {
  if (const auto* c = std::get_if<ConstantSchedule>(&schedule)) return c->N;
  const auto& th = std::get<TheoreticalSchedule>(schedule);
  return sample_schedule_theoretical(th.lambda, th.beta, th.eps, th.delta, p, T, i, th.c);
}

}  // namespace

ControlTrajectory solve_nominal(const SystemModel& model, const LossSpec& loss,
                                const SolverConfig& cfg) {
  return outer_min(model, loss, ConfidenceProduct::zero(model.T), cfg).u;
}

IterationHistory run_e_irpc(const SystemModel& model, const NoiseModel& noise,
                            const LossSpec& loss, const RunConfig& cfg) {
  const ControlTrajectory u0 = solve_nominal(model, loss, cfg.solver);
  auto calibrate = [&](int i, const ControlTrajectory& previous) {
    const std::size_t N = samples_for(cfg.schedule, cfg.p, model.T, i);
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    const NoiseBatch batch = sample_noise_batch(model, noise, previous, N, seed, cfg.workers);
    return Calibration{build_confidence_product(batch, cfg.score, cfg.p), N, seed};
  };
  return refine(model, loss, cfg, u0, calibrate);
}

IterationHistory run_i_irpc(const SystemModel& model, const NoiseModel& noise,
                            const LossSpec& loss, const RunConfig& cfg,
                            const std::optional<ControlTrajectory>& start) {
  const ControlTrajectory u0 = start ? model.control_box.project(*start)
                                     : solve_nominal(model, loss, cfg.solver);
  auto calibrate = [&](int, const ControlTrajectory& previous) {
    return Calibration{
        ideal_confidence_product(model, noise, previous, cfg.p, cfg.score, cfg.oracle), 0, 0};
  };
  return refine(model, loss, cfg, u0, calibrate);
}

std::size_t sample_schedule_theoretical(double lambda, double beta, const std::vector<double>& eps,
                                        double delta, double p, int T, int i, double c) {
  double eps2 = 0.0;
  for (double e : eps) eps2 += e * e;
  const double Td = static_cast<double>(T);
  const double id = static_cast<double>(i);
  const double lead = 4.0 * lambda * lambda * Td * Td * Td / (beta * beta * delta * delta * eps2);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  // The bound's log argument is below 1 for any sensible (p, i, T); its
  // magnitude is what scales the sample count.
  const double log_term = std::abs(std::log(6.0 * p / (pi2 * id * id * Td * Td)));
  return static_cast<std::size_t>(std::ceil(c * lead * log_term));
}

StableControl estimate_u_ps(const SystemModel& model, const NoiseModel& noise,
                            const LossSpec& loss, const RunConfig& cfg,
                            const std::optional<ControlTrajectory>& start) {
  RunConfig tight = cfg;
  tight.fix_tol = 1e-10;
  tight.iters_max = 10'000;
  const ControlTrajectory u0 = start ? model.control_box.project(*start)
                                     : solve_nominal(model, loss, cfg.solver);
  auto calibrate = [&](int, const ControlTrajectory& previous) {
    return Calibration{
        ideal_confidence_product(model, noise, previous, cfg.p, cfg.score, cfg.oracle), 0, 0};
  };
  const IterationHistory history = refine(model, loss, tight, u0, calibrate, 20);
  if (history.status != RunStatus::Converged) {
    throw RunFailure("fixed-point iteration did not reach tolerance", history);
  }
  StableControl out;
  out.u = history.final_control();
  out.iterations = history.records.back().i;
  const ConfidenceProduct conf =
      ideal_confidence_product(model, noise, out.u, cfg.p, cfg.score, cfg.oracle);
  out.residual = distance(outer_min(model, loss, conf, cfg.solver, out.u).u, out.u);
  return out;
}

GridResult grid_search_u_po(const SystemModel& model, const NoiseModel& noise,
                            const LossSpec& loss, double p, const GridSpec& grid,
                            const SolverConfig& solver, const ScoreSpec& score,
                            const OracleOptions& oracle) {
  const Vector lower = model.control_box.flat_lower();
  const Vector upper = model.control_box.flat_upper();
  const Eigen::Index dim = lower.size();
  if (dim > 3) {
    throw UnsupportedError("grid search is limited to mT <= 3 (got " + std::to_string(dim) + ")");
  }
  if (grid.points < 2 || grid.factor < 2 || grid.refinements < 0) {
    throw Error("grid needs points >= 2, factor >= 2, refinements >= 0");
  }

  auto worst_case = [&](const Vector& uf) {
    const ControlTrajectory u = ControlTrajectory::from_flat(uf, model.m);
    const ConfidenceProduct conf = ideal_confidence_product(model, noise, u, p, score, oracle);
    return inner_max(model, loss, conf, u, solver).value;
  };

  GridResult best;
  Vector best_u;
  double best_value = std::numeric_limits<double>::infinity();

  // Axis i spans [lo[i], hi[i]] with `count` points.
  auto scan = [&](const Vector& lo, const Vector& hi, int count) {
    Vector spacing(dim);
    for (Eigen::Index a = 0; a < dim; ++a) {
      spacing[a] = hi[a] > lo[a] ? (hi[a] - lo[a]) / (count - 1) : 0.0;
    }
    std::vector<int> index(static_cast<std::size_t>(dim), 0);
    for (;;) {
      Vector u(dim);
      for (Eigen::Index a = 0; a < dim; ++a) {
        u[a] = spacing[a] > 0.0 ? std::min(hi[a], lo[a] + index[static_cast<std::size_t>(a)] * spacing[a])
                                : lo[a];
      }
      const double value = worst_case(u);
      if (value < best_value) {
        best_value = value;
        best_u = u;
      }
      Eigen::Index a = 0;
      for (; a < dim; ++a) {
        auto& k = index[static_cast<std::size_t>(a)];
        if (spacing[a] > 0.0 && ++k < count) break;
        k = 0;
      }
      if (a == dim) break;
    }
    return spacing;
  };

  Vector spacing = scan(lower, upper, grid.points);
  for (int round = 0; round < grid.refinements; ++round) {
    // Window of +-1 coarse cell around the incumbent, `factor` times finer.
    const Vector fine = spacing / static_cast<double>(grid.factor);
    const Vector center = best_u;
    const int count = 2 * grid.factor + 1;
    std::vector<int> index(static_cast<std::size_t>(dim), 0);
    for (;;) {
      Vector u(dim);
      bool inside = true;
      for (Eigen::Index a = 0; a < dim; ++a) {
        const int offset = index[static_cast<std::size_t>(a)] - grid.factor;
        u[a] = fine[a] > 0.0 ? center[a] + offset * fine[a] : center[a];
        if (u[a] < lower[a] - 1e-15 || u[a] > upper[a] + 1e-15) inside = false;
      }
      if (inside) {
        const double value = worst_case(u.cwiseMax(lower).cwiseMin(upper));
        if (value < best_value) {
          best_value = value;
          best_u = u.cwiseMax(lower).cwiseMin(upper);
        }
      }
      Eigen::Index a = 0;
      for (; a < dim; ++a) {
        auto& k = index[static_cast<std::size_t>(a)];
        if (fine[a] > 0.0 && ++k < count) break;
        k = 0;
      }
      if (a == dim) break;
    }
    spacing = fine;
  }

  best.u = ControlTrajectory::from_flat(best_u, model.m);
  best.value = best_value;
  best.cell = spacing;
  return best;
}

}  // namespace perfctl
