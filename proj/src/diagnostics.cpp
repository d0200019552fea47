#include "perfctl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "perfctl/quadratic_form.hpp"
#include "perfctl/robust_solver.hpp"

namespace perfctl {

namespace {

double root_sum_squares(const std::vector<double>& eps) {
  double s = 0.0;
  for (double e : eps) s += e * e;
  return std::sqrt(s);
}

}  // namespace

RateReport theoretical_rate(double lambda, double beta, const std::vector<double>& eps) {
  if (!(lambda > 0.0)) throw Error("strong-convexity constant lambda must be positive");
  if (beta < 0.0) throw Error("smoothness constant beta must be nonnegative");
  for (double e : eps) {
    if (e < 0.0) throw Error("quantile Lipschitz constants must be nonnegative");
  }
  RateReport r;
  r.alpha = beta * root_sum_squares(eps) / lambda;
  r.contracts_ideal = r.alpha < 1.0;
  r.contracts_empirical = r.alpha < 0.5;
  return r;
}

int iterations_to_delta(double alpha, double u0_dist, double delta) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw Error("iteration bound needs a contraction rate in [0, 1)");
  }
  if (!(delta > 0.0)) throw Error("delta must be positive");
  if (u0_dist <= delta) return 0;
  return static_cast<int>(std::ceil(std::log(u0_dist / delta) / (1.0 - alpha)));
}

double ps_po_gap_bound(double lipschitz_w, double lambda, const std::vector<double>& eps) {
  if (!(lambda > 0.0)) throw Error("strong-convexity constant lambda must be positive");
  return 2.0 * lipschitz_w * root_sum_squares(eps) / lambda;
}

EstimatedConstants estimate_constants(const SystemModel& model, const LossSpec& loss,
                                      const NoiseModel& noise, double p,
                                      const ProbeRegion& region, const SolverConfig& solver,
                                      const OracleOptions& oracle) {
  if (!has_quadratic_form(model, loss)) {
    throw UnsupportedError(
        "Hessian-based constants need linear dynamics and a quadratic loss; supply lambda and "
        "beta directly for other models");
  }
  const Eigen::Index dim = static_cast<Eigen::Index>(model.m) * model.T;
  if (region.lower.size() != dim || region.upper.size() != dim) {
    throw DimensionError("probe region must span the stacked control (length mT)");
  }
  if (((region.upper - region.lower).array() < 0.0).any()) {
    throw Error("probe region has lower > upper");
  }

  const QuadraticForm form = build_quadratic_form(model, loss);
  EstimatedConstants out;
  out.lambda = form.strong_convexity();
  out.beta = form.smoothness_in_w();
  out.eps.assign(static_cast<std::size_t>(model.T), 0.0);

  const Vector width = region.upper - region.lower;
  out.degenerate = width.maxCoeff() <= 0.0;

  std::vector<Vector> probes;
  if (out.degenerate) {
    probes.push_back(region.lower);
  } else {
    const int count = std::max(2, region.probes);
    for (int k = 0; k < count; ++k) {
      Rng rng(derive_seed(region.seed, static_cast<std::uint64_t>(k)));
      Vector u(dim);
      for (Eigen::Index a = 0; a < dim; ++a) u[a] = region.lower[a] + rng.uniform() * width[a];
      probes.push_back(std::move(u));
    }
  }

  auto radii_at = [&](const Vector& uf) {
    return ideal_confidence_product(model, noise, ControlTrajectory::from_flat(uf, model.m), p,
                                    ScoreSpec::euclidean(), oracle)
        .radii;
  };

  std::vector<std::vector<double>> probe_radii;
  probe_radii.reserve(probes.size());
  for (const auto& u : probes) probe_radii.push_back(radii_at(u));

  auto update_eps = [&](const Vector& a, const std::vector<double>& ra, const Vector& b,
                        const std::vector<double>& rb) {
    const double du = (a - b).norm();
    if (du <= 0.0) return;
    for (std::size_t t = 0; t < out.eps.size(); ++t) {
      out.eps[t] = std::max(out.eps[t], std::abs(ra[t] - rb[t]) / du);
    }
  };

  if (!out.degenerate) {
    for (std::size_t i = 0; i < probes.size(); ++i) {
      for (std::size_t j = i + 1; j < probes.size(); ++j) {
        update_eps(probes[i], probe_radii[i], probes[j], probe_radii[j]);
      }
      // Local difference quotients along each coordinate.
      for (Eigen::Index a = 0; a < dim; ++a) {
        if (width[a] <= 0.0) continue;
        Vector shifted = probes[i];
        const double h = 1e-4 * width[a];
        shifted[a] = shifted[a] + h <= region.upper[a] ? shifted[a] + h : shifted[a] - h;
        update_eps(probes[i], probe_radii[i], shifted, radii_at(shifted));
      }
    }
  }

  for (std::size_t i = 0; i < probes.size(); ++i) {
    const ControlTrajectory u = ControlTrajectory::from_flat(probes[i], model.m);
    ConfidenceProduct conf{ScoreSpec::euclidean(), probe_radii[i], IdealProvenance{p}};
    const InnerSolution worst = inner_max(model, loss, conf, u, solver);
    std::vector<Vector> points{worst.w_star.flat(), -worst.w_star.flat(),
                               Vector::Zero(worst.w_star.flat().size())};
    for (const auto& lm : worst.local_maxima) points.push_back(lm.w.flat());
    for (const auto& wf : points) {
      const Vector g = form.Huw.transpose() * probes[i] + form.Hww * wf + form.gw;
      out.lipschitz_w = std::max(out.lipschitz_w, g.norm());
    }
  }
  return out;
}

ContractionReport contraction_report(const IterationHistory& history,
                                     const ControlTrajectory& u_ps) {
  if (history.records.size() < 3) {
    throw Error("contraction report needs at least three iterates");
  }
  ContractionReport report;
  for (const auto& rec : history.records) report.distances.push_back(distance(rec.u, u_ps));

  for (std::size_t i = 0; i + 1 < report.distances.size(); ++i) {
    if (report.distances[i] < 1e-12) continue;
    report.ratios.push_back(report.distances[i + 1] / report.distances[i]);
    report.index.push_back(static_cast<int>(i));
  }

  // log d_i = a + b i over iterates that are not yet at the fixed point.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < report.distances.size(); ++i) {
    if (report.distances[i] < 1e-12) continue;
    const double x = static_cast<double>(i);
    const double y = std::log(report.distances[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count >= 2) {
    const double denom = count * sxx - sx * sx;
    report.fitted_rate = denom > 0.0 ? std::exp((count * sxy - sx * sy) / denom) : 0.0;
  }
  return report;
}

void write_contraction_summary(std::ostream& out, const ContractionReport& report) {
  double worst = 0.0;
  for (double r : report.ratios) worst = std::max(worst, r);
  out << "iterates: " << report.distances.size() << '\n'
      << "initial distance to fixed point: " << report.distances.front() << '\n'
      << "final distance to fixed point: " << report.distances.back() << '\n'
      << "largest ratio: " << worst << '\n'
      << "fitted rate: " << report.fitted_rate << '\n';
}

void write_contraction_csv(std::ostream& out, const ContractionReport& report) {
  out << "i,distance,ratio\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  std::size_t k = 0;
  for (std::size_t i = 0; i < report.distances.size(); ++i) {
    out << i << ',' << report.distances[i] << ',';
    if (k < report.index.size() && report.index[k] == static_cast<int>(i)) {
      out << report.ratios[k++];
    }
    out << '\n';
  }
}

}  // namespace perfctl
