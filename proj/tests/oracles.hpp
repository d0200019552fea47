#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the solver code it is checking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "perfctl/types.hpp"

namespace oracle {

using perfctl::Matrix;
using perfctl::Vector;

/// Plain scalar system x(t+1) = a_t x + b_t u + w with stage cost q_t x^2 +
/// r_t u^2 and terminal cost p x(T)^2, evaluated by direct recursion.
struct ScalarLtv {
  std::vector<double> a, b, q, r;
  double p = 1.0;
  double x0 = 0.0;

  int T() const { return static_cast<int>(a.size()); }

  double loss(const std::vector<double>& u, const std::vector<double>& w) const {
    double x = x0;
    double J = 0.0;
    for (int t = 0; t < T(); ++t) {
      const auto k = static_cast<std::size_t>(t);
      J += q[k] * x * x + r[k] * u[k] * u[k];
      x = a[k] * x + b[k] * u[k] + w[k];
    }
    return J + p * x * x;
  }

  perfctl::SystemModel model(double ulo = -10.0, double uhi = 10.0) const {
    perfctl::LinearTimeVarying ltv;
    for (int t = 0; t < T(); ++t) {
      const auto k = static_cast<std::size_t>(t);
      ltv.A.push_back(Matrix::Constant(1, 1, a[k]));
      ltv.B.push_back(Matrix::Constant(1, 1, b[k]));
      ltv.c.push_back(Vector::Zero(1));
    }
    perfctl::SystemModel m;
    m.n = 1;
    m.m = 1;
    m.T = T();
    m.x0 = Vector::Constant(1, x0);
    m.nominal = perfctl::NominalDynamics(std::move(ltv));
    m.control_box = perfctl::ControlBox::uniform(T(), Vector::Constant(1, ulo), Vector::Constant(1, uhi));
    return m;
  }

  perfctl::LossSpec loss_spec() const {
    perfctl::QuadraticLoss ql;
    ql.P = Matrix::Constant(1, 1, p);
    for (int t = 0; t < T(); ++t) {
      const auto k = static_cast<std::size_t>(t);
      ql.Q.push_back(Matrix::Constant(1, 1, q[k]));
      ql.R.push_back(Matrix::Constant(1, 1, r[k]));
    }
    return perfctl::LossSpec{ql, 0.0};
  }
};

/// max over w(t) in {-r_t, +r_t}: the maximum of a convex function over a
/// box sits at a vertex.
inline double sign_pattern_max(const ScalarLtv& sys, const std::vector<double>& u,
                               const std::vector<double>& radii) {
  const int T = sys.T();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> w(static_cast<std::size_t>(T));
  for (std::uint32_t mask = 0; mask < (1u << T); ++mask) {
    for (int t = 0; t < T; ++t) {
      w[static_cast<std::size_t>(t)] = ((mask >> t) & 1u) ? radii[static_cast<std::size_t>(t)]
                                                          : -radii[static_cast<std::size_t>(t)];
    }
    best = std::max(best, sys.loss(u, w));
  }
  return best;
}

/// CDF of the chi distribution for 1 to 3 degrees of freedom in closed form.
inline double chi_cdf_closed(int dof, double r) {
  if (r <= 0.0) return 0.0;
  const double erf_part = std::erf(r / std::numbers::sqrt2);
  switch (dof) {
    case 1: return erf_part;
    case 2: return 1.0 - std::exp(-0.5 * r * r);
    case 3: return erf_part - std::sqrt(2.0 / std::numbers::pi) * r * std::exp(-0.5 * r * r);
    default: return std::nan("");
  }
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi, double target) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double chi_quantile_bisect(int dof, double level) {
  return bisect([dof](double r) { return chi_cdf_closed(dof, r); }, 0.0, 50.0, level);
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
  double statistic;
  double p_value;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  const double lambda = (en + 0.12 + 0.11 / en) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

/// Minimizer of f on [lo, hi] by scanning at `step`.
inline double grid_argmin(const std::function<double(double)>& f, double lo, double hi, double step) {
  double best_x = lo, best = f(lo);
  for (double x = lo; x <= hi + 1e-12; x += step) {
    const double v = f(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace oracle
