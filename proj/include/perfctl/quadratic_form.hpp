#pragma once

#include "perfctl/types.hpp"

namespace perfctl {

/// Explicit form of L(w, u) for linear dynamics and quadratic loss:
///
///   L = 1/2 u'Huu u + u'Huw w + 1/2 w'Hww w + gu'u + gw'w + constant
///
/// with u and w stacked over time.
struct QuadraticForm {
  Matrix Huu;
  Matrix Hww;
  Matrix Huw;
  Vector gu;
  Vector gw;
  double constant = 0.0;

  double value(const Vector& u, const Vector& w) const {
    return 0.5 * u.dot(Huu * u) + u.dot(Huw * w) + 0.5 * w.dot(Hww * w) + gu.dot(u) + gw.dot(w) +
           constant;
  }

  /// Smallest eigenvalue of the u-Hessian.
  double strong_convexity() const;
  /// Largest eigenvalue of the w-Hessian.
  double smoothness_in_w() const;
  /// Largest eigenvalue of the u-Hessian.
  double smoothness_in_u() const;
};

/// Requires LTV dynamics and a quadratic loss; throws UnsupportedError otherwise.
QuadraticForm build_quadratic_form(const SystemModel& model, const LossSpec& loss);

bool has_quadratic_form(const SystemModel& model, const LossSpec& loss) noexcept;

}  // namespace perfctl
