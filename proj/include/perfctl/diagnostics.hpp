#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "perfctl/conformal.hpp"
#include "perfctl/irpc.hpp"
#include "perfctl/types.hpp"

namespace perfctl {

struct RateReport {
  /// alpha_1 = beta * sqrt(sum eps_t^2) / lambda
  double alpha = 0.0;
  /// alpha_1 < 1: the ideal refinement map is a contraction.
  bool contracts_ideal = false;
  /// alpha_1 < 1/2: the regime of the finite-sample guarantee.
  bool contracts_empirical = false;
};

RateReport theoretical_rate(double lambda, double beta, const std::vector<double>& eps);

/// Iterations after which |u_i - u_PS| <= delta for a map contracting at
/// rate `alpha`: ceil(log(u0_dist / delta) / (1 - alpha)); 0 when
/// u0_dist <= delta. Pass 2 alpha_1 for the finite-sample variant.
int iterations_to_delta(double alpha, double u0_dist, double delta);

/// 2 L_w sqrt(sum eps_t^2) / lambda
double ps_po_gap_bound(double lipschitz_w, double lambda, const std::vector<double>& eps);

/// Compact probe region for constant estimation, over the stacked control.
struct ProbeRegion {
  Vector lower;
  Vector upper;
  int probes = 24;
  std::uint64_t seed = 0x5EED;

  static ProbeRegion control_box(const SystemModel& model) {
    return {model.control_box.flat_lower(), model.control_box.flat_upper()};
  }
};

struct EstimatedConstants {
  double lambda = 0.0;
  double beta = 0.0;
  std::vector<double> eps;
  double lipschitz_w = 0.0;
  /// The region has no extent, so the Lipschitz estimates are meaningless.
  bool degenerate = false;
};

/// lambda and beta from the Hessian eigenvalues (linear dynamics with
/// quadratic loss only); eps_t and L_w from probes of the ideal oracle and
/// of grad_w L over the region.
EstimatedConstants estimate_constants(const SystemModel& model, const LossSpec& loss,
                                      const NoiseModel& noise, double p,
                                      const ProbeRegion& region, const SolverConfig& solver = {},
                                      const OracleOptions& oracle = {});

struct ContractionReport {
  std::vector<double> distances;
  /// ratios[k] = distances[index[k] + 1] / distances[index[k]]
  std::vector<double> ratios;
  std::vector<int> index;
  /// exp(slope) of a least-squares fit of log distance against iteration.
  double fitted_rate = 0.0;
};

ContractionReport contraction_report(const IterationHistory& history,
                                     const ControlTrajectory& u_ps);

/// Plain-text summary and `i,distance,ratio` CSV.
void write_contraction_summary(std::ostream& out, const ContractionReport& report);
void write_contraction_csv(std::ostream& out, const ContractionReport& report);

}  // namespace perfctl
