#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "perfctl/dynamics.hpp"
#include "perfctl/types.hpp"

namespace perfctl {

/// Score function s(w(t)) whose sublevel sets are the per-step confidence
/// regions: the Euclidean norm, or sqrt(w' H_t w) for positive-definite H_t.
class ScoreSpec {
 public:
  static ScoreSpec euclidean() { return ScoreSpec(); }
  /// One matrix per time step. Throws if any matrix is not symmetric
  /// positive-definite.
  static ScoreSpec mahalanobis(std::vector<Matrix> H);

  bool is_euclidean() const noexcept { return H_.empty(); }
  const std::vector<Matrix>& matrices() const noexcept { return H_; }

  double operator()(std::size_t t, const Vector& w) const;

  /// Lower-triangular L_t with H_t = L_t L_t'. Identity for the Euclidean score.
  Matrix cholesky_factor(std::size_t t, Eigen::Index n) const;

  friend bool operator==(const ScoreSpec& a, const ScoreSpec& b);

 private:
  std::vector<Matrix> H_;
  std::vector<Matrix> L_;
};

struct EmpiricalProvenance {
  std::size_t N = 0;
  std::size_t k = 0;
  double p = 0.0;
};

struct IdealProvenance {
  double p = 0.0;
};

/// Product of per-step confidence sets {w(t) : s(w(t)) <= radii[t]}.
struct ConfidenceProduct {
  ScoreSpec score;
  std::vector<double> radii;
  std::variant<EmpiricalProvenance, IdealProvenance> provenance;

  /// Zero radii: the nominal (noise-free) problem.
  static ConfidenceProduct zero(int T) {
    return {ScoreSpec::euclidean(), std::vector<double>(static_cast<std::size_t>(T), 0.0),
            IdealProvenance{}};
  }

  bool contains(const NoiseTrajectory& w, double tol = 0.0) const;
};

/// k = ceil((N + 1)(1 - p / T)); throws InsufficientSamples when k > N.
std::size_t quantile_index(std::size_t N, double p, int T);

/// k-th smallest score (1-based).
double empirical_quantile(std::vector<double> scores, std::size_t k);

/// Calibrates one radius per step from a batch of noise trajectories.
ConfidenceProduct build_confidence_product(const NoiseBatch& batch, const ScoreSpec& score,
                                           double p);

/// Quantile of the chi distribution with `dof` degrees of freedom.
double chi_quantile(int dof, double level);

/// CDF of the chi distribution: P(dof/2, r^2/2).
double chi_cdf(int dof, double r);

/// Settings for the Monte Carlo fallback of the ideal oracle.
struct OracleOptions {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = derive_seed(0xC0FFEE, 0);
  unsigned workers = 1;
};

/// Q(level) of |w(t)| for w(t) ~ D(x, u_t). Closed form for the isotropic
/// Gaussian and uniform-ball families, Monte Carlo otherwise.
double ideal_quantile(const NoiseModel& noise, int t, const Vector& x, const Vector& u_t,
                      double level, const OracleOptions& options = {});

/// Ideal radii Q_t(u) at level 1 - p/T for every step.
ConfidenceProduct ideal_confidence_product(const SystemModel& model, const NoiseModel& noise,
                                           const ControlTrajectory& u, double p,
                                           const ScoreSpec& score = ScoreSpec::euclidean(),
                                           const OracleOptions& options = {});

struct CoverageAudit {
  std::vector<double> per_step;
  double joint = 0.0;
};

/// Fraction of fresh trajectories whose score is within the radius, per step
/// and jointly over the whole horizon.
CoverageAudit coverage_audit(const ConfidenceProduct& conf, const NoiseBatch& fresh);

}  // namespace perfctl
