#include "perfctl/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>

namespace perfctl {

ScoreSpec ScoreSpec::mahalanobis(std::vector<Matrix> H) {
  ScoreSpec spec;
  spec.L_.reserve(H.size());
  for (std::size_t t = 0; t < H.size(); ++t) {
    const Matrix& h = H[t];
    if (h.rows() != h.cols() || h.rows() == 0) {
      throw DimensionError("Mahalanobis matrix must be square");
    }
    if (!h.isApprox(h.transpose(), 1e-12)) {
      throw DimensionError("Mahalanobis matrix at t=" + std::to_string(t) + " is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) {
      throw DimensionError("Mahalanobis matrix at t=" + std::to_string(t) +
                           " is not positive definite");
    }
    spec.L_.push_back(Eigen::LLT<Matrix>(h).matrixL());
  }
  spec.H_ = std::move(H);
  return spec;
}

double ScoreSpec::operator()(std::size_t t, const Vector& w) const {
  if (H_.empty()) return w.norm();
  // |L' w| = sqrt(w' H w)
  return (L_[t].transpose() * w).norm();
}

Matrix ScoreSpec::cholesky_factor(std::size_t t, Eigen::Index n) const {
  if (H_.empty()) return Matrix::Identity(n, n);
  return L_[t];
}

bool operator==(const ScoreSpec& a, const ScoreSpec& b) {
  if (a.H_.size() != b.H_.size()) return false;
  for (std::size_t t = 0; t < a.H_.size(); ++t) {
    if (a.H_[t] != b.H_[t]) return false;
  }
  return true;
}

bool ConfidenceProduct::contains(const NoiseTrajectory& w, double tol) const {
  if (w.size() != radii.size()) return false;
  for (std::size_t t = 0; t < w.size(); ++t) {
    if (score(t, w[t]) > radii[t] + tol) return false;
  }
  return true;
}

std::size_t quantile_index(std::size_t N, double p, int T) {
  if (N < 1) throw InsufficientSamples("quantile index needs N >= 1");
  if (!(p > 0.0 && p < 1.0)) throw Error("probability level p must lie in (0, 1)");
  if (T < 1) throw Error("horizon T must be >= 1");
  const double target = (static_cast<double>(N) + 1.0) * (1.0 - p / static_cast<double>(T));
  // Products such as 100 * 0.95 land a few ulps above the integer they denote.
  const double k = std::ceil(target - 1e-9 * std::max(1.0, target));
  if (k > static_cast<double>(N)) {
    throw InsufficientSamples("need k = " + std::to_string(static_cast<long long>(k)) +
                              " <= N = " + std::to_string(N) + " samples for level 1 - p/T");
  }
  return static_cast<std::size_t>(std::max(1.0, k));
}

double empirical_quantile(std::vector<double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw Error("order statistic index k=" + std::to_string(k) + " out of range [1, " +
                std::to_string(scores.size()) + "]");
  }
  const auto nth = scores.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(scores.begin(), nth, scores.end());
  return *nth;
}

ConfidenceProduct build_confidence_product(const NoiseBatch& batch, const ScoreSpec& score,
                                           double p) {
  if (batch.empty()) throw InsufficientSamples("empty calibration batch");
  const std::size_t T = batch.front().size();
  const std::size_t N = batch.size();
  const std::size_t k = quantile_index(N, p, static_cast<int>(T));
  ConfidenceProduct conf{score, std::vector<double>(T, 0.0), EmpiricalProvenance{N, k, p}};
  std::vector<double> scores(N);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < N; ++j) {
      if (batch[j].size() != T) throw DimensionError("calibration trajectories differ in length");
      scores[j] = score(t, batch[j][t]);
    }
    conf.radii[t] = empirical_quantile(scores, k);
  }
  return conf;
}

double chi_cdf(int dof, double r) {
  if (r <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * r * r);
}

double chi_quantile(int dof, double level) {
  if (dof < 1) throw OracleError("chi quantile needs dof >= 1");
  if (!(level > 0.0 && level < 1.0)) throw OracleError("quantile level must lie in (0, 1)");
  const double a = 0.5 * dof;

  double lo = 0.0;
  double hi = std::sqrt(static_cast<double>(dof)) + 1.0;
  while (chi_cdf(dof, hi) < level) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw OracleError("chi quantile bracket did not close");
  }

  // Safeguarded Newton on F(r) - level; bisection whenever Newton leaves the bracket.
  double r = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = chi_cdf(dof, r) - level;
    if (f < 0.0) {
      lo = r;
    } else {
      hi = r;
    }
    const double density = boost::math::gamma_p_derivative(a, 0.5 * r * r) * r;
    double next = density > 0.0 ? r - f / density : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - r) <= 1e-14 * std::max(1.0, r) || hi - lo <= 1e-15 * std::max(1.0, r)) {
      return next;
    }
    r = next;
  }
  throw OracleError("chi quantile inversion did not converge");
}

namespace {

std::size_t monte_carlo_index(std::size_t samples, double level) {
  const double target = (static_cast<double>(samples) + 1.0) * level;
  const double k = std::ceil(target - 1e-9 * std::max(1.0, target));
  if (k > static_cast<double>(samples) || k < 1.0) {
    throw OracleError("Monte Carlo oracle has too few samples for the requested level");
  }
  return static_cast<std::size_t>(k);
}

bool has_closed_form(const NoiseModel& noise) { return noise.depends_on_control_only(); }

}  // namespace

double ideal_quantile(const NoiseModel& noise, int t, const Vector& x, const Vector& u_t,
                      double level, const OracleOptions& options) {
  if (!(level > 0.0 && level < 1.0)) throw OracleError("quantile level must lie in (0, 1)");
  const auto n = static_cast<int>(x.size());
  if (const auto* g = noise.as<GaussianIsotropic>()) {
    return g->sigma(u_t) * chi_quantile(n, level);
  }
  if (const auto* b = noise.as<UniformBall>()) {
    return b->radius(u_t) * std::pow(level, 1.0 / static_cast<double>(n));
  }
  const std::size_t k = monte_carlo_index(options.samples, level);
  std::vector<double> norms(options.samples);
  for (std::size_t j = 0; j < options.samples; ++j) {
    Rng rng(derive_seed(options.seed, j));
    norms[j] = noise.sample(t, x, u_t, rng).norm();
  }
  return empirical_quantile(std::move(norms), k);
}

ConfidenceProduct ideal_confidence_product(const SystemModel& model, const NoiseModel& noise,
                                           const ControlTrajectory& u, double p,
                                           const ScoreSpec& score, const OracleOptions& options) {
  check_controls(model, u);
  if (!(p > 0.0 && p < 1.0)) throw OracleError("probability level p must lie in (0, 1)");
  const double level = 1.0 - p / static_cast<double>(model.T);
  const auto T = static_cast<std::size_t>(model.T);
  ConfidenceProduct conf{score, std::vector<double>(T, 0.0), IdealProvenance{p}};

  if (score.is_euclidean() && has_closed_form(noise)) {
    // The law of w(t) depends on u(t) only, so any state along the way will do.
    const StateTrajectory x = rollout_nominal(model, u);
    for (std::size_t t = 0; t < T; ++t) {
      conf.radii[t] = ideal_quantile(noise, static_cast<int>(t), x[t], u[t], level, options);
    }
    return conf;
  }

  // Marginal law of w(t) under u, including the randomness of x(t).
  const std::size_t k = monte_carlo_index(options.samples, level);
  const NoiseBatch batch =
      sample_noise_batch(model, noise, u, options.samples, options.seed, options.workers);
  std::vector<double> scores(batch.size());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < batch.size(); ++j) scores[j] = score(t, batch[j][t]);
    conf.radii[t] = empirical_quantile(scores, k);
  }
  return conf;
}

CoverageAudit coverage_audit(const ConfidenceProduct& conf, const NoiseBatch& fresh) {
  if (fresh.empty()) throw InsufficientSamples("coverage audit needs at least one sample");
  const std::size_t T = conf.radii.size();
  std::vector<std::size_t> hits(T, 0);
  std::size_t joint = 0;
  for (const auto& w : fresh) {
    if (w.size() != T) throw DimensionError("audit trajectory length differs from T");
    bool all = true;
    for (std::size_t t = 0; t < T; ++t) {
      if (conf.score(t, w[t]) <= conf.radii[t]) {
        ++hits[t];
      } else {
        all = false;
      }
    }
    if (all) ++joint;
  }
  CoverageAudit audit;
  const double M = static_cast<double>(fresh.size());
  audit.per_step.reserve(T);
  for (const auto h : hits) audit.per_step.push_back(static_cast<double>(h) / M);
  audit.joint = static_cast<double>(joint) / M;
  return audit;
}

}  // namespace perfctl
