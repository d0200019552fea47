#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "perfctl/errors.hpp"
#include "perfctl/rng.hpp"

namespace perfctl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sequence of equally sized vectors indexed by time. The tag keeps state,
/// control and noise trajectories from being mixed up.
template <class Tag>
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<Vector> steps) : steps_(std::move(steps)) {}

  /// `length` steps of zero vectors of dimension `dim`.
  static Trajectory zeros(std::size_t length, Eigen::Index dim) {
    return Trajectory(std::vector<Vector>(length, Vector::Zero(dim)));
  }

  /// Splits a stacked vector into consecutive chunks of size `dim`.
  static Trajectory from_flat(const Vector& flat, Eigen::Index dim) {
    if (dim <= 0 || flat.size() % dim != 0) {
      throw DimensionError("flat vector length is not a multiple of the step dimension");
    }
    std::vector<Vector> steps;
    steps.reserve(static_cast<std::size_t>(flat.size() / dim));
    for (Eigen::Index i = 0; i < flat.size(); i += dim) steps.emplace_back(flat.segment(i, dim));
    return Trajectory(std::move(steps));
  }

  Vector flat() const {
    Eigen::Index total = 0;
    for (const auto& s : steps_) total += s.size();
    Vector out(total);
    Eigen::Index offset = 0;
    for (const auto& s : steps_) {
      out.segment(offset, s.size()) = s;
      offset += s.size();
    }
    return out;
  }

  std::size_t size() const noexcept { return steps_.size(); }
  bool empty() const noexcept { return steps_.empty(); }
  Eigen::Index dim() const noexcept { return steps_.empty() ? 0 : steps_.front().size(); }

  const Vector& operator[](std::size_t t) const { return steps_[t]; }
  Vector& operator[](std::size_t t) { return steps_[t]; }

  const std::vector<Vector>& steps() const noexcept { return steps_; }
  auto begin() const { return steps_.begin(); }
  auto end() const { return steps_.end(); }

  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t t = 0; t < a.size(); ++t) {
      if (a[t].size() != b[t].size() || a[t] != b[t]) return false;
    }
    return true;
  }

 private:
  std::vector<Vector> steps_;
};

using StateTrajectory = Trajectory<struct StateTag>;
using ControlTrajectory = Trajectory<struct ControlTag>;
using NoiseTrajectory = Trajectory<struct NoiseTag>;

/// Euclidean distance between two stacked trajectories.
template <class Tag>
double distance(const Trajectory<Tag>& a, const Trajectory<Tag>& b) {
  return (a.flat() - b.flat()).norm();
}

// ---------------------------------------------------------------------------
// Nominal dynamics x(t+1) = f(t, x(t), u(t))

struct LinearTimeVarying {
  std::vector<Matrix> A;  // n x n, one per step
  std::vector<Matrix> B;  // n x m
  std::vector<Vector> c;  // n
};

struct GenericDynamics {
  std::function<Vector(int t, const Vector& x, const Vector& u)> step;
};

class NominalDynamics {
 public:
  NominalDynamics() = default;
  NominalDynamics(LinearTimeVarying ltv) : kind_(std::move(ltv)) {}
  NominalDynamics(GenericDynamics generic) : kind_(std::move(generic)) {}

  Vector operator()(int t, const Vector& x, const Vector& u) const;

  const LinearTimeVarying* linear() const noexcept {
    return std::get_if<LinearTimeVarying>(&kind_);
  }
  const GenericDynamics* generic() const noexcept { return std::get_if<GenericDynamics>(&kind_); }

 private:
  std::variant<LinearTimeVarying, GenericDynamics> kind_;
};

/// Per-step axis-aligned control box U_t = [lower_t, upper_t].
struct ControlBox {
  std::vector<Vector> lower;
  std::vector<Vector> upper;

  static ControlBox uniform(int T, const Vector& lower, const Vector& upper) {
    return {std::vector<Vector>(static_cast<std::size_t>(T), lower),
            std::vector<Vector>(static_cast<std::size_t>(T), upper)};
  }

  ControlTrajectory project(const ControlTrajectory& u) const;
  bool contains(const ControlTrajectory& u, double tol = 0.0) const;
  Vector flat_lower() const;
  Vector flat_upper() const;
};

struct SystemModel {
  int n = 0;
  int m = 0;
  int T = 0;
  Vector x0;
  NominalDynamics nominal;
  ControlBox control_box;

  /// Convenience constructor for the common time-invariant linear case.
  static SystemModel linear_time_invariant(const Matrix& A, const Matrix& B, const Vector& x0,
                                           int T, const Vector& u_lower, const Vector& u_upper,
                                           const Vector& c = {});
};

// ---------------------------------------------------------------------------
// Loss J(x, u) = terminal(x(T)) + sum_t stage(t, x(t), u(t)) + (reg / 2) |u|^2

/// J = x(T)' P x(T) + sum_t x(t)' Q_t x(t) + u(t)' R_t u(t).
struct QuadraticLoss {
  Matrix P;
  std::vector<Matrix> Q;
  std::vector<Matrix> R;
};

struct GenericLoss {
  std::function<double(const Vector& xT)> terminal;
  std::function<double(int t, const Vector& x, const Vector& u)> stage;
};

struct LossSpec {
  std::variant<QuadraticLoss, GenericLoss> kind;
  double reg = 0.0;

  const QuadraticLoss* quadratic() const noexcept { return std::get_if<QuadraticLoss>(&kind); }
  const GenericLoss* generic() const noexcept { return std::get_if<GenericLoss>(&kind); }
};

// ---------------------------------------------------------------------------
// Ground-truth decision-dependent noise law w(t) ~ D(x(t), u(t))

/// w ~ N(0, sigma^2 I), sigma = max(sigma_min, sigma0 + sigma1 |u(t)|).
struct GaussianIsotropic {
  double sigma0 = 1.0;
  double sigma1 = 0.0;
  double sigma_min = 1e-12;

  double sigma(const Vector& u) const;
};

/// w uniform in the ball of radius rho0 + rho1 |u(t)|.
struct UniformBall {
  double rho0 = 1.0;
  double rho1 = 0.0;

  double radius(const Vector& u) const { return rho0 + rho1 * u.norm(); }
};

/// w ~ N(0, Sigma(t, x, u)). Without a factory, Sigma = cov0 + |u(t)| cov1.
struct GaussianAnisotropic {
  Matrix cov0;
  Matrix cov1;
  std::function<Matrix(int t, const Vector& x, const Vector& u)> factory;

  Matrix covariance(int t, const Vector& x, const Vector& u) const;
};

struct CustomNoise {
  std::function<Vector(int t, const Vector& x, const Vector& u, Rng& rng)> sampler;
};

class NoiseModel {
 public:
  using Family = std::variant<GaussianIsotropic, UniformBall, GaussianAnisotropic, CustomNoise>;

  NoiseModel() = default;
  NoiseModel(Family family) : family_(std::move(family)) {}

  /// One draw of w(t) given (x(t), u(t)). Throws SamplingError on failure.
  Vector sample(int t, const Vector& x, const Vector& u, Rng& rng) const;

  /// True when the law of w(t) is determined by u(t) alone (not by x(t)).
  bool depends_on_control_only() const noexcept;

  const Family& family() const noexcept { return family_; }
  template <class F>
  const F* as() const noexcept {
    return std::get_if<F>(&family_);
  }

 private:
  Family family_;
};

// ---------------------------------------------------------------------------

struct ValidationReport {
  std::vector<std::string> violations;
  /// Strong-convexity constant of L in u (LTV + quadratic only).
  std::optional<double> lambda;
  /// Smoothness constant of L in w (LTV + quadratic only).
  std::optional<double> beta;

  bool valid() const noexcept { return violations.empty(); }
};

/// Checks model and loss invariants; never throws.
ValidationReport validate_model(const SystemModel& model, const LossSpec& loss);

/// Parameter checks for the noise family (positivity of scales etc.).
std::vector<std::string> validate_noise(const NoiseModel& noise, int n);

/// Throws DimensionError unless `u` has T steps of dimension m.
void check_controls(const SystemModel& model, const ControlTrajectory& u);
void check_noise(const SystemModel& model, const NoiseTrajectory& w);

}  // namespace perfctl
