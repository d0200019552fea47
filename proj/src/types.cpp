#include "perfctl/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "perfctl/quadratic_form.hpp"

namespace perfctl {

Vector NominalDynamics::operator()(int t, const Vector& x, const Vector& u) const {
  if (const auto* ltv = linear()) {
    const auto k = static_cast<std::size_t>(t);
    Vector next = ltv->A[k] * x + ltv->B[k] * u;
    if (k < ltv->c.size() && ltv->c[k].size() > 0) next += ltv->c[k];
    return next;
  }
  return std::get<GenericDynamics>(kind_).step(t, x, u);
}

ControlTrajectory ControlBox::project(const ControlTrajectory& u) const {
  ControlTrajectory out = u;
  for (std::size_t t = 0; t < u.size(); ++t) {
    out[t] = u[t].cwiseMax(lower[t]).cwiseMin(upper[t]);
  }
  return out;
}

bool ControlBox::contains(const ControlTrajectory& u, double tol) const {
  if (u.size() != lower.size()) return false;
  for (std::size_t t = 0; t < u.size(); ++t) {
    if (((u[t] - lower[t]).array() < -tol).any()) return false;
    if (((upper[t] - u[t]).array() < -tol).any()) return false;
  }
  return true;
}

Vector ControlBox::flat_lower() const { return ControlTrajectory(lower).flat(); }
Vector ControlBox::flat_upper() const { return ControlTrajectory(upper).flat(); }

SystemModel SystemModel::linear_time_invariant(const Matrix& A, const Matrix& B, const Vector& x0,
                                               int T, const Vector& u_lower,
                                               const Vector& u_upper, const Vector& c) {
  SystemModel model;
  model.n = static_cast<int>(A.rows());
  model.m = static_cast<int>(B.cols());
  model.T = T;
  model.x0 = x0;
  const auto steps = static_cast<std::size_t>(std::max(T, 0));
  const Vector offset = c.size() > 0 ? c : Vector::Zero(A.rows());
  model.nominal = LinearTimeVarying{std::vector<Matrix>(steps, A), std::vector<Matrix>(steps, B),
                                    std::vector<Vector>(steps, offset)};
  model.control_box = ControlBox::uniform(T, u_lower, u_upper);
  return model;
}

double GaussianIsotropic::sigma(const Vector& u) const {
  return std::max(sigma_min, sigma0 + sigma1 * u.norm());
}

Matrix GaussianAnisotropic::covariance(int t, const Vector& x, const Vector& u) const {
  if (factory) return factory(t, x, u);
  Matrix cov = cov0;
  if (cov1.size() > 0) cov += u.norm() * cov1;
  return cov;
}

Vector NoiseModel::sample(int t, const Vector& x, const Vector& u, Rng& rng) const {
  const auto n = x.size();
  return std::visit(
      [&](const auto& family) -> Vector {
        using F = std::decay_t<decltype(family)>;
        if constexpr (std::is_same_v<F, GaussianIsotropic>) {
          return family.sigma(u) * rng.normal_vector(n);
        } else if constexpr (std::is_same_v<F, UniformBall>) {
          const double radius = family.radius(u);
          const Vector direction = rng.unit_vector(n);
          return radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n)) * direction;
        } else if constexpr (std::is_same_v<F, GaussianAnisotropic>) {
          const Matrix cov = family.covariance(t, x, u);
          if (cov.rows() != n || cov.cols() != n) {
            throw SamplingError("anisotropic covariance has wrong dimensions");
          }
          Eigen::LLT<Matrix> llt(0.5 * (cov + cov.transpose()));
          if (llt.info() != Eigen::Success) {
            throw SamplingError("anisotropic covariance is not positive definite at t=" +
                                std::to_string(t));
          }
          return llt.matrixL() * rng.normal_vector(n);
        } else {
          if (!family.sampler) throw SamplingError("custom noise family has no sampler");
          Vector w;
          try {
            w = family.sampler(t, x, u, rng);
          } catch (const SamplingError&) {
            throw;
          } catch (const std::exception& e) {
            throw SamplingError(std::string("custom sampler failed: ") + e.what());
          }
          if (w.size() != n) throw SamplingError("custom sampler returned wrong dimension");
          if (!w.allFinite()) throw SamplingError("custom sampler returned non-finite noise");
          return w;
        }
      },
      family_);
}

bool NoiseModel::depends_on_control_only() const noexcept {
  return std::holds_alternative<GaussianIsotropic>(family_) ||
         std::holds_alternative<UniformBall>(family_);
}

namespace {

double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

std::string at(const std::string& what, std::size_t t) {
  return what + "[" + std::to_string(t) + "]";
}

}  // namespace

ValidationReport validate_model(const SystemModel& model, const LossSpec& loss) {
  ValidationReport report;
  auto& v = report.violations;
  if (model.n < 1) v.emplace_back("n >= 1 violated");
  if (model.m < 1) v.emplace_back("m >= 1 violated");
  if (model.T < 1) v.emplace_back("T >= 1 violated");
  if (!v.empty()) return report;

  const auto T = static_cast<std::size_t>(model.T);
  if (model.x0.size() != model.n) v.emplace_back("x0 length differs from n");

  const auto& box = model.control_box;
  if (box.lower.size() != T || box.upper.size() != T) {
    v.emplace_back("control box must have T entries");
  } else {
    for (std::size_t t = 0; t < T; ++t) {
      if (box.lower[t].size() != model.m || box.upper[t].size() != model.m) {
        v.emplace_back(at("control box dimension mismatch at t", t));
        continue;
      }
      for (int j = 0; j < model.m; ++j) {
        if (!(box.lower[t][j] <= box.upper[t][j])) {
          std::ostringstream msg;
          msg << "empty control box at t=" << t << ", coordinate " << j;
          v.push_back(msg.str());
        }
      }
    }
  }

  if (const auto* ltv = model.nominal.linear()) {
    if (ltv->A.size() != T || ltv->B.size() != T || ltv->c.size() != T) {
      v.emplace_back("linear dynamics must have exactly T (A, B, c) triples");
    } else {
      for (std::size_t t = 0; t < T; ++t) {
        if (ltv->A[t].rows() != model.n || ltv->A[t].cols() != model.n) {
          v.push_back(at("A", t) + " is not n x n");
        }
        if (ltv->B[t].rows() != model.n || ltv->B[t].cols() != model.m) {
          v.push_back(at("B", t) + " is not n x m");
        }
        if (ltv->c[t].size() != model.n) v.push_back(at("c", t) + " has length != n");
      }
    }
  } else if (!model.nominal.generic() || !model.nominal.generic()->step) {
    v.emplace_back("generic dynamics has no evaluation callback");
  }

  if (loss.reg < 0.0) v.emplace_back("regularization must be nonnegative");
  if (const auto* q = loss.quadratic()) {
    if (q->P.rows() != model.n || q->P.cols() != model.n) {
      v.emplace_back("P is not n x n");
    } else if (min_eigenvalue(q->P) < -1e-12) {
      v.emplace_back("P is not positive semidefinite");
    }
    if (q->Q.size() != T || q->R.size() != T) {
      v.emplace_back("quadratic loss needs T stage matrices Q_t and R_t");
    } else {
      for (std::size_t t = 0; t < T; ++t) {
        if (q->Q[t].rows() != model.n || q->Q[t].cols() != model.n) {
          v.push_back(at("Q", t) + " is not n x n");
        } else if (min_eigenvalue(q->Q[t]) < -1e-12) {
          v.push_back(at("Q", t) + " is not positive semidefinite");
        }
        if (q->R[t].rows() != model.m || q->R[t].cols() != model.m) {
          v.push_back(at("R", t) + " is not m x m");
        } else if (min_eigenvalue(q->R[t]) <= 0.0) {
          v.push_back(at("R", t) + " is not positive definite");
        }
      }
    }
  } else {
    const auto* g = loss.generic();
    if (!g || !g->terminal || !g->stage) v.emplace_back("generic loss is missing callbacks");
  }

  if (v.empty() && has_quadratic_form(model, loss)) {
    const auto form = build_quadratic_form(model, loss);
    report.lambda = form.strong_convexity();
    report.beta = form.smoothness_in_w();
    if (*report.lambda <= 0.0) v.emplace_back("loss is not strongly convex in u");
  }
  return report;
}

std::vector<std::string> validate_noise(const NoiseModel& noise, int n) {
  std::vector<std::string> v;
  if (const auto* g = noise.as<GaussianIsotropic>()) {
    if (!(g->sigma0 > 0.0)) v.emplace_back("sigma0 > 0 violated");
    if (!(g->sigma1 >= 0.0)) v.emplace_back("sigma1 >= 0 violated");
    if (!(g->sigma_min > 0.0)) v.emplace_back("sigma_min > 0 violated");
  } else if (const auto* b = noise.as<UniformBall>()) {
    if (!(b->rho0 > 0.0)) v.emplace_back("rho0 > 0 violated");
    if (!(b->rho1 >= 0.0)) v.emplace_back("rho1 >= 0 violated");
  } else if (const auto* a = noise.as<GaussianAnisotropic>()) {
    if (!a->factory) {
      if (a->cov0.rows() != n || a->cov0.cols() != n) {
        v.emplace_back("cov0 is not n x n");
      } else if (min_eigenvalue(a->cov0) <= 0.0) {
        v.emplace_back("cov0 is not positive definite");
      }
      if (a->cov1.size() > 0 &&
          (a->cov1.rows() != n || a->cov1.cols() != n || min_eigenvalue(a->cov1) < -1e-12)) {
        v.emplace_back("cov1 must be n x n positive semidefinite");
      }
    }
  } else if (const auto* c = noise.as<CustomNoise>()) {
    if (!c->sampler) v.emplace_back("custom noise has no sampler");
  }
  return v;
}

void check_controls(const SystemModel& model, const ControlTrajectory& u) {
  if (u.size() != static_cast<std::size_t>(model.T)) {
    throw DimensionError("control trajectory has " + std::to_string(u.size()) +
                         " steps, expected T=" + std::to_string(model.T));
  }
  for (const auto& ut : u) {
    if (ut.size() != model.m) throw DimensionError("control vector has wrong dimension");
  }
}

void check_noise(const SystemModel& model, const NoiseTrajectory& w) {
  if (w.size() != static_cast<std::size_t>(model.T)) {
    throw DimensionError("noise trajectory has " + std::to_string(w.size()) +
                         " steps, expected T=" + std::to_string(model.T));
  }
  for (const auto& wt : w) {
    if (wt.size() != model.n) throw DimensionError("noise vector has wrong dimension");
  }
}

}  // namespace perfctl
