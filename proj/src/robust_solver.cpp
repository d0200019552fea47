#include "perfctl/robust_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "perfctl/dynamics.hpp"
#include "perfctl/quadratic_form.hpp"

namespace perfctl {

namespace {

Matrix symmetric(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double quadratic_loss(const QuadraticLoss& q, const StateTrajectory& x,
                      const ControlTrajectory& u) {
  double J = x[u.size()].dot(q.P * x[u.size()]);
  for (std::size_t t = 0; t < u.size(); ++t) {
    J += x[t].dot(q.Q[t] * x[t]) + u[t].dot(q.R[t] * u[t]);
  }
  return J;
}

double generic_loss(const GenericLoss& g, const StateTrajectory& x, const ControlTrajectory& u) {
  double J = g.terminal(x[u.size()]);
  for (std::size_t t = 0; t < u.size(); ++t) J += g.stage(static_cast<int>(t), x[t], u[t]);
  return J;
}

}  // namespace

double evaluate_loss(const SystemModel& model, const LossSpec& loss, const ControlTrajectory& u,
                     const NoiseTrajectory& w) {
  const StateTrajectory x = rollout_with_noise(model, u, w);
  double J = 0.0;
  if (const auto* q = loss.quadratic()) {
    J = quadratic_loss(*q, x, u);
  } else {
    J = generic_loss(*loss.generic(), x, u);
  }
  if (loss.reg != 0.0) J += 0.5 * loss.reg * u.flat().squaredNorm();
  return J;
}

LossGradients loss_gradients(const SystemModel& model, const LossSpec& loss,
                             const ControlTrajectory& u, const NoiseTrajectory& w) {
  const auto* ltv = model.nominal.linear();
  const auto* quad = loss.quadratic();
  const Eigen::Index n = model.n;
  const Eigen::Index m = model.m;
  const auto T = static_cast<std::size_t>(model.T);
  LossGradients grads{Vector::Zero(m * model.T), Vector::Zero(n * model.T)};

  if (ltv && quad) {
    const StateTrajectory x = rollout_with_noise(model, u, w);
    Vector costate = 2.0 * symmetric(quad->P) * x[T];
    for (std::size_t k = T; k-- > 0;) {
      const auto t = static_cast<Eigen::Index>(k);
      grads.grad_w.segment(t * n, n) = costate;
      grads.grad_u.segment(t * m, m) =
          ltv->B[k].transpose() * costate + 2.0 * symmetric(quad->R[k]) * u[k] + loss.reg * u[k];
      costate = 2.0 * symmetric(quad->Q[k]) * x[k] + ltv->A[k].transpose() * costate;
    }
    return grads;
  }

  const Vector uf = u.flat();
  const Vector wf = w.flat();
  auto L = [&](const Vector& uu, const Vector& ww) {
    return evaluate_loss(model, loss, ControlTrajectory::from_flat(uu, m),
                         NoiseTrajectory::from_flat(ww, n));
  };
  for (Eigen::Index i = 0; i < uf.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(uf[i]));
    Vector up = uf, dn = uf;
    up[i] += h;
    dn[i] -= h;
    grads.grad_u[i] = (L(up, wf) - L(dn, wf)) / (up[i] - dn[i]);
  }
  for (Eigen::Index i = 0; i < wf.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(wf[i]));
    Vector up = wf, dn = wf;
    up[i] += h;
    dn[i] -= h;
    grads.grad_w[i] = (L(uf, up) - L(uf, dn)) / (up[i] - dn[i]);
  }
  return grads;
}

namespace {

/// Exact maximizer of 1/2 y'K y + b'y over the ball |y| <= r for a fixed K.
/// Solves the equivalent trust-region problem min 1/2 y'G y + g'y with
/// G = -K, g = -b in the eigenbasis of K.
class BallMaximizer {
 public:
  BallMaximizer() = default;
  explicit BallMaximizer(const Matrix& K) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric(K));
    V_ = eig.eigenvectors();
    d_ = -eig.eigenvalues();  // eigenvalues of G, descending
  }

  Vector solve(const Vector& b, double r) const {
    const Eigen::Index dim = d_.size();
    if (r <= 0.0) return Vector::Zero(dim);
    const Vector gamma = -(V_.transpose() * b);
    const double dmin = d_.minCoeff();
    const double gnorm = gamma.norm();

    if (dmin > 0.0) {
      const Vector interior = -(gamma.array() / d_.array()).matrix();
      if (interior.norm() <= r) return V_ * interior;
    }

    const double mu_lo = std::max(0.0, -dmin);
    const double scale = std::max({1.0, std::abs(dmin), d_.cwiseAbs().maxCoeff()});
    auto y_at = [&](double mu) {
      Vector y(dim);
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double denom = d_[i] + mu;
        y[i] = denom > 0.0 ? -gamma[i] / denom : 0.0;
      }
      return y;
    };

    // Hard case: no gradient component along the leftmost eigenspace and the
    // remaining components leave room on the sphere.
    const double tie = 1e-12 * scale;
    double hard_gamma = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (d_[i] - dmin <= tie) hard_gamma = std::max(hard_gamma, std::abs(gamma[i]));
    }
    if (hard_gamma <= 1e-14 * std::max(1.0, gnorm)) {
      Vector y(dim);
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double denom = d_[i] + mu_lo;
        y[i] = (d_[i] - dmin <= tie) ? 0.0 : -gamma[i] / denom;
      }
      const double rest = y.squaredNorm();
      if (rest <= r * r) {
        Eigen::Index leftmost = 0;
        for (Eigen::Index i = 0; i < dim; ++i) {
          if (d_[i] - dmin <= tie) leftmost = i;
        }
        y[leftmost] = std::sqrt(r * r - rest);
        return V_ * y;
      }
    }

    // Secular equation |y(mu)| = r, Newton on 1/|y| - 1/r with bisection guard.
    double lo = mu_lo;
    double hi = mu_lo + gnorm / r + 1e-300;
    double mu = hi;
    for (int iter = 0; iter < 300; ++iter) {
      double norm2 = 0.0;
      double slope = 0.0;
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double denom = d_[i] + mu;
        if (denom <= 0.0) continue;
        const double term = gamma[i] * gamma[i] / (denom * denom);
        norm2 += term;
        slope += term / denom;
      }
      const double norm = std::sqrt(norm2);
      if (norm > r) {
        lo = mu;
      } else {
        hi = mu;
      }
      if (std::abs(norm - r) <= 1e-15 * r) break;
      double next = mu;
      if (norm > 0.0 && slope > 0.0) {
        const double phi = 1.0 / norm - 1.0 / r;
        const double dphi = slope / (norm2 * norm);
        next = mu - phi / dphi;
      }
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (hi - lo <= 1e-16 * std::max(1.0, hi)) {
        mu = next;
        break;
      }
      mu = next;
    }
    Vector y = V_ * y_at(mu);
    const double norm = y.norm();
    if (norm > 0.0) y *= r / norm;  // land exactly on the sphere
    return y;
  }

 private:
  Matrix V_;
  Vector d_;
};

double finite_or_throw(double value) {
  if (!std::isfinite(value)) throw Error("non-finite loss encountered");
  return value;
}

/// Inner problem in whitened coordinates y with w(t) = M_t y(t) and the
/// constraint |y(t)| <= r_t.
struct InnerProblem {
  const SystemModel& model;
  const LossSpec& loss;
  const ConfidenceProduct& conf;
  const ControlTrajectory& v;
  std::vector<Matrix> whiten;  // M_t = L_t^{-T}
  Eigen::Index n;
  std::size_t T;

  InnerProblem(const SystemModel& model_, const LossSpec& loss_, const ConfidenceProduct& conf_,
               const ControlTrajectory& v_)
      : model(model_), loss(loss_), conf(conf_), v(v_), n(model_.n),
        T(static_cast<std::size_t>(model_.T)) {
    whiten.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      const Matrix L = conf.score.cholesky_factor(t, n);
      whiten.push_back(L.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n)));
    }
  }

  Vector to_w(const Vector& y) const {
    Vector w(y.size());
    for (std::size_t t = 0; t < T; ++t) {
      const auto o = static_cast<Eigen::Index>(t) * n;
      w.segment(o, n) = whiten[t] * y.segment(o, n);
    }
    return w;
  }

  /// S' x for the block-diagonal whitening S.
  Vector to_y_gradient(const Vector& grad_w) const {
    Vector g(grad_w.size());
    for (std::size_t t = 0; t < T; ++t) {
      const auto o = static_cast<Eigen::Index>(t) * n;
      g.segment(o, n) = whiten[t].transpose() * grad_w.segment(o, n);
    }
    return g;
  }

  void project(Vector& y) const {
    for (std::size_t t = 0; t < T; ++t) {
      const auto o = static_cast<Eigen::Index>(t) * n;
      const double norm = y.segment(o, n).norm();
      const double r = conf.radii[t];
      if (norm > r) y.segment(o, n) *= (norm > 0.0 ? r / norm : 0.0);
    }
  }

  double loss_at(const Vector& y) const {
    return finite_or_throw(evaluate_loss(model, loss, v, NoiseTrajectory::from_flat(to_w(y), n)));
  }

  /// Deterministic starting points: the maximizer of the linearization at 0,
  /// its negation, single-block sign flips of both, then seeded directions.
  std::vector<Vector> starts(const Vector& linear, int restarts, std::uint64_t seed) const {
    const auto count = static_cast<std::size_t>(std::max(1, restarts));
    const auto dim = static_cast<Eigen::Index>(T) * n;
    Vector base(dim);
    for (std::size_t t = 0; t < T; ++t) {
      const auto o = static_cast<Eigen::Index>(t) * n;
      const Vector seg = linear.segment(o, n);
      const double norm = seg.norm();
      Vector dir = Vector::Zero(n);
      if (norm > 0.0) {
        dir = seg / norm;
      } else {
        dir[0] = 1.0;
      }
      base.segment(o, n) = conf.radii[t] * dir;
    }
    std::vector<Vector> out;
    out.push_back(base);
    out.push_back(-base);
    for (std::size_t t = 0; t < T && out.size() < count; ++t) {
      for (double sign : {1.0, -1.0}) {
        Vector s = sign * base;
        const auto o = static_cast<Eigen::Index>(t) * n;
        s.segment(o, n) *= -1.0;
        out.push_back(s);
      }
    }
    for (std::uint64_t k = 0; out.size() < count; ++k) {
      Rng rng(derive_seed(seed, k));
      Vector s(dim);
      for (std::size_t t = 0; t < T; ++t) {
        s.segment(static_cast<Eigen::Index>(t) * n, n) = conf.radii[t] * rng.unit_vector(n);
      }
      out.push_back(s);
    }
    out.resize(std::min(out.size(), count));
    return out;
  }
};

/// Block-coordinate ascent on 1/2 y'K y + c'y over a product of balls.
struct BlockAscent {
  const Matrix& K;
  const Vector& c;
  const std::vector<double>& radii;
  std::vector<BallMaximizer> blocks;
  Eigen::Index n;

  BlockAscent(const Matrix& K_, const Vector& c_, const std::vector<double>& radii_,
              Eigen::Index n_)
      : K(K_), c(c_), radii(radii_), n(n_) {
    blocks.reserve(radii.size());
    for (std::size_t t = 0; t < radii.size(); ++t) {
      const auto o = static_cast<Eigen::Index>(t) * n;
      blocks.emplace_back(K.block(o, o, n, n));
    }
  }

  double value(const Vector& y) const { return 0.5 * y.dot(K * y) + c.dot(y); }

  Vector run(Vector y, const InnerConfig& cfg) const {
    Vector Ky = K * y;
    double current = 0.5 * y.dot(Ky) + c.dot(y);
    double rmax = 0.0;
    for (double r : radii) rmax = std::max(rmax, r);
    for (int sweep = 0; sweep < cfg.block_sweeps_max; ++sweep) {
      double moved = 0.0;
      for (std::size_t t = 0; t < radii.size(); ++t) {
        const auto o = static_cast<Eigen::Index>(t) * n;
        const Vector old = y.segment(o, n);
        const Vector b = c.segment(o, n) + Ky.segment(o, n) - K.block(o, o, n, n) * old;
        const Vector fresh = blocks[t].solve(b, radii[t]);
        const Vector delta = fresh - old;
        // Keep the old block unless the exact block solve strictly improves it.
        const double gain = delta.dot(b) + 0.5 * (fresh.dot(K.block(o, o, n, n) * fresh) -
                                                  old.dot(K.block(o, o, n, n) * old));
        if (gain <= 0.0) continue;
        y.segment(o, n) = fresh;
        Ky.noalias() += K.middleCols(o, n) * delta;
        moved = std::max(moved, delta.norm());
      }
      const double next = 0.5 * y.dot(Ky) + c.dot(y);
      const double gain = next - current;
      current = next;
      if (gain <= cfg.block_tol * (1.0 + std::abs(current)) &&
          moved <= 1e-13 * (1.0 + rmax)) {
        break;
      }
    }
    return y;
  }
};

/// Projected gradient ascent used when no explicit quadratic form exists.
Vector projected_ascent(const InnerProblem& problem, Vector y, const InnerConfig& cfg) {
  problem.project(y);
  double f = problem.loss_at(y);
  double step = 1.0;
  double rmax = 0.0;
  for (double r : problem.conf.radii) rmax = std::max(rmax, r);
  const int iters = std::max(1, cfg.block_sweeps_max) * 5;
  for (int it = 0; it < iters; ++it) {
    const auto grads = loss_gradients(problem.model, problem.loss, problem.v,
                                      NoiseTrajectory::from_flat(problem.to_w(y), problem.n));
    const Vector g = problem.to_y_gradient(grads.grad_w);
    bool accepted = false;
    Vector next;
    double f_next = f;
    for (int halving = 0; halving < 60; ++halving) {
      next = y + step * g;
      problem.project(next);
      f_next = problem.loss_at(next);
      if (f_next >= f + 1e-4 * g.dot(next - y)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double moved = (next - y).norm();
    const double gain = f_next - f;
    y = std::move(next);
    f = f_next;
    step *= 2.0;
    if (moved <= 1e-12 * (1.0 + rmax) || gain <= cfg.block_tol * (1.0 + std::abs(f))) break;
  }
  return y;
}

std::vector<LocalMaximum> collect_maxima(std::vector<std::pair<Vector, double>> candidates,
                                         const InnerProblem& problem, double scale) {
  // Stable so that equal values keep the lowest start index first.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<Vector> kept_y;
  std::vector<LocalMaximum> out;
  for (auto& [y, value] : candidates) {
    bool duplicate = false;
    for (const auto& k : kept_y) {
      if ((k - y).norm() <= 1e-8 * scale) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    kept_y.push_back(y);
    out.push_back({NoiseTrajectory::from_flat(problem.to_w(y), problem.n), value});
  }
  return out;
}

InnerSolution solve_inner(const SystemModel& model, const LossSpec& loss,
                          const ConfidenceProduct& conf, const ControlTrajectory& v,
                          const SolverConfig& cfg, const QuadraticForm* form) {
  check_controls(model, v);
  if (conf.radii.size() != static_cast<std::size_t>(model.T)) {
    throw DimensionError("confidence product length differs from T");
  }
  double rmax = 0.0;
  for (double r : conf.radii) {
    if (!std::isfinite(r) || r < 0.0) throw Error("confidence radii must be finite and >= 0");
    rmax = std::max(rmax, r);
  }
  if (!conf.score.is_euclidean() && conf.score.matrices().size() != conf.radii.size()) {
    throw DimensionError("score matrices must have one entry per step");
  }

  const NoiseTrajectory zero = NoiseTrajectory::zeros(conf.radii.size(), model.n);
  if (rmax == 0.0) {
    const double value = finite_or_throw(evaluate_loss(model, loss, v, zero));
    return {zero, value, ExactBlock{}, {{zero, value}}};
  }

  const InnerProblem problem(model, loss, conf, v);
  const Vector vf = v.flat();
  std::vector<std::pair<Vector, double>> results;

  if (form) {
    // L(S y, v) = 1/2 y'K y + c'y + const(v)
    Matrix S = Matrix::Zero(form->Hww.rows(), form->Hww.cols());
    for (std::size_t t = 0; t < problem.T; ++t) {
      const auto o = static_cast<Eigen::Index>(t) * model.n;
      S.block(o, o, model.n, model.n) = problem.whiten[t];
    }
    const Matrix K = symmetric(S.transpose() * form->Hww * S);
    const Vector c = S.transpose() * (form->Huw.transpose() * vf + form->gw);
    const BlockAscent ascent(K, c, conf.radii, model.n);
    const double offset = 0.5 * vf.dot(form->Huu * vf) + form->gu.dot(vf) + form->constant;
    for (const auto& start : problem.starts(c, cfg.inner.restarts, cfg.seed)) {
      Vector y = ascent.run(start, cfg.inner);
      const double value = finite_or_throw(ascent.value(y) + offset);
      results.emplace_back(std::move(y), value);
    }
  } else {
    const auto grads = loss_gradients(model, loss, v, zero);
    const Vector linear = problem.to_y_gradient(grads.grad_w);
    for (const auto& start : problem.starts(linear, cfg.inner.restarts, cfg.seed)) {
      Vector y = projected_ascent(problem, start, cfg.inner);
      const double value = problem.loss_at(y);
      results.emplace_back(std::move(y), value);
    }
  }

  int best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].second > results[static_cast<std::size_t>(best)].second) {
      best = static_cast<int>(i);
    }
  }
  const auto restarts = static_cast<int>(results.size());
  InnerSolution sol;
  sol.w_star = NoiseTrajectory::from_flat(problem.to_w(results[static_cast<std::size_t>(best)].first),
                                          model.n);
  sol.value = finite_or_throw(evaluate_loss(model, loss, v, sol.w_star));
  const bool single_exact_block = form != nullptr && problem.T == 1;
  if (single_exact_block) {
    sol.certificate = ExactBlock{};
  } else {
    sol.certificate = MultiStart{restarts, best};
  }
  sol.local_maxima = collect_maxima(std::move(results), problem, 1.0 + rmax);
  return sol;
}

/// One smooth piece u -> L(u, w_k(u)) of the max-function, linearized at
/// the current control: offset = its value minus the max, slope = Danskin
/// gradient.
struct Piece {
  double offset;
  Vector slope;
};

/// Prox-linear step for the max of the pieces over the box:
///   min_d max_k (offset_k + slope_k'd) + prox/2 |d|^2,  dlo <= d <= dhi,
/// solved through its dual over the simplex by accelerated projected ascent.
/// Returns d and the model value max_k (offset_k + slope_k'd).
std::pair<Vector, double> prox_linear_step(const std::vector<Piece>& pieces, double prox,
                                           const Vector& dlo, const Vector& dhi) {
  const auto k = static_cast<Eigen::Index>(pieces.size());
  const Eigen::Index dim = dlo.size();
  Matrix G(dim, k);
  Vector phi(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    G.col(j) = pieces[static_cast<std::size_t>(j)].slope;
    phi[j] = pieces[static_cast<std::size_t>(j)].offset;
  }
  auto primal = [&](const Vector& mu) -> Vector {
    return (-(G * mu) / prox).cwiseMax(dlo).cwiseMin(dhi);
  };
  auto model = [&](const Vector& d) { return (phi + G.transpose() * d).maxCoeff(); };

  if (k == 1) {
    const Vector d = primal(Vector::Ones(1));
    return {d, model(d)};
  }

  auto simplex_projection = [k](const Vector& z) -> Vector {
    std::vector<double> sorted(z.data(), z.data() + k);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      cumulative += sorted[static_cast<std::size_t>(j)];
      const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
      if (sorted[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
    }
    return (z.array() - theta).max(0.0).matrix();
  };
  auto dual = [&](const Vector& mu) {
    const Vector d = primal(mu);
    return mu.dot(phi + G.transpose() * d) + 0.5 * prox * d.squaredNorm();
  };

  Eigen::SelfAdjointEigenSolver<Matrix> eig(G.transpose() * G, Eigen::EigenvaluesOnly);
  const double lip = std::max(eig.eigenvalues().maxCoeff() / prox, 1e-300);
  // Start on the piece with the largest offset (the current maximizer).
  Vector mu = Vector::Zero(k);
  Eigen::Index top = 0;
  phi.maxCoeff(&top);
  mu[top] = 1.0;
  Vector extrap = mu;
  double momentum = 1.0;
  double best = dual(mu);
  for (int it = 0; it < 20000; ++it) {
    const Vector grad = phi + G.transpose() * primal(extrap);
    const Vector next = simplex_projection(extrap + grad / lip);
    const double value = dual(next);
    if (value < best) {
      // Restart the momentum when the dual value drops.
      extrap = mu;
      momentum = 1.0;
      continue;
    }
    const double step = (next - mu).norm();
    const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    extrap = next + ((momentum - 1.0) / m_next) * (next - mu);
    momentum = m_next;
    mu = next;
    best = value;
    if (step <= 1e-14) break;
  }
  const Vector d = primal(mu);
  return {d, model(d)};
}

}  // namespace

Vector maximize_quadratic_on_ball(const Matrix& K, const Vector& b, double radius) {
  if (K.rows() != K.cols() || K.rows() != b.size()) {
    throw DimensionError("ball subproblem dimensions differ");
  }
  return BallMaximizer(K).solve(b, radius);
}

InnerSolution inner_max(const SystemModel& model, const LossSpec& loss,
                        const ConfidenceProduct& conf, const ControlTrajectory& v,
                        const SolverConfig& cfg) {
  if (has_quadratic_form(model, loss)) {
    const QuadraticForm form = build_quadratic_form(model, loss);
    return solve_inner(model, loss, conf, v, cfg, &form);
  }
  return solve_inner(model, loss, conf, v, cfg, nullptr);
}

OuterSolution outer_min(const SystemModel& model, const LossSpec& loss,
                        const ConfidenceProduct& conf, const SolverConfig& cfg,
                        const std::optional<ControlTrajectory>& start, const OuterTrace& trace) {
  const Eigen::Index m = model.m;
  const ControlBox& box = model.control_box;
  const Vector lower = box.flat_lower();
  const Vector upper = box.flat_upper();
  auto project = [&](const Vector& u) -> Vector { return u.cwiseMax(lower).cwiseMin(upper); };

  std::optional<QuadraticForm> form;
  if (has_quadratic_form(model, loss)) form = build_quadratic_form(model, loss);
  const QuadraticForm* form_ptr = form ? &*form : nullptr;

  auto inner = [&](const Vector& u) {
    return solve_inner(model, loss, conf, ControlTrajectory::from_flat(u, m), cfg, form_ptr);
  };
  auto gradient = [&](const Vector& u, const NoiseTrajectory& w) -> Vector {
    if (form_ptr) return form_ptr->Huu * u + form_ptr->Huw * w.flat() + form_ptr->gu;
    return loss_gradients(model, loss, ControlTrajectory::from_flat(u, m), w).grad_u;
  };

  Vector u;
  if (start) {
    check_controls(model, *start);
    u = project(start->flat());
  } else {
    u = project(Vector::Zero(lower.size()));
  }

  // Proximal weight: the u-smoothness of L on the quadratic path, adapted by
  // the line search otherwise.
  const bool fixed_prox = form_ptr && cfg.outer.step == StepRule::Automatic;
  double prox = fixed_prox ? std::max(form_ptr->smoothness_in_u(), 1e-12) : 1.0;

  struct Linearization {
    Vector d;
    double model = 0.0;
    double pg_norm = 0.0;
  };
  // Danskin: every local maximizer w_k gives a smooth piece whose gradient
  // is grad_u L(u, w_k). Pieces below the max enter with their offset, so
  // kinks are resolved by the step itself.
  auto linearize = [&](const Vector& at, const InnerSolution& s) {
    std::vector<Piece> pieces;
    for (const auto& lm : s.local_maxima) pieces.push_back({lm.value - s.value, gradient(at, lm.w)});
    if (pieces.empty()) pieces.push_back({0.0, gradient(at, s.w_star)});
    auto [d, model] = prox_linear_step(pieces, prox, lower - at, upper - at);
    const double pg = prox * d.norm();
    return Linearization{std::move(d), model, pg};
  };

  InnerSolution sol = inner(u);
  Linearization lin = linearize(u, sol);
  Vector best_u = u;

  for (int it = 0; it < cfg.outer.iters_max; ++it) {
    if (trace) trace(it, sol.value, lin.pg_norm);
    if (lin.pg_norm <= cfg.outer.grad_tol) {
      return {ControlTrajectory::from_flat(u, m), sol.value, it, lin.pg_norm};
    }

    const double predicted = std::min(lin.model, 0.0);
    // Below this the objective cannot tell two iterates apart; fall back to
    // comparing stationarity.
    const double resolution = 1e-13 * (1.0 + std::abs(sol.value));
    double trial = 1.0;
    bool accepted = false;
    std::optional<Linearization> next_lin;
    for (int halving = 0; halving < 60; ++halving) {
      const Vector next = project(u + trial * lin.d);
      InnerSolution next_sol = inner(next);
      if (next_sol.value <= sol.value + 1e-4 * trial * predicted) {
        accepted = true;
      } else if (next_sol.value <= sol.value + resolution) {
        Linearization candidate = linearize(next, next_sol);
        if (candidate.pg_norm < lin.pg_norm) {
          accepted = true;
          next_lin = std::move(candidate);
        }
      }
      if (accepted) {
        u = next;
        sol = std::move(next_sol);
        break;
      }
      trial *= 0.5;
    }

    if (!accepted) {
      if (lin.pg_norm <= 1e-6 * (1.0 + u.norm()) || -predicted <= resolution) {
        return {ControlTrajectory::from_flat(u, m), sol.value, it, lin.pg_norm};
      }
      throw NonConvergence("outer minimization line search failed (projected gradient " +
                               std::to_string(lin.pg_norm) + ")",
                           best_u);
    }
    best_u = u;
    if (!fixed_prox) {
      prox = trial == 1.0 ? std::max(prox * 0.5, 1e-12) : std::min(prox / trial, 1e12);
      next_lin.reset();
    }
    lin = next_lin ? std::move(*next_lin) : linearize(u, sol);
  }
  throw NonConvergence("outer minimization exceeded " + std::to_string(cfg.outer.iters_max) +
                           " iterations",
                       best_u);
}

namespace {

double angle_between(const Vector& a, const Vector& b) {
  const Vector ua = a / a.norm();
  const Vector ub = b / b.norm();
  return 2.0 * std::atan2((ua - ub).norm(), (ua + ub).norm());
}

}  // namespace

AlignmentReport check_alignment(const SystemModel& model, const LossSpec& loss,
                                const ConfidenceProduct& conf_a, const ConfidenceProduct& conf_b,
                                const ControlTrajectory& v, const SolverConfig& cfg) {
  if (!(conf_a.score == conf_b.score)) {
    throw Error("alignment check needs confidence products with the same score");
  }
  AlignmentReport report;
  report.a = inner_max(model, loss, conf_a, v, cfg);
  report.b = inner_max(model, loss, conf_b, v, cfg);

  auto optimal = [](const InnerSolution& s) {
    std::vector<const NoiseTrajectory*> out;
    const double slack = 1e-9 * (1.0 + std::abs(s.value));
    for (const auto& lm : s.local_maxima) {
      if (lm.value >= s.value - slack) out.push_back(&lm.w);
    }
    if (out.empty()) out.push_back(&s.w_star);
    return out;
  };

  const auto T = static_cast<std::size_t>(model.T);
  double best_worst = std::numeric_limits<double>::infinity();
  for (const auto* wa : optimal(report.a)) {
    for (const auto* wb : optimal(report.b)) {
      std::vector<double> angles(T, 0.0);
      std::vector<bool> vacuous(T, false);
      double worst = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        if ((*wa)[t].norm() == 0.0 || (*wb)[t].norm() == 0.0) {
          vacuous[t] = true;
          continue;
        }
        angles[t] = angle_between((*wa)[t], (*wb)[t]);
        worst = std::max(worst, angles[t]);
      }
      if (worst < best_worst) {
        best_worst = worst;
        report.angles = std::move(angles);
        report.vacuous = std::move(vacuous);
      }
    }
  }
  report.aligned = best_worst <= 1e-6;
  return report;
}

}  // namespace perfctl
