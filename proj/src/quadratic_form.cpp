#include "perfctl/quadratic_form.hpp"

namespace perfctl {

namespace {

Matrix symmetric(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double extreme_eigenvalue(const Matrix& m, bool largest) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric(m), Eigen::EigenvaluesOnly);
  return largest ? eig.eigenvalues().maxCoeff() : eig.eigenvalues().minCoeff();
}

}  // namespace

double QuadraticForm::strong_convexity() const { return extreme_eigenvalue(Huu, false); }
double QuadraticForm::smoothness_in_w() const { return extreme_eigenvalue(Hww, true); }
double QuadraticForm::smoothness_in_u() const { return extreme_eigenvalue(Huu, true); }

bool has_quadratic_form(const SystemModel& model, const LossSpec& loss) noexcept {
  return model.nominal.linear() != nullptr && loss.quadratic() != nullptr;
}

QuadraticForm build_quadratic_form(const SystemModel& model, const LossSpec& loss) {
  const auto* ltv = model.nominal.linear();
  const auto* quad = loss.quadratic();
  if (!ltv || !quad) {
    throw UnsupportedError("explicit quadratic form needs linear dynamics and quadratic loss");
  }
  const Eigen::Index n = model.n;
  const Eigen::Index m = model.m;
  const Eigen::Index T = model.T;
  const Eigen::Index nu = m * T;
  const Eigen::Index nw = n * T;

  QuadraticForm form;
  form.Huu = Matrix::Zero(nu, nu);
  form.Hww = Matrix::Zero(nw, nw);
  form.Huw = Matrix::Zero(nu, nw);
  form.gu = Vector::Zero(nu);
  form.gw = Vector::Zero(nw);

  // x(t) = xs + Xu u + Xw w, propagated forward.
  Vector xs = model.x0;
  Matrix Xu = Matrix::Zero(n, nu);
  Matrix Xw = Matrix::Zero(n, nw);

  auto accumulate = [&](const Matrix& weight) {
    const Matrix W = symmetric(weight);
    const Matrix WXu = W * Xu;
    const Matrix WXw = W * Xw;
    const Vector Wxs = W * xs;
    form.Huu += 2.0 * Xu.transpose() * WXu;
    form.Hww += 2.0 * Xw.transpose() * WXw;
    form.Huw += 2.0 * Xu.transpose() * WXw;
    form.gu += 2.0 * Xu.transpose() * Wxs;
    form.gw += 2.0 * Xw.transpose() * Wxs;
    form.constant += xs.dot(Wxs);
  };

  for (Eigen::Index t = 0; t < T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    accumulate(quad->Q[k]);
    form.Huu.block(t * m, t * m, m, m) += 2.0 * symmetric(quad->R[k]);

    const Matrix& A = ltv->A[k];
    xs = A * xs + ltv->c[k];
    Xu = A * Xu;
    Xu.middleCols(t * m, m) += ltv->B[k];
    Xw = A * Xw;
    Xw.middleCols(t * n, n) += Matrix::Identity(n, n);
  }
  accumulate(quad->P);
  form.Huu.diagonal().array() += loss.reg;

  form.Huu = symmetric(form.Huu);
  form.Hww = symmetric(form.Hww);
  return form;
}

}  // namespace perfctl
