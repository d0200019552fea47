#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "perfctl/conformal.hpp"
#include "perfctl/types.hpp"

namespace perfctl {

struct InnerConfig {
  int restarts = 16;
  int block_sweeps_max = 200;
  double block_tol = 1e-10;
};

enum class StepRule {
  /// 1 / beta_u with Armijo fallback on the quadratic path, Armijo elsewhere.
  Automatic,
  Backtracking,
};

struct OuterConfig {
  StepRule step = StepRule::Automatic;
  double grad_tol = 1e-8;
  int iters_max = 10'000;
};

struct SolverConfig {
  InnerConfig inner;
  OuterConfig outer;
  std::uint64_t seed = 0;
};

/// Every start was solved exactly (single block or degenerate set).
struct ExactBlock {};
struct MultiStart {
  int n_restarts = 0;
  int best_start_index = 0;
};
struct BruteForce {};
using Certificate = std::variant<ExactBlock, MultiStart, BruteForce>;

struct LocalMaximum {
  NoiseTrajectory w;
  double value = 0.0;
};

struct InnerSolution {
  NoiseTrajectory w_star;
  double value = 0.0;
  Certificate certificate;
  /// Distinct local maxima found by the restarts, best first.
  std::vector<LocalMaximum> local_maxima;
};

/// L(w, u) = J(x(u, w), u).
double evaluate_loss(const SystemModel& model, const LossSpec& loss, const ControlTrajectory& u,
                     const NoiseTrajectory& w);

struct LossGradients {
  Vector grad_u;  // stacked, length mT
  Vector grad_w;  // stacked, length nT
};

/// Adjoint recursion for linear dynamics with quadratic loss, central finite
/// differences otherwise.
LossGradients loss_gradients(const SystemModel& model, const LossSpec& loss,
                             const ControlTrajectory& u, const NoiseTrajectory& w);

/// Maximizes 1/2 y'K y + b'y over |y| <= radius exactly (eigen-decomposition
/// plus secular equation). K must be symmetric.
Vector maximize_quadratic_on_ball(const Matrix& K, const Vector& b, double radius);

/// max { L(w, v) : w in conf }.
InnerSolution inner_max(const SystemModel& model, const LossSpec& loss,
                        const ConfidenceProduct& conf, const ControlTrajectory& v,
                        const SolverConfig& cfg = {});

struct OuterSolution {
  ControlTrajectory u;
  double value = 0.0;
  int iterations = 0;
  double projected_gradient_norm = 0.0;
};

/// Solver trace callback: (iteration, value, projected-gradient norm).
using OuterTrace = std::function<void(int, double, double)>;

/// argmin { max { L(w, v) : w in conf } : v in U }. Each iteration takes a
/// prox-linear step on the Danskin linearizations of all local maxima found
/// by inner_max (a projected gradient step when there is only one), followed
/// by Armijo backtracking. Stops when prox * |step| <= grad_tol. Throws
/// NonConvergence carrying the best iterate.
OuterSolution outer_min(const SystemModel& model, const LossSpec& loss,
                        const ConfidenceProduct& conf, const SolverConfig& cfg = {},
                        const std::optional<ControlTrajectory>& start = std::nullopt,
                        const OuterTrace& trace = {});

struct AlignmentReport {
  /// Angle in radians between the normalized maximizers at each step.
  std::vector<double> angles;
  /// Steps where one maximizer is zero (aligned by convention).
  std::vector<bool> vacuous;
  bool aligned = false;
  InnerSolution a;
  InnerSolution b;
};

/// Whether the worst-case noises under two confidence products point the
/// same way at each step, within 1e-6 rad.
AlignmentReport check_alignment(const SystemModel& model, const LossSpec& loss,
                                const ConfidenceProduct& conf_a, const ConfidenceProduct& conf_b,
                                const ControlTrajectory& v, const SolverConfig& cfg = {});

}  // namespace perfctl
