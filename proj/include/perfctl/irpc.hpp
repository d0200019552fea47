#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "perfctl/conformal.hpp"
#include "perfctl/robust_solver.hpp"
#include "perfctl/types.hpp"

namespace perfctl {

struct ConstantSchedule {
  std::size_t N = 999;
};

/// Sample counts from the finite-sample convergence bound (see
/// sample_schedule_theoretical).
struct TheoreticalSchedule {
  double lambda = 1.0;
  double beta = 1.0;
  std::vector<double> eps;
  double delta = 0.05;
  double c = 1.0;
};

using SampleSchedule = std::variant<ConstantSchedule, TheoreticalSchedule>;

struct RunConfig {
  double p = 0.1;
  SampleSchedule schedule = ConstantSchedule{};
  double fix_tol = 1e-8;
  int iters_max = 100;
  SolverConfig solver;
  std::uint64_t seed = 0;
  /// Workers for sampling batches; results do not depend on it.
  unsigned workers = 1;
  ScoreSpec score = ScoreSpec::euclidean();
  OracleOptions oracle;
};

struct IterationRecord {
  int i = 0;
  ControlTrajectory u;
  /// Radii of the confidence product that produced u; empty for record 0.
  std::vector<double> radii;
  /// Worst-case loss at u under that product.
  double inner_value = 0.0;
  double step_norm = 0.0;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
};

enum class RunStatus { Converged, MaxIterations };

struct IterationHistory {
  std::vector<IterationRecord> records;
  RunStatus status = RunStatus::MaxIterations;
  /// Step norms grew for three consecutive iterations at some point.
  bool expansion_detected = false;

  const ControlTrajectory& final_control() const { return records.back().u; }
};

/// A run failed part-way; `history` holds every completed iteration.
class RunFailure : public Error {
 public:
  RunFailure(const std::string& what, IterationHistory history)
      : Error(what), history_(std::move(history)) {}
  const IterationHistory& history() const noexcept { return history_; }

 private:
  IterationHistory history_;
};

/// Optimal open-loop control of the noise-free system (zero-radius product).
ControlTrajectory solve_nominal(const SystemModel& model, const LossSpec& loss,
                                const SolverConfig& cfg = {});

/// Empirical refinement: sample under the previous control, calibrate the
/// confidence product, re-solve the robust problem against it.
IterationHistory run_e_irpc(const SystemModel& model, const NoiseModel& noise,
                            const LossSpec& loss, const RunConfig& cfg);

/// Ideal refinement with exact quantiles from the noise oracle.
IterationHistory run_i_irpc(const SystemModel& model, const NoiseModel& noise,
                            const LossSpec& loss, const RunConfig& cfg,
                            const std::optional<ControlTrajectory>& start = std::nullopt);

/// N_i = ceil(c * 4 lambda^2 T^3 / (beta^2 delta^2 sum eps^2) * |log(6p / (pi^2 i^2 T^2))|).
std::size_t sample_schedule_theoretical(double lambda, double beta, const std::vector<double>& eps,
                                        double delta, double p, int T, int i, double c = 1.0);

struct StableControl {
  ControlTrajectory u;
  /// |A(u) - u| for one more ideal refinement step.
  double residual = 0.0;
  int iterations = 0;
};

/// Fixed point of the ideal refinement map, run to tolerance 1e-10. Throws
/// if the step norm stops shrinking over a 20-iteration window.
StableControl estimate_u_ps(const SystemModel& model, const NoiseModel& noise,
                            const LossSpec& loss, const RunConfig& cfg,
                            const std::optional<ControlTrajectory>& start = std::nullopt);

struct GridSpec {
  int points = 41;
  int refinements = 2;
  /// Each refinement shrinks the spacing by this factor.
  int factor = 10;
};

struct GridResult {
  ControlTrajectory u;
  double value = 0.0;
  /// Spacing of the finest grid, per coordinate.
  Vector cell;
};

/// Brute-force performatively optimal control: minimizes the worst case over
/// the self-induced ideal set on a refined grid. Only for mT <= 3.
GridResult grid_search_u_po(const SystemModel& model, const NoiseModel& noise,
                            const LossSpec& loss, double p, const GridSpec& grid = {},
                            const SolverConfig& solver = {}, const ScoreSpec& score = {},
                            const OracleOptions& oracle = {});

}  // namespace perfctl
