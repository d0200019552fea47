#include "perfctl/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "perfctl/artifacts.hpp"
#include "perfctl/diagnostics.hpp"
#include "perfctl/quadratic_form.hpp"

namespace perfctl {

namespace fs = std::filesystem;

namespace {

// --- fixtures ---------------------------------------------------------------

SystemModel scalar_model(double x0, double bound) {
  return SystemModel::linear_time_invariant(Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                                            Vector::Constant(1, x0), 1, Vector::Constant(1, -bound),
                                            Vector::Constant(1, bound));
}

LossSpec quadratic_loss(int n, int m, int T, double q, double r) {
  QuadraticLoss loss;
  loss.P = Matrix::Identity(n, n);
  loss.Q.assign(static_cast<std::size_t>(T), q * Matrix::Identity(n, n));
  loss.R.assign(static_cast<std::size_t>(T), r * Matrix::Identity(m, m));
  return LossSpec{loss, 0.0};
}

SystemModel double_integrator(int T, const Vector& x0, double bound) {
  Matrix A(2, 2);
  A << 1.0, 0.5, 0.0, 1.0;
  Matrix B(2, 1);
  B << 0.125, 0.5;
  return SystemModel::linear_time_invariant(A, B, x0, T, Vector::Constant(1, -bound),
                                            Vector::Constant(1, bound));
}

std::string describe(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

void attach_provenance(ExperimentConfig& cfg, const std::string& how) {
  const QuadraticForm form = build_quadratic_form(cfg.model, cfg.loss);
  cfg.alpha1 = closed_form_alpha1(cfg);
  cfg.provenance = "alpha1 = beta * sqrt(sum_t eps_t^2) / lambda with lambda = " +
                   describe(form.strong_convexity()) + " and beta = " +
                   describe(form.smoothness_in_w()) + " from the Hessians of the loss; " + how;
}

ExperimentConfig scalar_gaussian() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::EIrpc;
  cfg.description = "x(1) = 1 + u + w, J = x(1)^2 + u^2, w ~ N(0, (0.2 + 0.1|u|)^2)";
  cfg.model = scalar_model(1.0, 2.0);
  cfg.loss = quadratic_loss(1, 1, 1, 0.0, 1.0);
  cfg.noise = NoiseModel(GaussianIsotropic{0.2, 0.1});
  cfg.run.p = 0.1;
  cfg.run.schedule = ConstantSchedule{999};
  cfg.run.iters_max = 30;
  attach_provenance(cfg, "eps = sigma1 * z with z the chi_1 quantile at level 1 - p/T");
  return cfg;
}

ExperimentConfig lq_2d() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::IIrpc;
  cfg.description = "double integrator over two steps with isotropic Gaussian noise";
  Vector x0(2);
  x0 << 1.0, 0.0;
  cfg.model = double_integrator(2, x0, 2.0);
  cfg.loss = quadratic_loss(2, 1, 2, 1.0, 1.0);
  cfg.noise = NoiseModel(GaussianIsotropic{0.1, 0.03});
  cfg.run.p = 0.1;
  cfg.run.iters_max = 50;
  attach_provenance(cfg, "eps_t = sigma1 * z with z the chi_2 quantile at level 1 - p/T");
  return cfg;
}

ExperimentConfig uniform_ball() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::EIrpc;
  cfg.description = "double integrator over three steps with noise uniform in a ball";
  Vector x0(2);
  x0 << 1.0, 0.0;
  cfg.model = double_integrator(3, x0, 2.0);
  cfg.loss = quadratic_loss(2, 1, 3, 1.0, 1.0);
  cfg.noise = NoiseModel(UniformBall{0.2, 0.025});
  cfg.run.p = 0.1;
  cfg.run.iters_max = 30;
  attach_provenance(cfg, "eps_t = rho1 * (1 - p/T)^(1/n), the radius of the inner ball");
  return cfg;
}

ExperimentConfig diverging_alpha() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::IIrpc;
  cfg.description = "scalar system whose noise scale grows fast enough in |u| that alpha1 = 1.5";
  cfg.model = scalar_model(1.0, 2.0);
  const double r = 100.0;
  cfg.loss = quadratic_loss(1, 1, 1, 0.0, r);
  const double p = 0.1;
  const double z = chi_quantile(1, 1.0 - p);
  cfg.noise = NoiseModel(GaussianIsotropic{0.01, 1.5 * (1.0 + r) / z});
  cfg.run.p = p;
  cfg.run.iters_max = 50;
  attach_provenance(cfg, "sigma1 = 1.5 (1 + r) / z with z the chi_1 quantile at level 1 - p, "
                         "so eps = sigma1 * z gives alpha1 = 1.5");
  return cfg;
}

ExperimentConfig coverage() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::CoverageAudit;
  cfg.description = "calibration audit: 200 batches of N = 999, each checked on 1e5 fresh draws";
  Matrix B(2, 1);
  B << 1.0, 0.0;
  cfg.model = SystemModel::linear_time_invariant(Matrix::Identity(2, 2), B, Vector::Zero(2), 5,
                                                 Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  cfg.model.x0 << 0.5, 0.0;
  cfg.loss = quadratic_loss(2, 1, 5, 1.0, 1.0);
  cfg.noise = NoiseModel(GaussianIsotropic{1.0, 0.5});
  cfg.run.p = 0.1;
  cfg.coverage = CoverageSettings{999, 100'000, 200};
  attach_provenance(cfg, "eps_t = sigma1 * z with z the chi_2 quantile at level 1 - p/T");
  return cfg;
}

// --- helpers ----------------------------------------------------------------

fs::path artifact_root(const RunOptions& options) {
  if (options.out_dir) return *options.out_dir;
  if (const char* env = std::getenv("PERFCTL_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "artifacts";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

template <class Writer>
void write_with(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  writer(out);
  if (!out) throw Error("cannot write " + path.string());
}

std::string format_vector(const Vector& v) {
  std::ostringstream s;
  s << std::setprecision(10) << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
  s << ']';
  return s.str();
}

const char* status_name(RunStatus s) {
  return s == RunStatus::Converged ? "converged" : "max_iterations";
}

void write_history_artifacts(const fs::path& dir, const IterationHistory& history) {
  write_with(dir / "history.jsonl", [&](std::ostream& o) { write_history_jsonl(o, history); });
  write_with(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, history); });
  write_with(dir / "timings.csv", [&](std::ostream& o) { write_timings_csv(o, history); });
}

void describe_history(std::ostream& report, const IterationHistory& history) {
  report << "status: " << status_name(history.status) << '\n'
         << "iterations: " << history.records.back().i << '\n'
         << "final control: " << format_vector(history.final_control().flat()) << '\n'
         << std::setprecision(10) << "final worst-case loss: " << history.records.back().inner_value
         << '\n'
         << "final step norm: " << history.records.back().step_norm << '\n'
         << "expansion detected: " << (history.expansion_detected ? "yes" : "no") << '\n';
}

struct Outcome {
  int code = kExitOk;
  std::string status = "ok";
};

// --- experiments --------------------------------------------------------------

Outcome run_refinement(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& report) {
  const bool empirical = cfg.experiment == Experiment::EIrpc;
  report << (empirical ? "empirical" : "ideal") << " refinement\n";
  try {
    const IterationHistory history = empirical
                                         ? run_e_irpc(cfg.model, cfg.noise, cfg.loss, cfg.run)
                                         : run_i_irpc(cfg.model, cfg.noise, cfg.loss, cfg.run);
    write_history_artifacts(dir, history);
    describe_history(report, history);
    if (cfg.alpha1) report << "documented alpha1: " << *cfg.alpha1 << '\n';
    return {};
  } catch (const RunFailure& e) {
    write_history_artifacts(dir, e.history());
    report << "FAILED: " << e.what() << '\n'
           << "completed iterations: " << e.history().records.back().i << '\n';
    return {kExitSolver, "solver_failure"};
  }
}

Outcome run_coverage(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& report) {
  const auto& cs = cfg.coverage;
  const std::size_t k = quantile_index(cs.N, cfg.run.p, cfg.model.T);
  const double target = static_cast<double>(k) / static_cast<double>(cs.N + 1);
  const ControlTrajectory u = solve_nominal(cfg.model, cfg.loss, cfg.run.solver);
  const auto T = static_cast<std::size_t>(cfg.model.T);

  std::vector<double> sum(T, 0.0), sum_sq(T, 0.0);
  double joint_sum = 0.0;
  int joint_ok = 0;
  std::ofstream csv(dir / "coverage.csv", std::ios::binary);
  csv << "repetition";
  for (std::size_t t = 0; t < T; ++t) csv << ",radius_" << t;
  for (std::size_t t = 0; t < T; ++t) csv << ",coverage_" << t;
  csv << ",joint\n" << std::setprecision(std::numeric_limits<double>::max_digits10);

  for (int rep = 0; rep < cs.repetitions; ++rep) {
    const std::uint64_t rep_seed = derive_seed(cfg.run.seed, static_cast<std::uint64_t>(rep));
    const NoiseBatch calib =
        sample_noise_batch(cfg.model, cfg.noise, u, cs.N, derive_seed(rep_seed, 0), cfg.run.workers);
    const ConfidenceProduct conf = build_confidence_product(calib, cfg.run.score, cfg.run.p);
    const NoiseBatch fresh = sample_noise_batch(cfg.model, cfg.noise, u, cs.fresh,
                                                derive_seed(rep_seed, 1), cfg.run.workers);
    const CoverageAudit audit = coverage_audit(conf, fresh);
    csv << rep;
    for (double r : conf.radii) csv << ',' << r;
    for (std::size_t t = 0; t < T; ++t) {
      csv << ',' << audit.per_step[t];
      sum[t] += audit.per_step[t];
      sum_sq[t] += audit.per_step[t] * audit.per_step[t];
    }
    csv << ',' << audit.joint << '\n';
    joint_sum += audit.joint;
    if (audit.joint >= 1.0 - cfg.run.p) ++joint_ok;
  }

  const double reps = cs.repetitions;
  report << "coverage audit under the nominal control\n"
         << "N = " << cs.N << ", k = " << k << ", fresh samples = " << cs.fresh
         << ", repetitions = " << cs.repetitions << '\n'
         << std::fixed << std::setprecision(5) << "target k/(N+1) = " << target << "\n\n"
         << "step  mean_coverage  sd        target\n";
  for (std::size_t t = 0; t < T; ++t) {
    const double mean = sum[t] / reps;
    const double var = std::max(0.0, sum_sq[t] / reps - mean * mean);
    report << std::setw(4) << t << "  " << std::setw(13) << mean << "  " << std::setw(8)
           << std::sqrt(var) << "  " << target << '\n';
  }
  report << "\nmean joint coverage: " << joint_sum / reps << '\n'
         << "repetitions with joint coverage >= 1 - p: " << joint_ok << " / " << cs.repetitions
         << '\n';
  return {};
}

Outcome run_gap(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& report) {
  StableControl ps;
  try {
    ps = estimate_u_ps(cfg.model, cfg.noise, cfg.loss, cfg.run);
  } catch (const RunFailure& e) {
    write_history_artifacts(dir, e.history());
    report << "FAILED: " << e.what() << '\n';
    return {kExitSolver, "solver_failure"};
  }
  const GridResult po = grid_search_u_po(cfg.model, cfg.noise, cfg.loss, cfg.run.p, cfg.gap.grid,
                                         cfg.run.solver, cfg.run.score, cfg.run.oracle);
  ProbeRegion region = ProbeRegion::control_box(cfg.model);
  region.probes = cfg.gap.probes;
  const EstimatedConstants c = estimate_constants(cfg.model, cfg.loss, cfg.noise, cfg.run.p,
                                                  region, cfg.run.solver, cfg.run.oracle);
  const double bound = ps_po_gap_bound(c.lipschitz_w, c.lambda, c.eps);
  const double gap = distance(ps.u, po.u);

  write_with(dir / "gap.csv", [&](std::ostream& o) {
    o << "quantity,value\n" << std::setprecision(std::numeric_limits<double>::max_digits10)
      << "gap," << gap << "\nbound," << bound << "\nlambda," << c.lambda << "\nbeta," << c.beta
      << "\nlipschitz_w," << c.lipschitz_w << "\ngrid_cell," << po.cell.norm()
      << "\nu_ps_residual," << ps.residual << '\n';
    for (std::size_t t = 0; t < c.eps.size(); ++t) o << "eps_" << t << ',' << c.eps[t] << '\n';
  });
  report << "stable control (ideal refinement limit): " << format_vector(ps.u.flat()) << '\n'
         << "optimal control (grid search): " << format_vector(po.u.flat()) << '\n'
         << std::setprecision(8) << "measured gap: " << gap << '\n'
         << "bound 2 L_w sqrt(sum eps^2) / lambda: " << bound << '\n'
         << "grid cell: " << po.cell.norm() << '\n'
         << "lambda = " << c.lambda << ", beta = " << c.beta << ", L_w = " << c.lipschitz_w << '\n';
  if (gap > bound) {
    report << "VIOLATION: measured gap exceeds the bound\n";
    return {kExitInvariant, "bound_violated"};
  }
  report << "gap is within the bound\n";
  return {};
}

Outcome run_contraction(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& report) {
  IterationHistory history;
  StableControl ps;
  try {
    history = run_i_irpc(cfg.model, cfg.noise, cfg.loss, cfg.run);
    write_history_artifacts(dir, history);
    ps = estimate_u_ps(cfg.model, cfg.noise, cfg.loss, cfg.run);
  } catch (const RunFailure& e) {
    write_history_artifacts(dir, e.history());
    report << "FAILED: " << e.what() << '\n';
    return {kExitSolver, "solver_failure"};
  }
  const ContractionReport cr = contraction_report(history, ps.u);
  write_with(dir / "contraction.csv", [&](std::ostream& o) { write_contraction_csv(o, cr); });
  write_contraction_summary(report, cr);

  const EstimatedConstants c =
      estimate_constants(cfg.model, cfg.loss, cfg.noise, cfg.run.p,
                         ProbeRegion::control_box(cfg.model), cfg.run.solver, cfg.run.oracle);
  const RateReport rate = theoretical_rate(c.lambda, c.beta, c.eps);
  report << "estimated alpha1: " << rate.alpha << '\n';
  if (!rate.contracts_ideal) {
    report << "alpha1 >= 1: no contraction guarantee\n";
    return {};
  }
  const double delta = cfg.contraction.delta;
  const int bound = iterations_to_delta(rate.alpha, cr.distances.front(), delta);
  int reached = -1;
  for (std::size_t i = 0; i < cr.distances.size(); ++i) {
    if (cr.distances[i] <= delta) {
      reached = static_cast<int>(i);
      break;
    }
  }
  report << "delta: " << delta << '\n' << "iteration bound: " << bound << '\n';
  if (reached < 0) {
    report << "first iteration within delta: not reached\n";
    return {};
  }
  report << "first iteration within delta: " << reached << '\n';
  if (reached > bound) {
    report << "VIOLATION: the iteration bound was exceeded\n";
    return {kExitInvariant, "bound_violated"};
  }
  return {};
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg, const std::string& config_text,
                    const RunOptions& options, const Outcome& outcome) {
  nlohmann::ordered_json m;
  m["schema_version"] = kConfigSchemaVersion;
  m["history_schema_version"] = kHistorySchemaVersion;
  m["summary_schema_version"] = kSummarySchemaVersion;
  m["experiment"] = to_string(cfg.experiment);
  m["config"] = "config.yaml";
  m["config_hash"] = fnv1a_hex(config_text);
  m["source_config"] = options.config_path;
  m["overrides"] = options.overrides;
  m["master_seed"] = cfg.run.seed;
  m["n"] = cfg.model.n;
  m["m"] = cfg.model.m;
  m["T"] = cfg.model.T;
  m["workers"] = cfg.run.workers;
  m["status"] = outcome.status;
  m["exit_code"] = outcome.code;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

int run_one(ExperimentConfig cfg, const RunOptions& options, std::ostream& out, std::ostream& err) {
  const std::string name = to_string(cfg.experiment) + "-seed" + std::to_string(cfg.run.seed);
  const fs::path dir = fresh_directory(artifact_root(options), name);
  const std::string config_text = emit_config(cfg);
  write_file(dir / "config.yaml", config_text);

  std::ostringstream report;
  report << "experiment: " << to_string(cfg.experiment) << '\n';
  if (!cfg.description.empty()) report << "description: " << cfg.description << '\n';
  report << "master seed: " << cfg.run.seed << "\n\n";

  Outcome outcome;
  try {
    switch (cfg.experiment) {
      case Experiment::EIrpc:
      case Experiment::IIrpc: outcome = run_refinement(cfg, dir, report); break;
      case Experiment::CoverageAudit: outcome = run_coverage(cfg, dir, report); break;
      case Experiment::PsPoGap: outcome = run_gap(cfg, dir, report); break;
      case Experiment::Contraction: outcome = run_contraction(cfg, dir, report); break;
    }
  } catch (const Error& e) {
    report << "FAILED: " << e.what() << '\n';
    outcome = {kExitSolver, "failure"};
  }
  write_file(dir / "report.txt", report.str());
  write_manifest(dir, cfg, config_text, options, outcome);
  if (outcome.code != kExitOk) {
    err << "run " << name << " failed (" << outcome.status << "); see " << (dir / "report.txt").string()
        << '\n';
  }
  if (!options.quiet) out << dir.string() << '\n';
  return outcome.code;
}

}  // namespace

std::vector<std::string> fixture_names() {
  return {"scalar_gaussian", "lq_2d", "uniform_ball", "diverging_alpha", "coverage"};
}

ExperimentConfig fixture(const std::string& name) {
  if (name == "scalar_gaussian") return scalar_gaussian();
  if (name == "lq_2d") return lq_2d();
  if (name == "uniform_ball") return uniform_ball();
  if (name == "diverging_alpha") return diverging_alpha();
  if (name == "coverage") return coverage();
  std::string valid;
  for (const auto& n : fixture_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("", "unknown fixture '" + name + "' (valid: " + valid + ")");
}

double closed_form_alpha1(const ExperimentConfig& cfg) {
  const double level = 1.0 - cfg.run.p / cfg.model.T;
  double scale = 0.0;
  if (const auto* g = cfg.noise.as<GaussianIsotropic>()) {
    scale = g->sigma1 * chi_quantile(cfg.model.n, level);
  } else if (const auto* b = cfg.noise.as<UniformBall>()) {
    scale = b->rho1 * std::pow(level, 1.0 / cfg.model.n);
  } else {
    throw UnsupportedError("closed-form quantile slopes exist only for isotropic families");
  }
  const QuadraticForm form = build_quadratic_form(cfg.model, cfg.loss);
  const std::vector<double> eps(static_cast<std::size_t>(cfg.model.T), scale);
  return theoretical_rate(form.strong_convexity(), form.smoothness_in_w(), eps).alpha;
}

int run_experiment(const RunOptions& options, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    std::vector<Override> overrides;
    for (const auto& o : options.overrides) overrides.push_back(parse_override(o));
    cfg = load_config(options.config_path, overrides);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitParse;
  }

  ValidationReport validation = validate_model(cfg.model, cfg.loss);
  for (auto& v : validate_noise(cfg.noise, cfg.model.n)) validation.violations.push_back(std::move(v));
  if (!validation.valid()) {
    for (const auto& v : validation.violations) err << "invalid model: " << v << '\n';
    return kExitInvariant;
  }

  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (options.seed) seeds = {*options.seed};
  if (seeds.empty()) seeds = {cfg.run.seed};
  cfg.seeds.clear();

  int worst = kExitOk;
  for (const auto seed : seeds) {
    ExperimentConfig single = cfg;
    single.run.seed = seed;
    try {
      worst = std::max(worst, run_one(std::move(single), options, out, err));
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      worst = std::max<int>(worst, kExitSolver);
    }
  }
  return worst;
}

int compare_command(const std::string& history_a, const std::string& history_b,
                    std::optional<double> delta, std::ostream& out, std::ostream& err) {
  auto load = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot open history file '" + path + "'");
    try {
      return read_history_jsonl(in);
    } catch (const ConfigError& e) {
      throw ConfigError("", path + ": " + e.what());
    }
  };
  try {
    const HistoryDiff diff = compare_histories(load(history_a), load(history_b));
    write_diff_report(out, diff);
    if (delta) {
      out << "terminal distance " << (diff.terminal_distance <= *delta ? "within" : "outside")
          << " delta = " << *delta << '\n';
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "history error: " << e.what() << '\n';
    return kExitParse;
  } catch (const DimensionError& e) {
    err << "shape mismatch: " << e.what() << '\n';
    return kExitParse;
  }
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Iterative refinement of performative control: experiment runner"};
  app.require_subcommand(1);

  RunOptions run;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a config file");
  run_cmd->add_option("config", run.config_path, "YAML config file")->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Master seed (replaces run.seed and run.seeds)");
  auto* out_opt = run_cmd->add_option("--out-dir", out_dir, "Artifact root directory");
  run_cmd->add_option("--override", run.overrides, "Dotted key=value, repeatable");
  run_cmd->add_flag("--quiet", run.quiet, "Do not print artifact directories");

  std::string hist_a, hist_b;
  double delta = 0.0;
  auto* cmp_cmd = app.add_subcommand("compare", "Diff two history files");
  cmp_cmd->add_option("history_a", hist_a)->required();
  cmp_cmd->add_option("history_b", hist_b)->required();
  auto* delta_opt = cmp_cmd->add_option("--delta", delta, "Report whether the terminal distance is within delta");

  std::string fixture_name, fixture_out;
  auto* fix_cmd = app.add_subcommand("emit-fixture", "Write a shipped fixture config");
  fix_cmd->add_option("name", fixture_name)->required();
  fix_cmd->add_option("-o,--output", fixture_out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (run_cmd->parsed()) {
    if (*seed_opt) run.seed = seed;
    if (*out_opt) run.out_dir = out_dir;
    return run_experiment(run, out, err);
  }
  if (cmp_cmd->parsed()) {
    return compare_command(hist_a, hist_b, *delta_opt ? std::optional<double>(delta) : std::nullopt,
                           out, err);
  }
  try {
    const std::string text = emit_config(fixture(fixture_name));
    if (fixture_out.empty()) {
      out << text;
    } else {
      write_file(fixture_out, text);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitParse;
  }
}

}  // namespace perfctl
