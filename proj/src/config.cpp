#include "perfctl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace perfctl {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string indexed(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

// An empty section ("run:") parses as null; its missing fields are then
// reported by their own paths.
void require_map(const YAML::Node& node, const std::string& path) {
  if (!node.IsMap() && !node.IsNull()) throw ConfigError(path, "expected a mapping");
}

void reject_unknown(const YAML::Node& node, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(join(path, key), "unknown key");
    }
  }
}

YAML::Node required(const YAML::Node& parent, const std::string& path, const char* key) {
  const YAML::Node node = parent[key];
  if (!node) throw ConfigError(join(path, key), "required field is missing");
  return node;
}

template <class T>
T scalar(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) throw ConfigError(path, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path, "cannot read '" + node.Scalar() + "' as the expected type");
  }
}

template <class T>
T scalar_or(const YAML::Node& parent, const std::string& path, const char* key, T fallback) {
  const YAML::Node node = parent[key];
  return node ? scalar<T>(node, join(path, key)) : fallback;
}

double number(const YAML::Node& node, const std::string& path) {
  const double v = scalar<double>(node, path);
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
  return v;
}

double number_or(const YAML::Node& parent, const std::string& path, const char* key,
                 double fallback) {
  const YAML::Node node = parent[key];
  return node ? number(node, join(path, key)) : fallback;
}

Vector vector_of(const YAML::Node& node, const std::string& path, Eigen::Index size) {
  if (node.IsScalar() && size == 1) return Vector::Constant(1, number(node, path));
  if (!node.IsSequence()) throw ConfigError(path, "expected a list of numbers");
  if (static_cast<Eigen::Index>(node.size()) != size) {
    throw ConfigError(path, "expected " + std::to_string(size) + " entries, got " +
                                std::to_string(node.size()));
  }
  Vector v(size);
  for (std::size_t i = 0; i < node.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(node[i], indexed(path, i));
  return v;
}

std::vector<double> doubles(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) throw ConfigError(path, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(number(node[i], indexed(path, i)));
  return out;
}

Matrix matrix_of(const YAML::Node& node, const std::string& path, Eigen::Index rows,
                 Eigen::Index cols) {
  if (node.IsScalar() && rows == 1 && cols == 1) return Matrix::Constant(1, 1, number(node, path));
  if (!node.IsSequence() || static_cast<Eigen::Index>(node.size()) != rows) {
    throw ConfigError(path, "expected a " + std::to_string(rows) + "x" + std::to_string(cols) +
                                " matrix as a list of rows");
  }
  Matrix M(rows, cols);
  for (std::size_t i = 0; i < node.size(); ++i) {
    M.row(static_cast<Eigen::Index>(i)) = vector_of(node[i], indexed(path, i), cols).transpose();
  }
  return M;
}

bool is_matrix_list(const YAML::Node& node) {
  return node.IsSequence() && node.size() > 0 && node[0].IsSequence() && node[0].size() > 0 &&
         node[0][0].IsSequence();
}

/// One matrix for every step, or a list of T matrices.
std::vector<Matrix> step_matrices(const YAML::Node& node, const std::string& path, int T,
                                  Eigen::Index rows, Eigen::Index cols) {
  if (is_matrix_list(node)) {
    if (static_cast<int>(node.size()) != T) {
      throw ConfigError(path, "per-step list needs T = " + std::to_string(T) + " matrices");
    }
    std::vector<Matrix> out;
    for (std::size_t t = 0; t < node.size(); ++t) {
      out.push_back(matrix_of(node[t], indexed(path, t), rows, cols));
    }
    return out;
  }
  return std::vector<Matrix>(static_cast<std::size_t>(T), matrix_of(node, path, rows, cols));
}

std::vector<Vector> step_vectors(const YAML::Node& node, const std::string& path, int T,
                                 Eigen::Index size) {
  if (node.IsSequence() && node.size() > 0 && node[0].IsSequence()) {
    if (static_cast<int>(node.size()) != T) {
      throw ConfigError(path, "per-step list needs T = " + std::to_string(T) + " vectors");
    }
    std::vector<Vector> out;
    for (std::size_t t = 0; t < node.size(); ++t) out.push_back(vector_of(node[t], indexed(path, t), size));
    return out;
  }
  return std::vector<Vector>(static_cast<std::size_t>(T), vector_of(node, path, size));
}

int positive_int(const YAML::Node& parent, const std::string& path, const char* key) {
  const int v = scalar<int>(required(parent, path, key), join(path, key));
  if (v < 1) throw ConfigError(join(path, key), "must be >= 1");
  return v;
}

void parse_model(const YAML::Node& node, ExperimentConfig& cfg) {
  const std::string path = "model";
  require_map(node, path);
  reject_unknown(node, path, {"n", "m", "T", "x0", "A", "B", "c", "u_lower", "u_upper"});
  SystemModel& model = cfg.model;
  model.n = positive_int(node, path, "n");
  model.m = positive_int(node, path, "m");
  model.T = positive_int(node, path, "T");
  model.x0 = vector_of(required(node, path, "x0"), join(path, "x0"), model.n);

  LinearTimeVarying ltv;
  ltv.A = step_matrices(required(node, path, "A"), join(path, "A"), model.T, model.n, model.n);
  ltv.B = step_matrices(required(node, path, "B"), join(path, "B"), model.T, model.n, model.m);
  ltv.c = node["c"] ? step_vectors(node["c"], join(path, "c"), model.T, model.n)
                    : std::vector<Vector>(static_cast<std::size_t>(model.T), Vector::Zero(model.n));
  model.nominal = NominalDynamics(std::move(ltv));
  model.control_box.lower =
      step_vectors(required(node, path, "u_lower"), join(path, "u_lower"), model.T, model.m);
  model.control_box.upper =
      step_vectors(required(node, path, "u_upper"), join(path, "u_upper"), model.T, model.m);
}

void parse_loss(const YAML::Node& node, ExperimentConfig& cfg) {
  const std::string path = "loss";
  require_map(node, path);
  reject_unknown(node, path, {"P", "Q", "R", "reg"});
  const SystemModel& model = cfg.model;
  QuadraticLoss q;
  q.P = matrix_of(required(node, path, "P"), join(path, "P"), model.n, model.n);
  q.Q = node["Q"] ? step_matrices(node["Q"], join(path, "Q"), model.T, model.n, model.n)
                  : std::vector<Matrix>(static_cast<std::size_t>(model.T), Matrix::Zero(model.n, model.n));
  q.R = step_matrices(required(node, path, "R"), join(path, "R"), model.T, model.m, model.m);
  cfg.loss.kind = std::move(q);
  cfg.loss.reg = number_or(node, path, "reg", 0.0);
  if (cfg.loss.reg < 0.0) throw ConfigError(join(path, "reg"), "must be >= 0");
}

void parse_noise(const YAML::Node& node, ExperimentConfig& cfg) {
  const std::string path = "noise";
  require_map(node, path);
  const auto family = scalar<std::string>(required(node, path, "family"), join(path, "family"));
  if (family == "gaussian_isotropic") {
    reject_unknown(node, path, {"family", "sigma0", "sigma1", "sigma_min"});
    GaussianIsotropic g;
    g.sigma0 = number(required(node, path, "sigma0"), join(path, "sigma0"));
    g.sigma1 = number_or(node, path, "sigma1", 0.0);
    g.sigma_min = number_or(node, path, "sigma_min", g.sigma_min);
    cfg.noise = NoiseModel(g);
  } else if (family == "uniform_ball") {
    reject_unknown(node, path, {"family", "rho0", "rho1"});
    UniformBall b;
    b.rho0 = number(required(node, path, "rho0"), join(path, "rho0"));
    b.rho1 = number_or(node, path, "rho1", 0.0);
    cfg.noise = NoiseModel(b);
  } else if (family == "gaussian_anisotropic") {
    reject_unknown(node, path, {"family", "cov0", "cov1"});
    GaussianAnisotropic a;
    const int n = cfg.model.n;
    a.cov0 = matrix_of(required(node, path, "cov0"), join(path, "cov0"), n, n);
    a.cov1 = node["cov1"] ? matrix_of(node["cov1"], join(path, "cov1"), n, n) : Matrix::Zero(n, n);
    cfg.noise = NoiseModel(a);
  } else {
    throw ConfigError(join(path, "family"),
                      "unknown family '" + family +
                          "' (expected gaussian_isotropic, uniform_ball or gaussian_anisotropic)");
  }
}

void parse_run(const YAML::Node& node, ExperimentConfig& cfg) {
  const std::string path = "run";
  require_map(node, path);
  reject_unknown(node, path,
                 {"p", "schedule", "fix_tol", "iters_max", "seed", "seeds", "workers", "score"});
  RunConfig& run = cfg.run;
  run.p = number(required(node, path, "p"), join(path, "p"));
  if (!(run.p > 0.0 && run.p < 1.0)) throw ConfigError(join(path, "p"), "must lie in (0, 1)");
  run.fix_tol = number_or(node, path, "fix_tol", run.fix_tol);
  if (!(run.fix_tol > 0.0)) throw ConfigError(join(path, "fix_tol"), "must be positive");
  run.iters_max = scalar_or<int>(node, path, "iters_max", run.iters_max);
  if (run.iters_max < 1) throw ConfigError(join(path, "iters_max"), "must be >= 1");
  run.seed = scalar_or<std::uint64_t>(node, path, "seed", 0);
  run.workers = scalar_or<unsigned>(node, path, "workers", 1);
  if (run.workers < 1) throw ConfigError(join(path, "workers"), "must be >= 1");

  if (const YAML::Node seeds = node["seeds"]) {
    if (!seeds.IsSequence()) throw ConfigError(join(path, "seeds"), "expected a list of seeds");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      cfg.seeds.push_back(scalar<std::uint64_t>(seeds[i], indexed(join(path, "seeds"), i)));
    }
  }

  if (const YAML::Node s = node["schedule"]) {
    const std::string sp = join(path, "schedule");
    require_map(s, sp);
    const auto kind = scalar<std::string>(required(s, sp, "kind"), join(sp, "kind"));
    if (kind == "constant") {
      reject_unknown(s, sp, {"kind", "N"});
      const auto N = scalar_or<std::size_t>(s, sp, "N", 999);
      if (N < 1) throw ConfigError(join(sp, "N"), "must be >= 1");
      run.schedule = ConstantSchedule{N};
    } else if (kind == "theoretical") {
      reject_unknown(s, sp, {"kind", "lambda", "beta", "eps", "delta", "c"});
      TheoreticalSchedule th;
      th.lambda = number(required(s, sp, "lambda"), join(sp, "lambda"));
      th.beta = number(required(s, sp, "beta"), join(sp, "beta"));
      th.eps = doubles(required(s, sp, "eps"), join(sp, "eps"));
      th.delta = number_or(s, sp, "delta", th.delta);
      th.c = number_or(s, sp, "c", th.c);
      if (!(th.lambda > 0.0 && th.beta > 0.0 && th.delta > 0.0 && th.c > 0.0)) {
        throw ConfigError(sp, "lambda, beta, delta and c must be positive");
      }
      if (static_cast<int>(th.eps.size()) != cfg.model.T) {
        throw ConfigError(join(sp, "eps"), "needs one entry per step");
      }
      run.schedule = std::move(th);
    } else {
      throw ConfigError(join(sp, "kind"), "unknown schedule '" + kind + "' (constant, theoretical)");
    }
  }

  if (const YAML::Node s = node["score"]) {
    const std::string sp = join(path, "score");
    require_map(s, sp);
    const auto kind = scalar<std::string>(required(s, sp, "kind"), join(sp, "kind"));
    if (kind == "euclidean") {
      reject_unknown(s, sp, {"kind"});
      run.score = ScoreSpec::euclidean();
    } else if (kind == "mahalanobis") {
      reject_unknown(s, sp, {"kind", "H"});
      auto H = step_matrices(required(s, sp, "H"), join(sp, "H"), cfg.model.T, cfg.model.n,
                             cfg.model.n);
      try {
        run.score = ScoreSpec::mahalanobis(std::move(H));
      } catch (const Error& e) {
        throw ConfigError(join(sp, "H"), e.what());
      }
    } else {
      throw ConfigError(join(sp, "kind"), "unknown score '" + kind + "' (euclidean, mahalanobis)");
    }
  }
}

void parse_solver(const YAML::Node& node, ExperimentConfig& cfg) {
  const std::string path = "solver";
  require_map(node, path);
  reject_unknown(node, path,
                 {"restarts", "block_sweeps_max", "block_tol", "step", "grad_tol", "iters_max", "seed"});
  SolverConfig& s = cfg.run.solver;
  s.inner.restarts = scalar_or<int>(node, path, "restarts", s.inner.restarts);
  s.inner.block_sweeps_max = scalar_or<int>(node, path, "block_sweeps_max", s.inner.block_sweeps_max);
  s.inner.block_tol = number_or(node, path, "block_tol", s.inner.block_tol);
  s.outer.grad_tol = number_or(node, path, "grad_tol", s.outer.grad_tol);
  s.outer.iters_max = scalar_or<int>(node, path, "iters_max", s.outer.iters_max);
  s.seed = scalar_or<std::uint64_t>(node, path, "seed", s.seed);
  if (s.inner.restarts < 1) throw ConfigError(join(path, "restarts"), "must be >= 1");
  if (const YAML::Node step = node["step"]) {
    const auto rule = scalar<std::string>(step, join(path, "step"));
    if (rule == "automatic") {
      s.outer.step = StepRule::Automatic;
    } else if (rule == "backtracking") {
      s.outer.step = StepRule::Backtracking;
    } else {
      throw ConfigError(join(path, "step"), "expected automatic or backtracking");
    }
  }
}

void parse_oracle(const YAML::Node& node, ExperimentConfig& cfg) {
  const std::string path = "oracle";
  require_map(node, path);
  reject_unknown(node, path, {"samples", "seed"});
  OracleOptions& o = cfg.run.oracle;
  o.samples = scalar_or<std::size_t>(node, path, "samples", o.samples);
  o.seed = scalar_or<std::uint64_t>(node, path, "seed", o.seed);
  if (o.samples < 1) throw ConfigError(join(path, "samples"), "must be >= 1");
}

void parse_sections(const YAML::Node& root, ExperimentConfig& cfg) {
  if (const YAML::Node c = root["coverage"]) {
    require_map(c, "coverage");
    reject_unknown(c, "coverage", {"N", "fresh", "repetitions"});
    cfg.coverage.N = scalar_or<std::size_t>(c, "coverage", "N", cfg.coverage.N);
    cfg.coverage.fresh = scalar_or<std::size_t>(c, "coverage", "fresh", cfg.coverage.fresh);
    cfg.coverage.repetitions = scalar_or<int>(c, "coverage", "repetitions", cfg.coverage.repetitions);
    if (cfg.coverage.N < 1 || cfg.coverage.fresh < 1 || cfg.coverage.repetitions < 1) {
      throw ConfigError("coverage", "N, fresh and repetitions must be >= 1");
    }
  }
  if (const YAML::Node c = root["contraction"]) {
    require_map(c, "contraction");
    reject_unknown(c, "contraction", {"delta"});
    cfg.contraction.delta = number_or(c, "contraction", "delta", cfg.contraction.delta);
    if (!(cfg.contraction.delta > 0.0)) throw ConfigError("contraction.delta", "must be positive");
  }
  if (const YAML::Node g = root["ps_po_gap"]) {
    require_map(g, "ps_po_gap");
    reject_unknown(g, "ps_po_gap", {"grid_points", "grid_refinements", "grid_factor", "probes"});
    cfg.gap.grid.points = scalar_or<int>(g, "ps_po_gap", "grid_points", cfg.gap.grid.points);
    cfg.gap.grid.refinements =
        scalar_or<int>(g, "ps_po_gap", "grid_refinements", cfg.gap.grid.refinements);
    cfg.gap.grid.factor = scalar_or<int>(g, "ps_po_gap", "grid_factor", cfg.gap.grid.factor);
    cfg.gap.probes = scalar_or<int>(g, "ps_po_gap", "probes", cfg.gap.probes);
  }
  if (const YAML::Node p = root["provenance"]) {
    require_map(p, "provenance");
    reject_unknown(p, "provenance", {"alpha1", "note"});
    if (p["alpha1"]) cfg.alpha1 = number(p["alpha1"], "provenance.alpha1");
    cfg.provenance = scalar_or<std::string>(p, "provenance", "note", "");
  }
}

void set_path(YAML::Node node, const std::vector<std::string>& keys, std::size_t idx,
              const YAML::Node& value, const std::string& full) {
  if (idx + 1 == keys.size()) {
    node[keys[idx]] = value;
    return;
  }
  const YAML::Node child = node[keys[idx]];
  if (child.IsDefined() && !child.IsNull() && !child.IsMap()) {
    throw ConfigError(full, "'" + keys[idx] + "' is not a mapping");
  }
  if (!child.IsDefined() || child.IsNull()) node[keys[idx]] = YAML::Node(YAML::NodeType::Map);
  set_path(node[keys[idx]], keys, idx + 1, value, full);
}

void apply_override(YAML::Node& root, const Override& o) {
  std::vector<std::string> keys;
  std::stringstream ss(o.first);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ConfigError(o.first, "empty component in override key");
    keys.push_back(part);
  }
  if (keys.empty()) throw ConfigError("", "override key is empty");
  YAML::Node value;
  try {
    value = YAML::Load(o.second);
  } catch (const YAML::Exception& e) {
    throw ConfigError(o.first, std::string("cannot parse override value: ") + e.what());
  }
  set_path(root, keys, 0, value, o.first);
}

// --- emission ---------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  // Keep integral values recognizable as floating point.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void emit_vector(YAML::Emitter& out, const Vector& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << format_double(v[i]);
  out << YAML::EndSeq;
}

void emit_matrix(YAML::Emitter& out, const Matrix& M) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << format_double(M(i, j));
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

template <class V>
bool all_equal(const std::vector<V>& xs) {
  return std::all_of(xs.begin(), xs.end(), [&](const V& x) { return x == xs.front(); });
}

void emit_step_matrices(YAML::Emitter& out, const std::vector<Matrix>& Ms) {
  if (all_equal(Ms)) {
    emit_matrix(out, Ms.front());
    return;
  }
  out << YAML::BeginSeq;
  for (const auto& M : Ms) emit_matrix(out, M);
  out << YAML::EndSeq;
}

void emit_step_vectors(YAML::Emitter& out, const std::vector<Vector>& vs) {
  if (all_equal(vs)) {
    emit_vector(out, vs.front());
    return;
  }
  out << YAML::BeginSeq;
  for (const auto& v : vs) emit_vector(out, v);
  out << YAML::EndSeq;
}

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::EIrpc: return "e_irpc";
    case Experiment::IIrpc: return "i_irpc";
    case Experiment::CoverageAudit: return "coverage_audit";
    case Experiment::PsPoGap: return "ps_po_gap";
    case Experiment::Contraction: return "contraction";
  }
  return "unknown";
}

Experiment parse_experiment(const std::string& name) {
  for (auto e : {Experiment::EIrpc, Experiment::IIrpc, Experiment::CoverageAudit,
                 Experiment::PsPoGap, Experiment::Contraction}) {
    if (to_string(e) == name) return e;
  }
  throw ConfigError("experiment", "unknown experiment '" + name +
                                      "' (e_irpc, i_irpc, coverage_audit, ps_po_gap, contraction)");
}

Override parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("", "override '" + text + "' is not of the form key=value");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

ExperimentConfig parse_config(const std::string& text, const std::vector<Override>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("malformed YAML: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  require_map(root, "");
  for (const auto& o : overrides) apply_override(root, o);

  reject_unknown(root, "",
                 {"schema_version", "experiment", "description", "model", "loss", "noise", "run",
                  "solver", "oracle", "coverage", "contraction", "ps_po_gap", "provenance"});
  ExperimentConfig cfg;
  cfg.schema_version = scalar<int>(required(root, "", "schema_version"), "schema_version");
  if (cfg.schema_version != kConfigSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " + std::to_string(cfg.schema_version) +
                                            " (this build reads " +
                                            std::to_string(kConfigSchemaVersion) + ")");
  }
  cfg.experiment = parse_experiment(scalar<std::string>(required(root, "", "experiment"), "experiment"));
  cfg.description = scalar_or<std::string>(root, "", "description", "");
  parse_model(required(root, "", "model"), cfg);
  parse_loss(required(root, "", "loss"), cfg);
  parse_noise(required(root, "", "noise"), cfg);
  parse_run(required(root, "", "run"), cfg);
  if (root["solver"]) parse_solver(root["solver"], cfg);
  if (root["oracle"]) parse_oracle(root["oracle"], cfg);
  cfg.run.oracle.workers = cfg.run.workers;
  parse_sections(root, cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::vector<Override>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::string emit_config(const ExperimentConfig& cfg) {
  const auto* ltv = cfg.model.nominal.linear();
  const auto* quad = cfg.loss.quadratic();
  if (ltv == nullptr || quad == nullptr) {
    throw UnsupportedError("only linear dynamics with quadratic loss can be written as config");
  }

  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << cfg.schema_version;
  out << YAML::Key << "experiment" << YAML::Value << to_string(cfg.experiment);
  if (!cfg.description.empty()) {
    out << YAML::Key << "description" << YAML::Value << cfg.description;
  }

  const SystemModel& model = cfg.model;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n" << YAML::Value << model.n;
  out << YAML::Key << "m" << YAML::Value << model.m;
  out << YAML::Key << "T" << YAML::Value << model.T;
  out << YAML::Key << "x0" << YAML::Value;
  emit_vector(out, model.x0);
  out << YAML::Key << "A" << YAML::Value;
  emit_step_matrices(out, ltv->A);
  out << YAML::Key << "B" << YAML::Value;
  emit_step_matrices(out, ltv->B);
  out << YAML::Key << "c" << YAML::Value;
  emit_step_vectors(out, ltv->c);
  out << YAML::Key << "u_lower" << YAML::Value;
  emit_step_vectors(out, model.control_box.lower);
  out << YAML::Key << "u_upper" << YAML::Value;
  emit_step_vectors(out, model.control_box.upper);
  out << YAML::EndMap;

  out << YAML::Key << "loss" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "P" << YAML::Value;
  emit_matrix(out, quad->P);
  out << YAML::Key << "Q" << YAML::Value;
  emit_step_matrices(out, quad->Q);
  out << YAML::Key << "R" << YAML::Value;
  emit_step_matrices(out, quad->R);
  out << YAML::Key << "reg" << YAML::Value << format_double(cfg.loss.reg);
  out << YAML::EndMap;

  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  if (const auto* g = cfg.noise.as<GaussianIsotropic>()) {
    out << YAML::Key << "family" << YAML::Value << "gaussian_isotropic";
    out << YAML::Key << "sigma0" << YAML::Value << format_double(g->sigma0);
    out << YAML::Key << "sigma1" << YAML::Value << format_double(g->sigma1);
    out << YAML::Key << "sigma_min" << YAML::Value << format_double(g->sigma_min);
  } else if (const auto* b = cfg.noise.as<UniformBall>()) {
    out << YAML::Key << "family" << YAML::Value << "uniform_ball";
    out << YAML::Key << "rho0" << YAML::Value << format_double(b->rho0);
    out << YAML::Key << "rho1" << YAML::Value << format_double(b->rho1);
  } else if (const auto* a = cfg.noise.as<GaussianAnisotropic>(); a != nullptr && !a->factory) {
    out << YAML::Key << "family" << YAML::Value << "gaussian_anisotropic";
    out << YAML::Key << "cov0" << YAML::Value;
    emit_matrix(out, a->cov0);
    out << YAML::Key << "cov1" << YAML::Value;
    emit_matrix(out, a->cov1);
  } else {
    throw UnsupportedError("noise families with callbacks cannot be written as config");
  }
  out << YAML::EndMap;

  const RunConfig& run = cfg.run;
  out << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "p" << YAML::Value << format_double(run.p);
  out << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
  if (const auto* c = std::get_if<ConstantSchedule>(&run.schedule)) {
    out << YAML::Key << "kind" << YAML::Value << "constant";
    out << YAML::Key << "N" << YAML::Value << c->N;
  } else {
    const auto& th = std::get<TheoreticalSchedule>(run.schedule);
    out << YAML::Key << "kind" << YAML::Value << "theoretical";
    out << YAML::Key << "lambda" << YAML::Value << format_double(th.lambda);
    out << YAML::Key << "beta" << YAML::Value << format_double(th.beta);
    out << YAML::Key << "eps" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double e : th.eps) out << format_double(e);
    out << YAML::EndSeq;
    out << YAML::Key << "delta" << YAML::Value << format_double(th.delta);
    out << YAML::Key << "c" << YAML::Value << format_double(th.c);
  }
  out << YAML::EndMap;
  out << YAML::Key << "fix_tol" << YAML::Value << format_double(run.fix_tol);
  out << YAML::Key << "iters_max" << YAML::Value << run.iters_max;
  out << YAML::Key << "seed" << YAML::Value << run.seed;
  if (!cfg.seeds.empty()) {
    out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (auto s : cfg.seeds) out << s;
    out << YAML::EndSeq;
  }
  out << YAML::Key << "workers" << YAML::Value << run.workers;
  out << YAML::Key << "score" << YAML::Value << YAML::BeginMap;
  if (run.score.is_euclidean()) {
    out << YAML::Key << "kind" << YAML::Value << "euclidean";
  } else {
    out << YAML::Key << "kind" << YAML::Value << "mahalanobis";
    out << YAML::Key << "H" << YAML::Value;
    emit_step_matrices(out, run.score.matrices());
  }
  out << YAML::EndMap;
  out << YAML::EndMap;

  const SolverConfig& s = run.solver;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "restarts" << YAML::Value << s.inner.restarts;
  out << YAML::Key << "block_sweeps_max" << YAML::Value << s.inner.block_sweeps_max;
  out << YAML::Key << "block_tol" << YAML::Value << format_double(s.inner.block_tol);
  out << YAML::Key << "step" << YAML::Value
      << (s.outer.step == StepRule::Automatic ? "automatic" : "backtracking");
  out << YAML::Key << "grad_tol" << YAML::Value << format_double(s.outer.grad_tol);
  out << YAML::Key << "iters_max" << YAML::Value << s.outer.iters_max;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::EndMap;

  out << YAML::Key << "oracle" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "samples" << YAML::Value << run.oracle.samples;
  out << YAML::Key << "seed" << YAML::Value << run.oracle.seed;
  out << YAML::EndMap;

  out << YAML::Key << "coverage" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "N" << YAML::Value << cfg.coverage.N;
  out << YAML::Key << "fresh" << YAML::Value << cfg.coverage.fresh;
  out << YAML::Key << "repetitions" << YAML::Value << cfg.coverage.repetitions;
  out << YAML::EndMap;

  out << YAML::Key << "contraction" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "delta" << YAML::Value << format_double(cfg.contraction.delta);
  out << YAML::EndMap;

  out << YAML::Key << "ps_po_gap" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "grid_points" << YAML::Value << cfg.gap.grid.points;
  out << YAML::Key << "grid_refinements" << YAML::Value << cfg.gap.grid.refinements;
  out << YAML::Key << "grid_factor" << YAML::Value << cfg.gap.grid.factor;
  out << YAML::Key << "probes" << YAML::Value << cfg.gap.probes;
  out << YAML::EndMap;

  if (cfg.alpha1 || !cfg.provenance.empty()) {
    out << YAML::Key << "provenance" << YAML::Value << YAML::BeginMap;
    if (cfg.alpha1) out << YAML::Key << "alpha1" << YAML::Value << format_double(*cfg.alpha1);
    if (!cfg.provenance.empty()) out << YAML::Key << "note" << YAML::Value << cfg.provenance;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  if (!out.good()) throw Error(std::string("YAML emitter failed: ") + out.GetLastError());
  return std::string(out.c_str()) + "\n";
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace perfctl
