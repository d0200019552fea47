#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "perfctl/cli.hpp"
#include "perfctl/config.hpp"

using namespace perfctl;

namespace {

std::string without_line(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

const char* kMinimal = R"(schema_version: 1
experiment: i_irpc
model:
  n: 1
  m: 1
  T: 2
  x0: 0.5
  A: 1
  B: [[1.0]]
  u_lower: -1
  u_upper: 1
loss:
  P: 1
  R: 2
noise:
  family: uniform_ball
  rho0: 0.1
  rho1: 0.01
run:
  p: 0.2
)";

std::string error_path(const std::string& text, const std::vector<Override>& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<parsed>";
}

}  // namespace

TEST_CASE("every fixture survives emit and parse") {
  for (const auto& name : fixture_names()) {
    CAPTURE(name);
    const ExperimentConfig cfg = fixture(name);
    const std::string text = emit_config(cfg);
    const ExperimentConfig back = parse_config(text);
    CHECK(emit_config(back) == text);
    CHECK(back.experiment == cfg.experiment);
    CHECK(back.model.T == cfg.model.T);
    CHECK(back.run.p == cfg.run.p);
    CHECK(back.alpha1 == cfg.alpha1);
    CHECK(back.model.x0 == cfg.model.x0);
    const auto& la = *back.model.nominal.linear();
    const auto& lb = *cfg.model.nominal.linear();
    for (std::size_t t = 0; t < la.A.size(); ++t) {
      CHECK(la.A[t] == lb.A[t]);
      CHECK(la.B[t] == lb.B[t]);
    }
  }
}

TEST_CASE("scalars and single matrices broadcast over the horizon") {
  const ExperimentConfig cfg = parse_config(kMinimal);
  CHECK(cfg.experiment == Experiment::IIrpc);
  CHECK(cfg.model.T == 2);
  const auto& ltv = *cfg.model.nominal.linear();
  REQUIRE(ltv.A.size() == 2);
  CHECK(ltv.A[1](0, 0) == 1.0);
  CHECK(ltv.c[1](0) == 0.0);
  REQUIRE(cfg.loss.quadratic());
  CHECK(cfg.loss.quadratic()->R[1](0, 0) == 2.0);
  CHECK(cfg.loss.quadratic()->Q[0](0, 0) == 0.0);
  CHECK(cfg.model.control_box.upper[1](0) == 1.0);
  REQUIRE(cfg.noise.as<UniformBall>());
  CHECK(cfg.noise.as<UniformBall>()->rho1 == 0.01);
  CHECK(cfg.run.p == 0.2);
}

TEST_CASE("per-step matrices") {
  std::string text = kMinimal;
  text = without_line(text, "  A: 1");
  text.insert(text.find("  B:"), "  A: [[[1.0]], [[0.5]]]\n");
  const auto cfg = parse_config(text);
  CHECK(cfg.model.nominal.linear()->A[1](0, 0) == 0.5);
  std::string wrong = without_line(kMinimal, "  A: 1");
  wrong.insert(wrong.find("  B:"), "  A: [[[1.0]], [[0.5]], [[2.0]]]\n");
  CHECK(error_path(wrong) == "model.A");
}

TEST_CASE("missing fields are reported with their path") {
  CHECK(error_path(without_line(kMinimal, "  p:")) == "run.p");
  CHECK(error_path(without_line(kMinimal, "  rho0:")) == "noise.rho0");
  CHECK(error_path(without_line(kMinimal, "experiment:")) == "experiment");
  try {
    parse_config(without_line(kMinimal, "  p:"));
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run.p") != std::string::npos);
  }
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK(error_path(std::string(kMinimal) + "  bogus: 3\n") == "run.bogus");
  CHECK(error_path(std::string(kMinimal) + "extra: 1\n") == "extra");
  CHECK(error_path(kMinimal, {{"run.p", "1.5"}}) == "run.p");
  CHECK(error_path(kMinimal, {{"schema_version", "2"}}) == "schema_version");
  CHECK(error_path(kMinimal, {{"experiment", "nope"}}) == "experiment");
  CHECK(error_path(kMinimal, {{"noise.family", "laplace"}}) == "noise.family");
  CHECK(error_path("[1, 2") != "<parsed>");
}

TEST_CASE("overrides") {
  const auto cfg = parse_config(kMinimal, {{"run.p", "0.05"},
                                           {"run.seed", "99"},
                                           {"run.schedule", "{kind: constant, N: 499}"},
                                           {"solver.restarts", "4"},
                                           {"model.u_upper", "[0.5]"}});
  CHECK(cfg.run.p == 0.05);
  CHECK(cfg.run.seed == 99);
  CHECK(std::get<ConstantSchedule>(cfg.run.schedule).N == 499);
  CHECK(cfg.run.solver.inner.restarts == 4);
  CHECK(cfg.model.control_box.upper[0](0) == 0.5);

  const auto workers = parse_config(kMinimal, {{"run.workers", "8"}});
  CHECK(workers.run.workers == 8);
  CHECK(workers.run.oracle.workers == 8);

  const auto o = parse_override("run.schedule.N=123");
  CHECK(o.first == "run.schedule.N");
  CHECK(o.second == "123");
  CHECK_THROWS_AS(parse_override("no-equals-sign"), ConfigError);
}

TEST_CASE("theoretical schedule and Mahalanobis score parse") {
  const auto cfg = parse_config(
      kMinimal, {{"run.schedule", "{kind: theoretical, lambda: 2, beta: 1, eps: [0.1, 0.2], delta: 0.05}"},
                 {"run.score", "{kind: mahalanobis, H: [[2.0]]}"}});
  const auto& th = std::get<TheoreticalSchedule>(cfg.run.schedule);
  CHECK(th.lambda == 2.0);
  CHECK(th.eps.size() == 2);
  CHECK(th.c == 1.0);
  CHECK_FALSE(cfg.run.score.is_euclidean());
  CHECK(cfg.run.score.matrices().size() == 2);
  const auto back = parse_config(emit_config(cfg));
  CHECK(emit_config(back) == emit_config(cfg));
}

TEST_CASE("fnv1a") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
