#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "perfctl/irpc.hpp"
#include "perfctl/types.hpp"

namespace perfctl {

inline constexpr int kConfigSchemaVersion = 1;

enum class Experiment { EIrpc, IIrpc, CoverageAudit, PsPoGap, Contraction };

std::string to_string(Experiment e);
Experiment parse_experiment(const std::string& name);

struct CoverageSettings {
  std::size_t N = 999;
  std::size_t fresh = 100'000;
  int repetitions = 200;
};

struct ContractionSettings {
  /// Distance threshold for the iteration-count check.
  double delta = 1e-4;
};

struct GapSettings {
  GridSpec grid;
  int probes = 24;
};

/// Everything one `run` needs. Parsed from YAML; see README for the schema.
struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  Experiment experiment = Experiment::EIrpc;
  std::string description;
  SystemModel model;
  LossSpec loss;
  NoiseModel noise;
  RunConfig run;
  /// Independent runs, one artifact subdirectory each. Empty: just run.seed.
  std::vector<std::uint64_t> seeds;
  CoverageSettings coverage;
  ContractionSettings contraction;
  GapSettings gap;
  /// Documented contraction rate of the fixture, if any.
  std::optional<double> alpha1;
  std::string provenance;
};

/// `key=value` with a dotted key; the value is read as a YAML scalar or flow
/// sequence.
using Override = std::pair<std::string, std::string>;
Override parse_override(const std::string& text);

/// Throws ConfigError naming the offending field path.
ExperimentConfig parse_config(const std::string& text, const std::vector<Override>& overrides = {});
ExperimentConfig load_config(const std::string& path, const std::vector<Override>& overrides = {});

/// Canonical YAML; parse_config(emit_config(c)) reproduces c. Only models
/// with linear dynamics, quadratic loss and a non-custom noise family can be
/// emitted.
std::string emit_config(const ExperimentConfig& config);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace perfctl
