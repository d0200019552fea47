#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "perfctl/irpc.hpp"

namespace perfctl {

inline constexpr int kHistorySchemaVersion = 1;
inline constexpr int kSummarySchemaVersion = 1;

/// One JSON object per record:
/// {"i", "u", "radii", "inner_value", "step_norm", "N_i", "wall_ms", "seed"}.
/// `radii` is null for record 0. `wall_ms` is null unless `with_timing`, so
/// that reruns produce identical bytes.
void write_history_jsonl(std::ostream& out, const IterationHistory& history,
                         bool with_timing = false);

/// Reads the records back; `u` is restored with step dimension `m`.
/// Throws ConfigError with the line number on malformed input.
IterationHistory read_history_jsonl(std::istream& in, int m = 1);

/// `i,step_norm,inner_value,N_i,u_norm,radii_max`
void write_summary_csv(std::ostream& out, const IterationHistory& history);

/// `i,wall_ms`
void write_timings_csv(std::ostream& out, const IterationHistory& history);

struct HistoryDiff {
  std::vector<double> control_distance;
  /// max_t |radii_a[t] - radii_b[t]|; 0 for record 0.
  std::vector<double> radii_difference;
  double terminal_distance = 0.0;
};

/// Per-iteration comparison over the common prefix. Throws DimensionError
/// when the control or radius lengths differ.
HistoryDiff compare_histories(const IterationHistory& a, const IterationHistory& b);

void write_diff_report(std::ostream& out, const HistoryDiff& diff);

/// `root/name`, or `root/name-1`, `root/name-2`, ... if taken. Creates it.
std::filesystem::path fresh_directory(const std::filesystem::path& root, const std::string& name);

}  // namespace perfctl
