#include "perfctl/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "json.hpp"

#include "perfctl/errors.hpp"

namespace perfctl {

namespace {

using nlohmann::json;

nlohmann::ordered_json to_json(const Vector& v) {
  auto out = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

double number_or_nan(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace

void write_history_jsonl(std::ostream& out, const IterationHistory& history, bool with_timing) {
  for (const auto& rec : history.records) {
    nlohmann::ordered_json line;
    line["i"] = rec.i;
    line["u"] = to_json(rec.u.flat());
    line["radii"] = rec.i == 0 ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(rec.radii);
    line["inner_value"] = rec.inner_value;
    line["step_norm"] = rec.step_norm;
    line["N_i"] = rec.N;
    line["wall_ms"] = with_timing ? nlohmann::ordered_json(rec.wall_ms) : nlohmann::ordered_json(nullptr);
    line["seed"] = rec.seed;
    out << line.dump() << '\n';
  }
}

IterationHistory read_history_jsonl(std::istream& in, int m) {
  IterationHistory history;
  std::string text;
  int line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    try {
      const json line = json::parse(text);
      IterationRecord rec;
      rec.i = line.at("i").get<int>();
      const auto u = line.at("u").get<std::vector<double>>();
      rec.u = ControlTrajectory::from_flat(Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size())), m);
      if (!line.at("radii").is_null()) rec.radii = line.at("radii").get<std::vector<double>>();
      rec.inner_value = number_or_nan(line.at("inner_value"));
      rec.step_norm = number_or_nan(line.at("step_norm"));
      rec.N = line.at("N_i").get<std::size_t>();
      rec.wall_ms = number_or_nan(line.at("wall_ms"));
      rec.seed = line.value("seed", std::uint64_t{0});
      if (rec.i != static_cast<int>(history.records.size())) {
        throw ConfigError(where, "records must be numbered 0, 1, 2, ...");
      }
      history.records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ConfigError(where, e.what());
    } catch (const DimensionError& e) {
      throw ConfigError(where, e.what());
    }
  }
  if (history.records.empty()) throw ConfigError("", "history is empty");
  return history;
}

void write_summary_csv(std::ostream& out, const IterationHistory& history) {
  out << "i,step_norm,inner_value,N_i,u_norm,radii_max\n"
      << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& rec : history.records) {
    const double rmax =
        rec.radii.empty() ? 0.0 : *std::max_element(rec.radii.begin(), rec.radii.end());
    out << rec.i << ',' << rec.step_norm << ',' << rec.inner_value << ',' << rec.N << ','
        << rec.u.flat().norm() << ',' << rmax << '\n';
  }
}

void write_timings_csv(std::ostream& out, const IterationHistory& history) {
  out << "i,wall_ms\n" << std::setprecision(6);
  for (const auto& rec : history.records) out << rec.i << ',' << rec.wall_ms << '\n';
}

HistoryDiff compare_histories(const IterationHistory& a, const IterationHistory& b) {
  if (a.records.empty() || b.records.empty()) throw Error("cannot compare an empty history");
  const auto ulen = a.records.front().u.flat().size();
  if (ulen != b.records.front().u.flat().size()) {
    throw DimensionError("histories differ in control length (" + std::to_string(ulen) + " vs " +
                         std::to_string(b.records.front().u.flat().size()) + ")");
  }
  if (a.records.size() > 1 && b.records.size() > 1 &&
      a.records[1].radii.size() != b.records[1].radii.size()) {
    throw DimensionError("histories differ in horizon (" + std::to_string(a.records[1].radii.size()) +
                         " vs " + std::to_string(b.records[1].radii.size()) + " steps)");
  }
  HistoryDiff diff;
  const std::size_t common = std::min(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < common; ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    diff.control_distance.push_back((ra.u.flat() - rb.u.flat()).norm());
    double dr = 0.0;
    for (std::size_t t = 0; t < std::min(ra.radii.size(), rb.radii.size()); ++t) {
      dr = std::max(dr, std::abs(ra.radii[t] - rb.radii[t]));
    }
    diff.radii_difference.push_back(dr);
  }
  diff.terminal_distance = (a.final_control().flat() - b.final_control().flat()).norm();
  return diff;
}

void write_diff_report(std::ostream& out, const HistoryDiff& diff) {
  out << "i,control_distance,radii_difference\n"
      << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < diff.control_distance.size(); ++i) {
    out << i << ',' << diff.control_distance[i] << ',' << diff.radii_difference[i] << '\n';
  }
  out << "terminal_distance," << diff.terminal_distance << '\n';
}

std::filesystem::path fresh_directory(const std::filesystem::path& root, const std::string& name) {
  std::filesystem::create_directories(root);
  for (int k = 0;; ++k) {
    const auto candidate = root / (k == 0 ? name : name + "-" + std::to_string(k));
    // create_directory reports false when the path already exists.
    if (std::filesystem::create_directory(candidate)) return candidate;
  }
}

}  // namespace perfctl
