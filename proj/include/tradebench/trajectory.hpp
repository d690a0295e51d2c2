#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "tradebench/agents.hpp"
#include "tradebench/execsim.hpp"
#include "tradebench/metrics.hpp"
#include "tradebench/riskgate.hpp"

namespace tradebench {

inline constexpr int kSchemaVersion = 1;

struct ReproFields {
  std::uint64_t seed = 0;
  std::string config_hash;
  int schema_version = kSchemaVersion;
  std::string template_version;
};

// One audit record per decision step. Field-by-field documentation lives in
// docs/schema.md; replay and coverage treat that document as the contract.
struct TrajectoryStep {
  std::int64_t step = 0;
  std::map<std::string, Bar> observation;
  DecisionRecord decision;
  RiskReport risk_report;
  ExecutionOutcome execution;
  PortfolioState portfolio;
  std::string reflection;
  std::vector<std::string> memory_events;
  std::vector<std::string> tools;  // reserved extension point, empty today
  ReproFields repro;
};

std::string step_to_jsonl(const TrajectoryStep& step);
TrajectoryStep step_from_jsonl(const std::string& line);

// Append-only JSONL writer with a running content hash. Steps must arrive
// with consecutive indices.
class TrajectoryLog {
 public:
  explicit TrajectoryLog(const std::filesystem::path& path);

  void append(const TrajectoryStep& step);
  std::size_t size() const { return count_; }
  std::string content_hash() const;
  const std::filesystem::path& path() const { return path_; }
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t count_ = 0;
  bool first_ = true;
  std::int64_t last_step_ = 0;
  std::uint64_t hash_ = kFnvOffset;
};

struct LoadedLog {
  std::vector<TrajectoryStep> steps;
  std::string content_hash;
};

LoadedLog load_trajectory(const std::filesystem::path& path);

struct ReplayResult {
  std::vector<TrajectoryStep> steps;
  MetricsBundle recomputed;
  std::string content_hash;
};

// Rebuild the metric bundle purely from logged fields. Integer counters must
// match the run-time bundle exactly, reals to 1e-9.
ReplayResult replay(const std::filesystem::path& path, double periods_per_year);

struct CoverageReport {
  double risk_lifecycle = 0.0;
  double reproducibility = 0.0;
  double agent_trace = 0.0;

  bool complete() const {
    return risk_lifecycle == 1.0 && reproducibility == 1.0 && agent_trace == 1.0;
  }
};

CoverageReport coverage(const std::vector<TrajectoryStep>& steps);

// Single source of truth for how one audited step advances the risk memory;
// the run loop and log-based diagnostics must agree on this.
// Returns the human-readable memory events for the step record.
std::vector<std::string> apply_step_to_memory(RiskMemory& memory, const TrajectoryStep& step);

}  // namespace tradebench
