#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tradebench/dataio.hpp"
#include "tradebench/execsim.hpp"
#include "tradebench/riskgate.hpp"
#include "tradebench/stats.hpp"
#include "tradebench/trajectory.hpp"

namespace tradebench {

enum class AnalystKind { momentum, macro_news, full, buy_hold, markowitz, llm_replay };
AnalystKind analyst_kind_from_string(std::string_view s);
const char* to_string(AnalystKind kind);

struct CaseConfig {
  std::string name;
  AnalystKind analyst = AnalystKind::full;
  RiskPolicy policy;           // policy.enabled=false reproduces the no-risk ablation
  ExecConfig exec;
  FeedbackCondition feedback = FeedbackCondition::true_feedback;
  bool cot_free = false;
  bool memory_overlay = false;
  SignalConfig signal;
  // markowitz
  std::size_t markowitz_window = 16;
  double per_name_cap = 0.08;
  // llm_replay
  std::string model;
  std::string cache_path;
  ParseMode parse_mode = ParseMode::rationale_json;
};

struct PanelSource {
  enum class Kind { regime, regime_grid, file };
  Kind kind = Kind::regime;
  std::vector<std::string> symbols = {"SYN1", "SYN2", "SYN3"};
  VolState volatility = VolState::medium;
  TailState tail = TailState::gaussian;
  TrendSign trend = TrendSign::up;
  std::size_t grid_count = 120;
  std::uint64_t grid_base_seed = 1;
  std::string file_path;
  PanelFormat file_format = PanelFormat::csv;
};

struct ExperimentConfig {
  std::string name = "experiment";
  PanelSource panel;
  std::vector<CaseConfig> cases;
  std::vector<std::uint64_t> seeds = {3, 7, 11};
  std::size_t steps = 120;
  std::size_t warmup = 16;       // first decision step; must cover the lookback
  double initial_capital = 1e7;
  double annualization = 52.0;
  double noise_epsilon = 0.0;    // observation noise applied to the panel
  std::uint64_t noise_seed = 17;
  std::string baseline_case;     // paired-stats reference, optional
  std::string output_dir = "out";

  static ExperimentConfig from_json_file(const std::filesystem::path& path);
  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json() const;
  std::string config_hash() const;
  void validate() const;
};

struct RunResult {
  std::string case_name;
  std::uint64_t seed = 0;
  bool complete = false;
  std::string error;       // error kind when incomplete
  std::string log_path;    // relative to the family directory
  std::string log_hash;
  MetricsBundle metrics;
  CoverageReport coverage;
};

struct FamilySummary {
  std::string family;
  std::string config_hash;
  double annualization = 52.0;
  std::string baseline_case;
  std::vector<std::string> case_names;
  std::vector<RunResult> runs;
  SweepTables tables;      // empty when no baseline or too few seeds
  std::filesystem::path directory;
};

// One (case, seed) run: pure function of (config, case, seed, cache).
// Returns the metrics bundle and writes {case}_seed{seed}.jsonl under out_dir.
RunResult run_case(const ExperimentConfig& config, const std::string& case_name,
                   std::uint64_t seed, const std::filesystem::path& out_dir);

// Internal variant reusing a prepared panel (shared across cases of a seed).
RunResult run_case_on_panel(const ExperimentConfig& config, const CaseConfig& case_config,
                            std::uint64_t seed, const MarketPanel& panel,
                            const std::filesystem::path& out_dir);

// All (case, seed) runs plus aggregation, summary.json, CSV tables and SVG
// charts under {output_dir}/{family}/.
FamilySummary run_family(const ExperimentConfig& config, std::size_t jobs = 1);

void write_summary_json(const FamilySummary& summary, const std::filesystem::path& path);
FamilySummary load_summary_json(const std::filesystem::path& path);

MarketPanel build_panel(const ExperimentConfig& config, std::uint64_t seed);

std::string metrics_to_json(const MetricsBundle& bundle);
MetricsBundle metrics_from_json_text(const std::string& text);

}  // namespace tradebench
