// Command-line front end: run experiment families, replay trajectory logs,
// compute representation / hallucination diagnostics, aggregate statistics
// and re-emit report tables and charts. Every subcommand is a thin shell over
// the library; exit codes are 0 (ok), 1 (validation error), 2 (run failure).
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tradebench/common.hpp"
#include "tradebench/dataio.hpp"
#include "tradebench/halluprobe.hpp"
#include "tradebench/orchestrator.hpp"
#include "tradebench/report.hpp"
#include "tradebench/reprdiag.hpp"
#include "tradebench/stats.hpp"
#include "tradebench/trajectory.hpp"

namespace tb = tradebench;
namespace fs = std::filesystem;

namespace {

std::vector<fs::path> find_logs(const fs::path& dir) {
  std::vector<fs::path> logs;
  if (fs::is_regular_file(dir) && dir.extension() == ".jsonl") {
    logs.push_back(dir);
    return logs;
  }
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      logs.push_back(entry.path());
    }
  }
  std::sort(logs.begin(), logs.end());
  return logs;
}

int cmd_run(const std::string& config_path, const std::string& family,
            const std::string& seeds_arg, const std::string& out_dir, std::size_t jobs) {
  tb::ExperimentConfig config = tb::ExperimentConfig::from_json_file(config_path);
  if (!family.empty()) config.name = family;
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (!seeds_arg.empty()) {
    config.seeds.clear();
    std::istringstream ss(seeds_arg);
    std::string token;
    while (std::getline(ss, token, ',')) {
      config.seeds.push_back(std::stoull(token));
    }
  }
  const tb::FamilySummary summary = tb::run_family(config, jobs);
  std::size_t complete = 0;
  for (const auto& run : summary.runs) complete += run.complete ? 1 : 0;
  std::cout << "run: family " << summary.family << ", " << complete << "/" << summary.runs.size()
            << " runs complete, outputs in " << summary.directory.string() << "\n";
  for (const auto& run : summary.runs) {
    if (!run.complete) {
      std::cout << "  incomplete: " << run.case_name << " seed " << run.seed << " (" << run.error
                << ")\n";
    }
  }
  return complete == summary.runs.size() ? 0 : 2;
}

int cmd_replay(const std::string& log_path, double annualization) {
  const tb::ReplayResult result = tb::replay(log_path, annualization);
  const tb::CoverageReport cov = tb::coverage(result.steps);
  std::cout << "replay: " << result.steps.size() << " steps, hash " << result.content_hash
            << ", return " << tb::format_fixed(result.recomputed.total_return, 4) << ", max_dd "
            << tb::format_fixed(result.recomputed.max_drawdown, 4) << ", fill_rate "
            << tb::format_fixed(result.recomputed.fill_rate, 4) << ", coverage "
            << tb::format_fixed(cov.risk_lifecycle, 3) << "/"
            << tb::format_fixed(cov.reproducibility, 3) << "/"
            << tb::format_fixed(cov.agent_trace, 3) << "\n";
  std::cout << tb::metrics_to_json(result.recomputed) << "\n";
  return 0;
}

struct ViewChoice {
  std::string name = "hash64";
};

tb::EmbeddingView build_view(const std::string& name, const std::vector<tb::TrajectoryStep>& steps,
                             const std::vector<std::string>& symbols, double noise,
                             std::uint64_t noise_seed, bool fused) {
  tb::EmbeddingView view;
  if (name == "intent") {
    std::vector<tb::DecisionRecord> decisions;
    decisions.reserve(steps.size());
    for (const auto& s : steps) decisions.push_back(s.decision);
    view = tb::intent_view(decisions, symbols);
    return view;
  }
  const auto texts = tb::plan_texts(steps);
  view = name == "lsa" ? tb::lsa_embed(texts) : tb::hash_embed(texts);
  if (fused) {
    auto working = steps;
    if (noise > 0.0) {
      // Perturb the logged observation bars; text channels stay fixed.
      for (auto& step : working) {
        for (auto& [symbol, bar] : step.observation) {
          tb::MarketPanel one;
          one.symbols = {symbol};
          one.bars = {{bar}};
          one = tb::inject_noise(one, noise, noise_seed);
          bar = one.bars[0][0];
        }
      }
    }
    view = tb::fuse(view, tb::fused_features(working));
  }
  return view;
}

int cmd_diag_repr(const std::string& dir, const std::string& view_name, const std::string& mode,
                  double noise, bool fused, const std::string& out_csv) {
  const auto logs = find_logs(dir);
  if (logs.empty()) {
    std::cerr << "diag repr: no .jsonl trajectories under " << dir << "\n";
    return 1;
  }
  const tb::AnchorMode anchor_mode =
      mode == "max" ? tb::AnchorMode::max_anchor : tb::AnchorMode::rolling;

  std::ostringstream csv;
  csv << "trajectory,view,mode,steps,anchors,pre_steps,normal_pre_dist,balanced_accuracy,"
         "path_length,normal_step,pre_step,velocity_ratio,normal_rank,pre_rank,rank_delta,"
         "contraction_rate,phase_purity,ttr_delta,entropy_delta\n";
  std::size_t total_anchors = 0;
  for (const auto& log : logs) {
    const auto loaded = tb::load_trajectory(log);
    if (loaded.steps.size() < 12) continue;
    std::vector<double> equity;
    for (const auto& s : loaded.steps) equity.push_back(s.portfolio.equity);
    const auto labels = tb::label_phases(equity, anchor_mode);
    std::size_t pre_steps = 0;
    for (auto p : labels.labels) pre_steps += p == tb::Phase::pre_drawdown ? 1 : 0;
    if (labels.anchors.empty() || pre_steps == 0) continue;

    std::vector<std::string> symbols;
    for (const auto& [symbol, _] : loaded.steps.front().observation) symbols.push_back(symbol);
    const auto view = build_view(view_name, loaded.steps, symbols, noise, 17, fused);
    const auto diag = tb::manifold_diagnostics(view, labels);

    double ttr = 0.0, entropy = 0.0;
    bool lexical_ok = false;
    if (view_name != "intent") {
      try {
        const auto deltas = tb::lexical_controls(tb::plan_texts(loaded.steps), labels);
        ttr = deltas.ttr_delta;
        entropy = deltas.entropy_delta;
        lexical_ok = true;
      } catch (const tb::Error&) {
      }
    }

    total_anchors += labels.anchors.size();
    csv << log.filename().string() << ',' << view_name << (fused ? "+fused" : "") << ','
        << (anchor_mode == tb::AnchorMode::max_anchor ? "max" : "rolling") << ','
        << loaded.steps.size() << ',' << labels.anchors.size() << ',' << pre_steps << ','
        << tb::format_full(diag.centroids.normal_pre) << ','
        << tb::format_full(diag.balanced_accuracy) << ',' << tb::format_full(diag.path_length)
        << ',' << tb::format_full(diag.normal_step) << ',' << tb::format_full(diag.pre_step) << ','
        << tb::format_full(diag.velocity_ratio) << ','
        << (diag.rank_defined ? tb::format_full(diag.normal_rank) : std::string()) << ','
        << (diag.rank_defined ? tb::format_full(diag.pre_rank) : std::string()) << ','
        << (diag.rank_defined ? tb::format_full(diag.rank_delta) : std::string()) << ','
        << (diag.rank_defined ? tb::format_full(diag.contraction_rate) : std::string()) << ','
        << (diag.purity_defined ? tb::format_full(diag.phase_purity) : std::string()) << ','
        << (lexical_ok ? tb::format_full(ttr) : std::string()) << ','
        << (lexical_ok ? tb::format_full(entropy) : std::string()) << '\n';
  }

  const fs::path out_path = out_csv.empty() ? fs::path(dir) / "repr_diagnostics.csv" : fs::path(out_csv);
  std::ofstream out(out_path);
  out << csv.str();
  std::cout << "diag repr: " << logs.size() << " trajectories, " << total_anchors
            << " anchors, view " << view_name << (fused ? "+fused" : "") << ", wrote "
            << out_path.string() << "\n";
  return 0;
}

int cmd_diag_halluc(const std::string& dir, long export_n, std::uint64_t seed,
                    const std::string& out_csv) {
  const auto logs = find_logs(dir);
  if (logs.empty()) {
    std::cerr << "diag halluc: no .jsonl trajectories under " << dir << "\n";
    return 1;
  }
  std::ostringstream csv;
  csv << "trajectory,steps,scored_steps,mean_proxy,high_proxy_steps,risk_gate_corr,"
         "violations_corr,calibration_gap_corr,rejected_corr,high_gate_rate,low_gate_rate\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? tb::format_full(*v) : std::string();
  };
  for (const auto& log : logs) {
    const auto loaded = tb::load_trajectory(log);
    if (loaded.steps.size() < 3) continue;
    const auto scores = tb::proxy_scores(loaded.steps);
    double mean = 0.0;
    std::size_t high = 0, scored = 0;
    for (const auto& s : scores) {
      mean += s.score;
      high += s.score >= tb::kHighProxyThreshold ? 1 : 0;
      scored += 1;
    }
    mean /= static_cast<double>(std::max<std::size_t>(scored, 1));
    const auto corr = tb::audit_correlations(scores, loaded.steps);
    csv << log.filename().string() << ',' << loaded.steps.size() << ',' << scored << ','
        << tb::format_full(mean) << ',' << high << ',' << opt(corr.risk_gate) << ','
        << opt(corr.violations) << ',' << opt(corr.calibration_gap) << ',' << opt(corr.rejected)
        << ',' << tb::format_full(corr.high_gate_rate) << ','
        << tb::format_full(corr.low_gate_rate) << '\n';

    if (export_n > 0) {
      const fs::path sample_path = log.parent_path() / (log.stem().string() + "_annotations.csv");
      const auto exported = tb::export_annotation_sample(loaded.steps, sample_path,
                                                         static_cast<std::size_t>(export_n), seed);
      for (const auto& warning : exported.warnings) {
        std::cout << "  note (" << log.filename().string() << "): " << warning << "\n";
      }
    }
  }
  const fs::path out_path = out_csv.empty() ? fs::path(dir) / "halluc_diagnostics.csv" : fs::path(out_csv);
  std::ofstream out(out_path);
  out << csv.str();
  std::cout << "diag halluc: " << logs.size() << " trajectories scored, wrote "
            << out_path.string() << "\n";
  return 0;
}

int cmd_stats(const std::string& dir, const std::string& baseline, double annualization) {
  const auto logs = find_logs(dir);
  if (logs.empty()) {
    std::cerr << "stats: no .jsonl trajectories under " << dir << "\n";
    return 1;
  }
  // Recompute bundles from the logs alone: file names follow {case}_seed{n}.jsonl.
  std::map<std::string, std::map<std::uint64_t, tb::MetricsBundle>> by_case;
  for (const auto& log : logs) {
    const std::string stem = log.stem().string();
    const auto pos = stem.rfind("_seed");
    if (pos == std::string::npos) continue;
    const std::string case_name = stem.substr(0, pos);
    const std::uint64_t seed = std::stoull(stem.substr(pos + 5));
    const auto result = tb::replay(log, annualization);
    by_case[case_name][seed] = result.recomputed;
  }
  if (by_case.empty()) {
    std::cerr << "stats: no {case}_seed{n}.jsonl logs found\n";
    return 1;
  }
  std::string base = baseline;
  if (base.empty()) base = by_case.begin()->first;
  const auto tables = tb::sweep_aggregate(by_case, base);

  std::ostringstream csv;
  csv << "case,baseline,metric,n,mean_diff,ci_low,ci_high,win_rate,p_value,ties,degenerate\n";
  for (const auto& row : tables.paired_rows) {
    csv << row.case_name << ',' << base << ',' << row.metric << ',' << row.stats.n << ','
        << tb::format_full(row.stats.mean_diff) << ',' << tb::format_full(row.stats.ci_low) << ','
        << tb::format_full(row.stats.ci_high) << ',' << tb::format_full(row.stats.win_rate) << ','
        << tb::format_full(row.stats.p_value) << ',' << row.stats.ties << ','
        << (row.stats.degenerate ? 1 : 0) << '\n';
  }
  const fs::path out_path = fs::path(dir) / "paired_stats.csv";
  std::ofstream out(out_path);
  out << csv.str();
  std::cout << "stats: " << by_case.size() << " cases vs baseline " << base << ", wrote "
            << out_path.string() << "\n";
  return 0;
}

int cmd_report(const std::string& dir) {
  const fs::path summary_path = fs::path(dir) / "summary.json";
  const tb::FamilySummary summary = tb::load_summary_json(summary_path);
  tb::emit_tables(summary, fs::path(dir) / "tables");
  tb::emit_charts(summary, fs::path(dir) / "charts");
  std::cout << "report: regenerated tables and charts for family " << summary.family << " under "
            << dir << "\n";
  return 0;
}

int cmd_export_panel(const std::string& out_prefix, const std::string& volatility,
                     const std::string& tail, const std::string& trend, std::uint64_t seed,
                     std::size_t steps, const std::vector<std::string>& symbols) {
  tb::RegimeSpec regime;
  regime.volatility = tb::vol_state_from_string(volatility);
  regime.tail = tb::tail_state_from_string(tail);
  regime.trend = tb::trend_sign_from_string(trend);
  regime.seed = seed;
  const auto panel = tb::generate_market(regime, symbols, steps);
  {
    std::ofstream out(out_prefix + ".csv");
    tb::write_panel_csv(panel, out);
  }
  {
    std::ofstream out(out_prefix + ".manifest.json");
    out << tb::panel_manifest_json(panel) << "\n";
  }
  std::cout << "export-panel: wrote " << out_prefix << ".csv (+manifest), " << symbols.size()
            << " symbols x " << steps << " steps\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic trading-agent benchmark: replayable lifecycle trajectories, "
               "risk-gate calibration, execution realism, representation diagnostics"};
  app.require_subcommand(1);

  // run
  std::string run_config, run_family_name, run_seeds, run_out;
  std::size_t run_jobs = 1;
  auto* run_cmd = app.add_subcommand("run", "run an experiment family from a JSON config");
  run_cmd->add_option("config", run_config, "experiment config JSON")->required();
  run_cmd->add_option("--family", run_family_name, "override the family name");
  run_cmd->add_option("--seeds", run_seeds, "comma-separated seed list override");
  run_cmd->add_option("--out", run_out, "output root directory");
  run_cmd->add_option("--jobs", run_jobs, "worker threads for (case, seed) runs");

  // replay
  std::string replay_path;
  double replay_annualization = 52.0;
  auto* replay_cmd = app.add_subcommand("replay", "recompute metrics from a trajectory log");
  replay_cmd->add_option("trajectory", replay_path, "trajectory .jsonl path")->required();
  replay_cmd->add_option("--annualization", replay_annualization, "periods per year for Sharpe");

  // diag
  auto* diag_cmd = app.add_subcommand("diag", "representation / hallucination diagnostics");
  diag_cmd->require_subcommand(1);

  std::string repr_dir, repr_view = "hash64", repr_mode = "rolling", repr_out;
  double repr_noise = 0.0;
  bool repr_fused = false;
  auto* repr_cmd = diag_cmd->add_subcommand("repr", "embedding-view drift diagnostics");
  repr_cmd->add_option("dir", repr_dir, "directory of trajectory .jsonl files")->required();
  repr_cmd->add_option("--view", repr_view, "hash64 | lsa | intent")
      ->check(CLI::IsMember({"hash64", "lsa", "intent"}));
  repr_cmd->add_option("--mode", repr_mode, "max | rolling")
      ->check(CLI::IsMember({"max", "rolling"}));
  repr_cmd->add_option("--noise", repr_noise, "observation-noise epsilon for the fused view");
  repr_cmd->add_flag("--fused", repr_fused, "append structured market/risk features");
  repr_cmd->add_option("--out", repr_out, "output CSV path");

  std::string halluc_dir, halluc_out;
  long halluc_export = 0;
  std::uint64_t halluc_seed = 7;
  auto* halluc_cmd = diag_cmd->add_subcommand("halluc", "audit-grounded unsupported-claim proxy");
  halluc_cmd->add_option("dir", halluc_dir, "directory of trajectory .jsonl files")->required();
  halluc_cmd->add_option("--export-annotations", halluc_export,
                         "export a blind annotation sample of this size");
  halluc_cmd->add_option("--seed", halluc_seed, "sampling seed for the annotation export");
  halluc_cmd->add_option("--out", halluc_out, "output CSV path");

  // stats
  std::string stats_dir, stats_baseline;
  double stats_annualization = 52.0;
  auto* stats_cmd = app.add_subcommand("stats", "paired statistics across logged runs");
  stats_cmd->add_option("dir", stats_dir, "directory of trajectory .jsonl files")->required();
  stats_cmd->add_option("--baseline", stats_baseline, "baseline case name");
  stats_cmd->add_option("--annualization", stats_annualization, "periods per year for Sharpe");

  // report
  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "re-emit tables and charts from summary.json");
  report_cmd->add_option("dir", report_dir, "family output directory")->required();

  // export-panel
  std::string panel_out = "panel", panel_vol = "medium", panel_tail = "gaussian", panel_trend = "up";
  std::uint64_t panel_seed = 3;
  std::size_t panel_steps = 120;
  std::vector<std::string> panel_symbols = {"SYN1", "SYN2", "SYN3"};
  auto* panel_cmd = app.add_subcommand("export-panel", "generate a synthetic OHLCV panel to CSV");
  panel_cmd->add_option("--out", panel_out, "output path prefix");
  panel_cmd->add_option("--volatility", panel_vol, "calm|low|medium|high|crisis");
  panel_cmd->add_option("--tail", panel_tail, "gaussian|student_t|jump|student_t_jump");
  panel_cmd->add_option("--trend", panel_trend, "up|down");
  panel_cmd->add_option("--seed", panel_seed, "generator seed");
  panel_cmd->add_option("--steps", panel_steps, "bar count");
  panel_cmd->add_option("--symbols", panel_symbols, "symbol list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // prints usage; nonzero on bad flags
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_config, run_family_name, run_seeds, run_out, run_jobs);
    if (replay_cmd->parsed()) return cmd_replay(replay_path, replay_annualization);
    if (diag_cmd->parsed()) {
      if (repr_cmd->parsed()) {
        return cmd_diag_repr(repr_dir, repr_view, repr_mode, repr_noise, repr_fused, repr_out);
      }
      if (halluc_cmd->parsed()) {
        return cmd_diag_halluc(halluc_dir, halluc_export, halluc_seed, halluc_out);
      }
    }
    if (stats_cmd->parsed()) return cmd_stats(stats_dir, stats_baseline, stats_annualization);
    if (report_cmd->parsed()) return cmd_report(report_dir);
    if (panel_cmd->parsed()) {
      return cmd_export_panel(panel_out, panel_vol, panel_tail, panel_trend, panel_seed,
                              panel_steps, panel_symbols);
    }
  } catch (const tb::Error& e) {
    const std::string kind = e.kind();
    std::cerr << "error: " << e.what() << "\n";
    // Validation-style failures exit 1; run/IO failures exit 2.
    const bool validation = kind == "invalid-config" || kind == "invalid-regime" ||
                            kind == "invalid-horizon" || kind == "invalid-noise" ||
                            kind == "malformed-input" || kind == "shape-error";
    return validation ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
