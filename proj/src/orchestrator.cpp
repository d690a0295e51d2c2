#include "tradebench/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tradebench/report.hpp"

namespace tradebench {

namespace {
using Json = nlohmann::ordered_json;
}

AnalystKind analyst_kind_from_string(std::string_view s) {
  if (s == "momentum") return AnalystKind::momentum;
  if (s == "macro_news") return AnalystKind::macro_news;
  if (s == "full") return AnalystKind::full;
  if (s == "buy_hold") return AnalystKind::buy_hold;
  if (s == "markowitz") return AnalystKind::markowitz;
  if (s == "llm_replay") return AnalystKind::llm_replay;
  fail("invalid-config", "unknown analyst '" + std::string(s) + "'");
}

const char* to_string(AnalystKind kind) {
  switch (kind) {
    case AnalystKind::momentum: return "momentum";
    case AnalystKind::macro_news: return "macro_news";
    case AnalystKind::full: return "full";
    case AnalystKind::buy_hold: return "buy_hold";
    case AnalystKind::markowitz: return "markowitz";
    case AnalystKind::llm_replay: return "llm_replay";
  }
  return "?";
}

namespace {

ExecConfig exec_from_json(const Json& j) {
  ExecConfig exec;
  if (j.contains("preset")) {
    exec = stress_preset(stress_preset_from_string(j.at("preset").get<std::string>()));
  }
  if (j.contains("mode")) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "ideal") exec.mode = ExecMode::ideal;
    else if (mode == "realistic") exec.mode = ExecMode::realistic;
    else fail("invalid-config", "unknown execution mode '" + mode + "'");
  }
  if (j.contains("commission_rate")) exec.commission_rate = j.at("commission_rate").get<double>();
  if (j.contains("commission_fixed")) exec.commission_fixed = j.at("commission_fixed").get<double>();
  if (j.contains("impact_coef")) exec.impact_coef = j.at("impact_coef").get<double>();
  if (j.contains("impact_exponent")) exec.impact_exponent = j.at("impact_exponent").get<double>();
  if (j.contains("latency_steps")) exec.latency_steps = j.at("latency_steps").get<long>();
  if (j.contains("participation_cap")) exec.participation_cap = j.at("participation_cap").get<double>();
  if (j.contains("reject_price_tolerance")) {
    exec.reject_price_tolerance = j.at("reject_price_tolerance").get<double>();
  }
  if (j.contains("min_notional")) exec.min_notional = j.at("min_notional").get<double>();
  return exec.normalized();
}

Json exec_to_json(const ExecConfig& exec) {
  Json j;
  j["mode"] = exec.mode == ExecMode::ideal ? "ideal" : "realistic";
  j["commission_rate"] = exec.commission_rate;
  j["commission_fixed"] = exec.commission_fixed;
  j["impact_coef"] = exec.impact_coef;
  j["impact_exponent"] = exec.impact_exponent;
  j["latency_steps"] = exec.latency_steps;
  j["participation_cap"] =
      std::isfinite(exec.participation_cap) ? Json(exec.participation_cap) : Json("inf");
  j["reject_price_tolerance"] =
      std::isfinite(exec.reject_price_tolerance) ? Json(exec.reject_price_tolerance) : Json("inf");
  j["min_notional"] = exec.min_notional;
  return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("invalid-config", "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail("invalid-config", std::string("config is not valid JSON: ") + e.what());
  }

  ExperimentConfig config;
  try {
    config.name = j.at("name").get<std::string>();
    if (j.contains("panel")) {
      const Json& p = j.at("panel");
      const std::string kind = p.value("kind", "regime");
      if (kind == "regime") config.panel.kind = PanelSource::Kind::regime;
      else if (kind == "regime_grid") config.panel.kind = PanelSource::Kind::regime_grid;
      else if (kind == "file") config.panel.kind = PanelSource::Kind::file;
      else fail("invalid-config", "unknown panel kind '" + kind + "'");
      if (p.contains("symbols")) config.panel.symbols = p.at("symbols").get<std::vector<std::string>>();
      if (p.contains("volatility")) {
        config.panel.volatility = vol_state_from_string(p.at("volatility").get<std::string>());
      }
      if (p.contains("tail")) config.panel.tail = tail_state_from_string(p.at("tail").get<std::string>());
      if (p.contains("trend")) config.panel.trend = trend_sign_from_string(p.at("trend").get<std::string>());
      if (p.contains("count")) config.panel.grid_count = p.at("count").get<std::size_t>();
      if (p.contains("base_seed")) config.panel.grid_base_seed = p.at("base_seed").get<std::uint64_t>();
      if (p.contains("path")) config.panel.file_path = p.at("path").get<std::string>();
      if (p.contains("format")) {
        config.panel.file_format =
            p.at("format").get<std::string>() == "json" ? PanelFormat::json : PanelFormat::csv;
      }
    }
    if (j.contains("seeds")) config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("steps")) config.steps = j.at("steps").get<std::size_t>();
    if (j.contains("warmup")) config.warmup = j.at("warmup").get<std::size_t>();
    if (j.contains("initial_capital")) config.initial_capital = j.at("initial_capital").get<double>();
    if (j.contains("annualization")) config.annualization = j.at("annualization").get<double>();
    if (j.contains("noise_epsilon")) config.noise_epsilon = j.at("noise_epsilon").get<double>();
    if (j.contains("noise_seed")) config.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    if (j.contains("baseline_case")) config.baseline_case = j.at("baseline_case").get<std::string>();
    if (j.contains("output_dir")) config.output_dir = j.at("output_dir").get<std::string>();

    for (const Json& c : j.at("cases")) {
      CaseConfig case_config;
      case_config.name = c.at("name").get<std::string>();
      case_config.analyst = analyst_kind_from_string(c.value("analyst", "full"));
      if (c.contains("risk")) {
        const Json& r = c.at("risk");
        case_config.policy.enabled = r.value("enabled", true);
        if (r.contains("max_position")) case_config.policy.max_position = r.at("max_position").get<double>();
        if (r.contains("max_turnover")) case_config.policy.max_turnover = r.at("max_turnover").get<double>();
        if (r.contains("max_gross")) case_config.policy.max_gross = r.at("max_gross").get<double>();
        if (r.contains("block_factor")) case_config.policy.block_factor = r.at("block_factor").get<double>();
      }
      if (c.contains("execution")) case_config.exec = exec_from_json(c.at("execution"));
      if (c.contains("feedback")) {
        case_config.feedback = feedback_condition_from_string(c.at("feedback").get<std::string>());
      }
      case_config.cot_free = c.value("cot_free", false);
      case_config.memory_overlay = c.value("memory_overlay", false);
      if (c.contains("lookback")) case_config.signal.lookback = c.at("lookback").get<std::size_t>();
      if (c.contains("gross_cap")) case_config.signal.gross_cap = c.at("gross_cap").get<double>();
      if (c.contains("band_enter")) case_config.signal.band_enter = c.at("band_enter").get<double>();
      if (c.contains("band_exit")) case_config.signal.band_exit = c.at("band_exit").get<double>();
      if (c.contains("position_level")) {
        case_config.signal.position_level = c.at("position_level").get<double>();
      }
      if (c.contains("markowitz_window")) {
        case_config.markowitz_window = c.at("markowitz_window").get<std::size_t>();
      }
      if (c.contains("per_name_cap")) case_config.per_name_cap = c.at("per_name_cap").get<double>();
      if (c.contains("model")) case_config.model = c.at("model").get<std::string>();
      if (c.contains("cache")) case_config.cache_path = c.at("cache").get<std::string>();
      if (c.contains("parse_mode")) {
        case_config.parse_mode = c.at("parse_mode").get<std::string>() == "weights_only_json"
                                     ? ParseMode::weights_only_json
                                     : ParseMode::rationale_json;
      }
      config.cases.push_back(std::move(case_config));
    }
  } catch (const nlohmann::json::exception& e) {
    fail("invalid-config", std::string("config field error: ") + e.what());
  }
  config.validate();
  return config;
}

std::string ExperimentConfig::to_json() const {
  Json j;
  j["name"] = name;
  Json p;
  switch (panel.kind) {
    case PanelSource::Kind::regime:
      p["kind"] = "regime";
      p["symbols"] = panel.symbols;
      p["volatility"] = to_string(panel.volatility);
      p["tail"] = to_string(panel.tail);
      p["trend"] = to_string(panel.trend);
      break;
    case PanelSource::Kind::regime_grid:
      p["kind"] = "regime_grid";
      p["symbols"] = panel.symbols;
      p["count"] = panel.grid_count;
      p["base_seed"] = panel.grid_base_seed;
      break;
    case PanelSource::Kind::file:
      p["kind"] = "file";
      p["path"] = panel.file_path;
      p["format"] = panel.file_format == PanelFormat::json ? "json" : "csv";
      break;
  }
  j["panel"] = p;
  j["seeds"] = seeds;
  j["steps"] = steps;
  j["warmup"] = warmup;
  j["initial_capital"] = initial_capital;
  j["annualization"] = annualization;
  j["noise_epsilon"] = noise_epsilon;
  j["noise_seed"] = noise_seed;
  j["baseline_case"] = baseline_case;

  Json cases_json = Json::array();
  for (const auto& c : cases) {
    Json cj;
    cj["name"] = c.name;
    cj["analyst"] = to_string(c.analyst);
    cj["risk"] = {{"enabled", c.policy.enabled},
                  {"max_position", c.policy.max_position},
                  {"max_turnover", c.policy.max_turnover},
                  {"max_gross", c.policy.max_gross},
                  {"block_factor", c.policy.block_factor}};
    cj["execution"] = exec_to_json(c.exec);
    cj["feedback"] = to_string(c.feedback);
    cj["cot_free"] = c.cot_free;
    cj["memory_overlay"] = c.memory_overlay;
    cj["lookback"] = c.signal.lookback;
    cj["gross_cap"] = c.signal.gross_cap;
    cj["band_enter"] = c.signal.band_enter;
    cj["band_exit"] = c.signal.band_exit;
    cj["position_level"] = c.signal.position_level;
    if (c.analyst == AnalystKind::markowitz) {
      cj["markowitz_window"] = c.markowitz_window;
      cj["per_name_cap"] = c.per_name_cap;
    }
    if (c.analyst == AnalystKind::llm_replay) {
      cj["model"] = c.model;
      cj["cache"] = c.cache_path;
      cj["parse_mode"] =
          c.parse_mode == ParseMode::weights_only_json ? "weights_only_json" : "rationale_json";
    }
    cases_json.push_back(std::move(cj));
  }
  j["cases"] = cases_json;
  return j.dump(2);
}

std::string ExperimentConfig::config_hash() const { return to_hex(fnv1a64(to_json())); }

void ExperimentConfig::validate() const {
  if (cases.empty()) fail("invalid-config", "no cases configured");
  std::set<std::string> names;
  for (const auto& c : cases) {
    if (!names.insert(c.name).second) fail("invalid-config", "duplicate case name '" + c.name + "'");
    if (c.policy.enabled &&
        (c.policy.max_position <= 0.0 || c.policy.max_turnover <= 0.0 || c.policy.max_gross <= 0.0)) {
      fail("invalid-config", "case '" + c.name + "': enabled risk policy needs positive caps");
    }
    if (c.analyst == AnalystKind::llm_replay && c.cache_path.empty()) {
      fail("invalid-config", "case '" + c.name + "': llm_replay requires a cache path");
    }
  }
  if (steps < 2) fail("invalid-horizon", "steps must be >= 2");
  if (panel.kind != PanelSource::Kind::file && warmup + 2 > steps) {
    fail("invalid-horizon", "steps must exceed warmup + 1");
  }
  if (seeds.empty() && panel.kind != PanelSource::Kind::regime_grid) {
    fail("invalid-config", "no seeds configured");
  }
  if (!baseline_case.empty() && !names.count(baseline_case)) {
    fail("invalid-config", "baseline case '" + baseline_case + "' is not a configured case");
  }
}

MarketPanel build_panel(const ExperimentConfig& config, std::uint64_t seed) {
  MarketPanel panel;
  switch (config.panel.kind) {
    case PanelSource::Kind::regime: {
      RegimeSpec regime;
      regime.volatility = config.panel.volatility;
      regime.tail = config.panel.tail;
      regime.trend = config.panel.trend;
      regime.seed = seed;
      panel = generate_market(regime, config.panel.symbols, config.steps);
      break;
    }
    case PanelSource::Kind::regime_grid:
      fail("invalid-config", "grid panels are materialized per market by run_family");
    case PanelSource::Kind::file:
      panel = align_panels(load_ohlcv(config.panel.file_path, config.panel.file_format));
      break;
  }
  if (config.noise_epsilon > 0.0) {
    panel = inject_noise(panel, config.noise_epsilon, config.noise_seed);
  }
  return panel;
}

namespace {

const CaseConfig& find_case(const ExperimentConfig& config, const std::string& case_name) {
  for (const auto& c : config.cases) {
    if (c.name == case_name) return c;
  }
  fail("invalid-config", "unknown case '" + case_name + "'");
}

std::string render_reflection(const TrajectoryStep& step, double prev_equity, double peak_equity) {
  const auto& e = step.execution;
  const auto& r = step.risk_report;
  const double step_return = prev_equity > 0.0 ? step.portfolio.equity / prev_equity - 1.0 : 0.0;
  const double drawdown = peak_equity > 0.0 ? step.portfolio.equity / peak_equity - 1.0 : 0.0;

  std::ostringstream out;
  out << "step " << step.step << ": submitted " << e.orders_submitted << " orders, "
      << e.fills.size() << " fills, fill_ratio " << format_fixed(e.fill_ratio, 3) << "; rejected "
      << e.rejected << ", pending " << e.pending << ", partial " << e.partial_fills
      << "; commission " << format_fixed(e.commission_total, 2) << ", slippage "
      << format_fixed(e.slippage_total, 2) << "; risk: clipped " << r.clipped_count << ", blocked "
      << r.blocked_count << ", violations " << r.violations << ", gap "
      << format_fixed(r.calibration_gap, 3) << ", score " << format_fixed(r.calibration_score, 3)
      << "; equity " << format_fixed(step.portfolio.equity, 2) << ", step return "
      << format_fixed(step_return, 4) << ", drawdown " << format_fixed(drawdown, 3);

  std::vector<std::string> pressure;
  if (r.clipped_count > 0) pressure.push_back("clip pressure");
  if (r.blocked_count > 0) pressure.push_back("block event");
  if (r.violations > 0) pressure.push_back("violation event");
  if (e.rejected > 0) pressure.push_back("reject pressure");
  if (e.pending > 0) pressure.push_back("liquidity wait");
  if (drawdown < -0.05) pressure.push_back("deep drawdown stress");
  else if (step_return < -0.01) pressure.push_back("losing step");
  if (pressure.empty()) {
    out << "; calm execution, plan tracked cleanly";
  } else {
    out << "; ";
    for (std::size_t i = 0; i < pressure.size(); ++i) {
      if (i > 0) out << ", ";
      out << pressure[i];
    }
  }
  return out.str();
}

}  // namespace

RunResult run_case_on_panel(const ExperimentConfig& config, const CaseConfig& case_config,
                            std::uint64_t seed, const MarketPanel& panel,
                            const std::filesystem::path& out_dir) {
  RunResult result;
  result.case_name = case_config.name;
  result.seed = seed;

  const std::string file_name = case_config.name + "_seed" + std::to_string(seed) + ".jsonl";
  result.log_path = file_name;
  const std::filesystem::path log_path = out_dir / file_name;

  const std::size_t steps = panel.step_count();
  const std::size_t warmup = std::min(config.warmup, steps > 2 ? steps - 2 : 0);

  std::optional<LlmCache> cache;
  if (case_config.analyst == AnalystKind::llm_replay) {
    cache = LlmCache::open(case_config.cache_path);
  }

  TrajectoryLog log(log_path);
  std::vector<TrajectoryStep> recorded;
  PortfolioState portfolio;
  portfolio.cash = config.initial_capital;
  portfolio.equity = config.initial_capital;
  RiskMemory memory;
  std::optional<RiskReport> last_report;
  std::map<std::string, double> prev_approved;
  ExecutionSimulator simulator(case_config.exec);
  std::vector<double> equity_curve = {config.initial_capital};
  double peak_equity = config.initial_capital;
  bool first_decision = true;

  try {
    for (std::size_t t = warmup; t < steps; ++t) {
      TrajectoryStep step;
      step.step = static_cast<std::int64_t>(t);
      for (std::size_t s = 0; s < panel.symbols.size(); ++s) {
        step.observation[panel.symbols[s]] = panel.bars[s][t];
      }

      const auto current_weights = portfolio.weights(step.observation);
      const std::string feedback_block =
          build_feedback_block(memory, last_report ? &*last_report : nullptr, case_config.feedback,
                               step.step);
      const std::string prompt =
          render_prompt(panel.symbols, step.observation, portfolio.equity, current_weights,
                        feedback_block, case_config.cot_free);

      DecisionRecord decision;
      const bool capital_halt = portfolio.equity < 0.05 * config.initial_capital;
      if (capital_halt) {
        // Capital-preservation rail: deep losses force a flat book so extreme
        // tail regimes cannot push a leveraged account through zero.
        decision.step = step.step;
        for (const auto& symbol : panel.symbols) {
          decision.intended_weights[symbol] = 0.0;
          decision.directional_scores[symbol] = 0.0;
        }
        decision.rationale = "capital preservation halt: equity below 5% of initial, flattening";
        decision.confidence = 1.0;
      } else
      switch (case_config.analyst) {
        case AnalystKind::momentum:
          decision = signal_weights(panel, t, SignalMode::momentum, case_config.signal);
          break;
        case AnalystKind::macro_news:
          decision = signal_weights(panel, t, SignalMode::macro_news, case_config.signal);
          break;
        case AnalystKind::full:
          decision = signal_weights(panel, t, SignalMode::full, case_config.signal);
          break;
        case AnalystKind::buy_hold:
          decision = baseline_weights(panel.symbols, BaselineKind::buy_hold_equal, t,
                                      first_decision ? nullptr : &current_weights);
          break;
        case AnalystKind::markowitz:
          decision = markowitz_weights(panel, t, case_config.markowitz_window,
                                       case_config.per_name_cap);
          break;
        case AnalystKind::llm_replay:
          decision = cached_llm_decide(prompt, *cache, case_config.parse_mode, case_config.model);
          break;
      }

      if (case_config.memory_overlay) {
        PerfSummary perf;
        const std::size_t lb = std::min<std::size_t>(8, equity_curve.size() - 1);
        if (lb > 0) {
          const double then = equity_curve[equity_curve.size() - 1 - lb];
          perf.recent_return = equity_curve.back() / then - 1.0;
          double window_peak = 0.0;
          double dd = 0.0;
          for (std::size_t i = equity_curve.size() - 1 - lb; i < equity_curve.size(); ++i) {
            window_peak = std::max(window_peak, equity_curve[i]);
            dd = std::min(dd, equity_curve[i] / window_peak - 1.0);
          }
          perf.recent_drawdown = dd;
        }
        decision = memory_overlay(std::move(decision), memory, perf);
      }

      decision.step = step.step;
      decision.feedback_condition = case_config.feedback;
      decision.prompt = prompt;
      if (case_config.cot_free) {
        decision.cot_free = true;
        decision.rationale.clear();
      }
      step.decision = decision;

      step.risk_report = evaluate(decision, prev_approved, case_config.policy);

      const auto orders =
          targets_to_orders(step.risk_report.approved_weights, portfolio, step.observation,
                            simulator.config());
      simulator.submit(orders, step.step, step.execution);
      ExecutionOutcome settled = simulator.settle(step.step, step.observation, portfolio);
      // merge: submit-side counters live in step.execution already
      settled.orders_submitted = step.execution.orders_submitted;
      settled.requested_qty = step.execution.requested_qty;
      settled.latency_applied = step.execution.latency_applied;
      if (t + 1 == steps) {
        simulator.drain_expired(settled);
      }
      step.execution = std::move(settled);

      const double prev_equity = portfolio.equity;
      portfolio.mark(step.observation);
      if (portfolio.equity <= 0.0) {
        // Limited-liability stop-out: the account cannot trade through zero.
        // Positions are liquidated and residual losses truncated at a floor;
        // the event is recorded in the step notes.
        portfolio.positions.clear();
        portfolio.cash = 1e-4 * config.initial_capital;
        portfolio.equity = portfolio.cash;
        step.execution.notes.push_back("stop-out: equity exhausted, account liquidated at floor");
      }
      step.portfolio = portfolio;

      // Post-trade check: realized weights breaching the position cap count
      // as violations (intent-stage counters stay with the gate).
      if (case_config.policy.enabled && portfolio.equity > 0.0) {
        const auto realized = portfolio.weights(step.observation);
        for (const auto& [symbol, w] : realized) {
          if (std::fabs(w) > case_config.policy.max_position + 1e-6) {
            step.risk_report.violations += 1;
            step.risk_report.notes.push_back("violation: realized |" + symbol + "| " +
                                             format_fixed(std::fabs(w), 4) + " > cap " +
                                             format_fixed(case_config.policy.max_position, 4));
          }
        }
      }

      peak_equity = std::max(peak_equity, portfolio.equity);
      step.reflection = render_reflection(step, prev_equity, peak_equity);
      step.memory_events = apply_step_to_memory(memory, step);

      step.repro.seed = seed;
      step.repro.config_hash = config.config_hash();
      step.repro.schema_version = kSchemaVersion;
      step.repro.template_version = kPromptTemplateVersion;

      log.append(step);
      recorded.push_back(std::move(step));
      equity_curve.push_back(portfolio.equity);
      prev_approved = recorded.back().risk_report.approved_weights;
      last_report = recorded.back().risk_report;
      first_decision = false;
    }
  } catch (const Error& e) {
    // Strict-replay misses and similar aborts keep the partial log on disk,
    // marked incomplete; families continue with the remaining runs.
    log.close();
    result.complete = false;
    result.error = e.kind();
    result.log_hash = log.content_hash();
    return result;
  }

  log.close();
  result.complete = true;
  result.log_hash = log.content_hash();
  result.metrics = bundle_from_steps(recorded, config.annualization);
  result.coverage = coverage(recorded);
  return result;
}

RunResult run_case(const ExperimentConfig& config, const std::string& case_name,
                   std::uint64_t seed, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const MarketPanel panel = build_panel(config, seed);
  return run_case_on_panel(config, find_case(config, case_name), seed, panel, out_dir);
}

FamilySummary run_family(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  const std::filesystem::path family_dir = std::filesystem::path(config.output_dir) / config.name;
  std::filesystem::create_directories(family_dir);

  // Materialize the run list: (panel seed, case) pairs. Grid families map one
  // market per grid entry; the others share panels across cases per seed.
  struct PlannedRun {
    std::uint64_t seed;
    std::size_t case_index;
    std::size_t panel_index;
  };
  std::vector<std::uint64_t> panel_seeds;
  if (config.panel.kind == PanelSource::Kind::regime_grid) {
    const auto grid = build_regime_grid(config.panel.grid_count, config.panel.grid_base_seed);
    for (const auto& spec : grid) panel_seeds.push_back(spec.seed);
  } else {
    panel_seeds = config.seeds;
  }

  std::vector<PlannedRun> planned;
  for (std::size_t p = 0; p < panel_seeds.size(); ++p) {
    for (std::size_t c = 0; c < config.cases.size(); ++c) {
      planned.push_back({panel_seeds[p], c, p});
    }
  }

  std::vector<RunResult> results(planned.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, planned.size()));

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= planned.size()) break;
      const PlannedRun& plan = planned[i];
      MarketPanel panel;
      if (config.panel.kind == PanelSource::Kind::regime_grid) {
        const auto grid = build_regime_grid(config.panel.grid_count, config.panel.grid_base_seed);
        panel = generate_market(grid[plan.panel_index], config.panel.symbols, config.steps);
        if (config.noise_epsilon > 0.0) {
          panel = inject_noise(panel, config.noise_epsilon, config.noise_seed);
        }
      } else {
        panel = build_panel(config, plan.seed);
      }
      try {
        results[i] = run_case_on_panel(config, config.cases[plan.case_index], plan.seed, panel,
                                       family_dir);
      } catch (const Error& e) {
        RunResult failed;
        failed.case_name = config.cases[plan.case_index].name;
        failed.seed = plan.seed;
        failed.complete = false;
        failed.error = e.kind();
        results[i] = failed;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  FamilySummary summary;
  summary.family = config.name;
  summary.config_hash = config.config_hash();
  summary.annualization = config.annualization;
  summary.baseline_case = config.baseline_case;
  summary.directory = family_dir;
  for (const auto& c : config.cases) summary.case_names.push_back(c.name);
  summary.runs = std::move(results);

  // Coverage is a hard regression: every complete run must audit fully.
  for (const auto& run : summary.runs) {
    if (run.complete && !run.coverage.complete()) {
      fail("coverage-violation", "run " + run.case_name + " seed " + std::to_string(run.seed) +
                                     " has incomplete audit coverage");
    }
  }

  if (!config.baseline_case.empty()) {
    std::map<std::string, std::map<std::uint64_t, MetricsBundle>> by_case;
    bool all_complete = true;
    for (const auto& run : summary.runs) {
      if (!run.complete) {
        all_complete = false;
        continue;
      }
      by_case[run.case_name][run.seed] = run.metrics;
    }
    if (all_complete && by_case.size() >= 2 && panel_seeds.size() >= 2) {
      summary.tables = sweep_aggregate(by_case, config.baseline_case, summary.case_names);
    }
  }

  write_summary_json(summary, family_dir / "summary.json");
  emit_tables(summary, family_dir / "tables");
  emit_charts(summary, family_dir / "charts");
  return summary;
}

std::string metrics_to_json(const MetricsBundle& b) {
  Json j;
  j["total_return"] = b.total_return;
  j["sharpe"] = b.sharpe;
  j["sharpe_defined"] = b.sharpe_defined;
  j["volatility"] = b.volatility;
  j["max_drawdown"] = b.max_drawdown;
  j["final_equity"] = b.final_equity;
  j["order_count"] = b.order_count;
  j["fill_count"] = b.fill_count;
  j["turnover_events"] = b.turnover_events;
  j["hold_ratio"] = b.hold_ratio;
  j["fill_rate"] = b.fill_rate;
  j["partial_fill_rate"] = b.partial_fill_rate;
  j["rejected"] = b.rejected;
  j["pending"] = b.pending;
  j["commissions"] = b.commissions;
  j["slippage"] = b.slippage;
  j["clipped"] = b.clipped;
  j["blocked"] = b.blocked;
  j["failed_checks"] = b.failed_checks;
  j["warnings"] = b.warnings;
  j["violations"] = b.violations;
  j["herfindahl"] = b.herfindahl;
  j["herfindahl_defined"] = b.herfindahl_defined;
  j["requested_qty"] = b.requested_qty;
  j["filled_qty"] = b.filled_qty;
  return j.dump();
}

MetricsBundle metrics_from_json_text(const std::string& text) {
  const Json j = Json::parse(text);
  MetricsBundle b;
  b.total_return = j.at("total_return").get<double>();
  b.sharpe = j.at("sharpe").get<double>();
  b.sharpe_defined = j.at("sharpe_defined").get<bool>();
  b.volatility = j.at("volatility").get<double>();
  b.max_drawdown = j.at("max_drawdown").get<double>();
  b.final_equity = j.at("final_equity").get<double>();
  b.order_count = j.at("order_count").get<long>();
  b.fill_count = j.at("fill_count").get<long>();
  b.turnover_events = j.at("turnover_events").get<long>();
  b.hold_ratio = j.at("hold_ratio").get<double>();
  b.fill_rate = j.at("fill_rate").get<double>();
  b.partial_fill_rate = j.at("partial_fill_rate").get<double>();
  b.rejected = j.at("rejected").get<long>();
  b.pending = j.at("pending").get<long>();
  b.commissions = j.at("commissions").get<double>();
  b.slippage = j.at("slippage").get<double>();
  b.clipped = j.at("clipped").get<long>();
  b.blocked = j.at("blocked").get<long>();
  b.failed_checks = j.at("failed_checks").get<long>();
  b.warnings = j.at("warnings").get<long>();
  b.violations = j.at("violations").get<long>();
  b.herfindahl = j.at("herfindahl").get<double>();
  b.herfindahl_defined = j.at("herfindahl_defined").get<bool>();
  b.requested_qty = j.at("requested_qty").get<double>();
  b.filled_qty = j.at("filled_qty").get<double>();
  return b;
}

void write_summary_json(const FamilySummary& summary, const std::filesystem::path& path) {
  Json j;
  j["family"] = summary.family;
  j["config_hash"] = summary.config_hash;
  j["annualization"] = summary.annualization;
  j["baseline_case"] = summary.baseline_case;
  j["case_names"] = summary.case_names;
  j["conventions"] = {
      {"fill_rate_on_zero_requests", 1.0},
      {"effective_independent_count", "1 / mean_abs_corr"},
      {"slippage", "run-total currency against decision-time close"},
      {"win_rate_ties", "excluded from the numerator, counted in n"},
      {"rank_neighborhood", "temporal window centered on each phase step"},
      {"drawdown_phase_end", "equity regains the pre-anchor running peak"},
  };

  Json runs = Json::array();
  for (const auto& run : summary.runs) {
    Json r;
    r["case"] = run.case_name;
    r["seed"] = run.seed;
    r["complete"] = run.complete;
    if (!run.error.empty()) r["error"] = run.error;
    r["log"] = run.log_path;
    r["log_hash"] = run.log_hash;
    if (run.complete) {
      r["metrics"] = Json::parse(metrics_to_json(run.metrics));
      r["coverage"] = {{"risk_lifecycle", run.coverage.risk_lifecycle},
                       {"reproducibility", run.coverage.reproducibility},
                       {"agent_trace", run.coverage.agent_trace}};
    }
    runs.push_back(std::move(r));
  }
  j["runs"] = runs;

  Json case_rows = Json::array();
  for (const auto& row : summary.tables.case_rows) {
    case_rows.push_back({{"case", row.case_name},
                         {"metric", row.metric},
                         {"n", row.n},
                         {"mean", row.mean},
                         {"ci_low", row.ci_low},
                         {"ci_high", row.ci_high}});
  }
  j["case_rows"] = case_rows;

  Json paired_rows = Json::array();
  for (const auto& row : summary.tables.paired_rows) {
    paired_rows.push_back({{"case", row.case_name},
                           {"metric", row.metric},
                           {"n", row.stats.n},
                           {"mean_diff", row.stats.mean_diff},
                           {"ci_low", row.stats.ci_low},
                           {"ci_high", row.stats.ci_high},
                           {"win_rate", row.stats.win_rate},
                           {"p_value", row.stats.p_value},
                           {"ties", row.stats.ties},
                           {"degenerate", row.stats.degenerate}});
  }
  j["paired_rows"] = paired_rows;

  std::ofstream out(path);
  if (!out) fail("io-error", "cannot write summary " + path.string());
  out << j.dump(2) << '\n';
}

FamilySummary load_summary_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("io-error", "cannot open summary " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail("corrupt-record", path.string() + ": " + e.what());
  }

  FamilySummary summary;
  summary.family = j.at("family").get<std::string>();
  summary.config_hash = j.at("config_hash").get<std::string>();
  summary.annualization = j.at("annualization").get<double>();
  summary.baseline_case = j.at("baseline_case").get<std::string>();
  summary.case_names = j.at("case_names").get<std::vector<std::string>>();
  summary.directory = path.parent_path();
  for (const auto& r : j.at("runs")) {
    RunResult run;
    run.case_name = r.at("case").get<std::string>();
    run.seed = r.at("seed").get<std::uint64_t>();
    run.complete = r.at("complete").get<bool>();
    if (r.contains("error")) run.error = r.at("error").get<std::string>();
    run.log_path = r.at("log").get<std::string>();
    run.log_hash = r.at("log_hash").get<std::string>();
    if (run.complete) {
      run.metrics = metrics_from_json_text(r.at("metrics").dump());
      run.coverage.risk_lifecycle = r.at("coverage").at("risk_lifecycle").get<double>();
      run.coverage.reproducibility = r.at("coverage").at("reproducibility").get<double>();
      run.coverage.agent_trace = r.at("coverage").at("agent_trace").get<double>();
    }
    summary.runs.push_back(std::move(run));
  }
  for (const auto& row : j.at("case_rows")) {
    summary.tables.case_rows.push_back({row.at("case").get<std::string>(),
                                        row.at("metric").get<std::string>(),
                                        row.at("n").get<std::size_t>(), row.at("mean").get<double>(),
                                        row.at("ci_low").get<double>(),
                                        row.at("ci_high").get<double>()});
  }
  for (const auto& row : j.at("paired_rows")) {
    PairedRow pr;
    pr.case_name = row.at("case").get<std::string>();
    pr.metric = row.at("metric").get<std::string>();
    pr.stats.n = row.at("n").get<std::size_t>();
    pr.stats.mean_diff = row.at("mean_diff").get<double>();
    pr.stats.ci_low = row.at("ci_low").get<double>();
    pr.stats.ci_high = row.at("ci_high").get<double>();
    pr.stats.win_rate = row.at("win_rate").get<double>();
    pr.stats.p_value = row.at("p_value").get<double>();
    pr.stats.ties = row.at("ties").get<std::size_t>();
    pr.stats.degenerate = row.at("degenerate").get<bool>();
    summary.tables.paired_rows.push_back(std::move(pr));
  }
  return summary;
}

}  // namespace tradebench
