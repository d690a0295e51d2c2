#include "tradebench/trajectory.hpp"

#include <cmath>

#include "json.hpp"
#include "tradebench/common.hpp"

namespace tradebench {

namespace {

using Json = nlohmann::ordered_json;

Json bars_to_json(const std::map<std::string, Bar>& bars) {
  Json out = Json::object();
  for (const auto& [symbol, b] : bars) {
    out[symbol] = {{"step", b.step}, {"open", b.open},   {"high", b.high},
                   {"low", b.low},   {"close", b.close}, {"volume", b.volume}};
  }
  return out;
}

std::map<std::string, Bar> bars_from_json(const Json& j) {
  std::map<std::string, Bar> out;
  for (const auto& [symbol, v] : j.items()) {
    Bar b;
    b.step = v.at("step").get<std::int64_t>();
    b.open = v.at("open").get<double>();
    b.high = v.at("high").get<double>();
    b.low = v.at("low").get<double>();
    b.close = v.at("close").get<double>();
    b.volume = v.at("volume").get<double>();
    out[symbol] = b;
  }
  return out;
}

Json weights_to_json(const std::map<std::string, double>& weights) {
  Json out = Json::object();
  for (const auto& [symbol, w] : weights) out[symbol] = w;
  return out;
}

std::map<std::string, double> weights_from_json(const Json& j) {
  std::map<std::string, double> out;
  for (const auto& [symbol, w] : j.items()) out[symbol] = w.get<double>();
  return out;
}

}  // namespace

std::string step_to_jsonl(const TrajectoryStep& step) {
  Json j;
  j["step"] = step.step;
  j["observation"] = bars_to_json(step.observation);

  Json decision;
  decision["intended_weights"] = weights_to_json(step.decision.intended_weights);
  decision["rationale"] = step.decision.rationale;
  decision["confidence"] = step.decision.confidence;
  decision["directional_scores"] = weights_to_json(step.decision.directional_scores);
  decision["feedback_condition"] = to_string(step.decision.feedback_condition);
  decision["cot_free"] = step.decision.cot_free;
  decision["prompt"] = step.decision.prompt;
  j["decision"] = decision;

  Json risk;
  risk["approved_weights"] = weights_to_json(step.risk_report.approved_weights);
  risk["clipped"] = step.risk_report.clipped_count;
  risk["blocked"] = step.risk_report.blocked_count;
  risk["failed_checks"] = step.risk_report.failed_checks;
  risk["warnings"] = step.risk_report.warning_checks;
  risk["violations"] = step.risk_report.violations;
  risk["calibration_gap"] = step.risk_report.calibration_gap;
  risk["calibration_score"] = step.risk_report.calibration_score;
  risk["notes"] = step.risk_report.notes;
  j["risk_report"] = risk;

  Json exec;
  Json fills = Json::array();
  for (const auto& f : step.execution.fills) {
    fills.push_back({{"symbol", f.symbol},
                     {"qty", f.qty},
                     {"price", f.price},
                     {"commission", f.commission},
                     {"slippage", f.slippage}});
  }
  exec["fills"] = fills;
  exec["orders_submitted"] = step.execution.orders_submitted;
  exec["partial_fills"] = step.execution.partial_fills;
  exec["rejected"] = step.execution.rejected;
  exec["pending"] = step.execution.pending;
  exec["latency_applied"] = step.execution.latency_applied;
  exec["fill_ratio"] = step.execution.fill_ratio;
  exec["requested_qty"] = step.execution.requested_qty;
  exec["filled_qty"] = step.execution.filled_qty;
  exec["commission"] = step.execution.commission_total;
  exec["slippage"] = step.execution.slippage_total;
  exec["notes"] = step.execution.notes;
  j["execution"] = exec;

  Json portfolio;
  portfolio["cash"] = step.portfolio.cash;
  portfolio["positions"] = weights_to_json(step.portfolio.positions);
  portfolio["equity"] = step.portfolio.equity;
  j["portfolio"] = portfolio;

  j["reflection"] = step.reflection;
  j["memory_events"] = step.memory_events;
  j["tools"] = step.tools;

  Json repro;
  repro["seed"] = step.repro.seed;
  repro["config_hash"] = step.repro.config_hash;
  repro["schema_version"] = step.repro.schema_version;
  repro["template_version"] = step.repro.template_version;
  j["repro"] = repro;

  return j.dump();
}

TrajectoryStep step_from_jsonl(const std::string& line) {
  Json j = Json::parse(line);
  TrajectoryStep step;
  step.step = j.at("step").get<std::int64_t>();
  step.observation = bars_from_json(j.at("observation"));

  const Json& decision = j.at("decision");
  step.decision.step = step.step;
  step.decision.intended_weights = weights_from_json(decision.at("intended_weights"));
  step.decision.rationale = decision.at("rationale").get<std::string>();
  step.decision.confidence = decision.at("confidence").get<double>();
  step.decision.directional_scores = weights_from_json(decision.at("directional_scores"));
  step.decision.feedback_condition =
      feedback_condition_from_string(decision.at("feedback_condition").get<std::string>());
  step.decision.cot_free = decision.at("cot_free").get<bool>();
  step.decision.prompt = decision.at("prompt").get<std::string>();

  const Json& risk = j.at("risk_report");
  step.risk_report.approved_weights = weights_from_json(risk.at("approved_weights"));
  step.risk_report.clipped_count = risk.at("clipped").get<long>();
  step.risk_report.blocked_count = risk.at("blocked").get<long>();
  step.risk_report.failed_checks = risk.at("failed_checks").get<long>();
  step.risk_report.warning_checks = risk.at("warnings").get<long>();
  step.risk_report.violations = risk.at("violations").get<long>();
  step.risk_report.calibration_gap = risk.at("calibration_gap").get<double>();
  step.risk_report.calibration_score = risk.at("calibration_score").get<double>();
  step.risk_report.notes = risk.at("notes").get<std::vector<std::string>>();

  const Json& exec = j.at("execution");
  for (const auto& f : exec.at("fills")) {
    Fill fill;
    fill.symbol = f.at("symbol").get<std::string>();
    fill.qty = f.at("qty").get<double>();
    fill.price = f.at("price").get<double>();
    fill.commission = f.at("commission").get<double>();
    fill.slippage = f.at("slippage").get<double>();
    step.execution.fills.push_back(std::move(fill));
  }
  step.execution.orders_submitted = exec.at("orders_submitted").get<long>();
  step.execution.partial_fills = exec.at("partial_fills").get<long>();
  step.execution.rejected = exec.at("rejected").get<long>();
  step.execution.pending = exec.at("pending").get<long>();
  step.execution.latency_applied = exec.at("latency_applied").get<long>();
  step.execution.fill_ratio = exec.at("fill_ratio").get<double>();
  step.execution.requested_qty = exec.at("requested_qty").get<double>();
  step.execution.filled_qty = exec.at("filled_qty").get<double>();
  step.execution.commission_total = exec.at("commission").get<double>();
  step.execution.slippage_total = exec.at("slippage").get<double>();
  step.execution.notes = exec.at("notes").get<std::vector<std::string>>();

  const Json& portfolio = j.at("portfolio");
  step.portfolio.cash = portfolio.at("cash").get<double>();
  step.portfolio.positions = weights_from_json(portfolio.at("positions"));
  step.portfolio.equity = portfolio.at("equity").get<double>();

  step.reflection = j.at("reflection").get<std::string>();
  step.memory_events = j.at("memory_events").get<std::vector<std::string>>();
  step.tools = j.at("tools").get<std::vector<std::string>>();

  const Json& repro = j.at("repro");
  step.repro.seed = repro.at("seed").get<std::uint64_t>();
  step.repro.config_hash = repro.at("config_hash").get<std::string>();
  step.repro.schema_version = repro.at("schema_version").get<int>();
  step.repro.template_version = repro.at("template_version").get<std::string>();
  return step;
}

TrajectoryLog::TrajectoryLog(const std::filesystem::path& path) : path_(path) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) fail("io-error", "cannot open trajectory log " + path.string());
}

void TrajectoryLog::append(const TrajectoryStep& step) {
  if (!first_ && step.step != last_step_ + 1) {
    fail("sequence-violation", "expected step " + std::to_string(last_step_ + 1) + ", got " +
                                   std::to_string(step.step));
  }
  const std::string line = step_to_jsonl(step);
  out_ << line << '\n';
  if (!out_) fail("io-error", "write failed for " + path_.string());
  hash_ = fnv1a64_update(hash_, line);
  hash_ = fnv1a64_update(hash_, "\n");
  first_ = false;
  last_step_ = step.step;
  ++count_;
}

std::string TrajectoryLog::content_hash() const { return to_hex(hash_); }

void TrajectoryLog::close() {
  out_.flush();
  out_.close();
}

LoadedLog load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("io-error", "cannot open trajectory log " + path.string());
  LoadedLog loaded;
  std::uint64_t hash = kFnvOffset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TrajectoryStep step;
    try {
      step = step_from_jsonl(line);
    } catch (const nlohmann::json::exception& e) {
      fail("corrupt-record", path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    if (step.repro.schema_version != kSchemaVersion) {
      fail("unsupported-schema", path.string() + ": line " + std::to_string(line_no) +
                                     ": schema_version " +
                                     std::to_string(step.repro.schema_version) +
                                     " (supported: " + std::to_string(kSchemaVersion) + ")");
    }
    hash = fnv1a64_update(hash, line);
    hash = fnv1a64_update(hash, "\n");
    loaded.steps.push_back(std::move(step));
  }
  loaded.content_hash = to_hex(hash);
  return loaded;
}

ReplayResult replay(const std::filesystem::path& path, double periods_per_year) {
  LoadedLog loaded = load_trajectory(path);
  ReplayResult result;
  result.recomputed = bundle_from_steps(loaded.steps, periods_per_year);
  result.steps = std::move(loaded.steps);
  result.content_hash = std::move(loaded.content_hash);
  return result;
}

std::vector<std::string> apply_step_to_memory(RiskMemory& memory, const TrajectoryStep& step) {
  std::vector<std::string> events;
  memory.clipped_total += step.risk_report.clipped_count;
  memory.blocked_total += step.risk_report.blocked_count;
  memory.violations_total += step.risk_report.violations;
  memory.rejected_total += step.execution.rejected;
  memory.pending_total += step.execution.pending;
  memory.slippage_total += step.execution.slippage_total;
  if (step.risk_report.clipped_count > 0) {
    memory.record_failure({step.step, "clip", std::to_string(step.risk_report.clipped_count)});
    events.push_back("clip x" + std::to_string(step.risk_report.clipped_count));
  }
  if (step.risk_report.blocked_count > 0) {
    memory.record_failure({step.step, "block", std::to_string(step.risk_report.blocked_count)});
    events.push_back("block x" + std::to_string(step.risk_report.blocked_count));
  }
  if (step.risk_report.violations > 0) {
    memory.record_failure({step.step, "violation", std::to_string(step.risk_report.violations)});
    events.push_back("violation x" + std::to_string(step.risk_report.violations));
  }
  if (step.execution.rejected > 0) {
    memory.record_failure({step.step, "reject", std::to_string(step.execution.rejected)});
    events.push_back("reject x" + std::to_string(step.execution.rejected));
  }
  return events;
}

CoverageReport coverage(const std::vector<TrajectoryStep>& steps) {
  if (steps.empty()) fail("invalid-config", "coverage needs at least one step");
  std::size_t risk_ok = 0, repro_ok = 0, trace_ok = 0;
  for (const auto& step : steps) {
    // risk lifecycle: a full report with approved weights and every counter
    // (counters are value types here, so presence reduces to approved weights
    // plus a finite gap/score pair).
    const bool risk = !step.risk_report.approved_weights.empty() &&
                      std::isfinite(step.risk_report.calibration_gap) &&
                      std::isfinite(step.risk_report.calibration_score);
    // reproducibility: all repro fields populated.
    const bool repro = !step.repro.config_hash.empty() && step.repro.schema_version > 0 &&
                       !step.repro.template_version.empty();
    // agent trace: observation, a decision and a non-empty reflection.
    const bool trace = !step.observation.empty() && !step.decision.intended_weights.empty() &&
                       !step.reflection.empty();
    risk_ok += risk ? 1 : 0;
    repro_ok += repro ? 1 : 0;
    trace_ok += trace ? 1 : 0;
  }
  CoverageReport report;
  const double n = static_cast<double>(steps.size());
  report.risk_lifecycle = static_cast<double>(risk_ok) / n;
  report.reproducibility = static_cast<double>(repro_ok) / n;
  report.agent_trace = static_cast<double>(trace_ok) / n;
  return report;
}

}  // namespace tradebench
