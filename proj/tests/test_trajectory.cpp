#include "doctest.h"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "tradebench/common.hpp"
#include "tradebench/trajectory.hpp"

using namespace tradebench;
namespace fs = std::filesystem;

namespace {

TrajectoryStep make_step(std::int64_t index) {
  TrajectoryStep step;
  step.step = index;
  step.observation["A"] = {index, 100.0 + index, 101.5 + index, 99.0 + index, 100.5 + index, 5000};
  step.decision.step = index;
  step.decision.intended_weights = {{"A", 0.3}};
  step.decision.rationale = "momentum view: A moderate buy";
  step.decision.confidence = 0.6;
  step.decision.directional_scores = {{"A", 0.4}};
  step.decision.feedback_condition = FeedbackCondition::true_feedback;
  step.decision.prompt = "prompt body";
  step.risk_report.approved_weights = {{"A", 0.3}};
  step.risk_report.calibration_score = 1.0;
  step.execution.orders_submitted = 1;
  step.execution.requested_qty = 30;
  step.execution.filled_qty = 30;
  step.execution.fill_ratio = 1.0;
  Fill fill;
  fill.symbol = "A";
  fill.qty = 30;
  fill.price = 100.6;
  fill.commission = 3.1;
  fill.slippage = 2.9;
  step.execution.fills.push_back(fill);
  step.execution.commission_total = 3.1;
  step.execution.slippage_total = 2.9;
  step.portfolio.cash = 1e5 - 30 * 100.6;
  step.portfolio.positions = {{"A", 30.0}};
  step.portfolio.equity = step.portfolio.cash + 30 * (100.5 + index);
  step.reflection = "step " + std::to_string(index) + ": calm execution";
  step.memory_events = {};
  step.repro.seed = 3;
  step.repro.config_hash = "deadbeef";
  step.repro.schema_version = kSchemaVersion;
  step.repro.template_version = "pt-v1";
  return step;
}

}  // namespace

TEST_CASE("append/load round-trip preserves every field and the hash is stable") {
  const fs::path path = fs::temp_directory_path() / "tb_log.jsonl";
  std::string first_hash;
  {
    TrajectoryLog log(path);
    for (int i = 0; i < 3; ++i) log.append(make_step(i));
    first_hash = log.content_hash();
    CHECK(log.size() == 3);
  }
  {
    TrajectoryLog log(path);
    for (int i = 0; i < 3; ++i) log.append(make_step(i));
    CHECK(log.content_hash() == first_hash);
  }

  const auto loaded = load_trajectory(path);
  CHECK(loaded.content_hash == first_hash);
  REQUIRE(loaded.steps.size() == 3);
  const auto& step = loaded.steps[1];
  const auto reference = make_step(1);
  CHECK(step.step == 1);
  CHECK(step.observation.at("A").close == reference.observation.at("A").close);
  CHECK(step.decision.intended_weights.at("A") == 0.3);
  CHECK(step.decision.rationale == reference.decision.rationale);
  CHECK(step.decision.prompt == reference.decision.prompt);
  CHECK(step.risk_report.approved_weights.at("A") == 0.3);
  CHECK(step.execution.fills.size() == 1);
  CHECK(step.execution.fills[0].price == 100.6);
  CHECK(step.portfolio.positions.at("A") == 30.0);
  CHECK(step.reflection == reference.reflection);
  CHECK(step.repro.config_hash == "deadbeef");
  CHECK(step.repro.template_version == "pt-v1");
}

TEST_CASE("serialize/parse is the identity on a representative step") {
  const auto step = make_step(7);
  const auto line = step_to_jsonl(step);
  const auto parsed = step_from_jsonl(line);
  CHECK(step_to_jsonl(parsed) == line);
}

TEST_CASE("out-of-order appends are sequence violations") {
  const fs::path path = fs::temp_directory_path() / "tb_gap.jsonl";
  TrajectoryLog log(path);
  log.append(make_step(3));
  auto step5 = make_step(5);
  CHECK_THROWS_WITH_AS(log.append(step5), doctest::Contains("sequence-violation"), Error);
}

TEST_CASE("truncated lines are reported as corrupt records with the line number") {
  const fs::path path = fs::temp_directory_path() / "tb_corrupt.jsonl";
  {
    TrajectoryLog log(path);
    log.append(make_step(0));
    log.append(make_step(1));
  }
  {
    std::ofstream out(path, std::ios::app);
    out << "{\"step\": 2, \"obser";  // truncated
  }
  try {
    load_trajectory(path);
    FAIL("expected corrupt-record");
  } catch (const Error& e) {
    CHECK(e.kind() == "corrupt-record");
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("unknown schema versions are refused, not guessed") {
  const fs::path path = fs::temp_directory_path() / "tb_schema.jsonl";
  {
    TrajectoryLog log(path);
    auto step = make_step(0);
    step.repro.schema_version = 99;
    log.append(step);
  }
  CHECK_THROWS_WITH_AS(load_trajectory(path), doctest::Contains("unsupported-schema"), Error);
}

TEST_CASE("replay recomputes a deterministic bundle and runs fast at desk scale") {
  const fs::path path = fs::temp_directory_path() / "tb_replay.jsonl";
  {
    TrajectoryLog log(path);
    for (int i = 0; i < 120; ++i) log.append(make_step(i));
  }
  const auto start = std::chrono::steady_clock::now();
  const auto a = replay(path, 52.0);
  const auto b = replay(path, 52.0);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() < 1000);
  CHECK(a.content_hash == b.content_hash);
  CHECK(bundles_equal(a.recomputed, b.recomputed, 0.0));
  CHECK(a.steps.size() == 120);
}

TEST_CASE("coverage counts category completeness per step") {
  std::vector<TrajectoryStep> steps;
  for (int i = 0; i < 4; ++i) steps.push_back(make_step(i));
  auto full = coverage(steps);
  CHECK(full.risk_lifecycle == 1.0);
  CHECK(full.reproducibility == 1.0);
  CHECK(full.agent_trace == 1.0);
  CHECK(full.complete());

  // one step without a risk report -> risk_lifecycle = 3/4
  steps[2].risk_report.approved_weights.clear();
  auto partial = coverage(steps);
  CHECK(partial.risk_lifecycle == doctest::Approx(0.75));
  CHECK(partial.reproducibility == 1.0);

  // empty reflections affect only the agent-trace category
  steps[2] = make_step(2);
  for (auto& step : steps) step.reflection.clear();
  auto no_reflection = coverage(steps);
  CHECK(no_reflection.agent_trace == 0.0);
  CHECK(no_reflection.risk_lifecycle == 1.0);
  CHECK(no_reflection.reproducibility == 1.0);
}

TEST_CASE("memory evolution from the log matches counters step by step") {
  std::vector<TrajectoryStep> steps;
  for (int i = 0; i < 3; ++i) {
    auto step = make_step(i);
    step.risk_report.clipped_count = i;      // 0, 1, 2
    step.execution.rejected = i == 2 ? 1 : 0;
    steps.push_back(step);
  }
  RiskMemory memory;
  std::vector<std::string> events;
  for (const auto& step : steps) {
    auto e = apply_step_to_memory(memory, step);
    events.insert(events.end(), e.begin(), e.end());
  }
  CHECK(memory.clipped_total == 3);
  CHECK(memory.rejected_total == 1);
  CHECK(memory.recent_failures.size() == 3);  // clip@1, clip@2, reject@2
  CHECK(events.size() == 3);
}
