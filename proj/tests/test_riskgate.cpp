#include "doctest.h"

#include <cmath>

#include "tradebench/common.hpp"
#include "tradebench/riskgate.hpp"

using namespace tradebench;

namespace {

DecisionRecord decision_from(const std::map<std::string, double>& weights) {
  DecisionRecord d;
  d.intended_weights = weights;
  return d;
}

RiskPolicy policy(double position, double turnover, double gross) {
  RiskPolicy p;
  p.max_position = position;
  p.max_turnover = turnover;
  p.max_gross = gross;
  return p;
}

}  // namespace

TEST_CASE("single clip to the default 35% cap produces the forced arithmetic") {
  const auto report = evaluate(decision_from({{"A", 0.5}}), {}, policy(0.35, 10.0, 10.0));
  CHECK(report.approved_weights.at("A") == doctest::Approx(0.35));
  CHECK(report.clipped_count == 1);
  CHECK(report.calibration_gap == doctest::Approx(0.15));
  CHECK(report.calibration_score == doctest::Approx(1.0 - 0.15));  // exposure 0.5 -> max(1,.) = 1
}

TEST_CASE("a decision inside all caps passes untouched with score 1") {
  const auto intended = decision_from({{"A", 0.2}, {"B", -0.1}});
  const auto report = evaluate(intended, {}, policy(0.35, 1.0, 1.0));
  CHECK(report.approved_weights.at("A") == 0.2);
  CHECK(report.approved_weights.at("B") == -0.1);
  CHECK(report.clipped_count == 0);
  CHECK(report.blocked_count == 0);
  CHECK(report.calibration_gap == 0.0);
  CHECK(report.calibration_score == 1.0);
}

TEST_CASE("51-name near-duplicate pair cascade: cap 0.08 plus turnover bite") {
  // combined pair intent 1.6; per-name cap 0.08 then turnover 0.1 from flat
  auto weights = std::map<std::string, double>{{"GOOGL", 0.8}, {"GOOG", 0.8}};
  const auto report = evaluate(decision_from(weights), {}, policy(0.08, 0.1, 1.0));
  const double pair =
      report.approved_weights.at("GOOGL") + report.approved_weights.at("GOOG");
  CHECK(pair <= 0.16 + 1e-9);
  CHECK(pair == doctest::Approx(0.1).epsilon(1e-9));  // turnover shrink from flat book
  CHECK(report.calibration_gap == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(report.calibration_score < 0.1);
  CHECK(report.calibration_score == doctest::Approx(1.0 - 1.5 / 1.6).epsilon(1e-9));
}

TEST_CASE("turnover shrink keeps intent direction") {
  const std::map<std::string, double> prev = {{"A", 0.2}, {"B", 0.0}};
  const auto report = evaluate(decision_from({{"A", 0.4}, {"B", 0.3}}), prev, policy(0.5, 0.25, 2.0));
  // turnover = 0.2 + 0.3 = 0.5 -> alpha = 0.5
  CHECK(report.approved_weights.at("A") == doctest::Approx(0.3));
  CHECK(report.approved_weights.at("B") == doctest::Approx(0.15));
  CHECK(report.warning_checks == 1);
}

TEST_CASE("gross runaway intent is blocked whole: approved = previous weights") {
  const std::map<std::string, double> prev = {{"A", 0.1}};
  const auto report = evaluate(decision_from({{"A", 1.5}, {"B", 1.2}}), prev, policy(0.5, 1.0, 1.0));
  CHECK(report.blocked_count == 1);
  CHECK(report.failed_checks == 1);
  CHECK(report.approved_weights.at("A") == 0.1);
  CHECK(report.approved_weights.at("B") == 0.0);
  CHECK(report.clipped_count == 0);
}

TEST_CASE("disabled policy reproduces the no-risk ablation exactly") {
  RiskPolicy off;
  off.enabled = false;
  const auto intended = decision_from({{"A", 3.0}, {"B", -2.0}});
  const auto report = evaluate(intended, {}, off);
  CHECK(report.approved_weights.at("A") == 3.0);
  CHECK(report.approved_weights.at("B") == -2.0);
  CHECK(report.clipped_count == 0);
  CHECK(report.blocked_count == 0);
  CHECK(report.warning_checks == 0);
  CHECK(report.calibration_gap == 0.0);
}

TEST_CASE("approved weights satisfy every enabled cap across random decisions") {
  const auto pol = policy(0.3, 0.6, 1.0);
  Rng rng(17);
  std::map<std::string, double> prev;  // evolves gate-consistently
  for (int trial = 0; trial < 500; ++trial) {
    std::map<std::string, double> weights;
    for (int s = 0; s < 5; ++s) {
      weights["S" + std::to_string(s)] = 0.8 * rng.normal();
    }
    const auto report = evaluate(decision_from(weights), prev, pol);
    double gross = 0.0, turnover = 0.0;
    for (const auto& [symbol, w] : report.approved_weights) {
      CHECK(std::fabs(w) <= pol.max_position + 1e-9);
      gross += std::fabs(w);
      const auto it = prev.find(symbol);
      turnover += std::fabs(w - (it == prev.end() ? 0.0 : it->second));
    }
    CHECK(gross <= pol.max_gross + 1e-9);
    CHECK(turnover <= pol.max_turnover + 1e-9);
    prev = report.approved_weights;
  }
}

TEST_CASE("loosening the position cap never increases clip counts on a fixed stream") {
  Rng rng(23);
  std::vector<std::map<std::string, double>> stream;
  for (int t = 0; t < 200; ++t) {
    std::map<std::string, double> weights;
    for (int s = 0; s < 3; ++s) weights["S" + std::to_string(s)] = 0.7 * rng.normal();
    stream.push_back(weights);
  }
  long clips[3] = {0, 0, 0};
  const double caps[3] = {0.20, 0.35, 0.50};
  for (int c = 0; c < 3; ++c) {
    std::map<std::string, double> prev;
    for (const auto& weights : stream) {
      const auto report = evaluate(decision_from(weights), prev, policy(caps[c], 10.0, 10.0));
      clips[c] += report.clipped_count;
      prev = report.approved_weights;
    }
  }
  CHECK(clips[0] >= clips[1]);
  CHECK(clips[1] >= clips[2]);
  CHECK(clips[0] > clips[2]);  // the sweep actually binds
}

TEST_CASE("gate idempotence: re-evaluating the approved weights changes nothing") {
  const auto pol = policy(0.3, 0.5, 1.0);
  Rng rng(29);
  std::map<std::string, double> prev;
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, double> weights;
    for (int s = 0; s < 4; ++s) weights["S" + std::to_string(s)] = rng.normal();
    const auto first = evaluate(decision_from(weights), prev, pol);
    const auto second = evaluate(decision_from(first.approved_weights), prev, pol);
    CHECK(second.calibration_gap == doctest::Approx(0.0).epsilon(1e-9));
    prev = first.approved_weights;
  }
}

TEST_CASE("calibration recomputation: spec fixtures") {
  // gap 0, exposure 1.2 -> score 1
  {
    DecisionRecord d = decision_from({{"A", 0.7}, {"B", 0.5}});
    RiskReport r;
    r.approved_weights = d.intended_weights;
    const auto [gap, score] = calibration(d, r);
    CHECK(gap == 0.0);
    CHECK(score == 1.0);
  }
  // gap 0.785 with exposure <= 1 -> 0.215; with exposure 1.655 -> 0.526
  {
    DecisionRecord d = decision_from({{"A", 0.9}});
    RiskReport r;
    r.approved_weights = {{"A", 0.9 - 0.785}};
    const auto [gap, score] = calibration(d, r);
    CHECK(gap == doctest::Approx(0.785).epsilon(1e-12));
    CHECK(score == doctest::Approx(0.215).epsilon(1e-9));
  }
  {
    DecisionRecord d = decision_from({{"A", 0.8275}, {"B", 0.8275}});  // exposure 1.655
    RiskReport r;
    r.approved_weights = {{"A", 0.8275 - 0.785}, {"B", 0.8275}};
    const auto [gap, score] = calibration(d, r);
    CHECK(gap == doctest::Approx(0.785).epsilon(1e-12));
    CHECK(score == doctest::Approx(0.526).epsilon(1e-3));
    CHECK(score == doctest::Approx(1.0 - 0.785 / 1.655).epsilon(1e-12));
  }
  // saturation: gap >= exposure and gap >= 1 -> score 0
  {
    DecisionRecord d = decision_from({{"A", 1.2}});
    RiskReport r;
    r.approved_weights = {{"A", 0.0}};
    const auto [gap, score] = calibration(d, r);
    CHECK(gap == doctest::Approx(1.2));
    CHECK(score == 0.0);
  }
}

TEST_CASE("calibration raises on symbol-set mismatch") {
  DecisionRecord d = decision_from({{"A", 0.5}});
  RiskReport r;
  r.approved_weights = {{"B", 0.5}};
  CHECK_THROWS_WITH_AS(calibration(d, r), doctest::Contains("inconsistent-report"), Error);
}

TEST_CASE("stored gap/score equal independent recomputation on random pairs") {
  Rng rng(41);
  std::map<std::string, double> prev;
  const auto pol = policy(0.25, 0.7, 1.2);
  for (int trial = 0; trial < 1000; ++trial) {
    std::map<std::string, double> weights;
    for (int s = 0; s < 6; ++s) weights["S" + std::to_string(s)] = 0.6 * rng.normal();
    const DecisionRecord d = decision_from(weights);
    const auto report = evaluate(d, prev, pol);
    const auto [gap, score] = calibration(d, report);
    CHECK(gap == report.calibration_gap);
    CHECK(score == report.calibration_score);
    prev = report.approved_weights;
  }
}
