#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tradebench/common.hpp"
#include "tradebench/halluprobe.hpp"
#include "tradebench/trajectory.hpp"

using namespace tradebench;
namespace fs = std::filesystem;

namespace {

TrajectoryStep base_step(std::int64_t index) {
  TrajectoryStep step;
  step.step = index;
  step.observation["A"] = {index, 100.0, 101.0, 99.0, 100.5, 5000};  // +0.5% move
  step.decision.step = index;
  step.decision.intended_weights = {{"A", 0.3}};
  step.decision.rationale = "momentum view: A moderate buy";
  step.decision.confidence = 0.6;
  step.decision.directional_scores = {{"A", 0.4}};
  step.decision.prompt = "[market] A open 100 close 100.5 momentum view buy";
  step.risk_report.approved_weights = {{"A", 0.3}};
  step.portfolio.equity = 1e5;
  step.repro.schema_version = kSchemaVersion;
  step.repro.config_hash = "cafe";
  step.repro.template_version = "pt-v1";
  step.reflection = "calm";
  return step;
}

}  // namespace

TEST_CASE("each rule family fires on its positive fixture and not on the matched negative") {
  RiskMemory clean;

  // unsupported context: "earnings" in the rationale, absent from the prompt
  {
    auto positive = base_step(0);
    positive.decision.rationale = "strong earnings beat expected, adding exposure";
    const auto p = proxy_score(positive, positive.decision.prompt, clean);
    CHECK(p.unsupported_context);
    REQUIRE_FALSE(p.evidence.empty());
    CHECK(p.evidence[0].find("earnings") != std::string::npos);

    auto negative = positive;
    negative.decision.prompt += " earnings calendar attached";
    const auto n = proxy_score(negative, negative.decision.prompt, clean);
    CHECK_FALSE(n.unsupported_context);
  }

  // directional contradiction: score -0.5 on a +0.5% bar
  {
    auto positive = base_step(1);
    positive.decision.directional_scores = {{"A", -0.5}};
    const auto p = proxy_score(positive, positive.decision.prompt, clean);
    CHECK(p.directional_contradiction);

    auto negative = base_step(1);  // +0.4 score on a rising bar
    const auto n = proxy_score(negative, negative.decision.prompt, clean);
    CHECK_FALSE(n.directional_contradiction);

    // sub-threshold contradictions stay silent
    auto weak = base_step(1);
    weak.decision.directional_scores = {{"A", -0.1}};
    CHECK_FALSE(proxy_score(weak, weak.decision.prompt, clean).directional_contradiction);
  }

  // overconfident on a flat market
  {
    auto positive = base_step(2);
    positive.observation["A"] = {2, 100.0, 100.05, 99.98, 100.05, 5000};  // 0.05% move
    positive.decision.confidence = 0.9;
    positive.decision.directional_scores = {{"A", 0.0}};
    const auto p = proxy_score(positive, positive.decision.prompt, clean);
    CHECK(p.overconfident_weak);

    auto negative = positive;
    negative.decision.confidence = 0.5;
    CHECK_FALSE(proxy_score(negative, negative.decision.prompt, clean).overconfident_weak);

    auto moving = positive;  // confident on a real move is fine
    moving.observation["A"] = {2, 100.0, 102.0, 99.5, 101.5, 5000};
    CHECK_FALSE(proxy_score(moving, moving.decision.prompt, clean).overconfident_weak);
  }

  // stale no-risk claim against a memory with prior failures
  {
    auto positive = base_step(3);
    positive.decision.rationale = "no risk so far, scaling up";
    positive.decision.directional_scores = {{"A", 0.3}};
    RiskMemory history;
    history.violations_total = 2;
    const auto p = proxy_score(positive, positive.decision.prompt, history);
    CHECK(p.stale_no_risk);

    const auto n = proxy_score(positive, positive.decision.prompt, clean);  // clean memory
    CHECK_FALSE(n.stale_no_risk);

    auto honest = base_step(3);  // no such claim
    CHECK_FALSE(proxy_score(honest, honest.decision.prompt, history).stale_no_risk);
  }
}

TEST_CASE("score arithmetic: empty rationale excluded, weights 0.25 each, monotone") {
  RiskMemory clean;
  auto cot_free = base_step(0);
  cot_free.decision.rationale.clear();
  cot_free.decision.cot_free = true;
  CHECK(proxy_score(cot_free, cot_free.decision.prompt, clean).score == 0.0);

  // two components - unsupported "earnings" plus overconfident on a flat bar
  auto two = base_step(1);
  two.observation["A"] = {1, 100.0, 100.05, 99.99, 100.05, 5000};
  two.decision.rationale = "earnings beat justifies conviction";
  two.decision.confidence = 0.9;
  two.decision.directional_scores = {{"A", 0.0}};
  const auto p2 = proxy_score(two, two.decision.prompt, clean);
  CHECK(p2.components() == 2);
  CHECK(p2.score == doctest::Approx(0.5).epsilon(1e-12));

  // adding a firing component never decreases the score
  auto three = two;
  three.decision.rationale = "no risk so far, earnings beat justifies conviction";
  RiskMemory history;
  history.rejected_total = 1;
  const auto p3 = proxy_score(three, three.decision.prompt, history);
  CHECK(p3.components() == 3);
  CHECK(p3.score >= p2.score);
  CHECK(p3.score == doctest::Approx(0.75).epsilon(1e-12));

  // every firing component carries evidence
  CHECK(p3.evidence.size() >= 3);
}

TEST_CASE("lexicon matching is case-insensitive and span-recorded") {
  RiskMemory clean;
  auto step = base_step(0);
  step.decision.rationale = "BREAKOUT above Resistance confirmed by NEWS flow";
  const auto p = proxy_score(step, step.decision.prompt, clean);
  CHECK(p.unsupported_context);
  CHECK(p.evidence.size() >= 3);  // breakout, resistance, news
}

TEST_CASE("audit correlations: constants are absent-flagged, self-correlation is 1") {
  std::vector<TrajectoryStep> steps;
  std::vector<ProxyScore> scores;
  for (int i = 0; i < 10; ++i) {
    auto step = base_step(i);
    step.execution.rejected = i % 3 == 0 ? 1 : 0;
    step.risk_report.clipped_count = 0;  // gate never fires
    steps.push_back(step);
    ProxyScore score;
    score.step = i;
    score.score = static_cast<double>(step.execution.rejected);  // identical series
    scores.push_back(score);
  }
  const auto corr = audit_correlations(scores, steps);
  REQUIRE(corr.rejected.has_value());
  CHECK(*corr.rejected == doctest::Approx(1.0).epsilon(1e-12));
  // gate indicator is constant zero -> absent, not zero (no-risk convention)
  CHECK_FALSE(corr.risk_gate.has_value());
  CHECK_FALSE(corr.violations.has_value());

  // constant scores -> everything absent
  for (auto& s : scores) s.score = 0.5;
  const auto flat = audit_correlations(scores, steps);
  CHECK_FALSE(flat.rejected.has_value());
  CHECK_FALSE(flat.risk_gate.has_value());
}

TEST_CASE("annotation export: deterministic, stratified, sized and shaped correctly") {
  std::vector<TrajectoryStep> steps;
  for (int i = 0; i < 52; ++i) {
    auto step = base_step(i);
    if (i % 5 == 0) {
      step.decision.rationale = "regulation tailwind, adding";  // high-proxy candidates
    }
    steps.push_back(step);
  }
  const fs::path a_path = fs::temp_directory_path() / "tb_ann_a.csv";
  const fs::path b_path = fs::temp_directory_path() / "tb_ann_b.csv";
  const auto a = export_annotation_sample(steps, a_path, 50, 11);
  const auto b = export_annotation_sample(steps, b_path, 50, 11);
  CHECK(a.rows == 50);
  std::ifstream fa(a_path), fb(b_path);
  std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);  // same seed, identical file
  CHECK(ca.rfind("step_id,rationale_excerpt,proxy_label,annotator_1,annotator_2,adjudicated\n", 0) == 0);
  // contains both strata
  CHECK(ca.find(",1,,,") != std::string::npos);
  CHECK(ca.find(",0,,,") != std::string::npos);

  // shrunk sample with a warning when there are too few eligible steps
  std::vector<TrajectoryStep> few(steps.begin(), steps.begin() + 10);
  const auto shrunk = export_annotation_sample(few, a_path, 50, 11);
  CHECK(shrunk.rows == 10);
  REQUIRE_FALSE(shrunk.warnings.empty());

  // all-empty rationales: zero rows plus a warning
  for (auto& s : few) s.decision.rationale.clear();
  const auto empty = export_annotation_sample(few, a_path, 50, 11);
  CHECK(empty.rows == 0);
  CHECK_FALSE(empty.warnings.empty());
}

TEST_CASE("annotation agreement: kappa and iou fixtures") {
  const fs::path path = fs::temp_directory_path() / "tb_agree.csv";
  // identical annotators, proxy == adjudicated -> kappa 1, iou 1
  {
    std::ofstream out(path);
    out << "step_id,rationale_excerpt,proxy_label,annotator_1,annotator_2,adjudicated\n";
    for (int i = 0; i < 20; ++i) {
      const int label = i % 3 == 0 ? 1 : 0;
      out << i << ",text," << label << ',' << label << ',' << label << ',' << label << "\n";
    }
  }
  const auto perfect = annotation_agreement(path);
  CHECK(perfect.kappa == doctest::Approx(1.0));
  CHECK(perfect.iou == doctest::Approx(1.0));

  // kappa matches the brute-force contingency formula on all small 2x2 tables
  for (int a = 0; a <= 6; ++a) {
    for (int b = 0; b <= 6; ++b) {
      for (int c = 0; c <= 6; ++c) {
        for (int d = 0; d <= 6; ++d) {
          const int n = a + b + c + d;
          if (n < 2) continue;
          std::ofstream out(path);
          out << "step_id,rationale_excerpt,proxy_label,annotator_1,annotator_2,adjudicated\n";
          int row = 0;
          for (int i = 0; i < a; ++i, ++row) out << row << ",t,1,1,1,1\n";
          for (int i = 0; i < b; ++i, ++row) out << row << ",t,0,1,0,0\n";
          for (int i = 0; i < c; ++i, ++row) out << row << ",t,0,0,1,0\n";
          for (int i = 0; i < d; ++i, ++row) out << row << ",t,0,0,0,0\n";
          out.close();
          const auto result = annotation_agreement(path);
          const double dn = n;
          const double po = (a + d) / dn;
          const double p1 = (a + b) / dn, p2 = (a + c) / dn;
          const double pe = p1 * p2 + (1 - p1) * (1 - p2);
          const double expected = pe >= 1.0 ? (po >= 1.0 ? 1.0 : 0.0) : (po - pe) / (1 - pe);
          CHECK(result.kappa == doctest::Approx(expected).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("annotation agreement: random annotators have small kappa; errors on gaps") {
  const fs::path path = fs::temp_directory_path() / "tb_agree_rand.csv";
  Rng rng(13);
  {
    std::ofstream out(path);
    out << "step_id,rationale_excerpt,proxy_label,annotator_1,annotator_2,adjudicated\n";
    for (int i = 0; i < 50; ++i) {
      out << i << ",t," << (rng.uniform() < 0.5 ? 1 : 0) << ',' << (rng.uniform() < 0.5 ? 1 : 0)
          << ',' << (rng.uniform() < 0.5 ? 1 : 0) << ',' << (rng.uniform() < 0.5 ? 1 : 0) << "\n";
    }
  }
  const auto random = annotation_agreement(path);
  CHECK(std::fabs(random.kappa) < 0.3);

  {
    std::ofstream out(path);
    out << "step_id,rationale_excerpt,proxy_label,annotator_1,annotator_2,adjudicated\n";
    out << "0,t,1,1,,1\n";  // missing annotator_2
  }
  CHECK_THROWS_WITH_AS(annotation_agreement(path), doctest::Contains("incomplete-annotation"),
                       Error);
}

TEST_CASE("memory states rebuilt from the log feed the stale-no-risk rule") {
  std::vector<TrajectoryStep> steps;
  for (int i = 0; i < 4; ++i) {
    auto step = base_step(i);
    if (i == 1) step.execution.rejected = 2;
    if (i == 3) step.decision.rationale = "no prior risk, adding";
    steps.push_back(step);
  }
  const auto scores = proxy_scores(steps);
  CHECK_FALSE(scores[1].stale_no_risk);  // rejection happens at step 1, memory sees it after
  CHECK(scores[3].stale_no_risk);        // by step 3 the memory holds the failures
}
