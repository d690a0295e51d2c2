#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tradebench/agents.hpp"

namespace tradebench {

struct TrajectoryStep;

// Fixed, documented proxy constants.
inline constexpr double kProxyComponentWeight = 0.25;
inline constexpr double kDirectionalScoreMin = 0.2;    // s_min
inline constexpr double kOverconfidentConfidence = 0.7;
inline constexpr double kWeakMoveThreshold = 0.002;    // 0.2% intraperiod move
inline constexpr double kHighProxyThreshold = 0.25;

struct ProxyScore {
  std::int64_t step = 0;
  bool unsupported_context = false;
  bool directional_contradiction = false;
  bool overconfident_weak = false;
  bool stale_no_risk = false;
  double score = 0.0;
  std::vector<std::string> evidence;

  int components() const {
    return static_cast<int>(unsupported_context) + static_cast<int>(directional_contradiction) +
           static_cast<int>(overconfident_weak) + static_cast<int>(stale_no_risk);
  }
};

// External-context lexicon (lowercase); "on chain" is matched as a bigram.
const std::vector<std::string>& context_lexicon();

ProxyScore proxy_score(const TrajectoryStep& step, const std::string& prompt,
                       const RiskMemory& memory);

// Memory state *before* each step, rebuilt deterministically from the log so
// log-only diagnostics see the same memory the run saw.
std::vector<RiskMemory> memory_states(const std::vector<TrajectoryStep>& steps);

// Convenience: per-step proxies using the recorded prompt and rebuilt memory.
std::vector<ProxyScore> proxy_scores(const std::vector<TrajectoryStep>& steps);

struct AuditCorrelations {
  std::optional<double> risk_gate;         // vs clipped|blocked|violation indicator
  std::optional<double> violations;
  std::optional<double> calibration_gap;
  std::optional<double> rejected;
  double high_gate_rate = 0.0;  // gate rate among score >= threshold steps
  double low_gate_rate = 0.0;
  std::size_t high_count = 0;
  std::size_t low_count = 0;
};

AuditCorrelations audit_correlations(const std::vector<ProxyScore>& scores,
                                     const std::vector<TrajectoryStep>& steps);

// Blind annotation export: seeded stratified sample, CSV columns
// step_id,rationale_excerpt,proxy_label,annotator_1,annotator_2,adjudicated.
struct AnnotationExport {
  std::size_t rows = 0;
  std::vector<std::string> warnings;
};

AnnotationExport export_annotation_sample(const std::vector<TrajectoryStep>& steps,
                                          const std::filesystem::path& path, std::size_t n = 50,
                                          std::uint64_t seed = 0);

struct Agreement {
  double kappa = 0.0;
  double iou = 0.0;
};

// Cohen's kappa between the two annotator columns and IoU between the proxy
// labels and the adjudicated column. All three must be fully populated 0/1.
Agreement annotation_agreement(const std::filesystem::path& completed_csv);

}  // namespace tradebench
