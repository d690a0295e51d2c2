#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tradebench/agents.hpp"

namespace tradebench {

struct RiskPolicy {
  double max_position = 0.35;  // per-symbol |w| cap
  double max_turnover = 0.5;   // sum |dw| per step
  double max_gross = 1.0;      // sum |w|
  bool enabled = true;
  // A decision whose gross intent exceeds block_factor * max_gross is blocked
  // outright (approved = previous weights).
  double block_factor = 2.0;
};

struct RiskReport {
  std::map<std::string, double> approved_weights;
  long clipped_count = 0;
  long blocked_count = 0;
  long failed_checks = 0;
  long warning_checks = 0;
  long violations = 0;  // realized breaches, filled in post-trade
  double calibration_gap = 0.0;
  double calibration_score = 1.0;
  std::vector<std::string> notes;

  bool gated() const { return clipped_count > 0 || blocked_count > 0 || violations > 0; }
};

// Clip / shrink / block an intended decision against the policy. Always
// produces a report; a disabled policy passes the intent through untouched.
RiskReport evaluate(const DecisionRecord& intended,
                    const std::map<std::string, double>& prev_weights, const RiskPolicy& policy);

// Pure recomputation of (gap, score) from intended vs approved weights;
// score = 1 - min(1, gap / max(1, gross intended exposure)).
std::pair<double, double> calibration(const DecisionRecord& intended, const RiskReport& report);

}  // namespace tradebench
