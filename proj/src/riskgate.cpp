#include "tradebench/riskgate.hpp"

#include <cmath>

#include "tradebench/common.hpp"

namespace tradebench {

namespace {

double gross(const std::map<std::string, double>& weights) {
  double g = 0.0;
  for (const auto& [_, w] : weights) g += std::fabs(w);
  return g;
}

}  // namespace

RiskReport evaluate(const DecisionRecord& intended,
                    const std::map<std::string, double>& prev_weights, const RiskPolicy& policy) {
  RiskReport report;
  report.approved_weights = intended.intended_weights;

  if (!policy.enabled) {
    report.calibration_gap = 0.0;
    report.calibration_score = 1.0;
    return report;
  }

  const double intended_exposure = intended.gross_intent();

  // Hard block: runaway gross intent is not clipped, it is refused whole.
  if (intended_exposure > policy.block_factor * policy.max_gross) {
    report.approved_weights = prev_weights;
    for (const auto& [symbol, _] : intended.intended_weights) {
      report.approved_weights.emplace(symbol, 0.0);
    }
    report.blocked_count += 1;
    report.failed_checks += 1;
    report.notes.push_back("block: gross intent " + format_fixed(intended_exposure, 4) +
                           " exceeds " + format_fixed(policy.block_factor, 1) + "x max_gross " +
                           format_fixed(policy.max_gross, 4));
  } else {
    for (auto& [symbol, w] : report.approved_weights) {
      if (std::fabs(w) > policy.max_position) {
        const double clipped = std::copysign(policy.max_position, w);
        report.notes.push_back("clip " + symbol + " " + format_fixed(w, 4) + " -> " +
                               format_fixed(clipped, 4));
        w = clipped;
        report.clipped_count += 1;
      }
    }

    const double g = gross(report.approved_weights);
    if (g > policy.max_gross) {
      const double scale = policy.max_gross / g;
      for (auto& [_, w] : report.approved_weights) w *= scale;
      report.warning_checks += 1;
      report.notes.push_back("gross scale " + format_fixed(g, 4) + " -> " +
                             format_fixed(policy.max_gross, 4));
    }

    double turnover = 0.0;
    for (const auto& [symbol, w] : report.approved_weights) {
      const auto it = prev_weights.find(symbol);
      turnover += std::fabs(w - (it == prev_weights.end() ? 0.0 : it->second));
    }
    for (const auto& [symbol, w] : prev_weights) {
      if (!report.approved_weights.count(symbol)) turnover += std::fabs(w);
    }
    if (turnover > policy.max_turnover) {
      // Shrink the change vector proportionally; direction of intent is kept.
      const double alpha = policy.max_turnover / turnover;
      for (auto& [symbol, w] : report.approved_weights) {
        const auto it = prev_weights.find(symbol);
        const double prev = it == prev_weights.end() ? 0.0 : it->second;
        w = prev + alpha * (w - prev);
      }
      for (const auto& [symbol, w] : prev_weights) {
        if (!report.approved_weights.count(symbol)) {
          report.approved_weights[symbol] = w + alpha * (0.0 - w);
        }
      }
      report.warning_checks += 1;
      report.notes.push_back("turnover shrink " + format_fixed(turnover, 4) + " -> " +
                             format_fixed(policy.max_turnover, 4));
    }
  }

  double gap = 0.0;
  for (const auto& [symbol, w] : intended.intended_weights) {
    const auto it = report.approved_weights.find(symbol);
    gap += std::fabs(w - (it == report.approved_weights.end() ? 0.0 : it->second));
  }
  for (const auto& [symbol, w] : report.approved_weights) {
    if (!intended.intended_weights.count(symbol)) gap += std::fabs(w);
  }
  report.calibration_gap = gap;
  report.calibration_score = 1.0 - std::min(1.0, gap / std::max(1.0, intended_exposure));
  return report;
}

std::pair<double, double> calibration(const DecisionRecord& intended, const RiskReport& report) {
  for (const auto& [symbol, _] : intended.intended_weights) {
    if (!report.approved_weights.count(symbol)) {
      fail("inconsistent-report", "approved weights missing symbol " + symbol);
    }
  }
  double gap = 0.0;
  for (const auto& [symbol, w] : report.approved_weights) {
    const auto it = intended.intended_weights.find(symbol);
    gap += std::fabs((it == intended.intended_weights.end() ? 0.0 : it->second) - w);
  }
  const double score = 1.0 - std::min(1.0, gap / std::max(1.0, intended.gross_intent()));
  return {gap, score};
}

}  // namespace tradebench
