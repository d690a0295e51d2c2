#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tradebench/metrics.hpp"

namespace tradebench {

struct TrajectoryStep;

struct PairedStats {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double win_rate = 0.0;  // ties excluded from the numerator
  double p_value = 1.0;
  std::size_t ties = 0;
  bool degenerate = false;  // zero-variance differences
};

// Standard normal CDF via a rational Chebyshev approximation of erf/erfc
// (Cody-style three-regime evaluation). Max relative error is below 1e-14 on
// [-8, 8]; the unit suite cross-checks against an independent erfc to 1e-12.
double normal_cdf(double x);
double erf_rational(double x);
double erfc_rational(double x);

// Paired differences d = a - b with normal-approximation two-sided p-values.
PairedStats paired_stats(const std::vector<double>& a, const std::vector<double>& b);

struct QuartileLearning {
  double early_risk_rate = 0.0;
  double late_risk_rate = 0.0;
  double early_cal = 0.0;
  double late_cal = 0.0;
  double intent_drift = 0.0;  // late mean gross intent minus early mean
};

QuartileLearning quartile_learning(const std::vector<TrajectoryStep>& steps);

struct CaseMetricRow {
  std::string case_name;
  std::string metric;
  std::size_t n = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct PairedRow {
  std::string case_name;  // compared against the baseline
  std::string metric;
  PairedStats stats;
};

struct SweepTables {
  std::vector<CaseMetricRow> case_rows;
  std::vector<PairedRow> paired_rows;
};

// Metric names exposed by the aggregate tables, in emission order.
const std::vector<std::string>& sweep_metric_names();
double metric_value(const MetricsBundle& bundle, const std::string& metric);

SweepTables sweep_aggregate(
    const std::map<std::string, std::map<std::uint64_t, MetricsBundle>>& runs,
    const std::string& baseline_case, const std::vector<std::string>& case_order = {});

}  // namespace tradebench
