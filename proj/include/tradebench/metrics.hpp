#pragma once

#include <map>
#include <string>
#include <vector>

namespace tradebench {

struct TrajectoryStep;

struct MetricsBundle {
  // performance
  double total_return = 0.0;
  double sharpe = 0.0;
  bool sharpe_defined = false;
  double volatility = 0.0;
  double max_drawdown = 0.0;
  double final_equity = 0.0;
  // behavior
  long order_count = 0;
  long fill_count = 0;
  long turnover_events = 0;
  double hold_ratio = 0.0;
  // execution realism
  double fill_rate = 1.0;  // 1.0 by convention when nothing was requested
  double partial_fill_rate = 0.0;
  long rejected = 0;
  long pending = 0;
  double commissions = 0.0;
  double slippage = 0.0;
  // risk audit
  long clipped = 0;
  long blocked = 0;
  long failed_checks = 0;
  long warnings = 0;
  long violations = 0;
  // concentration
  double herfindahl = 0.0;
  bool herfindahl_defined = false;
  // raw quantities kept so replays can reproduce fill_rate exactly
  double requested_qty = 0.0;
  double filled_qty = 0.0;
};

// Equity-curve statistics. periods_per_year feeds the Sharpe annualization and
// is recorded in every summary because no convention is canonical here.
MetricsBundle performance_metrics(const std::vector<double>& equity_curve,
                                  double periods_per_year);

MetricsBundle execution_metrics(const std::vector<TrajectoryStep>& steps);

// Sum of squared normalized absolute weights: 1/N at equal weight.
double herfindahl(const std::map<std::string, double>& weights);

// Full bundle for a run: performance over the logged equity curve plus the
// execution/risk counters, with mean concentration of approved weights.
MetricsBundle bundle_from_steps(const std::vector<TrajectoryStep>& steps,
                                double periods_per_year);

bool bundles_equal(const MetricsBundle& a, const MetricsBundle& b, double real_tol);

}  // namespace tradebench
