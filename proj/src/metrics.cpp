#include "tradebench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "tradebench/common.hpp"
#include "tradebench/trajectory.hpp"

namespace tradebench {

MetricsBundle performance_metrics(const std::vector<double>& equity_curve,
                                  double periods_per_year) {
  if (equity_curve.size() < 2) fail("invalid-curve", "need at least 2 equity points");
  for (double e : equity_curve) {
    if (!(e > 0.0)) fail("invalid-curve", "non-positive equity point");
  }

  MetricsBundle out;
  const std::size_t n = equity_curve.size();
  std::vector<double> returns(n - 1);
  for (std::size_t t = 1; t < n; ++t) {
    returns[t - 1] = equity_curve[t] / equity_curve[t - 1] - 1.0;
  }

  out.total_return = equity_curve.back() / equity_curve.front() - 1.0;
  out.final_equity = equity_curve.back();

  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  double ss = 0.0;
  for (double r : returns) ss += (r - mean) * (r - mean);
  const double sd = returns.size() > 1
                        ? std::sqrt(ss / static_cast<double>(returns.size() - 1))
                        : 0.0;
  out.volatility = sd;
  if (sd > 0.0) {
    out.sharpe = mean / sd * std::sqrt(periods_per_year);
    out.sharpe_defined = true;
  } else {
    out.sharpe = 0.0;
    out.sharpe_defined = false;  // degenerate flat curve
  }

  double peak = equity_curve.front();
  double dd = 0.0;
  for (double e : equity_curve) {
    peak = std::max(peak, e);
    dd = std::min(dd, e / peak - 1.0);
  }
  out.max_drawdown = dd;
  return out;
}

MetricsBundle execution_metrics(const std::vector<TrajectoryStep>& steps) {
  MetricsBundle out;
  long steps_without_orders = 0;
  long partial_events = 0;
  for (const auto& step : steps) {
    const auto& e = step.execution;
    out.fill_count += static_cast<long>(e.fills.size());
    out.rejected += e.rejected;
    out.pending += e.pending;
    out.commissions += e.commission_total;
    out.slippage += e.slippage_total;
    out.requested_qty += e.requested_qty;
    out.filled_qty += e.filled_qty;
    partial_events += e.partial_fills;
    out.order_count += e.orders_submitted;
    if (e.orders_submitted > 0) {
      out.turnover_events += 1;
    } else {
      steps_without_orders += 1;
    }
    out.clipped += step.risk_report.clipped_count;
    out.blocked += step.risk_report.blocked_count;
    out.failed_checks += step.risk_report.failed_checks;
    out.warnings += step.risk_report.warning_checks;
    out.violations += step.risk_report.violations;
  }

  out.hold_ratio = steps.empty()
                       ? 0.0
                       : static_cast<double>(steps_without_orders) / static_cast<double>(steps.size());
  out.fill_rate = out.requested_qty > 0.0 ? out.filled_qty / out.requested_qty : 1.0;
  out.partial_fill_rate =
      out.order_count > 0 ? static_cast<double>(partial_events) / static_cast<double>(out.order_count)
                          : 0.0;
  return out;
}

double herfindahl(const std::map<std::string, double>& weights) {
  double gross = 0.0;
  for (const auto& [_, w] : weights) gross += std::fabs(w);
  if (gross <= 0.0) fail("undefined-concentration", "all weights are zero");
  double h = 0.0;
  for (const auto& [_, w] : weights) {
    const double u = std::fabs(w) / gross;
    h += u * u;
  }
  return h;
}

MetricsBundle bundle_from_steps(const std::vector<TrajectoryStep>& steps,
                                double periods_per_year) {
  if (steps.empty()) fail("invalid-curve", "no steps");
  std::vector<double> curve;
  curve.reserve(steps.size());
  for (const auto& step : steps) curve.push_back(step.portfolio.equity);

  MetricsBundle perf = steps.size() >= 2 ? performance_metrics(curve, periods_per_year)
                                         : MetricsBundle{};
  MetricsBundle exec = execution_metrics(steps);

  MetricsBundle out = exec;
  out.total_return = perf.total_return;
  out.sharpe = perf.sharpe;
  out.sharpe_defined = perf.sharpe_defined;
  out.volatility = perf.volatility;
  out.max_drawdown = perf.max_drawdown;
  out.final_equity = steps.back().portfolio.equity;

  double h_sum = 0.0;
  std::size_t h_count = 0;
  for (const auto& step : steps) {
    double gross = 0.0;
    for (const auto& [_, w] : step.risk_report.approved_weights) gross += std::fabs(w);
    if (gross > 0.0) {
      h_sum += herfindahl(step.risk_report.approved_weights);
      ++h_count;
    }
  }
  if (h_count > 0) {
    out.herfindahl = h_sum / static_cast<double>(h_count);
    out.herfindahl_defined = true;
  }
  return out;
}

namespace {

bool close_enough(double a, double b, double tol) {
  if (a == b) return true;
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

bool bundles_equal(const MetricsBundle& a, const MetricsBundle& b, double real_tol) {
  return a.order_count == b.order_count && a.fill_count == b.fill_count &&
         a.turnover_events == b.turnover_events && a.rejected == b.rejected &&
         a.pending == b.pending && a.clipped == b.clipped && a.blocked == b.blocked &&
         a.failed_checks == b.failed_checks && a.warnings == b.warnings &&
         a.violations == b.violations && a.sharpe_defined == b.sharpe_defined &&
         a.herfindahl_defined == b.herfindahl_defined &&
         close_enough(a.total_return, b.total_return, real_tol) &&
         close_enough(a.sharpe, b.sharpe, real_tol) &&
         close_enough(a.volatility, b.volatility, real_tol) &&
         close_enough(a.max_drawdown, b.max_drawdown, real_tol) &&
         close_enough(a.final_equity, b.final_equity, real_tol) &&
         close_enough(a.hold_ratio, b.hold_ratio, real_tol) &&
         close_enough(a.fill_rate, b.fill_rate, real_tol) &&
         close_enough(a.partial_fill_rate, b.partial_fill_rate, real_tol) &&
         close_enough(a.commissions, b.commissions, real_tol) &&
         close_enough(a.slippage, b.slippage, real_tol) &&
         close_enough(a.herfindahl, b.herfindahl, real_tol);
}

}  // namespace tradebench
