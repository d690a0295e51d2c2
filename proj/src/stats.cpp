#include "tradebench/stats.hpp"

#include <algorithm>
#include <cmath>

#include "tradebench/common.hpp"
#include "tradebench/trajectory.hpp"

namespace tradebench {

namespace {

// Rational Chebyshev coefficients for erf/erfc (Cody 1969 / SPECFUN CALERF).
constexpr double kA[5] = {3.16112374387056560e0, 1.13864154151050156e2, 3.77485237685302021e2,
                          3.20937758913846947e3, 1.85777706184603153e-1};
constexpr double kB[4] = {2.36012909523441209e1, 2.44024637934444173e2, 1.28261652607737228e3,
                          2.84423683343917062e3};
constexpr double kC[9] = {5.64188496988670089e-1, 8.88314979438837594e0, 6.61191906371416295e1,
                          2.98635138197400131e2, 8.81952221241769090e2, 1.71204761263407058e3,
                          2.05107837782607147e3, 1.23033935479799725e3, 2.15311535474403846e-8};
constexpr double kD[8] = {1.57449261107098347e1, 1.17693950891312499e2, 5.37181101862009858e2,
                          1.62138957456669019e3, 3.29079923573345963e3, 4.36261909014324716e3,
                          3.43936767414372164e3, 1.23033935480374942e3};
constexpr double kP[6] = {3.05326634961232344e-1, 3.60344899949804439e-1, 1.25781726111229246e-1,
                          1.60837851487422766e-2, 6.58749161529837803e-4, 1.63153871373020978e-2};
constexpr double kQ[5] = {2.56852019228982242e0, 1.87295284992346047e0, 5.27905102951428412e-1,
                          6.05183413124413191e-2, 2.33520497626869185e-3};
constexpr double kInvSqrtPi = 5.6418958354775628695e-1;

double erfc_mid(double y) {
  // 0.46875 < y <= 4
  double xnum = kC[8] * y;
  double xden = y;
  for (int i = 0; i < 7; ++i) {
    xnum = (xnum + kC[i]) * y;
    xden = (xden + kD[i]) * y;
  }
  double result = (xnum + kC[7]) / (xden + kD[7]);
  const double ysq = std::trunc(y * 16.0) / 16.0;
  const double del = (y - ysq) * (y + ysq);
  return std::exp(-ysq * ysq) * std::exp(-del) * result;
}

double erfc_tail(double y) {
  // y > 4
  const double z = 1.0 / (y * y);
  double xnum = kP[5] * z;
  double xden = z;
  for (int i = 0; i < 4; ++i) {
    xnum = (xnum + kP[i]) * z;
    xden = (xden + kQ[i]) * z;
  }
  double result = z * (xnum + kP[4]) / (xden + kQ[4]);
  result = (kInvSqrtPi - result) / y;
  const double ysq = std::trunc(y * 16.0) / 16.0;
  const double del = (y - ysq) * (y + ysq);
  return std::exp(-ysq * ysq) * std::exp(-del) * result;
}

}  // namespace

double erf_rational(double x) {
  const double y = std::fabs(x);
  if (y <= 0.46875) {
    const double z = y > 1e-300 ? y * y : 0.0;
    double xnum = kA[4] * z;
    double xden = z;
    for (int i = 0; i < 3; ++i) {
      xnum = (xnum + kA[i]) * z;
      xden = (xden + kB[i]) * z;
    }
    return x * (xnum + kA[3]) / (xden + kB[3]);
  }
  const double result = 1.0 - (y <= 4.0 ? erfc_mid(y) : erfc_tail(y));
  return x < 0.0 ? -result : result;
}

double erfc_rational(double x) {
  const double y = std::fabs(x);
  double result;
  if (y <= 0.46875) {
    result = 1.0 - erf_rational(y);
  } else if (y <= 4.0) {
    result = erfc_mid(y);
  } else {
    result = erfc_tail(y);
  }
  return x < 0.0 ? 2.0 - result : result;
}

double normal_cdf(double x) { return 0.5 * erfc_rational(-x / M_SQRT2); }

PairedStats paired_stats(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    fail("shape-error", "paired series lengths differ: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  if (a.size() < 2) fail("shape-error", "need n >= 2 pairs");

  PairedStats out;
  out.n = a.size();
  const double n = static_cast<double>(a.size());

  std::vector<double> d(a.size());
  std::size_t wins = 0, ties = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d[i] = a[i] - b[i];
    sum += d[i];
    if (d[i] > 0.0) ++wins;
    if (d[i] == 0.0) ++ties;
  }
  out.mean_diff = sum / n;
  out.win_rate = static_cast<double>(wins) / n;
  out.ties = ties;

  double ss = 0.0;
  for (double v : d) ss += (v - out.mean_diff) * (v - out.mean_diff);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double se = sd / std::sqrt(n);

  if (sd == 0.0) {
    out.degenerate = true;
    out.ci_low = out.ci_high = out.mean_diff;
    out.p_value = out.mean_diff != 0.0 ? 0.0 : 1.0;
    return out;
  }

  out.ci_low = out.mean_diff - 1.96 * se;
  out.ci_high = out.mean_diff + 1.96 * se;
  const double t = out.mean_diff / se;
  out.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(t)));
  return out;
}

QuartileLearning quartile_learning(const std::vector<TrajectoryStep>& steps) {
  if (steps.size() < 8) {
    fail("insufficient-horizon", "need >= 8 steps, got " + std::to_string(steps.size()));
  }
  const std::size_t q = (steps.size() + 3) / 4;  // ceil(n/4)

  auto window_stats = [&](std::size_t begin, std::size_t end, double& risk_rate, double& cal,
                          double& intent) {
    long gated = 0;
    double cal_sum = 0.0;
    double intent_sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s = steps[i];
      if (s.risk_report.gated()) ++gated;
      cal_sum += s.risk_report.calibration_score;
      intent_sum += s.decision.gross_intent();
    }
    const double m = static_cast<double>(end - begin);
    risk_rate = static_cast<double>(gated) / m;
    cal = cal_sum / m;
    intent = intent_sum / m;
  };

  QuartileLearning out;
  double early_intent = 0.0, late_intent = 0.0;
  window_stats(0, q, out.early_risk_rate, out.early_cal, early_intent);
  window_stats(steps.size() - q, steps.size(), out.late_risk_rate, out.late_cal, late_intent);
  out.intent_drift = late_intent - early_intent;
  return out;
}

const std::vector<std::string>& sweep_metric_names() {
  static const std::vector<std::string> names = {
      "total_return", "sharpe",   "volatility", "max_drawdown", "final_equity", "fill_rate",
      "rejected",     "pending",  "commissions", "slippage",    "clipped",      "herfindahl"};
  return names;
}

double metric_value(const MetricsBundle& b, const std::string& metric) {
  if (metric == "total_return") return b.total_return;
  if (metric == "sharpe") return b.sharpe;
  if (metric == "volatility") return b.volatility;
  if (metric == "max_drawdown") return b.max_drawdown;
  if (metric == "final_equity") return b.final_equity;
  if (metric == "fill_rate") return b.fill_rate;
  if (metric == "rejected") return static_cast<double>(b.rejected);
  if (metric == "pending") return static_cast<double>(b.pending);
  if (metric == "commissions") return b.commissions;
  if (metric == "slippage") return b.slippage;
  if (metric == "clipped") return static_cast<double>(b.clipped);
  if (metric == "herfindahl") return b.herfindahl;
  fail("invalid-config", "unknown metric '" + metric + "'");
}

SweepTables sweep_aggregate(
    const std::map<std::string, std::map<std::uint64_t, MetricsBundle>>& runs,
    const std::string& baseline_case, const std::vector<std::string>& case_order) {
  if (runs.empty()) fail("unbalanced-design", "no runs");
  const auto baseline_it = runs.find(baseline_case);
  if (baseline_it == runs.end()) {
    fail("unbalanced-design", "baseline case '" + baseline_case + "' not present");
  }

  std::vector<std::uint64_t> seeds;
  for (const auto& [seed, _] : baseline_it->second) seeds.push_back(seed);
  for (const auto& [case_name, by_seed] : runs) {
    if (by_seed.size() != seeds.size()) {
      fail("unbalanced-design", "case '" + case_name + "' has a different seed count");
    }
    for (std::uint64_t seed : seeds) {
      if (!by_seed.count(seed)) {
        fail("unbalanced-design",
             "case '" + case_name + "' missing seed " + std::to_string(seed));
      }
    }
  }

  std::vector<std::string> order = case_order;
  if (order.empty()) {
    for (const auto& [case_name, _] : runs) order.push_back(case_name);
  }

  SweepTables tables;
  const double n = static_cast<double>(seeds.size());
  for (const auto& case_name : order) {
    const auto& by_seed = runs.at(case_name);
    for (const auto& metric : sweep_metric_names()) {
      std::vector<double> values;
      values.reserve(seeds.size());
      for (std::uint64_t seed : seeds) values.push_back(metric_value(by_seed.at(seed), metric));
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= n;
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      const double se = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
      tables.case_rows.push_back(
          {case_name, metric, seeds.size(), mean, mean - 1.96 * se, mean + 1.96 * se});

      if (case_name != baseline_case && seeds.size() >= 2) {
        std::vector<double> base_values;
        base_values.reserve(seeds.size());
        for (std::uint64_t seed : seeds) {
          base_values.push_back(metric_value(baseline_it->second.at(seed), metric));
        }
        tables.paired_rows.push_back({case_name, metric, paired_stats(values, base_values)});
      }
    }
  }
  return tables;
}

}  // namespace tradebench
