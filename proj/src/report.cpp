#include "tradebench/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tradebench/common.hpp"
#include "tradebench/orchestrator.hpp"
#include "tradebench/reprdiag.hpp"

namespace tradebench {

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io-error", "cannot write " + path.string());
  out << content;
}

std::string svg_header(int width, int height, const std::string& title) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"12\" y=\"20\" font-family=\"monospace\" font-size=\"13\">" << title
      << "</text>\n";
  return out.str();
}

const char* kPalette[] = {"#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed",
                          "#0891b2", "#be185d", "#4d7c0f"};

std::string num(double v) { return format_fixed(v, 3); }

}  // namespace

void emit_tables(const FamilySummary& summary, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  // runs.csv: full metric bundle per (case, seed).
  {
    std::ostringstream out;
    out << "case,seed,complete,total_return,sharpe,sharpe_defined,volatility,max_drawdown,"
           "final_equity,order_count,fill_count,turnover_events,hold_ratio,fill_rate,"
           "partial_fill_rate,rejected,pending,commissions,slippage,clipped,blocked,"
           "failed_checks,warnings,violations,herfindahl,log,log_hash\n";
    for (const auto& run : summary.runs) {
      const auto& m = run.metrics;
      out << run.case_name << ',' << run.seed << ',' << (run.complete ? 1 : 0) << ','
          << format_full(m.total_return) << ',' << format_full(m.sharpe) << ','
          << (m.sharpe_defined ? 1 : 0) << ',' << format_full(m.volatility) << ','
          << format_full(m.max_drawdown) << ',' << format_full(m.final_equity) << ','
          << m.order_count << ',' << m.fill_count << ',' << m.turnover_events << ','
          << format_full(m.hold_ratio) << ',' << format_full(m.fill_rate) << ','
          << format_full(m.partial_fill_rate) << ',' << m.rejected << ',' << m.pending << ','
          << format_full(m.commissions) << ',' << format_full(m.slippage) << ',' << m.clipped << ','
          << m.blocked << ',' << m.failed_checks << ',' << m.warnings << ',' << m.violations << ','
          << (m.herfindahl_defined ? format_full(m.herfindahl) : std::string()) << ','
          << run.log_path << ',' << run.log_hash << '\n';
    }
    write_file(dir / "runs.csv", out.str());
  }

  // cases.csv: per-case per-metric mean with 95% CI.
  {
    std::ostringstream out;
    out << "case,metric,n,mean,ci_low,ci_high,mean_display\n";
    for (const auto& row : summary.tables.case_rows) {
      out << row.case_name << ',' << row.metric << ',' << row.n << ',' << format_full(row.mean)
          << ',' << format_full(row.ci_low) << ',' << format_full(row.ci_high) << ','
          << format_fixed(row.mean, 4) << '\n';
    }
    write_file(dir / "cases.csv", out.str());
  }

  // paired.csv: paired differences against the baseline case.
  {
    std::ostringstream out;
    out << "case,baseline,metric,n,mean_diff,ci_low,ci_high,win_rate,p_value,ties,degenerate,"
           "mean_diff_display\n";
    for (const auto& row : summary.tables.paired_rows) {
      out << row.case_name << ',' << summary.baseline_case << ',' << row.metric << ','
          << row.stats.n << ',' << format_full(row.stats.mean_diff) << ','
          << format_full(row.stats.ci_low) << ',' << format_full(row.stats.ci_high) << ','
          << format_full(row.stats.win_rate) << ',' << format_full(row.stats.p_value) << ','
          << row.stats.ties << ',' << (row.stats.degenerate ? 1 : 0) << ','
          << format_fixed(row.stats.mean_diff, 4) << '\n';
    }
    write_file(dir / "paired.csv", out.str());
  }
}

std::string equity_curve_svg(const std::string& title, const std::vector<double>& equity,
                             const PhaseLabeling& labels) {
  constexpr int kW = 760, kH = 300;
  constexpr double kLeft = 60, kRight = 740, kTop = 40, kBottom = 270;
  std::ostringstream out;
  out << svg_header(kW, kH, title);

  if (equity.size() >= 2) {
    double lo = equity.front(), hi = equity.front();
    for (double e : equity) {
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    if (hi <= lo) hi = lo + 1.0;

    auto x_of = [&](std::size_t t) {
      return kLeft + (kRight - kLeft) * static_cast<double>(t) /
                         static_cast<double>(equity.size() - 1);
    };
    auto y_of = [&](double e) { return kBottom - (kBottom - kTop) * (e - lo) / (hi - lo); };

    // Drawdown shading: bands where equity sits below its running peak.
    double peak = equity.front();
    std::size_t band_start = 0;
    bool in_band = false;
    for (std::size_t t = 0; t < equity.size(); ++t) {
      peak = std::max(peak, equity[t]);
      const bool below = equity[t] < peak * (1.0 - 1e-12);
      if (below && !in_band) {
        in_band = true;
        band_start = t;
      }
      if ((!below || t + 1 == equity.size()) && in_band) {
        const std::size_t band_end = below ? t : t - 1;
        out << "<rect x=\"" << num(x_of(band_start)) << "\" y=\"" << num(kTop) << "\" width=\""
            << num(std::max(1.0, x_of(band_end) - x_of(band_start))) << "\" height=\""
            << num(kBottom - kTop) << "\" fill=\"#fee2e2\" opacity=\"0.6\"/>\n";
        in_band = false;
      }
    }

    out << "<polyline fill=\"none\" stroke=\"" << kPalette[0] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < equity.size(); ++t) {
      if (t > 0) out << ' ';
      out << num(x_of(t)) << ',' << num(y_of(equity[t]));
    }
    out << "\"/>\n";

    for (std::size_t a : labels.anchors) {
      if (a >= equity.size()) continue;
      out << "<circle cx=\"" << num(x_of(a)) << "\" cy=\"" << num(y_of(equity[a]))
          << "\" r=\"4\" fill=\"#dc2626\"/>\n";
      out << "<line x1=\"" << num(x_of(a)) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(x_of(a))
          << "\" y2=\"" << num(kBottom) << "\" stroke=\"#dc2626\" stroke-width=\"0.5\" "
          << "stroke-dasharray=\"3,3\"/>\n";
    }

    out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kBottom) << "\" x2=\"" << num(kRight)
        << "\" y2=\"" << num(kBottom) << "\" stroke=\"#111\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft)
        << "\" y2=\"" << num(kBottom) << "\" stroke=\"#111\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << num(kLeft) << "\" y=\"" << num(kBottom + 16)
        << "\" font-family=\"monospace\" font-size=\"10\">0</text>\n";
    out << "<text x=\"" << num(kRight - 30) << "\" y=\"" << num(kBottom + 16)
        << "\" font-family=\"monospace\" font-size=\"10\">" << equity.size() - 1 << "</text>\n";
    out << "<text x=\"6\" y=\"" << num(kTop + 4) << "\" font-family=\"monospace\" font-size=\"10\">"
        << format_fixed(hi, 0) << "</text>\n";
    out << "<text x=\"6\" y=\"" << num(kBottom) << "\" font-family=\"monospace\" font-size=\"10\">"
        << format_fixed(lo, 0) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string grouped_bar_svg(const std::string& title, const std::vector<std::string>& groups,
                            const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  constexpr int kW = 760, kH = 320;
  constexpr double kLeft = 60, kRight = 740, kTop = 50, kBottom = 250;
  std::ostringstream out;
  out << svg_header(kW, kH, title);

  double lo = 0.0, hi = 0.0;
  for (const auto& [_, values] : series) {
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  auto y_of = [&](double v) { return kBottom - (kBottom - kTop) * (v - lo) / (hi - lo); };
  const double y_zero = y_of(0.0);

  const std::size_t n_groups = groups.size();
  const std::size_t n_series = series.size();
  if (n_groups > 0 && n_series > 0) {
    const double group_width = (kRight - kLeft) / static_cast<double>(n_groups);
    const double bar_width = group_width * 0.7 / static_cast<double>(n_series);
    for (std::size_t g = 0; g < n_groups; ++g) {
      for (std::size_t s = 0; s < n_series; ++s) {
        if (g >= series[s].second.size()) continue;
        const double v = series[s].second[g];
        const double x = kLeft + group_width * static_cast<double>(g) + group_width * 0.15 +
                         bar_width * static_cast<double>(s);
        const double y = std::min(y_of(v), y_zero);
        const double h = std::fabs(y_of(v) - y_zero);
        out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bar_width * 0.9)
            << "\" height=\"" << num(std::max(h, 0.5)) << "\" fill=\""
            << kPalette[s % 8] << "\"/>\n";
      }
      out << "<text x=\"" << num(kLeft + group_width * (static_cast<double>(g) + 0.5)) << "\" y=\""
          << num(kBottom + 16) << "\" font-family=\"monospace\" font-size=\"9\" "
          << "text-anchor=\"middle\">" << groups[g] << "</text>\n";
    }
    for (std::size_t s = 0; s < n_series; ++s) {
      const double y = kBottom + 40 + 14 * static_cast<double>(s);
      out << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(y - 9)
          << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[s % 8] << "\"/>\n";
      out << "<text x=\"" << num(kLeft + 16) << "\" y=\"" << num(y)
          << "\" font-family=\"monospace\" font-size=\"10\">" << series[s].first << "</text>\n";
    }
    out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y_zero) << "\" x2=\"" << num(kRight)
        << "\" y2=\"" << num(y_zero) << "\" stroke=\"#111\" stroke-width=\"1\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string three_panel_svg(const std::string& title, const std::vector<std::string>& cases,
                            const std::vector<double>& herfindahl,
                            const std::vector<double>& clipped,
                            const std::vector<double>& returns) {
  constexpr int kW = 900, kH = 300;
  std::ostringstream out;
  out << svg_header(kW, kH, title);

  struct Panel {
    const char* label;
    const std::vector<double>* values;
    double x0;
  };
  const Panel panels[3] = {{"concentration (herfindahl)", &herfindahl, 20.0},
                           {"risk-gate pressure (clipped)", &clipped, 320.0},
                           {"return", &returns, 620.0}};

  for (int p = 0; p < 3; ++p) {
    const auto& values = *panels[p].values;
    const double x0 = panels[p].x0;
    out << "<text x=\"" << num(x0) << "\" y=\"44\" font-family=\"monospace\" font-size=\"11\">"
        << panels[p].label << "</text>\n";
    double lo = 0.0, hi = 0.0;
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi <= lo) hi = lo + 1.0;
    const double top = 60, bottom = 220, width = 260;
    auto y_of = [&](double v) { return bottom - (bottom - top) * (v - lo) / (hi - lo); };
    const double y_zero = y_of(0.0);
    const double bw = values.empty() ? width : width / static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double y = std::min(y_of(values[i]), y_zero);
      const double h = std::fabs(y_of(values[i]) - y_zero);
      out << "<rect x=\"" << num(x0 + bw * static_cast<double>(i) + bw * 0.15) << "\" y=\"" << num(y)
          << "\" width=\"" << num(bw * 0.7) << "\" height=\"" << num(std::max(h, 0.5))
          << "\" fill=\"" << kPalette[p * 2] << "\"/>\n";
      out << "<text x=\"" << num(x0 + bw * (static_cast<double>(i) + 0.5)) << "\" y=\"238\" "
          << "font-family=\"monospace\" font-size=\"8\" text-anchor=\"middle\">"
          << (i < cases.size() ? cases[i] : std::string("?")) << "</text>\n";
      out << "<text x=\"" << num(x0 + bw * (static_cast<double>(i) + 0.5)) << "\" y=\""
          << num(y - 4) << "\" font-family=\"monospace\" font-size=\"8\" text-anchor=\"middle\">"
          << format_fixed(values[i], 3) << "</text>\n";
    }
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y_zero) << "\" x2=\"" << num(x0 + width)
        << "\" y2=\"" << num(y_zero) << "\" stroke=\"#111\" stroke-width=\"1\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void emit_charts(const FamilySummary& summary, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  // Equity charts: first recorded seed per case.
  std::map<std::string, const RunResult*> first_runs;
  for (const auto& run : summary.runs) {
    if (run.complete && !first_runs.count(run.case_name)) first_runs[run.case_name] = &run;
  }
  for (const auto& case_name : summary.case_names) {
    const auto it = first_runs.find(case_name);
    if (it == first_runs.end()) continue;
    const auto loaded = load_trajectory(summary.directory / it->second->log_path);
    std::vector<double> equity;
    equity.reserve(loaded.steps.size());
    for (const auto& step : loaded.steps) equity.push_back(step.portfolio.equity);
    PhaseLabeling labels;
    if (equity.size() > 6) {
      labels = label_phases(equity, AnchorMode::max_anchor);
    } else {
      labels.labels.assign(equity.size(), Phase::normal);
    }
    write_file(dir / (case_name + "_equity.svg"),
               equity_curve_svg(summary.family + " / " + case_name + " equity, seed " +
                                    std::to_string(it->second->seed),
                                equity, labels));
  }

  // Case comparison bars over seed means.
  std::vector<std::string> cases;
  std::vector<double> mean_return, mean_fill, mean_herf, mean_clipped;
  for (const auto& case_name : summary.case_names) {
    double r = 0.0, f = 0.0, h = 0.0, c = 0.0;
    std::size_t n = 0;
    for (const auto& run : summary.runs) {
      if (!run.complete || run.case_name != case_name) continue;
      r += run.metrics.total_return;
      f += run.metrics.fill_rate;
      h += run.metrics.herfindahl;
      c += static_cast<double>(run.metrics.clipped);
      ++n;
    }
    if (n == 0) continue;
    cases.push_back(case_name);
    mean_return.push_back(r / static_cast<double>(n));
    mean_fill.push_back(f / static_cast<double>(n));
    mean_herf.push_back(h / static_cast<double>(n));
    mean_clipped.push_back(c / static_cast<double>(n));
  }
  if (!cases.empty()) {
    write_file(dir / "comparison_bars.svg",
               grouped_bar_svg(summary.family + " case comparison (seed means)", cases,
                               {{"total_return", mean_return}, {"fill_rate", mean_fill}}));
    write_file(dir / "risk_pressure.svg",
               three_panel_svg(summary.family + " concentration / risk pressure / return", cases,
                               mean_herf, mean_clipped, mean_return));
  }
}

}  // namespace tradebench
