#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tradebench {

struct FamilySummary;
struct PhaseLabeling;

// CSV emission: runs.csv (one row per case x seed), cases.csv (means + CIs)
// and paired.csv (paired stats vs the baseline). Fixed column order, full
// precision plus a rounded display column, LF line endings.
void emit_tables(const FamilySummary& summary, const std::filesystem::path& dir);

// SVG emission, template-generated (no plotting dependency): per-case equity
// charts with drawdown shading and anchor markers, a grouped comparison bar
// chart, and a three-panel concentration/risk-pressure/return view.
void emit_charts(const FamilySummary& summary, const std::filesystem::path& dir);

// Chart builders, exposed for the CLI and tests.
std::string equity_curve_svg(const std::string& title, const std::vector<double>& equity,
                             const PhaseLabeling& labels);
std::string grouped_bar_svg(const std::string& title, const std::vector<std::string>& groups,
                            const std::vector<std::pair<std::string, std::vector<double>>>& series);
std::string three_panel_svg(const std::string& title, const std::vector<std::string>& cases,
                            const std::vector<double>& herfindahl,
                            const std::vector<double>& clipped,
                            const std::vector<double>& returns);

}  // namespace tradebench
