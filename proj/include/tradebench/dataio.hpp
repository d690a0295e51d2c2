#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tradebench/synthmarket.hpp"

namespace tradebench {

enum class PanelFormat { csv, json };

struct CorrelationSummary {
  std::size_t n_symbols = 0;
  std::size_t n_pairs = 0;
  double mean_abs_corr = 0.0;
  double p90_abs_corr = 0.0;
  double pc1_share = 0.0;
  // Reverse-engineered as 1 / mean|rho|; the formula is recorded in output
  // metadata because other conventions exist.
  double effective_independent_count = 0.0;
};

// Columnar panel schema: step,symbol,open,high,low,close,volume.
MarketPanel load_ohlcv(const std::filesystem::path& path, PanelFormat format);
void write_panel_csv(const MarketPanel& panel, std::ostream& out);
void write_panel_json(const MarketPanel& panel, std::ostream& out);
std::string panel_manifest_json(const MarketPanel& panel);

// Keep only steps present for every symbol; order preserved.
MarketPanel align_panels(const MarketPanel& panel);

// Multiplicative Gaussian perturbation of every price field, deterministic in
// (seed, symbol, step, field); epsilon = 0 returns the input unchanged.
MarketPanel inject_noise(const MarketPanel& panel, double epsilon, std::uint64_t seed);

CorrelationSummary correlation_summary(const MarketPanel& panel);

}  // namespace tradebench
