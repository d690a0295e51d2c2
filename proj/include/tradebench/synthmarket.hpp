#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tradebench/common.hpp"

namespace tradebench {

enum class VolState { calm, low, medium, high, crisis };
enum class TailState { gaussian, student_t, jump, student_t_jump };
enum class TrendSign { up, down };

const char* to_string(VolState v);
const char* to_string(TailState t);
const char* to_string(TrendSign t);
VolState vol_state_from_string(std::string_view s);
TailState tail_state_from_string(std::string_view s);
TrendSign trend_sign_from_string(std::string_view s);

struct RegimeSpec {
  VolState volatility = VolState::calm;
  TailState tail = TailState::gaussian;
  TrendSign trend = TrendSign::up;
  std::uint64_t seed = 0;

  std::string descriptor() const;
};

struct Bar {
  std::int64_t step = 0;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  bool valid() const {
    return open > 0.0 && high > 0.0 && low > 0.0 && close > 0.0 && volume >= 0.0 &&
           low <= std::min(open, close) + 1e-12 && high >= std::max(open, close) - 1e-12;
  }
};

struct PanelManifest {
  std::uint64_t seed = 0;
  std::string descriptor;      // regime descriptor or source descriptor
  std::string generated_at;    // wall-clock, informational only
  std::string source_path;     // set by file loaders
  std::string content_hash;    // set by file loaders (fnv1a of the bytes)
};

// Per-symbol bar series. Aligned panels (the common case) have equal step
// counts and matching step indices across symbols; loaders may produce ragged
// panels that align_panels() fixes.
struct MarketPanel {
  std::vector<std::string> symbols;
  std::vector<std::vector<Bar>> bars;  // bars[i] belongs to symbols[i]
  PanelManifest manifest;

  bool aligned() const;
  std::size_t step_count() const;  // requires aligned()
  int symbol_index(std::string_view symbol) const;  // -1 when absent
  const Bar& bar(std::size_t symbol_idx, std::size_t step_idx) const {
    return bars[symbol_idx][step_idx];
  }
};

// Generator coefficients. The volatility ladder is strictly increasing from
// calm to crisis; Student-t uses nu = 4 so variance exists.
struct GeneratorCoefficients {
  double sigma[5] = {0.004, 0.008, 0.015, 0.03, 0.06};  // calm..crisis, per step
  double drift = 0.0005;        // per step, sign from TrendSign
  int student_nu = 4;
  double jump_prob = 0.02;      // per step, jump states only
  double jump_scale = 4.0;      // jump size ~ Normal(0, jump_scale * sigma)
  double volume_mu = 13.815510557964274;  // ln(1e6)
  double volume_sigma = 0.5;
  double initial_price = 100.0;
  double spread_factor = 0.5;   // half-spread = spread_factor * sigma * |u|
};

double volatility_scale(VolState v, const GeneratorCoefficients& coef = {});

MarketPanel generate_market(const RegimeSpec& regime, const std::vector<std::string>& symbols,
                            std::size_t steps, const GeneratorCoefficients& coef = {});

// Deterministic enumeration over the 5x4x2 regime cross-product, cycling with
// fresh derived seeds until `count` specs exist (120 = 40 combinations x 3).
std::vector<RegimeSpec> build_regime_grid(std::size_t count, std::uint64_t base_seed);

}  // namespace tradebench
