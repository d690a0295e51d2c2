#include "tradebench/synthmarket.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>

namespace tradebench {

const char* to_string(VolState v) {
  switch (v) {
    case VolState::calm: return "calm";
    case VolState::low: return "low";
    case VolState::medium: return "medium";
    case VolState::high: return "high";
    case VolState::crisis: return "crisis";
  }
  return "?";
}

const char* to_string(TailState t) {
  switch (t) {
    case TailState::gaussian: return "gaussian";
    case TailState::student_t: return "student_t";
    case TailState::jump: return "jump";
    case TailState::student_t_jump: return "student_t_jump";
  }
  return "?";
}

const char* to_string(TrendSign t) { return t == TrendSign::up ? "up" : "down"; }

VolState vol_state_from_string(std::string_view s) {
  if (s == "calm") return VolState::calm;
  if (s == "low") return VolState::low;
  if (s == "medium") return VolState::medium;
  if (s == "high") return VolState::high;
  if (s == "crisis") return VolState::crisis;
  fail("invalid-regime", "unknown volatility state '" + std::string(s) + "'");
}

TailState tail_state_from_string(std::string_view s) {
  if (s == "gaussian") return TailState::gaussian;
  if (s == "student_t") return TailState::student_t;
  if (s == "jump") return TailState::jump;
  if (s == "student_t_jump") return TailState::student_t_jump;
  fail("invalid-regime", "unknown tail state '" + std::string(s) + "'");
}

TrendSign trend_sign_from_string(std::string_view s) {
  if (s == "up") return TrendSign::up;
  if (s == "down") return TrendSign::down;
  fail("invalid-regime", "unknown trend sign '" + std::string(s) + "'");
}

std::string RegimeSpec::descriptor() const {
  return std::string(to_string(volatility)) + "/" + to_string(tail) + "/" + to_string(trend) +
         "/seed=" + std::to_string(seed);
}

bool MarketPanel::aligned() const {
  if (bars.empty()) return true;
  const std::size_t n = bars.front().size();
  for (std::size_t i = 1; i < bars.size(); ++i) {
    if (bars[i].size() != n) return false;
    for (std::size_t t = 0; t < n; ++t) {
      if (bars[i][t].step != bars[0][t].step) return false;
    }
  }
  return true;
}

std::size_t MarketPanel::step_count() const { return bars.empty() ? 0 : bars.front().size(); }

int MarketPanel::symbol_index(std::string_view symbol) const {
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] == symbol) return static_cast<int>(i);
  }
  return -1;
}

double volatility_scale(VolState v, const GeneratorCoefficients& coef) {
  return coef.sigma[static_cast<int>(v)];
}

namespace {

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

}  // namespace

MarketPanel generate_market(const RegimeSpec& regime, const std::vector<std::string>& symbols,
                            std::size_t steps, const GeneratorCoefficients& coef) {
  if (steps < 2) fail("invalid-horizon", "steps must be >= 2, got " + std::to_string(steps));
  if (symbols.empty()) fail("invalid-regime", "symbol list is empty");
  const double sigma = volatility_scale(regime.volatility, coef);
  if (!(sigma > 0.0)) fail("invalid-regime", "volatility scale must be positive");

  const double mu = (regime.trend == TrendSign::up ? coef.drift : -coef.drift);
  const bool student = regime.tail == TailState::student_t || regime.tail == TailState::student_t_jump;
  const bool jumps = regime.tail == TailState::jump || regime.tail == TailState::student_t_jump;

  MarketPanel panel;
  panel.symbols = symbols;
  panel.bars.resize(symbols.size());
  panel.manifest.seed = regime.seed;
  panel.manifest.descriptor = regime.descriptor();
  panel.manifest.generated_at = utc_now_iso8601();

  for (std::size_t s = 0; s < symbols.size(); ++s) {
    Rng rng(mix_seed(regime.seed, fnv1a64(symbols[s])));
    auto& series = panel.bars[s];
    series.reserve(steps);
    double close = coef.initial_price;
    double prev_close = close;
    for (std::size_t t = 0; t < steps; ++t) {
      if (t > 0) {
        const double z = student ? rng.unit_student_t(coef.student_nu) : rng.normal();
        double jump = 0.0;
        if (jumps && rng.bernoulli(coef.jump_prob)) {
          jump = rng.normal() * coef.jump_scale * sigma;
        }
        const double r = mu + sigma * z + jump;
        prev_close = close;
        close = close * std::exp(r);
      }
      Bar bar;
      bar.step = static_cast<std::int64_t>(t);
      bar.open = (t == 0) ? close : prev_close;
      bar.close = close;
      const double half_spread = coef.spread_factor * sigma * std::fabs(rng.normal());
      bar.high = std::max(bar.open, bar.close) * (1.0 + half_spread);
      bar.low = std::min(bar.open, bar.close) * (1.0 - std::min(half_spread, 0.999));
      bar.volume = rng.lognormal(coef.volume_mu, coef.volume_sigma);
      series.push_back(bar);
    }
  }
  return panel;
}

std::vector<RegimeSpec> build_regime_grid(std::size_t count, std::uint64_t base_seed) {
  if (count < 1) fail("invalid-regime", "grid count must be >= 1");
  static constexpr VolState kVols[] = {VolState::calm, VolState::low, VolState::medium,
                                       VolState::high, VolState::crisis};
  static constexpr TailState kTails[] = {TailState::gaussian, TailState::student_t,
                                         TailState::jump, TailState::student_t_jump};
  static constexpr TrendSign kTrends[] = {TrendSign::up, TrendSign::down};

  std::vector<RegimeSpec> grid;
  grid.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t combo = i % 40;
    RegimeSpec spec;
    spec.volatility = kVols[combo / 8];
    spec.tail = kTails[(combo / 2) % 4];
    spec.trend = kTrends[combo % 2];
    spec.seed = mix_seed(base_seed, i);
    grid.push_back(spec);
  }
  return grid;
}

}  // namespace tradebench
