#include "doctest.h"

#include <cmath>
#include <map>
#include <set>

#include "tradebench/common.hpp"
#include "tradebench/synthmarket.hpp"

using namespace tradebench;

namespace {

double sample_std_log_returns(const std::vector<Bar>& bars) {
  std::vector<double> r;
  for (std::size_t t = 1; t < bars.size(); ++t) {
    r.push_back(std::log(bars[t].close / bars[t - 1].close));
  }
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= r.size();
  double ss = 0.0;
  for (double v : r) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (r.size() - 1));
}

double sample_kurtosis(const std::vector<Bar>& bars) {
  std::vector<double> r;
  for (std::size_t t = 1; t < bars.size(); ++t) {
    r.push_back(std::log(bars[t].close / bars[t - 1].close));
  }
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= r.size();
  double m2 = 0.0, m4 = 0.0;
  for (double v : r) {
    m2 += (v - mean) * (v - mean);
    m4 += std::pow(v - mean, 4.0);
  }
  m2 /= r.size();
  m4 /= r.size();
  return m4 / (m2 * m2);
}

double max_abs_log_return(const std::vector<Bar>& bars) {
  double m = 0.0;
  for (std::size_t t = 1; t < bars.size(); ++t) {
    m = std::max(m, std::fabs(std::log(bars[t].close / bars[t - 1].close)));
  }
  return m;
}

RegimeSpec regime(VolState v, TailState tail, TrendSign trend, std::uint64_t seed) {
  RegimeSpec spec;
  spec.volatility = v;
  spec.tail = tail;
  spec.trend = trend;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("calm gaussian panel has sample sigma near the configured scale") {
  // oracle: estimate sigma from the generated series, compare to 0.004
  const auto panel = generate_market(regime(VolState::calm, TailState::gaussian, TrendSign::up, 3),
                                     {"SYN1"}, 120);
  const double sd = sample_std_log_returns(panel.bars[0]);
  CHECK(sd > 0.004 * 0.7);
  CHECK(sd < 0.004 * 1.3);
}

TEST_CASE("generate_market is bit-identical for identical regimes") {
  const auto spec = regime(VolState::medium, TailState::student_t_jump, TrendSign::down, 77);
  const auto a = generate_market(spec, {"A", "B"}, 64);
  const auto b = generate_market(spec, {"A", "B"}, 64);
  REQUIRE(a.bars.size() == b.bars.size());
  for (std::size_t s = 0; s < a.bars.size(); ++s) {
    for (std::size_t t = 0; t < a.bars[s].size(); ++t) {
      CHECK(a.bars[s][t].open == b.bars[s][t].open);
      CHECK(a.bars[s][t].high == b.bars[s][t].high);
      CHECK(a.bars[s][t].low == b.bars[s][t].low);
      CHECK(a.bars[s][t].close == b.bars[s][t].close);
      CHECK(a.bars[s][t].volume == b.bars[s][t].volume);
    }
  }
}

TEST_CASE("crisis student_t_jump beats calm gaussian on kurtosis and max move") {
  // oracle: compute both sample statistics on the same seed
  const auto crisis = generate_market(
      regime(VolState::crisis, TailState::student_t_jump, TrendSign::up, 5), {"X"}, 120);
  const auto calm =
      generate_market(regime(VolState::calm, TailState::gaussian, TrendSign::up, 5), {"X"}, 120);
  CHECK(sample_kurtosis(crisis.bars[0]) > sample_kurtosis(calm.bars[0]));
  CHECK(max_abs_log_return(crisis.bars[0]) > max_abs_log_return(calm.bars[0]));
}

TEST_CASE("tail ordering holds on average over seeds") {
  double t_sum = 0.0, g_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    t_sum += sample_kurtosis(
        generate_market(regime(VolState::medium, TailState::student_t, TrendSign::up, seed), {"X"}, 160)
            .bars[0]);
    g_sum += sample_kurtosis(
        generate_market(regime(VolState::medium, TailState::gaussian, TrendSign::up, seed), {"X"}, 160)
            .bars[0]);
  }
  CHECK(t_sum / 12.0 > g_sum / 12.0);
}

TEST_CASE("trend sign separates terminal prices on average over seeds") {
  double up_sum = 0.0, down_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    up_sum += std::log(
        generate_market(regime(VolState::low, TailState::gaussian, TrendSign::up, seed), {"X"}, 200)
            .bars[0].back().close);
    down_sum += std::log(
        generate_market(regime(VolState::low, TailState::gaussian, TrendSign::down, seed), {"X"}, 200)
            .bars[0].back().close);
  }
  CHECK(up_sum > down_sum);
}

TEST_CASE("every generated bar satisfies the bar invariants") {
  for (auto tail : {TailState::gaussian, TailState::student_t, TailState::jump,
                    TailState::student_t_jump}) {
    const auto panel =
        generate_market(regime(VolState::crisis, tail, TrendSign::down, 13), {"A", "B"}, 150);
    for (const auto& series : panel.bars) {
      for (const auto& bar : series) {
        CHECK(bar.valid());
      }
    }
  }
}

TEST_CASE("generate_market validates inputs") {
  CHECK_THROWS_WITH_AS(
      generate_market(regime(VolState::calm, TailState::gaussian, TrendSign::up, 1), {"A"}, 1),
      doctest::Contains("invalid-horizon"), Error);
  GeneratorCoefficients coef;
  coef.sigma[0] = 0.0;
  CHECK_THROWS_WITH_AS(
      generate_market(regime(VolState::calm, TailState::gaussian, TrendSign::up, 1), {"A"}, 10, coef),
      doctest::Contains("invalid-regime"), Error);
}

TEST_CASE("regime grid covers the 40-combination cross product three times at 120") {
  const auto grid = build_regime_grid(120, 1);
  REQUIRE(grid.size() == 120);
  std::map<std::tuple<int, int, int>, int> combos;
  std::set<std::uint64_t> seeds;
  for (const auto& spec : grid) {
    combos[{static_cast<int>(spec.volatility), static_cast<int>(spec.tail),
            static_cast<int>(spec.trend)}] += 1;
    seeds.insert(spec.seed);
  }
  CHECK(combos.size() == 40);
  for (const auto& [combo, count] : combos) CHECK(count == 3);
  CHECK(seeds.size() == 120);  // every market gets its own derived seed
}

TEST_CASE("grid element 0 is (calm, gaussian, up) with the base seed; cycling repeats combos") {
  const auto grid = build_regime_grid(41, 9);
  CHECK(grid[0].volatility == VolState::calm);
  CHECK(grid[0].tail == TailState::gaussian);
  CHECK(grid[0].trend == TrendSign::up);
  CHECK(grid[0].seed == 9);
  CHECK(grid[40].volatility == grid[0].volatility);
  CHECK(grid[40].tail == grid[0].tail);
  CHECK(grid[40].trend == grid[0].trend);
  CHECK(grid[40].seed != grid[0].seed);

  const auto single = build_regime_grid(1, 9);
  CHECK(single.size() == 1);
  CHECK(single[0].seed == 9);
}

TEST_CASE("volatility ladder is strictly increasing calm -> crisis") {
  double prev = 0.0;
  for (auto v : {VolState::calm, VolState::low, VolState::medium, VolState::high, VolState::crisis}) {
    CHECK(volatility_scale(v) > prev);
    prev = volatility_scale(v);
  }
}
