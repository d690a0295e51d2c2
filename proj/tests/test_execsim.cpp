#include "doctest.h"

#include <cmath>

#include "tradebench/common.hpp"
#include "tradebench/execsim.hpp"

using namespace tradebench;

namespace {

std::map<std::string, Bar> bar_at(double close, double volume, std::int64_t step = 0,
                                  const std::string& symbol = "A") {
  std::map<std::string, Bar> bars;
  bars[symbol] = {step, close, close * 1.01, close * 0.99, close, volume};
  return bars;
}

PortfolioState fresh(double cash) {
  PortfolioState p;
  p.cash = cash;
  p.equity = cash;
  return p;
}

Order make_order(const std::string& symbol, double qty, double ref) {
  Order o;
  o.symbol = symbol;
  o.qty = qty;
  o.ref_price = ref;
  return o;
}

}  // namespace

TEST_CASE("targets_to_orders arithmetic: sizes, dust and zero-delta suppression") {
  ExecConfig config;
  auto portfolio = fresh(1000.0);

  // target 0.5, equity 1000, price 10, flat book -> buy 50
  auto orders = targets_to_orders({{"A", 0.5}}, portfolio, bar_at(10.0, 1e6), config);
  REQUIRE(orders.size() == 1);
  CHECK(orders[0].qty == 50.0);
  CHECK(orders[0].ref_price == 10.0);

  // target equals current weight -> no order
  portfolio.positions["A"] = 50.0;
  portfolio.mark(bar_at(10.0, 1e6));
  orders = targets_to_orders({{"A", 50.0 * 10.0 / portfolio.equity}}, portfolio, bar_at(10.0, 1e6),
                             config);
  CHECK(orders.empty());

  // rounding toward zero: target 0.333, equity 100, price 7 -> floor(4.757) = 4
  auto small = fresh(100.0);
  orders = targets_to_orders({{"A", 0.333}}, small, bar_at(7.0, 1e6), config);
  REQUIRE(orders.size() == 1);
  CHECK(orders[0].qty == 4.0);

  // below min_notional dropped
  ExecConfig strict = config;
  strict.min_notional = 100.0;
  orders = targets_to_orders({{"A", 0.05}}, small, bar_at(7.0, 1e6), strict);
  CHECK(orders.empty());
}

TEST_CASE("targets_to_orders requires positive equity") {
  auto broke = fresh(0.0);
  CHECK_THROWS_WITH_AS(targets_to_orders({{"A", 0.5}}, broke, bar_at(10, 1), ExecConfig{}),
                       doctest::Contains("invalid-config"), Error);
}

TEST_CASE("ideal mode fills fully at close with zero friction") {
  ExecutionSimulator sim(ExecConfig::ideal());
  auto portfolio = fresh(1e6);
  ExecutionOutcome submit_side;
  sim.submit({make_order("A", 5000, 100.0)}, 0, submit_side);
  auto outcome = sim.settle(0, bar_at(100.0, 10.0), portfolio);  // tiny volume: cap is off
  REQUIRE(outcome.fills.size() == 1);
  CHECK(outcome.fills[0].price == 100.0);
  CHECK(outcome.fills[0].commission == 0.0);
  CHECK(outcome.fills[0].slippage == 0.0);
  CHECK(outcome.rejected == 0);
  CHECK(outcome.pending == 0);
  CHECK(outcome.fill_ratio == 1.0);
  CHECK(portfolio.cash == doctest::Approx(1e6 - 5000 * 100.0));
}

TEST_CASE("participation cap: order 50 against volume 100 at cap 0.1 -> 10 filled, 40 pending") {
  ExecConfig config;
  config.participation_cap = 0.1;
  config.impact_coef = 0.0;  // isolate the cap mechanics
  config.commission_rate = 0.0;
  config.commission_fixed = 0.0;
  ExecutionSimulator sim(config);
  auto portfolio = fresh(1e6);
  ExecutionOutcome submit_side;
  sim.submit({make_order("A", 50, 100.0)}, 0, submit_side);
  CHECK(submit_side.requested_qty == 50.0);

  auto outcome = sim.settle(0, bar_at(100.0, 100.0), portfolio);
  REQUIRE(outcome.fills.size() == 1);
  CHECK(outcome.fills[0].qty == 10.0);
  CHECK(outcome.partial_fills == 1);
  CHECK(outcome.pending == 1);
  CHECK(outcome.fill_ratio == doctest::Approx(1.0));  // everything settled this step filled

  // the pending 40 retries exactly once next step
  auto retry = sim.settle(1, bar_at(100.0, 100.0, 1), portfolio);
  REQUIRE(retry.fills.size() == 1);
  CHECK(retry.fills[0].qty == 10.0);
  CHECK(retry.rejected == 1);  // the rest of the retry slice dies
  auto after = sim.settle(2, bar_at(100.0, 100.0, 2), portfolio);
  CHECK(after.fills.empty());
}

TEST_CASE("impact formula: coef 0.1, exponent 0.5, qty/volume 0.04 -> 2% slip") {
  // oracle: 0.1 * 0.04^0.5 = 0.1 * 0.2 = 0.02
  ExecConfig config;
  config.commission_rate = 0.0;
  config.commission_fixed = 0.0;
  config.reject_price_tolerance = 0.05;  // allow the 2% move
  ExecutionSimulator sim(config);
  auto portfolio = fresh(1e6);
  ExecutionOutcome submit_side;
  sim.submit({make_order("A", 40, 100.0)}, 0, submit_side);
  auto outcome = sim.settle(0, bar_at(100.0, 1000.0), portfolio);
  REQUIRE(outcome.fills.size() == 1);
  CHECK(outcome.fills[0].price == doctest::Approx(102.0).epsilon(1e-12));
  CHECK(outcome.fills[0].slippage == doctest::Approx(2.0 * 40.0).epsilon(1e-12));
}

TEST_CASE("price-drift rejects: tolerance exceeded kills the order") {
  ExecConfig config;
  config.latency_steps = 2;
  ExecutionSimulator sim(config);
  auto portfolio = fresh(1e6);
  ExecutionOutcome submit_side;
  sim.submit({make_order("A", 10, 100.0)}, 0, submit_side);
  CHECK(submit_side.latency_applied == 1);

  CHECK(sim.settle(0, bar_at(100.0, 1e6), portfolio).fills.empty());
  CHECK(sim.settle(1, bar_at(102.0, 1e6, 1), portfolio).fills.empty());
  // at step 2 the close moved 5% from ref -> reject
  auto outcome = sim.settle(2, bar_at(105.0, 1e6, 2), portfolio);
  CHECK(outcome.fills.empty());
  CHECK(outcome.rejected == 1);
}

TEST_CASE("commission arithmetic: rate plus fixed") {
  ExecConfig config;
  config.commission_rate = 0.001;
  config.commission_fixed = 0.1;
  config.impact_coef = 0.0;
  ExecutionSimulator sim(config);
  auto portfolio = fresh(1e6);
  ExecutionOutcome submit_side;
  sim.submit({make_order("A", 100, 50.0)}, 0, submit_side);
  auto outcome = sim.settle(0, bar_at(50.0, 1e6), portfolio);
  REQUIRE(outcome.fills.size() == 1);
  CHECK(outcome.fills[0].commission == doctest::Approx(0.001 * 100 * 50.0 + 0.1));
}

TEST_CASE("conservation: cash plus marked positions equals initial minus frictions") {
  ExecConfig config;
  ExecutionSimulator sim(config);
  auto portfolio = fresh(1e6);
  ExecutionOutcome submit_side;
  sim.submit({make_order("A", 500, 100.0)}, 0, submit_side);
  const auto bars = bar_at(100.0, 1e6);
  auto outcome = sim.settle(0, bars, portfolio);
  portfolio.mark(bars);
  REQUIRE(outcome.fills.size() == 1);
  // equity change = -(commission + slippage) because marks stay at close
  CHECK(portfolio.equity ==
        doctest::Approx(1e6 - outcome.commission_total - outcome.slippage_total).epsilon(1e-12));
}

TEST_CASE("sell orders receive negative impact (worse price for the seller)") {
  ExecConfig config;
  config.commission_rate = 0.0;
  config.commission_fixed = 0.0;
  config.reject_price_tolerance = 0.1;
  ExecutionSimulator sim(config);
  auto portfolio = fresh(1e5);
  portfolio.positions["A"] = 100.0;
  ExecutionOutcome submit_side;
  sim.submit({make_order("A", -40, 100.0)}, 0, submit_side);
  auto outcome = sim.settle(0, bar_at(100.0, 1000.0), portfolio);
  REQUIRE(outcome.fills.size() == 1);
  CHECK(outcome.fills[0].price == doctest::Approx(98.0).epsilon(1e-12));
  CHECK(outcome.fills[0].slippage == doctest::Approx(2.0 * 40.0).epsilon(1e-12));
}

TEST_CASE("stress presets scale the right knobs") {
  const ExecConfig base;
  const auto high_cost = stress_preset(StressPreset::high_cost);
  CHECK(high_cost.commission_rate >= 3.0 * base.commission_rate);
  CHECK(high_cost.impact_coef >= 3.0 * base.impact_coef);

  const auto low_liq = stress_preset(StressPreset::low_liquidity);
  CHECK(low_liq.participation_cap == doctest::Approx(base.participation_cap / 2));

  const auto latency = stress_preset(StressPreset::latency);
  CHECK(latency.latency_steps == 2);
  CHECK(latency.commission_rate == base.commission_rate);
  CHECK(latency.impact_coef == base.impact_coef);

  const auto fragile = stress_preset(StressPreset::fragile);
  CHECK(fragile.impact_coef >= 4.0 * base.impact_coef);
  CHECK(fragile.participation_cap == doctest::Approx(base.participation_cap / 4));
  CHECK(fragile.impact_coef > base.impact_coef);
  CHECK(fragile.participation_cap < base.participation_cap);
}

TEST_CASE("horizon exhaustion: undelivered orders expire as pending") {
  ExecConfig config;
  config.latency_steps = 3;
  ExecutionSimulator sim(config);
  ExecutionOutcome outcome;
  sim.submit({make_order("A", 10, 100.0)}, 0, outcome);
  auto portfolio = fresh(1e5);
  sim.settle(0, bar_at(100, 1e6), portfolio);
  const long expired = sim.drain_expired(outcome);
  CHECK(expired == 1);
  CHECK(outcome.pending == 1);
}

TEST_CASE("execute is deterministic for a fixed order/bars/config") {
  auto run_once = [] {
    ExecConfig config;
    ExecutionSimulator sim(config);
    auto portfolio = fresh(1e6);
    ExecutionOutcome submit_side;
    sim.submit({make_order("A", 900, 100.0), make_order("A", -100, 100.0)}, 0, submit_side);
    auto outcome = sim.settle(0, bar_at(100.0, 5000.0), portfolio);
    return std::make_pair(outcome.filled_qty, portfolio.cash);
  };
  CHECK(run_once() == run_once());
}
