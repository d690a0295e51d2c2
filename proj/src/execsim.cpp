#include "tradebench/execsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tradebench/common.hpp"

namespace tradebench {

StressPreset stress_preset_from_string(std::string_view s) {
  if (s == "high_cost") return StressPreset::high_cost;
  if (s == "low_liquidity") return StressPreset::low_liquidity;
  if (s == "latency") return StressPreset::latency;
  if (s == "fragile") return StressPreset::fragile;
  fail("invalid-config", "unknown stress preset '" + std::string(s) + "'");
}

ExecConfig ExecConfig::ideal() {
  ExecConfig config;
  config.mode = ExecMode::ideal;
  return config.normalized();
}

ExecConfig ExecConfig::normalized() const {
  ExecConfig config = *this;
  if (config.mode == ExecMode::ideal) {
    config.commission_rate = 0.0;
    config.commission_fixed = 0.0;
    config.impact_coef = 0.0;
    config.latency_steps = 0;
    config.participation_cap = std::numeric_limits<double>::infinity();
    config.reject_price_tolerance = std::numeric_limits<double>::infinity();
    config.min_notional = 0.0;
  }
  return config;
}

ExecConfig stress_preset(StressPreset preset) {
  ExecConfig config;  // realistic defaults
  switch (preset) {
    case StressPreset::high_cost:
      config.commission_rate *= 3.0;
      config.commission_fixed *= 3.0;
      config.impact_coef *= 3.0;
      break;
    case StressPreset::low_liquidity:
      config.participation_cap *= 0.5;
      break;
    case StressPreset::latency:
      config.latency_steps = 2;
      break;
    case StressPreset::fragile:
      config.impact_coef *= 4.0;
      config.participation_cap *= 0.25;
      break;
  }
  return config;
}

void PortfolioState::mark(const std::map<std::string, Bar>& bars) {
  double value = cash;
  for (const auto& [symbol, units] : positions) {
    const auto it = bars.find(symbol);
    if (it != bars.end()) value += units * it->second.close;
  }
  equity = value;
}

std::map<std::string, double> PortfolioState::weights(
    const std::map<std::string, Bar>& bars) const {
  std::map<std::string, double> out;
  if (equity <= 0.0) return out;
  for (const auto& [symbol, units] : positions) {
    const auto it = bars.find(symbol);
    if (it != bars.end()) out[symbol] = units * it->second.close / equity;
  }
  return out;
}

std::vector<Order> targets_to_orders(const std::map<std::string, double>& approved,
                                     const PortfolioState& portfolio,
                                     const std::map<std::string, Bar>& bars,
                                     const ExecConfig& config) {
  if (portfolio.equity <= 0.0) fail("invalid-config", "equity must be positive to size orders");
  std::vector<Order> orders;
  for (const auto& [symbol, target] : approved) {
    const auto bar_it = bars.find(symbol);
    if (bar_it == bars.end()) continue;
    const double close = bar_it->second.close;
    const auto pos_it = portfolio.positions.find(symbol);
    const double held = pos_it == portfolio.positions.end() ? 0.0 : pos_it->second;
    const double delta_value = target * portfolio.equity - held * close;
    const double qty = std::trunc(delta_value / close);  // lot size 1, round toward zero
    if (qty == 0.0) continue;
    if (std::fabs(qty) * close < config.min_notional) continue;
    Order order;
    order.symbol = symbol;
    order.qty = qty;
    order.ref_price = close;
    orders.push_back(order);
  }
  return orders;
}

void ExecutionSimulator::submit(std::vector<Order> orders, std::int64_t step,
                                ExecutionOutcome& outcome) {
  for (Order& order : orders) {
    order.decision_step = step;
    outcome.orders_submitted += 1;
    outcome.requested_qty += std::fabs(order.qty);
    Queued queued;
    queued.order = std::move(order);
    queued.due_step = step + config_.latency_steps;
    if (config_.latency_steps > 0) outcome.latency_applied += 1;
    queue_.push_back(std::move(queued));
  }
}

ExecutionOutcome ExecutionSimulator::settle(std::int64_t step,
                                            const std::map<std::string, Bar>& bars,
                                            PortfolioState& portfolio) {
  ExecutionOutcome outcome;
  double settled_qty = 0.0;

  std::deque<Queued> keep;
  while (!queue_.empty()) {
    Queued item = std::move(queue_.front());
    queue_.pop_front();
    if (item.due_step > step) {
      keep.push_back(std::move(item));
      continue;
    }

    const auto bar_it = bars.find(item.order.symbol);
    if (bar_it == bars.end()) {
      // horizon-exhausted: no bar to trade against, the order expires pending
      if (!item.is_retry) outcome.pending += 1;
      outcome.notes.push_back("pending expire " + item.order.symbol + " qty " +
                              format_fixed(item.order.qty, 0) + " (no bar)");
      continue;
    }
    const Bar& bar = bar_it->second;

    double want = item.order.qty;
    const double cap_units = config_.participation_cap * bar.volume;
    double fillable = want;
    if (std::fabs(want) > cap_units) {
      fillable = std::copysign(std::floor(cap_units), want);
      const double excess = want - fillable;
      if (fillable == 0.0) {
        // Nothing tradable this bar; the whole order moves on (or dies).
        fillable = 0.0;
      }
      if (!item.is_retry) {
        Queued retry;
        retry.order = item.order;
        retry.order.qty = excess;
        retry.due_step = step + 1;
        retry.is_retry = true;
        keep.push_back(std::move(retry));
        outcome.partial_fills += 1;
        outcome.pending += 1;
        outcome.notes.push_back("partial " + item.order.symbol + " " +
                                format_fixed(std::fabs(fillable), 0) + "/" +
                                format_fixed(std::fabs(want), 0) + ", excess pending");
      } else {
        outcome.rejected += 1;
        settled_qty += std::fabs(excess);
        outcome.notes.push_back("reject " + item.order.symbol + " retry excess " +
                                format_fixed(std::fabs(excess), 0));
      }
      if (fillable == 0.0) continue;
    }

    settled_qty += std::fabs(fillable);
    const double side = fillable > 0.0 ? 1.0 : -1.0;
    double price = bar.close;
    if (config_.impact_coef > 0.0 && bar.volume > 0.0) {
      price *= 1.0 + side * config_.impact_coef *
                         std::pow(std::fabs(fillable) / bar.volume, config_.impact_exponent);
    }

    const double drift = std::fabs(price - item.order.ref_price) / item.order.ref_price;
    if (drift > config_.reject_price_tolerance) {
      outcome.rejected += 1;
      outcome.notes.push_back("reject " + item.order.symbol + " price drift " +
                              format_fixed(drift, 4) + " > tol " +
                              format_fixed(config_.reject_price_tolerance, 4));
      continue;
    }

    Fill fill;
    fill.symbol = item.order.symbol;
    fill.qty = fillable;
    fill.price = price;
    fill.commission = config_.commission_rate * std::fabs(fillable) * price +
                      (config_.commission_fixed > 0.0 ? config_.commission_fixed : 0.0);
    fill.slippage = std::fabs(price - item.order.ref_price) * std::fabs(fillable);

    portfolio.cash -= fillable * price + fill.commission;
    portfolio.positions[item.order.symbol] += fillable;

    outcome.filled_qty += std::fabs(fillable);
    outcome.commission_total += fill.commission;
    outcome.slippage_total += fill.slippage;
    outcome.fills.push_back(std::move(fill));
  }
  queue_ = std::move(keep);

  outcome.fill_ratio = settled_qty > 0.0 ? outcome.filled_qty / settled_qty : 1.0;
  return outcome;
}

long ExecutionSimulator::drain_expired(ExecutionOutcome& outcome) {
  long expired = 0;
  for (const Queued& item : queue_) {
    // Retry slices were already counted pending when they were queued.
    if (!item.is_retry) outcome.pending += 1;
    outcome.notes.push_back("pending expire " + item.order.symbol + " qty " +
                            format_fixed(item.order.qty, 0) + " (horizon)");
    ++expired;
  }
  queue_.clear();
  return expired;
}

}  // namespace tradebench
