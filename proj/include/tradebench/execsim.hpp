#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "tradebench/synthmarket.hpp"

namespace tradebench {

enum class ExecMode { ideal, realistic };
enum class StressPreset { high_cost, low_liquidity, latency, fragile };
StressPreset stress_preset_from_string(std::string_view s);

struct ExecConfig {
  ExecMode mode = ExecMode::realistic;
  double commission_rate = 0.001;   // 10 bp of notional
  double commission_fixed = 0.1;
  double impact_coef = 0.1;         // square-root market impact
  double impact_exponent = 0.5;
  long latency_steps = 0;
  double participation_cap = 0.1;   // fraction of bar volume per step
  double reject_price_tolerance = 0.02;
  double min_notional = 1.0;

  static ExecConfig ideal();
  // Ideal mode zeroes every friction; call after editing fields.
  ExecConfig normalized() const;
};

ExecConfig stress_preset(StressPreset preset);

struct PortfolioState {
  double cash = 0.0;
  std::map<std::string, double> positions;  // signed units
  double equity = 0.0;

  void mark(const std::map<std::string, Bar>& bars);
  std::map<std::string, double> weights(const std::map<std::string, Bar>& bars) const;
};

struct Order {
  std::string symbol;
  double qty = 0.0;        // signed units
  double ref_price = 0.0;  // decision-time close, the slippage anchor
  std::int64_t decision_step = 0;
};

struct Fill {
  std::string symbol;
  double qty = 0.0;
  double price = 0.0;
  double commission = 0.0;
  double slippage = 0.0;
};

struct ExecutionOutcome {
  std::vector<Fill> fills;
  long orders_submitted = 0;
  long partial_fills = 0;
  long rejected = 0;
  long pending = 0;
  long latency_applied = 0;
  double fill_ratio = 1.0;      // filled/settled this step, 1.0 when idle
  double requested_qty = 0.0;   // |qty| submitted this step
  double filled_qty = 0.0;      // |qty| filled this step (includes retries)
  double commission_total = 0.0;
  double slippage_total = 0.0;
  std::vector<std::string> notes;
};

// Target weights -> integer-lot delta orders against the current book.
std::vector<Order> targets_to_orders(const std::map<std::string, double>& approved,
                                     const PortfolioState& portfolio,
                                     const std::map<std::string, Bar>& bars,
                                     const ExecConfig& config);

// Owns the latency/pending queue for one run. settle() executes everything
// due at `step` against that step's bars and applies cash/position changes.
class ExecutionSimulator {
 public:
  explicit ExecutionSimulator(ExecConfig config) : config_(config.normalized()) {}

  const ExecConfig& config() const { return config_; }
  void submit(std::vector<Order> orders, std::int64_t step, ExecutionOutcome& outcome);
  ExecutionOutcome settle(std::int64_t step, const std::map<std::string, Bar>& bars,
                          PortfolioState& portfolio);
  // Orders still queued when the run ends; they expire as pending.
  long drain_expired(ExecutionOutcome& outcome);

 private:
  struct Queued {
    Order order;
    std::int64_t due_step = 0;
    bool is_retry = false;
  };

  ExecConfig config_;
  std::deque<Queued> queue_;
};

}  // namespace tradebench
