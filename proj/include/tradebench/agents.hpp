#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tradebench/synthmarket.hpp"

namespace tradebench {

struct RiskReport;  // riskgate.hpp

enum class FeedbackCondition { true_feedback, placebo, hidden, contrarian, none };
const char* to_string(FeedbackCondition c);
FeedbackCondition feedback_condition_from_string(std::string_view s);

struct DecisionRecord {
  std::int64_t step = 0;
  std::map<std::string, double> intended_weights;   // signed fraction of equity
  std::string rationale;                            // empty when cot_free
  double confidence = 0.0;
  std::map<std::string, double> directional_scores;
  FeedbackCondition feedback_condition = FeedbackCondition::none;
  bool cot_free = false;
  std::string prompt;  // context the decision saw; recorded for audit

  double gross_intent() const;  // sum of |w|
};

struct FailureEvent {
  std::int64_t step = 0;
  std::string kind;    // clip | block | violation | reject | drawdown
  std::string detail;
};

// Long-horizon audit memory carried between steps (default window 52).
struct RiskMemory {
  std::size_t window = 52;
  long clipped_total = 0;
  long blocked_total = 0;
  long violations_total = 0;
  long rejected_total = 0;
  long pending_total = 0;
  double slippage_total = 0.0;
  std::deque<FailureEvent> recent_failures;  // bounded by window

  void record_failure(FailureEvent event);
  bool has_failures_since(std::int64_t step) const;
  long failures_since(std::int64_t step) const;
};

enum class SignalMode { momentum, macro_news, full };
SignalMode signal_mode_from_string(std::string_view s);

struct SignalConfig {
  std::size_t lookback = 16;
  double gross_cap = 1.8;          // analyst's own budget, before any risk gate
  double macro_persistence = 0.95; // AR(1) coefficient of the macro series
  double macro_shock = 0.02;
  // Conviction band with hysteresis: a component takes a position only after
  // its raw score crosses band_enter and holds it until it falls back through
  // band_exit. Keeps turnover event-driven instead of per-step dithering.
  double band_enter = 0.6;
  double band_exit = 0.2;
  double position_level = 0.8;     // score emitted while a side is held
};

DecisionRecord signal_weights(const MarketPanel& panel, std::size_t step, SignalMode mode,
                              const SignalConfig& config = {});

enum class BaselineKind { buy_hold_equal };

// Equal weights at the first decision; afterwards the intent equals the
// drifted holdings the caller passes in (no rebalancing intent).
DecisionRecord baseline_weights(const std::vector<std::string>& symbols, BaselineKind kind,
                                std::size_t step = 0,
                                const std::map<std::string, double>* current_weights = nullptr);

struct PerfSummary {
  double recent_return = 0.0;    // over the overlay lookback
  double recent_drawdown = 0.0;  // <= 0
};

struct OverlayConfig {
  double f_min = 0.5;
  double f_max = 1.1;
  std::size_t lookback = 8;
  double event_step = 0.1;        // factor reduction per recent failure event
  double drawdown_trigger = -0.02;
  double gain_trigger = 0.01;
};

DecisionRecord memory_overlay(DecisionRecord decision, const RiskMemory& memory,
                              const PerfSummary& recent_perf, const OverlayConfig& config = {});

DecisionRecord markowitz_weights(const MarketPanel& panel, std::size_t step, std::size_t window,
                                 double per_name_cap);

// Risk-feedback prompt block. Byte-stable for a given (memory, report,
// condition, step); the placebo branch draws counterfactual values from a
// step hash and never reproduces the true block when real counters exist.
std::string build_feedback_block(const RiskMemory& memory, const RiskReport* last_report,
                                 FeedbackCondition condition, std::int64_t step);

inline constexpr const char* kPromptTemplateVersion = "pt-v1";

std::string render_prompt(const std::vector<std::string>& symbols,
                          const std::map<std::string, Bar>& observation, double equity,
                          const std::map<std::string, double>& current_weights,
                          const std::string& feedback_block, bool cot_free);

// Replay cache for model-backed analysts: JSONL, one record per line,
// {"key": "<model>:<prompt_hash_hex>", "model", "prompt_sha", "response", "created"}.
class LlmCache {
 public:
  static LlmCache open(const std::filesystem::path& path);

  std::optional<std::string> lookup(const std::string& key) const;
  std::size_t size() const { return entries_.size(); }
  static void append_entry(const std::filesystem::path& path, const std::string& model,
                           const std::string& prompt, const std::string& response,
                           const std::string& created = "1970-01-01T00:00:00Z");

 private:
  std::map<std::string, std::string> entries_;
};

enum class ParseMode { rationale_json, weights_only_json };

std::string prompt_hash_hex(std::string_view prompt);
std::string cache_key(const std::string& model, std::string_view prompt);

// Strict replay: a miss raises missing-cache-entry, malformed payloads raise
// unparseable-response with the raw text attached for audit.
DecisionRecord cached_llm_decide(const std::string& prompt, const LlmCache& cache,
                                 ParseMode parse_mode, const std::string& model);

}  // namespace tradebench
