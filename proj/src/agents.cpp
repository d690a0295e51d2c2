#include "tradebench/agents.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tradebench/riskgate.hpp"

namespace tradebench {

const char* to_string(FeedbackCondition c) {
  switch (c) {
    case FeedbackCondition::true_feedback: return "true_feedback";
    case FeedbackCondition::placebo: return "placebo";
    case FeedbackCondition::hidden: return "hidden";
    case FeedbackCondition::contrarian: return "contrarian";
    case FeedbackCondition::none: return "none";
  }
  return "?";
}

FeedbackCondition feedback_condition_from_string(std::string_view s) {
  if (s == "true_feedback" || s == "true") return FeedbackCondition::true_feedback;
  if (s == "placebo") return FeedbackCondition::placebo;
  if (s == "hidden") return FeedbackCondition::hidden;
  if (s == "contrarian") return FeedbackCondition::contrarian;
  if (s == "none") return FeedbackCondition::none;
  fail("invalid-config", "unknown feedback condition '" + std::string(s) + "'");
}

SignalMode signal_mode_from_string(std::string_view s) {
  if (s == "momentum") return SignalMode::momentum;
  if (s == "macro_news") return SignalMode::macro_news;
  if (s == "full") return SignalMode::full;
  fail("invalid-config", "unknown signal mode '" + std::string(s) + "'");
}

double DecisionRecord::gross_intent() const {
  double g = 0.0;
  for (const auto& [_, w] : intended_weights) g += std::fabs(w);
  return g;
}

void RiskMemory::record_failure(FailureEvent event) {
  recent_failures.push_back(std::move(event));
  while (recent_failures.size() > window) recent_failures.pop_front();
}

bool RiskMemory::has_failures_since(std::int64_t step) const {
  return failures_since(step) > 0;
}

long RiskMemory::failures_since(std::int64_t step) const {
  long n = 0;
  for (const auto& e : recent_failures) {
    if (e.step >= step) ++n;
  }
  return n;
}

namespace {

const char* strength_word(double score) {
  const double a = std::fabs(score);
  if (a >= 0.5) return "strong";
  if (a >= 0.15) return "moderate";
  if (a > 0.0) return "weak";
  return "flat";
}

const char* side_word(double score) {
  if (score > 0.0) return "buy";
  if (score < 0.0) return "sell";
  return "hold";
}

// Deterministic slow-moving sentiment proxy per symbol: tanh of an AR(1)
// path seeded from the panel seed, a pure function of (panel, symbol, step).
std::vector<double> macro_path_for(const MarketPanel& panel, std::size_t symbol_idx,
                                   std::size_t step, const SignalConfig& config) {
  Rng rng(mix_seed(panel.manifest.seed ^ 0xa5a5a5a5a5a5a5a5ull, fnv1a64(panel.symbols[symbol_idx])));
  std::vector<double> path;
  path.reserve(step + 1);
  double x = 0.0;
  for (std::size_t t = 0; t <= step; ++t) {
    x = config.macro_persistence * x + config.macro_shock * rng.normal();
    path.push_back(std::tanh(8.0 * x));
  }
  return path;
}

}  // namespace

namespace {

// Volatility-scaled trailing-return score at one step: tanh(2 z) with
// z = trailing / (step_vol * sqrt(L)). Comparable size in calm and crisis.
double raw_momentum(const MarketPanel& panel, std::size_t symbol_idx, std::size_t step,
                    const SignalConfig& config) {
  const auto& bars = panel.bars[symbol_idx];
  const double trailing = bars[step].close / bars[step - config.lookback].close - 1.0;
  double mean_r = 0.0;
  std::vector<double> rets;
  rets.reserve(config.lookback);
  for (std::size_t t = step - config.lookback + 1; t <= step; ++t) {
    rets.push_back(bars[t].close / bars[t - 1].close - 1.0);
    mean_r += rets.back();
  }
  mean_r /= static_cast<double>(rets.size());
  double ss = 0.0;
  for (double r : rets) ss += (r - mean_r) * (r - mean_r);
  const double step_vol = std::sqrt(ss / std::max<double>(1.0, rets.size() - 1.0));
  if (step_vol > 0.0) {
    const double z = trailing / (step_vol * std::sqrt(static_cast<double>(config.lookback)));
    return std::tanh(2.0 * z);
  }
  if (trailing != 0.0) return trailing > 0.0 ? 1.0 : -1.0;  // pure drift, no noise
  return 0.0;
}

// Walk a raw-score path through the conviction band and return the held side
// at the end: 0 flat, +level long, -level short.
double banded_walk(const std::vector<double>& raw_path, const SignalConfig& config) {
  int state = 0;
  for (double raw : raw_path) {
    if (state == 0) {
      if (raw > config.band_enter) state = 1;
      else if (raw < -config.band_enter) state = -1;
    } else if (state > 0) {
      if (raw < -config.band_enter) state = -1;
      else if (raw < config.band_exit) state = 0;
    } else {
      if (raw > config.band_enter) state = 1;
      else if (raw > -config.band_exit) state = 0;
    }
  }
  return config.position_level * static_cast<double>(state);
}

}  // namespace

DecisionRecord signal_weights(const MarketPanel& panel, std::size_t step, SignalMode mode,
                              const SignalConfig& config) {
  if (step < config.lookback) {
    fail("insufficient-history", "step " + std::to_string(step) + " < lookback " +
                                     std::to_string(config.lookback));
  }

  DecisionRecord decision;
  decision.step = static_cast<std::int64_t>(step);

  std::map<std::string, double> momentum;
  std::map<std::string, double> macro;
  std::map<std::string, double> momentum_raw;
  std::map<std::string, double> macro_raw;
  for (std::size_t s = 0; s < panel.symbols.size(); ++s) {
    std::vector<double> mom_path;
    mom_path.reserve(step - config.lookback + 1);
    for (std::size_t t = config.lookback; t <= step; ++t) {
      mom_path.push_back(raw_momentum(panel, s, t, config));
    }
    momentum[panel.symbols[s]] = banded_walk(mom_path, config);
    momentum_raw[panel.symbols[s]] = mom_path.back();

    const auto macro_series = macro_path_for(panel, s, step, config);
    macro[panel.symbols[s]] = banded_walk(macro_series, config);
    macro_raw[panel.symbols[s]] = macro_series.back();
  }

  std::ostringstream rationale;
  double agreement = 0.0;
  for (std::size_t s = 0; s < panel.symbols.size(); ++s) {
    const std::string& symbol = panel.symbols[s];
    double score = 0.0;
    switch (mode) {
      case SignalMode::momentum: score = momentum[symbol]; break;
      case SignalMode::macro_news: score = macro[symbol]; break;
      case SignalMode::full: score = 0.5 * (momentum[symbol] + macro[symbol]); break;
    }
    decision.directional_scores[symbol] = score;
    decision.intended_weights[symbol] = score;
    agreement += std::fabs(score);
    if (s > 0) rationale << "; ";
    const double trailing =
        panel.bars[s][step].close / panel.bars[s][step - config.lookback].close - 1.0;
    switch (mode) {
      case SignalMode::momentum:
        rationale << symbol << " momentum " << strength_word(momentum_raw[symbol]) << " "
                  << side_word(momentum[symbol]) << ", trailing "
                  << format_fixed(100.0 * trailing, 2) << "% (signal "
                  << format_fixed(momentum_raw[symbol], 3) << ")";
        break;
      case SignalMode::macro_news:
        rationale << symbol << " macro sentiment " << strength_word(macro_raw[symbol]) << " "
                  << side_word(macro[symbol]) << " (level " << format_fixed(macro_raw[symbol], 3)
                  << ")";
        break;
      case SignalMode::full:
        rationale << symbol << " blend " << strength_word(score) << " " << side_word(score)
                  << ", trailing " << format_fixed(100.0 * trailing, 2) << "% (momentum "
                  << format_fixed(momentum_raw[symbol], 3) << ", macro "
                  << format_fixed(macro_raw[symbol], 3) << ")";
        break;
    }
  }

  // Signal-scaled sizing: each name gets an equal slice of the gross budget,
  // filled in proportion to its score. Sum |w| <= gross_cap since |score| <= 1;
  // weak signals mean small books instead of noise-driven full exposure.
  const double budget = config.gross_cap / static_cast<double>(panel.symbols.size());
  for (auto& [_, w] : decision.intended_weights) w *= budget;
  decision.confidence =
      std::min(1.0, 0.4 + 0.6 * agreement / std::max<std::size_t>(panel.symbols.size(), 1));

  const char* dominant = mode == SignalMode::momentum   ? "momentum"
                         : mode == SignalMode::macro_news ? "macro news"
                                                          : "blended signal stack";
  decision.rationale = std::string(dominant) + " view: " + rationale.str();
  return decision;
}

DecisionRecord baseline_weights(const std::vector<std::string>& symbols, BaselineKind kind,
                                std::size_t step,
                                const std::map<std::string, double>* current_weights) {
  if (symbols.empty()) fail("invalid-config", "baseline needs at least one symbol");
  (void)kind;  // single baseline kind for now

  DecisionRecord decision;
  decision.step = static_cast<std::int64_t>(step);
  double invested = 0.0;
  if (current_weights != nullptr) {
    for (const auto& [_, w] : *current_weights) invested += std::fabs(w);
  }
  // Entry phase keeps asking for the equal-weight book until fills establish
  // (most of) it; afterwards the intent is the drifted holdings, no
  // rebalancing.
  if (current_weights == nullptr || invested < 0.9) {
    const double w = 1.0 / static_cast<double>(symbols.size());
    for (const auto& symbol : symbols) decision.intended_weights[symbol] = w;
    decision.rationale = "enter equal-weight buy-and-hold across " +
                         std::to_string(symbols.size()) + " names";
  } else {
    for (const auto& symbol : symbols) {
      const auto it = current_weights->find(symbol);
      decision.intended_weights[symbol] = it == current_weights->end() ? 0.0 : it->second;
    }
    decision.rationale = "hold drifted buy-and-hold positions";
  }
  for (const auto& symbol : symbols) decision.directional_scores[symbol] = 0.0;
  decision.confidence = 0.5;
  return decision;
}

DecisionRecord memory_overlay(DecisionRecord decision, const RiskMemory& memory,
                              const PerfSummary& recent_perf, const OverlayConfig& config) {
  const std::int64_t horizon = decision.step - static_cast<std::int64_t>(config.lookback);
  const long events = memory.failures_since(horizon);
  double factor = 1.0;
  std::string reason;

  if (events > 0 || recent_perf.recent_drawdown < config.drawdown_trigger) {
    factor = std::max(config.f_min, 1.0 - config.event_step * static_cast<double>(std::max<long>(events, 1)));
    reason = "exposure reduced x" + format_fixed(factor, 2) + " after " + std::to_string(events) +
             " recent risk/execution events";
    if (recent_perf.recent_drawdown < config.drawdown_trigger) {
      reason += " and drawdown " + format_fixed(recent_perf.recent_drawdown, 3);
    }
  } else if (recent_perf.recent_return > config.gain_trigger) {
    factor = std::min(config.f_max, 1.0 + 0.5 * recent_perf.recent_return);
    reason = "exposure raised x" + format_fixed(factor, 2) + " after stable positive window";
  }

  if (factor != 1.0) {
    for (auto& [_, w] : decision.intended_weights) w *= factor;
    decision.rationale += " | memory overlay: " + reason;
  }
  return decision;
}

DecisionRecord markowitz_weights(const MarketPanel& panel, std::size_t step, std::size_t window,
                                 double per_name_cap) {
  const std::size_t n = panel.symbols.size();
  if (n == 0) fail("invalid-config", "empty panel");
  if (step < 2) fail("insufficient-history", "need at least 2 steps of history");
  const std::size_t have = std::min(window, step);

  Eigen::MatrixXd returns(have, n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < have; ++k) {
      const std::size_t t = step - have + 1 + k;
      returns(k, s) = panel.bars[s][t].close / panel.bars[s][t - 1].close - 1.0;
    }
  }
  Eigen::VectorXd mean = returns.colwise().mean();
  Eigen::MatrixXd centered = returns.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered /
                        std::max<double>(1.0, static_cast<double>(have) - 1.0);

  // Scale-invariant ridge keeps short windows solvable.
  const double ridge = 1e-4 * cov.trace() / static_cast<double>(n);
  cov += ridge * Eigen::MatrixXd::Identity(n, n);

  Eigen::LDLT<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) fail("optimizer-failure", "covariance factorization failed");
  Eigen::VectorXd raw = solver.solve(Eigen::VectorXd::Ones(n));
  if (!raw.allFinite()) fail("optimizer-failure", "singular system after ridge");

  // Long-only projection, then iterative cap-and-redistribute.
  Eigen::VectorXd w = raw.cwiseMax(0.0);
  if (w.sum() <= 0.0) w = Eigen::VectorXd::Constant(n, 1.0);
  w /= w.sum();
  const double cap = per_name_cap > 0.0 ? per_name_cap : 1.0;
  for (int iter = 0; iter < 64; ++iter) {
    double excess = 0.0;
    double room_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (w(i) > cap) {
        excess += w(i) - cap;
        w(i) = cap;
      } else {
        room_total += cap - w(i);
      }
    }
    if (excess <= 1e-15) break;
    if (room_total <= 1e-15) break;  // cap * n < 1: infeasible, leave capped
    for (std::size_t i = 0; i < n; ++i) {
      if (w(i) < cap) w(i) += excess * (cap - w(i)) / room_total;
    }
  }

  DecisionRecord decision;
  decision.step = static_cast<std::int64_t>(step);
  for (std::size_t i = 0; i < n; ++i) {
    decision.intended_weights[panel.symbols[i]] = w(i);
    decision.directional_scores[panel.symbols[i]] = 0.0;
  }
  decision.confidence = 0.5;
  decision.rationale = "minimum-variance allocation over trailing " + std::to_string(have) +
                       "-step covariance, per-name cap " + format_fixed(cap, 3);
  return decision;
}

namespace {

struct FeedbackValues {
  long clipped = 0, blocked = 0, violations = 0, rejected = 0, pending = 0;
  double slippage = 0.0;
};

std::string format_block(const FeedbackValues& v, const RiskMemory& memory, bool with_memory) {
  std::ostringstream out;
  out << "[risk feedback]\n";
  out << "clipped: " << v.clipped << "\n";
  out << "blocked: " << v.blocked << "\n";
  out << "violations: " << v.violations << "\n";
  out << "rejected: " << v.rejected << "\n";
  out << "pending: " << v.pending << "\n";
  out << "slippage: " << format_fixed(v.slippage, 2) << "\n";
  if (with_memory) {
    out << "[risk memory] window " << memory.window << " clipped_total " << memory.clipped_total
        << " blocked_total " << memory.blocked_total << " violations_total "
        << memory.violations_total << " rejected_total " << memory.rejected_total
        << " pending_total " << memory.pending_total << " slippage_total "
        << format_fixed(memory.slippage_total, 2);
    if (!memory.recent_failures.empty()) {
      out << "\nrecent:";
      std::size_t shown = 0;
      for (auto it = memory.recent_failures.rbegin();
           it != memory.recent_failures.rend() && shown < 5; ++it, ++shown) {
        out << " [step " << it->step << " " << it->kind << " " << it->detail << "]";
      }
    }
  }
  return out.str();
}

long hashed_counter(std::int64_t step, const char* key, long range, long avoid) {
  const std::uint64_t h = fnv1a64_update(fnv1a64(key), std::to_string(step));
  long v = static_cast<long>(h % static_cast<std::uint64_t>(range));
  if (v == avoid) v = (v + 1) % range;
  return v;
}

}  // namespace

std::string build_feedback_block(const RiskMemory& memory, const RiskReport* last_report,
                                 FeedbackCondition condition, std::int64_t step) {
  if (condition == FeedbackCondition::hidden || condition == FeedbackCondition::none) return "";

  FeedbackValues truth;
  if (last_report != nullptr) {
    truth.clipped = last_report->clipped_count;
    truth.blocked = last_report->blocked_count;
    truth.violations = last_report->violations;
  }
  truth.rejected = memory.rejected_total;
  truth.pending = memory.pending_total;
  truth.slippage = memory.slippage_total;

  switch (condition) {
    case FeedbackCondition::true_feedback:
      return format_block(truth, memory, true);
    case FeedbackCondition::placebo: {
      // Deterministic counterfactual: plausible ranges, per-key hash values,
      // never equal to the true value on any key.
      FeedbackValues fake;
      fake.clipped = hashed_counter(step, "placebo.clipped", 8, truth.clipped);
      fake.blocked = hashed_counter(step, "placebo.blocked", 4, truth.blocked);
      fake.violations = hashed_counter(step, "placebo.violations", 4, truth.violations);
      fake.rejected = hashed_counter(step, "placebo.rejected", 12, truth.rejected);
      fake.pending = hashed_counter(step, "placebo.pending", 6, truth.pending);
      const double ref = std::max(1.0, 2.0 * memory.slippage_total);
      const std::uint64_t h = fnv1a64_update(fnv1a64("placebo.slippage"), std::to_string(step));
      double fake_slip = ref * (static_cast<double>(h % 10000) / 10000.0);
      if (std::fabs(fake_slip - truth.slippage) < 1e-9) fake_slip += 0.1 * ref + 0.01;
      fake.slippage = fake_slip;
      return format_block(fake, memory, true);
    }
    case FeedbackCondition::contrarian: {
      // Fixed severe template regardless of reality.
      FeedbackValues severe;
      severe.clipped = 9;
      severe.blocked = 4;
      severe.violations = 6;
      severe.rejected = 7;
      severe.pending = 5;
      severe.slippage = 25000.0;
      return format_block(severe, memory, true);
    }
    default:
      return "";
  }
}

std::string render_prompt(const std::vector<std::string>& symbols,
                          const std::map<std::string, Bar>& observation, double equity,
                          const std::map<std::string, double>& current_weights,
                          const std::string& feedback_block, bool cot_free) {
  std::ostringstream out;
  out << "[template " << kPromptTemplateVersion << "]\n";
  out << "You manage a portfolio of " << symbols.size() << " assets. Equity "
      << format_fixed(equity, 2) << ".\n";
  out << "[market]\n";
  for (const auto& symbol : symbols) {
    const auto it = observation.find(symbol);
    if (it == observation.end()) continue;
    const Bar& b = it->second;
    out << symbol << " open " << format_fixed(b.open, 4) << " high " << format_fixed(b.high, 4)
        << " low " << format_fixed(b.low, 4) << " close " << format_fixed(b.close, 4) << " volume "
        << format_fixed(b.volume, 0) << "\n";
  }
  out << "[portfolio]\n";
  for (const auto& symbol : symbols) {
    const auto it = current_weights.find(symbol);
    out << symbol << " weight " << format_fixed(it == current_weights.end() ? 0.0 : it->second, 4)
        << "\n";
  }
  if (!feedback_block.empty()) out << feedback_block << "\n";
  if (cot_free) {
    out << "Return only JSON target weights: {\"weights\": {symbol: weight}}.\n";
  } else {
    out << "Return JSON: {\"weights\": {...}, \"rationale\": str, \"confidence\": 0..1, "
           "\"directional_scores\": {...}, \"risk_note\": str}.\n";
  }
  return out.str();
}

LlmCache LlmCache::open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("missing-cache-entry", "cannot open cache file " + path.string());
  LlmCache cache;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
      cache.entries_[record.at("key").get<std::string>()] =
          record.at("response").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail("malformed-input",
           path.string() + ":" + std::to_string(line_no) + ": bad cache record: " + e.what());
    }
  }
  return cache;
}

std::optional<std::string> LlmCache::lookup(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void LlmCache::append_entry(const std::filesystem::path& path, const std::string& model,
                            const std::string& prompt, const std::string& response,
                            const std::string& created) {
  nlohmann::ordered_json record;
  record["key"] = cache_key(model, prompt);
  record["model"] = model;
  record["prompt_sha"] = prompt_hash_hex(prompt);
  record["response"] = response;
  record["created"] = created;
  std::ofstream out(path, std::ios::app);
  if (!out) fail("io-error", "cannot append to cache file " + path.string());
  out << record.dump() << '\n';
}

std::string prompt_hash_hex(std::string_view prompt) { return to_hex(fnv1a64(prompt)); }

std::string cache_key(const std::string& model, std::string_view prompt) {
  return model + ":" + prompt_hash_hex(prompt);
}

DecisionRecord cached_llm_decide(const std::string& prompt, const LlmCache& cache,
                                 ParseMode parse_mode, const std::string& model) {
  const std::string key = cache_key(model, prompt);
  const auto response = cache.lookup(key);
  if (!response) {
    fail("missing-cache-entry", "no cache entry for key " + key);
  }

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(*response);
  } catch (const nlohmann::json::parse_error&) {
    fail("unparseable-response", "invalid JSON in cached response for key " + key +
                                     "; raw text: " + *response);
  }

  DecisionRecord decision;
  decision.prompt = prompt;
  try {
    for (const auto& [symbol, w] : doc.at("weights").items()) {
      decision.intended_weights[symbol] = w.get<double>();
      decision.directional_scores[symbol] = w.get<double>();
    }
    if (parse_mode == ParseMode::rationale_json) {
      decision.rationale = doc.value("rationale", "");
      decision.confidence = doc.value("confidence", 0.5);
      if (doc.contains("directional_scores")) {
        for (const auto& [symbol, v] : doc["directional_scores"].items()) {
          decision.directional_scores[symbol] = v.get<double>();
        }
      }
      if (doc.contains("risk_note") && doc["risk_note"].is_string()) {
        const std::string note = doc["risk_note"].get<std::string>();
        if (!note.empty()) decision.rationale += " | risk note: " + note;
      }
    } else {
      decision.cot_free = true;
      decision.rationale.clear();
      decision.confidence = 0.5;
    }
  } catch (const nlohmann::json::exception& e) {
    fail("unparseable-response", std::string("cached response missing required fields: ") +
                                     e.what() + "; raw text: " + *response);
  }
  return decision;
}

}  // namespace tradebench
