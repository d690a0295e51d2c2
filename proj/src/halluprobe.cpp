#include "tradebench/halluprobe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tradebench/common.hpp"
#include "tradebench/reprdiag.hpp"
#include "tradebench/trajectory.hpp"

namespace tradebench {

const std::vector<std::string>& context_lexicon() {
  static const std::vector<std::string> lexicon = {
      "news",      "earnings", "regulation", "regulatory", "macro",   "fed",
      "cpi",       "guidance", "upgrade",    "downgrade",  "support", "resistance",
      "breakout",  "breakouts"};
  return lexicon;
}

namespace {

std::set<std::string> token_set(const std::string& text) {
  std::set<std::string> out;
  for (auto& token : tokenize(text)) out.insert(std::move(token));
  return out;
}

bool has_bigram(const std::vector<std::string>& tokens, const char* a, const char* b) {
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i] == a && tokens[i + 1] == b) return true;
  }
  return false;
}

const std::vector<std::string>& no_risk_patterns() {
  static const std::vector<std::string> patterns = {
      "no risk", "no prior risk", "no violations", "without risk",
      "no risk events", "risk free so far", "no risk so far"};
  return patterns;
}

std::string normalized_text(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool last_space = true;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      last_space = false;
    } else if (!last_space) {
      out.push_back(' ');
      last_space = true;
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> guarded_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 3) return std::nullopt;
  auto variance = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double a : v) m += a;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double a : v) ss += (a - m) * (a - m);
    return ss;
  };
  // Zero variance means the correlation is undefined: reported absent, not 0.
  if (variance(x) <= 0.0 || variance(y) <= 0.0) return std::nullopt;
  return pearson(x, y);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

}  // namespace

ProxyScore proxy_score(const TrajectoryStep& step, const std::string& prompt,
                       const RiskMemory& memory) {
  ProxyScore out;
  out.step = step.step;

  // CoT-free / empty-rationale steps are excluded by construction.
  if (step.decision.rationale.empty()) return out;

  const auto rationale_tokens = tokenize(step.decision.rationale);
  const auto rationale_set = token_set(step.decision.rationale);
  const auto prompt_set = token_set(prompt);
  const auto prompt_tokens = tokenize(prompt);

  // 1. External context named in the rationale but absent from the prompt.
  for (const auto& term : context_lexicon()) {
    if (rationale_set.count(term) && !prompt_set.count(term)) {
      out.unsupported_context = true;
      out.evidence.push_back("unsupported-context: '" + term + "' not in prompt");
    }
  }
  if (has_bigram(rationale_tokens, "on", "chain") && !has_bigram(prompt_tokens, "on", "chain")) {
    out.unsupported_context = true;
    out.evidence.push_back("unsupported-context: 'on chain' not in prompt");
  }

  // 2. Directional score against the current intraperiod move.
  for (const auto& [symbol, score] : step.decision.directional_scores) {
    if (std::fabs(score) < kDirectionalScoreMin) continue;
    const auto bar_it = step.observation.find(symbol);
    if (bar_it == step.observation.end()) continue;
    const double move = bar_it->second.close - bar_it->second.open;
    if (move == 0.0) continue;
    if ((score > 0.0) != (move > 0.0)) {
      out.directional_contradiction = true;
      out.evidence.push_back("directional-contradiction: " + symbol + " score " +
                             format_fixed(score, 3) + " vs intraperiod move " +
                             format_fixed(move, 4));
    }
  }

  // 3. High confidence while the whole observed market is flat.
  if (step.decision.confidence >= kOverconfidentConfidence) {
    double max_move = 0.0;
    for (const auto& [_, bar] : step.observation) {
      max_move = std::max(max_move, std::fabs(bar.close / bar.open - 1.0));
    }
    if (max_move < kWeakMoveThreshold && !step.observation.empty()) {
      out.overconfident_weak = true;
      out.evidence.push_back("overconfident-weak: confidence " +
                             format_fixed(step.decision.confidence, 2) + " on max move " +
                             format_fixed(max_move, 5));
    }
  }

  // 4. "No prior risk" claims that the memory contradicts.
  const std::string flat = normalized_text(step.decision.rationale);
  const long prior = memory.violations_total + memory.rejected_total + memory.blocked_total;
  if (prior > 0) {
    for (const auto& pattern : no_risk_patterns()) {
      if (flat.find(pattern) != std::string::npos) {
        out.stale_no_risk = true;
        out.evidence.push_back("stale-no-risk: rationale says '" + pattern + "' with " +
                               std::to_string(prior) + " prior risk/execution failures");
        break;
      }
    }
  }

  out.score = std::min(1.0, kProxyComponentWeight * out.components());
  return out;
}

std::vector<RiskMemory> memory_states(const std::vector<TrajectoryStep>& steps) {
  std::vector<RiskMemory> states;
  states.reserve(steps.size());
  RiskMemory memory;
  for (const auto& step : steps) {
    states.push_back(memory);  // state the decision saw, before this step
    apply_step_to_memory(memory, step);
  }
  return states;
}

std::vector<ProxyScore> proxy_scores(const std::vector<TrajectoryStep>& steps) {
  const auto states = memory_states(steps);
  std::vector<ProxyScore> scores;
  scores.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    scores.push_back(proxy_score(steps[i], steps[i].decision.prompt, states[i]));
  }
  return scores;
}

AuditCorrelations audit_correlations(const std::vector<ProxyScore>& scores,
                                     const std::vector<TrajectoryStep>& steps) {
  if (scores.size() != steps.size()) fail("shape-error", "scores != steps");
  if (steps.size() < 3) fail("shape-error", "need >= 3 steps");

  std::vector<double> score_series, gate, violations, gaps, rejected;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    score_series.push_back(scores[i].score);
    gate.push_back(steps[i].risk_report.gated() ? 1.0 : 0.0);
    violations.push_back(static_cast<double>(steps[i].risk_report.violations));
    gaps.push_back(steps[i].risk_report.calibration_gap);
    rejected.push_back(static_cast<double>(steps[i].execution.rejected));
  }

  AuditCorrelations out;
  out.risk_gate = guarded_pearson(score_series, gate);
  out.violations = guarded_pearson(score_series, violations);
  out.calibration_gap = guarded_pearson(score_series, gaps);
  out.rejected = guarded_pearson(score_series, rejected);

  std::size_t high_gated = 0, low_gated = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (score_series[i] >= kHighProxyThreshold) {
      ++out.high_count;
      if (gate[i] > 0.0) ++high_gated;
    } else {
      ++out.low_count;
      if (gate[i] > 0.0) ++low_gated;
    }
  }
  out.high_gate_rate =
      out.high_count > 0 ? static_cast<double>(high_gated) / static_cast<double>(out.high_count) : 0.0;
  out.low_gate_rate =
      out.low_count > 0 ? static_cast<double>(low_gated) / static_cast<double>(out.low_count) : 0.0;
  return out;
}

AnnotationExport export_annotation_sample(const std::vector<TrajectoryStep>& steps,
                                          const std::filesystem::path& path, std::size_t n,
                                          std::uint64_t seed) {
  const auto scores = proxy_scores(steps);

  std::vector<std::size_t> high, low;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].decision.rationale.empty()) continue;  // not annotatable
    (scores[i].score >= kHighProxyThreshold ? high : low).push_back(i);
  }

  AnnotationExport result;
  const std::size_t eligible = high.size() + low.size();
  std::size_t take = n;
  if (eligible < n) {
    take = eligible;
    result.warnings.push_back("only " + std::to_string(eligible) + " eligible steps; sample shrunk from " +
                              std::to_string(n));
  }

  // Stratified draw: keep the high/low share, seeded shuffle within strata.
  auto shuffled = [&](std::vector<std::size_t> pool, std::uint64_t salt) {
    Rng rng(mix_seed(seed, salt));
    for (std::size_t i = pool.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
      std::swap(pool[i - 1], pool[j]);
    }
    return pool;
  };
  const auto high_pool = shuffled(high, 1);
  const auto low_pool = shuffled(low, 2);

  std::size_t want_high = eligible > 0
      ? std::min(high_pool.size(),
                 static_cast<std::size_t>(std::llround(static_cast<double>(take) *
                                                       static_cast<double>(high_pool.size()) /
                                                       static_cast<double>(eligible))))
      : 0;
  if (want_high == 0 && !high_pool.empty() && take >= 2) want_high = 1;  // always include both strata
  std::size_t want_low = std::min(low_pool.size(), take - want_high);
  want_high = std::min(high_pool.size(), take - want_low);

  std::vector<std::size_t> chosen(high_pool.begin(), high_pool.begin() + want_high);
  chosen.insert(chosen.end(), low_pool.begin(), low_pool.begin() + want_low);
  std::sort(chosen.begin(), chosen.end());

  std::ofstream out(path);
  if (!out) fail("io-error", "cannot write annotation sample " + path.string());
  out << "step_id,rationale_excerpt,proxy_label,annotator_1,annotator_2,adjudicated\n";
  for (std::size_t i : chosen) {
    std::string excerpt = steps[i].decision.rationale.substr(0, 160);
    out << steps[i].step << ',' << csv_escape(excerpt) << ','
        << (scores[i].score >= kHighProxyThreshold ? 1 : 0) << ",,,\n";
  }
  result.rows = chosen.size();
  return result;
}

Agreement annotation_agreement(const std::filesystem::path& completed_csv) {
  std::ifstream in(completed_csv);
  if (!in) fail("io-error", "cannot open annotation file " + completed_csv.string());

  std::string line;
  if (!std::getline(in, line)) fail("incomplete-annotation", "empty annotation file");

  long n = 0;
  long both_pos = 0, both_neg = 0, a1_pos = 0, a2_pos = 0, agree = 0;
  long proxy_pos_adj_pos = 0, proxy_or_adj_pos = 0;
  std::vector<std::string> incomplete;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = parse_csv_line(line);
    if (fields.size() != 6) {
      fail("incomplete-annotation",
           completed_csv.string() + ":" + std::to_string(line_no) + ": expected 6 columns");
    }
    auto parse_label = [&](const std::string& field) -> int {
      if (field == "0") return 0;
      if (field == "1") return 1;
      incomplete.push_back("line " + std::to_string(line_no));
      return -1;
    };
    const int proxy = parse_label(fields[2]);
    const int a1 = parse_label(fields[3]);
    const int a2 = parse_label(fields[4]);
    const int adj = parse_label(fields[5]);
    if (proxy < 0 || a1 < 0 || a2 < 0 || adj < 0) continue;
    ++n;
    a1_pos += a1;
    a2_pos += a2;
    if (a1 == a2) ++agree;
    if (a1 == 1 && a2 == 1) ++both_pos;
    if (a1 == 0 && a2 == 0) ++both_neg;
    if (proxy == 1 && adj == 1) ++proxy_pos_adj_pos;
    if (proxy == 1 || adj == 1) ++proxy_or_adj_pos;
  }
  if (!incomplete.empty()) {
    std::string rows;
    for (const auto& r : incomplete) rows += (rows.empty() ? "" : ", ") + r;
    fail("incomplete-annotation", "missing or non-binary labels at: " + rows);
  }
  if (n == 0) fail("incomplete-annotation", "no labeled rows");

  const double dn = static_cast<double>(n);
  const double po = static_cast<double>(agree) / dn;
  const double p1 = static_cast<double>(a1_pos) / dn;
  const double p2 = static_cast<double>(a2_pos) / dn;
  const double pe = p1 * p2 + (1.0 - p1) * (1.0 - p2);

  Agreement result;
  // pe == 1 only when both annotators are constant; perfect agreement then
  // maps to kappa = 1, disagreement (impossible here) to 0.
  result.kappa = pe >= 1.0 ? (po >= 1.0 ? 1.0 : 0.0) : (po - pe) / (1.0 - pe);
  result.iou = proxy_or_adj_pos > 0
                   ? static_cast<double>(proxy_pos_adj_pos) / static_cast<double>(proxy_or_adj_pos)
                   : 1.0;
  return result;
}

}  // namespace tradebench
