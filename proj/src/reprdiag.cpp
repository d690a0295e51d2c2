#include "tradebench/reprdiag.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tradebench/common.hpp"
#include "tradebench/trajectory.hpp"

namespace tradebench {

const char* to_string(ViewKind kind) {
  switch (kind) {
    case ViewKind::hash64: return "hash64";
    case ViewKind::lsa: return "lsa";
    case ViewKind::intent_weights: return "intent";
    case ViewKind::external: return "external";
  }
  return "?";
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

void l2_normalize(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
}

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    ss += d * d;
  }
  return std::sqrt(ss);
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> phase_centroid(const EmbeddingView& view, const PhaseLabeling& labels,
                                   Phase phase, std::size_t skip_index, bool use_skip) {
  std::vector<double> centroid(view.dims, 0.0);
  std::size_t count = 0;
  for (std::size_t t = 0; t < view.vectors.size(); ++t) {
    if (labels.labels[t] != phase) continue;
    if (use_skip && t == skip_index) continue;
    for (std::size_t d = 0; d < view.dims; ++d) centroid[d] += view.vectors[t][d];
    ++count;
  }
  if (count > 0) {
    for (double& x : centroid) x /= static_cast<double>(count);
  }
  return centroid;
}

}  // namespace

EmbeddingView hash_embed(const std::vector<std::string>& texts) {
  constexpr std::size_t kDims = 64;
  EmbeddingView view;
  view.kind = ViewKind::hash64;
  view.dims = kDims;
  view.source_fields = "plan";
  view.vectors.reserve(texts.size());
  view.empty_rows.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<double> row(kDims, 0.0);
    const auto tokens = tokenize(text);
    for (const auto& token : tokens) {
      const std::uint64_t h = fnv1a64(token);
      const std::size_t bucket = h % kDims;
      const double sign = ((h >> 32) & 1ull) ? 1.0 : -1.0;
      row[bucket] += sign;
    }
    l2_normalize(row);
    view.empty_rows.push_back(tokens.empty());
    view.vectors.push_back(std::move(row));
  }
  return view;
}

EmbeddingView lsa_embed(const std::vector<std::string>& texts, std::size_t dims) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(texts.size());
  std::size_t non_empty = 0;
  for (const auto& text : texts) {
    docs.push_back(tokenize(text));
    if (!docs.back().empty()) ++non_empty;
  }
  if (non_empty == 0) fail("empty-corpus", "all documents are empty");

  // Vocabulary in first-seen order keeps the matrix deterministic.
  std::map<std::string, std::size_t> vocab;
  std::vector<std::size_t> doc_freq;
  for (const auto& doc : docs) {
    std::set<std::string> seen;
    for (const auto& token : doc) {
      if (!vocab.count(token)) {
        vocab[token] = vocab.size();
        doc_freq.push_back(0);
      }
      if (seen.insert(token).second) doc_freq[vocab[token]] += 1;
    }
  }

  const std::size_t n_docs = docs.size();
  const std::size_t n_terms = vocab.size();
  Eigen::MatrixXd tfidf = Eigen::MatrixXd::Zero(n_docs, n_terms);
  for (std::size_t i = 0; i < n_docs; ++i) {
    std::map<std::size_t, double> counts;
    for (const auto& token : docs[i]) counts[vocab[token]] += 1.0;
    for (const auto& [term, count] : counts) {
      // Smooth idf, sklearn-style: ln((1+n)/(1+df)) + 1.
      const double idf =
          std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(doc_freq[term]))) +
          1.0;
      tfidf(i, term) = count * idf;
    }
    const double norm = tfidf.row(i).norm();
    if (norm > 0.0) tfidf.row(i) /= norm;
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(tfidf, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  std::size_t rank = 0;
  const double tol = 1e-10 * (sv.size() > 0 ? sv(0) : 0.0);
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  const std::size_t keep = std::min(dims, rank);
  if (keep == 0) fail("empty-corpus", "corpus has rank 0");

  // Fix the SVD sign ambiguity first: make the largest-magnitude vocabulary
  // loading of each component positive (ties break toward the earliest term).
  Eigen::MatrixXd directions = svd.matrixV().leftCols(keep);
  for (std::size_t k = 0; k < keep; ++k) {
    const auto v = directions.col(static_cast<Eigen::Index>(k));
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::fabs(v(i)) > best + 1e-15) {
        best = std::fabs(v(i));
        arg = i;
      }
    }
    if (v(arg) < 0.0) directions.col(static_cast<Eigen::Index>(k)) *= -1.0;
  }
  // Loadings as X*V (= U*Sigma up to rounding): identical documents map to
  // bitwise-identical rows because each row is a product of its own tf-idf.
  Eigen::MatrixXd loadings = tfidf * directions;

  EmbeddingView view;
  view.kind = ViewKind::lsa;
  view.dims = keep;
  view.source_fields = "plan";
  if (keep < dims) {
    view.notes.push_back("rank-limited: requested " + std::to_string(dims) + " dims, corpus rank " +
                         std::to_string(keep));
  }
  for (std::size_t i = 0; i < n_docs; ++i) {
    std::vector<double> row(keep);
    for (std::size_t k = 0; k < keep; ++k) row[k] = loadings(i, k);
    l2_normalize(row);
    view.empty_rows.push_back(docs[i].empty());
    view.vectors.push_back(std::move(row));
  }
  return view;
}

EmbeddingView fuse(const EmbeddingView& view, const std::vector<std::vector<double>>& features) {
  if (features.empty()) return view;
  if (features.size() != view.vectors.size()) {
    fail("shape-error", "feature rows " + std::to_string(features.size()) + " != view rows " +
                            std::to_string(view.vectors.size()));
  }
  const std::size_t k = features.front().size();
  for (const auto& row : features) {
    if (row.size() != k) fail("shape-error", "ragged feature matrix");
  }
  if (k == 0) return view;

  const double n = static_cast<double>(features.size());
  std::vector<double> mean(k, 0.0), sd(k, 0.0);
  for (const auto& row : features) {
    for (std::size_t j = 0; j < k; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= n;
  for (const auto& row : features) {
    for (std::size_t j = 0; j < k; ++j) sd[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
  }
  std::vector<std::size_t> kept;
  EmbeddingView out = view;
  for (std::size_t j = 0; j < k; ++j) {
    sd[j] = std::sqrt(sd[j] / n);
    if (sd[j] > 1e-12) {
      kept.push_back(j);
    } else {
      out.notes.push_back("dropped zero-variance feature column " + std::to_string(j));
    }
  }

  out.source_fields = view.source_fields + "+fused";
  out.dims = view.dims + kept.size();
  for (std::size_t t = 0; t < out.vectors.size(); ++t) {
    for (std::size_t j : kept) {
      out.vectors[t].push_back((features[t][j] - mean[j]) / sd[j]);
    }
  }
  return out;
}

PhaseLabeling label_phases(const std::vector<double>& equity_curve, AnchorMode mode,
                           std::size_t anchors_per_traj, std::size_t pre_window) {
  const std::size_t n = equity_curve.size();
  if (n <= pre_window + 1) fail("invalid-curve", "curve shorter than pre_window + 2");

  PhaseLabeling labeling;
  labeling.pre_window = pre_window;
  labeling.labels.assign(n, Phase::normal);

  // Drawdown series against the running peak.
  std::vector<double> dd(n, 0.0);
  double peak = equity_curve.front();
  for (std::size_t t = 0; t < n; ++t) {
    peak = std::max(peak, equity_curve[t]);
    dd[t] = equity_curve[t] / peak - 1.0;
  }

  std::vector<std::size_t> candidates;
  if (mode == AnchorMode::max_anchor) {
    std::size_t arg = 0;
    for (std::size_t t = 1; t < n; ++t) {
      if (dd[t] < dd[arg]) arg = t;
    }
    if (dd[arg] < 0.0) candidates.push_back(arg);
  } else {
    // Local troughs of the drawdown series.
    std::vector<std::size_t> troughs;
    for (std::size_t t = 0; t < n; ++t) {
      if (dd[t] >= 0.0) continue;
      const bool left_ok = t == 0 || dd[t] <= dd[t - 1];
      const bool right_ok = t + 1 >= n || dd[t] < dd[t + 1];
      if (left_ok && right_ok) troughs.push_back(t);
    }
    // Greedy deepest-first selection with a minimum separation.
    std::sort(troughs.begin(), troughs.end(), [&](std::size_t a, std::size_t b) {
      if (dd[a] != dd[b]) return dd[a] < dd[b];
      return a < b;
    });
    const std::size_t min_sep = pre_window + 1;
    for (std::size_t t : troughs) {
      if (candidates.size() >= anchors_per_traj) break;
      bool ok = true;
      for (std::size_t a : candidates) {
        const std::size_t gap = t > a ? t - a : a - t;
        if (gap < min_sep) {
          ok = false;
          break;
        }
      }
      if (ok) candidates.push_back(t);
    }
    std::sort(candidates.begin(), candidates.end());
  }

  // No trough on a monotone-rising curve: empty anchors, all steps normal.
  labeling.anchors = candidates;
  if (candidates.empty()) return labeling;

  // Drawdown phase: anchor until equity regains the pre-anchor running peak.
  for (std::size_t a : labeling.anchors) {
    double target = equity_curve.front();
    for (std::size_t t = 0; t <= a; ++t) target = std::max(target, equity_curve[t]);
    std::size_t t = a;
    while (t < n && equity_curve[t] < target) {
      labeling.labels[t] = Phase::drawdown;
      ++t;
    }
    if (t == a) labeling.labels[a] = Phase::drawdown;  // anchor always marked
  }
  // Pre-drawdown windows take precedence so every anchor keeps exactly
  // pre_window precursor steps (fewer at the series start).
  for (std::size_t a : labeling.anchors) {
    const std::size_t begin = a >= pre_window ? a - pre_window : 0;
    for (std::size_t t = begin; t < a; ++t) labeling.labels[t] = Phase::pre_drawdown;
  }
  return labeling;
}

CentroidReport centroid_analysis(const EmbeddingView& view, const PhaseLabeling& labels) {
  if (view.vectors.size() != labels.labels.size()) {
    fail("shape-error", "view rows != label count");
  }
  std::size_t n_normal = 0, n_pre = 0, n_draw = 0;
  for (Phase p : labels.labels) {
    n_normal += p == Phase::normal;
    n_pre += p == Phase::pre_drawdown;
    n_draw += p == Phase::drawdown;
  }
  if (n_normal == 0 || n_pre == 0) {
    fail("insufficient-phase", "need at least one normal and one pre_drawdown step");
  }

  const auto normal = phase_centroid(view, labels, Phase::normal, 0, false);
  const auto pre = phase_centroid(view, labels, Phase::pre_drawdown, 0, false);

  CentroidReport report;
  report.normal_pre = cosine_distance(normal, pre);
  if (n_draw > 0) {
    const auto draw = phase_centroid(view, labels, Phase::drawdown, 0, false);
    report.normal_draw = cosine_distance(normal, draw);
    report.pre_draw = cosine_distance(pre, draw);
  }

  // Leave-one-out nearest-centroid recall over {normal, pre_drawdown}.
  std::size_t normal_hits = 0, pre_hits = 0;
  for (std::size_t t = 0; t < view.vectors.size(); ++t) {
    const Phase truth = labels.labels[t];
    if (truth == Phase::drawdown) continue;
    const auto c_normal = phase_centroid(view, labels, Phase::normal, t, true);
    const auto c_pre = phase_centroid(view, labels, Phase::pre_drawdown, t, true);
    const double d_normal = cosine_distance(view.vectors[t], c_normal);
    const double d_pre = cosine_distance(view.vectors[t], c_pre);
    const Phase guess = d_pre < d_normal ? Phase::pre_drawdown : Phase::normal;
    if (guess == truth) {
      if (truth == Phase::normal) ++normal_hits;
      else ++pre_hits;
    }
  }
  const double recall_normal = static_cast<double>(normal_hits) / static_cast<double>(n_normal);
  const double recall_pre = static_cast<double>(pre_hits) / static_cast<double>(n_pre);
  report.balanced_accuracy = 0.5 * (recall_normal + recall_pre);
  return report;
}

double effective_rank(const std::vector<std::vector<double>>& window_vectors) {
  if (window_vectors.size() < 2) return 1.0;
  const std::size_t rows = window_vectors.size();
  const std::size_t cols = window_vectors.front().size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = window_vectors[i][j];
  }
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  double total = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) total += sv(i);
  if (total <= 0.0) return 1.0;  // all vectors identical

  double entropy = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    const double p = sv(i) / total;
    if (p > 1e-12) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

ManifoldDiagnostics manifold_diagnostics(const EmbeddingView& view, const PhaseLabeling& labels,
                                         std::size_t window) {
  const std::size_t n = view.vectors.size();
  if (n != labels.labels.size()) fail("shape-error", "view rows != label count");
  if (n < window) fail("insufficient-window", "fewer steps than the window");

  ManifoldDiagnostics diag;

  // Path length and per-phase local step distances.
  double normal_sum = 0.0, pre_sum = 0.0;
  std::size_t normal_cnt = 0, pre_cnt = 0;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const double d = l2_distance(view.vectors[t], view.vectors[t + 1]);
    diag.path_length += d;
    if (labels.labels[t] == Phase::normal) {
      normal_sum += d;
      ++normal_cnt;
    } else if (labels.labels[t] == Phase::pre_drawdown) {
      pre_sum += d;
      ++pre_cnt;
    }
  }
  diag.normal_step = normal_cnt > 0 ? normal_sum / static_cast<double>(normal_cnt) : 0.0;
  diag.pre_step = pre_cnt > 0 ? pre_sum / static_cast<double>(pre_cnt) : 0.0;
  diag.velocity_ratio = diag.normal_step > 0.0 ? diag.pre_step / diag.normal_step : 0.0;

  // Effective rank over temporal windows centered on phase steps. The
  // neighborhood convention (temporal window, full length required) is
  // recorded in the output docs.
  const std::size_t half = window / 2;
  auto window_rank = [&](std::size_t t) -> std::optional<double> {
    if (t < half) return std::nullopt;
    const std::size_t begin = t - half;
    if (begin + window > n) return std::nullopt;
    std::vector<std::vector<double>> block(view.vectors.begin() + begin,
                                           view.vectors.begin() + begin + window);
    return effective_rank(block);
  };

  double normal_rank_sum = 0.0;
  std::size_t normal_rank_cnt = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (labels.labels[t] != Phase::normal) continue;
    if (const auto r = window_rank(t)) {
      normal_rank_sum += *r;
      ++normal_rank_cnt;
    }
  }

  double pre_rank_sum = 0.0;
  std::size_t pre_rank_cnt = 0;
  std::size_t contracted = 0, anchor_with_rank = 0;
  const double normal_rank_mean =
      normal_rank_cnt > 0 ? normal_rank_sum / static_cast<double>(normal_rank_cnt) : 0.0;
  for (std::size_t a : labels.anchors) {
    double sum = 0.0;
    std::size_t cnt = 0;
    const std::size_t begin = a >= labels.pre_window ? a - labels.pre_window : 0;
    for (std::size_t t = begin; t < a; ++t) {
      if (labels.labels[t] != Phase::pre_drawdown) continue;
      if (const auto r = window_rank(t)) {
        sum += *r;
        ++cnt;
      }
    }
    if (cnt == 0) continue;
    const double anchor_pre_rank = sum / static_cast<double>(cnt);
    pre_rank_sum += anchor_pre_rank;
    ++pre_rank_cnt;
    ++anchor_with_rank;
    if (normal_rank_cnt > 0 && normal_rank_mean - anchor_pre_rank > 0.0) ++contracted;
  }

  diag.anchor_count = labels.anchors.size();
  if (normal_rank_cnt > 0 && pre_rank_cnt > 0) {
    diag.normal_rank = normal_rank_mean;
    diag.pre_rank = pre_rank_sum / static_cast<double>(pre_rank_cnt);
    diag.rank_delta = diag.normal_rank - diag.pre_rank;
    diag.rank_defined = true;
    diag.contraction_rate =
        anchor_with_rank > 0 ? static_cast<double>(contracted) / static_cast<double>(anchor_with_rank)
                             : 0.0;
  }

  // Phase purity: share of each pre step's k nearest neighbors sharing its
  // label (k = 5).
  constexpr std::size_t kNeighbors = 5;
  double purity_sum = 0.0;
  std::size_t purity_cnt = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (labels.labels[t] != Phase::pre_drawdown) continue;
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(n - 1);
    for (std::size_t u = 0; u < n; ++u) {
      if (u == t) continue;
      dist.emplace_back(l2_distance(view.vectors[t], view.vectors[u]), u);
    }
    const std::size_t k = std::min(kNeighbors, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::size_t same = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (labels.labels[dist[i].second] == Phase::pre_drawdown) ++same;
    }
    purity_sum += static_cast<double>(same) / static_cast<double>(k);
    ++purity_cnt;
  }
  if (purity_cnt > 0) {
    diag.phase_purity = purity_sum / static_cast<double>(purity_cnt);
    diag.purity_defined = true;
  }

  bool has_pre = false, has_normal = false;
  for (Phase p : labels.labels) {
    has_pre |= p == Phase::pre_drawdown;
    has_normal |= p == Phase::normal;
  }
  if (has_pre && has_normal) {
    diag.centroids = centroid_analysis(view, labels);
    diag.balanced_accuracy = diag.centroids.balanced_accuracy;
  }
  return diag;
}

LexicalDeltas lexical_controls(const std::vector<std::string>& texts,
                               const PhaseLabeling& labels) {
  if (texts.size() != labels.labels.size()) fail("shape-error", "texts != label count");

  auto step_stats = [](const std::string& text) -> std::optional<std::pair<double, double>> {
    const auto tokens = tokenize(text);
    if (tokens.empty()) return std::nullopt;
    std::map<std::string, std::size_t> counts;
    for (const auto& token : tokens) counts[token] += 1;
    const double total = static_cast<double>(tokens.size());
    const double ttr = static_cast<double>(counts.size()) / total;
    double entropy = 0.0;
    for (const auto& [_, c] : counts) {
      const double p = static_cast<double>(c) / total;
      entropy -= p * std::log(p);
    }
    return std::make_pair(ttr, entropy);
  };

  double pre_ttr = 0.0, pre_ent = 0.0, normal_ttr = 0.0, normal_ent = 0.0;
  std::size_t pre_cnt = 0, normal_cnt = 0;
  for (std::size_t t = 0; t < texts.size(); ++t) {
    const auto stats = step_stats(texts[t]);
    if (!stats) continue;
    if (labels.labels[t] == Phase::pre_drawdown) {
      pre_ttr += stats->first;
      pre_ent += stats->second;
      ++pre_cnt;
    } else if (labels.labels[t] == Phase::normal) {
      normal_ttr += stats->first;
      normal_ent += stats->second;
      ++normal_cnt;
    }
  }
  if (pre_cnt == 0 || normal_cnt == 0) {
    fail("insufficient-text", "need tokens in both normal and pre_drawdown phases");
  }

  LexicalDeltas deltas;
  deltas.ttr_delta = pre_ttr / static_cast<double>(pre_cnt) -
                     normal_ttr / static_cast<double>(normal_cnt);
  deltas.entropy_delta = pre_ent / static_cast<double>(pre_cnt) -
                         normal_ent / static_cast<double>(normal_cnt);
  return deltas;
}

EmbeddingView intent_view(const std::vector<DecisionRecord>& decisions,
                          const std::vector<std::string>& symbols) {
  EmbeddingView view;
  view.kind = ViewKind::intent_weights;
  view.dims = symbols.size();
  view.source_fields = "intent";
  for (const auto& decision : decisions) {
    for (const auto& [symbol, _] : decision.intended_weights) {
      if (std::find(symbols.begin(), symbols.end(), symbol) == symbols.end()) {
        fail("universe-error", "decision weight for unknown symbol " + symbol);
      }
    }
    std::vector<double> row(symbols.size(), 0.0);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      const auto it = decision.intended_weights.find(symbols[i]);
      if (it != decision.intended_weights.end()) row[i] = it->second;
    }
    view.empty_rows.push_back(false);
    view.vectors.push_back(std::move(row));
  }
  return view;
}

EmbeddingView load_external_view(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("malformed-input", "cannot open external view " + path.string());
  EmbeddingView view;
  view.kind = ViewKind::external;
  view.source_fields = "external";
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      try {
        row.push_back(std::stod(field));
      } catch (const std::exception&) {
        fail("malformed-input",
             path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
      }
    }
    if (!view.vectors.empty() && row.size() != view.dims) {
      fail("malformed-input", path.string() + ":" + std::to_string(line_no) + ": ragged row");
    }
    view.dims = row.size();
    view.empty_rows.push_back(row.empty());
    view.vectors.push_back(std::move(row));
  }
  if (view.vectors.empty()) fail("malformed-input", path.string() + ": empty matrix");
  return view;
}

std::vector<std::string> plan_texts(const std::vector<TrajectoryStep>& steps) {
  std::vector<std::string> texts;
  texts.reserve(steps.size());
  for (const auto& step : steps) {
    std::ostringstream out;
    out << step.decision.rationale;
    for (const auto& note : step.risk_report.notes) out << " | " << note;
    if (!step.decision.intended_weights.empty()) {
      out << " | targets";
      for (const auto& [symbol, w] : step.decision.intended_weights) {
        out << " " << symbol << " " << format_fixed(w, 3);
      }
    }
    if (step.decision.cot_free) {
      texts.push_back("");  // CoT-free: the language channel is empty
    } else {
      texts.push_back(out.str());
    }
  }
  return texts;
}

std::vector<std::string> reflection_texts(const std::vector<TrajectoryStep>& steps) {
  std::vector<std::string> texts;
  texts.reserve(steps.size());
  for (const auto& step : steps) texts.push_back(step.reflection);
  return texts;
}

std::vector<std::vector<double>> fused_features(const std::vector<TrajectoryStep>& steps) {
  std::vector<std::vector<double>> features;
  features.reserve(steps.size());
  for (const auto& step : steps) {
    double ret_sum = 0.0, range_sum = 0.0;
    std::size_t n = 0;
    for (const auto& [_, bar] : step.observation) {
      ret_sum += bar.close / bar.open - 1.0;
      range_sum += (bar.high - bar.low) / bar.close;
      ++n;
    }
    const double denom = n > 0 ? static_cast<double>(n) : 1.0;
    features.push_back({ret_sum / denom, range_sum / denom, step.decision.gross_intent(),
                        step.risk_report.calibration_gap,
                        static_cast<double>(step.risk_report.clipped_count),
                        static_cast<double>(step.risk_report.blocked_count),
                        static_cast<double>(step.risk_report.violations),
                        static_cast<double>(step.execution.rejected),
                        static_cast<double>(step.execution.pending),
                        step.execution.slippage_total});
  }
  return features;
}

}  // namespace tradebench
