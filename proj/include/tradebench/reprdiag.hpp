#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tradebench/agents.hpp"

namespace tradebench {

struct TrajectoryStep;

enum class ViewKind { hash64, lsa, intent_weights, external };
const char* to_string(ViewKind kind);

struct EmbeddingView {
  ViewKind kind = ViewKind::hash64;
  std::vector<std::vector<double>> vectors;  // steps x dims
  std::size_t dims = 0;
  std::string source_fields;           // plan | reflection | fused | intent
  std::vector<bool> empty_rows;        // rows that could not be normalized
  std::vector<std::string> notes;      // e.g. dropped fused columns
};

enum class Phase : std::uint8_t { normal = 0, pre_drawdown = 1, drawdown = 2 };

struct PhaseLabeling {
  std::vector<Phase> labels;
  std::vector<std::size_t> anchors;
  std::size_t pre_window = 4;
};

enum class AnchorMode { max_anchor, rolling };

struct CentroidReport {
  double normal_pre = 0.0;
  double normal_draw = 0.0;
  double pre_draw = 0.0;
  double balanced_accuracy = 0.5;
};

struct ManifoldDiagnostics {
  double path_length = 0.0;
  double normal_step = 0.0;
  double pre_step = 0.0;
  double velocity_ratio = 0.0;
  double normal_rank = 0.0;
  double pre_rank = 0.0;
  double rank_delta = 0.0;      // normal_rank - pre_rank
  bool rank_defined = false;    // false when no full window fits a phase
  double contraction_rate = 0.0;  // share of anchors with positive rank delta
  std::size_t anchor_count = 0;
  double phase_purity = 0.0;
  bool purity_defined = false;
  double balanced_accuracy = 0.5;
  CentroidReport centroids;
};

struct LexicalDeltas {
  double ttr_delta = 0.0;      // mean pre TTR - mean normal TTR
  double entropy_delta = 0.0;  // mean pre entropy - mean normal entropy
};

// Deterministic 64-bucket signed token-hash embedding, rows L2-normalized.
EmbeddingView hash_embed(const std::vector<std::string>& texts);

// TF-IDF (smooth log idf) + truncated SVD document loadings, L2-normalized,
// SVD sign fixed so each component's largest-magnitude loading is positive.
EmbeddingView lsa_embed(const std::vector<std::string>& texts, std::size_t dims = 32);

// Standardize feature columns and append them to the text vectors; constant
// columns are dropped with a note.
EmbeddingView fuse(const EmbeddingView& view,
                   const std::vector<std::vector<double>>& features);

PhaseLabeling label_phases(const std::vector<double>& equity_curve, AnchorMode mode,
                           std::size_t anchors_per_traj = 10, std::size_t pre_window = 4);

CentroidReport centroid_analysis(const EmbeddingView& view, const PhaseLabeling& labels);

ManifoldDiagnostics manifold_diagnostics(const EmbeddingView& view, const PhaseLabeling& labels,
                                         std::size_t window = 8);

LexicalDeltas lexical_controls(const std::vector<std::string>& texts,
                               const PhaseLabeling& labels);

// Intent-weight geometry: one row per decision over the fixed symbol order,
// magnitudes preserved (no normalization).
EmbeddingView intent_view(const std::vector<DecisionRecord>& decisions,
                          const std::vector<std::string>& symbols);

// Plug-in for externally computed embedding matrices (CSV, one row per step).
EmbeddingView load_external_view(const std::filesystem::path& path);

// Text assembly used by the diagnostics: plan = rationale + risk notes +
// target weights, reflection = the post-trade attribution text.
std::vector<std::string> plan_texts(const std::vector<TrajectoryStep>& steps);
std::vector<std::string> reflection_texts(const std::vector<TrajectoryStep>& steps);

// Structured market and risk features appended by the fused view; market
// columns come from the logged observation bars (and therefore move under
// OHLCV noise), risk columns from the logged reports.
std::vector<std::vector<double>> fused_features(const std::vector<TrajectoryStep>& steps);

// Tokenizer shared by hash/lsa/lexical paths: lowercase, split on
// non-alphanumerics.
std::vector<std::string> tokenize(const std::string& text);

double effective_rank(const std::vector<std::vector<double>>& window_vectors);

}  // namespace tradebench
