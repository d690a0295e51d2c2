#include "tradebench/dataio.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tradebench {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("malformed-input", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void validate_bar(const Bar& bar, const std::string& symbol) {
  if (!(bar.open > 0.0 && bar.high > 0.0 && bar.low > 0.0 && bar.close > 0.0)) {
    fail("invalid-bar", "non-positive price for " + symbol + " at step " + std::to_string(bar.step));
  }
  if (bar.low > std::min(bar.open, bar.close) + 1e-12 ||
      bar.high < std::max(bar.open, bar.close) - 1e-12) {
    fail("invalid-bar", "high/low do not bracket open/close for " + symbol + " at step " +
                            std::to_string(bar.step));
  }
  if (bar.volume < 0.0) {
    fail("invalid-bar", "negative volume for " + symbol + " at step " + std::to_string(bar.step));
  }
}

MarketPanel from_symbol_map(std::map<std::string, std::vector<Bar>>&& by_symbol,
                            const std::filesystem::path& path, const std::string& content) {
  MarketPanel panel;
  for (auto& [symbol, series] : by_symbol) {
    if (series.size() < 2) {
      fail("malformed-input", "symbol " + symbol + " has fewer than 2 bars");
    }
    std::sort(series.begin(), series.end(),
              [](const Bar& a, const Bar& b) { return a.step < b.step; });
    panel.symbols.push_back(symbol);  // std::map iteration is lexicographic
    panel.bars.push_back(std::move(series));
  }
  panel.manifest.source_path = path.string();
  panel.manifest.descriptor = "file:" + path.filename().string();
  panel.manifest.content_hash = to_hex(fnv1a64(content));
  return panel;
}

}  // namespace

MarketPanel load_ohlcv(const std::filesystem::path& path, PanelFormat format) {
  const std::string content = read_file(path);
  std::map<std::string, std::vector<Bar>> by_symbol;

  if (format == PanelFormat::csv) {
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line_no == 1 && line.rfind("step,", 0) == 0) continue;  // header
      std::istringstream row(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(row, field, ',')) fields.push_back(field);
      if (fields.size() != 7) {
        fail("malformed-input",
             path.string() + ":" + std::to_string(line_no) + ": expected 7 columns, got " +
                 std::to_string(fields.size()));
      }
      Bar bar;
      try {
        bar.step = std::stoll(fields[0]);
        bar.open = std::stod(fields[2]);
        bar.high = std::stod(fields[3]);
        bar.low = std::stod(fields[4]);
        bar.close = std::stod(fields[5]);
        bar.volume = std::stod(fields[6]);
      } catch (const std::exception&) {
        fail("malformed-input",
             path.string() + ":" + std::to_string(line_no) + ": unparseable numeric field");
      }
      validate_bar(bar, fields[1]);
      by_symbol[fields[1]].push_back(bar);
    }
  } else {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
      fail("malformed-input", path.string() + ": " + e.what());
    }
    if (!doc.contains("rows") || !doc["rows"].is_array()) {
      fail("malformed-input", path.string() + ": missing 'rows' array");
    }
    std::size_t idx = 0;
    for (const auto& row : doc["rows"]) {
      ++idx;
      try {
        Bar bar;
        bar.step = row.at("step").get<std::int64_t>();
        bar.open = row.at("open").get<double>();
        bar.high = row.at("high").get<double>();
        bar.low = row.at("low").get<double>();
        bar.close = row.at("close").get<double>();
        bar.volume = row.at("volume").get<double>();
        const std::string symbol = row.at("symbol").get<std::string>();
        validate_bar(bar, symbol);
        by_symbol[symbol].push_back(bar);
      } catch (const nlohmann::json::exception& e) {
        fail("malformed-input", path.string() + ": row " + std::to_string(idx) + ": " + e.what());
      }
    }
  }

  if (by_symbol.empty()) fail("malformed-input", path.string() + ": no rows");
  return from_symbol_map(std::move(by_symbol), path, content);
}

void write_panel_csv(const MarketPanel& panel, std::ostream& out) {
  out << "step,symbol,open,high,low,close,volume\n";
  const std::size_t steps = panel.bars.empty() ? 0 : panel.bars.front().size();
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t s = 0; s < panel.symbols.size(); ++s) {
      if (t >= panel.bars[s].size()) continue;
      const Bar& b = panel.bars[s][t];
      out << b.step << ',' << panel.symbols[s] << ',' << format_full(b.open) << ','
          << format_full(b.high) << ',' << format_full(b.low) << ',' << format_full(b.close) << ','
          << format_full(b.volume) << '\n';
    }
  }
}

void write_panel_json(const MarketPanel& panel, std::ostream& out) {
  nlohmann::ordered_json doc;
  doc["rows"] = nlohmann::ordered_json::array();
  const std::size_t steps = panel.bars.empty() ? 0 : panel.bars.front().size();
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t s = 0; s < panel.symbols.size(); ++s) {
      if (t >= panel.bars[s].size()) continue;
      const Bar& b = panel.bars[s][t];
      nlohmann::ordered_json row;
      row["step"] = b.step;
      row["symbol"] = panel.symbols[s];
      row["open"] = b.open;
      row["high"] = b.high;
      row["low"] = b.low;
      row["close"] = b.close;
      row["volume"] = b.volume;
      doc["rows"].push_back(row);
    }
  }
  out << doc.dump(2) << '\n';
}

std::string panel_manifest_json(const MarketPanel& panel) {
  nlohmann::ordered_json doc;
  doc["seed"] = panel.manifest.seed;
  doc["descriptor"] = panel.manifest.descriptor;
  doc["generated_at"] = panel.manifest.generated_at;
  if (!panel.manifest.source_path.empty()) doc["source_path"] = panel.manifest.source_path;
  if (!panel.manifest.content_hash.empty()) doc["content_hash"] = panel.manifest.content_hash;
  return doc.dump(2);
}

MarketPanel align_panels(const MarketPanel& panel) {
  if (panel.symbols.empty()) fail("no-overlap", "empty panel");

  std::set<std::int64_t> shared;
  for (const Bar& b : panel.bars.front()) shared.insert(b.step);
  for (std::size_t s = 1; s < panel.bars.size(); ++s) {
    std::set<std::int64_t> steps;
    for (const Bar& b : panel.bars[s]) steps.insert(b.step);
    std::set<std::int64_t> kept;
    std::set_intersection(shared.begin(), shared.end(), steps.begin(), steps.end(),
                          std::inserter(kept, kept.begin()));
    shared.swap(kept);
  }
  if (shared.empty()) fail("no-overlap", "no step is present for every symbol");

  MarketPanel out;
  out.symbols = panel.symbols;
  out.manifest = panel.manifest;
  out.bars.resize(panel.bars.size());
  for (std::size_t s = 0; s < panel.bars.size(); ++s) {
    for (const Bar& b : panel.bars[s]) {
      if (shared.count(b.step)) out.bars[s].push_back(b);
    }
  }
  return out;
}

MarketPanel inject_noise(const MarketPanel& panel, double epsilon, std::uint64_t seed) {
  if (epsilon < 0.0) fail("invalid-noise", "epsilon must be >= 0");
  if (epsilon == 0.0) return panel;

  MarketPanel out = panel;
  for (std::size_t s = 0; s < out.bars.size(); ++s) {
    const std::uint64_t symbol_salt = fnv1a64(out.symbols[s]);
    for (Bar& bar : out.bars[s]) {
      double* fields[4] = {&bar.open, &bar.high, &bar.low, &bar.close};
      for (int f = 0; f < 4; ++f) {
        Rng rng(mix_seed(seed, symbol_salt ^ (static_cast<std::uint64_t>(bar.step) * 4 + f) * 0x9e3779b97f4a7c15ull));
        const double z = rng.normal();
        *fields[f] = std::max(*fields[f] * (1.0 + epsilon * z), 1e-9);
      }
      // Re-expand high/low minimally so the bar invariants survive the
      // independent shocks.
      bar.high = std::max({bar.high, bar.open, bar.close});
      bar.low = std::min({bar.low, bar.open, bar.close});
    }
  }
  return out;
}

CorrelationSummary correlation_summary(const MarketPanel& panel) {
  if (panel.symbols.size() < 2) fail("degenerate-series", "need >= 2 symbols");
  if (!panel.aligned()) fail("degenerate-series", "panel must be aligned");
  const std::size_t steps = panel.step_count();
  if (steps < 3) fail("degenerate-series", "need >= 3 steps");

  const std::size_t n = panel.symbols.size();
  const std::size_t m = steps - 1;
  Eigen::MatrixXd returns(m, n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 1; t < steps; ++t) {
      returns(t - 1, s) = panel.bars[s][t].close / panel.bars[s][t - 1].close - 1.0;
    }
  }

  Eigen::VectorXd mean = returns.colwise().mean();
  Eigen::MatrixXd centered = returns.rowwise() - mean.transpose();
  Eigen::VectorXd sd(n);
  for (std::size_t s = 0; s < n; ++s) {
    sd(s) = std::sqrt(centered.col(s).squaredNorm() / static_cast<double>(m - 1));
    if (!(sd(s) > 0.0)) {
      fail("degenerate-series", "symbol " + panel.symbols[s] + " has zero return variance");
    }
  }

  Eigen::MatrixXd corr(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    corr(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = centered.col(i).dot(centered.col(j)) / static_cast<double>(m - 1);
      const double rho = c / (sd(i) * sd(j));
      corr(i, j) = rho;
      corr(j, i) = rho;
    }
  }

  std::vector<double> abs_corr;
  abs_corr.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) abs_corr.push_back(std::fabs(corr(i, j)));
  }
  std::sort(abs_corr.begin(), abs_corr.end());

  CorrelationSummary summary;
  summary.n_symbols = n;
  summary.n_pairs = abs_corr.size();
  double sum = 0.0;
  for (double v : abs_corr) sum += v;
  summary.mean_abs_corr = sum / static_cast<double>(abs_corr.size());
  const std::size_t p90_idx =
      std::min(abs_corr.size() - 1,
               static_cast<std::size_t>(std::ceil(0.90 * static_cast<double>(abs_corr.size())) - 1));
  summary.p90_abs_corr = abs_corr[p90_idx];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((corr + corr.transpose()) / 2.0);
  const Eigen::VectorXd lambda = eig.eigenvalues();
  summary.pc1_share = lambda.maxCoeff() / lambda.sum();
  summary.effective_independent_count =
      summary.mean_abs_corr > 0.0 ? 1.0 / summary.mean_abs_corr : static_cast<double>(n);
  return summary;
}

}  // namespace tradebench
