#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tradebench/common.hpp"
#include "tradebench/dataio.hpp"

using namespace tradebench;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path path = fs::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path;
}

MarketPanel synthetic(std::uint64_t seed, std::size_t symbols = 3, std::size_t steps = 80,
                      VolState vol = VolState::medium) {
  RegimeSpec spec;
  spec.volatility = vol;
  spec.seed = seed;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < symbols; ++i) names.push_back("S" + std::to_string(i));
  return generate_market(spec, names, steps);
}

}  // namespace

TEST_CASE("load_ohlcv parses a small aligned csv") {
  const auto path = temp_file("tb_panel.csv",
                              "step,symbol,open,high,low,close,volume\n"
                              "0,BBB,10,11,9,10.5,100\n"
                              "1,BBB,10.5,11,10,10.8,110\n"
                              "2,BBB,10.8,11.5,10.2,11,105\n"
                              "0,AAA,20,21,19,20.5,200\n"
                              "1,AAA,20.5,21,20,20.8,210\n"
                              "2,AAA,20.8,21.5,20.2,21,205\n");
  const auto panel = load_ohlcv(path, PanelFormat::csv);
  REQUIRE(panel.symbols.size() == 2);
  CHECK(panel.symbols[0] == "AAA");  // lexicographic order
  CHECK(panel.symbols[1] == "BBB");
  CHECK(panel.step_count() == 3);
  CHECK(panel.aligned());
  CHECK_FALSE(panel.manifest.content_hash.empty());
}

TEST_CASE("load_ohlcv reports invalid bars with the offending location") {
  const auto path = temp_file("tb_badbar.csv",
                              "step,symbol,open,high,low,close,volume\n"
                              "0,AAA,10,9,11,10.5,100\n"  // high < low
                              "1,AAA,10,11,9,10.5,100\n");
  CHECK_THROWS_WITH_AS(load_ohlcv(path, PanelFormat::csv), doctest::Contains("invalid-bar"), Error);
}

TEST_CASE("load_ohlcv rejects unparseable rows with row location") {
  const auto path = temp_file("tb_badrow.csv", "0,AAA,10,11\n");
  try {
    load_ohlcv(path, PanelFormat::csv);
    FAIL("expected malformed-input");
  } catch (const Error& e) {
    CHECK(e.kind() == "malformed-input");
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
  }
}

TEST_CASE("content hash is stable across loads of the same file") {
  const auto path = temp_file("tb_hash.csv",
                              "step,symbol,open,high,low,close,volume\n"
                              "0,AAA,10,11,9,10.5,100\n"
                              "1,AAA,10.5,11,10,10.8,110\n");
  const auto a = load_ohlcv(path, PanelFormat::csv);
  const auto b = load_ohlcv(path, PanelFormat::csv);
  CHECK(a.manifest.content_hash == b.manifest.content_hash);
}

TEST_CASE("json round-trip preserves the panel") {
  const auto panel = synthetic(3, 2, 10);
  std::ostringstream json_out;
  write_panel_json(panel, json_out);
  const auto path = temp_file("tb_panel.json", json_out.str());
  const auto loaded = load_ohlcv(path, PanelFormat::json);
  REQUIRE(loaded.symbols == panel.symbols);
  REQUIRE(loaded.step_count() == panel.step_count());
  for (std::size_t s = 0; s < panel.bars.size(); ++s) {
    for (std::size_t t = 0; t < panel.bars[s].size(); ++t) {
      CHECK(loaded.bars[s][t].close == doctest::Approx(panel.bars[s][t].close).epsilon(1e-12));
    }
  }
}

TEST_CASE("align keeps only shared steps and is idempotent") {
  MarketPanel ragged;
  ragged.symbols = {"A", "B"};
  ragged.bars.resize(2);
  for (int t = 0; t <= 9; ++t) ragged.bars[0].push_back({t, 10, 11, 9, 10, 1});
  for (int t = 5; t <= 14; ++t) ragged.bars[1].push_back({t, 20, 21, 19, 20, 1});

  const auto aligned = align_panels(ragged);
  CHECK(aligned.step_count() == 5);
  CHECK(aligned.bars[0].front().step == 5);
  CHECK(aligned.aligned());

  const auto twice = align_panels(aligned);
  CHECK(twice.step_count() == aligned.step_count());
  for (std::size_t t = 0; t < aligned.bars[0].size(); ++t) {
    CHECK(twice.bars[0][t].step == aligned.bars[0][t].step);
  }
}

TEST_CASE("align of an already aligned panel is the identity") {
  const auto panel = synthetic(9, 2, 12);
  const auto aligned = align_panels(panel);
  CHECK(aligned.step_count() == panel.step_count());
}

TEST_CASE("align with disjoint steps raises no-overlap") {
  MarketPanel ragged;
  ragged.symbols = {"A", "B"};
  ragged.bars.resize(2);
  for (int t = 0; t < 3; ++t) ragged.bars[0].push_back({t, 1, 2, 0.5, 1, 1});
  for (int t = 10; t < 13; ++t) ragged.bars[1].push_back({t, 1, 2, 0.5, 1, 1});
  CHECK_THROWS_WITH_AS(align_panels(ragged), doctest::Contains("no-overlap"), Error);
}

TEST_CASE("inject_noise: epsilon 0 is the identity, fixed seed reproduces bytes") {
  const auto panel = synthetic(5);
  const auto zero = inject_noise(panel, 0.0, 99);
  for (std::size_t s = 0; s < panel.bars.size(); ++s) {
    for (std::size_t t = 0; t < panel.bars[s].size(); ++t) {
      CHECK(zero.bars[s][t].close == panel.bars[s][t].close);
      CHECK(zero.bars[s][t].high == panel.bars[s][t].high);
    }
  }
  const auto a = inject_noise(panel, 0.2, 99);
  const auto b = inject_noise(panel, 0.2, 99);
  for (std::size_t s = 0; s < panel.bars.size(); ++s) {
    for (std::size_t t = 0; t < panel.bars[s].size(); ++t) {
      CHECK(a.bars[s][t].close == b.bars[s][t].close);
      CHECK(a.bars[s][t].low == b.bars[s][t].low);
    }
  }
  CHECK_THROWS_WITH_AS(inject_noise(panel, -0.1, 1), doctest::Contains("invalid-noise"), Error);
}

TEST_CASE("inject_noise relative close perturbation matches epsilon") {
  // oracle: measure the (close' - close)/close distribution over 400 steps
  const auto panel = synthetic(21, 1, 400, VolState::calm);
  const auto noisy = inject_noise(panel, 0.05, 7);
  std::vector<double> rel;
  for (std::size_t t = 0; t < panel.bars[0].size(); ++t) {
    rel.push_back((noisy.bars[0][t].close - panel.bars[0][t].close) / panel.bars[0][t].close);
  }
  double mean = 0.0;
  for (double v : rel) mean += v;
  mean /= rel.size();
  double ss = 0.0;
  for (double v : rel) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (rel.size() - 1));
  CHECK(sd > 0.05 * 0.8);
  CHECK(sd < 0.05 * 1.2);
}

TEST_CASE("inject_noise never breaks bar invariants even at epsilon 0.2") {
  const auto noisy = inject_noise(synthetic(33, 3, 200, VolState::crisis), 0.2, 3);
  for (const auto& series : noisy.bars) {
    for (const auto& bar : series) CHECK(bar.valid());
  }
}

TEST_CASE("correlation summary: pair count, identical series, effective count arithmetic") {
  // 51 symbols -> 1275 unordered pairs
  {
    const auto panel = synthetic(3, 51, 40);
    const auto summary = correlation_summary(panel);
    CHECK(summary.n_pairs == 1275);
    CHECK(summary.pc1_share > 0.0);
    CHECK(summary.pc1_share <= 1.0);
  }
  // identical return series -> perfect correlation
  {
    auto panel = synthetic(4, 1, 30);
    panel.symbols.push_back("COPY");
    panel.bars.push_back(panel.bars[0]);
    const auto summary = correlation_summary(panel);
    CHECK(summary.mean_abs_corr == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(summary.pc1_share == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(summary.effective_independent_count == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("effective independent count formula reproduces the printed pair") {
  // mean |rho| 0.219 -> 4.566 +- 0.01
  CHECK(std::fabs(1.0 / 0.219 - 4.566) < 0.01);
}

TEST_CASE("correlation summary flags degenerate series by symbol") {
  MarketPanel panel;
  panel.symbols = {"FLAT", "OK"};
  panel.bars.resize(2);
  for (int t = 0; t < 10; ++t) {
    panel.bars[0].push_back({t, 10, 10, 10, 10, 1});
    const double c = 10 + 0.1 * ((t * 7) % 5);
    panel.bars[1].push_back({t, c, c + 1, c - 1, c, 1});
  }
  try {
    correlation_summary(panel);
    FAIL("expected degenerate-series");
  } catch (const Error& e) {
    CHECK(e.kind() == "degenerate-series");
    CHECK(std::string(e.what()).find("FLAT") != std::string::npos);
  }
}

TEST_CASE("correlation matrix eigenvalues are non-negative after symmetrization") {
  const auto panel = synthetic(8, 12, 60);
  const auto summary = correlation_summary(panel);
  // pc1_share computed from eigenvalues; bounded sanity
  CHECK(summary.pc1_share * static_cast<double>(summary.n_symbols) >= 1.0 - 1e-9);
  CHECK(summary.mean_abs_corr >= 0.0);
  CHECK(summary.mean_abs_corr <= 1.0);
  CHECK(summary.p90_abs_corr >= summary.mean_abs_corr * 0.5);
}

TEST_CASE("panel csv round-trips through the loader") {
  const auto panel = synthetic(14, 2, 20);
  std::ostringstream out;
  write_panel_csv(panel, out);
  const auto path = temp_file("tb_roundtrip.csv", out.str());
  const auto loaded = load_ohlcv(path, PanelFormat::csv);
  REQUIRE(loaded.step_count() == panel.step_count());
  for (std::size_t s = 0; s < panel.bars.size(); ++s) {
    for (std::size_t t = 0; t < panel.bars[s].size(); ++t) {
      CHECK(loaded.bars[s][t].close == panel.bars[s][t].close);
    }
  }
}
