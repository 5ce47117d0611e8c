#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "protocolnet/csv.hpp"
#include "protocolnet/evalkit.hpp"

using namespace protocolnet;

namespace {

// Logits 5,4,3,2,1: true index r-1 sits at rank r.
EvalRecord ranked(std::size_t rank, std::size_t n = 5) {
  Eigen::VectorXd logits(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) logits[static_cast<Eigen::Index>(i)] = static_cast<double>(n - i);
  return make_record("r" + std::to_string(rank), logits, rank - 1);
}

// Logits [1+d, 1-d, 0] normalize to [(1+d)/2, (1-d)/2, 0], so delta is d.
EvalRecord with_delta(double delta, bool correct) {
  const double a = 1.0 + delta, b = 1.0 - delta;
  return make_record("d", Eigen::Vector3d(a, b, 0.0), correct ? 0 : 1);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("make_record") {
  const auto r = ranked(3);
  CHECK(r.rank == 3);
  CHECK(r.predicted_index == 0);
  CHECK(r.percentile == 50.0);
  CHECK(r.delta == doctest::Approx(0.1));  // (4-3)/10
  // Ties resolve by index: true index 2 ties with index 1 and ranks behind it.
  const auto tie = make_record("t", Eigen::Vector3d(1, 2, 2), 2);
  CHECK(tie.rank == 2);
  CHECK(tie.predicted_index == 1);
  CHECK_THROWS_AS(make_record("x", Eigen::Vector3d(1, 2, 3), 3), Error);
}

TEST_CASE("top_k_accuracy") {
  const std::vector<EvalRecord> records = {ranked(1), ranked(2), ranked(3), ranked(5)};
  CHECK(top_k_accuracy(records, 1) == 0.25);
  CHECK(top_k_accuracy(records, 2) == 0.5);
  CHECK(top_k_accuracy(records, 4) == 0.75);
  CHECK(top_k_accuracy(records, 5) == 1.0);
  CHECK_THROWS_AS(top_k_accuracy(records, 0), Error);
  CHECK_THROWS_AS(top_k_accuracy(records, 6), Error);
  try {
    top_k_accuracy({}, 1);
    FAIL("expected EmptyRecords");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyRecords);
  }
}

TEST_CASE("top-k is non-decreasing on random records") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> label(0, 11);
  std::vector<EvalRecord> records;
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd v(12);
    for (auto& x : v) x = normal(rng);
    records.push_back(make_record("r", v, label(rng)));
  }
  double prev = 0.0;
  for (std::size_t k = 1; k <= 12; ++k) {
    const double acc = top_k_accuracy(records, k);
    CHECK(acc >= prev);
    prev = acc;
  }
  CHECK(prev == 1.0);
}

TEST_CASE("percentile_of_rank") {
  CHECK(percentile_of_rank(1, 7) == 100.0);
  CHECK(percentile_of_rank(7, 7) == 0.0);
  CHECK(percentile_of_rank(3, 5) == 50.0);
  CHECK(percentile_of_rank(2, 2) == 0.0);
  for (auto [r, n] : {std::pair<std::size_t, std::size_t>{0, 5}, {6, 5}, {1, 1}}) {
    try {
      percentile_of_rank(r, n);
      FAIL("expected InvalidRank");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InvalidRank);
    }
  }
}

TEST_CASE("histograms") {
  const auto h = histogram({0.1, 0.1, 0.9, 1.0, 0.5, -0.1, 1.1}, {0.0, 0.5, 1.0});
  CHECK(h.counts == std::vector<std::size_t>{2, 3});
  CHECK_THROWS_AS(histogram({}, {0.0}), Error);
  CHECK_THROWS_AS(histogram({}, {0.0, 0.5, 0.5}), Error);
  CHECK_THROWS_AS(histogram({}, {1.0, 0.5}), Error);

  const auto edges = uniform_edges(0.0, 100.0, 20);
  CHECK(edges.size() == 21);
  CHECK(edges[1] == 5.0);
  CHECK(edges.back() == 100.0);

  const std::vector<EvalRecord> records = {with_delta(0.1, true), with_delta(0.1, false), with_delta(0.9, true)};
  const auto d = delta_histograms(records, {0.0, 0.5, 1.0});
  CHECK(d.ap_plus.counts == std::vector<std::size_t>{1, 1});
  CHECK(d.ap_minus.counts == std::vector<std::size_t>{1, 0});
  try {
    delta_histograms(records, {0.0, 0.5});
    FAIL("expected BadBinEdges");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BadBinEdges);
  }
}

TEST_CASE("threshold_sweep") {
  const std::vector<EvalRecord> records = {with_delta(0.1, true), with_delta(0.3, false), with_delta(0.6, true),
                                           with_delta(0.9, true)};
  const auto rows = threshold_sweep(records, {0.0, 0.3, 0.7, 1.0, 1.5}, 1);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].ap_fraction == 1.0);
  CHECK(*rows[0].ap_accuracy == 0.75);
  CHECK_FALSE(rows[0].cds_hit_rate.has_value());
  // delta 0.3 computed in floating point may land a hair under 0.3; only count clean cases.
  CHECK(rows[2].ap_fraction == 0.25);
  CHECK(*rows[2].ap_accuracy == 1.0);
  CHECK(*rows[2].cds_hit_rate == doctest::Approx(2.0 / 3));
  CHECK(rows[4].ap_fraction == 0.0);
  CHECK_FALSE(rows[4].ap_accuracy.has_value());
  CHECK(*rows[4].cds_hit_rate == 0.75);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].ap_fraction <= rows[i - 1].ap_fraction);

  CHECK_THROWS_AS(threshold_sweep(records, {0.5, 0.1}, 1), Error);
  CHECK_THROWS_AS(threshold_sweep({}, {0.5}, 1), Error);

  const auto grid = default_threshold_grid();
  CHECK(grid.size() == 50);
  CHECK(grid.front() == 1e-4);
  CHECK(grid.back() == 1.0);
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  CHECK(grid[1] / grid[0] == doctest::Approx(std::pow(1e4, 1.0 / 49)));
}

TEST_CASE("confusion and coarsening") {
  std::vector<EvalRecord> records;
  auto add = [&](std::size_t truth, std::size_t pred, int times) {
    for (int i = 0; i < times; ++i) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(4);
      v[static_cast<Eigen::Index>(pred)] = 1.0;
      records.push_back(make_record("c", v, truth));
    }
  };
  add(0, 0, 5);
  add(0, 1, 3);
  add(1, 0, 2);
  add(2, 0, 1);
  add(3, 3, 4);
  const auto c = confusion_matrix(records, 4);
  CHECK(c(0, 1) == 3);
  CHECK(c(1, 0) == 2);
  CHECK(c.sum() == static_cast<int>(records.size()));
  CHECK(pair_confusion_ratio(c, 0, 1) == 5.0);
  CHECK(pair_confusion_ratio(c, 2, 3) == 0.0);

  // 0,1 -> A ; 2,3 -> B
  const std::vector<std::size_t> coarse = {0, 0, 1, 1};
  const double local = top_k_accuracy(records, 1);
  const double acr = coarsened_top1(records, coarse);
  CHECK(local == doctest::Approx(9.0 / 15));
  CHECK(acr == doctest::Approx(14.0 / 15));
  CHECK(acr >= local);
}

TEST_CASE("coarsening never lowers top-1 on random prediction sets") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> cls(0, 9);
  std::uniform_int_distribution<std::size_t> group(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> coarse(10);
    for (auto& g : coarse) g = group(rng);
    std::vector<std::size_t> coarser(4);
    for (auto& g : coarser) g = group(rng) % 2;
    std::vector<std::size_t> composed(10);
    for (std::size_t i = 0; i < 10; ++i) composed[i] = coarser[coarse[i]];
    std::vector<EvalRecord> records;
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(10);
      v[static_cast<Eigen::Index>(cls(rng))] = 1.0;
      records.push_back(make_record("r", v, cls(rng)));
    }
    const double a = top_k_accuracy(records, 1), b = coarsened_top1(records, coarse),
                 c = coarsened_top1(records, composed);
    CHECK(b >= a);
    CHECK(c >= b);
  }
}

TEST_CASE("emit_report round trip") {
  std::vector<EvalRecord> records;
  for (std::size_t r : {1, 1, 2, 3, 5}) records.push_back(ranked(r));
  const auto report = build_report(records, 5);
  CHECK(report.accuracy_by_k.size() == 5);
  CHECK(report.percentile_hist.counts.size() == 20);
  CHECK(report.delta_ap_plus.size() == 50);
  CHECK(report.sweep.size() == 50);

  const auto dir = std::filesystem::temp_directory_path() / "evalkit_report";
  std::filesystem::remove_all(dir);
  const auto files = emit_report(report, dir);
  CHECK(files.size() == 5);
  for (const auto& f : files) CHECK(std::filesystem::exists(f));

  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  const auto acc = csv::parse(slurp(dir / "accuracy_by_k.csv"));
  REQUIRE(acc.size() == 6);
  CHECK(acc[0].fields == csv::Row{"k", "accuracy"});
  for (std::size_t i = 1; i < acc.size(); ++i) {
    CHECK(std::stoul(acc[i].fields[0]) == j["accuracy_by_k"][i - 1]["k"].get<std::size_t>());
    CHECK(std::stod(acc[i].fields[1]) == j["accuracy_by_k"][i - 1]["accuracy"].get<double>());
  }
  CHECK(std::stod(acc[2].fields[1]) == 0.6);

  const auto sweep = csv::parse(slurp(dir / "threshold_sweep.csv"));
  REQUIRE(sweep.size() == 51);
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    const auto& row = j["threshold_sweep"][i - 1];
    CHECK(std::stod(sweep[i].fields[0]) == row["threshold"].get<double>());
    if (row["ap_accuracy"].is_null()) {
      CHECK(sweep[i].fields[2].empty());
    } else {
      CHECK(std::stod(sweep[i].fields[2]) == row["ap_accuracy"].get<double>());
    }
    if (row["cds_hit_rate"].is_null()) CHECK(sweep[i].fields[3].empty());
  }
  // The largest threshold (1.0) routes everything to CDS: AP accuracy is null, never 0.
  CHECK(j["threshold_sweep"].back()["ap_accuracy"].is_null());

  std::size_t total = 0;
  for (const auto& bin : j["percentile_hist"]) total += bin["count"].get<std::size_t>();
  CHECK(total == records.size());
}

TEST_CASE("empty report writes header-only files") {
  const auto report = build_report({}, 5);
  const auto dir = std::filesystem::temp_directory_path() / "evalkit_empty";
  std::filesystem::remove_all(dir);
  emit_report(report, dir);
  CHECK(csv::parse(slurp(dir / "accuracy_by_k.csv")).size() == 1);
  CHECK(csv::parse(slurp(dir / "threshold_sweep.csv")).size() == 1);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j["accuracy_by_k"].empty());
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3, 1e-4, 73466.666666666672}) CHECK(std::stod(format_double(v)) == v);
}
