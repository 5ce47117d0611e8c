#include "protocolnet/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "protocolnet/csv.hpp"
#include "protocolnet/router.hpp"

namespace protocolnet {

EvalRecord make_record(std::string order_id, const Eigen::Ref<const Eigen::VectorXd>& logits, std::size_t true_index) {
  const auto n = static_cast<std::size_t>(logits.size());
  if (true_index >= n) throw Error(Errc::LabelOutOfRange, "true label index outside the score vector");
  EvalRecord r;
  r.order_id = std::move(order_id);
  r.true_index = true_index;
  r.logits = logits;
  r.normalized = normalize_scores(logits);
  r.delta = compute_delta(r.normalized);
  const auto order = rank_order(logits);
  r.predicted_index = order.front();
  r.rank = static_cast<std::size_t>(std::find(order.begin(), order.end(), true_index) - order.begin()) + 1;
  r.percentile = percentile_of_rank(r.rank, n);
  return r;
}

std::vector<EvalRecord> evaluate(const MlpModel& model, const std::vector<Order>& test_orders,
                                 const ProtocolHierarchy& hierarchy, Level level) {
  if (model.labels != hierarchy.labels(level)) {
    throw Error(Errc::LabelSpaceMismatch, "model labels differ from the " + std::string(level_name(level)) +
                                              " labels of the hierarchy");
  }
  const auto truth = label_indices(test_orders, model.labels);
  const auto logits = infer_logits(model, encode_orders(test_orders, model.vocabulary)).cast<double>().eval();
  std::vector<EvalRecord> records;
  records.reserve(test_orders.size());
  for (std::size_t i = 0; i < test_orders.size(); ++i) {
    records.push_back(make_record(test_orders[i].id, logits.row(static_cast<Eigen::Index>(i)).transpose(), truth[i]));
  }
  return records;
}

double top_k_accuracy(const std::vector<EvalRecord>& records, std::size_t k) {
  if (records.empty()) throw Error(Errc::EmptyRecords, "no records");
  const auto n = static_cast<std::size_t>(records.front().logits.size());
  if (k < 1 || k > n) throw Error(Errc::InvalidK, "k must lie in [1, " + std::to_string(n) + "]");
  const auto hits = std::count_if(records.begin(), records.end(), [k](const EvalRecord& r) { return r.rank <= k; });
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double percentile_of_rank(std::size_t rank, std::size_t n) {
  if (n < 2 || rank < 1 || rank > n) {
    throw Error(Errc::InvalidRank, "rank " + std::to_string(rank) + " of " + std::to_string(n));
  }
  return 100.0 * static_cast<double>(n - rank) / static_cast<double>(n - 1);
}

std::vector<double> uniform_edges(double low, double high, std::size_t bins) {
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = low + (high - low) * static_cast<double>(i) / static_cast<double>(bins);
  }
  edges.back() = high;
  return edges;
}

Histogram histogram(const std::vector<double>& values, const std::vector<double>& edges) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw Error(Errc::BadBinEdges, "bin edges must be strictly increasing with at least one bin");
  }
  Histogram h{edges, std::vector<std::size_t>(edges.size() - 1, 0)};
  for (double v : values) {
    if (v < edges.front() || v > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    auto bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    h.counts[std::min(bin, h.counts.size() - 1)]++;
  }
  return h;
}

DeltaHistograms delta_histograms(const std::vector<EvalRecord>& records, const std::vector<double>& edges) {
  if (edges.size() < 2 || edges.front() > 0.0 || edges.back() < 1.0) {
    throw Error(Errc::BadBinEdges, "delta bin edges must cover [0, 1]");
  }
  std::vector<double> plus;
  std::vector<double> minus;
  for (const auto& r : records) (r.rank == 1 ? plus : minus).push_back(r.delta);
  return {histogram(plus, edges), histogram(minus, edges)};
}

std::vector<SweepRow> threshold_sweep(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds,
                                      std::size_t k) {
  if (records.empty()) throw Error(Errc::EmptyRecords, "threshold sweep needs at least one record");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw Error(Errc::ValidationFailure, "thresholds must be sorted ascending");
  }
  const auto n = static_cast<std::size_t>(records.front().logits.size());
  if (k < 1 || k > n) throw Error(Errc::InvalidK, "k must lie in [1, " + std::to_string(n) + "]");

  std::vector<SweepRow> rows;
  rows.reserve(thresholds.size());
  for (double t : thresholds) {
    std::size_t ap = 0, ap_correct = 0, cds = 0, cds_hit = 0;
    for (const auto& r : records) {
      if (r.delta >= t) {
        ++ap;
        ap_correct += r.rank == 1;
      } else {
        ++cds;
        cds_hit += r.rank <= k;
      }
    }
    SweepRow row;
    row.threshold = t;
    row.ap_fraction = static_cast<double>(ap) / static_cast<double>(records.size());
    if (ap) row.ap_accuracy = static_cast<double>(ap_correct) / static_cast<double>(ap);
    if (cds) row.cds_hit_rate = static_cast<double>(cds_hit) / static_cast<double>(cds);
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> default_threshold_grid() {
  constexpr std::size_t kPoints = 50;
  std::vector<double> grid(kPoints);
  for (std::size_t i = 0; i < kPoints; ++i) {
    grid[i] = std::pow(10.0, -4.0 + 4.0 * static_cast<double>(i) / static_cast<double>(kPoints - 1));
  }
  grid.front() = 1e-4;
  grid.back() = 1.0;
  return grid;
}

Eigen::MatrixXi confusion_matrix(const std::vector<EvalRecord>& records, std::size_t n_classes) {
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(n_classes), static_cast<Eigen::Index>(n_classes));
  for (const auto& r : records) {
    if (r.true_index >= n_classes || r.predicted_index >= n_classes) {
      throw Error(Errc::LabelOutOfRange, "record index outside confusion matrix");
    }
    c(static_cast<Eigen::Index>(r.true_index), static_cast<Eigen::Index>(r.predicted_index))++;
  }
  return c;
}

double pair_confusion_ratio(const Eigen::MatrixXi& confusion, std::size_t a, std::size_t b) {
  const auto ia = static_cast<Eigen::Index>(a);
  const auto ib = static_cast<Eigen::Index>(b);
  const double pair = confusion(ia, ib) + confusion(ib, ia);
  double worst_other = 0.0;
  for (Eigen::Index c = 0; c < confusion.rows(); ++c) {
    if (c == ia || c == ib) continue;
    worst_other = std::max<double>(worst_other, confusion(ia, c) + confusion(c, ia));
    worst_other = std::max<double>(worst_other, confusion(ib, c) + confusion(c, ib));
  }
  if (worst_other == 0.0) return pair > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return pair / worst_other;
}

double coarsened_top1(const std::vector<EvalRecord>& records, const std::vector<std::size_t>& coarse_of) {
  if (records.empty()) throw Error(Errc::EmptyRecords, "no records");
  std::size_t hits = 0;
  for (const auto& r : records) hits += coarse_of.at(r.predicted_index) == coarse_of.at(r.true_index);
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

EvalReport build_report(const std::vector<EvalRecord>& records, std::size_t n_classes, const ReportOptions& options) {
  EvalReport report;
  std::vector<double> percentiles;
  for (const auto& r : records) percentiles.push_back(r.percentile);
  report.percentile_hist = histogram(percentiles, options.percentile_edges);
  const auto deltas = delta_histograms(records, options.delta_edges);
  report.delta_edges = options.delta_edges;
  report.delta_ap_plus = deltas.ap_plus.counts;
  report.delta_ap_minus = deltas.ap_minus.counts;
  if (!records.empty()) {
    for (std::size_t k = 1; k <= std::min(n_classes, options.max_k); ++k) {
      report.accuracy_by_k.emplace_back(k, top_k_accuracy(records, k));
    }
    report.sweep = threshold_sweep(records, options.thresholds, std::min(options.cds_k, n_classes));
  }
  return report;
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

namespace {

using nlohmann::json;

std::string optional_text(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }
json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_csv(const std::filesystem::path& path, const csv::Row& header, const std::vector<csv::Row>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  csv::write_row(out, header);
  for (const auto& row : rows) csv::write_row(out, row);
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

}  // namespace

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& sweep) {
  std::vector<csv::Row> rows;
  for (const auto& r : sweep) {
    rows.push_back({format_double(r.threshold), format_double(r.ap_fraction), optional_text(r.ap_accuracy),
                    optional_text(r.cds_hit_rate)});
  }
  write_csv(path, {"threshold", "ap_fraction", "ap_accuracy", "cds_hit_rate"}, rows);
}

std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  json j;
  std::vector<csv::Row> rows;
  j["accuracy_by_k"] = json::array();
  for (const auto& [k, acc] : report.accuracy_by_k) {
    rows.push_back({std::to_string(k), format_double(acc)});
    j["accuracy_by_k"].push_back({{"k", k}, {"accuracy", acc}});
  }
  write_csv(dir / "accuracy_by_k.csv", {"k", "accuracy"}, rows);

  rows.clear();
  j["percentile_hist"] = json::array();
  for (std::size_t i = 0; i < report.percentile_hist.counts.size(); ++i) {
    const auto lo = report.percentile_hist.edges[i], hi = report.percentile_hist.edges[i + 1];
    const auto count = report.percentile_hist.counts[i];
    rows.push_back({format_double(lo), format_double(hi), std::to_string(count)});
    j["percentile_hist"].push_back({{"bin_low", lo}, {"bin_high", hi}, {"count", count}});
  }
  write_csv(dir / "percentile_hist.csv", {"bin_low", "bin_high", "count"}, rows);

  rows.clear();
  j["delta_hist"] = json::array();
  for (std::size_t i = 0; i < report.delta_ap_plus.size(); ++i) {
    const auto lo = report.delta_edges[i], hi = report.delta_edges[i + 1];
    rows.push_back({format_double(lo), format_double(hi), std::to_string(report.delta_ap_plus[i]),
                    std::to_string(report.delta_ap_minus[i])});
    j["delta_hist"].push_back(
        {{"bin_low", lo}, {"bin_high", hi}, {"ap_plus", report.delta_ap_plus[i]}, {"ap_minus", report.delta_ap_minus[i]}});
  }
  write_csv(dir / "delta_hist.csv", {"bin_low", "bin_high", "ap_plus", "ap_minus"}, rows);

  write_sweep_csv(dir / "threshold_sweep.csv", report.sweep);
  j["threshold_sweep"] = json::array();
  for (const auto& r : report.sweep) {
    j["threshold_sweep"].push_back({{"threshold", r.threshold},
                                    {"ap_fraction", r.ap_fraction},
                                    {"ap_accuracy", optional_json(r.ap_accuracy)},
                                    {"cds_hit_rate", optional_json(r.cds_hit_rate)}});
  }

  const auto json_path = dir / "report.json";
  std::ofstream out(json_path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + json_path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::IoFailure, "write failed for " + json_path.string());

  return {dir / "accuracy_by_k.csv", dir / "percentile_hist.csv", dir / "delta_hist.csv", dir / "threshold_sweep.csv",
          json_path};
}

}  // namespace protocolnet
