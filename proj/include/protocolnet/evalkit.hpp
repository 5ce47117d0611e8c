#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "protocolnet/model.hpp"
#include "protocolnet/protocols.hpp"

namespace protocolnet {

struct EvalRecord {
  std::string order_id;
  std::size_t true_index = 0;
  std::size_t predicted_index = 0;  // top-1
  Eigen::VectorXd logits;
  Eigen::VectorXd normalized;
  double delta = 0.0;
  std::size_t rank = 1;     // of the true label, 1 = top
  double percentile = 100;  // of the true label
};

/// Record for one score vector; rank uses the router's tie rule (score desc, index asc).
EvalRecord make_record(std::string order_id, const Eigen::Ref<const Eigen::VectorXd>& logits, std::size_t true_index);

/// Runs the model over the test orders. Throws LabelSpaceMismatch unless the model's
/// labels equal the hierarchy labels at `level`.
std::vector<EvalRecord> evaluate(const MlpModel& model, const std::vector<Order>& test_orders,
                                 const ProtocolHierarchy& hierarchy, Level level);

double top_k_accuracy(const std::vector<EvalRecord>& records, std::size_t k);

/// 100 * (n - rank) / (n - 1). Throws InvalidRank.
double percentile_of_rank(std::size_t rank, std::size_t n);

struct Histogram {
  std::vector<double> edges;          // size = bins + 1
  std::vector<std::size_t> counts;    // size = bins
};

/// Bins [e_i, e_{i+1}); the last bin also takes its upper edge.
std::vector<double> uniform_edges(double low, double high, std::size_t bins);
Histogram histogram(const std::vector<double>& values, const std::vector<double>& edges);

struct DeltaHistograms {
  Histogram ap_plus;   // top-1 correct
  Histogram ap_minus;  // top-1 wrong
};

/// Edges must be strictly increasing and cover [0, 1]; throws BadBinEdges.
DeltaHistograms delta_histograms(const std::vector<EvalRecord>& records, const std::vector<double>& edges);

struct SweepRow {
  double threshold = 0.0;
  double ap_fraction = 0.0;
  std::optional<double> ap_accuracy;   // absent when no record is routed to AP
  std::optional<double> cds_hit_rate;  // absent when no record is routed to CDS
};

/// Thresholds must be ascending. Throws EmptyRecords.
std::vector<SweepRow> threshold_sweep(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds,
                                      std::size_t k);

/// 50 log-spaced thresholds over [1e-4, 1].
std::vector<double> default_threshold_grid();

/// Rows = true class, columns = predicted top-1 class.
Eigen::MatrixXi confusion_matrix(const std::vector<EvalRecord>& records, std::size_t n_classes);

/// Confusion between two classes (both directions) divided by the largest confusion
/// either member has with any single other class. +inf when only the pair is confused.
double pair_confusion_ratio(const Eigen::MatrixXi& confusion, std::size_t a, std::size_t b);

/// Top-1 accuracy after mapping predicted and true indices through `coarse_of`.
double coarsened_top1(const std::vector<EvalRecord>& records, const std::vector<std::size_t>& coarse_of);

struct EvalReport {
  std::vector<std::pair<std::size_t, double>> accuracy_by_k;
  Histogram percentile_hist;
  std::vector<double> delta_edges;
  std::vector<std::size_t> delta_ap_plus;
  std::vector<std::size_t> delta_ap_minus;
  std::vector<SweepRow> sweep;
};

struct ReportOptions {
  std::vector<double> delta_edges = uniform_edges(0.0, 1.0, 50);
  std::vector<double> percentile_edges = uniform_edges(0.0, 100.0, 20);
  std::vector<double> thresholds = default_threshold_grid();
  std::size_t cds_k = 5;
  std::size_t max_k = 10;
};

EvalReport build_report(const std::vector<EvalRecord>& records, std::size_t n_classes,
                        const ReportOptions& options = {});

/// Writes accuracy_by_k.csv, percentile_hist.csv, delta_hist.csv, threshold_sweep.csv
/// and report.json into `dir`. Returns the files written.
std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& dir);

/// threshold_sweep.csv; absent accuracies are empty cells.
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& sweep);

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double value);

}  // namespace protocolnet
