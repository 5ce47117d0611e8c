#include "protocolnet/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "protocolnet/container.hpp"
#include "protocolnet/csv.hpp"
#include "protocolnet/digest.hpp"
#include "protocolnet/economics.hpp"
#include "protocolnet/evalkit.hpp"
#include "protocolnet/gradcheck.hpp"
#include "protocolnet/service.hpp"
#include "protocolnet/synthgen.hpp"
#include "protocolnet/version.hpp"

namespace protocolnet {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

/// Parameters, input digests and output digests of one invocation. No timestamps,
/// so identical runs write identical manifests.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  template <typename T>
  void param(const std::string& name, const T& value) {
    params_[name] = value;
  }
  void seed(std::uint64_t s) { seed_ = s; }
  void input(const fs::path& path) { inputs_[path.string()] = sha256_file(path); }
  void output(const fs::path& path) { outputs_[path.string()] = sha256_file(path); }

  void write(const fs::path& path) const {
    json j = {{"subcommand", subcommand_},
              {"parameters", params_},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"tool", kToolName},
              {"tool_version", kToolVersion}};
    j["seed"] = seed_ ? json(*seed_) : json(nullptr);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
    out << j.dump(2) << '\n';
  }

 private:
  std::string subcommand_;
  json params_ = json::object();
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  std::optional<std::uint64_t> seed_;
};

struct Options {
  std::string data;
  std::string hierarchy;
  std::string level = "local";
  std::uint64_t seed = 0;
  std::size_t epochs = 200;
  std::size_t batch_size = 24;
  double lr = 1e-4;
  double dropout = 0.5;
  double threshold = 0.1;
  std::size_t k = kDefaultTopK;
  std::string bind = "127.0.0.1:8080";
  std::string out;
  std::string spec = "demo";
  std::string role = "technologist";
  std::optional<double> ap_fraction;
  std::optional<double> fte_hours;
  std::optional<double> hourly_rate;
  std::optional<double> minutes;
  std::optional<double> volume;
  std::string model;
  std::string report;
  std::size_t input_dim = 50;
  std::size_t classes = 6;
  double tolerance = 1e-5;
  std::size_t check_batch = 4;
  double train_fraction = 0.7;
};

fs::path hierarchy_path(const Options& o) {
  return o.hierarchy.empty() ? fs::path(o.data) / "hierarchy.csv" : fs::path(o.hierarchy);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(Errc::FlagValidation, std::string(flag) + " is required");
}

/// Train/test orders for a data directory: explicit split files when present,
/// otherwise a stratified split of orders.csv.
SplitDataset load_split(const fs::path& dir, std::uint64_t seed, double fraction, RunManifest& manifest) {
  const auto train_csv = dir / "train.csv";
  const auto test_csv = dir / "test.csv";
  if (fs::exists(train_csv) && fs::exists(test_csv)) {
    manifest.input(train_csv);
    manifest.input(test_csv);
    SplitDataset split;
    split.train = load_orders(train_csv);
    split.test = load_orders(test_csv);
    split.split_seed = seed;
    split.train_fraction = fraction;
    return split;
  }
  const auto orders_csv = dir / "orders.csv";
  manifest.input(orders_csv);
  return stratified_split(load_orders(orders_csv), fraction, seed);
}

void validate_orders(const std::vector<Order>& orders, const ProtocolHierarchy& h) {
  for (const auto& o : orders) {
    if (!h.contains(o.protocol, Level::Local)) {
      throw Error(Errc::UnknownLabel, "order " + o.id + " has protocol '" + o.protocol + "' not in the hierarchy");
    }
  }
}

int cmd_synth(const Options& o) {
  require(o.out, "--out");
  RunManifest manifest("synth");
  SynthSpec spec;
  if (o.spec == "demo") {
    spec = default_demo_spec();
  } else {
    spec = load_synth_spec(o.spec);
    manifest.input(o.spec);
  }
  spec.seed = o.seed ? o.seed : spec.seed;
  manifest.param("spec", o.spec);
  manifest.seed(spec.seed);
  const auto corpus = generate(spec);
  write_corpus(corpus, o.out);
  manifest.output(fs::path(o.out) / "orders.csv");
  manifest.output(fs::path(o.out) / "hierarchy.csv");
  manifest.write(fs::path(o.out) / "manifest.json");
  std::cout << "wrote " << corpus.orders.size() << " orders, " << corpus.hierarchy.labels(Level::Local).size()
            << " local protocols to " << o.out << "\n";
  return 0;
}

int cmd_split(const Options& o) {
  require(o.data, "--data");
  const fs::path out = o.out.empty() ? fs::path(o.data) : fs::path(o.out);
  RunManifest manifest("split");
  const auto orders_csv = fs::path(o.data) / "orders.csv";
  manifest.input(orders_csv);
  manifest.seed(o.seed);
  manifest.param("train_fraction", o.train_fraction);
  const auto split = stratified_split(load_orders(orders_csv), o.train_fraction, o.seed);
  fs::create_directories(out);
  write_orders(out / "train.csv", split.train);
  write_orders(out / "test.csv", split.test);
  manifest.output(out / "train.csv");
  manifest.output(out / "test.csv");
  manifest.write(out / "split_manifest.json");
  std::cout << "train " << split.train.size() << ", test " << split.test.size() << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  require(o.data, "--data");
  require(o.out, "--out");
  const auto level = parse_level(o.level);
  RunManifest manifest("train");
  const auto hpath = hierarchy_path(o);
  const auto hierarchy = load_hierarchy(hpath);
  manifest.input(hpath);
  auto split = load_split(o.data, o.seed, o.train_fraction, manifest);
  validate_orders(split.train, hierarchy);

  ModelConfig config;
  config.seed = o.seed;
  config.epochs = o.epochs;
  config.batch_size = o.batch_size;
  config.learning_rate = o.lr;
  config.dropout_rate = o.dropout;
  const auto train_orders = relabel_dataset(split.train, hierarchy, level);
  const auto result = train_on_orders(train_orders, hierarchy.labels(level), config, level,
                                      [&](std::size_t epoch, double loss) {
                                        if ((epoch + 1) % 10 == 0 || epoch + 1 == config.epochs) {
                                          std::cerr << "epoch " << epoch + 1 << "/" << config.epochs << " loss "
                                                    << loss << "\n";
                                        }
                                      });
  save_model(result.model, o.out);

  manifest.seed(o.seed);
  manifest.param("level", std::string(level_name(level)));
  manifest.param("epochs", o.epochs);
  manifest.param("batch_size", o.batch_size);
  manifest.param("lr", o.lr);
  manifest.param("dropout", o.dropout);
  manifest.param("train_fraction", o.train_fraction);
  manifest.output(o.out);
  manifest.write(o.out + ".manifest.json");
  std::cout << "model " << sha256_file(o.out) << " (" << result.model.labels.size() << " classes, "
            << result.model.vocabulary.dimension() << " inputs)\n";
  return 0;
}

struct LoadedEval {
  MlpModel model;
  ProtocolHierarchy hierarchy;
  std::vector<EvalRecord> records;
};

LoadedEval load_and_evaluate(const Options& o, RunManifest& manifest) {
  require(o.model, "--model");
  require(o.data, "--data");
  LoadedEval e;
  e.model = load_model(o.model);
  manifest.input(o.model);
  const auto hpath = hierarchy_path(o);
  e.hierarchy = load_hierarchy(hpath);
  manifest.input(hpath);
  // Without explicit split files, re-derive the test split from the training seed.
  const auto split = load_split(o.data, e.model.config.seed, o.train_fraction, manifest);
  validate_orders(split.test, e.hierarchy);
  const auto test = relabel_dataset(split.test, e.hierarchy, e.model.level);
  e.records = evaluate(e.model, test, e.hierarchy, e.model.level);
  return e;
}

int cmd_eval(const Options& o) {
  const std::string dir = o.report.empty() ? o.out : o.report;
  require(dir, "--report");
  RunManifest manifest("eval");
  const auto e = load_and_evaluate(o, manifest);
  ReportOptions ro;
  ro.cds_k = std::min(o.k, e.model.labels.size());
  const auto report = build_report(e.records, e.model.labels.size(), ro);
  for (const auto& path : emit_report(report, dir)) manifest.output(path);
  manifest.param("k", o.k);
  manifest.write(fs::path(dir) / "manifest.json");
  for (const auto& [k, acc] : report.accuracy_by_k) {
    if (k == 1 || k == 5 || k == 10) std::cout << "top-" << k << " accuracy " << format_double(acc) << "\n";
  }
  return 0;
}

EconomicParams economic_params(const Options& o) {
  auto p = EconomicParams::preset(o.role);
  if (o.hourly_rate) p.hourly_rate = *o.hourly_rate;
  if (o.minutes) p.minutes_per_exam = *o.minutes;
  if (o.volume) p.annual_volume = *o.volume;
  if (o.fte_hours) p.fte_hours_per_year = *o.fte_hours;
  p.validate();
  return p;
}

int cmd_sweep(const Options& o) {
  require(o.out, "--out");
  RunManifest manifest("sweep");
  const auto e = load_and_evaluate(o, manifest);
  const auto sweep = threshold_sweep(e.records, default_threshold_grid(), std::min(o.k, e.model.labels.size()));
  fs::create_directories(o.out);
  const auto sweep_csv = fs::path(o.out) / "threshold_sweep.csv";
  const auto econ_csv = fs::path(o.out) / "economics.csv";
  write_sweep_csv(sweep_csv, sweep);
  write_savings_csv(econ_csv, savings_curve(sweep, economic_params(o)));
  manifest.param("k", o.k);
  manifest.param("role", o.role);
  manifest.output(sweep_csv);
  manifest.output(econ_csv);
  manifest.write(fs::path(o.out) / "manifest.json");
  std::cout << "wrote " << sweep.size() << " thresholds to " << sweep_csv.string() << "\n";
  return 0;
}

std::vector<SweepRow> read_sweep_csv(const fs::path& path) {
  const auto records = csv::read_file(path);
  if (records.empty() || records.front().fields.size() < 2 || records.front().fields[0] != "threshold" ||
      records.front().fields[1] != "ap_fraction") {
    throw Error(Errc::MissingColumn, path.string() + ": expected threshold,ap_fraction,... header");
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    try {
      SweepRow row;
      row.threshold = std::stod(f.at(0));
      row.ap_fraction = std::stod(f.at(1));
      rows.push_back(row);
    } catch (const std::exception&) {
      throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(records[i].line) + ": bad number");
    }
  }
  return rows;
}

int cmd_econ(const Options& o) {
  const auto params = economic_params(o);
  if (o.ap_fraction) {
    const auto savings = annual_savings(*o.ap_fraction, params);
    std::cout << savings.to_string() << "\n";
    std::cerr << "fte " << format_double(fte_saved(*o.ap_fraction, params)) << "\n";
    return 0;
  }
  require(o.data, "--ap-fraction or --data");
  require(o.out, "--out");
  RunManifest manifest("econ");
  fs::path sweep_csv = o.data;
  if (fs::is_directory(sweep_csv)) sweep_csv /= "threshold_sweep.csv";
  manifest.input(sweep_csv);
  manifest.param("role", o.role);
  manifest.param("hourly_rate", params.hourly_rate);
  manifest.param("minutes_per_exam", params.minutes_per_exam);
  manifest.param("annual_volume", params.annual_volume);
  manifest.param("fte_hours_per_year", params.fte_hours_per_year);
  fs::create_directories(o.out);
  const auto econ_csv = fs::path(o.out) / "economics.csv";
  write_savings_csv(econ_csv, savings_curve(read_sweep_csv(sweep_csv), params));
  manifest.output(econ_csv);
  manifest.write(fs::path(o.out) / "econ_manifest.json");
  return 0;
}

int cmd_serve(const Options& o) {
  require(o.model, "--model");
  if (o.k < 1 || o.k > kMaxTopK) throw Error(Errc::FlagValidation, "--k must lie in [1, 10]");
  const auto [host, port] = parse_bind_address(o.bind);

  MlpModel model;
  ProtocolHierarchy hierarchy;
  std::string digest;
  try {
    model = load_model(o.model);
    digest = sha256_file(o.model);
    hierarchy = load_hierarchy(o.hierarchy.empty() ? fs::path(o.data) / "hierarchy.csv" : fs::path(o.hierarchy));
  } catch (const Error& e) {
    throw Error(Errc::ModelLoadFailure, e.what());
  }
  const fs::path log_path = o.out.empty() ? fs::path(o.model + ".feedback.jsonl") : fs::path(o.out);
  RecommendService service(std::move(model), std::move(hierarchy), digest, log_path, {o.threshold, o.k});
  if (service.log().quarantined_bytes() > 0) {
    std::cerr << "quarantined " << service.log().quarantined_bytes() << " bytes from the feedback log tail\n";
  }

  // Signals are taken synchronously on this thread; server threads inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  HttpFrontend frontend(service);
  const int bound = frontend.bind(host, port);
  std::thread server([&] { frontend.run(); });
  std::cout << "listening on " << host << ":" << bound << std::endl;

  int received = 0;
  sigwait(&signals, &received);
  frontend.stop();
  server.join();
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const auto report = random_gradient_check(o.input_dim, o.classes, o.check_batch, o.seed, o.tolerance);
  for (const auto& t : report.tensors) {
    std::printf("%-14s max_rel_err %.3e  max_abs_err %.3e  %s\n", t.name.c_str(), t.max_relative_error,
                t.max_abs_error, t.passed ? "ok" : "FAIL");
  }
  std::printf("max relative error %.3e (tolerance %.1e): %s\n", report.max_relative_error, report.tolerance,
              report.passed ? "PASS" : "FAIL");
  return report.passed ? 0 : 2;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::FlagValidation:
    case Errc::UnknownSubcommand:
    case Errc::ValidationFailure:
    case Errc::InvalidConfig:
    case Errc::InvalidSpec:
    case Errc::InvalidK:
    case Errc::UnknownLevel:
    case Errc::OutOfRangeFraction:
    case Errc::MissingColumn:
    case Errc::MalformedRow:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Order-based MRI protocol recommendation: synthesize, train, evaluate, route, serve"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic order corpus");
  synth->add_option("--spec", o.spec, "\"demo\" or a JSON spec file");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--seed", o.seed, "Override the spec seed (0 keeps it)");

  auto* split = app.add_subcommand("split", "Stratified train/test split of <data>/orders.csv");
  split->add_option("--data", o.data)->required();
  split->add_option("--seed", o.seed);
  split->add_option("--out", o.out, "Output directory (default: --data)");

  auto* train = app.add_subcommand("train", "Train a classifier at one protocol level");
  train->add_option("--data", o.data)->required();
  train->add_option("--hierarchy", o.hierarchy, "Default: <data>/hierarchy.csv");
  train->add_option("--level", o.level)->check(CLI::IsMember({"local", "acr", "general"}));
  train->add_option("--seed", o.seed);
  train->add_option("--epochs", o.epochs);
  train->add_option("--batch-size", o.batch_size);
  train->add_option("--lr", o.lr);
  train->add_option("--out", o.out, "Model container path")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a model on the test split and emit report tables");
  eval->add_option("--model", o.model)->required();
  eval->add_option("--data", o.data)->required();
  eval->add_option("--hierarchy", o.hierarchy);
  eval->add_option("--k", o.k, "CDS list length for the sweep");
  eval->add_option("--report,--out", o.report, "Report directory");

  auto* sweep = app.add_subcommand("sweep", "Threshold sweep and savings curve");
  sweep->add_option("--model", o.model)->required();
  sweep->add_option("--data", o.data)->required();
  sweep->add_option("--hierarchy", o.hierarchy);
  sweep->add_option("--k", o.k);
  sweep->add_option("--role", o.role)->check(CLI::IsMember({"technologist", "radiologist"}));
  sweep->add_option("--fte-hours", o.fte_hours);
  sweep->add_option("--out", o.out)->required();

  auto* econ = app.add_subcommand("econ", "Annual savings for an AP fraction or a sweep table");
  econ->add_option("--role", o.role)->check(CLI::IsMember({"technologist", "radiologist"}));
  econ->add_option("--ap-fraction", o.ap_fraction);
  econ->add_option("--fte-hours", o.fte_hours);
  econ->add_option("--hourly-rate", o.hourly_rate);
  econ->add_option("--minutes", o.minutes, "Minutes to protocol one exam");
  econ->add_option("--volume", o.volume, "Annual exam volume");
  econ->add_option("--data", o.data, "threshold_sweep.csv or a directory holding it");
  econ->add_option("--out", o.out);

  auto* serve = app.add_subcommand("serve", "Serve recommendations over HTTP");
  serve->add_option("--model", o.model)->required();
  serve->add_option("--hierarchy", o.hierarchy);
  serve->add_option("--data", o.data, "Directory holding hierarchy.csv");
  serve->add_option("--bind", o.bind);
  serve->add_option("--threshold", o.threshold);
  serve->add_option("--k", o.k);
  serve->add_option("--out", o.out, "Feedback log (default: <model>.feedback.jsonl)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the backward pass");
  gradcheck->add_option("--seed", o.seed);
  gradcheck->add_option("--input-dim", o.input_dim);
  gradcheck->add_option("--classes", o.classes);
  gradcheck->add_option("--batch-size", o.check_batch);
  gradcheck->add_option("--tolerance", o.tolerance);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (split->parsed()) return cmd_split(o);
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (econ->parsed()) return cmd_econ(o);
    if (serve->parsed()) return cmd_serve(o);
    if (gradcheck->parsed()) return cmd_gradcheck(o);
    throw Error(Errc::UnknownSubcommand, "no subcommand");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace protocolnet
