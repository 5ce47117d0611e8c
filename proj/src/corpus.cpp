#include "protocolnet/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <unordered_map>

#include "protocolnet/csv.hpp"
#include "protocolnet/error.hpp"

namespace protocolnet {

namespace {

std::vector<std::string> sorted_union(const std::set<std::string>& tokens) {
  return {tokens.begin(), tokens.end()};
}

void encode_field(const std::vector<std::string>& tokens, const std::vector<std::string>& dictionary,
                  std::uint32_t offset, std::vector<std::uint32_t>& active, std::vector<std::string>* dropped) {
  for (const auto& token : tokens) {
    auto it = std::lower_bound(dictionary.begin(), dictionary.end(), token);
    if (it != dictionary.end() && *it == token) {
      active.push_back(offset + static_cast<std::uint32_t>(it - dictionary.begin()));
    } else if (dropped) {
      dropped->push_back(token);
    }
  }
}

}  // namespace

Vocabulary build_vocabulary(const std::vector<Order>& train_orders, const StopwordList& stopwords) {
  if (train_orders.empty()) throw Error(Errc::EmptyTrainingSet, "cannot build a vocabulary from zero orders");
  std::set<std::string> indication;
  std::set<std::string> diagnosis;
  for (const auto& order : train_orders) {
    for (auto& t : normalize_text(order.indication, stopwords)) indication.insert(std::move(t));
    for (auto& t : normalize_text(order.diagnosis, stopwords)) diagnosis.insert(std::move(t));
  }
  return {sorted_union(indication), sorted_union(diagnosis)};
}

FeatureVector encode_order(const Order& order, const Vocabulary& vocab, const StopwordList& stopwords,
                           EncodingEcho* echo) {
  FeatureVector fv;
  fv.dimension = vocab.dimension();
  encode_field(normalize_text(order.indication, stopwords), vocab.indication_tokens, 0, fv.active,
               echo ? &echo->indication_dropped : nullptr);
  encode_field(normalize_text(order.diagnosis, stopwords), vocab.diagnosis_tokens,
               static_cast<std::uint32_t>(vocab.indication_tokens.size()), fv.active,
               echo ? &echo->diagnosis_dropped : nullptr);
  std::sort(fv.active.begin(), fv.active.end());
  fv.active.erase(std::unique(fv.active.begin(), fv.active.end()), fv.active.end());
  return fv;
}

std::vector<FeatureVector> encode_orders(const std::vector<Order>& orders, const Vocabulary& vocab,
                                         const StopwordList& stopwords) {
  std::vector<FeatureVector> out;
  out.reserve(orders.size());
  for (const auto& order : orders) out.push_back(encode_order(order, vocab, stopwords));
  return out;
}

SplitDataset stratified_split(const std::vector<Order>& orders, double train_fraction, std::uint64_t seed) {
  if (orders.empty()) throw Error(Errc::EmptyDataset, "cannot split zero orders");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(Errc::InvalidConfig, "train fraction must lie in (0, 1)");
  }
  // Class order follows first appearance so the partition does not depend on label spelling.
  std::vector<std::string> classes;
  std::unordered_map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    auto [it, inserted] = members.try_emplace(orders[i].protocol);
    if (inserted) classes.push_back(orders[i].protocol);
    it->second.push_back(i);
  }

  std::mt19937_64 rng(seed);
  std::vector<char> in_train(orders.size(), 0);
  for (const auto& label : classes) {
    auto& idx = members[label];
    if (idx.size() == 1) {
      in_train[idx[0]] = 1;
      continue;
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    for (std::size_t j = 0; j < n_train; ++j) in_train[idx[j]] = 1;
  }

  SplitDataset split;
  split.split_seed = seed;
  split.train_fraction = train_fraction;
  for (std::size_t i = 0; i < orders.size(); ++i) (in_train[i] ? split.train : split.test).push_back(orders[i]);
  return split;
}

std::vector<Order> load_orders(const std::filesystem::path& path) {
  const auto records = csv::read_file(path);
  if (records.empty()) throw Error(Errc::MissingColumn, path.string() + ": missing header row");
  const csv::Row expected{"id", "indication", "diagnosis", "protocol"};
  const auto& header = records.front().fields;
  for (const auto& column : expected) {
    if (std::find(header.begin(), header.end(), column) == header.end()) {
      throw Error(Errc::MissingColumn, path.string() + ": header lacks column '" + column + "'");
    }
  }
  if (header != expected) {
    throw Error(Errc::MalformedRow, path.string() + ": header must be exactly id,indication,diagnosis,protocol");
  }

  std::vector<Order> orders;
  orders.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != expected.size()) {
      throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(rec.line) + ": expected 4 columns, got " +
                                          std::to_string(rec.fields.size()));
    }
    if (rec.fields[3].empty()) {
      throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(rec.line) + ": column 4 (protocol) is empty");
    }
    orders.push_back({rec.fields[0], rec.fields[1], rec.fields[2], rec.fields[3]});
  }
  return orders;
}

void write_orders(const std::filesystem::path& path, const std::vector<Order>& orders) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  csv::write_row(out, {"id", "indication", "diagnosis", "protocol"});
  for (const auto& o : orders) csv::write_row(out, {o.id, o.indication, o.diagnosis, o.protocol});
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

std::vector<std::string> distinct_protocols(const std::vector<Order>& orders) {
  std::vector<std::string> labels;
  std::set<std::string> seen;
  for (const auto& o : orders) {
    if (seen.insert(o.protocol).second) labels.push_back(o.protocol);
  }
  return labels;
}

}  // namespace protocolnet
