#include "protocolnet/synthgen.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "protocolnet/error.hpp"
#include "protocolnet/text.hpp"

namespace protocolnet {

namespace {

constexpr std::string_view kLeftMarker = "left";
constexpr std::string_view kRightMarker = "right";

// Filler that normalization must strip.
constexpr std::string_view kFiller[] = {"the", "of", "with", "and", "for", "r/o", "s/p", "h/o", "to", "in"};

class WordFactory {
 public:
  explicit WordFactory(std::mt19937_64& rng) : rng_(rng) {
    used_.insert(std::string(kLeftMarker));
    used_.insert(std::string(kRightMarker));
  }

  std::string next() {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    std::uniform_int_distribution<std::size_t> pick_c(0, consonants.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_v(0, vowels.size() - 1);
    for (;;) {
      std::string word;
      for (int s = 0; s < 3; ++s) {
        word.push_back(consonants[pick_c(rng_)]);
        word.push_back(vowels[pick_v(rng_)]);
      }
      if (StopwordList::english().contains(word)) continue;
      if (used_.insert(word).second) return word;
    }
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

struct Signature {
  std::vector<std::string> indication;
  std::vector<std::string> diagnosis;
};

std::string render_field(std::vector<std::string> tokens, std::mt19937_64& rng) {
  std::shuffle(tokens.begin(), tokens.end(), rng);
  std::bernoulli_distribution filler(0.3);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kFiller) - 1);
  std::string text;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) text += filler(rng) ? " " + std::string(kFiller[pick(rng)]) + " " : " ";
    text += tokens[i];
  }
  if (!text.empty()) {
    text[0] = static_cast<char>(text[0] - 'a' + 'A');
    text += ".";
  }
  return text;
}

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidSpec, what); };
  const auto& locals = hierarchy.labels(Level::Local);
  if (locals.empty()) fail("hierarchy has no Local labels");
  if (prevalence.size() != locals.size()) fail("need one prevalence weight per Local label");
  for (double w : prevalence) {
    if (!(w > 0.0)) fail("prevalence weights must be positive");
  }
  if (signature_tokens_per_protocol < 1) fail("signature_tokens_per_protocol must be >= 1");
  if (!lateral_pairs.empty() && signature_tokens_per_protocol < 2) fail("lateral pairs need >= 2 signature tokens");
  if (tokens_per_field.first > tokens_per_field.second) fail("tokens_per_field range is inverted");
  if (tokens_per_field.second > 0 && shared_noise_vocab_size == 0) fail("noise tokens requested with empty noise vocab");
  if (!(signature_emission_prob >= 0.0 && signature_emission_prob <= 1.0)) fail("signature_emission_prob outside [0, 1]");
  if (order_count == 0) fail("order_count must be positive");
  std::set<std::string> paired;
  for (const auto& p : lateral_pairs) {
    if (!hierarchy.contains(p.left, Level::Local) || !hierarchy.contains(p.right, Level::Local)) {
      fail("lateral pair references unknown Local label");
    }
    if (p.left == p.right || !paired.insert(p.left).second || !paired.insert(p.right).second) {
      fail("a protocol may belong to at most one lateral pair");
    }
  }
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  WordFactory words(rng);
  const auto& locals = spec.hierarchy.labels(Level::Local);

  std::unordered_map<std::string, const LateralPair*> pair_of;
  for (const auto& p : spec.lateral_pairs) {
    pair_of[p.left] = &p;
    pair_of[p.right] = &p;
  }

  // Signature tokens alternate between fields; side markers go to the indication.
  std::vector<Signature> signatures(locals.size());
  auto assign = [](Signature& sig, const std::vector<std::string>& tokens) {
    for (std::size_t j = 0; j < tokens.size(); ++j) (j % 2 == 0 ? sig.indication : sig.diagnosis).push_back(tokens[j]);
  };
  std::vector<char> done(locals.size(), 0);
  for (std::size_t i = 0; i < locals.size(); ++i) {
    if (done[i]) continue;
    auto it = pair_of.find(locals[i]);
    if (it == pair_of.end()) {
      std::vector<std::string> tokens;
      for (std::size_t j = 0; j < spec.signature_tokens_per_protocol; ++j) tokens.push_back(words.next());
      assign(signatures[i], tokens);
      done[i] = 1;
      continue;
    }
    std::vector<std::string> shared;
    for (std::size_t j = 0; j + 1 < spec.signature_tokens_per_protocol; ++j) shared.push_back(words.next());
    const auto left = spec.hierarchy.index_of(it->second->left, Level::Local);
    const auto right = spec.hierarchy.index_of(it->second->right, Level::Local);
    assign(signatures[left], shared);
    assign(signatures[right], shared);
    signatures[left].indication.emplace_back(kLeftMarker);
    signatures[right].indication.emplace_back(kRightMarker);
    done[left] = done[right] = 1;
  }

  std::vector<std::string> noise;
  for (std::size_t j = 0; j < spec.shared_noise_vocab_size; ++j) noise.push_back(words.next());

  std::discrete_distribution<std::size_t> protocol(spec.prevalence.begin(), spec.prevalence.end());
  std::bernoulli_distribution emit(spec.signature_emission_prob);
  std::uniform_int_distribution<std::size_t> noise_count(spec.tokens_per_field.first, spec.tokens_per_field.second);
  std::uniform_int_distribution<std::size_t> noise_pick(0, noise.empty() ? 0 : noise.size() - 1);

  auto field_tokens = [&](const std::vector<std::string>& sig) {
    std::vector<std::string> tokens;
    for (const auto& t : sig) {
      if (emit(rng)) tokens.push_back(t);
    }
    const auto extra = noise_count(rng);
    for (std::size_t j = 0; j < extra; ++j) tokens.push_back(noise[noise_pick(rng)]);
    return tokens;
  };

  SynthCorpus corpus{{}, spec.hierarchy};
  corpus.orders.reserve(spec.order_count);
  const int width = static_cast<int>(std::to_string(spec.order_count).size());
  for (std::size_t n = 0; n < spec.order_count; ++n) {
    const auto p = protocol(rng);
    Order order;
    char id[32];
    std::snprintf(id, sizeof id, "ord%0*zu", width, n);
    order.id = id;
    order.indication = render_field(field_tokens(signatures[p].indication), rng);
    order.diagnosis = render_field(field_tokens(signatures[p].diagnosis), rng);
    order.protocol = locals[p];
    corpus.orders.push_back(std::move(order));
  }
  return corpus;
}

SynthSpec default_demo_spec() {
  const std::vector<std::array<std::string, 3>> rows = {
      {"MRI brain routine", "MRI head with and without contrast", "MRI neuro"},
      {"MRI lumbar spine routine", "MRI lumbar spine without contrast", "MRI neuro"},
      {"MRI knee left", "MRI knee without contrast", "MRI extremity"},
      {"MRI knee right", "MRI knee without contrast", "MRI extremity"},
      {"MRI brain multiple sclerosis", "MRI head with and without contrast", "MRI neuro"},
      {"MRI cervical spine routine", "MRI cervical spine without contrast", "MRI neuro"},
      {"MRI shoulder left", "MRI shoulder without contrast", "MRI extremity"},
      {"MRI shoulder right", "MRI shoulder without contrast", "MRI extremity"},
      {"MRI abdomen liver", "MRI abdomen with and without contrast", "MRI body"},
      {"MRI lumbar spine post-operative", "MRI lumbar spine without contrast", "MRI neuro"},
      {"MRI brain tumor", "MRI head with and without contrast", "MRI neuro"},
      {"MRI abdomen pancreas", "MRI abdomen with and without contrast", "MRI body"},
  };
  SynthSpec spec;
  spec.hierarchy = ProtocolHierarchy::from_rows(rows);
  spec.prevalence = {14, 12, 11, 10, 9, 8, 8, 7, 6, 6, 5, 4};
  spec.lateral_pairs = {{"MRI knee left", "MRI knee right"}, {"MRI shoulder left", "MRI shoulder right"}};
  spec.signature_tokens_per_protocol = 4;
  spec.shared_noise_vocab_size = 200;
  spec.tokens_per_field = {1, 4};
  spec.signature_emission_prob = 0.85;
  spec.order_count = 5000;
  spec.seed = 20211;
  return spec;
}

namespace {
using nlohmann::json;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  json j;
  j["hierarchy"] = spec.hierarchy.rows();
  j["prevalence"] = spec.prevalence;
  j["signature_tokens_per_protocol"] = spec.signature_tokens_per_protocol;
  j["shared_noise_vocab_size"] = spec.shared_noise_vocab_size;
  j["tokens_per_field"] = {spec.tokens_per_field.first, spec.tokens_per_field.second};
  j["signature_emission_prob"] = spec.signature_emission_prob;
  j["lateral_pairs"] = json::array();
  for (const auto& p : spec.lateral_pairs) j["lateral_pairs"].push_back({p.left, p.right});
  j["order_count"] = spec.order_count;
  j["seed"] = spec.seed;
  return j.dump(2);
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  SynthSpec spec;
  try {
    const json j = json::parse(in);
    spec.hierarchy = ProtocolHierarchy::from_rows(j.at("hierarchy").get<std::vector<std::array<std::string, 3>>>());
    spec.prevalence = j.at("prevalence").get<std::vector<double>>();
    spec.signature_tokens_per_protocol = j.value("signature_tokens_per_protocol", spec.signature_tokens_per_protocol);
    spec.shared_noise_vocab_size = j.value("shared_noise_vocab_size", spec.shared_noise_vocab_size);
    if (j.contains("tokens_per_field")) {
      const auto range = j.at("tokens_per_field").get<std::vector<std::size_t>>();
      if (range.size() != 2) throw Error(Errc::InvalidSpec, "tokens_per_field must be [min, max]");
      spec.tokens_per_field = {range[0], range[1]};
    }
    spec.signature_emission_prob = j.value("signature_emission_prob", spec.signature_emission_prob);
    for (const auto& p : j.value("lateral_pairs", json::array())) {
      spec.lateral_pairs.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
    }
    spec.order_count = j.value("order_count", spec.order_count);
    spec.seed = j.value("seed", spec.seed);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidSpec, path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string());
  write_orders(dir / "orders.csv", corpus.orders);
  write_hierarchy(dir / "hierarchy.csv", corpus.hierarchy);
}

}  // namespace protocolnet
