#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "protocolnet/corpus.hpp"
#include "protocolnet/protocols.hpp"

namespace protocolnet {

/// Two Local protocols whose signatures differ only in a side marker.
struct LateralPair {
  std::string left;
  std::string right;
};

/// Token-signature mixture: each order emits its protocol's signature tokens
/// (each independently with `signature_emission_prob`) plus shared noise tokens.
struct SynthSpec {
  ProtocolHierarchy hierarchy;
  std::vector<double> prevalence;  // one weight per Local label, hierarchy order
  std::size_t signature_tokens_per_protocol = 4;
  std::size_t shared_noise_vocab_size = 200;
  std::pair<std::size_t, std::size_t> tokens_per_field{1, 4};  // noise tokens per field, inclusive
  double signature_emission_prob = 0.85;
  std::vector<LateralPair> lateral_pairs;
  std::size_t order_count = 5000;
  std::uint64_t seed = 0;

  /// Throws InvalidSpec.
  void validate() const;
};

struct SynthCorpus {
  std::vector<Order> orders;
  ProtocolHierarchy hierarchy;
};

SynthCorpus generate(const SynthSpec& spec);

/// 12 Local -> 6 ACR -> 3 General, two lateral pairs, top class ~14%, 5,000 orders.
SynthSpec default_demo_spec();

/// JSON spec file mirroring SynthSpec. `hierarchy` is a list of [local, acr, general] triples.
SynthSpec load_synth_spec(const std::filesystem::path& path);
std::string synth_spec_to_json(const SynthSpec& spec);

/// Writes orders.csv and hierarchy.csv into `dir`.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace protocolnet
