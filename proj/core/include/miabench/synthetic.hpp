#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "miabench/corpus.hpp"

namespace miabench {

/// Deterministic synthetic member / non-member corpus with an injected
/// vocabulary shift. Every document mixes words from a shared Zipfian
/// vocabulary with words from its class's private vocabulary; a
/// `clean_fraction` of documents per class use the shared vocabulary only,
/// the rest draw a private-word rate uniformly from the configured range.
struct SyntheticCorpusConfig {
  std::size_t members = 2000;
  std::size_t non_members = 1000;
  std::size_t shared_vocab = 500;
  std::size_t private_vocab = 250;
  std::size_t min_words = 70;
  std::size_t max_words = 130;
  double clean_fraction = 0.5;
  double member_shift_lo = 0.05;
  double member_shift_hi = 0.35;
  double non_member_shift_lo = 0.05;
  double non_member_shift_hi = 0.35;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 2024;
};

nlohmann::json to_json(const SyntheticCorpusConfig& config);

struct SyntheticCorpus {
  std::vector<IngestRecord> members;
  std::vector<IngestRecord> non_members;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& config = {});

LabeledPool synthetic_pool(const SyntheticCorpusConfig& config = {});

}  // namespace miabench
