#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "miabench/corpus.hpp"
#include "miabench/mia.hpp"

namespace miabench {

enum class LmUnit { character, word };

std::string_view lm_unit_name(LmUnit unit) noexcept;
LmUnit parse_lm_unit(std::string_view name);

struct LmParams {
  int order = 5;
  double lambda = 0.01;          // add-lambda smoothing per order
  std::vector<double> weights;   // per order 1..order; empty = proportional to 2^(o-1)
  LmUnit unit = LmUnit::character;
};

nlohmann::json to_json(const LmParams& params);

/// Splits text into LM tokens: code points, or whitespace-separated words.
std::vector<std::string> lm_tokens(std::string_view text, LmUnit unit);

/// Linearly interpolated add-lambda n-gram model over a closed vocabulary
/// (training tokens + <unk> + </s>). Every order's smoothed conditional
/// sums to one over the vocabulary, so the mixture does too.
class NgramLm {
 public:
  static constexpr std::uint32_t kUnk = 0;
  static constexpr std::uint32_t kEos = 1;
  static constexpr std::uint32_t kBos = 0xffffffffu;  // context padding only

  const LmParams& params() const noexcept { return params_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }
  std::uint64_t training_fingerprint() const noexcept { return fingerprint_; }

  std::uint32_t token_id(std::string_view token) const;

  /// Natural-log conditional probability of `token` after `history`
  /// (most recent last; shorter histories are BOS-padded).
  double log_prob(std::span<const std::uint32_t> history, std::uint32_t token) const;

  /// "reference-ngram-lm/<hex>" over parameters and training corpus.
  std::string model_id() const;

 private:
  friend NgramLm lm_train(std::span<const Document* const>, const LmParams&);
  friend void save_lm(const NgramLm&, const std::filesystem::path&);
  friend NgramLm load_lm(const std::filesystem::path&);

  struct GramCount {
    std::uint64_t context;
    std::uint32_t token;
    std::uint32_t count;
  };
  struct ContextTotal {
    std::uint64_t context;
    std::uint64_t total;
  };

  std::uint64_t context_key(std::span<const std::uint32_t> history, std::size_t length) const;
  std::uint64_t gram_count(std::size_t order_index, std::uint64_t context, std::uint32_t token) const;
  std::uint64_t context_total(std::size_t order_index, std::uint64_t context) const;

  LmParams params_;
  std::vector<double> weights_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::vector<GramCount>> grams_;      // per order, sorted by (context, token)
  std::vector<std::vector<ContextTotal>> totals_;  // per order, sorted by context
  std::uint64_t fingerprint_ = 0;
};

/// Throws Error(empty_corpus) for no documents, Error(config_error) for bad
/// parameters.
NgramLm lm_train(std::span<const Document* const> docs, const LmParams& params);

/// Per-token log-probabilities of the document; every token scored (the
/// first against a BOS-only context).
LogprobTrace lm_score(const NgramLm& model, const Document& doc);

/// Versioned little-endian binary format ("MBLM", version 1).
void save_lm(const NgramLm& model, const std::filesystem::path& path);
NgramLm load_lm(const std::filesystem::path& path);

}  // namespace miabench
