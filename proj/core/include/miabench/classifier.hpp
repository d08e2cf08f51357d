#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "miabench/corpus.hpp"
#include "miabench/stats.hpp"

namespace miabench {

enum class NgramUnit { word, character };

std::string_view ngram_unit_name(NgramUnit unit) noexcept;
NgramUnit parse_ngram_unit(std::string_view name);

inline constexpr std::uint64_t kFeatureHashSeed = 0x6e622d3132336772ULL;

struct FeatureConfig {
  NgramUnit unit = NgramUnit::word;
  int min_n = 1;
  int max_n = 3;
  unsigned bucket_bits = 20;
  std::uint64_t hash_seed = kFeatureHashSeed;

  std::size_t bucket_space() const noexcept { return std::size_t{1} << bucket_bits; }
};

nlohmann::json to_json(const FeatureConfig& config);

/// Lowercased word tokens. ASCII letters are folded; ASCII
/// non-alphanumerics and Unicode whitespace separate words; any other code
/// point is a word character.
std::vector<std::string> word_tokens(std::string_view text);

/// Raw n-gram counts before hashing; n-gram tokens are joined with a single
/// space ("a b"). Character mode uses lowercased code points.
std::map<std::string, std::uint32_t> ngram_counts(std::string_view text, const FeatureConfig& config);

/// Sparse hashed n-gram counts, entries sorted by bucket.
struct FeatureVector {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
  std::size_t bucket_space = 0;

  std::uint64_t total() const noexcept;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

std::uint32_t feature_bucket(std::string_view gram, const FeatureConfig& config) noexcept;

/// Throws Error(empty_text) when the text yields no n-grams.
FeatureVector featurize(std::string_view text, const FeatureConfig& config = {});
FeatureVector featurize(const Document& doc, const FeatureConfig& config = {});

/// Multinomial naive Bayes over feature buckets. Class index 0 is member,
/// 1 is non-member.
struct NaiveBayesModel {
  FeatureConfig features;
  double alpha = 1.0;
  std::array<double, 2> log_prior{};
  std::array<std::vector<double>, 2> log_theta;
};

struct LabeledFeatures {
  FeatureVector features;
  Label label = Label::member;
};

/// log_theta[c][f] = log((count[c][f] + alpha) / (total[c] + alpha * B)).
/// Throws Error(single_class_training) unless both labels are present.
NaiveBayesModel train_naive_bayes(std::span<const LabeledFeatures> examples, double alpha = 1.0,
                                  const FeatureConfig& features = {});

/// Posterior probability of the member class.
double predict_proba(const NaiveBayesModel& model, const FeatureVector& v);
double predict_proba(const NaiveBayesModel& model, const Document& doc);

/// Versioned little-endian binary format ("MBNB", version 1).
void save_model(const NaiveBayesModel& model, const std::filesystem::path& path);
NaiveBayesModel load_naive_bayes(const std::filesystem::path& path);

struct ClassifierSpec {
  FeatureConfig features;
  double alpha = 1.0;
};

nlohmann::json to_json(const ClassifierSpec& spec);

/// Trains on labeled documents, featurizing in parallel.
NaiveBayesModel train_on_documents(std::span<const Document* const> members,
                                   std::span<const Document* const> non_members,
                                   const ClassifierSpec& spec, unsigned threads = 1);

struct BlindEvalOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  ClassifierSpec classifier;
  unsigned threads = 1;
};

struct BlindEvalReport {
  RocSummary summary;
  std::vector<std::vector<std::string>> fold_test_ids;
};

/// Stratified k-fold cross-validation of a blind classifier. Throws
/// Error(too_few_items) when either side has fewer than k documents.
BlindEvalReport evaluate_blind(std::span<const Document* const> members,
                               std::span<const Document* const> non_members,
                               const BlindEvalOptions& options);

BlindEvalReport evaluate_blind(const LabeledPool& pool, const SelectionResult& selection,
                               const BlindEvalOptions& options);

nlohmann::json to_json(const BlindEvalReport& report);

}  // namespace miabench
