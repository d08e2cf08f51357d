#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "miabench/classifier.hpp"
#include "miabench/corpus.hpp"
#include "miabench/ngram.hpp"
#include "miabench/stats.hpp"

namespace miabench {

// ---------------------------------------------------------------------------
// No-Ngram: match non-member overlap distribution to the member one.

struct ScoredCandidate {
  std::string id;
  double score = 0;
};

struct GreedyStep {
  std::string chosen_id;
  double chosen_score = 0;
  double distance = 0;  // KS after adding the chosen candidate
};

/// Greedy distribution matching over precomputed scalar scores: at each of
/// n steps add the candidate minimizing KS(selected + {c}, target), ties
/// broken by smallest id. Throws Error(pool_too_small) if there are fewer
/// than n candidates.
std::vector<GreedyStep> greedy_ks_selection(std::span<const double> target,
                                            std::span<const ScoredCandidate> candidates, std::size_t n);

struct NoNgramOptions {
  std::size_t n = 0;
  int gram_n = kDefaultGramN;
  double target_fp_rate = kDefaultTargetFpRate;
  OverlapMode mode = OverlapMode::occurrence;
  DistributionDistance distance = DistributionDistance::kolmogorov_smirnov;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Member sample -> fixed reference of left-out members -> target overlap
/// distribution -> greedy KS matching of non-members against it.
/// Diagnostics carry the final KS, the random-baseline KS of the same
/// candidates, per-step choices and per-document overlap scores.
SelectionResult build_no_ngram(const LabeledPool& pool, const NoNgramOptions& options);

// ---------------------------------------------------------------------------
// No-Class: pick documents the blind classifiers are least sure about.

/// Per-classifier offsets C_i(D) - 0.5 and their l2 norm.
struct ConfidenceVector {
  std::vector<double> components;
  double norm = 0;
};

ConfidenceVector confidence_vector(std::span<const double> probabilities);

struct CandidateConfidence {
  std::string id;
  ConfidenceVector confidence;
  double mean_probability = 0.5;
};

/// One entry per candidate, sorted by (norm, id).
std::vector<CandidateConfidence> score_candidates(std::span<const Document* const> candidates,
                                                  std::span<const NaiveBayesModel> classifiers,
                                                  unsigned threads = 1);

/// Sort/alternation core of No-Class over already-scored candidates (sorted
/// by norm, id). Balanced mode alternates between the mean-probability >= 0.5
/// and < 0.5 sides, starting with the side holding the smaller (norm, id).
struct ConfidenceSelection {
  std::vector<std::string> ids;
  std::vector<double> norms;        // in selection order
  std::size_t predicted_member = 0;
  std::size_t predicted_non_member = 0;
  bool imbalanced = false;
};

ConfidenceSelection select_by_confidence(std::span<const CandidateConfidence> sorted_candidates,
                                         std::size_t n, bool balanced);

struct NoClassOptions {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  /// Untrained ensemble; trained on disjoint samples of size n per side.
  std::vector<ClassifierSpec> ensemble{ClassifierSpec{}};
  /// Pre-trained ensemble; when non-empty no training sample is drawn.
  std::vector<NaiveBayesModel> trained;
  /// Defaults to true for a single classifier.
  std::optional<bool> balanced;
  unsigned threads = 1;
};

struct NoClassResult {
  SelectionResult selection;
  std::vector<NaiveBayesModel> classifiers;
  std::vector<std::string> training_members;
  std::vector<std::string> training_non_members;
};

NoClassResult build_no_class_detailed(const LabeledPool& pool, const NoClassOptions& options);
SelectionResult build_no_class(const LabeledPool& pool, const NoClassOptions& options);

}  // namespace miabench
