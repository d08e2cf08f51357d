#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miabench/corpus.hpp"

namespace miabench {

/// HyperLogLog distinct-count sketch over pre-hashed 64-bit values.
class CardinalitySketch {
 public:
  explicit CardinalitySketch(unsigned precision = 14);

  void add(std::uint64_t hash) noexcept;
  double estimate() const;

 private:
  unsigned precision_;
  std::vector<std::uint8_t> registers_;
};

/// Classic Bloom filter with Kirsch-Mitzenmacher double hashing over one
/// 64-bit key hash.
class BloomFilter {
 public:
  BloomFilter() = default;
  BloomFilter(std::uint64_t bits, unsigned num_hashes);

  /// Sized for `capacity` distinct keys at false-positive rate `fp_rate`.
  static BloomFilter for_capacity(std::uint64_t capacity, double fp_rate);

  /// Returns true if at least one bit was newly set (the key was not
  /// already reported present).
  bool insert(std::uint64_t key) noexcept;
  bool contains(std::uint64_t key) const noexcept;

  std::uint64_t bits() const noexcept { return bits_; }
  unsigned num_hashes() const noexcept { return num_hashes_; }

 private:
  std::uint64_t bits_ = 0;
  unsigned num_hashes_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Seed of the gram hash; fixed so indexes are reproducible.
inline constexpr std::uint64_t kGramHashSeed = 0x6e6772616d2d3037ULL;

std::uint64_t gram_hash(std::span<const char32_t> gram) noexcept;

/// Number of positional n-grams of a token sequence (0 if shorter than n).
inline std::size_t gram_count(std::size_t length, int n) noexcept {
  return length >= static_cast<std::size_t>(n) ? length - static_cast<std::size_t>(n) + 1 : 0;
}

/// Bloom-filter membership index of every character n-gram of a document
/// set. No false negatives.
class NgramIndex {
 public:
  int n() const noexcept { return n_; }
  std::uint64_t bits() const noexcept { return filter_.bits(); }
  unsigned num_hashes() const noexcept { return filter_.num_hashes(); }
  /// Insertions that set at least one new bit.
  std::uint64_t inserted() const noexcept { return inserted_; }
  double target_fp_rate() const noexcept { return target_fp_rate_; }
  /// Positional gram windows visited during construction.
  std::uint64_t gram_occurrences() const noexcept { return gram_occurrences_; }
  double distinct_estimate() const noexcept { return distinct_estimate_; }
  /// Reference documents with fewer than n tokens.
  std::size_t short_documents() const noexcept { return short_documents_; }

  /// (1 - e^(-k * inserted / bits))^k
  double estimated_fp_rate() const noexcept;

  bool contains(std::span<const char32_t> gram) const noexcept;
  bool contains_hash(std::uint64_t h) const noexcept { return filter_.contains(h); }

  nlohmann::json describe() const;

 private:
  friend NgramIndex build_index(std::span<const Document* const>, int, double);

  int n_ = 0;
  double target_fp_rate_ = 0;
  std::uint64_t inserted_ = 0;
  std::uint64_t gram_occurrences_ = 0;
  double distinct_estimate_ = 0;
  std::size_t short_documents_ = 0;
  BloomFilter filter_;
};

inline constexpr int kDefaultGramN = 7;
inline constexpr double kDefaultTargetFpRate = 0.001;

/// Throws Error(empty_reference) if docs is empty, Error(config_error) if
/// n < 1 or the rate is outside (0, 1).
NgramIndex build_index(std::span<const Document* const> docs, int n,
                       double target_fp_rate = kDefaultTargetFpRate);

enum class OverlapMode {
  occurrence,  // positional windows, duplicates counted
  distinct,    // each distinct gram of the document counted once
};

std::string_view overlap_mode_name(OverlapMode mode) noexcept;
OverlapMode parse_overlap_mode(std::string_view name);

struct OverlapCounts {
  std::size_t found = 0;
  std::size_t total = 0;
};

OverlapCounts overlap_counts(const Document& doc, const NgramIndex& index,
                             OverlapMode mode = OverlapMode::occurrence);

/// Fraction of the document's n-grams present in the index. Throws
/// Error(too_short) when the document has fewer than n tokens.
double overlap(const Document& doc, const NgramIndex& index,
               OverlapMode mode = OverlapMode::occurrence);

struct OverlapEntry {
  std::string doc_id;
  double score = 0;
};

/// Overlap scores of a document set against a fixed reference set.
struct OverlapDistribution {
  int n = kDefaultGramN;
  std::string reference_id;
  std::vector<OverlapEntry> entries;
  std::vector<std::string> excluded_short;

  std::vector<double> scores() const;
};

struct DistributionOptions {
  double target_fp_rate = kDefaultTargetFpRate;
  OverlapMode mode = OverlapMode::occurrence;
  unsigned threads = 1;
};

/// Stable identifier of a reference set: hash of its sorted ids.
std::string reference_id(std::span<const Document* const> reference);

OverlapDistribution distribution(std::span<const Document* const> docs,
                                 std::span<const Document* const> reference, int n,
                                 const DistributionOptions& options = {});

/// Scores against an index that was already built over `reference_id`.
OverlapDistribution distribution(std::span<const Document* const> docs, const NgramIndex& index,
                                 std::string reference_id, OverlapMode mode = OverlapMode::occurrence,
                                 unsigned threads = 1);

std::string distribution_csv(const OverlapDistribution& dist);

/// {"count", "mean", "deciles": [p0, p10, ..., p100], "n", "reference_id", "excluded_short"}
nlohmann::json distribution_summary(const OverlapDistribution& dist);

/// Linear-interpolation quantile of sorted data, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace miabench
