#include "miabench/ngram.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "miabench/error.hpp"
#include "miabench/hash.hpp"
#include "miabench/parallel.hpp"

namespace miabench {

using nlohmann::json;

CardinalitySketch::CardinalitySketch(unsigned precision)
    : precision_(precision), registers_(std::size_t{1} << precision, 0) {
  if (precision < 4 || precision > 18) throw Error(ErrorCode::internal, "HLL precision out of range");
}

void CardinalitySketch::add(std::uint64_t hash) noexcept {
  const std::size_t idx = static_cast<std::size_t>(hash >> (64 - precision_));
  const std::uint64_t rest = hash << precision_;
  const unsigned max_rank = 64 - precision_ + 1;
  const unsigned rank = rest == 0 ? max_rank : static_cast<unsigned>(std::countl_zero(rest)) + 1;
  registers_[idx] = std::max<std::uint8_t>(registers_[idx], static_cast<std::uint8_t>(std::min(rank, max_rank)));
}

double CardinalitySketch::estimate() const {
  const double m = static_cast<double>(registers_.size());
  double sum = 0;
  std::size_t zeros = 0;
  for (auto r : registers_) {
    sum += std::ldexp(1.0, -static_cast<int>(r));
    if (r == 0) ++zeros;
  }
  const double alpha = 0.7213 / (1.0 + 1.079 / m);
  double e = alpha * m * m / sum;
  if (e <= 2.5 * m && zeros > 0) e = m * std::log(m / static_cast<double>(zeros));
  return e;
}

BloomFilter::BloomFilter(std::uint64_t bits, unsigned num_hashes)
    : bits_(std::max<std::uint64_t>(64, (bits + 63) / 64 * 64)),
      num_hashes_(std::max(1u, num_hashes)),
      words_(static_cast<std::size_t>(bits_ / 64), 0) {}

BloomFilter BloomFilter::for_capacity(std::uint64_t capacity, double fp_rate) {
  const double ln2 = std::log(2.0);
  const double cap = static_cast<double>(std::max<std::uint64_t>(1, capacity));
  const double bits = std::ceil(-cap * std::log(fp_rate) / (ln2 * ln2));
  const auto k = static_cast<unsigned>(std::max(1.0, std::round(bits / cap * ln2)));
  return BloomFilter(static_cast<std::uint64_t>(bits), k);
}

namespace {

inline std::uint64_t second_hash(std::uint64_t key) noexcept {
  return fmix64(key ^ 0x5bd1e9955bd1e995ULL) | 1;
}

}  // namespace

bool BloomFilter::insert(std::uint64_t key) noexcept {
  const std::uint64_t h2 = second_hash(key);
  bool fresh = false;
  std::uint64_t h = key;
  for (unsigned i = 0; i < num_hashes_; ++i, h += h2) {
    const std::uint64_t bit = h % bits_;
    std::uint64_t& word = words_[bit >> 6];
    const std::uint64_t mask = std::uint64_t{1} << (bit & 63);
    if (!(word & mask)) {
      word |= mask;
      fresh = true;
    }
  }
  return fresh;
}

bool BloomFilter::contains(std::uint64_t key) const noexcept {
  const std::uint64_t h2 = second_hash(key);
  std::uint64_t h = key;
  for (unsigned i = 0; i < num_hashes_; ++i, h += h2) {
    const std::uint64_t bit = h % bits_;
    if (!(words_[bit >> 6] & (std::uint64_t{1} << (bit & 63)))) return false;
  }
  return true;
}

std::uint64_t gram_hash(std::span<const char32_t> gram) noexcept {
  return hash_codepoints(gram, kGramHashSeed);
}

double NgramIndex::estimated_fp_rate() const noexcept {
  if (inserted_ == 0) return 0.0;
  const double k = num_hashes();
  const double ratio = static_cast<double>(inserted_) / static_cast<double>(bits());
  return std::pow(1.0 - std::exp(-k * ratio), k);
}

bool NgramIndex::contains(std::span<const char32_t> gram) const noexcept {
  if (gram.size() != static_cast<std::size_t>(n_)) return false;
  return filter_.contains(gram_hash(gram));
}

json NgramIndex::describe() const {
  return json{{"n", n_},
              {"bits", bits()},
              {"num_hashes", num_hashes()},
              {"inserted", inserted_},
              {"gram_occurrences", gram_occurrences_},
              {"distinct_estimate", distinct_estimate_},
              {"target_fp_rate", target_fp_rate_},
              {"estimated_fp_rate", estimated_fp_rate()},
              {"short_documents", short_documents_}};
}

NgramIndex build_index(std::span<const Document* const> docs, int n, double target_fp_rate) {
  if (n < 1) throw Error(ErrorCode::config_error, "gram length must be >= 1");
  if (!(target_fp_rate > 0.0 && target_fp_rate < 1.0))
    throw Error(ErrorCode::config_error, "target_fp_rate must lie in (0, 1)");
  if (docs.empty()) throw Error(ErrorCode::empty_reference, "cannot index an empty document set");

  NgramIndex index;
  index.n_ = n;
  index.target_fp_rate_ = target_fp_rate;
  const auto un = static_cast<std::size_t>(n);

  // Pass 1: size the filter from a distinct-gram estimate.
  CardinalitySketch sketch;
  for (const Document* doc : docs) {
    const auto& t = doc->char_tokens;
    if (t.size() < un) {
      ++index.short_documents_;
      continue;
    }
    for (std::size_t i = 0; i + un <= t.size(); ++i)
      sketch.add(gram_hash(std::span<const char32_t>(t).subspan(i, un)));
  }
  index.distinct_estimate_ = sketch.estimate();
  // ~12 standard errors of headroom at precision 14.
  const auto capacity = static_cast<std::uint64_t>(std::ceil(index.distinct_estimate_ * 1.1)) + 64;
  index.filter_ = BloomFilter::for_capacity(capacity, target_fp_rate);

  // Pass 2: insert.
  for (const Document* doc : docs) {
    const auto& t = doc->char_tokens;
    for (std::size_t i = 0; i + un <= t.size(); ++i) {
      ++index.gram_occurrences_;
      if (index.filter_.insert(gram_hash(std::span<const char32_t>(t).subspan(i, un))))
        ++index.inserted_;
    }
  }
  return index;
}

std::string_view overlap_mode_name(OverlapMode mode) noexcept {
  return mode == OverlapMode::occurrence ? "occurrence" : "distinct";
}

OverlapMode parse_overlap_mode(std::string_view name) {
  if (name == "occurrence") return OverlapMode::occurrence;
  if (name == "distinct") return OverlapMode::distinct;
  throw Error(ErrorCode::config_error, "unknown overlap mode '" + std::string(name) + "'");
}

OverlapCounts overlap_counts(const Document& doc, const NgramIndex& index, OverlapMode mode) {
  const auto un = static_cast<std::size_t>(index.n());
  const auto& t = doc.char_tokens;
  OverlapCounts counts;
  if (t.size() < un) return counts;
  if (mode == OverlapMode::occurrence) {
    for (std::size_t i = 0; i + un <= t.size(); ++i) {
      ++counts.total;
      if (index.contains_hash(gram_hash(std::span<const char32_t>(t).subspan(i, un)))) ++counts.found;
    }
  } else {
    std::unordered_set<std::u32string_view> seen;
    const std::u32string_view view(t.data(), t.size());
    for (std::size_t i = 0; i + un <= t.size(); ++i) {
      if (!seen.insert(view.substr(i, un)).second) continue;
      ++counts.total;
      if (index.contains_hash(gram_hash(std::span<const char32_t>(t).subspan(i, un)))) ++counts.found;
    }
  }
  return counts;
}

double overlap(const Document& doc, const NgramIndex& index, OverlapMode mode) {
  const auto c = overlap_counts(doc, index, mode);
  if (c.total == 0)
    throw Error(ErrorCode::too_short, "document '" + doc.id + "' has " +
                                          std::to_string(doc.char_tokens.size()) +
                                          " tokens, fewer than n=" + std::to_string(index.n()));
  return static_cast<double>(c.found) / static_cast<double>(c.total);
}

std::vector<double> OverlapDistribution::scores() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.score);
  return out;
}

std::string reference_id(std::span<const Document* const> reference) {
  std::vector<std::string_view> ids;
  ids.reserve(reference.size());
  for (const Document* d : reference) ids.push_back(d->id);
  std::sort(ids.begin(), ids.end());
  std::uint64_t h = 0;
  for (auto id : ids) h = hash_bytes(id, h);
  return "ref-" + hex64(h);
}

OverlapDistribution distribution(std::span<const Document* const> docs, const NgramIndex& index,
                                 std::string ref_id, OverlapMode mode, unsigned threads) {
  OverlapDistribution dist;
  dist.n = index.n();
  dist.reference_id = std::move(ref_id);
  std::vector<OverlapCounts> counts(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) { counts[i] = overlap_counts(*docs[i], index, mode); });
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (counts[i].total == 0) {
      dist.excluded_short.push_back(docs[i]->id);
      continue;
    }
    dist.entries.push_back(
        {docs[i]->id, static_cast<double>(counts[i].found) / static_cast<double>(counts[i].total)});
  }
  return dist;
}

OverlapDistribution distribution(std::span<const Document* const> docs,
                                 std::span<const Document* const> reference, int n,
                                 const DistributionOptions& options) {
  if (reference.empty()) throw Error(ErrorCode::empty_reference, "reference set is empty");
  const auto index = build_index(reference, n, options.target_fp_rate);
  return distribution(docs, index, reference_id(reference), options.mode, options.threads);
}

std::string distribution_csv(const OverlapDistribution& dist) {
  std::ostringstream out;
  out.precision(17);
  out << "doc_id,score\n";
  for (const auto& e : dist.entries) out << e.doc_id << ',' << e.score << '\n';
  return out.str();
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(sorted.size() - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

json distribution_summary(const OverlapDistribution& dist) {
  auto s = dist.scores();
  std::sort(s.begin(), s.end());
  json deciles = json::array();
  for (int d = 0; d <= 10; ++d) deciles.push_back(quantile_sorted(s, d / 10.0));
  const double mean = s.empty() ? 0.0 : std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  return json{{"count", s.size()},
              {"mean", mean},
              {"deciles", deciles},
              {"n", dist.n},
              {"reference_id", dist.reference_id},
              {"excluded_short", dist.excluded_short}};
}

}  // namespace miabench
