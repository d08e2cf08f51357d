#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "miabench/corpus.hpp"
#include "miabench/stats.hpp"

namespace miabench {

/// Per-token natural-log probabilities of one document under one model.
struct LogprobTrace {
  std::string doc_id;
  std::string model_id;
  std::vector<std::string> tokens;
  std::vector<double> logprobs;
  /// The first token has no preceding context and carries no logprob.
  bool leading_token_omitted = false;
  bool truncated = false;
};

/// Throws Error(invalid_trace) on length mismatch, non-finite or positive
/// logprobs, or an empty id.
void validate_trace(const LogprobTrace& trace);

nlohmann::json to_json(const LogprobTrace& trace);
LogprobTrace trace_from_json(const nlohmann::json& j);

/// Read-only after loading; safe for concurrent lookups.
class TraceStore {
 public:
  /// Throws Error(duplicate_id) for a second trace of the same document.
  void add(LogprobTrace trace);
  const LogprobTrace* find(std::string_view doc_id) const;
  std::size_t size() const noexcept { return traces_.size(); }

 private:
  std::unordered_map<std::string, LogprobTrace> traces_;
};

TraceStore read_traces_jsonl(const std::filesystem::path& path);
void write_traces_jsonl(const std::filesystem::path& path, std::span<const LogprobTrace> traces);

/// exp(-mean(logprobs)); lower means member.
double perplexity(const LogprobTrace& trace);

/// Mean of the ceil(k% * len) smallest logprobs; higher means member.
/// Throws Error(bad_k) unless 0 < k <= 100.
double min_k_prob(const LogprobTrace& trace, double k_percent);

/// Mean of the ceil(k% * len) largest logprobs; higher means member.
double max_k_prob(const LogprobTrace& trace, double k_percent);

/// Level passed to zlib; Z_DEFAULT_COMPRESSION resolves to 6.
inline constexpr int kCompressionLevel = 6;

/// Compressed size of the UTF-8 text in bits (zlib stream, level 6).
std::size_t compressed_bits(std::string_view text);

/// Model negative log-likelihood in bits divided by the compressed size of
/// the text in bits; lower means member.
double compression_ratio(const LogprobTrace& trace, std::string_view text);

enum class AttackKind { perplexity, min_k, max_k, compression_ratio, meta };

struct AttackSpec {
  AttackKind kind = AttackKind::perplexity;
  double k = 0;  // percent, for min_k / max_k

  std::string name() const;
  bool higher_means_member() const noexcept;
  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

/// "ppl", "min_k:10", "max_k:10", "zlib", "meta" (comma separated list).
AttackSpec parse_attack(std::string_view name);
std::vector<AttackSpec> parse_attacks(std::string_view list);

inline constexpr const char* kDefaultAttacks = "meta,min_k:10,ppl,zlib,max_k:10";

/// Base attack scores of one document.
struct MiaScores {
  std::string doc_id;
  double ppl = 0;
  std::map<double, double> min_k;
  std::map<double, double> max_k;
  double compression_ratio = 0;
  std::optional<double> meta;

  /// Value of a non-meta attack.
  double value(const AttackSpec& attack) const;
};

inline const std::vector<double> kMetaKValues{5, 10, 20, 30, 40, 50};

MiaScores compute_scores(const LogprobTrace& trace, std::string_view text,
                         std::span<const double> k_values);

/// Default Meta_MIA family: ppl, zlib, min_k and max_k at 5..50%.
std::vector<std::string> default_meta_features();

/// Looks a named feature ("ppl", "zlib", "min_k:20", ...) up in the scores.
double feature_value(const MiaScores& scores, std::string_view name);

enum class MetaLoss { logistic, squared };

struct MetaTrainOptions {
  MetaLoss loss = MetaLoss::logistic;
  std::size_t iterations = 2000;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

/// Linear decision function over standardized features.
struct MetaModel {
  std::vector<std::string> features;   // kept, in order
  std::vector<std::string> dropped;    // zero variance in training
  std::vector<double> means;
  std::vector<double> scales;
  std::vector<double> weights;
  double intercept = 0;
  MetaLoss loss = MetaLoss::logistic;
  std::size_t training_rows = 0;
  std::uint64_t seed = 0;
};

/// Rows are feature values in `feature_names` order.
/// Throws Error(single_class_training); zero-variance features are dropped
/// and listed in the model.
MetaModel meta_train(std::span<const std::string> feature_names,
                     std::span<const std::vector<double>> rows, std::span<const Label> labels,
                     const MetaTrainOptions& options = {});

/// Linear decision value of a row given in `feature_names` order; higher
/// means member. Monotone in the logistic probability.
double meta_predict(const MetaModel& model, std::span<const std::string> feature_names,
                    std::span<const double> row);

nlohmann::json to_json(const MetaModel& model);

struct MiaEvalOptions {
  std::vector<AttackSpec> attacks = parse_attacks(kDefaultAttacks);
  std::size_t folds = 5;
  std::size_t runs = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> meta_features = default_meta_features();
  MetaTrainOptions meta;
  unsigned threads = 1;
};

struct AttackEvaluation {
  AttackSpec attack;
  RocSummary summary;           // per-fold ROCs over all runs
  std::optional<RocReport> pooled;  // whole selection, threshold attacks only
};

struct MiaEvalReport {
  std::vector<AttackEvaluation> attacks;
  std::vector<MiaScores> scores;      // selection order, members first
  std::vector<Label> labels;
  std::string model_id;
};

/// Scores every selected document and evaluates each attack with stratified
/// k-fold splits (seed + run for each run). Meta_MIA is cross-fitted: it is
/// trained on the other folds and scores only held-out documents. Throws
/// Error(missing_trace) listing every selected id without a trace.
MiaEvalReport evaluate_mia(const SelectionResult& selection, const LabeledPool& pool,
                           const TraceStore& traces, const MiaEvalOptions& options);

nlohmann::json to_json(const MiaEvalReport& report, const MiaEvalOptions& options);
std::string mia_scores_csv(const MiaEvalReport& report);

}  // namespace miabench
