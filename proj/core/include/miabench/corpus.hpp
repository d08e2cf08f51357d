#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace miabench {

enum class Label { member, non_member };

std::string_view label_name(Label label) noexcept;

/// One text item. Only `text` (the cleaned form) feeds downstream modules;
/// `raw_text` is kept for auditing the cleaning step.
struct Document {
  std::string id;
  std::string raw_text;
  std::string text;
  std::vector<char32_t> char_tokens;  // Unicode scalar values of `text`
};

/// Builds a document whose cleaned text equals its raw text.
Document make_document(std::string id, std::string text);

/// Line-oriented boilerplate stripping. Markers are ECMAScript regular
/// expressions searched within each line. When the start marker matches,
/// the matching line (and, with drop_before_start, everything above it) is
/// removed; likewise the end-marker line and everything below it with
/// drop_after_end. Empty markers disable the corresponding rule. Text
/// outside the matched regions is returned byte-for-byte.
struct CleaningConfig {
  std::string start_marker;
  std::string end_marker;
  bool drop_before_start = true;
  bool drop_after_end = true;

  bool empty() const noexcept { return start_marker.empty() && end_marker.empty(); }
};

nlohmann::json to_json(const CleaningConfig& config);
CleaningConfig cleaning_from_json(const nlohmann::json& j);

std::string clean_text(std::string_view raw, const CleaningConfig& config);

/// Known members and known non-members. Ids are unique across both sides.
/// Populated once under exclusive access, then read-only.
class LabeledPool {
 public:
  /// Throws Error(duplicate_id) if the id is already present on either side.
  void add(Document doc, Label label);

  const std::vector<Document>& members() const noexcept { return members_; }
  const std::vector<Document>& non_members() const noexcept { return non_members_; }
  const std::vector<Document>& side(Label label) const noexcept {
    return label == Label::member ? members_ : non_members_;
  }

  bool contains(std::string_view id) const;
  std::optional<Label> label_of(std::string_view id) const;
  /// Throws Error(unknown_id).
  const Document& get(std::string_view id) const;

  /// Lexicographically sorted ids of one side.
  std::vector<std::string> sorted_ids(Label label) const;

  std::size_t size() const noexcept { return members_.size() + non_members_.size(); }

 private:
  struct Slot {
    Label label;
    std::size_t index;
  };
  std::vector<Document> members_;
  std::vector<Document> non_members_;
  std::unordered_map<std::string, Slot> index_;
};

struct IngestRecord {
  std::string id;
  std::string text;
};

struct IngestReport {
  std::size_t added = 0;
  std::vector<std::string> added_ids;
  std::vector<std::string> skipped_empty_ids;  // EmptyDocumentAfterCleaning
};

/// Adds records to `pool` under `label`. Documents that are empty after
/// cleaning are skipped and listed in the report. Invalid UTF-8 throws
/// Error(decode_error) with the record id and byte offset.
IngestReport ingest_records(const std::vector<IngestRecord>& records, Label label,
                            const CleaningConfig& cleaning, LabeledPool& pool);

/// Source is either a directory of .txt files (id = filename stem, files
/// visited in sorted order) or a JSONL file of {"id": str, "text": str}.
IngestReport ingest(const std::filesystem::path& source, Label label,
                    const CleaningConfig& cleaning, LabeledPool& pool);

std::vector<IngestRecord> read_records_jsonl(const std::filesystem::path& path);
void write_records_jsonl(const std::filesystem::path& path, const std::vector<Document>& docs,
                         bool cleaned = true);

/// {"members": [ids], "non_members": [ids], "cleaning": {...}}
nlohmann::json pool_manifest(const LabeledPool& pool, const CleaningConfig& cleaning);

/// Writes manifest + cleaned texts into `dir` (pool.json, members.jsonl,
/// non_members.jsonl) and reloads them.
void save_pool(const std::filesystem::path& dir, const LabeledPool& pool,
               const CleaningConfig& cleaning);
LabeledPool load_pool(const std::filesystem::path& dir);

enum class SelectionMethod { random, no_ngram, no_class };

std::string_view method_name(SelectionMethod method) noexcept;
SelectionMethod parse_method(std::string_view name);

/// Output of a dataset construction: equally sized member / non-member id
/// lists drawn from the pool.
struct SelectionResult {
  std::vector<std::string> members;
  std::vector<std::string> non_members;
  SelectionMethod method = SelectionMethod::random;
  std::uint64_t seed = 0;
  nlohmann::json diagnostics = nlohmann::json::object();

  std::size_t size() const noexcept { return members.size(); }
};

inline constexpr int kSelectionSchemaVersion = 1;

nlohmann::json to_json(const SelectionResult& selection);
SelectionResult selection_from_json(const nlohmann::json& j);

/// Checks sizes match and every id belongs to the right side of the pool.
void validate_selection(const SelectionResult& selection, const LabeledPool& pool);

/// Uniform sample without replacement of n ids from each side, drawn from
/// the sorted id lists so the result depends only on (pool ids, n, seed).
SelectionResult random_sample(const LabeledPool& pool, std::size_t n, std::uint64_t seed);

/// Resolves ids to documents; throws Error(unknown_id).
std::vector<const Document*> resolve(const LabeledPool& pool, const std::vector<std::string>& ids);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace miabench
