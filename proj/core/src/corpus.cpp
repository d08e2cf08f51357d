#include "miabench/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "miabench/error.hpp"
#include "miabench/hash.hpp"
#include "miabench/random.hpp"
#include "miabench/utf8.hpp"

namespace miabench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view label_name(Label label) noexcept {
  return label == Label::member ? "member" : "non_member";
}

Document make_document(std::string id, std::string text) {
  Document doc;
  doc.id = std::move(id);
  doc.char_tokens = utf8::decode(text);
  doc.raw_text = text;
  doc.text = std::move(text);
  return doc;
}

json to_json(const CleaningConfig& config) {
  return json{{"start_marker", config.start_marker},
              {"end_marker", config.end_marker},
              {"drop_before_start", config.drop_before_start},
              {"drop_after_end", config.drop_after_end}};
}

CleaningConfig cleaning_from_json(const json& j) {
  CleaningConfig c;
  c.start_marker = j.value("start_marker", std::string{});
  c.end_marker = j.value("end_marker", std::string{});
  c.drop_before_start = j.value("drop_before_start", true);
  c.drop_after_end = j.value("drop_after_end", true);
  return c;
}

namespace {

struct Line {
  std::size_t begin;
  std::size_t end;  // one past the terminating newline, if any
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? text.size() : nl + 1;
    lines.push_back({pos, end});
    pos = end;
  }
  return lines;
}

// Line without its terminator, so "$" anchors at the end of the text.
std::string_view line_content(std::string_view raw, const Line& line) {
  std::string_view s = raw.substr(line.begin, line.end - line.begin);
  if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

std::regex compile_marker(const std::string& pattern) {
  try {
    return std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::config_error, "invalid cleaning marker '" + pattern + "': " + e.what());
  }
}

}  // namespace

std::string clean_text(std::string_view raw, const CleaningConfig& config) {
  if (config.empty()) return std::string(raw);
  const auto lines = split_lines(raw);

  // Half-open line ranges removed from the output.
  std::vector<std::pair<std::size_t, std::size_t>> drop;
  std::size_t search_from = 0;
  if (!config.start_marker.empty()) {
    const auto re = compile_marker(config.start_marker);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string_view line = line_content(raw, lines[i]);
      if (std::regex_search(line.begin(), line.end(), re)) {
        drop.emplace_back(config.drop_before_start ? 0 : i, i + 1);
        search_from = i + 1;
        break;
      }
    }
  }
  if (!config.end_marker.empty()) {
    const auto re = compile_marker(config.end_marker);
    for (std::size_t i = search_from; i < lines.size(); ++i) {
      const std::string_view line = line_content(raw, lines[i]);
      if (std::regex_search(line.begin(), line.end(), re)) {
        drop.emplace_back(i, config.drop_after_end ? lines.size() : i + 1);
        break;
      }
    }
  }

  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    bool dropped = std::any_of(drop.begin(), drop.end(),
                               [i](const auto& r) { return i >= r.first && i < r.second; });
    if (!dropped) out.append(raw.substr(lines[i].begin, lines[i].end - lines[i].begin));
  }
  return out;
}

void LabeledPool::add(Document doc, Label label) {
  if (doc.id.empty()) throw Error(ErrorCode::parse_error, "document id must be non-empty");
  if (index_.contains(doc.id)) throw Error(ErrorCode::duplicate_id, "id '" + doc.id + "'");
  auto& side = label == Label::member ? members_ : non_members_;
  index_.emplace(doc.id, Slot{label, side.size()});
  side.push_back(std::move(doc));
}

bool LabeledPool::contains(std::string_view id) const {
  return index_.contains(std::string(id));
}

std::optional<Label> LabeledPool::label_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second.label;
}

const Document& LabeledPool::get(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw Error(ErrorCode::unknown_id, "id '" + std::string(id) + "' not in pool");
  return side(it->second.label)[it->second.index];
}

std::vector<std::string> LabeledPool::sorted_ids(Label label) const {
  std::vector<std::string> ids;
  ids.reserve(side(label).size());
  for (const auto& d : side(label)) ids.push_back(d.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

IngestReport ingest_records(const std::vector<IngestRecord>& records, Label label,
                            const CleaningConfig& cleaning, LabeledPool& pool) {
  IngestReport report;
  for (const auto& rec : records) {
    Document doc;
    doc.id = rec.id;
    try {
      utf8::decode(rec.text);
    } catch (const Error& e) {
      throw Error(ErrorCode::decode_error, "document '" + rec.id + "': " + e.what());
    }
    doc.raw_text = rec.text;
    doc.text = clean_text(rec.text, cleaning);
    if (doc.text.find_first_not_of(" \t\r\n") == std::string::npos) {
      report.skipped_empty_ids.push_back(rec.id);
      continue;
    }
    doc.char_tokens = utf8::decode(doc.text);
    pool.add(std::move(doc), label);
    report.added_ids.push_back(rec.id);
    ++report.added;
  }
  return report;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

std::vector<IngestRecord> read_records_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  std::vector<IngestRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      utf8::decode(line);
    } catch (const Error& e) {
      throw Error(ErrorCode::decode_error, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::parse_error,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") ||
        !j["text"].is_string())
      throw Error(ErrorCode::parse_error, path.string() + ":" + std::to_string(lineno) +
                                              ": expected {\"id\": string, \"text\": string}");
    records.push_back({j["id"].get<std::string>(), j["text"].get<std::string>()});
  }
  return records;
}

IngestReport ingest(const fs::path& source, Label label, const CleaningConfig& cleaning,
                    LabeledPool& pool) {
  std::vector<IngestRecord> records;
  if (fs::is_directory(source)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(source))
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) records.push_back({f.stem().string(), read_file(f)});
  } else if (fs::is_regular_file(source)) {
    records = read_records_jsonl(source);
  } else {
    throw Error(ErrorCode::io_error, "source '" + source.string() + "' is not readable");
  }
  return ingest_records(records, label, cleaning, pool);
}

void write_records_jsonl(const fs::path& path, const std::vector<Document>& docs, bool cleaned) {
  std::string out;
  for (const auto& d : docs) {
    out += json{{"id", d.id}, {"text", cleaned ? d.text : d.raw_text}}.dump();
    out += '\n';
  }
  write_file(path, out);
}

json pool_manifest(const LabeledPool& pool, const CleaningConfig& cleaning) {
  json members = json::array();
  json non_members = json::array();
  for (const auto& d : pool.members()) members.push_back(d.id);
  for (const auto& d : pool.non_members()) non_members.push_back(d.id);
  return json{{"members", members}, {"non_members", non_members}, {"cleaning", to_json(cleaning)}};
}

void save_pool(const fs::path& dir, const LabeledPool& pool, const CleaningConfig& cleaning) {
  fs::create_directories(dir);
  write_file(dir / "pool.json", pool_manifest(pool, cleaning).dump(2) + "\n");
  write_records_jsonl(dir / "members.jsonl", pool.members());
  write_records_jsonl(dir / "non_members.jsonl", pool.non_members());
}

LabeledPool load_pool(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "pool.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, (dir / "pool.json").string() + ": " + e.what());
  }
  LabeledPool pool;
  for (Label label : {Label::member, Label::non_member}) {
    const auto file = dir / (label == Label::member ? "members.jsonl" : "non_members.jsonl");
    // Texts on disk are already cleaned.
    ingest_records(read_records_jsonl(file), label, CleaningConfig{}, pool);
  }
  for (Label label : {Label::member, Label::non_member}) {
    const char* key = label == Label::member ? "members" : "non_members";
    if (!manifest.contains(key) || manifest[key].size() != pool.side(label).size())
      throw Error(ErrorCode::parse_error, "pool manifest does not match " + std::string(key) + ".jsonl");
    for (const auto& id : manifest[key])
      if (pool.label_of(id.get<std::string>()) != label)
        throw Error(ErrorCode::parse_error, "manifest id '" + id.get<std::string>() + "' missing");
  }
  return pool;
}

std::string_view method_name(SelectionMethod method) noexcept {
  switch (method) {
    case SelectionMethod::random: return "random";
    case SelectionMethod::no_ngram: return "no-ngram";
    case SelectionMethod::no_class: return "no-class";
  }
  return "random";
}

SelectionMethod parse_method(std::string_view name) {
  if (name == "random") return SelectionMethod::random;
  if (name == "no-ngram" || name == "no_ngram") return SelectionMethod::no_ngram;
  if (name == "no-class" || name == "no_class") return SelectionMethod::no_class;
  throw Error(ErrorCode::config_error, "unknown selection method '" + std::string(name) + "'");
}

json to_json(const SelectionResult& s) {
  return json{{"schema_version", kSelectionSchemaVersion},
              {"method", method_name(s.method)},
              {"seed", s.seed},
              {"n", s.members.size()},
              {"member_ids", s.members},
              {"non_member_ids", s.non_members},
              {"diagnostics", s.diagnostics}};
}

SelectionResult selection_from_json(const json& j) {
  try {
    // Accept both a bare selection and an artifact wrapping one.
    const json& body = j.contains("selection") ? j.at("selection") : j;
    SelectionResult s;
    s.method = parse_method(body.at("method").get<std::string>());
    s.seed = body.at("seed").get<std::uint64_t>();
    s.members = body.at("member_ids").get<std::vector<std::string>>();
    s.non_members = body.at("non_member_ids").get<std::vector<std::string>>();
    s.diagnostics = body.value("diagnostics", json::object());
    if (body.at("n").get<std::size_t>() != s.members.size())
      throw Error(ErrorCode::parse_error, "selection n does not match member_ids");
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed selection: ") + e.what());
  }
}

void validate_selection(const SelectionResult& s, const LabeledPool& pool) {
  if (s.members.size() != s.non_members.size())
    throw Error(ErrorCode::parse_error, "selection sides differ in size");
  std::unordered_set<std::string_view> seen;
  for (Label label : {Label::member, Label::non_member}) {
    const auto& ids = label == Label::member ? s.members : s.non_members;
    for (const auto& id : ids) {
      if (!seen.insert(id).second) throw Error(ErrorCode::duplicate_id, "id '" + id + "' selected twice");
      if (pool.label_of(id) != label)
        throw Error(ErrorCode::unknown_id,
                    "selected id '" + id + "' is not a " + std::string(label_name(label)) + " in the pool");
    }
  }
}

SelectionResult random_sample(const LabeledPool& pool, std::size_t n, std::uint64_t seed) {
  SelectionResult result;
  result.method = SelectionMethod::random;
  result.seed = seed;
  for (Label label : {Label::member, Label::non_member}) {
    auto ids = pool.sorted_ids(label);
    if (n > ids.size())
      throw Error(ErrorCode::pool_too_small, "requested " + std::to_string(n) + " " +
                                                 std::string(label_name(label)) + "s but pool has " +
                                                 std::to_string(ids.size()));
    Rng rng(derive_seed(seed, label == Label::member ? "random_sample/members"
                                                     : "random_sample/non_members"));
    auto& out = label == Label::member ? result.members : result.non_members;
    for (std::size_t slot : sample_without_replacement(ids.size(), n, rng)) out.push_back(ids[slot]);
  }
  result.diagnostics = json{{"pool_members", pool.members().size()},
                            {"pool_non_members", pool.non_members().size()}};
  return result;
}

std::vector<const Document*> resolve(const LabeledPool& pool, const std::vector<std::string>& ids) {
  std::vector<const Document*> docs;
  docs.reserve(ids.size());
  for (const auto& id : ids) docs.push_back(&pool.get(id));
  return docs;
}

}  // namespace miabench
