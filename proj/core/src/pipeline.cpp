#include "miabench/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "miabench/classifier.hpp"
#include "miabench/corpus.hpp"
#include "miabench/dataset_builder.hpp"
#include "miabench/mia.hpp"
#include "miabench/ngram.hpp"
#include "miabench/parallel.hpp"
#include "miabench/reference_lm.hpp"
#include "miabench/stats.hpp"
#include "miabench/synthetic.hpp"

#ifndef MIABENCH_VERSION
#define MIABENCH_VERSION "0.0.0"
#endif

namespace miabench {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string_view tool_version() noexcept { return MIABENCH_VERSION; }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      // paths
      {"pool", "pool", "pool directory (written by synth/ingest, read by later stages)"},
      {"out", "out", "artifact directory"},
      {"members", "", "ingest: member source (.txt directory or JSONL)"},
      {"non_members", "", "ingest: non-member source (.txt directory or JSONL)"},
      {"selection", "", "selection JSON (default <out>/selection.json)"},
      {"model", "", "reference LM file (default <out>/reference_lm.bin)"},
      {"traces", "", "log-prob trace JSONL (default <out>/traces.jsonl)"},
      {"start_marker", "", "ingest: regex of the boilerplate start line"},
      {"end_marker", "", "ingest: regex of the boilerplate end line"},
      {"drop_before_start", "true", "ingest: drop lines above the start marker"},
      {"drop_after_end", "true", "ingest: drop lines below the end marker"},
      // selection
      {"method", "random", "build: random | no-ngram | no-class"},
      {"n", "200", "documents per side in the selection"},
      {"seed", "0", "root seed"},
      {"gram_n", "7", "character n-gram length for overlap"},
      {"target_fp_rate", "0.001", "Bloom filter false-positive target"},
      {"overlap_mode", "occurrence", "occurrence | distinct"},
      {"balanced", "auto", "no-class: true | false | auto (balanced for one classifier)"},
      {"ensemble", "word", "no-class: comma list of classifier units (word, character)"},
      // blind classifier
      {"folds", "5", "cross-validation folds"},
      {"nb_alpha", "1", "naive Bayes Laplace smoothing"},
      {"nb_unit", "word", "blind classifier unit: word | character"},
      {"nb_min_n", "1", "smallest n-gram length of classifier features"},
      {"nb_max_n", "3", "largest n-gram length of classifier features"},
      {"nb_bucket_bits", "20", "log2 of the feature hash space"},
      // reference LM
      {"lm_order", "5", "reference LM order"},
      {"lm_lambda", "0.01", "reference LM add-lambda smoothing"},
      {"lm_unit", "character", "reference LM unit: character | word"},
      {"lm_weights", "", "comma list of interpolation weights, orders 1..lm_order"},
      {"lm_train_on", "members", "members (whole member pool) | selection (selected members)"},
      {"lm_score_scope", "selection", "selection | pool"},
      // attacks
      {"attacks", kDefaultAttacks, "comma list: ppl, zlib, meta, min_k:K, max_k:K"},
      {"runs", "1", "mia-eval repetitions (seed, seed+1, ...)"},
      {"meta_features", "", "comma list of Meta_MIA features (default family when empty)"},
      {"meta_loss", "logistic", "logistic | squared"},
      {"meta_iterations", "2000", "Meta_MIA gradient steps"},
      {"meta_lr", "0.5", "Meta_MIA learning rate"},
      {"meta_l2", "0.0001", "Meta_MIA l2 penalty"},
      // report
      {"hist_bins", "20", "report: overlap histogram bins"},
      // synthetic corpus
      {"synth_members", "2000", "synth: member documents"},
      {"synth_non_members", "1000", "synth: non-member documents"},
      {"synth_seed", "2024", "synth: generator seed"},
      {"synth_shared_vocab", "500", "synth: shared vocabulary size"},
      {"synth_private_vocab", "250", "synth: private vocabulary size per class"},
      {"synth_min_words", "70", "synth: shortest document in words"},
      {"synth_max_words", "130", "synth: longest document in words"},
      {"synth_clean_fraction", "0.5", "synth: fraction of documents without private words"},
      {"synth_member_shift", "0.05:0.35", "synth: member private-word rate range lo:hi"},
      {"synth_non_member_shift", "0.05:0.35", "synth: non-member private-word rate range lo:hi"},
      {"synth_zipf", "1", "synth: Zipf exponent of word frequencies"},
      // misc
      {"threads", "1", "worker cap (0 = hardware concurrency)"},
      {"tag", "", "free-form label copied into artifacts"},
  };
  return keys;
}

namespace {

[[noreturn]] void bad_value(std::string_view key, const std::string& value, std::string_view want) {
  throw Error(ErrorCode::config_error,
              "key '" + std::string(key) + "': expected " + std::string(want) + ", got '" + value + "'");
}

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto lo = s.find_first_not_of(ws);
  if (lo == std::string_view::npos) return {};
  const auto hi = s.find_last_not_of(ws);
  return std::string(s.substr(lo, hi - lo + 1));
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_.emplace(k.name, k.default_value);
}

bool RunConfig::has_key(std::string_view key) const { return values_.find(key) != values_.end(); }

void RunConfig::set(std::string_view key, std::string value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::config_error, "unknown config key '" + std::string(key) + "'");
  it->second = std::move(value);
}

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::internal, "unregistered config key '" + std::string(key) + "'");
  return it->second;
}

std::uint64_t RunConfig::u64(std::string_view key) const {
  const auto& v = get(key);
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

int RunConfig::integer(std::string_view key) const {
  const auto& v = get(key);
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

namespace {

double parse_real(std::string_view key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out))
    bad_value(key, v, "a finite number");
  return out;
}

}  // namespace

double RunConfig::real(std::string_view key) const { return parse_real(key, get(key)); }

bool RunConfig::flag(std::string_view key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> RunConfig::list(std::string_view key) const {
  std::vector<std::string> out;
  std::string_view rest = get(key);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    auto item = trim(rest.substr(0, comma));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

fs::path RunConfig::path_or(std::string_view key, std::string_view default_name) const {
  const auto& v = get(key);
  if (!v.empty()) return v;
  return out_dir() / default_name;
}

json RunConfig::to_json() const {
  json j = json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

RunConfig parse_config_text(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::config_error, "line " + std::to_string(line_no) + ": expected key=value");
    base.set(trim(std::string_view(s).substr(0, eq)), trim(std::string_view(s).substr(eq + 1)));
  }
  return base;
}

RunConfig load_config_file(const fs::path& path, RunConfig base) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::config_error, std::string(e.what()));
  }
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::config_error, path.string() + ": " + e.what());
    }
    const json& cfg = j.contains("config") ? j.at("config") : j;
    if (!cfg.is_object()) throw Error(ErrorCode::config_error, path.string() + ": no config object");
    for (const auto& [k, v] : cfg.items()) {
      if (!v.is_string()) throw Error(ErrorCode::config_error, "key '" + k + "': value must be a string");
      base.set(k, v.get<std::string>());
    }
    return base;
  }
  return parse_config_text(text, std::move(base));
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"synth",    "ingest",   "overlap",  "build",  "blind-eval",
                                              "lm-train", "lm-score", "mia-eval", "report", "pipeline"};
  return names;
}

json artifact(std::string_view kind, const RunConfig& config) {
  return json{{"schema_version", kArtifactSchemaVersion},
              {"kind", kind},
              {"tool_version", tool_version()},
              {"config", config.to_json()}};
}

std::string dump_artifact(const json& j) { return j.dump(2) + "\n"; }

namespace {

// ---------------------------------------------------------------------------
// Stage plumbing

struct Stage {
  const RunConfig& cfg;
  std::ostream& log;
  RunResult& result;

  unsigned threads() const {
    const auto t = cfg.size("threads");
    if (t == 0) return std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(t);
  }

  void write(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file(path, contents);
    result.artifacts.push_back(path);
    log << "wrote " << path.string() << '\n';
  }

  void write_json(std::string_view name, const json& j) { write(cfg.out_dir() / name, dump_artifact(j)); }

  json envelope(std::string_view kind) const {
    json j = artifact(kind, cfg);
    if (!cfg.get("tag").empty()) j["tag"] = cfg.get("tag");
    return j;
  }

  LabeledPool pool() const { return load_pool(cfg.get("pool")); }

  fs::path selection_path() const { return cfg.path_or("selection", "selection.json"); }

  SelectionResult selection(const LabeledPool& pool) const {
    const auto path = selection_path();
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
    }
    auto s = selection_from_json(j);
    validate_selection(s, pool);
    return s;
  }
};

std::pair<double, double> parse_range(std::string_view key, const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) bad_value(key, v, "lo:hi");
  const double lo = parse_real(key, v.substr(0, colon));
  const double hi = parse_real(key, v.substr(colon + 1));
  if (!(0 <= lo && lo <= hi && hi <= 1)) bad_value(key, v, "0 <= lo <= hi <= 1");
  return {lo, hi};
}

FeatureConfig feature_config(const RunConfig& cfg, NgramUnit unit) {
  FeatureConfig f;
  f.unit = unit;
  f.min_n = cfg.integer("nb_min_n");
  f.max_n = cfg.integer("nb_max_n");
  const auto bits = cfg.u64("nb_bucket_bits");
  if (f.min_n < 1 || f.max_n < f.min_n) bad_value("nb_max_n", cfg.get("nb_max_n"), "nb_max_n >= nb_min_n >= 1");
  if (bits < 1 || bits > 28) bad_value("nb_bucket_bits", cfg.get("nb_bucket_bits"), "1..28");
  f.bucket_bits = static_cast<unsigned>(bits);
  return f;
}

ClassifierSpec classifier_spec(const RunConfig& cfg, NgramUnit unit) {
  ClassifierSpec s{feature_config(cfg, unit), cfg.real("nb_alpha")};
  if (!(s.alpha > 0)) bad_value("nb_alpha", cfg.get("nb_alpha"), "a positive number");
  return s;
}

LmParams lm_params(const RunConfig& cfg) {
  LmParams p;
  p.order = cfg.integer("lm_order");
  p.lambda = cfg.real("lm_lambda");
  p.unit = parse_lm_unit(cfg.get("lm_unit"));
  for (const auto& w : cfg.list("lm_weights")) p.weights.push_back(parse_real("lm_weights", w));
  return p;
}

// Known members not in the selection: the fixed overlap reference.
std::vector<const Document*> left_out_members(const LabeledPool& pool, const SelectionResult& sel) {
  const std::set<std::string, std::less<>> chosen(sel.members.begin(), sel.members.end());
  std::vector<const Document*> out;
  for (const auto& id : pool.sorted_ids(Label::member))
    if (!chosen.contains(id)) out.push_back(&pool.get(id));
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_synth(Stage& st) {
  const auto& c = st.cfg;
  SyntheticCorpusConfig s;
  s.members = c.size("synth_members");
  s.non_members = c.size("synth_non_members");
  s.seed = c.u64("synth_seed");
  s.shared_vocab = c.size("synth_shared_vocab");
  s.private_vocab = c.size("synth_private_vocab");
  s.min_words = c.size("synth_min_words");
  s.max_words = c.size("synth_max_words");
  s.clean_fraction = c.real("synth_clean_fraction");
  std::tie(s.member_shift_lo, s.member_shift_hi) = parse_range("synth_member_shift", c.get("synth_member_shift"));
  std::tie(s.non_member_shift_lo, s.non_member_shift_hi) =
      parse_range("synth_non_member_shift", c.get("synth_non_member_shift"));
  s.zipf_exponent = c.real("synth_zipf");
  if (s.members == 0 || s.non_members == 0)
    throw Error(ErrorCode::config_error, "synth needs at least one document per side");
  if (s.min_words < 1 || s.max_words < s.min_words)
    throw Error(ErrorCode::config_error, "synth needs 1 <= synth_min_words <= synth_max_words");
  if (s.shared_vocab == 0 || s.private_vocab == 0)
    throw Error(ErrorCode::config_error, "synth vocabularies must be non-empty");
  if (!(s.clean_fraction >= 0 && s.clean_fraction <= 1))
    bad_value("synth_clean_fraction", c.get("synth_clean_fraction"), "a fraction in [0, 1]");

  const auto pool = synthetic_pool(s);
  save_pool(c.get("pool"), pool, CleaningConfig{});
  st.log << "wrote pool " << c.get("pool") << " (" << pool.members().size() << " members, "
         << pool.non_members().size() << " non-members)\n";
  json j = st.envelope("synth");
  j["corpus"] = to_json(s);
  j["members"] = pool.members().size();
  j["non_members"] = pool.non_members().size();
  st.write_json("synth.json", j);
}

void cmd_ingest(Stage& st) {
  const auto& c = st.cfg;
  if (c.get("members").empty() && c.get("non_members").empty())
    throw Error(ErrorCode::config_error, "ingest needs 'members' and/or 'non_members'");
  CleaningConfig cleaning{c.get("start_marker"), c.get("end_marker"), c.flag("drop_before_start"),
                          c.flag("drop_after_end")};
  LabeledPool pool;
  json sides = json::object();
  for (auto [key, label] : {std::pair{"members", Label::member}, std::pair{"non_members", Label::non_member}}) {
    if (c.get(key).empty()) continue;
    const auto rep = ingest(c.get(key), label, cleaning, pool);
    sides[key] = json{{"source", c.get(key)}, {"added", rep.added}, {"skipped_empty", rep.skipped_empty_ids}};
    for (const auto& id : rep.skipped_empty_ids)
      st.log << "skipped " << id << ": EmptyDocumentAfterCleaning\n";
  }
  save_pool(c.get("pool"), pool, cleaning);
  st.log << "wrote pool " << c.get("pool") << '\n';
  json j = st.envelope("ingest");
  j["cleaning"] = to_json(cleaning);
  j["sides"] = sides;
  j["pool"] = pool_manifest(pool, cleaning);
  st.write_json("ingest.json", j);
}

void cmd_build(Stage& st) {
  const auto& c = st.cfg;
  const auto method = parse_method(c.get("method"));
  const auto n = c.size("n");
  const auto seed = c.u64("seed");
  if (n == 0) bad_value("n", c.get("n"), "a positive count");
  const auto pool = st.pool();
  SelectionResult sel;
  switch (method) {
    case SelectionMethod::random:
      sel = random_sample(pool, n, seed);
      break;
    case SelectionMethod::no_ngram: {
      NoNgramOptions o;
      o.n = n;
      o.gram_n = c.integer("gram_n");
      o.target_fp_rate = c.real("target_fp_rate");
      o.mode = parse_overlap_mode(c.get("overlap_mode"));
      o.seed = seed;
      o.threads = st.threads();
      sel = build_no_ngram(pool, o);
      break;
    }
    case SelectionMethod::no_class: {
      NoClassOptions o;
      o.n = n;
      o.seed = seed;
      o.threads = st.threads();
      o.ensemble.clear();
      for (const auto& u : c.list("ensemble")) o.ensemble.push_back(classifier_spec(c, parse_ngram_unit(u)));
      if (o.ensemble.empty()) bad_value("ensemble", c.get("ensemble"), "at least one classifier unit");
      const auto& b = c.get("balanced");
      if (b != "auto") o.balanced = c.flag("balanced");
      sel = build_no_class(pool, o);
      break;
    }
  }
  json j = st.envelope("selection");
  j["selection"] = to_json(sel);
  const auto path = st.selection_path();
  st.write(path, dump_artifact(j));
  if (sel.diagnostics.contains("final_ks"))
    st.log << "ks " << sel.diagnostics["final_ks"].dump() << " (random baseline "
           << sel.diagnostics["random_baseline_ks"].dump() << ")\n";
}

void cmd_overlap(Stage& st) {
  const auto& c = st.cfg;
  const auto pool = st.pool();
  const auto sel = st.selection(pool);
  const int gram_n = c.integer("gram_n");
  const auto mode = parse_overlap_mode(c.get("overlap_mode"));
  const auto reference = left_out_members(pool, sel);
  const auto index = build_index(reference, gram_n, c.real("target_fp_rate"));
  const auto ref_id = reference_id(reference);
  const auto dm = distribution(resolve(pool, sel.members), index, ref_id, mode, st.threads());
  const auto dn = distribution(resolve(pool, sel.non_members), index, ref_id, mode, st.threads());
  const auto sm = dm.scores();
  const auto sn = dn.scores();
  if (sm.empty() || sn.empty())
    throw Error(ErrorCode::all_candidates_too_short,
                "no selected document on one side has " + std::to_string(gram_n) + " characters");
  const double ks = ks_distance(sm, sn);

  // Histogram over [0, 1] for distribution plots.
  const auto bins = std::max<std::size_t>(1, c.size("hist_bins"));
  json hist = json::array();
  std::vector<std::size_t> hm(bins), hn(bins);
  auto bin_of = [&](double s) { return std::min(bins - 1, static_cast<std::size_t>(s * static_cast<double>(bins))); };
  for (double s : sm) ++hm[bin_of(s)];
  for (double s : sn) ++hn[bin_of(s)];
  for (std::size_t b = 0; b < bins; ++b)
    hist.push_back(json{{"lo", static_cast<double>(b) / static_cast<double>(bins)},
                        {"hi", static_cast<double>(b + 1) / static_cast<double>(bins)},
                        {"members", hm[b]},
                        {"non_members", hn[b]}});

  json j = st.envelope("overlap");
  j["method"] = method_name(sel.method);
  j["gram_n"] = gram_n;
  j["overlap_mode"] = overlap_mode_name(mode);
  j["reference_id"] = ref_id;
  j["reference_size"] = reference.size();
  j["index"] = index.describe();
  j["members"] = distribution_summary(dm);
  j["non_members"] = distribution_summary(dn);
  j["ks"] = ks;
  if (sel.diagnostics.contains("final_ks")) j["selection_ks"] = sel.diagnostics["final_ks"];
  j["histogram"] = hist;
  st.write_json("overlap.json", j);

  std::ostringstream csv;
  csv.precision(17);
  csv << "doc_id,label,score\n";
  for (const auto& e : dm.entries) csv << e.doc_id << ",member," << e.score << '\n';
  for (const auto& e : dn.entries) csv << e.doc_id << ",non_member," << e.score << '\n';
  st.write(c.out_dir() / "overlap_scores.csv", csv.str());
  st.log << "ks " << json(ks).dump() << '\n';
}

std::string roc_csv_header() { return "series,fpr,tpr\n"; }

void cmd_blind_eval(Stage& st) {
  const auto& c = st.cfg;
  BlindEvalOptions o;
  o.folds = c.size("folds");
  o.seed = c.u64("seed");
  o.classifier = classifier_spec(c, parse_ngram_unit(c.get("nb_unit")));
  o.threads = st.threads();
  const auto pool = st.pool();
  const auto sel = st.selection(pool);
  const auto rep = evaluate_blind(pool, sel, o);

  json j = st.envelope("blind_eval");
  j["method"] = method_name(sel.method);
  j["n"] = sel.size();
  j["classifier"] = to_json(o.classifier);
  j["folds"] = o.folds;
  j["result"] = to_json(rep);
  st.write_json("blind_eval.json", j);

  std::string csv = roc_csv_header();
  for (std::size_t f = 0; f < rep.summary.folds.size(); ++f)
    csv += roc_points_csv(rep.summary.folds[f], "fold" + std::to_string(f));
  st.write(c.out_dir() / "blind_roc.csv", csv);
  st.log << "blind auc " << json(rep.summary.mean_auc).dump() << '\n';
}

void cmd_lm_train(Stage& st) {
  const auto& c = st.cfg;
  const auto pool = st.pool();
  const auto params = lm_params(c);
  std::vector<const Document*> docs;
  const auto& on = c.get("lm_train_on");
  if (on == "members") {
    for (const auto& d : pool.members()) docs.push_back(&d);
  } else if (on == "selection") {
    docs = resolve(pool, st.selection(pool).members);
  } else {
    bad_value("lm_train_on", on, "members or selection");
  }
  const auto model = lm_train(docs, params);
  const auto path = c.path_or("model", "reference_lm.bin");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_lm(model, path);
  st.result.artifacts.push_back(path);
  st.log << "wrote " << path.string() << '\n';

  json j = st.envelope("lm_train");
  j["model_id"] = model.model_id();
  j["params"] = to_json(params);
  j["weights"] = model.weights();
  j["vocab_size"] = model.vocab_size();
  j["training_documents"] = docs.size();
  st.write_json("lm_train.json", j);
}

void cmd_lm_score(Stage& st) {
  const auto& c = st.cfg;
  const auto pool = st.pool();
  const auto model = load_lm(c.path_or("model", "reference_lm.bin"));
  std::vector<const Document*> docs;
  const auto& scope = c.get("lm_score_scope");
  if (scope == "selection") {
    const auto sel = st.selection(pool);
    docs = resolve(pool, sel.members);
    const auto nm = resolve(pool, sel.non_members);
    docs.insert(docs.end(), nm.begin(), nm.end());
  } else if (scope == "pool") {
    for (const auto& d : pool.members()) docs.push_back(&d);
    for (const auto& d : pool.non_members()) docs.push_back(&d);
  } else {
    bad_value("lm_score_scope", scope, "selection or pool");
  }
  std::vector<LogprobTrace> traces(docs.size());
  parallel_for(docs.size(), st.threads(), [&](std::size_t i) { traces[i] = lm_score(model, *docs[i]); });

  const auto path = c.path_or("traces", "traces.jsonl");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_traces_jsonl(path, traces);
  st.result.artifacts.push_back(path);
  st.log << "wrote " << path.string() << '\n';

  double sum = 0;
  std::size_t tokens = 0;
  for (const auto& t : traces) {
    for (double lp : t.logprobs) sum += lp;
    tokens += t.logprobs.size();
  }
  json j = st.envelope("lm_score");
  j["model_id"] = model.model_id();
  j["scope"] = scope;
  j["documents"] = traces.size();
  j["tokens"] = tokens;
  j["mean_logprob"] = tokens ? sum / static_cast<double>(tokens) : 0.0;
  st.write_json("lm_score.json", j);
}

void cmd_mia_eval(Stage& st) {
  const auto& c = st.cfg;
  const auto pool = st.pool();
  const auto sel = st.selection(pool);
  const auto traces = read_traces_jsonl(c.path_or("traces", "traces.jsonl"));
  MiaEvalOptions o;
  o.attacks = parse_attacks(c.get("attacks"));
  o.folds = c.size("folds");
  o.runs = c.size("runs");
  o.seed = c.u64("seed");
  if (!c.list("meta_features").empty()) o.meta_features = c.list("meta_features");
  const auto& loss = c.get("meta_loss");
  if (loss == "logistic") {
    o.meta.loss = MetaLoss::logistic;
  } else if (loss == "squared") {
    o.meta.loss = MetaLoss::squared;
  } else {
    bad_value("meta_loss", loss, "logistic or squared");
  }
  o.meta.iterations = c.size("meta_iterations");
  o.meta.learning_rate = c.real("meta_lr");
  o.meta.l2 = c.real("meta_l2");
  o.meta.seed = o.seed;
  o.threads = st.threads();
  if (o.runs == 0) bad_value("runs", c.get("runs"), "a positive count");
  const auto rep = evaluate_mia(sel, pool, traces, o);

  json j = st.envelope("mia_eval");
  j["method"] = method_name(sel.method);
  j["n"] = sel.size();
  j["result"] = to_json(rep, o);
  st.write_json("mia_eval.json", j);
  st.write(c.out_dir() / "mia_scores.csv", mia_scores_csv(rep));

  std::string csv = roc_csv_header();
  for (const auto& a : rep.attacks) {
    if (a.pooled) {
      csv += roc_points_csv(*a.pooled, a.attack.name());
    } else {
      for (std::size_t f = 0; f < a.summary.folds.size(); ++f)
        csv += roc_points_csv(a.summary.folds[f], a.attack.name() + "/fold" + std::to_string(f));
    }
  }
  st.write(c.out_dir() / "mia_roc.csv", csv);
  for (const auto& a : rep.attacks) st.log << a.attack.name() << " auc " << json(a.summary.mean_auc).dump() << '\n';
}

std::optional<json> read_artifact(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
}

void cmd_report(Stage& st) {
  const auto& c = st.cfg;
  const auto out = c.out_dir();
  const std::vector<std::pair<std::string, fs::path>> inputs{
      {"selection", st.selection_path()},      {"overlap", out / "overlap.json"},
      {"blind_eval", out / "blind_eval.json"}, {"lm_train", out / "lm_train.json"},
      {"lm_score", out / "lm_score.json"},     {"mia_eval", out / "mia_eval.json"},
  };
  json stages = json::object();
  for (const auto& [name, path] : inputs)
    if (auto a = read_artifact(path)) stages[name] = std::move(*a);
  if (stages.empty()) throw Error(ErrorCode::io_error, "no stage artifacts found under " + out.string());

  json summary = json::object();
  std::ostringstream metrics;
  metrics.precision(17);
  metrics << "metric,value\n";
  auto put = [&](const std::string& key, const json& v) {
    summary[key] = v;
    metrics << key << ',' << v.dump() << '\n';
  };
  if (stages.contains("selection")) {
    const auto& s = stages["selection"]["selection"];
    put("method", s["method"]);
    put("n", s["n"]);
    if (s["diagnostics"].contains("final_ks")) put("selection_ks", s["diagnostics"]["final_ks"]);
    if (s["diagnostics"].contains("random_baseline_ks"))
      put("random_baseline_ks", s["diagnostics"]["random_baseline_ks"]);
  }
  if (stages.contains("overlap")) put("overlap_ks", stages["overlap"]["ks"]);
  if (stages.contains("blind_eval")) {
    const auto& r = stages["blind_eval"]["result"];
    put("blind_auc", r["mean_auc"]);
    for (const auto& [fpr, v] : r["mean_tpr_at_fpr"].items()) put("blind_tpr@" + fpr, v);
  }
  if (stages.contains("mia_eval")) {
    const auto& r = stages["mia_eval"]["result"];
    for (const auto& [name, a] : r["attacks"].items()) {
      put("mia_auc/" + name, a["mean_auc"]);
      for (const auto& [fpr, v] : a["mean_tpr_at_fpr"].items()) put("mia_tpr@" + fpr + "/" + name, v);
    }
  }

  json j = st.envelope("report");
  j["summary"] = summary;
  j["stages"] = stages;
  st.write_json("report.json", j);
  st.write(out / "report_summary.csv", metrics.str());

  if (stages.contains("overlap")) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "bin_lo,bin_hi,members,non_members\n";
    for (const auto& b : stages["overlap"]["histogram"])
      csv << b["lo"].get<double>() << ',' << b["hi"].get<double>() << ',' << b["members"].get<std::size_t>() << ','
          << b["non_members"].get<std::size_t>() << '\n';
    st.write(out / "report_overlap_hist.csv", csv.str());
  }

  // Every ROC curve in one long-format file.
  std::ostringstream roc;
  roc.precision(17);
  roc << "source,series,fpr,tpr\n";
  auto emit = [&](const std::string& source, const std::string& series, const json& report) {
    for (const auto& p : report["points"]) roc << source << ',' << series << ',' << p[0].get<double>() << ','
                                               << p[1].get<double>() << '\n';
  };
  if (stages.contains("blind_eval")) {
    const auto& folds = stages["blind_eval"]["result"]["folds"];
    for (std::size_t f = 0; f < folds.size(); ++f) emit("blind", "fold" + std::to_string(f), folds[f]);
  }
  if (stages.contains("mia_eval")) {
    for (const auto& [name, a] : stages["mia_eval"]["result"]["attacks"].items()) {
      if (a.contains("pooled")) {
        emit("mia", name, a["pooled"]);
      } else {
        for (std::size_t f = 0; f < a["folds"].size(); ++f)
          emit("mia", name + "/fold" + std::to_string(f), a["folds"][f]);
      }
    }
  }
  st.write(out / "report_roc.csv", roc.str());
}

void dispatch(std::string_view sub, Stage& st);

void cmd_pipeline(Stage& st) {
  for (std::string_view s : {"build", "overlap", "blind-eval", "lm-train", "lm-score", "mia-eval", "report"}) {
    st.log << "== " << s << '\n';
    dispatch(s, st);
  }
}

void dispatch(std::string_view sub, Stage& st) {
  if (sub == "synth") return cmd_synth(st);
  if (sub == "ingest") return cmd_ingest(st);
  if (sub == "build") return cmd_build(st);
  if (sub == "overlap") return cmd_overlap(st);
  if (sub == "blind-eval") return cmd_blind_eval(st);
  if (sub == "lm-train") return cmd_lm_train(st);
  if (sub == "lm-score") return cmd_lm_score(st);
  if (sub == "mia-eval") return cmd_mia_eval(st);
  if (sub == "report") return cmd_report(st);
  if (sub == "pipeline") return cmd_pipeline(st);
  throw Error(ErrorCode::config_error, "unknown subcommand '" + std::string(sub) + "'");
}

}  // namespace

RunResult run(std::string_view subcommand, const RunConfig& config, std::ostream& log) {
  RunResult result;
  Stage st{config, log, result};
  try {
    dispatch(subcommand, st);
  } catch (const Error& e) {
    result.status = exit_status_for(e.code());
    result.message = e.what();
  } catch (const json::exception& e) {
    result.status = ExitStatus::data;
    result.message = std::string(error_code_name(ErrorCode::parse_error)) + ": " + e.what();
  } catch (const fs::filesystem_error& e) {
    result.status = ExitStatus::data;
    result.message = std::string(error_code_name(ErrorCode::io_error)) + ": " + e.what();
  } catch (const std::exception& e) {
    result.status = ExitStatus::internal;
    result.message = std::string(error_code_name(ErrorCode::internal)) + ": " + e.what();
  }
  return result;
}

}  // namespace miabench
