#include "miabench/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "miabench/error.hpp"
#include "miabench/hash.hpp"
#include "miabench/parallel.hpp"
#include "miabench/utf8.hpp"

namespace miabench {

using nlohmann::json;

std::string_view ngram_unit_name(NgramUnit unit) noexcept {
  return unit == NgramUnit::word ? "word" : "character";
}

NgramUnit parse_ngram_unit(std::string_view name) {
  if (name == "word") return NgramUnit::word;
  if (name == "character" || name == "char") return NgramUnit::character;
  throw Error(ErrorCode::config_error, "unknown n-gram unit '" + std::string(name) + "'");
}

json to_json(const FeatureConfig& c) {
  return json{{"unit", ngram_unit_name(c.unit)},
              {"min_n", c.min_n},
              {"max_n", c.max_n},
              {"bucket_bits", c.bucket_bits},
              {"hash", "fnv1a64+fmix64"},
              {"hash_seed", c.hash_seed}};
}

json to_json(const ClassifierSpec& s) {
  return json{{"family", "multinomial_naive_bayes"}, {"alpha", s.alpha}, {"features", to_json(s.features)}};
}

namespace {

bool is_separator(char32_t c) {
  if (c < 0x80) return !((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'));
  switch (c) {
    case 0x85: case 0xa0: case 0x1680: case 0x2028: case 0x2029: case 0x202f: case 0x205f:
    case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200a;
  }
}

char32_t fold_ascii(char32_t c) { return (c >= 'A' && c <= 'Z') ? c + 32 : c; }

std::vector<std::string> char_units(std::string_view text) {
  std::vector<std::string> out;
  for (char32_t c : utf8::decode(text)) {
    std::string s;
    utf8::append(s, fold_ascii(c));
    out.push_back(std::move(s));
  }
  return out;
}

template <typename Fn>
void for_each_gram(const std::vector<std::string>& units, const FeatureConfig& config, Fn&& fn) {
  const std::string sep = config.unit == NgramUnit::word ? " " : "";
  for (int n = config.min_n; n <= config.max_n; ++n) {
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= units.size(); ++i) {
      std::string gram = units[i];
      for (std::size_t k = 1; k < un; ++k) {
        gram += sep;
        gram += units[i + k];
      }
      fn(gram);
    }
  }
}

std::vector<std::string> units_of(std::string_view text, const FeatureConfig& config) {
  return config.unit == NgramUnit::word ? word_tokens(text) : char_units(text);
}

}  // namespace

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char32_t c : utf8::decode(text)) {
    if (is_separator(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      utf8::append(current, fold_ascii(c));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::map<std::string, std::uint32_t> ngram_counts(std::string_view text, const FeatureConfig& config) {
  std::map<std::string, std::uint32_t> counts;
  for_each_gram(units_of(text, config), config, [&](const std::string& g) { ++counts[g]; });
  return counts;
}

std::uint64_t FeatureVector::total() const noexcept {
  std::uint64_t t = 0;
  for (const auto& e : entries) t += e.second;
  return t;
}

std::uint32_t feature_bucket(std::string_view gram, const FeatureConfig& config) noexcept {
  return static_cast<std::uint32_t>(hash_bytes(gram, config.hash_seed) & (config.bucket_space() - 1));
}

FeatureVector featurize(std::string_view text, const FeatureConfig& config) {
  if (config.min_n < 1 || config.max_n < config.min_n || config.bucket_bits < 1 || config.bucket_bits > 28)
    throw Error(ErrorCode::config_error, "invalid feature configuration");
  std::unordered_map<std::uint32_t, std::uint32_t> buckets;
  for_each_gram(units_of(text, config), config,
                [&](const std::string& g) { ++buckets[feature_bucket(g, config)]; });
  if (buckets.empty()) throw Error(ErrorCode::empty_text, "text has no n-grams to featurize");
  FeatureVector v;
  v.bucket_space = config.bucket_space();
  v.entries.assign(buckets.begin(), buckets.end());
  std::sort(v.entries.begin(), v.entries.end());
  return v;
}

FeatureVector featurize(const Document& doc, const FeatureConfig& config) {
  try {
    return featurize(doc.text, config);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::empty_text)
      throw Error(ErrorCode::empty_text, "document '" + doc.id + "' has no n-grams");
    throw;
  }
}

NaiveBayesModel train_naive_bayes(std::span<const LabeledFeatures> examples, double alpha,
                                  const FeatureConfig& features) {
  if (!(alpha > 0)) throw Error(ErrorCode::config_error, "alpha must be > 0");
  const std::size_t B = features.bucket_space();
  std::array<std::vector<double>, 2> counts{std::vector<double>(B, 0.0), std::vector<double>(B, 0.0)};
  std::array<double, 2> totals{0, 0};
  std::array<std::size_t, 2> docs{0, 0};
  for (const auto& ex : examples) {
    if (ex.features.bucket_space != B)
      throw Error(ErrorCode::config_error, "feature vector bucket space does not match the model");
    const int c = ex.label == Label::member ? 0 : 1;
    ++docs[c];
    // Integer counts summed in double are exact well past any corpus size,
    // so the totals do not depend on example order.
    for (const auto& [bucket, count] : ex.features.entries) {
      counts[c][bucket] += count;
      totals[c] += count;
    }
  }
  if (docs[0] == 0 || docs[1] == 0)
    throw Error(ErrorCode::single_class_training, "naive Bayes needs both members and non-members");

  NaiveBayesModel model;
  model.features = features;
  model.alpha = alpha;
  const double n = static_cast<double>(docs[0] + docs[1]);
  for (int c = 0; c < 2; ++c) {
    model.log_prior[c] = std::log(static_cast<double>(docs[c]) / n);
    const double denom = std::log(totals[c] + alpha * static_cast<double>(B));
    auto& theta = model.log_theta[c];
    theta.resize(B);
    for (std::size_t f = 0; f < B; ++f) theta[f] = std::log(counts[c][f] + alpha) - denom;
  }
  return model;
}

double predict_proba(const NaiveBayesModel& model, const FeatureVector& v) {
  std::array<double, 2> score = model.log_prior;
  for (const auto& [bucket, count] : v.entries) {
    score[0] += count * model.log_theta[0][bucket];
    score[1] += count * model.log_theta[1][bucket];
  }
  // Two-class softmax; the non-member probability is exactly 1 - this.
  const double diff = score[1] - score[0];
  if (diff > 0) {
    const double e = std::exp(-diff);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(diff));
}

double predict_proba(const NaiveBayesModel& model, const Document& doc) {
  return predict_proba(model, featurize(doc, model.features));
}

namespace {

constexpr char kNbMagic[4] = {'M', 'B', 'N', 'B'};
constexpr std::uint32_t kNbVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::parse_error, "truncated model file");
  return v;
}

}  // namespace

void save_model(const NaiveBayesModel& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out.write(kNbMagic, 4);
  put(out, kNbVersion);
  put(out, static_cast<std::uint32_t>(m.features.unit == NgramUnit::word ? 0 : 1));
  put(out, static_cast<std::int32_t>(m.features.min_n));
  put(out, static_cast<std::int32_t>(m.features.max_n));
  put(out, static_cast<std::uint32_t>(m.features.bucket_bits));
  put(out, m.features.hash_seed);
  put(out, m.alpha);
  put(out, m.log_prior[0]);
  put(out, m.log_prior[1]);
  for (int c = 0; c < 2; ++c)
    out.write(reinterpret_cast<const char*>(m.log_theta[c].data()),
              static_cast<std::streamsize>(m.log_theta[c].size() * sizeof(double)));
}

NaiveBayesModel load_naive_bayes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kNbMagic, 4) != 0)
    throw Error(ErrorCode::parse_error, "'" + path.string() + "' is not a naive Bayes model");
  if (get<std::uint32_t>(in) != kNbVersion) throw Error(ErrorCode::parse_error, "unsupported model version");
  NaiveBayesModel m;
  m.features.unit = get<std::uint32_t>(in) == 0 ? NgramUnit::word : NgramUnit::character;
  m.features.min_n = get<std::int32_t>(in);
  m.features.max_n = get<std::int32_t>(in);
  m.features.bucket_bits = get<std::uint32_t>(in);
  if (m.features.bucket_bits < 1 || m.features.bucket_bits > 28)
    throw Error(ErrorCode::parse_error, "corrupt bucket_bits");
  m.features.hash_seed = get<std::uint64_t>(in);
  m.alpha = get<double>(in);
  m.log_prior[0] = get<double>(in);
  m.log_prior[1] = get<double>(in);
  for (int c = 0; c < 2; ++c) {
    m.log_theta[c].resize(m.features.bucket_space());
    in.read(reinterpret_cast<char*>(m.log_theta[c].data()),
            static_cast<std::streamsize>(m.log_theta[c].size() * sizeof(double)));
    if (!in) throw Error(ErrorCode::parse_error, "truncated model file");
  }
  return m;
}

NaiveBayesModel train_on_documents(std::span<const Document* const> members,
                                   std::span<const Document* const> non_members,
                                   const ClassifierSpec& spec, unsigned threads) {
  std::vector<LabeledFeatures> examples(members.size() + non_members.size());
  parallel_for(examples.size(), threads, [&](std::size_t i) {
    const bool is_member = i < members.size();
    const Document& doc = is_member ? *members[i] : *non_members[i - members.size()];
    examples[i] = {featurize(doc, spec.features), is_member ? Label::member : Label::non_member};
  });
  return train_naive_bayes(examples, spec.alpha, spec.features);
}

BlindEvalReport evaluate_blind(std::span<const Document* const> members,
                               std::span<const Document* const> non_members,
                               const BlindEvalOptions& options) {
  const std::size_t k = options.folds;
  if (k < 2 || members.size() < k || non_members.size() < k)
    throw Error(ErrorCode::too_few_items, "blind evaluation needs at least k=" + std::to_string(k) +
                                              " documents per class");
  std::unordered_map<std::string, std::pair<const Document*, Label>> by_id;
  std::vector<LabeledId> ids;
  for (const Document* d : members) {
    by_id[d->id] = {d, Label::member};
    ids.push_back({d->id, Label::member});
  }
  for (const Document* d : non_members) {
    by_id[d->id] = {d, Label::non_member};
    ids.push_back({d->id, Label::non_member});
  }

  // Featurize once; folds only re-aggregate counts.
  std::vector<FeatureVector> features(ids.size());
  parallel_for(ids.size(), options.threads,
               [&](std::size_t i) { features[i] = featurize(*by_id[ids[i].id].first, options.classifier.features); });
  std::unordered_map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < ids.size(); ++i) row[ids[i].id] = i;

  BlindEvalReport report;
  std::vector<RocReport> fold_reports;
  for (const auto& fold : kfold_split(ids, k, options.seed)) {
    std::vector<LabeledFeatures> train;
    train.reserve(fold.train_ids.size());
    for (const auto& id : fold.train_ids) train.push_back({features[row[id]], by_id[id].second});
    const auto model = train_naive_bayes(train, options.classifier.alpha, options.classifier.features);
    std::vector<double> pos, neg;
    for (const auto& id : fold.test_ids) {
      const double p = predict_proba(model, features[row[id]]);
      (by_id[id].second == Label::member ? pos : neg).push_back(p);
    }
    fold_reports.push_back(roc(pos, neg, true));
    report.fold_test_ids.push_back(fold.test_ids);
  }
  report.summary = summarize(std::move(fold_reports));
  return report;
}

BlindEvalReport evaluate_blind(const LabeledPool& pool, const SelectionResult& selection,
                               const BlindEvalOptions& options) {
  validate_selection(selection, pool);
  const auto members = resolve(pool, selection.members);
  const auto non_members = resolve(pool, selection.non_members);
  return evaluate_blind(members, non_members, options);
}

json to_json(const BlindEvalReport& r) { return to_json(r.summary); }

}  // namespace miabench
