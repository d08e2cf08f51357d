#include "miabench/mia.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <zlib.h>

#include "miabench/error.hpp"
#include "miabench/hash.hpp"
#include "miabench/parallel.hpp"

namespace miabench {

using nlohmann::json;

void validate_trace(const LogprobTrace& t) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::invalid_trace, "trace for '" + t.doc_id + "': " + why);
  };
  if (t.doc_id.empty()) fail("empty doc_id");
  const std::size_t expected = t.leading_token_omitted && !t.tokens.empty() ? t.tokens.size() - 1 : t.tokens.size();
  if (t.logprobs.size() != expected)
    fail(std::to_string(t.logprobs.size()) + " logprobs for " + std::to_string(t.tokens.size()) + " tokens");
  for (double lp : t.logprobs) {
    if (!std::isfinite(lp)) fail("non-finite logprob");
    if (lp > 0) fail("positive logprob");
  }
}

json to_json(const LogprobTrace& t) {
  json j{{"doc_id", t.doc_id}, {"model_id", t.model_id}, {"tokens", t.tokens}, {"logprobs", t.logprobs}};
  if (t.leading_token_omitted) j["leading_token_omitted"] = true;
  if (t.truncated) j["truncated"] = true;
  return j;
}

LogprobTrace trace_from_json(const json& j) {
  static const std::set<std::string> allowed{"doc_id", "model_id", "tokens", "logprobs",
                                             "leading_token_omitted", "truncated"};
  if (!j.is_object()) throw Error(ErrorCode::invalid_trace, "trace record is not an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw Error(ErrorCode::invalid_trace, "unknown trace field '" + key + "'");
  LogprobTrace t;
  try {
    t.doc_id = j.at("doc_id").get<std::string>();
    t.model_id = j.at("model_id").get<std::string>();
    t.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& v : j.at("logprobs")) {
      if (!v.is_number()) throw Error(ErrorCode::invalid_trace, "logprob is not a number");
      t.logprobs.push_back(v.get<double>());
    }
    t.leading_token_omitted = j.value("leading_token_omitted", false);
    t.truncated = j.value("truncated", false);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_trace, std::string("malformed trace: ") + e.what());
  }
  validate_trace(t);
  return t;
}

void TraceStore::add(LogprobTrace trace) {
  validate_trace(trace);
  const std::string id = trace.doc_id;
  if (!traces_.emplace(id, std::move(trace)).second)
    throw Error(ErrorCode::duplicate_id, "second trace for '" + id + "'");
}

const LogprobTrace* TraceStore::find(std::string_view doc_id) const {
  auto it = traces_.find(std::string(doc_id));
  return it == traces_.end() ? nullptr : &it->second;
}

TraceStore read_traces_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  TraceStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      store.add(trace_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::invalid_trace, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return store;
}

void write_traces_jsonl(const std::filesystem::path& path, std::span<const LogprobTrace> traces) {
  std::string out;
  for (const auto& t : traces) {
    validate_trace(t);
    out += to_json(t).dump();
    out += '\n';
  }
  write_file(path, out);
}

namespace {

void require_logprobs(const LogprobTrace& t) {
  if (t.logprobs.empty()) throw Error(ErrorCode::empty_trace, "trace for '" + t.doc_id + "' has no logprobs");
}

std::size_t tail_count(std::size_t len, double k_percent) {
  if (!(k_percent > 0 && k_percent <= 100)) throw Error(ErrorCode::bad_k, "k must lie in (0, 100]");
  const double raw = k_percent * static_cast<double>(len) / 100.0;
  auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(count, 1, len);
}

}  // namespace

double perplexity(const LogprobTrace& t) {
  require_logprobs(t);
  return std::exp(-mean(t.logprobs));
}

namespace {

// Both tails are summed in ascending order over one sorted copy. Rounding is
// monotone, so min-k never exceeds max-k and k=100 gives identical values.
double tail_mean(const LogprobTrace& t, double k, bool lowest) {
  require_logprobs(t);
  const std::size_t c = tail_count(t.logprobs.size(), k);
  std::vector<double> v = t.logprobs;
  std::sort(v.begin(), v.end());
  const std::size_t first = lowest ? 0 : v.size() - c;
  return mean(std::span<const double>(v.data() + first, c));
}

}  // namespace

double min_k_prob(const LogprobTrace& t, double k) { return tail_mean(t, k, true); }

double max_k_prob(const LogprobTrace& t, double k) { return tail_mean(t, k, false); }

std::size_t compressed_bits(std::string_view text) {
  uLongf size = compressBound(static_cast<uLong>(text.size()));
  std::vector<Bytef> buffer(size);
  const int rc = compress2(buffer.data(), &size, reinterpret_cast<const Bytef*>(text.data()),
                           static_cast<uLong>(text.size()), kCompressionLevel);
  if (rc != Z_OK) throw Error(ErrorCode::internal, "zlib compress2 failed with code " + std::to_string(rc));
  return static_cast<std::size_t>(size) * 8;
}

double compression_ratio(const LogprobTrace& t, std::string_view text) {
  require_logprobs(t);
  if (text.empty()) throw Error(ErrorCode::empty_text, "document '" + t.doc_id + "' has empty text");
  const double nll_bits = -std::accumulate(t.logprobs.begin(), t.logprobs.end(), 0.0) / std::log(2.0);
  return nll_bits / static_cast<double>(compressed_bits(text));
}

std::string AttackSpec::name() const {
  std::ostringstream k_str;
  k_str << k;
  switch (kind) {
    case AttackKind::perplexity: return "ppl";
    case AttackKind::min_k: return "min_k:" + k_str.str();
    case AttackKind::max_k: return "max_k:" + k_str.str();
    case AttackKind::compression_ratio: return "zlib";
    case AttackKind::meta: return "meta";
  }
  return "ppl";
}

bool AttackSpec::higher_means_member() const noexcept {
  return kind == AttackKind::min_k || kind == AttackKind::max_k || kind == AttackKind::meta;
}

AttackSpec parse_attack(std::string_view raw) {
  std::string name(raw);
  name.erase(std::remove_if(name.begin(), name.end(), [](unsigned char c) { return std::isspace(c); }), name.end());
  if (name == "ppl" || name == "perplexity") return {AttackKind::perplexity, 0};
  if (name == "zlib" || name == "zlib_ratio" || name == "compression_ratio")
    return {AttackKind::compression_ratio, 0};
  if (name == "meta" || name == "meta_mia") return {AttackKind::meta, 0};
  for (auto [prefix, kind] : {std::pair{"min_k:", AttackKind::min_k}, std::pair{"max_k:", AttackKind::max_k}}) {
    const std::string p(prefix);
    if (name.rfind(p, 0) == 0) {
      double k = 0;
      try {
        std::size_t used = 0;
        k = std::stod(name.substr(p.size()), &used);
        if (used != name.size() - p.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(ErrorCode::config_error, "bad k in attack '" + name + "'");
      }
      if (!(k > 0 && k <= 100)) throw Error(ErrorCode::bad_k, "attack '" + name + "' needs 0 < k <= 100");
      return {kind, k};
    }
  }
  throw Error(ErrorCode::config_error, "unknown attack '" + name + "'");
}

std::vector<AttackSpec> parse_attacks(std::string_view list) {
  std::vector<AttackSpec> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    std::size_t comma = list.find(',', pos);
    if (comma == std::string_view::npos) comma = list.size();
    auto item = list.substr(pos, comma - pos);
    if (!item.empty()) out.push_back(parse_attack(item));
    pos = comma + 1;
  }
  if (out.empty()) throw Error(ErrorCode::config_error, "attack list is empty");
  return out;
}

double MiaScores::value(const AttackSpec& a) const {
  switch (a.kind) {
    case AttackKind::perplexity: return ppl;
    case AttackKind::compression_ratio: return compression_ratio;
    case AttackKind::min_k: return min_k.at(a.k);
    case AttackKind::max_k: return max_k.at(a.k);
    case AttackKind::meta:
      if (!meta) throw Error(ErrorCode::internal, "meta score not computed for '" + doc_id + "'");
      return *meta;
  }
  return ppl;
}

MiaScores compute_scores(const LogprobTrace& trace, std::string_view text, std::span<const double> k_values) {
  MiaScores s;
  s.doc_id = trace.doc_id;
  s.ppl = perplexity(trace);
  s.compression_ratio = compression_ratio(trace, text);
  for (double k : k_values) {
    s.min_k[k] = min_k_prob(trace, k);
    s.max_k[k] = max_k_prob(trace, k);
  }
  return s;
}

std::vector<std::string> default_meta_features() {
  std::vector<std::string> names{"ppl", "zlib"};
  for (double k : kMetaKValues) {
    std::ostringstream s;
    s << k;
    names.push_back("min_k:" + s.str());
    names.push_back("max_k:" + s.str());
  }
  return names;
}

double feature_value(const MiaScores& scores, std::string_view name) {
  const auto spec = parse_attack(name);
  if (spec.kind == AttackKind::meta) throw Error(ErrorCode::config_error, "meta cannot be a meta feature");
  return scores.value(spec);
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

MetaModel meta_train(std::span<const std::string> names, std::span<const std::vector<double>> rows,
                     std::span<const Label> labels, const MetaTrainOptions& opt) {
  if (rows.size() != labels.size()) throw Error(ErrorCode::internal, "rows and labels differ in length");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::member));
  if (positives == 0 || positives == labels.size())
    throw Error(ErrorCode::single_class_training, "Meta_MIA needs both members and non-members");

  MetaModel model;
  model.loss = opt.loss;
  model.seed = opt.seed;
  model.training_rows = rows.size();
  const double n = static_cast<double>(rows.size());
  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < names.size(); ++f) {
    double mu = 0;
    for (const auto& r : rows) mu += r.at(f);
    mu /= n;
    double var = 0;
    for (const auto& r : rows) var += (r[f] - mu) * (r[f] - mu);
    var /= n;
    if (!(var > 1e-24) || !std::isfinite(var)) {
      model.dropped.push_back(names[f]);
      continue;
    }
    kept.push_back(f);
    model.features.push_back(names[f]);
    model.means.push_back(mu);
    model.scales.push_back(std::sqrt(var));
  }

  const std::size_t d = kept.size();
  std::vector<std::vector<double>> x(rows.size(), std::vector<double>(d));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) x[i][j] = (rows[i][kept[j]] - model.means[j]) / model.scales[j];

  model.weights.assign(d, 0.0);
  double b = 0;
  std::vector<double> grad(d);
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double z = b;
      for (std::size_t j = 0; j < d; ++j) z += model.weights[j] * x[i][j];
      const double pred = opt.loss == MetaLoss::logistic ? sigmoid(z) : z;
      const double err = pred - (labels[i] == Label::member ? 1.0 : 0.0);
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * x[i][j];
      grad_b += err;
    }
    for (std::size_t j = 0; j < d; ++j)
      model.weights[j] -= opt.learning_rate * (grad[j] / n + opt.l2 * model.weights[j]);
    b -= opt.learning_rate * grad_b / n;
  }
  model.intercept = b;
  return model;
}

double meta_predict(const MetaModel& model, std::span<const std::string> names, std::span<const double> row) {
  // The decision value is returned rather than the sigmoid so that
  // saturation never merges distinct scores into ties.
  double z = model.intercept;
  for (std::size_t j = 0; j < model.features.size(); ++j) {
    auto it = std::find(names.begin(), names.end(), model.features[j]);
    if (it == names.end()) throw Error(ErrorCode::internal, "meta feature '" + model.features[j] + "' missing");
    const double v = row[static_cast<std::size_t>(it - names.begin())];
    z += model.weights[j] * (v - model.means[j]) / model.scales[j];
  }
  return z;
}

json to_json(const MetaModel& m) {
  return json{{"features", m.features},
              {"dropped_features", m.dropped},
              {"means", m.means},
              {"scales", m.scales},
              {"weights", m.weights},
              {"intercept", m.intercept},
              {"loss", m.loss == MetaLoss::logistic ? "logistic" : "squared"},
              {"training_rows", m.training_rows},
              {"seed", m.seed}};
}

MiaEvalReport evaluate_mia(const SelectionResult& selection, const LabeledPool& pool, const TraceStore& traces,
                           const MiaEvalOptions& opt) {
  validate_selection(selection, pool);
  std::vector<std::string> ids = selection.members;
  ids.insert(ids.end(), selection.non_members.begin(), selection.non_members.end());

  std::vector<std::string> missing;
  for (const auto& id : ids)
    if (!traces.find(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::missing_trace, std::to_string(missing.size()) + " selected document(s) have no trace: " + list);
  }

  MiaEvalReport report;
  report.model_id = traces.find(ids.front())->model_id;

  std::set<double> k_set(kMetaKValues.begin(), kMetaKValues.end());
  for (const auto& a : opt.attacks)
    if (a.kind == AttackKind::min_k || a.kind == AttackKind::max_k) k_set.insert(a.k);
  for (const auto& f : opt.meta_features) {
    const auto spec = parse_attack(f);
    if (spec.kind == AttackKind::min_k || spec.kind == AttackKind::max_k) k_set.insert(spec.k);
  }
  const std::vector<double> k_values(k_set.begin(), k_set.end());

  report.scores.resize(ids.size());
  parallel_for(ids.size(), opt.threads, [&](std::size_t i) {
    report.scores[i] = compute_scores(*traces.find(ids[i]), pool.get(ids[i]).text, k_values);
  });
  report.labels.assign(selection.members.size(), Label::member);
  report.labels.insert(report.labels.end(), selection.non_members.size(), Label::non_member);

  std::unordered_map<std::string, std::size_t> row_of;
  std::vector<LabeledId> labeled;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    row_of[ids[i]] = i;
    labeled.push_back({ids[i], report.labels[i]});
  }
  std::vector<std::vector<double>> feature_rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (const auto& f : opt.meta_features) feature_rows[i].push_back(feature_value(report.scores[i], f));

  std::vector<std::vector<RocReport>> per_attack(opt.attacks.size());
  for (std::size_t run = 0; run < std::max<std::size_t>(1, opt.runs); ++run) {
    const auto folds = kfold_split(labeled, opt.folds, derive_seed(opt.seed + run, "mia/folds"));
    for (const auto& fold : folds) {
      std::optional<MetaModel> meta;
      for (std::size_t a = 0; a < opt.attacks.size(); ++a) {
        const auto& attack = opt.attacks[a];
        std::vector<double> pos, neg;
        if (attack.kind == AttackKind::meta && !meta) {
          std::vector<std::vector<double>> train_rows;
          std::vector<Label> train_labels;
          for (const auto& id : fold.train_ids) {
            train_rows.push_back(feature_rows[row_of[id]]);
            train_labels.push_back(report.labels[row_of[id]]);
          }
          auto meta_opt = opt.meta;
          meta_opt.seed = derive_seed(opt.seed + run, "mia/meta");
          meta = meta_train(opt.meta_features, train_rows, train_labels, meta_opt);
        }
        for (const auto& id : fold.test_ids) {
          const std::size_t r = row_of[id];
          double v;
          if (attack.kind == AttackKind::meta) {
            v = meta_predict(*meta, opt.meta_features, feature_rows[r]);
            report.scores[r].meta = v;
          } else {
            v = report.scores[r].value(attack);
          }
          (report.labels[r] == Label::member ? pos : neg).push_back(v);
        }
        per_attack[a].push_back(roc(pos, neg, attack.higher_means_member()));
      }
    }
  }

  for (std::size_t a = 0; a < opt.attacks.size(); ++a) {
    AttackEvaluation ev;
    ev.attack = opt.attacks[a];
    ev.summary = summarize(std::move(per_attack[a]));
    if (ev.attack.kind != AttackKind::meta) {
      std::vector<double> pos, neg;
      for (std::size_t i = 0; i < ids.size(); ++i)
        (report.labels[i] == Label::member ? pos : neg).push_back(report.scores[i].value(ev.attack));
      ev.pooled = roc(pos, neg, ev.attack.higher_means_member());
    }
    report.attacks.push_back(std::move(ev));
  }
  return report;
}

json to_json(const MiaEvalReport& r, const MiaEvalOptions& opt) {
  json attacks = json::object();
  for (const auto& ev : r.attacks) {
    json a = to_json(ev.summary);
    a["higher_means_member"] = ev.attack.higher_means_member();
    if (ev.pooled) a["pooled"] = to_json(*ev.pooled);
    attacks[ev.attack.name()] = a;
  }
  return json{{"model_id", r.model_id},
              {"documents", r.scores.size()},
              {"folds", opt.folds},
              {"runs", opt.runs},
              {"compression", json{{"library", "zlib"}, {"level", kCompressionLevel}}},
              {"meta_features", opt.meta_features},
              {"meta_loss", opt.meta.loss == MetaLoss::logistic ? "logistic" : "squared"},
              {"meta_iterations", opt.meta.iterations},
              {"attacks", attacks}};
}

std::string mia_scores_csv(const MiaEvalReport& r) {
  std::ostringstream out;
  out.precision(17);
  std::set<double> ks;
  if (!r.scores.empty())
    for (const auto& [k, v] : r.scores.front().min_k) ks.insert(k);
  out << "doc_id,label,ppl,zlib";
  for (double k : ks) out << ",min_k:" << k;
  for (double k : ks) out << ",max_k:" << k;
  out << ",meta\n";
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    const auto& s = r.scores[i];
    out << s.doc_id << ',' << label_name(r.labels[i]) << ',' << s.ppl << ',' << s.compression_ratio;
    for (double k : ks) out << ',' << s.min_k.at(k);
    for (double k : ks) out << ',' << s.max_k.at(k);
    out << ',';
    if (s.meta) out << *s.meta;
    out << '\n';
  }
  return out.str();
}

}  // namespace miabench
