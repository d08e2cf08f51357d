#include "miabench/reference_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "miabench/error.hpp"
#include "miabench/hash.hpp"
#include "miabench/utf8.hpp"

namespace miabench {

using nlohmann::json;

std::string_view lm_unit_name(LmUnit unit) noexcept {
  return unit == LmUnit::character ? "character" : "word";
}

LmUnit parse_lm_unit(std::string_view name) {
  if (name == "character" || name == "char") return LmUnit::character;
  if (name == "word") return LmUnit::word;
  throw Error(ErrorCode::config_error, "unknown LM unit '" + std::string(name) + "'");
}

json to_json(const LmParams& p) {
  return json{{"order", p.order}, {"lambda", p.lambda}, {"weights", p.weights}, {"unit", lm_unit_name(p.unit)}};
}

std::vector<std::string> lm_tokens(std::string_view text, LmUnit unit) {
  std::vector<std::string> out;
  if (unit == LmUnit::character) {
    for (char32_t c : utf8::decode(text)) {
      std::string s;
      utf8::append(s, c);
      out.push_back(std::move(s));
    }
    return out;
  }
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

namespace {

constexpr std::uint64_t kContextSeed = 0x6c6d2d637478ULL;

std::vector<double> resolve_weights(const LmParams& p) {
  std::vector<double> w = p.weights;
  if (w.empty()) {
    for (int o = 1; o <= p.order; ++o) w.push_back(std::ldexp(1.0, o - 1));
  }
  if (w.size() != static_cast<std::size_t>(p.order))
    throw Error(ErrorCode::config_error, "need one interpolation weight per order");
  double sum = 0;
  for (double x : w) {
    if (!(x >= 0) || !std::isfinite(x)) throw Error(ErrorCode::config_error, "interpolation weights must be >= 0");
    sum += x;
  }
  if (!(sum > 0)) throw Error(ErrorCode::config_error, "interpolation weights sum to zero");
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace

std::uint32_t NgramLm::token_id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

std::uint64_t NgramLm::context_key(std::span<const std::uint32_t> history, std::size_t length) const {
  // Last `length` history ids, BOS-padded on the left.
  std::vector<std::uint32_t> ctx(length, kBos);
  const std::size_t have = std::min(length, history.size());
  std::copy(history.end() - static_cast<std::ptrdiff_t>(have), history.end(), ctx.end() - static_cast<std::ptrdiff_t>(have));
  return hash_u32s(ctx, kContextSeed + length);
}

std::uint64_t NgramLm::gram_count(std::size_t oi, std::uint64_t context, std::uint32_t token) const {
  const auto& g = grams_[oi];
  auto it = std::lower_bound(g.begin(), g.end(), std::pair{context, token}, [](const GramCount& e, const auto& key) {
    return e.context < key.first || (e.context == key.first && e.token < key.second);
  });
  return (it != g.end() && it->context == context && it->token == token) ? it->count : 0;
}

std::uint64_t NgramLm::context_total(std::size_t oi, std::uint64_t context) const {
  const auto& t = totals_[oi];
  auto it = std::lower_bound(t.begin(), t.end(), context,
                             [](const ContextTotal& e, std::uint64_t key) { return e.context < key; });
  return (it != t.end() && it->context == context) ? it->total : 0;
}

double NgramLm::log_prob(std::span<const std::uint32_t> history, std::uint32_t token) const {
  const double V = static_cast<double>(vocab_.size());
  double p = 0;
  for (std::size_t oi = 0; oi < grams_.size(); ++oi) {
    const std::uint64_t ctx = context_key(history, oi);
    const double c = static_cast<double>(gram_count(oi, ctx, token));
    const double total = static_cast<double>(context_total(oi, ctx));
    p += weights_[oi] * (c + params_.lambda) / (total + params_.lambda * V);
  }
  return std::log(p);
}

std::string NgramLm::model_id() const {
  std::ostringstream desc;
  desc.precision(17);
  desc << params_.order << '|' << params_.lambda << '|' << lm_unit_name(params_.unit);
  for (double w : weights_) desc << '|' << w;
  return "reference-ngram-lm/" + hex64(hash_bytes(desc.str(), fingerprint_));
}

NgramLm lm_train(std::span<const Document* const> docs, const LmParams& params) {
  if (docs.empty()) throw Error(ErrorCode::empty_corpus, "cannot train a language model on no documents");
  if (params.order < 1) throw Error(ErrorCode::config_error, "LM order must be >= 1");
  if (!(params.lambda > 0)) throw Error(ErrorCode::config_error, "LM lambda must be > 0");

  NgramLm lm;
  lm.params_ = params;
  lm.weights_ = resolve_weights(params);
  lm.vocab_ = {"<unk>", "</s>"};

  // Vocabulary in sorted order so ids do not depend on document order.
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(docs.size());
  std::map<std::string, int> seen;
  std::vector<std::string_view> ids;
  for (const Document* d : docs) {
    tokenized.push_back(lm_tokens(d->text, params.unit));
    for (const auto& t : tokenized.back()) seen.emplace(t, 0);
    ids.push_back(d->id);
  }
  for (const auto& [tok, unused] : seen) {
    lm.ids_.emplace(tok, static_cast<std::uint32_t>(lm.vocab_.size()));
    lm.vocab_.push_back(tok);
  }
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  std::uint64_t fp = 0;
  for (std::size_t i : order) {
    fp = hash_bytes(ids[i], fp);
    for (const auto& t : tokenized[i]) fp = hash_bytes(t, fp);
  }
  lm.fingerprint_ = fp;

  const auto orders = static_cast<std::size_t>(params.order);
  lm.grams_.assign(orders, {});
  lm.totals_.assign(orders, {});
  for (const auto& doc_tokens : tokenized) {
    std::vector<std::uint32_t> seq;
    seq.reserve(doc_tokens.size() + 1);
    for (const auto& t : doc_tokens) seq.push_back(lm.ids_.at(t));
    seq.push_back(NgramLm::kEos);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      std::span<const std::uint32_t> history(seq.data(), i);
      for (std::size_t oi = 0; oi < orders; ++oi)
        lm.grams_[oi].push_back({lm.context_key(history, oi), seq[i], 1});
    }
  }
  for (std::size_t oi = 0; oi < orders; ++oi) {
    auto& g = lm.grams_[oi];
    std::sort(g.begin(), g.end(), [](const auto& a, const auto& b) {
      return a.context < b.context || (a.context == b.context && a.token < b.token);
    });
    std::size_t w = 0;
    for (std::size_t r = 0; r < g.size(); ++r) {
      if (w > 0 && g[w - 1].context == g[r].context && g[w - 1].token == g[r].token)
        ++g[w - 1].count;
      else
        g[w++] = g[r];
    }
    g.resize(w);
    g.shrink_to_fit();
    auto& t = lm.totals_[oi];
    for (const auto& e : g) {
      if (!t.empty() && t.back().context == e.context)
        t.back().total += e.count;
      else
        t.push_back({e.context, e.count});
    }
  }
  return lm;
}

LogprobTrace lm_score(const NgramLm& model, const Document& doc) {
  LogprobTrace trace;
  trace.doc_id = doc.id;
  trace.model_id = model.model_id();
  trace.tokens = lm_tokens(doc.text, model.params().unit);
  std::vector<std::uint32_t> seq;
  seq.reserve(trace.tokens.size());
  for (const auto& t : trace.tokens) seq.push_back(model.token_id(t));
  trace.logprobs.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i)
    trace.logprobs.push_back(std::min(0.0, model.log_prob(std::span<const std::uint32_t>(seq.data(), i), seq[i])));
  return trace;
}

namespace {

constexpr char kLmMagic[4] = {'M', 'B', 'L', 'M'};
constexpr std::uint32_t kLmVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::parse_error, "truncated LM file");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw Error(ErrorCode::parse_error, "truncated LM file");
  return s;
}

}  // namespace

void save_lm(const NgramLm& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out.write(kLmMagic, 4);
  put(out, kLmVersion);
  put(out, static_cast<std::int32_t>(m.params_.order));
  put(out, m.params_.lambda);
  put(out, static_cast<std::uint32_t>(m.params_.unit == LmUnit::character ? 0 : 1));
  put(out, static_cast<std::uint32_t>(m.params_.weights.size()));
  for (double w : m.params_.weights) put(out, w);
  put(out, m.fingerprint_);
  put(out, static_cast<std::uint32_t>(m.vocab_.size()));
  for (const auto& t : m.vocab_) put_string(out, t);
  for (std::size_t oi = 0; oi < m.grams_.size(); ++oi) {
    put(out, static_cast<std::uint64_t>(m.grams_[oi].size()));
    for (const auto& g : m.grams_[oi]) {
      put(out, g.context);
      put(out, g.token);
      put(out, g.count);
    }
  }
}

NgramLm load_lm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kLmMagic, 4) != 0)
    throw Error(ErrorCode::parse_error, "'" + path.string() + "' is not a reference LM file");
  if (get<std::uint32_t>(in) != kLmVersion) throw Error(ErrorCode::parse_error, "unsupported LM version");
  NgramLm m;
  m.params_.order = get<std::int32_t>(in);
  m.params_.lambda = get<double>(in);
  m.params_.unit = get<std::uint32_t>(in) == 0 ? LmUnit::character : LmUnit::word;
  const auto nw = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nw; ++i) m.params_.weights.push_back(get<double>(in));
  if (m.params_.order < 1 || m.params_.order > 64) throw Error(ErrorCode::parse_error, "corrupt LM order");
  m.weights_ = resolve_weights(m.params_);
  m.fingerprint_ = get<std::uint64_t>(in);
  const auto nv = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nv; ++i) {
    m.vocab_.push_back(get_string(in));
    if (i > NgramLm::kEos) m.ids_.emplace(m.vocab_.back(), i);
  }
  const auto orders = static_cast<std::size_t>(m.params_.order);
  m.grams_.assign(orders, {});
  m.totals_.assign(orders, {});
  for (std::size_t oi = 0; oi < orders; ++oi) {
    const auto n = get<std::uint64_t>(in);
    auto& g = m.grams_[oi];
    g.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      NgramLm::GramCount e{};
      e.context = get<std::uint64_t>(in);
      e.token = get<std::uint32_t>(in);
      e.count = get<std::uint32_t>(in);
      g.push_back(e);
    }
    auto& t = m.totals_[oi];
    for (const auto& e : g) {
      if (!t.empty() && t.back().context == e.context)
        t.back().total += e.count;
      else
        t.push_back({e.context, e.count});
    }
  }
  return m;
}

}  // namespace miabench
