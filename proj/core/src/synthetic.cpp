#include "miabench/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "miabench/hash.hpp"
#include "miabench/random.hpp"

namespace miabench {

using nlohmann::json;

json to_json(const SyntheticCorpusConfig& c) {
  return json{{"members", c.members},
              {"non_members", c.non_members},
              {"shared_vocab", c.shared_vocab},
              {"private_vocab", c.private_vocab},
              {"min_words", c.min_words},
              {"max_words", c.max_words},
              {"clean_fraction", c.clean_fraction},
              {"member_shift", {c.member_shift_lo, c.member_shift_hi}},
              {"non_member_shift", {c.non_member_shift_lo, c.non_member_shift_hi}},
              {"zipf_exponent", c.zipf_exponent},
              {"seed", c.seed}};
}

namespace {

class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> words, double exponent) : words_(std::move(words)) {
    double acc = 0;
    for (std::size_t r = 0; r < words_.size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cumulative_.push_back(acc);
    }
  }

  const std::string& draw(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return words_[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), words_.size() - 1)];
  }

 private:
  std::vector<std::string> words_;
  std::vector<double> cumulative_;
};

std::vector<std::string> make_words(std::size_t count, Rng& rng) {
  static const char* onsets[] = {"b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r",
                                 "s", "t", "v", "w", "z", "br", "ch", "cl", "dr", "fl", "gr", "pl",
                                 "pr", "sh", "st", "th", "tr"};
  static const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "ou", "io", "y"};
  static const char* codas[] = {"", "", "", "n", "r", "s", "l", "t", "m", "nd", "rk", "st"};
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < count) {
    std::string w;
    const std::size_t syllables = 1 + rng.index(3);
    for (std::size_t s = 0; s < syllables; ++s) {
      w += onsets[rng.index(std::size(onsets))];
      w += vowels[rng.index(std::size(vowels))];
    }
    w += codas[rng.index(std::size(codas))];
    if (seen.insert(w).second) words.push_back(w);
  }
  return words;
}

std::string make_text(const Vocabulary& shared, const Vocabulary& own, double private_rate, std::size_t length,
                      Rng& rng) {
  std::string text;
  std::size_t sentence = 0;
  for (std::size_t i = 0; i < length; ++i) {
    const std::string& w = rng.bernoulli(private_rate) ? own.draw(rng) : shared.draw(rng);
    if (!text.empty()) text += ' ';
    text += w;
    if (++sentence >= 8 + rng.index(8)) {
      text += '.';
      sentence = 0;
    }
  }
  text += ".\n";
  return text;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& c) {
  Rng word_rng(derive_seed(c.seed, "synthetic/words"));
  auto all = make_words(c.shared_vocab + 2 * c.private_vocab, word_rng);
  std::vector<std::string> shared(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(c.shared_vocab));
  std::vector<std::string> own_m(all.begin() + static_cast<std::ptrdiff_t>(c.shared_vocab),
                                 all.begin() + static_cast<std::ptrdiff_t>(c.shared_vocab + c.private_vocab));
  std::vector<std::string> own_n(all.begin() + static_cast<std::ptrdiff_t>(c.shared_vocab + c.private_vocab), all.end());
  const Vocabulary shared_v(shared, c.zipf_exponent);
  const Vocabulary member_v(own_m, c.zipf_exponent);
  const Vocabulary non_member_v(own_n, c.zipf_exponent);

  SyntheticCorpus corpus;
  auto fill = [&](std::vector<IngestRecord>& out, std::size_t count, const Vocabulary& own, double lo, double hi,
                  const char* prefix) {
    Rng rng(derive_seed(c.seed, std::string("synthetic/") + prefix));
    const int width = static_cast<int>(std::to_string(std::max<std::size_t>(count, 1) - 1).size());
    for (std::size_t i = 0; i < count; ++i) {
      const double rate = rng.bernoulli(c.clean_fraction) ? 0.0 : rng.uniform(lo, hi);
      const std::size_t length = c.min_words + rng.index(c.max_words - c.min_words + 1);
      std::string num = std::to_string(i);
      num.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0');
      out.push_back({std::string(prefix) + "-" + num, make_text(shared_v, own, rate, length, rng)});
    }
  };
  fill(corpus.members, c.members, member_v, c.member_shift_lo, c.member_shift_hi, "m");
  fill(corpus.non_members, c.non_members, non_member_v, c.non_member_shift_lo, c.non_member_shift_hi, "n");
  return corpus;
}

LabeledPool synthetic_pool(const SyntheticCorpusConfig& config) {
  const auto corpus = generate_synthetic_corpus(config);
  LabeledPool pool;
  ingest_records(corpus.members, Label::member, CleaningConfig{}, pool);
  ingest_records(corpus.non_members, Label::non_member, CleaningConfig{}, pool);
  return pool;
}

}  // namespace miabench
