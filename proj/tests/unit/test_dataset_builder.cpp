#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "generators.hpp"
#include "miabench/dataset_builder.hpp"
#include "miabench/error.hpp"
#include "miabench/synthetic.hpp"
#include "oracles.hpp"

using namespace miabench;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

const LabeledPool& test_pool() {
  static const LabeledPool pool = [] {
    SyntheticCorpusConfig c;
    c.members = 240;
    c.non_members = 160;
    c.min_words = 30;
    c.max_words = 60;
    c.seed = 7;
    return synthetic_pool(c);
  }();
  return pool;
}

// Exhaustive greedy: every remaining candidate evaluated with the brute-force
// KS at every step, ties to the smallest id.
std::vector<std::string> exhaustive_greedy(const std::vector<double>& target,
                                           std::vector<ScoredCandidate> candidates, std::size_t n) {
  std::vector<double> chosen;
  std::vector<std::string> ids;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = candidates.size();
    double best_d = 2;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      auto trial = chosen;
      trial.push_back(candidates[c].score);
      const double d = oracle::ks(trial, target);
      if (d < best_d || (d == best_d && candidates[c].id < candidates[best].id)) {
        best_d = d;
        best = c;
      }
    }
    chosen.push_back(candidates[best].score);
    ids.push_back(candidates[best].id);
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return ids;
}

CandidateConfidence candidate(std::string id, std::vector<double> probs) {
  CandidateConfidence c;
  c.id = std::move(id);
  c.confidence = confidence_vector(probs);
  double sum = 0;
  for (double p : probs) sum += p;
  c.mean_probability = sum / static_cast<double>(probs.size());
  return c;
}

std::vector<CandidateConfidence> sorted(std::vector<CandidateConfidence> v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.confidence.norm != b.confidence.norm ? a.confidence.norm < b.confidence.norm : a.id < b.id;
  });
  return v;
}

}  // namespace

TEST_CASE("greedy: perfect-match candidates reach KS 0") {
  const std::vector<double> target{0.2, 0.5, 0.9};
  const std::vector<ScoredCandidate> cands{{"a", 0.0}, {"b", 0.5}, {"c", 0.9}, {"d", 1.0}, {"e", 0.2}};
  const auto steps = greedy_ks_selection(target, cands, 3);
  std::set<std::string> ids;
  for (const auto& s : steps) ids.insert(s.chosen_id);
  CHECK(ids == std::set<std::string>{"b", "c", "e"});
  CHECK(steps.back().distance == 0.0);
  CHECK(code_of([&] { greedy_ks_selection(target, cands, 6); }) == ErrorCode::pool_too_small);
}

TEST_CASE("greedy: ties go to the smallest id") {
  const std::vector<double> target{0.5};
  const std::vector<ScoredCandidate> cands{{"z", 0.5}, {"b", 0.5}, {"k", 0.5}};
  const auto steps = greedy_ks_selection(target, cands, 2);
  CHECK(steps[0].chosen_id == "b");
  CHECK(steps[1].chosen_id == "k");
}

TEST_CASE("greedy property: every step is the exhaustive argmin") {
  gen::Source g(51);
  for (int trial = 0; trial < 300; ++trial) {
    const auto target = g.tied_scores(g.size(1, 12), 6);
    std::vector<ScoredCandidate> cands;
    const auto pool = g.size(1, 12);
    for (std::size_t i = 0; i < pool; ++i)
      cands.push_back({"c" + std::to_string(g.size(0, 99)) + "-" + std::to_string(i), g.tied_scores(1, 6)[0]});
    const auto n = g.size(1, std::min<std::size_t>(4, pool));
    const auto steps = greedy_ks_selection(target, cands, n);
    std::vector<std::string> got;
    for (const auto& s : steps) got.push_back(s.chosen_id);
    CHECK(got == exhaustive_greedy(target, cands, n));
  }
}

TEST_CASE("build_no_ngram: structure and determinism") {
  const auto& pool = test_pool();
  NoNgramOptions o{.n = 40, .seed = 3};
  const auto a = build_no_ngram(pool, o);
  CHECK(a.members.size() == 40);
  CHECK(a.non_members.size() == 40);
  CHECK(a.method == SelectionMethod::no_ngram);
  validate_selection(a, pool);
  CHECK(a.diagnostics["reference_size"] == 200);
  CHECK(a.diagnostics["steps"].size() == 40);

  // Final KS equals KS of the recorded overlap scores.
  std::vector<double> ms, ns;
  for (const auto& e : a.diagnostics["member_overlap"]) ms.push_back(e["score"]);
  for (const auto& e : a.diagnostics["non_member_overlap"]) ns.push_back(e["score"]);
  CHECK(a.diagnostics["final_ks"].get<double>() == ks_distance(ms, ns));

  o.threads = 3;
  const auto b = build_no_ngram(pool, o);
  CHECK(to_json(a) == to_json(b));

  CHECK(code_of([&] { build_no_ngram(pool, {.n = 121}); }) == ErrorCode::pool_too_small);
}

TEST_CASE("build_no_ngram: candidates too short") {
  LabeledPool pool;
  for (int i = 0; i < 4; ++i) pool.add(make_document("m" + std::to_string(i), "long enough text"), Label::member);
  for (int i = 0; i < 4; ++i) pool.add(make_document("n" + std::to_string(i), "tiny"), Label::non_member);
  CHECK(code_of([&] { build_no_ngram(pool, {.n = 2}); }) == ErrorCode::all_candidates_too_short);
}

TEST_CASE("build_no_ngram: greedy beats the random baseline across seeds") {
  const auto& pool = test_pool();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = build_no_ngram(pool, {.n = 30, .seed = seed});
    CHECK(s.diagnostics["final_ks"].get<double>() <= s.diagnostics["random_baseline_ks"].get<double>());
  }
}

TEST_CASE("confidence vectors") {
  CHECK(confidence_vector(std::vector<double>{0.5}).norm == 0.0);
  CHECK(confidence_vector(std::vector<double>{0.0, 1.0, 1.0}).norm == doctest::Approx(0.5 * std::sqrt(3.0)));
  const auto a = confidence_vector(std::vector<double>{0.6, 0.4});
  const auto b = confidence_vector(std::vector<double>{0.8, 0.5});
  CHECK(a.norm == doctest::Approx(std::sqrt(0.02)));
  CHECK(b.norm == doctest::Approx(0.3));
  const auto sel = select_by_confidence(sorted({candidate("b", {0.8, 0.5}), candidate("a", {0.6, 0.4})}), 1, false);
  CHECK(sel.ids == std::vector<std::string>{"a"});
}

TEST_CASE("select_by_confidence: unbalanced picks closest to 0.5") {
  const auto c = sorted({candidate("p90", {0.9}), candidate("p55", {0.55}), candidate("p10", {0.1}),
                         candidate("p48", {0.48})});
  const auto sel = select_by_confidence(c, 2, false);
  CHECK(std::set<std::string>(sel.ids.begin(), sel.ids.end()) == std::set<std::string>{"p48", "p55"});
  CHECK(code_of([&] { select_by_confidence(c, 5, false); }) == ErrorCode::pool_too_small);
}

TEST_CASE("select_by_confidence: balanced quadrants") {
  const auto c = sorted({candidate("a", {0.45}), candidate("b", {0.48}), candidate("c", {0.52}),
                         candidate("d", {0.55}), candidate("e", {0.6}), candidate("f", {0.4})});
  const auto sel = select_by_confidence(c, 4, true);
  CHECK(sel.predicted_member == 2);
  CHECK(sel.predicted_non_member == 2);
  CHECK(std::set<std::string>(sel.ids.begin(), sel.ids.end()) == std::set<std::string>{"a", "b", "c", "d"});
  CHECK_FALSE(sel.imbalanced);

  const auto lopsided = sorted({candidate("a", {0.45}), candidate("b", {0.7}), candidate("c", {0.8})});
  const auto s2 = select_by_confidence(lopsided, 3, true);
  CHECK(s2.imbalanced);
  CHECK(s2.ids.size() == 3);
}

TEST_CASE("score_candidates: identical texts sort by id") {
  const auto& pool = test_pool();
  const auto tr = build_no_class_detailed(pool, {.n = 20, .seed = 1});
  std::vector<Document> same;
  for (const char* id : {"z", "a", "m"}) same.push_back(make_document(id, "the same words here"));
  std::vector<const Document*> p{&same[0], &same[1], &same[2]};
  const auto scored = score_candidates(p, tr.classifiers);
  CHECK(scored[0].id == "a");
  CHECK(scored[1].id == "m");
  CHECK(scored[2].id == "z");
  CHECK(scored[0].confidence.norm == scored[2].confidence.norm);
}

TEST_CASE("build_no_class: structure, disjointness, sort equivalence") {
  const auto& pool = test_pool();
  const auto r = build_no_class_detailed(pool, {.n = 30, .seed = 5, .balanced = false});
  const auto& s = r.selection;
  CHECK(s.members.size() == 30);
  CHECK(s.non_members.size() == 30);
  validate_selection(s, pool);
  std::set<std::string> train(r.training_members.begin(), r.training_members.end());
  train.insert(r.training_non_members.begin(), r.training_non_members.end());
  CHECK(train.size() == 60);
  for (const auto& id : s.members) CHECK_FALSE(train.contains(id));
  for (const auto& id : s.non_members) CHECK_FALSE(train.contains(id));

  // Unbalanced, one classifier: exactly the n smallest |p - 0.5| (ties by id).
  std::vector<std::pair<double, std::string>> dist;
  for (const auto& d : pool.members())
    if (!train.contains(d.id)) dist.push_back({std::abs(predict_proba(r.classifiers[0], d) - 0.5), d.id});
  std::sort(dist.begin(), dist.end());
  std::set<std::string> want;
  for (std::size_t i = 0; i < 30; ++i) want.insert(dist[i].second);
  CHECK(std::set<std::string>(s.members.begin(), s.members.end()) == want);

  const auto again = build_no_class(pool, {.n = 30, .seed = 5, .balanced = false});
  CHECK(to_json(again) == to_json(s));
  CHECK(code_of([&] { build_no_class(pool, {.n = 41}); }) == ErrorCode::pool_too_small);
}

TEST_CASE("build_no_class: balanced default and ensembles") {
  const auto& pool = test_pool();
  const auto s = build_no_class(pool, {.n = 20, .seed = 2});
  CHECK(s.diagnostics["balanced"] == true);
  const auto& q = s.diagnostics["members"]["quadrants"];
  if (!s.diagnostics["members"]["imbalanced"].get<bool>())
    CHECK(q["true_positive"].get<int>() == q["false_negative"].get<int>());

  ClassifierSpec word, chars;
  chars.features.unit = NgramUnit::character;
  const auto e = build_no_class(pool, {.n = 20, .seed = 2, .ensemble = {word, chars}});
  CHECK(e.diagnostics["classifiers"] == 2);
  CHECK(e.diagnostics["balanced"] == false);
  for (double norm : e.diagnostics["members"]["step_norms"]) {
    CHECK(norm >= 0.0);
    CHECK(norm <= 0.5 * std::sqrt(2.0) + 1e-12);
  }
}
