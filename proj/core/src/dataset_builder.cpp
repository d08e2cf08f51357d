#include "miabench/dataset_builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "miabench/error.hpp"
#include "miabench/hash.hpp"
#include "miabench/parallel.hpp"
#include "miabench/random.hpp"

namespace miabench {

using nlohmann::json;

std::vector<GreedyStep> greedy_ks_selection(std::span<const double> target,
                                            std::span<const ScoredCandidate> candidates, std::size_t n) {
  if (target.empty()) throw Error(ErrorCode::empty_sample, "target distribution is empty");
  if (candidates.size() < n)
    throw Error(ErrorCode::pool_too_small, std::to_string(candidates.size()) +
                                               " eligible candidates for n=" + std::to_string(n));
  std::vector<double> sorted_target(target.begin(), target.end());
  std::sort(sorted_target.begin(), sorted_target.end());

  // Candidates sharing a score give the same KS, so each step evaluates one
  // value per distinct score and keeps that score's smallest remaining id.
  std::map<double, std::vector<std::string>> by_score;
  for (const auto& c : candidates) by_score[c.score].push_back(c.id);
  for (auto& [score, ids] : by_score) std::sort(ids.begin(), ids.end(), std::greater<>());

  std::vector<double> selected;
  selected.reserve(n);
  std::vector<GreedyStep> steps;
  steps.reserve(n);
  for (std::size_t step = 0; step < n; ++step) {
    double best_distance = 0;
    const std::string* best_id = nullptr;
    double best_score = 0;
    for (const auto& [score, ids] : by_score) {
      if (ids.empty()) continue;
      const double d = ks_distance_with_extra(selected, score, sorted_target);
      const std::string& id = ids.back();
      if (!best_id || d < best_distance || (d == best_distance && id < *best_id)) {
        best_distance = d;
        best_id = &id;
        best_score = score;
      }
    }
    steps.push_back({*best_id, best_score, best_distance});
    by_score[best_score].pop_back();
    selected.insert(std::upper_bound(selected.begin(), selected.end(), best_score), best_score);
  }
  return steps;
}

namespace {

json score_map(const OverlapDistribution& dist) {
  json out = json::array();
  for (const auto& e : dist.entries) out.push_back(json{{"id", e.doc_id}, {"score", e.score}});
  return out;
}

}  // namespace

SelectionResult build_no_ngram(const LabeledPool& pool, const NoNgramOptions& opt) {
  const auto member_ids = pool.sorted_ids(Label::member);
  const auto candidate_ids = pool.sorted_ids(Label::non_member);
  if (opt.n == 0) throw Error(ErrorCode::config_error, "output size n must be positive");
  if (2 * opt.n > member_ids.size())
    throw Error(ErrorCode::pool_too_small, "n=" + std::to_string(opt.n) + " exceeds half of the " +
                                               std::to_string(member_ids.size()) + " known members");
  if (opt.n > candidate_ids.size())
    throw Error(ErrorCode::pool_too_small, "n=" + std::to_string(opt.n) + " exceeds the " +
                                               std::to_string(candidate_ids.size()) + " known non-members");

  // Member sample and the fixed left-out reference.
  Rng rng(derive_seed(opt.seed, "no_ngram/members"));
  std::vector<std::string> selected_members;
  std::unordered_set<std::string> chosen;
  for (std::size_t slot : sample_without_replacement(member_ids.size(), opt.n, rng)) {
    selected_members.push_back(member_ids[slot]);
    chosen.insert(member_ids[slot]);
  }
  std::vector<std::string> left_out;
  for (const auto& id : member_ids)
    if (!chosen.contains(id)) left_out.push_back(id);

  const auto reference = resolve(pool, left_out);
  const auto index = build_index(reference, opt.gram_n, opt.target_fp_rate);
  const auto ref_id = miabench::reference_id(reference);

  const auto target = distribution(resolve(pool, selected_members), index, ref_id, opt.mode, opt.threads);
  if (target.entries.empty())
    throw Error(ErrorCode::all_candidates_too_short,
                "no sampled member has at least " + std::to_string(opt.gram_n) + " tokens");

  // Candidate overlap scores are fixed once the reference is fixed.
  const auto candidates = distribution(resolve(pool, candidate_ids), index, ref_id, opt.mode, opt.threads);
  if (candidates.entries.empty())
    throw Error(ErrorCode::all_candidates_too_short,
                "no non-member candidate has at least " + std::to_string(opt.gram_n) + " tokens");

  std::vector<ScoredCandidate> scored;
  scored.reserve(candidates.entries.size());
  for (const auto& e : candidates.entries) scored.push_back({e.doc_id, e.score});
  const auto target_scores = target.scores();
  const auto steps = greedy_ks_selection(target_scores, scored, opt.n);

  SelectionResult result;
  result.method = SelectionMethod::no_ngram;
  result.seed = opt.seed;
  result.members = selected_members;
  std::map<std::string, double> cand_score;
  for (const auto& e : candidates.entries) cand_score[e.doc_id] = e.score;
  std::vector<double> chosen_scores;
  json step_log = json::array();
  for (const auto& s : steps) {
    result.non_members.push_back(s.chosen_id);
    chosen_scores.push_back(s.chosen_score);
    step_log.push_back(json{{"id", s.chosen_id}, {"score", s.chosen_score}, {"ks", s.distance}});
  }

  // Random non-member sample of the same size among eligible candidates.
  Rng baseline_rng(derive_seed(opt.seed, "no_ngram/random_baseline"));
  std::vector<double> baseline;
  for (std::size_t slot : sample_without_replacement(scored.size(), opt.n, baseline_rng))
    baseline.push_back(scored[slot].score);

  OverlapDistribution selected_dist;
  selected_dist.n = opt.gram_n;
  selected_dist.reference_id = ref_id;
  for (const auto& s : steps) selected_dist.entries.push_back({s.chosen_id, s.chosen_score});

  result.diagnostics = json{
      {"gram_n", opt.gram_n},
      {"overlap_mode", overlap_mode_name(opt.mode)},
      {"distance", "kolmogorov_smirnov"},
      {"final_ks", steps.empty() ? 0.0 : steps.back().distance},
      {"random_baseline_ks", ks_distance(baseline, target_scores)},
      {"reference_id", ref_id},
      {"reference_size", left_out.size()},
      {"index", index.describe()},
      {"members_excluded_short", target.excluded_short},
      {"candidates_excluded_short", candidates.excluded_short},
      {"eligible_candidates", scored.size()},
      {"member_overlap", score_map(target)},
      {"non_member_overlap", score_map(selected_dist)},
      {"steps", step_log},
  };
  return result;
}

ConfidenceVector confidence_vector(std::span<const double> probabilities) {
  ConfidenceVector v;
  double sq = 0;
  for (double p : probabilities) {
    v.components.push_back(p - 0.5);
    sq += (p - 0.5) * (p - 0.5);
  }
  v.norm = std::sqrt(sq);
  return v;
}

std::vector<CandidateConfidence> score_candidates(std::span<const Document* const> candidates,
                                                  std::span<const NaiveBayesModel> classifiers,
                                                  unsigned threads) {
  std::vector<CandidateConfidence> out(candidates.size());
  parallel_for(candidates.size(), threads, [&](std::size_t i) {
    std::vector<double> probs;
    probs.reserve(classifiers.size());
    for (const auto& model : classifiers) probs.push_back(predict_proba(model, *candidates[i]));
    out[i].id = candidates[i]->id;
    out[i].confidence = confidence_vector(probs);
    out[i].mean_probability = probs.empty() ? 0.5 : mean(probs);
  });
  std::sort(out.begin(), out.end(), [](const CandidateConfidence& a, const CandidateConfidence& b) {
    if (a.confidence.norm != b.confidence.norm) return a.confidence.norm < b.confidence.norm;
    return a.id < b.id;
  });
  return out;
}

ConfidenceSelection select_by_confidence(std::span<const CandidateConfidence> sorted, std::size_t n,
                                         bool balanced) {
  if (sorted.size() < n)
    throw Error(ErrorCode::pool_too_small,
                std::to_string(sorted.size()) + " candidates for n=" + std::to_string(n));
  ConfidenceSelection sel;
  auto take = [&](const CandidateConfidence& c) {
    sel.ids.push_back(c.id);
    sel.norms.push_back(c.confidence.norm);
    (c.mean_probability >= 0.5 ? sel.predicted_member : sel.predicted_non_member) += 1;
  };
  if (!balanced) {
    for (std::size_t i = 0; i < n; ++i) take(sorted[i]);
    return sel;
  }
  std::vector<const CandidateConfidence*> sides[2];
  for (const auto& c : sorted) sides[c.mean_probability >= 0.5 ? 0 : 1].push_back(&c);
  std::size_t next[2] = {0, 0};
  auto before = [](const CandidateConfidence* a, const CandidateConfidence* b) {
    if (a->confidence.norm != b->confidence.norm) return a->confidence.norm < b->confidence.norm;
    return a->id < b->id;
  };
  int turn = 0;
  if (sides[0].empty() || (!sides[1].empty() && before(sides[1][0], sides[0][0]))) turn = 1;
  while (sel.ids.size() < n) {
    if (next[turn] >= sides[turn].size()) {
      sel.imbalanced = true;
      turn = 1 - turn;
    }
    take(*sides[turn][next[turn]++]);
    turn = 1 - turn;
  }
  return sel;
}

NoClassResult build_no_class_detailed(const LabeledPool& pool, const NoClassOptions& opt) {
  if (opt.n == 0) throw Error(ErrorCode::config_error, "output size n must be positive");
  const auto member_ids = pool.sorted_ids(Label::member);
  const auto non_member_ids = pool.sorted_ids(Label::non_member);
  if (4 * opt.n > member_ids.size() || 4 * opt.n > non_member_ids.size())
    throw Error(ErrorCode::pool_too_small, "n=" + std::to_string(opt.n) +
                                               " exceeds a quarter of a pool side (" +
                                               std::to_string(member_ids.size()) + " members, " +
                                               std::to_string(non_member_ids.size()) + " non-members)");

  NoClassResult out;
  std::unordered_set<std::string> excluded;
  if (opt.trained.empty()) {
    if (opt.ensemble.empty()) throw Error(ErrorCode::config_error, "classifier ensemble is empty");
    Rng rm(derive_seed(opt.seed, "no_class/train_members"));
    Rng rn(derive_seed(opt.seed, "no_class/train_non_members"));
    for (std::size_t s : sample_without_replacement(member_ids.size(), opt.n, rm))
      out.training_members.push_back(member_ids[s]);
    for (std::size_t s : sample_without_replacement(non_member_ids.size(), opt.n, rn))
      out.training_non_members.push_back(non_member_ids[s]);
    excluded.insert(out.training_members.begin(), out.training_members.end());
    excluded.insert(out.training_non_members.begin(), out.training_non_members.end());
    const auto tm = resolve(pool, out.training_members);
    const auto tn = resolve(pool, out.training_non_members);
    for (const auto& spec : opt.ensemble) {
      try {
        out.classifiers.push_back(train_on_documents(tm, tn, spec, opt.threads));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::single_class_training)
          throw Error(ErrorCode::untrainable_ensemble, e.what());
        throw;
      }
    }
  } else {
    out.classifiers = opt.trained;
  }

  const bool balanced = opt.balanced.value_or(out.classifiers.size() == 1);
  json side_diag = json::object();
  for (Label label : {Label::member, Label::non_member}) {
    std::vector<std::string> remaining;
    for (const auto& id : label == Label::member ? member_ids : non_member_ids)
      if (!excluded.contains(id)) remaining.push_back(id);
    const auto scored = score_candidates(resolve(pool, remaining), out.classifiers, opt.threads);
    const auto sel = select_by_confidence(scored, opt.n, balanced);
    (label == Label::member ? out.selection.members : out.selection.non_members) = sel.ids;

    std::vector<double> norms = sel.norms;
    std::sort(norms.begin(), norms.end());
    json quadrants = label == Label::member
                         ? json{{"true_positive", sel.predicted_member}, {"false_negative", sel.predicted_non_member}}
                         : json{{"false_positive", sel.predicted_member}, {"true_negative", sel.predicted_non_member}};
    side_diag[label == Label::member ? "members" : "non_members"] = json{
        {"candidates", scored.size()},
        {"step_norms", sel.norms},
        {"norm_summary",
         json{{"min", norms.front()}, {"median", quantile_sorted(norms, 0.5)}, {"max", norms.back()}}},
        {"quadrants", quadrants},
        {"imbalanced", sel.imbalanced},
    };
  }

  json ensemble = json::array();
  for (const auto& spec : opt.ensemble) ensemble.push_back(to_json(spec));
  out.selection.method = SelectionMethod::no_class;
  out.selection.seed = opt.seed;
  out.selection.diagnostics = json{
      {"classifiers", out.classifiers.size()},
      {"ensemble", opt.trained.empty() ? ensemble : json("pretrained")},
      {"balanced", balanced},
      {"training_members", out.training_members},
      {"training_non_members", out.training_non_members},
      {"members", side_diag["members"]},
      {"non_members", side_diag["non_members"]},
  };
  return out;
}

SelectionResult build_no_class(const LabeledPool& pool, const NoClassOptions& options) {
  return build_no_class_detailed(pool, options).selection;
}

}  // namespace miabench
