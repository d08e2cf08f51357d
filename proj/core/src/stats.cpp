#include "miabench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "miabench/error.hpp"
#include "miabench/hash.hpp"
#include "miabench/random.hpp"

namespace miabench {

using nlohmann::json;

namespace {

inline double ecdf_gap(std::size_t ia, std::size_t na, std::size_t ib, std::size_t nb) {
  return std::abs(static_cast<double>(ia) / static_cast<double>(na) -
                  static_cast<double>(ib) / static_cast<double>(nb));
}

}  // namespace

double ks_distance_sorted(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::empty_sample, "KS distance needs two non-empty samples");
  std::size_t i = 0, j = 0;
  double best = 0;
  while (i < a.size() || j < b.size()) {
    // Advance past every value equal to the smallest pending one.
    double x;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j]))
      x = a[i];
    else
      x = b[j];
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    best = std::max(best, ecdf_gap(i, a.size(), j, b.size()));
  }
  return best;
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return ks_distance_sorted(sa, sb);
}

double ks_distance_with_extra(std::span<const double> base, double extra,
                              std::span<const double> target) {
  if (target.empty()) throw Error(ErrorCode::empty_sample, "KS distance needs a non-empty target");
  const std::size_t na = base.size() + 1;
  const std::size_t nb = target.size();
  std::size_t i = 0, j = 0;
  bool extra_used = false;
  double best = 0;
  auto a_done = [&] { return i >= base.size() && extra_used; };
  auto a_next = [&] {
    if (i >= base.size()) return extra;
    if (extra_used) return base[i];
    return std::min(base[i], extra);
  };
  while (!a_done() || j < nb) {
    double x;
    if (j >= nb || (!a_done() && a_next() <= target[j]))
      x = a_next();
    else
      x = target[j];
    while (i < base.size() && base[i] <= x) ++i;
    if (!extra_used && extra <= x) extra_used = true;
    while (j < nb && target[j] <= x) ++j;
    best = std::max(best, ecdf_gap(i + (extra_used ? 1 : 0), na, j, nb));
  }
  return best;
}

double distance(DistributionDistance kind, std::span<const double> a, std::span<const double> b) {
  switch (kind) {
    case DistributionDistance::kolmogorov_smirnov: return ks_distance(a, b);
  }
  throw Error(ErrorCode::internal, "unknown distance");
}

double trapezoid_auc(std::span<const RocPoint> points) {
  double area = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  return area;
}

double tpr_at(std::span<const RocPoint> points, double fpr_threshold) {
  double best = 0;
  for (const auto& p : points)
    if (p.fpr <= fpr_threshold) best = std::max(best, p.tpr);
  return best;
}

RocReport roc(std::span<const double> members, std::span<const double> non_members,
              bool higher_means_member, std::span<const double> fpr_thresholds) {
  if (members.empty() || non_members.empty())
    throw Error(ErrorCode::empty_scores, "ROC needs scores for both classes");

  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(members.size() + non_members.size());
  const double sign = higher_means_member ? 1.0 : -1.0;
  for (double s : members) all.push_back({sign * s, true});
  for (double s : non_members) all.push_back({sign * s, false});
  std::sort(all.begin(), all.end(), [](const Scored& x, const Scored& y) { return x.score > y.score; });

  RocReport report;
  report.positives = members.size();
  report.negatives = non_members.size();
  const auto P = static_cast<double>(members.size());
  const auto N = static_cast<double>(non_members.size());
  report.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].positive ? tp : fp) += 1;
      ++j;
    }
    report.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P});
    i = j;
  }
  report.points.back() = {1.0, 1.0};
  report.auc = trapezoid_auc(report.points);
  for (double t : fpr_thresholds) report.tpr_at_fpr[t] = tpr_at(report.points, t);
  return report;
}

json to_json(const RocReport& r) {
  json points = json::array();
  for (const auto& p : r.points) points.push_back(json::array({p.fpr, p.tpr}));
  json tpr = json::object();
  for (const auto& [fpr, value] : r.tpr_at_fpr) {
    std::ostringstream key;
    key << fpr;
    tpr[key.str()] = value;
  }
  return json{{"auc", r.auc},
              {"tpr_at_fpr", tpr},
              {"positives", r.positives},
              {"negatives", r.negatives},
              {"positive_label", "member"},
              {"points", points}};
}

std::string roc_points_csv(const RocReport& r, std::string_view series) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& p : r.points) out << series << ',' << p.fpr << ',' << p.tpr << '\n';
  return out.str();
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

RocSummary summarize(std::vector<RocReport> folds) {
  RocSummary s;
  s.folds = std::move(folds);
  if (s.folds.empty()) return s;
  double auc = 0;
  for (const auto& f : s.folds) {
    auc += f.auc;
    for (const auto& [t, v] : f.tpr_at_fpr) s.mean_tpr_at_fpr[t] += v;
  }
  const auto count = static_cast<double>(s.folds.size());
  s.mean_auc = auc / count;
  for (auto& [t, v] : s.mean_tpr_at_fpr) v /= count;
  return s;
}

json to_json(const RocSummary& s) {
  json folds = json::array();
  for (const auto& f : s.folds) folds.push_back(to_json(f));
  json tpr = json::object();
  for (const auto& [fpr, value] : s.mean_tpr_at_fpr) {
    std::ostringstream key;
    key << fpr;
    tpr[key.str()] = value;
  }
  return json{{"mean_auc", s.mean_auc}, {"mean_tpr_at_fpr", tpr}, {"folds", folds}};
}

std::vector<Fold> kfold_split(std::span<const LabeledId> ids, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::too_few_items, "k-fold needs k >= 2");
  if (ids.size() < k)
    throw Error(ErrorCode::too_few_items,
                std::to_string(ids.size()) + " items cannot fill " + std::to_string(k) + " folds");

  std::vector<std::vector<std::string>> test(k);
  std::size_t deal = 0;
  for (Label label : {Label::member, Label::non_member}) {
    std::vector<std::string> group;
    for (const auto& item : ids)
      if (item.label == label) group.push_back(item.id);
    // Sorting first makes the split independent of input order.
    std::sort(group.begin(), group.end());
    Rng rng(derive_seed(seed, label == Label::member ? "kfold/member" : "kfold/non_member"));
    rng.shuffle(group);
    for (auto& id : group) test[deal++ % k].push_back(std::move(id));
  }

  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].test_ids = test[f];
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) folds[f].train_ids.insert(folds[f].train_ids.end(), test[g].begin(), test[g].end());
  }
  return folds;
}

std::vector<Fold> kfold_split(std::span<const std::string> ids, std::size_t k, std::uint64_t seed) {
  std::vector<LabeledId> labeled;
  labeled.reserve(ids.size());
  for (const auto& id : ids) labeled.push_back({id, Label::member});
  return kfold_split(labeled, k, seed);
}

}  // namespace miabench
