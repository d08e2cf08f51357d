#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miabench/corpus.hpp"

namespace miabench {

/// Two-sample Kolmogorov-Smirnov statistic: sup_x |F_a(x) - F_b(x)|,
/// evaluated at every sample point of both inputs. Throws
/// Error(empty_sample).
double ks_distance(std::span<const double> a, std::span<const double> b);

/// KS between `sorted_base` with one extra value inserted and
/// `sorted_target`, without materializing the merged sample. Both inputs
/// must be sorted ascending; sorted_target must be non-empty.
double ks_distance_with_extra(std::span<const double> sorted_base, double extra,
                              std::span<const double> sorted_target);

/// Same as ks_distance but both inputs already sorted ascending.
double ks_distance_sorted(std::span<const double> a, std::span<const double> b);

enum class DistributionDistance { kolmogorov_smirnov };

double distance(DistributionDistance kind, std::span<const double> a, std::span<const double> b);

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

inline const std::vector<double> kDefaultFprThresholds{0.01, 0.05, 0.10};

/// ROC of a member-vs-non-member scoring. Equal scores form one operating
/// point. Positive class is always "member".
struct RocReport {
  std::vector<RocPoint> points;  // sorted by fpr, (0,0) ... (1,1)
  double auc = 0;
  std::map<double, double> tpr_at_fpr;
  std::size_t positives = 0;
  std::size_t negatives = 0;

  friend bool operator==(const RocReport&, const RocReport&) = default;
};

/// Throws Error(empty_scores) if either side is empty.
RocReport roc(std::span<const double> scores_members, std::span<const double> scores_non_members,
              bool higher_means_member,
              std::span<const double> fpr_thresholds = kDefaultFprThresholds);

/// Trapezoidal area under a point list.
double trapezoid_auc(std::span<const RocPoint> points);

/// Largest TPR among operating points with fpr <= threshold (step ROC).
double tpr_at(std::span<const RocPoint> points, double fpr_threshold);

nlohmann::json to_json(const RocReport& report);
std::string roc_points_csv(const RocReport& report, std::string_view series = "");

/// Mean AUC and TPR@FPR over a set of reports (folds or runs).
struct RocSummary {
  std::vector<RocReport> folds;
  double mean_auc = 0;
  std::map<double, double> mean_tpr_at_fpr;
};

RocSummary summarize(std::vector<RocReport> folds);
nlohmann::json to_json(const RocSummary& summary);

struct LabeledId {
  std::string id;
  Label label = Label::member;
};

struct Fold {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

/// Stratified k-fold partition. Each label group is shuffled with the seed
/// and dealt round-robin into the test folds, continuing the deal across
/// groups so fold sizes differ by at most one. Throws Error(too_few_items)
/// if k < 2 or there are fewer than k ids.
std::vector<Fold> kfold_split(std::span<const LabeledId> ids, std::size_t k, std::uint64_t seed);

/// Unlabeled variant: all ids form one stratum.
std::vector<Fold> kfold_split(std::span<const std::string> ids, std::size_t k, std::uint64_t seed);

double mean(std::span<const double> values);

}  // namespace miabench
