#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "generators.hpp"
#include "miabench/error.hpp"
#include "miabench/stats.hpp"
#include "oracles.hpp"

using namespace miabench;

TEST_CASE("ks_distance: worked examples") {
  CHECK(ks_distance(std::vector<double>{0.3, 0.1, 0.3}, std::vector<double>{0.3, 0.3, 0.1}) == 0.0);
  CHECK(ks_distance(std::vector<double>{0, 0, 0}, std::vector<double>{1, 1, 1}) == 1.0);
  const std::vector<double> a{0.1, 0.4, 0.7}, b{0.2, 0.5, 0.8};
  CHECK(ks_distance(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(ks_distance(a, b) == oracle::ks(a, b));
}

TEST_CASE("ks_distance: empty sample") {
  CHECK_THROWS_AS(ks_distance(std::vector<double>{}, std::vector<double>{1.0}), Error);
  try {
    ks_distance(std::vector<double>{1.0}, std::vector<double>{});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_sample);
  }
}

TEST_CASE("ks_distance: property - brute-force oracle, symmetry, range") {
  gen::Source g(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto na = g.size(1, 120), nb = g.size(1, 120);
    const bool tied = trial % 2 == 0;
    const auto a = tied ? g.tied_scores(na, 7) : g.scores(na);
    const auto b = tied ? g.tied_scores(nb, 7) : g.scores(nb);
    const double d = ks_distance(a, b);
    CHECK(d == oracle::ks(a, b));
    CHECK(d == ks_distance(b, a));
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
}

TEST_CASE("ks_distance_with_extra matches the merged sample") {
  gen::Source g(12);
  for (int trial = 0; trial < 300; ++trial) {
    auto base = g.tied_scores(g.size(0, 40), 9);
    auto target = g.tied_scores(g.size(1, 40), 9);
    const double extra = static_cast<double>(g.size(0, 9)) / 9;
    std::sort(base.begin(), base.end());
    std::sort(target.begin(), target.end());
    auto merged = base;
    merged.push_back(extra);
    CHECK(ks_distance_with_extra(base, extra, target) == oracle::ks(merged, target));
  }
}

TEST_CASE("roc: worked examples") {
  CHECK(roc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}, true).auc == 1.0);
  const auto r = roc(std::vector<double>{0.8, 0.3}, std::vector<double>{0.5, 0.1}, true);
  CHECK(r.auc == 0.75);
  CHECK(r.auc == oracle::mann_whitney_auc({0.8, 0.3}, {0.5, 0.1}));
  CHECK(roc(std::vector<double>{0.4, 0.4, 0.4}, std::vector<double>{0.4, 0.4}, true).auc == 0.5);
  CHECK_THROWS_AS(roc(std::vector<double>{}, std::vector<double>{0.1}, true), Error);
}

TEST_CASE("roc: shape invariants and Mann-Whitney oracle") {
  gen::Source g(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pos = trial % 3 ? g.scores(g.size(1, 60)) : g.tied_scores(g.size(1, 60), 5);
    const auto neg = trial % 3 ? g.scores(g.size(1, 60)) : g.tied_scores(g.size(1, 60), 5);
    const auto r = roc(pos, neg, true);
    REQUIRE(r.points.size() >= 2);
    CHECK(r.points.front() == RocPoint{0, 0});
    CHECK(r.points.back() == RocPoint{1, 1});
    for (std::size_t i = 1; i < r.points.size(); ++i) {
      CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
      CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
    }
    CHECK(std::abs(r.auc - trapezoid_auc(r.points)) <= 1e-12);
    CHECK(std::abs(r.auc - oracle::mann_whitney_auc(pos, neg)) <= 1e-12);

    // Negating scores and flipping the orientation changes nothing.
    auto npos = pos, nneg = neg;
    for (auto& x : npos) x = -x;
    for (auto& x : nneg) x = -x;
    CHECK(roc(npos, nneg, false) == r);

    double prev = -1;
    for (const auto& [fpr, tpr] : r.tpr_at_fpr) {
      CHECK(tpr >= prev);
      prev = tpr;
    }
  }
}

TEST_CASE("tpr_at uses the step function") {
  const std::vector<RocPoint> pts{{0, 0}, {0, 0.3}, {0.04, 0.5}, {0.2, 0.9}, {1, 1}};
  CHECK(tpr_at(pts, 0.01) == 0.3);
  CHECK(tpr_at(pts, 0.05) == 0.5);
  CHECK(tpr_at(pts, 0.10) == 0.5);
  CHECK(tpr_at(pts, 1.0) == 1.0);
}

TEST_CASE("summarize averages folds") {
  const auto a = roc(std::vector<double>{1, 2}, std::vector<double>{0, 3}, true);
  const auto b = roc(std::vector<double>{2, 3}, std::vector<double>{0, 1}, true);
  const auto s = summarize({a, b});
  CHECK(s.mean_auc == doctest::Approx((a.auc + b.auc) / 2));
  CHECK(s.folds.size() == 2);
}

namespace {

std::vector<LabeledId> labeled(std::size_t members, std::size_t non_members) {
  std::vector<LabeledId> ids;
  for (std::size_t i = 0; i < members; ++i) ids.push_back({"m" + std::to_string(i), Label::member});
  for (std::size_t i = 0; i < non_members; ++i) ids.push_back({"n" + std::to_string(i), Label::non_member});
  return ids;
}

}  // namespace

TEST_CASE("kfold_split: examples") {
  std::vector<std::string> ten;
  for (int i = 0; i < 10; ++i) ten.push_back("d" + std::to_string(i));
  const auto folds = kfold_split(ten, 5, 3);
  REQUIRE(folds.size() == 5);
  std::multiset<std::string> all;
  for (const auto& f : folds) {
    CHECK(f.test_ids.size() == 2);
    CHECK(f.train_ids.size() == 8);
    all.insert(f.test_ids.begin(), f.test_ids.end());
  }
  CHECK(all == std::multiset<std::string>(ten.begin(), ten.end()));

  const auto again = kfold_split(ten, 5, 3);
  for (std::size_t i = 0; i < 5; ++i) CHECK(again[i].test_ids == folds[i].test_ids);

  const auto strat = kfold_split(labeled(50, 50), 5, 9);
  for (const auto& f : strat) {
    const auto m = std::count_if(f.test_ids.begin(), f.test_ids.end(), [](auto& s) { return s[0] == 'm'; });
    CHECK(m == 10);
    CHECK(f.test_ids.size() == 20);
  }
  CHECK_THROWS_AS(kfold_split(labeled(2, 1), 5, 0), Error);
  CHECK_THROWS_AS(kfold_split(ten, 1, 0), Error);
}

TEST_CASE("kfold_split: property - partition and disjoint train/test") {
  gen::Source g(14);
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = g.size(2, 7);
    const auto ids = labeled(g.size(0, 30), g.size(0, 30));
    if (ids.size() < k) continue;
    const auto folds = kfold_split(ids, k, trial);
    std::multiset<std::string> tests;
    std::size_t lo = ids.size(), hi = 0;
    for (const auto& f : folds) {
      tests.insert(f.test_ids.begin(), f.test_ids.end());
      lo = std::min(lo, f.test_ids.size());
      hi = std::max(hi, f.test_ids.size());
      std::set<std::string> train(f.train_ids.begin(), f.train_ids.end());
      CHECK(train.size() + f.test_ids.size() == ids.size());
      for (const auto& t : f.test_ids) CHECK_FALSE(train.contains(t));
    }
    CHECK(tests.size() == ids.size());
    CHECK(std::set<std::string>(tests.begin(), tests.end()).size() == ids.size());
    CHECK(hi - lo <= 1);
  }
}
