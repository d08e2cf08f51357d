#pragma once

// Reference implementations used only by tests. Each one is written the
// slow, obvious way and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace oracle {

/// sup |F_a - F_b| by evaluating both ECDFs at every sample point with a
/// double loop.
inline double ks(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> points(a);
  points.insert(points.end(), b.begin(), b.end());
  double best = 0;
  for (double x : points) {
    std::size_t ca = 0, cb = 0;
    for (double v : a) ca += v <= x;
    for (double v : b) cb += v <= x;
    const double gap = std::abs(static_cast<double>(ca) / static_cast<double>(a.size()) -
                                static_cast<double>(cb) / static_cast<double>(b.size()));
    best = std::max(best, gap);
  }
  return best;
}

/// P(member > non-member) + P(tie) / 2 over all pairs.
inline double mann_whitney_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double p : pos)
    for (double q : neg) wins += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Character n-grams of a UTF-32 string, positional.
inline std::vector<std::u32string> grams(const std::u32string& s, std::size_t n) {
  std::vector<std::u32string> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) out.push_back(s.substr(i, n));
  return out;
}

/// Exact overlap: found positional grams / all positional grams.
inline double overlap(const std::u32string& doc, const std::vector<std::u32string>& reference, std::size_t n,
                      bool distinct = false) {
  std::set<std::u32string> ref;
  for (const auto& r : reference)
    for (auto& g : grams(r, n)) ref.insert(std::move(g));
  auto gs = grams(doc, n);
  if (distinct) {
    std::set<std::u32string> u(gs.begin(), gs.end());
    gs.assign(u.begin(), u.end());
  }
  std::size_t found = 0;
  for (const auto& g : gs) found += ref.count(g);
  return static_cast<double>(found) / static_cast<double>(gs.size());
}

/// Exact gram membership over a fixed reference, built once.
class GramSet {
 public:
  GramSet(const std::vector<std::u32string>& reference, std::size_t n) : n_(n) {
    for (const auto& r : reference)
      for (auto& g : grams(r, n)) set_.insert(std::move(g));
  }
  bool contains(const std::u32string& gram) const { return set_.contains(gram); }
  /// Occurrence-counted exact overlap.
  double overlap(const std::u32string& doc) const {
    const auto gs = grams(doc, n_);
    std::size_t found = 0;
    for (const auto& g : gs) found += set_.contains(g);
    return static_cast<double>(found) / static_cast<double>(gs.size());
  }

 private:
  std::size_t n_;
  std::unordered_set<std::u32string> set_;
};

inline std::u32string u32(std::string_view ascii) { return std::u32string(ascii.begin(), ascii.end()); }

}  // namespace oracle
