#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "generators.hpp"
#include "miabench/error.hpp"
#include "miabench/hash.hpp"
#include "miabench/ngram.hpp"
#include "oracles.hpp"

using namespace miabench;

namespace {

std::vector<Document> docs(const std::vector<std::string>& texts, const char* prefix = "d") {
  std::vector<Document> out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.push_back(make_document(prefix + std::to_string(i), texts[i]));
  return out;
}

std::vector<const Document*> ptrs(const std::vector<Document>& d) {
  std::vector<const Document*> out;
  for (const auto& x : d) out.push_back(&x);
  return out;
}

}  // namespace

TEST_CASE("build_index: single gram") {
  const auto ref = docs({"abc"});
  const auto idx = build_index(ptrs(ref), 3, 0.001);
  CHECK(idx.contains(oracle::u32("abc")));
  CHECK(idx.n() == 3);
  CHECK(idx.inserted() == 1);
  CHECK(idx.estimated_fp_rate() <= 2 * 0.001);
}

TEST_CASE("build_index: sliding-window insert count") {
  const auto ref = docs({"abcd"});
  const auto idx = build_index(ptrs(ref), 3, 0.001);
  CHECK(idx.inserted() == oracle::grams(oracle::u32("abcd"), 3).size());
  CHECK(idx.inserted() == 2);
  CHECK(idx.gram_occurrences() == 2);
}

TEST_CASE("build_index: errors and short documents") {
  CHECK_THROWS_AS(build_index(std::vector<const Document*>{}, 3), Error);
  const auto ref = docs({"ab", "abcdef"});
  CHECK_THROWS_AS(build_index(ptrs(ref), 0), Error);
  CHECK_THROWS_AS(build_index(ptrs(ref), 3, 1.5), Error);
  const auto idx = build_index(ptrs(ref), 3);
  CHECK(idx.short_documents() == 1);
}

TEST_CASE("overlap: worked examples") {
  const auto ref = docs({"abcd"});
  const auto idx = build_index(ptrs(ref), 3, 1e-6);
  const auto d = make_document("q", "abcdef");
  CHECK(overlap(d, idx) == 0.5);
  CHECK(overlap(d, idx) == oracle::overlap(oracle::u32("abcdef"), {oracle::u32("abcd")}, 3));
  CHECK(overlap(make_document("q", "bcd"), idx) == 1.0);
  CHECK(overlap(make_document("q", "xyzxyz"), idx) == 0.0);
  try {
    overlap(make_document("q", "ab"), idx);
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::too_short);
  }
}

TEST_CASE("overlap: occurrence versus distinct counting") {
  const auto ref = docs({"aaaa"});
  const auto idx = build_index(ptrs(ref), 2, 1e-6);
  const auto d = make_document("q", "aaab");  // aa aa ab
  CHECK(overlap(d, idx, OverlapMode::occurrence) == doctest::Approx(2.0 / 3.0));
  CHECK(overlap(d, idx, OverlapMode::distinct) == 0.5);
}

TEST_CASE("overlap counts code points, not bytes") {
  const auto ref = docs({"\xC3\xA9t\xC3\xA9"});  // "été"
  const auto idx = build_index(ptrs(ref), 2, 1e-6);
  CHECK(overlap(make_document("q", "\xC3\xA9t"), idx) == 1.0);
}

TEST_CASE("distribution: examples") {
  const auto ref = docs({"the quick brown", "lazy dog sleeps"});
  const auto self = distribution(ptrs(ref), ptrs(ref), 4);
  for (const auto& e : self.entries) CHECK(e.score == 1.0);

  const auto mixed = docs({"quick brown", "0123456789", "ab"}, "x");
  const auto dist = distribution(ptrs(mixed), ptrs(ref), 4, {.target_fp_rate = 1e-6});
  REQUIRE(dist.entries.size() == 2);
  CHECK(dist.entries[0].score == 1.0);
  CHECK(dist.entries[1].score == 0.0);
  CHECK(dist.excluded_short == std::vector<std::string>{"x2"});
  CHECK(dist.reference_id == reference_id(ptrs(ref)));
  CHECK_THROWS_AS(distribution(ptrs(mixed), std::vector<const Document*>{}, 4), Error);
}

TEST_CASE("distribution: order independent and thread independent") {
  gen::Source g(21);
  std::vector<std::string> rt, dt;
  for (int i = 0; i < 20; ++i) rt.push_back(g.text(g.size(5, 60), 4));
  for (int i = 0; i < 40; ++i) dt.push_back(g.text(g.size(2, 60), 4));
  const auto ref = docs(rt, "r");
  const auto ds = docs(dt, "q");
  auto p = ptrs(ds);
  const auto a = distribution(p, ptrs(ref), 4);
  std::reverse(p.begin(), p.end());
  const auto b = distribution(p, ptrs(ref), 4, {.threads = 4});
  auto sa = a.scores(), sb = b.scores();
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  CHECK(sa == sb);
  CHECK(a.reference_id == b.reference_id);
  CHECK(a.excluded_short.size() == b.excluded_short.size());
}

TEST_CASE("distribution export") {
  const auto ref = docs({"abcdef"});
  const auto dist = distribution(ptrs(ref), ptrs(ref), 3);
  CHECK(distribution_csv(dist) == "doc_id,score\nd0,1\n");
  const auto s = distribution_summary(dist);
  CHECK(s["count"] == 1);
  CHECK(s["deciles"].size() == 11);
}

TEST_CASE("Bloom overlap property: within 2*fp of exact, no false negatives") {
  gen::Source g(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = g.size(3, 6);
    std::vector<std::string> rt;
    for (int i = 0; i < 15; ++i) rt.push_back(g.text(g.size(20, 200), 5));
    const auto ref = docs(rt, "r");
    const double fp = 0.01;
    const auto idx = build_index(ptrs(ref), static_cast<int>(n), fp);
    CHECK(idx.estimated_fp_rate() <= 2 * fp);
    std::vector<std::u32string> ref32;
    for (const auto& t : rt) ref32.push_back(oracle::u32(t));
    for (int q = 0; q < 20; ++q) {
      const auto t = g.text(g.size(n, 150), 6);
      const auto d = make_document("q", t);
      const auto got = overlap_counts(d, idx);
      const double exact = oracle::overlap(oracle::u32(t), ref32, n);
      const double bloom = static_cast<double>(got.found) / static_cast<double>(got.total);
      CHECK(bloom >= exact);  // no false negatives
      // Every gram found exactly is found by the filter.
      for (const auto& gram : oracle::grams(oracle::u32(t), n)) {
        bool in_ref = false;
        for (const auto& r : ref32) in_ref = in_ref || r.find(gram) != std::u32string::npos;
        if (in_ref) CHECK(idx.contains(gram));
      }
    }
  }
}

TEST_CASE("Bloom filter: measured false-positive rate near target") {
  const double fp = 0.01;
  auto f = BloomFilter::for_capacity(20000, fp);
  for (std::uint64_t i = 0; i < 20000; ++i) f.insert(fmix64(i));
  std::size_t hits = 0;
  const std::size_t probes = 200000;
  for (std::uint64_t i = 0; i < probes; ++i) hits += f.contains(fmix64(i + 1000000007ULL));
  CHECK(static_cast<double>(hits) / probes <= 2 * fp);
}

TEST_CASE("CardinalitySketch estimates distinct counts") {
  for (std::uint64_t n : {10ULL, 1000ULL, 100000ULL}) {
    CardinalitySketch s;
    for (std::uint64_t i = 0; i < n; ++i) {
      s.add(fmix64(i));
      s.add(fmix64(i));
    }
    CHECK(std::abs(s.estimate() - static_cast<double>(n)) <= 0.05 * static_cast<double>(n) + 1);
  }
}

TEST_CASE("overlap is monotone in the reference") {
  gen::Source g(23);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::string> rt;
    const auto doc = make_document("q", g.text(40, 4));
    double prev = -1;
    for (int i = 0; i < 6; ++i) {
      rt.push_back(g.text(30, 4));
      const auto ref = docs(rt, "r");
      const double s = overlap(doc, build_index(ptrs(ref), 4, 1e-9));
      CHECK(s >= prev);
      prev = s;
    }
  }
}
