#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "miabench/classifier.hpp"
#include "miabench/dataset_builder.hpp"
#include "miabench/hash.hpp"
#include "miabench/ngram.hpp"
#include "miabench/random.hpp"
#include "miabench/reference_lm.hpp"
#include "miabench/stats.hpp"
#include "miabench/synthetic.hpp"

using namespace miabench;

namespace {

std::vector<double> uniform_scores(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

const LabeledPool& small_pool() {
  static const LabeledPool pool = [] {
    SyntheticCorpusConfig c;
    c.members = 400;
    c.non_members = 200;
    return synthetic_pool(c);
  }();
  return pool;
}

std::vector<const Document*> members() {
  std::vector<const Document*> out;
  for (const auto& d : small_pool().members()) out.push_back(&d);
  return out;
}

}  // namespace

static void BM_BloomInsert(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) {
    auto f = BloomFilter::for_capacity(n, 0.001);
    for (std::uint64_t i = 0; i < n; ++i) f.insert(fmix64(i));
    benchmark::DoNotOptimize(f);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BloomInsert)->Arg(1 << 16)->Arg(1 << 20);

static void BM_BloomQuery(benchmark::State& state) {
  auto f = BloomFilter::for_capacity(1 << 20, 0.001);
  for (std::uint64_t i = 0; i < (1 << 20); ++i) f.insert(fmix64(i));
  std::uint64_t i = 0, hits = 0;
  for (auto _ : state) hits += f.contains(fmix64(i++ * 2 + 1));
  benchmark::DoNotOptimize(hits);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BloomQuery);

static void BM_BuildIndex(benchmark::State& state) {
  const auto docs = members();
  for (auto _ : state) benchmark::DoNotOptimize(build_index(docs, kDefaultGramN));
}
BENCHMARK(BM_BuildIndex)->Unit(benchmark::kMillisecond);

static void BM_KsDistance(benchmark::State& state) {
  const auto a = uniform_scores(static_cast<std::size_t>(state.range(0)), 1);
  const auto b = uniform_scores(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(ks_distance(a, b));
}
BENCHMARK(BM_KsDistance)->Arg(200)->Arg(10000);

static void BM_GreedySelection(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto target = uniform_scores(n, 3);
  const auto raw = uniform_scores(5 * n, 4);
  std::vector<ScoredCandidate> cands;
  for (std::size_t i = 0; i < raw.size(); ++i) cands.push_back({"c" + std::to_string(i), raw[i]});
  for (auto _ : state) benchmark::DoNotOptimize(greedy_ks_selection(target, cands, n));
}
BENCHMARK(BM_GreedySelection)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_Featurize(benchmark::State& state) {
  const auto& doc = small_pool().members().front();
  for (auto _ : state) benchmark::DoNotOptimize(featurize(doc.text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(doc.text.size()));
}
BENCHMARK(BM_Featurize);

static void BM_LmScore(benchmark::State& state) {
  const auto lm = lm_train(members(), {});
  const auto& doc = small_pool().non_members().front();
  for (auto _ : state) benchmark::DoNotOptimize(lm_score(lm, doc));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(doc.char_tokens.size()));
}
BENCHMARK(BM_LmScore);

BENCHMARK_MAIN();
