#include <benchmark/benchmark.h>

#include "vaproto/prototypes.hpp"
#include "vaproto/rng.hpp"

using namespace vaproto;

namespace {

std::vector<ClassGaussian> make_classes(std::size_t ways, std::size_t dim,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ClassGaussian> classes(ways);
  for (auto& g : classes) {
    g.mean.resize(dim);
    g.var.resize(dim);
    for (auto& x : g.mean) x = rng.normal();
    for (auto& v : g.var) v = rng.uniform();
    g.support_count = 16;
  }
  return classes;
}

std::vector<Vector> make_queries(std::size_t n, std::size_t dim,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> queries(n, Vector(dim));
  for (auto& q : queries) {
    for (auto& x : q) x = rng.normal();
  }
  return queries;
}

}  // namespace

static void BM_WassersteinDirac(benchmark::State& state) {
  const std::size_t dim = state.range(0);
  const auto classes = make_classes(1, dim, 1);
  const auto queries = make_queries(1, dim, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(wasserstein_dirac_sq(classes[0], queries[0]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_WassersteinDirac)->Arg(16)->Arg(64)->Arg(256);

static void BM_BuresSq(benchmark::State& state) {
  const std::size_t dim = state.range(0);
  const auto classes = make_classes(2, dim, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bures_sq(classes[0], classes[1]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BuresSq)->Arg(16)->Arg(64)->Arg(256);

static void BM_ClassProbabilities(benchmark::State& state) {
  const std::size_t dim = 64;
  const std::size_t ways = state.range(0);
  const auto classes = make_classes(ways, dim, 4);
  const auto queries = make_queries(32, dim, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(class_probabilities(queries, classes));
  }
  state.SetItemsProcessed(state.iterations() * queries.size());
}
BENCHMARK(BM_ClassProbabilities)->Arg(2)->Arg(4)->Arg(16);

BENCHMARK_MAIN();
