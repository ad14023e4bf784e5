#include <benchmark/benchmark.h>

#include "recsearch/catalog.hpp"

static void BM_IndelSimilarity(benchmark::State& state) {
    std::string a = "the shawshank redemption (1994)";
    std::string b = "shawshank redemption";
    for (auto _ : state) {
        benchmark::DoNotOptimize(recsearch::indel_similarity(a, b));
    }
}
BENCHMARK(BM_IndelSimilarity);

BENCHMARK_MAIN();
