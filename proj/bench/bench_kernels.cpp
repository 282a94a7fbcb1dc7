// Copyright 2026 The rsforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against their OpenMP counterparts. The
// parallel variants take the worker count as the benchmark argument and
// report wall time, since CPU time only covers the calling thread.

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "rsforge/common.hpp"
#include "rsforge/embed_store.hpp"
#include "rsforge/kernels.hpp"

namespace {

using namespace rsforge;
namespace k = rsforge::kernels;

EmbeddingStore make_store(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<std::string> ids(n);
  std::vector<float> data(n * dim);
  for (std::size_t i = 0; i < n; ++i) ids[i] = "r" + std::to_string(i);
  for (float& x : data) x = g(rng);
  return normalize(EmbeddingStore(std::move(ids), dim, std::move(data), false));
}

const EmbeddingStore& corpus() {
  static const EmbeddingStore s = make_store(20000, 128, 1);
  return s;
}

const EmbeddingStore& small() {
  static const EmbeddingStore s = make_store(2000, 64, 2);
  return s;
}

k::Centroids centroids(const EmbeddingStore& s, std::size_t count) {
  k::Centroids c(count, s.dim());
  for (std::size_t i = 0; i < count; ++i) {
    auto r = s.row(i * 7 % s.size());
    for (std::size_t d = 0; d < s.dim(); ++d) c.row(i)[d] = r[d];
  }
  return c;
}

void BM_top_k_serial(benchmark::State& state) {
  const auto& s = corpus();
  for (auto _ : state) benchmark::DoNotOptimize(k::serial::top_k(s.row(0), s, 10));
}

void BM_top_k_parallel(benchmark::State& state) {
  const auto& s = corpus();
  ScopedWorkers w(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(k::parallel::top_k(s.row(0), s, 10));
}

void BM_edges_serial(benchmark::State& state) {
  const auto& s = small();
  for (auto _ : state) benchmark::DoNotOptimize(k::serial::similarity_edges(s, 0.3));
}

void BM_edges_parallel(benchmark::State& state) {
  const auto& s = small();
  ScopedWorkers w(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(k::parallel::similarity_edges(s, 0.3));
}

void BM_assign_serial(benchmark::State& state) {
  const auto& s = corpus();
  auto c = centroids(s, 64);
  for (auto _ : state) benchmark::DoNotOptimize(k::serial::assign(s, c, true));
}

void BM_assign_parallel(benchmark::State& state) {
  const auto& s = corpus();
  auto c = centroids(s, 64);
  ScopedWorkers w(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(k::parallel::assign(s, c, true));
}

void BM_accumulate_serial(benchmark::State& state) {
  const auto& s = corpus();
  auto labels = k::serial::assign(s, centroids(s, 64), true).labels;
  for (auto _ : state) {
    k::Centroids sums(64, s.dim());
    std::vector<std::size_t> counts(64, 0);
    k::serial::accumulate(s, labels, sums, counts);
    benchmark::DoNotOptimize(sums.values.data());
  }
}

void BM_accumulate_parallel(benchmark::State& state) {
  const auto& s = corpus();
  auto labels = k::serial::assign(s, centroids(s, 64), true).labels;
  ScopedWorkers w(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    k::Centroids sums(64, s.dim());
    std::vector<std::size_t> counts(64, 0);
    k::parallel::accumulate(s, labels, sums, counts);
    benchmark::DoNotOptimize(sums.values.data());
  }
}

}  // namespace

BENCHMARK(BM_top_k_serial);
BENCHMARK(BM_top_k_parallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->UseRealTime();
BENCHMARK(BM_edges_serial);
BENCHMARK(BM_edges_parallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->UseRealTime();
BENCHMARK(BM_assign_serial);
BENCHMARK(BM_assign_parallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->UseRealTime();
BENCHMARK(BM_accumulate_serial);
BENCHMARK(BM_accumulate_parallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->UseRealTime();

BENCHMARK_MAIN();
