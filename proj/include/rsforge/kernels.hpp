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

// Similarity kernels behind retrieval, dedup and k-means.
//
// Every kernel exists twice: `serial::` is the straightforward reference
// used by tests, `parallel::` is the OpenMP version used by the pipeline.
// Both compute each score with the same double-accumulated dot product and
// rank with the same total order (score descending, then id ascending), so
// their results are identical for any worker count.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rsforge/embed_store.hpp"

namespace rsforge::kernels {

struct Candidate {
  std::uint32_t row = 0;
  double score = 0.0;
  bool operator==(const Candidate&) const = default;
};

struct Edge {
  std::uint32_t a = 0;  // a < b
  std::uint32_t b = 0;
  double score = 0.0;
  bool operator==(const Edge&) const = default;
};

/// Row-major k x dim matrix of double-precision centroids.
struct Centroids {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  Centroids() = default;
  Centroids(std::size_t rows, std::size_t cols) : k(rows), dim(cols), values(rows * cols, 0.0) {}
  std::span<double> row(std::size_t c) { return {values.data() + c * dim, dim}; }
  std::span<const double> row(std::size_t c) const { return {values.data() + c * dim, dim}; }
};

struct Assignment {
  std::vector<std::uint32_t> labels;
  std::vector<double> cost;  // squared euclidean distance to the assigned centroid
};

/// Ranking order shared by all top-k kernels.
inline bool ranks_before(const Candidate& x, const Candidate& y, const EmbeddingStore& store) {
  if (x.score != y.score) return x.score > y.score;
  return store.id_rank(x.row) < store.id_rank(y.row);
}

double dot_mixed(std::span<const float> x, std::span<const double> c);
double squared_distance(std::span<const float> x, std::span<const double> c);

namespace serial {

std::vector<Candidate> top_k(std::span<const float> query, const EmbeddingStore& store,
                             std::size_t k);
std::vector<Candidate> top_k_rows(std::span<const float> query, const EmbeddingStore& store,
                                  std::span<const std::uint32_t> rows, std::size_t k);

/// Every unordered pair (a < b) with similarity >= tau, ordered by (a, b).
std::vector<Edge> similarity_edges(const EmbeddingStore& store, double tau);
/// Same, restricted to pairs inside one group.
std::vector<Edge> similarity_edges_grouped(const EmbeddingStore& store, double tau,
                                           std::span<const std::vector<std::uint32_t>> groups);

/// Nearest centroid per row: argmax dot when spherical, argmin distance
/// otherwise; ties go to the lowest centroid index.
Assignment assign(const EmbeddingStore& store, const Centroids& centroids, bool spherical);

/// Per-cluster vector sums and counts.
void accumulate(const EmbeddingStore& store, std::span<const std::uint32_t> labels,
                Centroids& sums, std::vector<std::size_t>& counts);

}  // namespace serial

namespace parallel {

std::vector<Candidate> top_k(std::span<const float> query, const EmbeddingStore& store,
                             std::size_t k);
std::vector<Candidate> top_k_rows(std::span<const float> query, const EmbeddingStore& store,
                                  std::span<const std::uint32_t> rows, std::size_t k);
/// One top-k list per query row; parallel over queries.
std::vector<std::vector<Candidate>> top_k_batch(const EmbeddingStore& queries,
                                                const EmbeddingStore& store, std::size_t k);

std::vector<Edge> similarity_edges(const EmbeddingStore& store, double tau);
std::vector<Edge> similarity_edges_grouped(const EmbeddingStore& store, double tau,
                                           std::span<const std::vector<std::uint32_t>> groups);

Assignment assign(const EmbeddingStore& store, const Centroids& centroids, bool spherical);

/// Parallel over clusters; each cluster sums its members in row order, so
/// the result is bit-identical to serial::accumulate.
void accumulate(const EmbeddingStore& store, std::span<const std::uint32_t> labels,
                Centroids& sums, std::vector<std::size_t>& counts);

}  // namespace parallel

}  // namespace rsforge::kernels
