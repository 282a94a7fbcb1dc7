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

#include "rsforge/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <limits>

namespace rsforge::kernels {

double dot_mixed(std::span<const float> x, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) s += static_cast<double>(x[d]) * c[d];
  return s;
}

double squared_distance(std::span<const float> x, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    double diff = static_cast<double>(x[d]) - c[d];
    s += diff * diff;
  }
  return s;
}

namespace {

constexpr std::size_t kTopKBlock = 4096;

void keep_top(std::vector<Candidate>& cands, std::size_t k, const EmbeddingStore& store) {
  auto cmp = [&](const Candidate& x, const Candidate& y) { return ranks_before(x, y, store); };
  if (cands.size() > k) {
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), cmp);
    cands.resize(k);
  } else {
    std::sort(cands.begin(), cands.end(), cmp);
  }
}

void check_query(std::span<const float> query, const EmbeddingStore& store) {
  if (!store.empty() && query.size() != store.dim()) {
    throw DomainError("query dim " + std::to_string(query.size()) + " != store dim " +
                      std::to_string(store.dim()));
  }
}

std::vector<Edge> pairs_from_row(const EmbeddingStore& store, double tau, std::size_t i) {
  std::vector<Edge> out;
  auto u = store.row(i);
  for (std::size_t j = i + 1; j < store.size(); ++j) {
    double s = unit_similarity(u, store.row(j));
    if (s >= tau) out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), s});
  }
  return out;
}

std::vector<Edge> pairs_in_group(const EmbeddingStore& store, double tau,
                                 const std::vector<std::uint32_t>& group) {
  std::vector<Edge> out;
  for (std::size_t x = 0; x < group.size(); ++x) {
    for (std::size_t y = x + 1; y < group.size(); ++y) {
      std::uint32_t a = std::min(group[x], group[y]);
      std::uint32_t b = std::max(group[x], group[y]);
      double s = unit_similarity(store.row(a), store.row(b));
      if (s >= tau) out.push_back({a, b, s});
    }
  }
  return out;
}

void sort_edges(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
}

std::pair<std::uint32_t, double> nearest(std::span<const float> x, const Centroids& centroids,
                                         bool spherical) {
  std::uint32_t best = 0;
  if (spherical) {
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.k; ++c) {
      double s = dot_mixed(x, centroids.row(c));
      if (s > best_score) {
        best_score = s;
        best = static_cast<std::uint32_t>(c);
      }
    }
  } else {
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.k; ++c) {
      double d = squared_distance(x, centroids.row(c));
      if (d < best_dist) {
        best_dist = d;
        best = static_cast<std::uint32_t>(c);
      }
    }
  }
  return {best, squared_distance(x, centroids.row(best))};
}

void check_centroids(const EmbeddingStore& store, const Centroids& centroids) {
  if (centroids.k == 0) throw DomainError("assign: no centroids");
  if (!store.empty() && centroids.dim != store.dim()) {
    throw DomainError("assign: centroid dim " + std::to_string(centroids.dim) +
                      " != store dim " + std::to_string(store.dim()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

namespace serial {

std::vector<Candidate> top_k(std::span<const float> query, const EmbeddingStore& store,
                             std::size_t k) {
  check_query(query, store);
  std::vector<Candidate> all;
  all.reserve(store.size());
  for (std::size_t r = 0; r < store.size(); ++r) {
    all.push_back({static_cast<std::uint32_t>(r), unit_similarity(query, store.row(r))});
  }
  std::sort(all.begin(), all.end(),
            [&](const Candidate& x, const Candidate& y) { return ranks_before(x, y, store); });
  if (all.size() > k) all.resize(k);
  return all;
}

std::vector<Candidate> top_k_rows(std::span<const float> query, const EmbeddingStore& store,
                                  std::span<const std::uint32_t> rows, std::size_t k) {
  check_query(query, store);
  std::vector<Candidate> all;
  all.reserve(rows.size());
  for (std::uint32_t r : rows) all.push_back({r, unit_similarity(query, store.row(r))});
  std::sort(all.begin(), all.end(),
            [&](const Candidate& x, const Candidate& y) { return ranks_before(x, y, store); });
  if (all.size() > k) all.resize(k);
  return all;
}

std::vector<Edge> similarity_edges(const EmbeddingStore& store, double tau) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (std::size_t j = i + 1; j < store.size(); ++j) {
      double s = unit_similarity(store.row(i), store.row(j));
      if (s >= tau) out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), s});
    }
  }
  return out;
}

std::vector<Edge> similarity_edges_grouped(const EmbeddingStore& store, double tau,
                                           std::span<const std::vector<std::uint32_t>> groups) {
  std::vector<Edge> out;
  for (const auto& g : groups) {
    auto part = pairs_in_group(store, tau, g);
    out.insert(out.end(), part.begin(), part.end());
  }
  sort_edges(out);
  return out;
}

Assignment assign(const EmbeddingStore& store, const Centroids& centroids, bool spherical) {
  check_centroids(store, centroids);
  Assignment out;
  out.labels.resize(store.size());
  out.cost.resize(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto [label, cost] = nearest(store.row(i), centroids, spherical);
    out.labels[i] = label;
    out.cost[i] = cost;
  }
  return out;
}

void accumulate(const EmbeddingStore& store, std::span<const std::uint32_t> labels,
                Centroids& sums, std::vector<std::size_t>& counts) {
  std::fill(sums.values.begin(), sums.values.end(), 0.0);
  counts.assign(sums.k, 0);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto x = store.row(i);
    auto dst = sums.row(labels[i]);
    for (std::size_t d = 0; d < x.size(); ++d) dst[d] += x[d];
    ++counts[labels[i]];
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------

namespace parallel {

std::vector<Candidate> top_k_rows(std::span<const float> query, const EmbeddingStore& store,
                                  std::span<const std::uint32_t> rows, std::size_t k) {
  check_query(query, store);
  if (k == 0 || rows.empty()) return {};
  const std::size_t blocks = (rows.size() + kTopKBlock - 1) / kTopKBlock;
  std::vector<std::vector<Candidate>> partial(blocks);
#pragma omp parallel for schedule(static) if (blocks > 1)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    std::size_t begin = static_cast<std::size_t>(b) * kTopKBlock;
    std::size_t end = std::min(rows.size(), begin + kTopKBlock);
    auto& local = partial[static_cast<std::size_t>(b)];
    local.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      local.push_back({rows[i], unit_similarity(query, store.row(rows[i]))});
    }
    keep_top(local, k, store);
  }
  std::vector<Candidate> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  keep_top(merged, k, store);
  return merged;
}

std::vector<Candidate> top_k(std::span<const float> query, const EmbeddingStore& store,
                             std::size_t k) {
  std::vector<std::uint32_t> rows(store.size());
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = static_cast<std::uint32_t>(r);
  return top_k_rows(query, store, rows, k);
}

std::vector<std::vector<Candidate>> top_k_batch(const EmbeddingStore& queries,
                                                const EmbeddingStore& store, std::size_t k) {
  std::vector<std::vector<Candidate>> out(queries.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(queries.size()); ++q) {
    out[static_cast<std::size_t>(q)] = serial::top_k(queries.row(static_cast<std::size_t>(q)), store, k);
  }
  return out;
}

std::vector<Edge> similarity_edges(const EmbeddingStore& store, double tau) {
  const std::size_t n = store.size();
  std::vector<std::vector<Edge>> per_row(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    per_row[static_cast<std::size_t>(i)] = pairs_from_row(store, tau, static_cast<std::size_t>(i));
  }
  std::vector<Edge> out;
  for (auto& r : per_row) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::vector<Edge> similarity_edges_grouped(const EmbeddingStore& store, double tau,
                                           std::span<const std::vector<std::uint32_t>> groups) {
  std::vector<std::vector<Edge>> per_group(groups.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(groups.size()); ++g) {
    per_group[static_cast<std::size_t>(g)] =
        pairs_in_group(store, tau, groups[static_cast<std::size_t>(g)]);
  }
  std::vector<Edge> out;
  for (auto& p : per_group) out.insert(out.end(), p.begin(), p.end());
  sort_edges(out);
  return out;
}

Assignment assign(const EmbeddingStore& store, const Centroids& centroids, bool spherical) {
  check_centroids(store, centroids);
  Assignment out;
  out.labels.resize(store.size());
  out.cost.resize(store.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(store.size()); ++i) {
    auto [label, cost] = nearest(store.row(static_cast<std::size_t>(i)), centroids, spherical);
    out.labels[static_cast<std::size_t>(i)] = label;
    out.cost[static_cast<std::size_t>(i)] = cost;
  }
  return out;
}

void accumulate(const EmbeddingStore& store, std::span<const std::uint32_t> labels,
                Centroids& sums, std::vector<std::size_t>& counts) {
  std::vector<std::vector<std::uint32_t>> members(sums.k);
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<std::uint32_t>(i));
  counts.assign(sums.k, 0);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(sums.k); ++c) {
    auto dst = sums.row(static_cast<std::size_t>(c));
    std::fill(dst.begin(), dst.end(), 0.0);
    for (std::uint32_t i : members[static_cast<std::size_t>(c)]) {
      auto x = store.row(i);
      for (std::size_t d = 0; d < x.size(); ++d) dst[d] += x[d];
    }
    counts[static_cast<std::size_t>(c)] = members[static_cast<std::size_t>(c)].size();
  }
}

}  // namespace parallel

}  // namespace rsforge::kernels
