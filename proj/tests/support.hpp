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

// Test fixtures and reference oracles. The oracles deliberately avoid the
// library's kernels: plain loops, full sorts and graph search.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rsforge/embed_store.hpp"

namespace rsforge::testing {

inline std::filesystem::path source_dir() { return RSFORGE_SOURCE_DIR; }

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rsforge-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::vector<double> gaussian_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = g(rng);
  return v;
}

inline std::vector<double> unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

/// Ids are "<prefix><n>" with scrambled numbers so that row order and id
/// order disagree.
inline std::vector<std::string> scrambled_ids(std::size_t n, const std::string& prefix, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = prefix + std::to_string(perm[i]);
  return ids;
}

inline EmbeddingStore random_store(std::size_t n, std::size_t dim, std::uint64_t seed,
                                   const std::string& prefix = "v") {
  std::mt19937_64 rng(seed);
  std::vector<float> data;
  data.reserve(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (double x : unit(gaussian_vector(rng, dim))) data.push_back(static_cast<float>(x));
  }
  return normalize(EmbeddingStore(scrambled_ids(n, prefix, rng), dim, std::move(data), false));
}

/// Points scattered around `centers` random directions.
inline EmbeddingStore clustered_store(std::size_t n, std::size_t dim, std::size_t centers, double spread,
                                      std::uint64_t seed, const std::string& prefix = "v") {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> mu;
  for (std::size_t c = 0; c < centers; ++c) mu.push_back(unit(gaussian_vector(rng, dim)));
  std::normal_distribution<double> g(0.0, spread / std::sqrt(static_cast<double>(dim)));
  std::vector<float> data;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v = mu[i % centers];
    for (double& x : v) x += g(rng);
    for (double x : unit(v)) data.push_back(static_cast<float>(x));
  }
  return normalize(EmbeddingStore(scrambled_ids(n, prefix, rng), dim, std::move(data), false));
}

inline double plain_dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

/// Full sort of every row by (score desc, id asc), truncated to k.
inline std::vector<std::pair<std::string, double>> oracle_top_k(std::span<const float> q,
                                                                const EmbeddingStore& store, std::size_t k) {
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t r = 0; r < store.size(); ++r) all.emplace_back(store.id(r), plain_dot(q, store.row(r)));
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

/// Connected components of the all-pairs graph {(i, j) : sim >= tau} by
/// breadth-first search. Members sorted; components sorted.
inline std::vector<std::vector<std::string>> oracle_components(const EmbeddingStore& store, double tau) {
  const std::size_t n = store.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (plain_dot(store.row(i), store.row(j)) >= tau) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  std::vector<bool> seen(n, false);
  std::vector<std::vector<std::string>> comps;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::string> comp;
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = true;
    while (!q.empty()) {
      std::size_t u = q.front();
      q.pop();
      comp.push_back(store.id(u));
      for (std::size_t v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          q.push(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  std::sort(comps.begin(), comps.end());
  return comps;
}

/// Minimum k-means objective over every assignment of the points to k
/// non-empty clusters. The centre of a cluster is its mean, normalized
/// when `spherical`.
inline double oracle_kmeans_optimum(const std::vector<std::vector<double>>& pts, std::size_t k, bool spherical) {
  const std::size_t n = pts.size();
  const std::size_t dim = pts.front().size();
  std::vector<std::size_t> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<std::vector<double>> mean(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[label[i]];
      for (std::size_t d = 0; d < dim; ++d) mean[label[i]][d] += pts[i][d];
    }
    if (std::all_of(count.begin(), count.end(), [](std::size_t c) { return c > 0; })) {
      for (std::size_t c = 0; c < k; ++c) {
        for (double& v : mean[c]) v /= static_cast<double>(count[c]);
        if (spherical) mean[c] = unit(mean[c]);
      }
      double cost = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dim; ++d) {
          double diff = pts[i][d] - mean[label[i]][d];
          cost += diff * diff;
        }
      }
      best = std::min(best, cost);
    }
    std::size_t i = 0;
    while (i < n && ++label[i] == k) label[i++] = 0;
    if (i == n) break;
  }
  return best;
}

inline EmbeddingStore store_from_points(const std::vector<std::vector<double>>& pts, bool normalized) {
  std::vector<std::string> ids;
  std::vector<float> data;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ids.push_back("p" + std::to_string(i));
    for (double x : pts[i]) data.push_back(static_cast<float>(x));
  }
  return EmbeddingStore(std::move(ids), pts.front().size(), std::move(data), normalized);
}

}  // namespace rsforge::testing
