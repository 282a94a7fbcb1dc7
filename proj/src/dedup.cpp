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

#include "rsforge/dedup.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "rsforge/cluster.hpp"
#include "rsforge/jsonl.hpp"

namespace rsforge {

UnionFind::UnionFind(std::size_t n) : parent_(n), rank_(n, 0), components_(n) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t a) {
  if (a >= parent_.size()) {
    throw std::out_of_range("union-find index " + std::to_string(a) + " out of range " +
                            std::to_string(parent_.size()));
  }
  std::size_t root = a;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[a] != root) {
    std::size_t next = parent_[a];
    parent_[a] = root;
    a = next;
  }
  return root;
}

bool UnionFind::unite(std::size_t a, std::size_t b) {
  std::size_t ra = find(a);
  std::size_t rb = find(b);
  if (ra == rb) return false;
  if (rank_[ra] < rank_[rb]) std::swap(ra, rb);
  parent_[rb] = ra;
  if (rank_[ra] == rank_[rb]) ++rank_[ra];
  --components_;
  return true;
}

std::string_view to_string(DedupMode mode) {
  return mode == DedupMode::exact ? "exact" : "cluster_pruned";
}

DedupMode dedup_mode_from_string(std::string_view s) {
  if (s == "exact") return DedupMode::exact;
  if (s == "cluster_pruned") return DedupMode::cluster_pruned;
  throw Error("unknown dedup mode '" + std::string(s) + "' (expected exact or cluster_pruned)");
}

std::vector<SimilarityEdge> build_similarity_edges(const EmbeddingStore& store, double tau,
                                                   DedupMode mode, const ClusterModel* model) {
  if (!store.normalized()) throw DomainError("similarity edges require a normalized store");
  if (mode == DedupMode::exact) return kernels::parallel::similarity_edges(store, tau);
  if (!model) throw Error("cluster_pruned dedup needs a cluster model");
  std::vector<std::vector<std::uint32_t>> groups(model->k());
  for (std::size_t r = 0; r < store.size(); ++r) {
    auto c = model->cluster_of(store.id(r));
    if (!c) throw Error("cluster model has no assignment for id '" + store.id(r) + "'");
    groups[*c].push_back(static_cast<std::uint32_t>(r));
  }
  return kernels::parallel::similarity_edges_grouped(store, tau, groups);
}

DedupResult dedup_components(std::span<const SimilarityEdge> edges, std::span<const std::string> ids,
                             std::size_t shards) {
  const std::size_t n = ids.size();
  for (const auto& e : edges) {
    if (e.a >= n || e.b >= n) throw std::out_of_range("edge endpoint outside id range");
  }
  shards = std::max<std::size_t>(1, std::min(shards, std::max<std::size_t>(1, edges.size())));

  std::vector<UnionFind> forests(shards, UnionFind(n));
  const std::size_t per_shard = (edges.size() + shards - 1) / shards;
#pragma omp parallel for schedule(static) if (shards > 1)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(shards); ++s) {
    std::size_t begin = static_cast<std::size_t>(s) * per_shard;
    std::size_t end = std::min(edges.size(), begin + per_shard);
    auto& uf = forests[static_cast<std::size_t>(s)];
    for (std::size_t i = begin; i < end; ++i) uf.unite(edges[i].a, edges[i].b);
  }
  UnionFind merged = std::move(forests.front());
  for (std::size_t s = 1; s < shards; ++s) {
    for (std::size_t i = 0; i < n; ++i) merged.unite(i, forests[s].find(i));
  }

  // Smallest id in each component is its representative.
  std::vector<std::size_t> best(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t root = merged.find(i);
    if (best[root] == n || ids[i] < ids[best[root]]) best[root] = i;
  }
  DedupResult out;
  out.ids.assign(ids.begin(), ids.end());
  out.representative.resize(n);
  std::vector<std::vector<std::string>> by_root(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t root = merged.find(i);
    out.representative[i] = ids[best[root]];
    by_root[root].push_back(ids[i]);
  }
  for (auto& group : by_root) {
    if (group.empty()) continue;
    std::sort(group.begin(), group.end());
    out.components.push_back(std::move(group));
  }
  std::sort(out.components.begin(), out.components.end(),
            [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return out;
}

void write_dedup_map(const std::filesystem::path& path, const DedupResult& result) {
  JsonlWriter w(path);
  for (std::size_t i = 0; i < result.ids.size(); ++i) {
    w.write({{"id", result.ids[i]}, {"rep", result.representative[i]}});
  }
  w.close();
}

}  // namespace rsforge
