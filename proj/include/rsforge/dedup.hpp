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

// Near-duplicate elimination: thresholded similarity graph, union-find
// components, smallest-id representatives.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rsforge/embed_store.hpp"
#include "rsforge/kernels.hpp"

namespace rsforge {

class ClusterModel;

/// Disjoint-set forest with union by rank and full path compression.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n);

  /// Throws std::out_of_range for an index >= size().
  std::size_t find(std::size_t a);
  /// Returns true when a and b were in different sets.
  bool unite(std::size_t a, std::size_t b);

  std::size_t size() const { return parent_.size(); }
  std::size_t components() const { return components_; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint8_t> rank_;
  std::size_t components_;
};

enum class DedupMode { exact, cluster_pruned };

std::string_view to_string(DedupMode mode);
DedupMode dedup_mode_from_string(std::string_view s);

using SimilarityEdge = kernels::Edge;

/// Exact mode: every pair with similarity >= tau. Cluster-pruned mode
/// (approximate): only pairs that share a cluster in `model`, whose
/// assignments must cover every store id.
std::vector<SimilarityEdge> build_similarity_edges(const EmbeddingStore& store, double tau,
                                                   DedupMode mode = DedupMode::exact,
                                                   const ClusterModel* model = nullptr);

struct DedupResult {
  std::vector<std::string> ids;
  std::vector<std::string> representative;         // aligned with ids
  std::vector<std::vector<std::string>> components;  // members sorted; ordered by representative

  bool is_representative(std::size_t i) const { return representative[i] == ids[i]; }
  std::size_t removed() const { return ids.size() - components.size(); }
};

/// Connected components of the edge graph over `ids` (edge endpoints are
/// indices into ids). Unions are applied in `shards` independent forests
/// built in parallel and then merged; the partition does not depend on the
/// shard count or edge order.
DedupResult dedup_components(std::span<const SimilarityEdge> edges, std::span<const std::string> ids,
                             std::size_t shards = 1);

/// JSONL {"id":..., "rep":...}, one line per id in input order.
void write_dedup_map(const std::filesystem::path& path, const DedupResult& result);

}  // namespace rsforge
