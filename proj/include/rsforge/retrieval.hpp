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

// Two-level retrieval: rank centroids, then exact search inside the
// members of the best `probes` clusters.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rsforge/cluster.hpp"
#include "rsforge/embed_store.hpp"
#include "rsforge/jsonl.hpp"

namespace rsforge {

struct RetrievalHit {
  std::string sentence_id;
  double score = 0.0;
  std::uint32_t cluster = 0;
  std::uint32_t rank = 0;  // 1-based
  bool operator==(const RetrievalHit&) const = default;
};

/// Inverted lists of store rows per cluster, built once per (model, store).
class ClusterIndex {
 public:
  /// Every store id must have an assignment in `model`. The store must be
  /// normalized and outlive the index.
  ClusterIndex(const ClusterModel& model, const EmbeddingStore& text_store);

  std::vector<RetrievalHit> retrieve(std::span<const float> query, std::size_t k,
                                     std::size_t probes) const;

  const ClusterModel& model() const { return *model_; }
  const EmbeddingStore& store() const { return *store_; }
  const std::vector<std::uint32_t>& list(std::size_t c) const { return lists_[c]; }

 private:
  const ClusterModel* model_;
  const EmbeddingStore* store_;
  std::vector<std::vector<std::uint32_t>> lists_;
  std::vector<std::uint32_t> cluster_of_row_;
};

std::vector<RetrievalHit> hierarchical_retrieve(std::span<const float> image_vec,
                                                const EmbeddingStore& text_store,
                                                const ClusterModel& model, std::size_t k = 3,
                                                std::size_t probes = 1);

/// One hit list per query row, in query order; parallel over queries.
std::vector<std::vector<RetrievalHit>> retrieve_batch(const EmbeddingStore& queries,
                                                      const ClusterIndex& index, std::size_t k,
                                                      std::size_t probes);

/// |hits ∩ oracle| / k over sentence ids, with k = oracle.size(). `hits`
/// may be shorter than k (too few candidates) but never longer; a longer
/// list is a k mismatch and throws DomainError.
double recall_at_k(std::span<const RetrievalHit> hits, std::span<const RetrievalHit> oracle);

/// hits.jsonl: {"image_id", "hits":[{"sentence_id","score","rank"}]}.
Json hits_to_json(const std::string& image_id, std::span<const RetrievalHit> hits);
void write_hits(const std::filesystem::path& path, std::span<const std::string> image_ids,
                std::span<const std::vector<RetrievalHit>> hits);
/// image_id -> hits, preserving file order in the returned id list.
struct HitTable {
  std::vector<std::string> image_ids;
  std::map<std::string, std::vector<RetrievalHit>> hits;
};
HitTable read_hits(const std::filesystem::path& path);

}  // namespace rsforge
