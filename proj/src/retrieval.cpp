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

#include "rsforge/retrieval.hpp"

#include <algorithm>
#include <unordered_set>

#include "rsforge/kernels.hpp"

namespace rsforge {

ClusterIndex::ClusterIndex(const ClusterModel& model, const EmbeddingStore& text_store)
    : model_(&model), store_(&text_store), lists_(model.k()), cluster_of_row_(text_store.size()) {
  if (!text_store.normalized()) throw DomainError("retrieval requires a normalized text store");
  if (!text_store.empty() && text_store.dim() != model.dim()) {
    throw DomainError("retrieval: text store dim " + std::to_string(text_store.dim()) +
                      " != centroid dim " + std::to_string(model.dim()));
  }
  for (std::size_t r = 0; r < text_store.size(); ++r) {
    auto c = model.cluster_of(text_store.id(r));
    if (!c) throw Error("cluster model has no assignment for sentence '" + text_store.id(r) + "'");
    lists_[*c].push_back(static_cast<std::uint32_t>(r));
    cluster_of_row_[r] = *c;
  }
}

std::vector<RetrievalHit> ClusterIndex::retrieve(std::span<const float> query, std::size_t k,
                                                 std::size_t probes) const {
  if (k == 0) throw DomainError("retrieval: k must be >= 1");
  if (probes == 0 || probes > model_->k()) {
    throw DomainError("retrieval: probes must be in [1, " + std::to_string(model_->k()) + "], got " +
                      std::to_string(probes));
  }
  std::vector<std::uint32_t> candidates;
  for (const auto& c : nearest_centroids(query, *model_, probes)) {
    const auto& l = lists_[c.cluster];
    candidates.insert(candidates.end(), l.begin(), l.end());
  }
  std::vector<RetrievalHit> out;
  std::uint32_t rank = 1;
  for (const auto& cand : kernels::serial::top_k_rows(query, *store_, candidates, k)) {
    out.push_back({store_->id(cand.row), cand.score, cluster_of_row_[cand.row], rank++});
  }
  return out;
}

std::vector<RetrievalHit> hierarchical_retrieve(std::span<const float> image_vec,
                                                const EmbeddingStore& text_store,
                                                const ClusterModel& model, std::size_t k,
                                                std::size_t probes) {
  return ClusterIndex(model, text_store).retrieve(image_vec, k, probes);
}

std::vector<std::vector<RetrievalHit>> retrieve_batch(const EmbeddingStore& queries,
                                                      const ClusterIndex& index, std::size_t k,
                                                      std::size_t probes) {
  std::vector<std::vector<RetrievalHit>> out(queries.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(queries.size()); ++q) {
    out[static_cast<std::size_t>(q)] = index.retrieve(queries.row(static_cast<std::size_t>(q)), k, probes);
  }
  return out;
}

double recall_at_k(std::span<const RetrievalHit> hits, std::span<const RetrievalHit> oracle) {
  if (hits.size() > oracle.size()) {
    throw DomainError("recall_at_k: k mismatch (" + std::to_string(hits.size()) + " hits vs " +
                      std::to_string(oracle.size()) + " oracle hits)");
  }
  if (oracle.empty()) return 1.0;
  std::unordered_set<std::string> truth;
  for (const auto& h : oracle) truth.insert(h.sentence_id);
  std::size_t shared = 0;
  for (const auto& h : hits) shared += truth.contains(h.sentence_id);
  return static_cast<double>(shared) / static_cast<double>(oracle.size());
}

Json hits_to_json(const std::string& image_id, std::span<const RetrievalHit> hits) {
  Json arr = Json::array();
  for (const auto& h : hits) {
    arr.push_back({{"sentence_id", h.sentence_id}, {"score", h.score}, {"rank", h.rank}, {"cluster", h.cluster}});
  }
  return {{"image_id", image_id}, {"hits", std::move(arr)}};
}

void write_hits(const std::filesystem::path& path, std::span<const std::string> image_ids,
                std::span<const std::vector<RetrievalHit>> hits) {
  JsonlWriter w(path);
  for (std::size_t i = 0; i < image_ids.size(); ++i) w.write(hits_to_json(image_ids[i], hits[i]));
  w.close();
}

HitTable read_hits(const std::filesystem::path& path) {
  HitTable table;
  for (const Json& j : read_jsonl(path)) {
    std::string id = j.at("image_id").get<std::string>();
    std::vector<RetrievalHit> hits;
    for (const Json& h : j.at("hits")) {
      RetrievalHit hit;
      hit.sentence_id = h.at("sentence_id").get<std::string>();
      hit.score = h.at("score").get<double>();
      hit.rank = h.at("rank").get<std::uint32_t>();
      hit.cluster = h.value("cluster", 0u);
      hits.push_back(std::move(hit));
    }
    if (!table.hits.emplace(id, std::move(hits)).second) {
      throw FormatError(path.string() + ": duplicate image_id '" + id + "'");
    }
    table.image_ids.push_back(std::move(id));
  }
  return table;
}

}  // namespace rsforge
