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

// Lloyd k-means with k-means++ seeding (spherical by default).

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rsforge/embed_store.hpp"
#include "rsforge/kernels.hpp"

namespace rsforge {

struct KMeansOptions {
  std::size_t k = 0;
  std::size_t max_iters = 100;
  double tol = 1e-4;
  std::uint64_t seed = 0;
  bool spherical = true;
};

class ClusterModel {
 public:
  ClusterModel() = default;
  ClusterModel(kernels::Centroids centroids, bool spherical, std::vector<std::string> ids,
               std::vector<std::uint32_t> labels);

  std::size_t k() const { return centroids_.k; }
  std::size_t dim() const { return centroids_.dim; }
  bool spherical() const { return spherical_; }
  const kernels::Centroids& centroids() const { return centroids_; }

  /// Assigned ids, parallel to labels().
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }
  /// Positions into ids() of the members of cluster c, ascending.
  const std::vector<std::uint32_t>& members(std::size_t c) const { return members_[c]; }
  std::vector<std::string> member_ids(std::size_t c) const;
  std::optional<std::uint32_t> cluster_of(const std::string& id) const;

  /// Sum of squared distances of assigned points to their centroid. Not
  /// persisted; NaN for a model read from disk.
  double inertia() const { return inertia_; }
  /// Inertia after the assignment step of every Lloyd iteration.
  const std::vector<double>& inertia_history() const { return history_; }
  std::size_t iterations() const { return history_.size(); }

  void set_fit_diagnostics(double inertia, std::vector<double> history) {
    inertia_ = inertia;
    history_ = std::move(history);
  }

 private:
  kernels::Centroids centroids_;
  bool spherical_ = true;
  std::vector<std::string> ids_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::vector<std::uint32_t>> members_;
  std::unordered_map<std::string, std::uint32_t> label_of_;
  double inertia_ = 0.0;
  std::vector<double> history_;
};

/// Throws DomainError for k == 0, k > store.size(), or a spherical fit on
/// an unnormalized store. Deterministic for a fixed seed irrespective of
/// the worker count.
ClusterModel kmeans_fit(const EmbeddingStore& store, const KMeansOptions& options);

/// Nearest-centroid labels for every row of `store`.
std::vector<std::uint32_t> assign(const EmbeddingStore& store, const ClusterModel& model);

struct CentroidScore {
  std::uint32_t cluster = 0;
  double score = 0.0;
  bool operator==(const CentroidScore&) const = default;
};

/// Exact top-m centroids, score descending then lowest index. The score is
/// the dot product for spherical models and the negated squared distance
/// otherwise. Throws DomainError when m > k.
std::vector<CentroidScore> nearest_centroids(std::span<const float> query, const ClusterModel& model,
                                             std::size_t m);

/// Centroids as RSEB (ids "c0".."c{k-1}") plus JSONL {"id","cluster"}.
void write_cluster_model(const ClusterModel& model, const std::filesystem::path& centroids_path,
                         const std::filesystem::path& assignments_path);
ClusterModel read_cluster_model(const std::filesystem::path& centroids_path,
                                const std::filesystem::path& assignments_path);

}  // namespace rsforge
