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

#include "rsforge/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rsforge/jsonl.hpp"

namespace rsforge {

ClusterModel::ClusterModel(kernels::Centroids centroids, bool spherical, std::vector<std::string> ids,
                           std::vector<std::uint32_t> labels)
    : centroids_(std::move(centroids)),
      spherical_(spherical),
      ids_(std::move(ids)),
      labels_(std::move(labels)),
      members_(centroids_.k),
      inertia_(std::numeric_limits<double>::quiet_NaN()) {
  if (ids_.size() != labels_.size()) throw DomainError("cluster model: ids and labels differ in length");
  label_of_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (labels_[i] >= centroids_.k) {
      throw DomainError("cluster model: label " + std::to_string(labels_[i]) + " of '" + ids_[i] +
                        "' is outside [0, " + std::to_string(centroids_.k) + ")");
    }
    if (!label_of_.emplace(ids_[i], labels_[i]).second) {
      throw DomainError("cluster model: id '" + ids_[i] + "' assigned twice");
    }
    members_[labels_[i]].push_back(static_cast<std::uint32_t>(i));
  }
}

std::vector<std::string> ClusterModel::member_ids(std::size_t c) const {
  std::vector<std::string> out;
  for (std::uint32_t i : members_.at(c)) out.push_back(ids_[i]);
  return out;
}

std::optional<std::uint32_t> ClusterModel::cluster_of(const std::string& id) const {
  auto it = label_of_.find(id);
  if (it == label_of_.end()) return std::nullopt;
  return it->second;
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void copy_row(const EmbeddingStore& store, std::size_t r, std::span<double> dst) {
  auto x = store.row(r);
  for (std::size_t d = 0; d < x.size(); ++d) dst[d] = x[d];
}

kernels::Centroids seed_plus_plus(const EmbeddingStore& store, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = store.size();
  kernels::Centroids c(k, store.dim());
  std::vector<bool> chosen(n, false);
  std::size_t first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  first = std::min(first, n - 1);
  copy_row(store, first, c.row(0));
  chosen[first] = true;

  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 1; j < k; ++j) {
    auto last = c.row(j - 1);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      double d = kernels::squared_distance(store.row(static_cast<std::size_t>(i)), last);
      if (d < d2[static_cast<std::size_t>(i)]) d2[static_cast<std::size_t>(i)] = d;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!chosen[i]) total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      double run = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] == 0.0) continue;
        run += d2[i];
        pick = i;
        if (run > target) break;
      }
    }
    if (pick == n) {
      // All remaining points coincide with a chosen centre.
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = true;
    copy_row(store, pick, c.row(j));
  }
  return c;
}

// Gives every empty cluster the point farthest from its centroid among
// clusters that can spare one.
void repair_empty(const EmbeddingStore& store, kernels::Assignment& a, kernels::Centroids& c) {
  std::vector<std::size_t> counts(c.k, 0);
  for (auto l : a.labels) ++counts[l];
  for (std::size_t j = 0; j < c.k; ++j) {
    if (counts[j] != 0) continue;
    std::size_t best = a.labels.size();
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      if (counts[a.labels[i]] <= 1) continue;
      if (best == a.labels.size() || a.cost[i] > a.cost[best]) best = i;
    }
    if (best == a.labels.size()) throw DomainError("k-means: cannot repair empty cluster");
    --counts[a.labels[best]];
    a.labels[best] = static_cast<std::uint32_t>(j);
    a.cost[best] = 0.0;
    counts[j] = 1;
    copy_row(store, best, c.row(j));
  }
}

double total_cost(const kernels::Assignment& a) {
  double s = 0.0;
  for (double x : a.cost) s += x;
  return s;
}

}  // namespace

ClusterModel kmeans_fit(const EmbeddingStore& store, const KMeansOptions& options) {
  const std::size_t n = store.size();
  const std::size_t k = options.k;
  if (k == 0) throw DomainError("k-means: k must be positive");
  if (k > n) {
    throw DomainError("k-means: k = " + std::to_string(k) + " exceeds point count " + std::to_string(n));
  }
  if (options.spherical && !store.normalized()) {
    throw DomainError("spherical k-means requires a normalized store");
  }
  const std::size_t dim = store.dim();
  std::mt19937_64 rng(options.seed);
  kernels::Centroids centroids = seed_plus_plus(store, k, rng);

  std::vector<double> history;
  kernels::Centroids sums(k, dim);
  std::vector<std::size_t> counts;
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    auto a = kernels::parallel::assign(store, centroids, options.spherical);
    repair_empty(store, a, centroids);
    history.push_back(total_cost(a));

    kernels::parallel::accumulate(store, a.labels, sums, counts);
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      auto s = sums.row(c);
      std::vector<double> next(s.begin(), s.end());
      for (double& v : next) v /= static_cast<double>(counts[c]);
      if (options.spherical) {
        double norm = 0.0;
        for (double v : next) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;  // antipodal members; keep the old centre
        for (double& v : next) v /= norm;
      }
      auto cur = centroids.row(c);
      double shift = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        double diff = next[d] - cur[d];
        shift += diff * diff;
        cur[d] = next[d];
      }
      movement = std::max(movement, std::sqrt(shift));
    }
    if (movement < options.tol) break;
  }

  // The persisted centroids are float32; labels are computed against them
  // so that the model is self-consistent on reload.
  for (double& v : centroids.values) v = static_cast<double>(static_cast<float>(v));
  auto final_assignment = kernels::parallel::assign(store, centroids, options.spherical);
  repair_empty(store, final_assignment, centroids);
  for (double& v : centroids.values) v = static_cast<double>(static_cast<float>(v));

  ClusterModel model(std::move(centroids), options.spherical, store.ids(),
                     std::move(final_assignment.labels));
  model.set_fit_diagnostics(total_cost(final_assignment), std::move(history));
  return model;
}

std::vector<std::uint32_t> assign(const EmbeddingStore& store, const ClusterModel& model) {
  return kernels::parallel::assign(store, model.centroids(), model.spherical()).labels;
}

std::vector<CentroidScore> nearest_centroids(std::span<const float> query, const ClusterModel& model,
                                             std::size_t m) {
  if (m > model.k()) {
    throw DomainError("nearest_centroids: m = " + std::to_string(m) + " exceeds k = " +
                      std::to_string(model.k()));
  }
  if (query.size() != model.dim()) throw DomainError("nearest_centroids: dim mismatch");
  std::vector<CentroidScore> all(model.k());
  for (std::size_t c = 0; c < model.k(); ++c) {
    auto row = model.centroids().row(c);
    double s = model.spherical() ? kernels::dot_mixed(query, row) : -kernels::squared_distance(query, row);
    all[c] = {static_cast<std::uint32_t>(c), s};
  }
  auto cmp = [](const CentroidScore& x, const CentroidScore& y) {
    return x.score != y.score ? x.score > y.score : x.cluster < y.cluster;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end(), cmp);
  all.resize(m);
  return all;
}

void write_cluster_model(const ClusterModel& model, const std::filesystem::path& centroids_path,
                         const std::filesystem::path& assignments_path) {
  std::vector<std::string> ids;
  std::vector<float> data;
  for (std::size_t c = 0; c < model.k(); ++c) {
    ids.push_back("c" + std::to_string(c));
    for (double v : model.centroids().row(c)) data.push_back(static_cast<float>(v));
  }
  write_store(EmbeddingStore(std::move(ids), model.dim(), std::move(data), model.spherical()),
              centroids_path);
  JsonlWriter w(assignments_path);
  for (std::size_t i = 0; i < model.ids().size(); ++i) {
    w.write({{"id", model.ids()[i]}, {"cluster", model.labels()[i]}});
  }
  w.close();
}

ClusterModel read_cluster_model(const std::filesystem::path& centroids_path,
                                const std::filesystem::path& assignments_path) {
  EmbeddingStore store = read_store(centroids_path);
  kernels::Centroids c(store.size(), store.dim());
  for (std::size_t r = 0; r < store.size(); ++r) {
    auto x = store.row(r);
    std::copy(x.begin(), x.end(), c.row(r).begin());
  }
  std::vector<std::string> ids;
  std::vector<std::uint32_t> labels;
  for (const Json& j : read_jsonl(assignments_path)) {
    ids.push_back(j.at("id").get<std::string>());
    labels.push_back(j.at("cluster").get<std::uint32_t>());
  }
  return ClusterModel(std::move(c), store.normalized(), std::move(ids), std::move(labels));
}

}  // namespace rsforge
