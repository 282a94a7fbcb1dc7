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

// Id-indexed float32 embedding matrices and the RSEB v1 file format.
//
// RSEB v1 layout (all little-endian):
//   "RSEB" | u32 version=1 | u32 dim | u64 count | u8 normalized
//   count x (u16 byte_length, UTF-8 id bytes)
//   count x dim float32, row-major

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rsforge/common.hpp"

namespace rsforge {

inline constexpr double kUnitNormTolerance = 1e-5;

class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  /// Validates: ids unique, data.size() == ids.size() * dim, dim >= 1,
  /// finite entries, and unit rows when `normalized` is set.
  EmbeddingStore(std::vector<std::string> ids, std::size_t dim, std::vector<float> data,
                 bool normalized);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  bool normalized() const { return normalized_; }
  bool empty() const { return ids_.empty(); }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t row) const { return ids_[row]; }
  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * dim_, dim_};
  }
  std::span<const float> data() const { return data_; }

  std::optional<std::size_t> find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id).has_value(); }

  /// Position of row r when rows are ordered by ascending id. Used as the
  /// tie-break key by every ranking kernel.
  std::uint32_t id_rank(std::size_t r) const { return id_rank_[r]; }

  /// Rows for `ids`, in that order. Throws Error naming the first missing id.
  EmbeddingStore select(std::span<const std::string> ids) const;
  EmbeddingStore select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const EmbeddingStore& other) const;

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  bool normalized_ = false;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::uint32_t> id_rank_;
};

void write_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore read_store(const std::filesystem::path& path);

std::string encode_store(const EmbeddingStore& store);
EmbeddingStore decode_store(std::string_view bytes, std::string_view source = "<memory>");

/// Unit-normalizes every row. Throws DomainError naming a zero-norm row.
EmbeddingStore normalize(const EmbeddingStore& store);

/// Returns `store` itself when already normalized, else normalize(store).
EmbeddingStore ensure_normalized(EmbeddingStore store);

/// Double-accumulated dot product.
double dot(std::span<const float> u, std::span<const float> v);

/// Cosine similarity clamped to [-1, 1]. Throws DomainError on dim mismatch
/// or a zero-norm argument.
double cosine_sim(std::span<const float> u, std::span<const float> v);

/// Dot product of two unit vectors, clamped to [-1, 1].
inline double unit_similarity(std::span<const float> u, std::span<const float> v) {
  double s = dot(u, v);
  return s > 1.0 ? 1.0 : (s < -1.0 ? -1.0 : s);
}

struct ScoredId {
  std::string id;
  double score = 0.0;
  bool operator==(const ScoredId&) const = default;
};

/// Exact top-min(k, size) rows by cosine, score descending then id
/// ascending. Requires a normalized store; k == 0 returns empty.
std::vector<ScoredId> top_k_bruteforce(std::span<const float> query, const EmbeddingStore& store,
                                       std::size_t k);

}  // namespace rsforge
