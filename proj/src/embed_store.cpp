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

#include "rsforge/embed_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "rsforge/kernels.hpp"

namespace rsforge {

EmbeddingStore::EmbeddingStore(std::vector<std::string> ids, std::size_t dim,
                               std::vector<float> data, bool normalized)
    : ids_(std::move(ids)), dim_(dim), data_(std::move(data)), normalized_(normalized) {
  if (dim_ == 0) throw DomainError("embedding dim must be positive");
  if (data_.size() != ids_.size() * dim_) {
    throw DomainError("embedding data has " + std::to_string(data_.size()) + " values, expected " +
                      std::to_string(ids_.size()) + " x " + std::to_string(dim_));
  }
  index_.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (!index_.emplace(ids_[r], r).second) throw DomainError("duplicate embedding id '" + ids_[r] + "'");
  }
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    double sq = 0.0;
    for (float v : row(r)) {
      if (!std::isfinite(v)) throw DomainError("non-finite value in embedding row '" + ids_[r] + "'");
      sq += static_cast<double>(v) * v;
    }
    if (normalized_ && std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) {
      throw DomainError("row '" + ids_[r] + "' is flagged normalized but has norm " +
                        std::to_string(std::sqrt(sq)));
    }
  }
  std::vector<std::uint32_t> order(ids_.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return ids_[a] < ids_[b]; });
  id_rank_.resize(ids_.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) id_rank_[order[pos]] = static_cast<std::uint32_t>(pos);
}

std::optional<std::size_t> EmbeddingStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingStore EmbeddingStore::select(std::span<const std::string> ids) const {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    auto r = find(id);
    if (!r) throw Error("embedding store has no row for id '" + id + "'");
    rows.push_back(*r);
  }
  return select_rows(rows);
}

EmbeddingStore EmbeddingStore::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::string> ids;
  std::vector<float> data;
  ids.reserve(rows.size());
  data.reserve(rows.size() * dim_);
  for (std::size_t r : rows) {
    ids.push_back(ids_.at(r));
    auto v = row(r);
    data.insert(data.end(), v.begin(), v.end());
  }
  return EmbeddingStore(std::move(ids), dim_ == 0 ? 1 : dim_, std::move(data), normalized_);
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
  return ids_ == other.ids_ && dim_ == other.dim_ && normalized_ == other.normalized_ &&
         data_.size() == other.data_.size() &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

// ---------------------------------------------------------------------------
// RSEB v1

namespace {

constexpr char kMagic[4] = {'R', 'S', 'E', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8 + 1;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
}

class Cursor {
 public:
  Cursor(std::string_view bytes, std::string_view source) : bytes_(bytes), source_(source) {}

  void need(std::size_t n, std::string_view what) const {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(std::string(source_) + ": truncated RSEB file reading " + std::string(what) +
                        " at offset " + std::to_string(pos_) + ": expected at least " +
                        std::to_string(pos_ + n) + " bytes, got " + std::to_string(bytes_.size()));
    }
  }

  template <typename T>
  T get(std::string_view what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::string_view take(std::size_t n, std::string_view what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }
  const std::string& source_name() const { return source_; }

 private:
  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_store(const EmbeddingStore& store) {
  std::string out;
  out.reserve(kHeaderBytes + store.size() * (2 + 16 + store.dim() * 4));
  out.append(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  put_le<std::uint64_t>(out, store.size());
  out.push_back(store.normalized() ? 1 : 0);
  for (const auto& id : store.ids()) {
    if (id.size() > 0xffff) throw FormatError("id longer than 65535 bytes: '" + id.substr(0, 32) + "...'");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out.append(id);
  }
  for (float v : store.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

EmbeddingStore decode_store(std::string_view bytes, std::string_view source) {
  Cursor cur(bytes, source);
  auto magic = cur.take(4, "magic");
  if (magic != std::string_view(kMagic, 4)) {
    throw FormatError(std::string(source) + ": bad magic at offset 0 (not an RSEB file)");
  }
  auto version = cur.get<std::uint32_t>("version");
  if (version != kVersion) {
    throw FormatError(std::string(source) + ": unsupported RSEB version " + std::to_string(version) +
                      " at offset 4");
  }
  auto dim = cur.get<std::uint32_t>("dim");
  if (dim == 0) throw FormatError(std::string(source) + ": dim is 0 at offset 8");
  auto count = cur.get<std::uint64_t>("count");
  auto flag = cur.get<std::uint8_t>("normalized flag");
  if (flag > 1) {
    throw FormatError(std::string(source) + ": normalized flag must be 0 or 1 at offset 20, got " +
                      std::to_string(flag));
  }
  // Each row needs at least 2 id-length bytes plus its floats, so only
  // reserve for counts the file could hold.
  const std::uint64_t row_min = 2 + 4ULL * dim;
  const bool plausible = count <= (bytes.size() - std::min<std::size_t>(bytes.size(), kHeaderBytes)) / row_min;
  std::vector<std::string> ids;
  if (plausible) ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto len = cur.get<std::uint16_t>("id length");
    ids.emplace_back(cur.take(len, "id bytes"));
  }
  // Every id consumed at least 2 bytes, so count <= size / 2 here.
  if (count > cur.size() / (4ULL * dim)) {
    throw FormatError(std::string(source) + ": count " + std::to_string(count) + " at offset 12 needs " +
                      std::to_string(count) + " x " + std::to_string(4ULL * dim) + " vector bytes after offset " +
                      std::to_string(cur.pos()) + ", file has " + std::to_string(cur.size()));
  }
  const std::size_t float_bytes = count * dim * 4;
  if (cur.pos() + float_bytes != cur.size()) {
    throw FormatError(std::string(source) + ": vector block at offset " + std::to_string(cur.pos()) +
                      " expects file size " + std::to_string(cur.pos() + float_bytes) + " bytes, got " +
                      std::to_string(cur.size()));
  }
  std::vector<float> data(count * dim);
  for (auto& v : data) v = std::bit_cast<float>(cur.get<std::uint32_t>("vector data"));
  try {
    return EmbeddingStore(std::move(ids), dim, std::move(data), flag == 1);
  } catch (const DomainError& e) {
    throw FormatError(std::string(source) + ": " + e.what());
  }
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  write_file(path, encode_store(store));
}

EmbeddingStore read_store(const std::filesystem::path& path) {
  return decode_store(read_file(path), path.string());
}

// ---------------------------------------------------------------------------

EmbeddingStore normalize(const EmbeddingStore& store) {
  std::vector<float> data(store.data().begin(), store.data().end());
  const std::size_t dim = store.dim();
  for (std::size_t r = 0; r < store.size(); ++r) {
    auto v = std::span<float>(data.data() + r * dim, dim);
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    if (sq == 0.0) throw DomainError("cannot normalize zero-norm row '" + store.id(r) + "'");
    double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(x * inv);
  }
  return EmbeddingStore(store.ids(), dim == 0 ? 1 : dim, std::move(data), true);
}

EmbeddingStore ensure_normalized(EmbeddingStore store) {
  if (store.normalized()) return store;
  return normalize(store);
}

double dot(std::span<const float> u, std::span<const float> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += static_cast<double>(u[i]) * v[i];
  return s;
}

double cosine_sim(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw DomainError("cosine_sim: dim mismatch " + std::to_string(u.size()) + " vs " +
                      std::to_string(v.size()));
  }
  double nu = dot(u, u);
  double nv = dot(v, v);
  if (nu == 0.0 || nv == 0.0) throw DomainError("cosine_sim: zero-norm vector");
  double s = dot(u, v) / std::sqrt(nu * nv);
  return std::clamp(s, -1.0, 1.0);
}

std::vector<ScoredId> top_k_bruteforce(std::span<const float> query, const EmbeddingStore& store,
                                       std::size_t k) {
  if (k == 0) return {};
  if (!store.normalized()) throw DomainError("top_k_bruteforce requires a normalized store");
  std::vector<ScoredId> out;
  for (const auto& c : kernels::parallel::top_k(query, store, k)) {
    out.push_back({store.id(c.row), c.score});
  }
  return out;
}

}  // namespace rsforge
