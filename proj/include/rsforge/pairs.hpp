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

// Image-text pair records: join of images, retrieval hits and synthetic
// texts, followed by the cosine band gate.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsforge/augment.hpp"
#include "rsforge/embed_store.hpp"
#include "rsforge/filters.hpp"
#include "rsforge/retrieval.hpp"

namespace rsforge {

struct RealisticText {
  std::string sentence_id;
  double score = 0.0;
  bool operator==(const RealisticText&) const = default;
};

struct SyntheticText {
  std::string text;
  double score = 0.0;
  bool operator==(const SyntheticText&) const = default;
};

struct PairRecord {
  std::string image_id;
  std::int64_t cluster = -1;  // image cluster; -1 until image clustering
  std::vector<RealisticText> realistic;
  std::vector<SyntheticText> synthetic;
  std::optional<double> gate_score;  // present iff synthetic is non-empty
  bool operator==(const PairRecord&) const = default;
};

Json to_json(const PairRecord& rec);
PairRecord pair_from_json(const Json& j);
std::vector<PairRecord> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, std::span<const PairRecord> records);

struct JoinInputs {
  std::span<const std::string> image_ids;
  const std::map<std::string, std::vector<RetrievalHit>>* hits = nullptr;
  /// Generation results per image, ordered by slot.
  const std::map<std::string, std::vector<GenerationResult>>* synthetic = nullptr;
  const EmbeddingStore* image_store = nullptr;
  /// Embeddings of the synthetic texts, keyed by request_id_for(image, slot).
  const EmbeddingStore* synthetic_store = nullptr;
};

struct RecordError {
  std::string id;
  std::string reason;
};

struct JoinStats {
  std::size_t input = 0;
  std::size_t emitted = 0;
  std::size_t no_hit = 0;
  std::size_t missing_embedding = 0;
  std::size_t synthetic_failed = 0;             // generation results not ok
  std::size_t synthetic_missing_embedding = 0;  // ok texts without a vector
};

struct JoinOutput {
  std::vector<PairRecord> records;
  std::vector<RecordError> errors;
  JoinStats stats;
};

/// One record per image that has an image embedding and at least one hit.
/// Synthetic texts keep slot order; each is scored by cosine against the
/// image, and gate_score is the first one's score.
JoinOutput join_pairs(const JoinInputs& inputs);

enum class GateMode {
  first,     // gate on the first synthetic text only
  per_text,  // drop out-of-band synthetic texts; reject when none remain
};

std::string_view to_string(GateMode mode);
GateMode gate_mode_from_string(std::string_view s);

struct BandOutput {
  std::vector<PairRecord> kept;
  std::vector<FilterVerdict> verdicts;  // one per input record
};

/// Throws DomainError for a record without gate_score.
BandOutput apply_band(std::span<const PairRecord> records, const Band& band = {},
                      GateMode mode = GateMode::first);

}  // namespace rsforge
