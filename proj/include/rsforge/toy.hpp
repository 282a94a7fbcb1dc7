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

// Deterministic toy corpus: interleaved documents over a handful of
// topics, with embeddings that carry the topic structure, plus the
// caption, tag and synthetic-text inputs the later stages consume.
//
// Files written into the target directory:
//   documents.jsonl          documents (plus two malformed lines)
//   image_embeddings.rseb    one row per image
//   text_embeddings.rseb     one row per extracted sentence
//   synthetic_embeddings.rseb  rows "<image_id>#<slot>", cosine to the
//                            image spread over [0.45, 0.67]
//   captions.jsonl, tags.jsonl, base_tags.txt, config.json

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

namespace rsforge {

struct ToyOptions {
  std::size_t documents = 200;
  std::size_t dim = 32;
  std::size_t synthetic_slots = 3;
  std::uint64_t seed = 7;
};

struct ToySummary {
  std::size_t documents = 0;
  std::size_t malformed_lines = 0;
  std::size_t images = 0;
  std::size_t sentences = 0;
};

ToySummary write_toy_corpus(const std::filesystem::path& dir, const ToyOptions& options = {});

}  // namespace rsforge
