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

// Pipeline configuration: a nested JSON object, one section per stage
// family. Unknown keys and out-of-domain values are rejected on load.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "rsforge/jsonl.hpp"

namespace rsforge {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct InputPaths {
  std::filesystem::path documents;
  std::filesystem::path image_embeddings;
  std::filesystem::path text_embeddings;
  std::filesystem::path synthetic_embeddings;
  std::filesystem::path captions;
  std::filesystem::path tags;
  std::filesystem::path base_tags;
  std::filesystem::path logprobs;       // optional: JSONL {"id", "logprobs":[...]}
  std::filesystem::path abbreviations;  // optional
  std::filesystem::path action_verbs;   // optional
};

struct FilterConfig {
  std::uint32_t min_short_side = 100;
  double max_aspect = 3.0;
  std::size_t min_words = 3;
  std::size_t max_words = 81;
  double entropy_min = 0.3;
  double ppl_min = 30.0;
  double ppl_max = 200.0;
  double band_lo = 0.51;
  double band_hi = 0.61;
  std::string complexity = "action_lexicon";  // or "none"
  std::size_t complexity_min_tokens = 5;
};

struct DedupConfig {
  std::string mode = "exact";  // or "cluster_pruned"
  double image_tau = 0.96;
  double sentence_tau = 0.95;
  std::size_t prune_k = 0;  // clusters for cluster_pruned; 0 = ceil(sqrt(n))
};

struct ClusterConfig {
  std::size_t text_k = 16;
  std::size_t image_k = 8;
  std::size_t max_iters = 100;
  double tol = 1e-4;
  bool spherical = true;
};

struct RetrievalConfig {
  std::size_t k = 3;
  std::size_t probes = 1;
};

struct AugmentConfig {
  std::string generator = "echo";
  std::size_t slots = 1;  // synthetic texts per image, one per hit slot
  std::size_t lexicon_target = 8000;
  std::size_t batch = 16;
  std::size_t window = 4;
  std::size_t max_retries = 3;
  std::size_t backoff_ms = 50;
};

struct PairsConfig {
  std::string gate_mode = "first";  // or "per_text"
};

struct SamplerConfig {
  std::size_t cap = 20;
  std::string preset;  // when set, cap comes from the preset
};

struct LmConfig {
  std::size_t order = 2;
  double k = 1.0;
};

struct PipelineConfig {
  InputPaths inputs;
  FilterConfig filters;
  DedupConfig dedup;
  ClusterConfig cluster;
  RetrievalConfig retrieval;
  AugmentConfig augment;
  PairsConfig pairs;
  SamplerConfig sampler;
  LmConfig lm;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = RSFORGE_WORKERS or the OpenMP default
  std::filesystem::path run_dir = "run";

  /// Relative paths are resolved against `base_dir`.
  static PipelineConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);

  /// Throws ConfigError for any value outside its domain.
  void validate() const;

  Json to_json() const;
  /// Every setting that can change outputs: all sections plus the seed.
  /// Paths, run_dir and workers are excluded.
  Json settings_json() const;
  Json section_json(const std::string& name) const;
  std::string settings_hash() const;
};

}  // namespace rsforge
