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

// Cluster-capped balance sampling. Within an oversized cluster, records
// are ranked by a stable hash of (seed, image_id) and the lowest `cap`
// are kept, which is a uniform random subset that does not depend on
// input order or worker count.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsforge/jsonl.hpp"
#include "rsforge/pairs.hpp"

namespace rsforge {

struct SampleKey {
  std::string_view image_id;
  std::int64_t cluster = -1;
};

/// Caps shipped as named presets.
std::optional<std::size_t> sampler_preset_cap(std::string_view preset);

std::uint64_t sample_rank(std::uint64_t seed, std::string_view image_id);

struct ClusterSizes {
  std::size_t before = 0;
  std::size_t after = 0;
};

struct DistributionReport {
  std::size_t cap = 0;
  std::uint64_t seed = 0;
  std::map<std::int64_t, ClusterSizes> clusters;
  std::size_t input = 0;
  std::size_t output = 0;
  std::size_t missing_cluster = 0;

  /// max / median cluster size, before and after sampling.
  double head_ratio_before() const;
  double head_ratio_after() const;
  Json to_json() const;
};

struct SelectionResult {
  std::vector<bool> selected;  // parallel to the input keys
  DistributionReport report;
};

/// Keys with cluster < 0 are never selected and are counted as
/// missing_cluster. Throws DomainError when cap == 0.
SelectionResult select_balanced(std::span<const SampleKey> keys, std::size_t cap, std::uint64_t seed);

struct SampleOutput {
  std::vector<PairRecord> sampled;  // input order
  std::vector<RecordError> errors;
  DistributionReport report;
};

SampleOutput balance_sample(std::span<const PairRecord> records, std::size_t cap, std::uint64_t seed);

}  // namespace rsforge
