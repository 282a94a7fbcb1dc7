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

// Stage orchestration. Every stage reads its predecessors' files from the
// run directory, writes its own outputs there, and records a ledger in
// stages/<name>.json:
//
//   {"stage", "status", "key", "inputs":{file:digest}, "outputs":{file:digest},
//    "counts":{"input","kept","rejected","reasons":{...}}, "extra":{...},
//    "wall_ms", "error"?}
//
// A stage is skipped when its key (name, settings, input digests) and the
// digests of its outputs on disk match the ledger.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rsforge/augment.hpp"
#include "rsforge/config.hpp"
#include "rsforge/jsonl.hpp"

namespace rsforge {

/// Stage names in execution order.
const std::vector<std::string>& stage_names();

/// A stage failed; the message names the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error("stage '" + stage + "': " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct StageCounts {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> reasons;

  std::size_t rejected() const;
  bool conserved() const { return input == kept + rejected(); }
  Json to_json() const;
  static StageCounts from_json(const Json& j);
};

struct StageRecord {
  std::string stage;
  std::string status;  // "ok" or "failed"
  std::string key;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  StageCounts counts;
  Json extra = Json::object();
  double wall_ms = 0.0;
  std::string error;
  bool cached = false;  // not persisted

  Json to_json() const;
  static StageRecord from_json(const Json& j);
};

struct RunOptions {
  bool force = false;  // ignore ledgers and recompute
  /// Overrides augment.generator; lets tests inject a client.
  GenerationClient* client = nullptr;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& run_dir() const { return config_.run_dir; }

  /// Runs one stage. Its predecessors' outputs must already exist.
  StageRecord run_stage(std::string_view name, const RunOptions& options = {});

  /// Runs every stage in order, reusing cached stages. On failure the
  /// failed ledger, report and a partial manifest are written and the
  /// StageError is rethrown.
  std::vector<StageRecord> run_all(const RunOptions& options = {});

 private:
  PipelineConfig config_;
};

struct RunReport {
  std::vector<StageRecord> stages;       // ledgers found, in stage order
  std::vector<std::string> missing;      // stages without a ledger
  bool complete = false;                 // every stage present and ok
  std::string settings_hash;
  std::uint64_t seed = 0;
  Json cluster_histogram = Json::array();  // [{"cluster","before","after"}]

  Json to_json() const;
  std::string to_text() const;
};

/// Reads the ledgers of `run_dir`. Throws Error when the directory is absent.
RunReport load_report(const std::filesystem::path& run_dir);

/// Writes report.json and report.txt into `run_dir`.
RunReport write_report(const std::filesystem::path& run_dir);

/// Deterministic summary of a run: settings hash, seed, and per-stage key,
/// counts and output digests. Excludes paths, workers and timings.
Json build_manifest(const std::filesystem::path& run_dir, const PipelineConfig& config);

}  // namespace rsforge
