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

// End-to-end runs over the toy corpus, plus config parsing and the CLI.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "rsforge/config.hpp"
#include "rsforge/pairs.hpp"
#include "rsforge/pipeline.hpp"
#include "rsforge/toy.hpp"
#include "support.hpp"

using namespace rsforge;
namespace fs = std::filesystem;

namespace {

fs::path toy_source() { return testing::source_dir() / "data" / "toy"; }

// Copy of the committed toy inputs, without any run directory.
fs::path toy_copy(const std::string& name) {
  auto dir = testing::temp_dir(name);
  for (const auto& e : fs::directory_iterator(toy_source())) {
    if (e.is_regular_file()) fs::copy_file(e.path(), dir / e.path().filename());
  }
  return dir;
}

PipelineConfig toy_config(const fs::path& dir, const std::string& run = "run") {
  auto cfg = PipelineConfig::load(dir / "config.json");
  cfg.run_dir = dir / run;
  return cfg;
}

std::map<std::string, StageRecord> by_stage(const std::vector<StageRecord>& recs) {
  std::map<std::string, StageRecord> m;
  for (const auto& r : recs) m[r.stage] = r;
  return m;
}

class FailingClient final : public GenerationClient {
 public:
  std::vector<ItemOutcome> generate(std::span<const WireRequest> batch) override {
    return std::vector<ItemOutcome>(batch.size(), ItemOutcome::fail("offline"));
  }
};

std::string error_of(Pipeline& p, const std::string& stage) {
  try {
    p.run_stage(stage);
  } catch (const StageError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults") {
  PipelineConfig c;
  CHECK(c.filters.min_short_side == 100);
  CHECK(c.filters.max_aspect == 3.0);
  CHECK(c.filters.min_words == 3);
  CHECK(c.filters.max_words == 81);
  CHECK(c.filters.entropy_min == 0.3);
  CHECK(c.filters.ppl_min == 30.0);
  CHECK(c.filters.ppl_max == 200.0);
  CHECK(c.filters.band_lo == 0.51);
  CHECK(c.filters.band_hi == 0.61);
  CHECK(c.retrieval.k == 3);
  CHECK(c.retrieval.probes == 1);
  CHECK(c.augment.lexicon_target == 8000);
  CHECK(c.sampler.cap == 20);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("unknown keys and wrong types") {
  CHECK_THROWS_AS(PipelineConfig::from_json(Json::parse(R"({"filters":{"min_wrods":3}})")), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(Json::parse(R"({"colour":1})")), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(Json::parse(R"({"seed":"seven"})")), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(Json::parse(R"({"retrieval":{"k":-1}})")), ConfigError);
  try {
    PipelineConfig::from_json(Json::parse(R"({"dedup":{"tua":0.9}})"));
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("dedup.tua") != std::string::npos);
  }
}

TEST_CASE("domains") {
  auto bad = [](const char* text) { return PipelineConfig::from_json(Json::parse(text)); };
  CHECK_THROWS_AS(bad(R"({"filters":{"band_lo":0.7,"band_hi":0.6}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"filters":{"ppl_min":300}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"filters":{"max_aspect":0.5}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"dedup":{"mode":"fuzzy"}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"augment":{"slots":4}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"sampler":{"cap":0}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"sampler":{"preset":"1b"}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"sampler":{"preset":"15m","cap":21}})"), ConfigError);
  CHECK(bad(R"({"sampler":{"preset":"30m"}})").sampler.cap == 35);
  CHECK(bad(R"({"sampler":{"preset":"100m","cap":180}})").sampler.cap == 180);
}

TEST_CASE("paths resolve against the config file") {
  auto dir = toy_copy("config-paths");
  auto cfg = PipelineConfig::load(dir / "config.json");
  CHECK(cfg.inputs.documents == dir / "documents.jsonl");
  CHECK(cfg.run_dir == dir / "run");
  CHECK(cfg.sampler.cap == 20);
  CHECK(cfg.seed == 7);
}

TEST_CASE("settings hash ignores paths and workers") {
  auto a = PipelineConfig::from_json(Json::parse(R"({"seed":3,"inputs":{"documents":"a.jsonl"},"workers":2})"));
  auto b = PipelineConfig::from_json(Json::parse(R"({"seed":3,"inputs":{"documents":"b.jsonl"},"run_dir":"x"})"));
  auto c = PipelineConfig::from_json(Json::parse(R"({"seed":4})"));
  CHECK(a.settings_hash() == b.settings_hash());
  CHECK(a.settings_hash() != c.settings_hash());
  auto round = PipelineConfig::from_json(a.to_json());
  CHECK(round.settings_hash() == a.settings_hash());
}

}  // TEST_SUITE

TEST_SUITE("pipeline") {

TEST_CASE("toy corpus regenerates byte for byte") {
  auto dir = testing::temp_dir("toy-regen");
  auto summary = write_toy_corpus(dir);
  CHECK(summary.documents == 200);
  CHECK(summary.malformed_lines == 2);
  for (const auto& e : fs::directory_iterator(toy_source())) {
    if (!e.is_regular_file()) continue;
    INFO(e.path().filename().string());
    CHECK(read_file(dir / e.path().filename()) == read_file(e.path()));
  }
}

TEST_CASE("end to end on the toy corpus") {
  auto dir = toy_copy("e2e");
  Pipeline p(toy_config(dir));
  auto recs = p.run_all();
  REQUIRE(recs.size() == stage_names().size());
  for (const auto& r : recs) {
    INFO(r.stage);
    CHECK(r.status == "ok");
    CHECK(r.counts.conserved());
    CHECK(!r.cached);
  }
  auto s = by_stage(recs);
  CHECK(s["extract"].counts.reasons.at("malformed") == 2);
  CHECK(s["dedup-images"].counts.input == s["filter-images"].counts.kept);
  CHECK(s["entropy"].counts.input == s["filter-sentences"].counts.kept);
  CHECK(s["perplexity"].counts.input == s["entropy"].counts.kept);
  CHECK(s["dedup-sentences"].counts.input == s["perplexity"].counts.kept);
  CHECK(s["gate"].counts.input == s["join"].counts.kept);
  CHECK(s["sample"].counts.input == s["gate"].counts.kept);
  CHECK(s["filter-images"].counts.reasons.at("size") > 0);
  CHECK(s["filter-images"].counts.reasons.at("aspect_ratio") > 0);
  CHECK(s["dedup-images"].counts.reasons.at("duplicate") > 0);
  CHECK(s["filter-sentences"].counts.reasons.at("url") > 0);
  CHECK(s["gate"].counts.reasons.at("band") > 0);

  auto pairs = read_pairs(p.run_dir() / "pairs.jsonl");
  CHECK(pairs.size() == s["sample"].counts.kept);
  CHECK(!pairs.empty());
  std::map<std::int64_t, std::size_t> per_cluster;
  for (const auto& r : pairs) {
    CHECK(r.cluster >= 0);
    REQUIRE(r.gate_score.has_value());
    CHECK(*r.gate_score >= 0.51);
    CHECK(*r.gate_score <= 0.61);
    CHECK(!r.realistic.empty());
    ++per_cluster[r.cluster];
  }
  for (const auto& [c, n] : per_cluster) CHECK(n <= 20);

  auto again = p.run_all();
  for (const auto& r : again) CHECK(r.cached);
  auto forced = p.run_all(RunOptions{true, nullptr});
  for (const auto& r : forced) CHECK(!r.cached);
}

TEST_CASE("manifest is identical across worker counts") {
  auto dir = toy_copy("e2e-workers");
  std::string first;
  for (int w : {1, 4, 8}) {
    auto cfg = toy_config(dir, "run" + std::to_string(w));
    cfg.workers = w;
    Pipeline(cfg).run_all();
    auto bytes = read_file(cfg.run_dir / "manifest.json");
    if (first.empty()) first = bytes;
    CHECK(bytes == first);
    CHECK(read_file(cfg.run_dir / "pairs.jsonl") == read_file(dir / "run1" / "pairs.jsonl"));
  }
}

TEST_CASE("stage by stage equals a full run") {
  auto dir = toy_copy("e2e-resume");
  auto full = toy_config(dir, "full");
  Pipeline(full).run_all();
  auto step = toy_config(dir, "step");
  {
    Pipeline p(step);
    for (const auto& name : stage_names()) p.run_stage(name);
  }
  CHECK(build_manifest(step.run_dir, step) == build_manifest(full.run_dir, full));
  CHECK(read_file(step.run_dir / "pairs.jsonl") == read_file(full.run_dir / "pairs.jsonl"));

  // Touching one output invalidates that stage only.
  Pipeline p(step);
  write_file(step.run_dir / "hits.jsonl", "");
  auto recs = by_stage(p.run_all());
  CHECK(recs["cluster-texts"].cached);
  CHECK(!recs["retrieve"].cached);
  CHECK(recs["augment"].cached);
  CHECK(read_file(step.run_dir / "pairs.jsonl") == read_file(full.run_dir / "pairs.jsonl"));
}

TEST_CASE("settings changes rerun the affected stages") {
  auto dir = toy_copy("e2e-settings");
  auto cfg = toy_config(dir);
  Pipeline(cfg).run_all();
  cfg.sampler.cap = 5;
  cfg.sampler.preset.clear();
  auto recs = by_stage(Pipeline(cfg).run_all());
  CHECK(recs["gate"].cached);
  CHECK(!recs["sample"].cached);
  for (const auto& r : read_pairs(cfg.run_dir / "pairs.jsonl")) CHECK(r.cluster >= 0);
}

TEST_CASE("missing inputs name the stage and the path") {
  auto dir = toy_copy("e2e-missing");
  fs::remove(dir / "image_embeddings.rseb");
  Pipeline p(toy_config(dir));
  p.run_stage("extract");
  p.run_stage("filter-images");
  std::string msg = error_of(p, "dedup-images");
  CHECK(msg.find("stage 'dedup-images'") != std::string::npos);
  CHECK(msg.find("embedding file not found") != std::string::npos);
  CHECK(msg.find((dir / "image_embeddings.rseb").string()) != std::string::npos);

  Pipeline fresh(toy_config(dir, "other"));
  std::string pred = error_of(fresh, "gate");
  CHECK(pred.find("stage 'gate'") != std::string::npos);
  CHECK(pred.find("run stage 'join' first") != std::string::npos);
  CHECK_THROWS_AS(fresh.run_stage("no-such-stage"), Error);
}

TEST_CASE("interrupted run leaves a partial report") {
  auto dir = toy_copy("e2e-interrupted");
  Pipeline(toy_config(dir)).run_all();
  fs::remove(dir / "synthetic_embeddings.rseb");
  auto cfg = toy_config(dir);
  cfg.seed = 8;  // invalidate so stages rerun
  Pipeline p(cfg);
  try {
    p.run_all();
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "join");
  }
  auto rep = load_report(cfg.run_dir);
  CHECK(!rep.complete);
  REQUIRE(!rep.stages.empty());
  CHECK(rep.stages.back().stage == "join");
  CHECK(rep.stages.back().status == "failed");
  CHECK(std::find(rep.missing.begin(), rep.missing.end(), "sample") != rep.missing.end());
  CHECK(fs::exists(cfg.run_dir / "report.json"));
  CHECK(fs::exists(cfg.run_dir / "report.txt"));
  auto manifest = Json::parse(read_file(cfg.run_dir / "manifest.json"));
  CHECK(manifest.at("complete") == false);
}

TEST_CASE("report json and text agree") {
  auto dir = toy_copy("e2e-report");
  auto cfg = toy_config(dir);
  Pipeline(cfg).run_all();
  auto rep = write_report(cfg.run_dir);
  CHECK(rep.complete);
  CHECK(rep.missing.empty());
  CHECK(rep.seed == 7);
  CHECK(rep.settings_hash == cfg.settings_hash());
  auto j = Json::parse(read_file(cfg.run_dir / "report.json"));
  CHECK(j == rep.to_json());
  std::string text = read_file(cfg.run_dir / "report.txt");
  CHECK(text == rep.to_text());
  for (const auto& st : j.at("stages")) {
    std::string name = st.at("stage");
    CHECK(text.find(name) != std::string::npos);
    CHECK(text.find(std::to_string(st.at("counts").at("kept").get<std::size_t>())) != std::string::npos);
  }
  std::size_t after = 0;
  for (const auto& c : rep.cluster_histogram) after += c.at("after").get<std::size_t>();
  CHECK(after == read_pairs(cfg.run_dir / "pairs.jsonl").size());
}

TEST_CASE("generation failures flow into the counts") {
  auto dir = toy_copy("e2e-genfail");
  auto cfg = toy_config(dir);
  FailingClient failing;
  Pipeline p(cfg);
  RunOptions opt;
  opt.client = &failing;
  auto recs = by_stage(p.run_all(opt));
  CHECK(recs["augment"].counts.reasons.at("generation_failed") > 0);
  CHECK(recs["augment"].counts.kept == 0);
  CHECK(recs["augment"].counts.conserved());
  CHECK(recs["gate"].counts.kept == 0);
}

TEST_CASE("command line") {
  auto dir = testing::temp_dir("cli");
  auto run = [&](const std::string& args) {
    std::string cmd = std::string(RSFORGE_CLI) + " " + args + " > " + (dir / "out.txt").string() + " 2>&1";
    return std::system(cmd.c_str());
  };
  CHECK(run("make-toy --out " + (dir / "toy").string()) == 0);
  CHECK(read_file(dir / "toy" / "documents.jsonl") == read_file(toy_source() / "documents.jsonl"));
  CHECK(run("run --config " + (dir / "toy" / "config.json").string()) == 0);
  CHECK(fs::exists(dir / "toy" / "run" / "pairs.jsonl"));
  CHECK(run("sample --config " + (dir / "toy" / "config.json").string() + " --preset 30m") == 0);
  CHECK(run("report --json --config " + (dir / "toy" / "config.json").string()) == 0);
  CHECK(Json::parse(read_file(dir / "out.txt")).at("complete") == true);
  CHECK(run("sample --config " + (dir / "toy" / "config.json").string() + " --preset 30m --cap 3") != 0);

  write_file(dir / "points.csv", "x,y\n12,0.7191\n20,0.7293\n30,0.7380\n45,0.7444\n60,0.7489\n");
  CHECK(run("fit-scaling --points " + (dir / "points.csv").string()) == 0);
  auto fit = Json::parse(read_file(dir / "out.txt"));
  CHECK(fit.contains("rss"));
  CHECK(run("predict --at 100 -a -0.21 -b 4.23 -c 0.80") == 0);
  auto pred = Json::parse(read_file(dir / "out.txt"));
  CHECK(std::abs(pred.at("L").get<double>() - 0.754) <= 0.002);
  CHECK(run("predict --at 2 -a -0.21 -b 4.23 -c 0.80") != 0);
}

}  // TEST_SUITE
