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

#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "rsforge/pairs.hpp"
#include "support.hpp"

using namespace rsforge;

namespace {

struct Fixture {
  EmbeddingStore images = testing::random_store(6, 8, 1, "img");
  EmbeddingStore synthetic;
  std::vector<std::string> image_ids;
  std::map<std::string, std::vector<RetrievalHit>> hits;
  std::map<std::string, std::vector<GenerationResult>> gen;

  Fixture() {
    image_ids = images.ids();
    image_ids.push_back("unknown-image");
    std::vector<std::string> syn_ids;
    std::vector<float> syn_data;
    auto extra = testing::random_store(12, 8, 2, "x");
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto& id = images.id(i);
      if (i == 1) {
        hits[id] = {};
      } else {
        hits[id] = {{"s" + std::to_string(i) + "b", 0.4, 0, 2}, {"s" + std::to_string(i) + "a", 0.9, 0, 1},
                    {"s" + std::to_string(i) + "c", 0.1, 0, 3}};
      }
      for (std::uint32_t slot = 0; slot < 2; ++slot) {
        gen[id].push_back({id, slot, "text " + id + " " + std::to_string(slot),
                           i == 3 && slot == 0 ? GenerationStatus::failed : GenerationStatus::ok, "", 1});
        if (i == 4 && slot == 1) continue;  // no embedding for this text
        syn_ids.push_back(request_id_for(id, slot));
        auto row = extra.row(2 * i + slot);
        syn_data.insert(syn_data.end(), row.begin(), row.end());
      }
    }
    hits["unknown-image"] = {{"s", 0.5, 0, 1}};
    synthetic = EmbeddingStore(syn_ids, 8, syn_data, true);
  }

  JoinInputs inputs() const { return {image_ids, &hits, &gen, &images, &synthetic}; }
};

PairRecord scored(std::string id, double score) {
  PairRecord r;
  r.image_id = std::move(id);
  r.realistic = {{"s", 0.3}};
  r.synthetic = {{"t", score}};
  r.gate_score = score;
  return r;
}

}  // namespace

TEST_SUITE("pairs") {

TEST_CASE("join arity and accounting") {
  Fixture f;
  auto out = join_pairs(f.inputs());
  CHECK(out.stats.input == 7);
  CHECK(out.stats.no_hit == 1);
  CHECK(out.stats.missing_embedding == 1);
  CHECK(out.stats.emitted == 5);
  CHECK(out.stats.input == out.stats.emitted + out.stats.no_hit + out.stats.missing_embedding);
  CHECK(out.stats.synthetic_failed == 1);
  CHECK(out.stats.synthetic_missing_embedding == 1);
  REQUIRE(out.errors.size() == 1);
  CHECK(out.errors[0].id == "unknown-image");
  CHECK(out.errors[0].reason == "missing_embedding");
  for (const auto& r : out.records) {
    CHECK(r.realistic.size() == 3);
    for (std::size_t i = 1; i < r.realistic.size(); ++i) CHECK(r.realistic[i].score <= r.realistic[i - 1].score);
    CHECK(r.gate_score.has_value() == !r.synthetic.empty());
    CHECK(r.cluster == -1);
  }
  CHECK(out.records[2].synthetic.size() == 1);  // image 3: slot 0 failed
  CHECK(out.records[3].synthetic.size() == 1);  // image 4: slot 1 has no vector
}

TEST_CASE("gate score equals recomputed cosine") {
  Fixture f;
  auto out = join_pairs(f.inputs());
  for (const auto& r : out.records) {
    auto img = f.images.row(*f.images.find(r.image_id));
    const std::string first_slot = r.image_id == f.images.id(3) ? "1" : "0";
    auto syn = f.synthetic.row(*f.synthetic.find(r.image_id + "#" + first_slot));
    double manual = testing::plain_dot(img, syn) /
                    std::sqrt(testing::plain_dot(img, img) * testing::plain_dot(syn, syn));
    CHECK(std::abs(*r.gate_score - manual) <= 1e-6);
    CHECK(*r.gate_score == r.synthetic.front().score);
  }
}

TEST_CASE("join is deterministic") {
  Fixture f;
  auto dir = testing::temp_dir("pairs-det");
  write_pairs(dir / "a.jsonl", join_pairs(f.inputs()).records);
  {
    ScopedWorkers sw(4);
    write_pairs(dir / "b.jsonl", join_pairs(f.inputs()).records);
  }
  CHECK(read_file(dir / "a.jsonl") == read_file(dir / "b.jsonl"));
  auto back = read_pairs(dir / "a.jsonl");
  CHECK(back == join_pairs(f.inputs()).records);
}

TEST_CASE("band examples") {
  std::vector<PairRecord> recs{scored("a", 0.55), scored("b", 0.49), scored("c", 0.51), scored("d", 0.61),
                               scored("e", 0.70)};
  auto out = apply_band(recs);
  REQUIRE(out.verdicts.size() == recs.size());
  CHECK(out.verdicts[0].kept);
  CHECK(out.verdicts[1].reason == RejectReason::band);
  CHECK(out.verdicts[2].kept);
  CHECK(out.verdicts[3].kept);
  CHECK(!out.verdicts[4].kept);
  CHECK(out.kept.size() == 3);
  PairRecord bare;
  bare.image_id = "z";
  std::vector<PairRecord> none{bare};
  CHECK_THROWS_AS(apply_band(none), DomainError);
}

TEST_CASE("per-text gating") {
  PairRecord r = scored("a", 0.7);
  r.synthetic.push_back({"u", 0.53});
  r.synthetic.push_back({"v", 0.2});
  std::vector<PairRecord> recs{r, scored("b", 0.4)};
  auto first = apply_band(recs, {}, GateMode::first);
  CHECK(first.kept.empty());
  auto each = apply_band(recs, {}, GateMode::per_text);
  REQUIRE(each.kept.size() == 1);
  CHECK(each.kept[0].synthetic.size() == 1);
  CHECK(each.kept[0].synthetic[0].text == "u");
  CHECK(*each.kept[0].gate_score == 0.53);
  CHECK(!each.verdicts[1].kept);
  CHECK(gate_mode_from_string("per_text") == GateMode::per_text);
}

TEST_CASE("pair json shape") {
  PairRecord r = scored("img", 0.52);
  r.cluster = 4;
  auto j = to_json(r);
  CHECK(j.at("image_id") == "img");
  CHECK(j.at("cluster") == 4);
  CHECK(j.at("realistic")[0].at("sentence_id") == "s");
  CHECK(j.at("synthetic")[0].at("text") == "t");
  CHECK(j.at("gate_score") == 0.52);
  CHECK(pair_from_json(j) == r);
}

}  // TEST_SUITE
