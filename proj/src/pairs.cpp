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

#include "rsforge/pairs.hpp"

#include <algorithm>

namespace rsforge {

Json to_json(const PairRecord& rec) {
  Json realistic = Json::array();
  for (const auto& r : rec.realistic) realistic.push_back({{"sentence_id", r.sentence_id}, {"score", r.score}});
  Json synthetic = Json::array();
  for (const auto& s : rec.synthetic) synthetic.push_back({{"text", s.text}, {"score", s.score}});
  Json j = {{"image_id", rec.image_id},
            {"cluster", rec.cluster},
            {"realistic", std::move(realistic)},
            {"synthetic", std::move(synthetic)}};
  j["gate_score"] = rec.gate_score ? Json(*rec.gate_score) : Json(nullptr);
  return j;
}

PairRecord pair_from_json(const Json& j) {
  PairRecord rec;
  rec.image_id = j.at("image_id").get<std::string>();
  rec.cluster = j.at("cluster").get<std::int64_t>();
  for (const auto& r : j.at("realistic")) {
    rec.realistic.push_back({r.at("sentence_id").get<std::string>(), r.at("score").get<double>()});
  }
  for (const auto& s : j.at("synthetic")) {
    rec.synthetic.push_back({s.at("text").get<std::string>(), s.at("score").get<double>()});
  }
  if (auto it = j.find("gate_score"); it != j.end() && !it->is_null()) rec.gate_score = it->get<double>();
  if (rec.gate_score.has_value() != !rec.synthetic.empty()) {
    throw FormatError("pair '" + rec.image_id + "': gate_score must be present iff synthetic is non-empty");
  }
  return rec;
}

std::vector<PairRecord> read_pairs(const std::filesystem::path& path) {
  std::vector<PairRecord> out;
  for (const Json& j : read_jsonl(path)) out.push_back(pair_from_json(j));
  return out;
}

void write_pairs(const std::filesystem::path& path, std::span<const PairRecord> records) {
  JsonlWriter w(path);
  for (const auto& r : records) w.write(to_json(r));
  w.close();
}

namespace {

struct JoinSlot {
  std::optional<PairRecord> record;
  std::optional<RecordError> error;
  bool no_hit = false;
  std::size_t synthetic_failed = 0;
  std::size_t synthetic_missing = 0;
};

JoinSlot join_one(const std::string& image_id, const JoinInputs& in) {
  JoinSlot slot;
  auto row = in.image_store->find(image_id);
  if (!row) {
    slot.error = RecordError{image_id, "missing_embedding"};
    return slot;
  }
  auto hits = in.hits->find(image_id);
  if (hits == in.hits->end() || hits->second.empty()) {
    slot.no_hit = true;
    return slot;
  }
  PairRecord rec;
  rec.image_id = image_id;
  for (const auto& h : hits->second) rec.realistic.push_back({h.sentence_id, h.score});
  std::stable_sort(rec.realistic.begin(), rec.realistic.end(),
                   [](const auto& x, const auto& y) { return x.score > y.score; });

  auto image_vec = in.image_store->row(*row);
  if (in.synthetic) {
    if (auto gen = in.synthetic->find(image_id); gen != in.synthetic->end()) {
      for (const auto& g : gen->second) {
        if (g.status != GenerationStatus::ok) {
          ++slot.synthetic_failed;
          continue;
        }
        auto srow = in.synthetic_store ? in.synthetic_store->find(request_id_for(image_id, g.slot))
                                       : std::nullopt;
        if (!srow) {
          ++slot.synthetic_missing;
          continue;
        }
        rec.synthetic.push_back({g.text, cosine_sim(image_vec, in.synthetic_store->row(*srow))});
      }
    }
  }
  if (!rec.synthetic.empty()) rec.gate_score = rec.synthetic.front().score;
  slot.record = std::move(rec);
  return slot;
}

}  // namespace

JoinOutput join_pairs(const JoinInputs& inputs) {
  if (!inputs.hits || !inputs.image_store) throw Error("join_pairs: hits and image store are required");
  if (inputs.synthetic_store && !inputs.image_store->empty() && !inputs.synthetic_store->empty() &&
      inputs.synthetic_store->dim() != inputs.image_store->dim()) {
    throw DomainError("join_pairs: synthetic embeddings dim differs from image embeddings dim");
  }
  const std::size_t n = inputs.image_ids.size();
  std::vector<JoinSlot> slots(n);
#pragma omp parallel for schedule(dynamic, 32)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    slots[static_cast<std::size_t>(i)] = join_one(inputs.image_ids[static_cast<std::size_t>(i)], inputs);
  }
  JoinOutput out;
  out.stats.input = n;
  for (auto& s : slots) {
    out.stats.synthetic_failed += s.synthetic_failed;
    out.stats.synthetic_missing_embedding += s.synthetic_missing;
    if (s.record) {
      out.records.push_back(std::move(*s.record));
    } else if (s.no_hit) {
      ++out.stats.no_hit;
    } else if (s.error) {
      ++out.stats.missing_embedding;
      out.errors.push_back(std::move(*s.error));
    }
  }
  out.stats.emitted = out.records.size();
  return out;
}

std::string_view to_string(GateMode mode) { return mode == GateMode::first ? "first" : "per_text"; }

GateMode gate_mode_from_string(std::string_view s) {
  if (s == "first") return GateMode::first;
  if (s == "per_text") return GateMode::per_text;
  throw Error("unknown gate mode '" + std::string(s) + "' (expected first or per_text)");
}

BandOutput apply_band(std::span<const PairRecord> records, const Band& band, GateMode mode) {
  BandOutput out;
  out.verdicts.reserve(records.size());
  for (const auto& rec : records) {
    if (!rec.gate_score) throw DomainError("apply_band: pair '" + rec.image_id + "' has no gate_score");
    if (mode == GateMode::first) {
      if (band_gate(*rec.gate_score, band)) {
        out.verdicts.push_back(FilterVerdict::keep(rec.image_id, *rec.gate_score));
        out.kept.push_back(rec);
      } else {
        out.verdicts.push_back(FilterVerdict::reject(rec.image_id, RejectReason::band, *rec.gate_score));
      }
      continue;
    }
    PairRecord kept = rec;
    kept.synthetic.clear();
    for (const auto& s : rec.synthetic) {
      if (band_gate(s.score, band)) kept.synthetic.push_back(s);
    }
    if (kept.synthetic.empty()) {
      out.verdicts.push_back(FilterVerdict::reject(rec.image_id, RejectReason::band, *rec.gate_score));
      continue;
    }
    kept.gate_score = kept.synthetic.front().score;
    out.verdicts.push_back(FilterVerdict::keep(rec.image_id, *kept.gate_score));
    out.kept.push_back(std::move(kept));
  }
  return out;
}

}  // namespace rsforge
