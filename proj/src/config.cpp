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

#include "rsforge/config.hpp"

#include <cmath>
#include <set>

#include "rsforge/sampler.hpp"

namespace rsforge {

namespace {

// Reads the keys of one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const Json& j, std::string name) : name_(std::move(name)) {
    if (!j.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
    j_ = &j;
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_->find(key);
    if (it == j_->end()) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + path(key) + "' has the wrong type");
    }
  }

  void path_value(const char* key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    get(key, s);
    if (s.empty()) return;
    std::filesystem::path p(s);
    out = p.is_relative() && !base.empty() ? base / p : p;
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, _] : j_->items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + path(key.c_str()) + "'");
    }
  }

 private:
  std::string path(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  const Json* j_;
  std::string name_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config value out of domain: " + what);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const Json& j, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  Section top(j, "");
  if (const Json* s = top.child("inputs")) {
    Section in(*s, "inputs");
    in.path_value("documents", c.inputs.documents, base_dir);
    in.path_value("image_embeddings", c.inputs.image_embeddings, base_dir);
    in.path_value("text_embeddings", c.inputs.text_embeddings, base_dir);
    in.path_value("synthetic_embeddings", c.inputs.synthetic_embeddings, base_dir);
    in.path_value("captions", c.inputs.captions, base_dir);
    in.path_value("tags", c.inputs.tags, base_dir);
    in.path_value("base_tags", c.inputs.base_tags, base_dir);
    in.path_value("logprobs", c.inputs.logprobs, base_dir);
    in.path_value("abbreviations", c.inputs.abbreviations, base_dir);
    in.path_value("action_verbs", c.inputs.action_verbs, base_dir);
    in.finish();
  }
  if (const Json* s = top.child("filters")) {
    Section f(*s, "filters");
    f.get("min_short_side", c.filters.min_short_side);
    f.get("max_aspect", c.filters.max_aspect);
    f.get("min_words", c.filters.min_words);
    f.get("max_words", c.filters.max_words);
    f.get("entropy_min", c.filters.entropy_min);
    f.get("ppl_min", c.filters.ppl_min);
    f.get("ppl_max", c.filters.ppl_max);
    f.get("band_lo", c.filters.band_lo);
    f.get("band_hi", c.filters.band_hi);
    f.get("complexity", c.filters.complexity);
    f.get("complexity_min_tokens", c.filters.complexity_min_tokens);
    f.finish();
  }
  if (const Json* s = top.child("dedup")) {
    Section d(*s, "dedup");
    d.get("mode", c.dedup.mode);
    d.get("image_tau", c.dedup.image_tau);
    d.get("sentence_tau", c.dedup.sentence_tau);
    d.get("prune_k", c.dedup.prune_k);
    d.finish();
  }
  if (const Json* s = top.child("cluster")) {
    Section k(*s, "cluster");
    k.get("text_k", c.cluster.text_k);
    k.get("image_k", c.cluster.image_k);
    k.get("max_iters", c.cluster.max_iters);
    k.get("tol", c.cluster.tol);
    k.get("spherical", c.cluster.spherical);
    k.finish();
  }
  if (const Json* s = top.child("retrieval")) {
    Section r(*s, "retrieval");
    r.get("k", c.retrieval.k);
    r.get("probes", c.retrieval.probes);
    r.finish();
  }
  if (const Json* s = top.child("augment")) {
    Section a(*s, "augment");
    a.get("generator", c.augment.generator);
    a.get("slots", c.augment.slots);
    a.get("lexicon_target", c.augment.lexicon_target);
    a.get("batch", c.augment.batch);
    a.get("window", c.augment.window);
    a.get("max_retries", c.augment.max_retries);
    a.get("backoff_ms", c.augment.backoff_ms);
    a.finish();
  }
  if (const Json* s = top.child("pairs")) {
    Section p(*s, "pairs");
    p.get("gate_mode", c.pairs.gate_mode);
    p.finish();
  }
  if (const Json* s = top.child("sampler")) {
    Section p(*s, "sampler");
    bool has_cap = s->contains("cap");
    p.get("cap", c.sampler.cap);
    p.get("preset", c.sampler.preset);
    p.finish();
    if (!c.sampler.preset.empty()) {
      auto cap = sampler_preset_cap(c.sampler.preset);
      if (!cap) throw ConfigError("unknown sampler.preset '" + c.sampler.preset + "' (expected 15m, 30m or 100m)");
      if (has_cap && c.sampler.cap != *cap) throw ConfigError("sampler.cap conflicts with sampler.preset");
      c.sampler.cap = *cap;
    }
  }
  if (const Json* s = top.child("lm")) {
    Section l(*s, "lm");
    l.get("order", c.lm.order);
    l.get("k", c.lm.k);
    l.finish();
  }
  top.get("seed", c.seed);
  top.get("workers", c.workers);
  std::string run_dir;
  top.get("run_dir", run_dir);
  if (!run_dir.empty()) {
    std::filesystem::path p(run_dir);
    c.run_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  } else if (!base_dir.empty()) {
    c.run_dir = base_dir / c.run_dir;
  }
  top.finish();
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return from_json(j, base);
}

void PipelineConfig::validate() const {
  const auto& f = filters;
  require(f.min_short_side >= 1, "filters.min_short_side >= 1");
  require(std::isfinite(f.max_aspect) && f.max_aspect >= 1.0, "filters.max_aspect >= 1");
  require(f.min_words >= 1 && f.min_words <= f.max_words, "1 <= filters.min_words <= filters.max_words");
  require(std::isfinite(f.entropy_min) && f.entropy_min >= 0.0, "filters.entropy_min >= 0");
  require(std::isfinite(f.ppl_min) && std::isfinite(f.ppl_max) && f.ppl_min >= 1.0 && f.ppl_min <= f.ppl_max,
          "1 <= filters.ppl_min <= filters.ppl_max");
  require(f.band_lo >= -1.0 && f.band_lo <= f.band_hi && f.band_hi <= 1.0,
          "-1 <= filters.band_lo <= filters.band_hi <= 1");
  require(f.complexity == "action_lexicon" || f.complexity == "none",
          "filters.complexity is action_lexicon or none");
  require(dedup.mode == "exact" || dedup.mode == "cluster_pruned", "dedup.mode is exact or cluster_pruned");
  require(dedup.image_tau >= -1.0 && dedup.image_tau <= 1.0, "-1 <= dedup.image_tau <= 1");
  require(dedup.sentence_tau >= -1.0 && dedup.sentence_tau <= 1.0, "-1 <= dedup.sentence_tau <= 1");
  require(cluster.text_k >= 1 && cluster.image_k >= 1, "cluster.text_k and cluster.image_k >= 1");
  require(cluster.max_iters >= 1, "cluster.max_iters >= 1");
  require(std::isfinite(cluster.tol) && cluster.tol >= 0.0, "cluster.tol >= 0");
  require(retrieval.k >= 1 && retrieval.probes >= 1, "retrieval.k and retrieval.probes >= 1");
  require(!augment.generator.empty(), "augment.generator is set");
  require(augment.slots >= 1 && augment.slots <= retrieval.k, "1 <= augment.slots <= retrieval.k");
  require(augment.batch >= 1 && augment.window >= 1, "augment.batch and augment.window >= 1");
  require(pairs.gate_mode == "first" || pairs.gate_mode == "per_text", "pairs.gate_mode is first or per_text");
  require(sampler.cap >= 1, "sampler.cap >= 1");
  require(lm.order >= 1 && std::isfinite(lm.k) && lm.k > 0.0, "lm.order >= 1 and lm.k > 0");
  require(workers >= 0, "workers >= 0");
}

Json PipelineConfig::section_json(const std::string& name) const {
  if (name == "filters") {
    return {{"min_short_side", filters.min_short_side}, {"max_aspect", filters.max_aspect},
            {"min_words", filters.min_words},           {"max_words", filters.max_words},
            {"entropy_min", filters.entropy_min},       {"ppl_min", filters.ppl_min},
            {"ppl_max", filters.ppl_max},               {"band_lo", filters.band_lo},
            {"band_hi", filters.band_hi},               {"complexity", filters.complexity},
            {"complexity_min_tokens", filters.complexity_min_tokens}};
  }
  if (name == "dedup") {
    return {{"mode", dedup.mode},
            {"image_tau", dedup.image_tau},
            {"sentence_tau", dedup.sentence_tau},
            {"prune_k", dedup.prune_k}};
  }
  if (name == "cluster") {
    return {{"text_k", cluster.text_k},
            {"image_k", cluster.image_k},
            {"max_iters", cluster.max_iters},
            {"tol", cluster.tol},
            {"spherical", cluster.spherical}};
  }
  if (name == "retrieval") return {{"k", retrieval.k}, {"probes", retrieval.probes}};
  if (name == "augment") {
    return {{"generator", augment.generator},   {"slots", augment.slots},
            {"lexicon_target", augment.lexicon_target}, {"batch", augment.batch},
            {"window", augment.window},         {"max_retries", augment.max_retries},
            {"backoff_ms", augment.backoff_ms}};
  }
  if (name == "pairs") return {{"gate_mode", pairs.gate_mode}};
  if (name == "sampler") {
    Json j = {{"cap", sampler.cap}};
    if (!sampler.preset.empty()) j["preset"] = sampler.preset;
    return j;
  }
  if (name == "lm") return {{"order", lm.order}, {"k", lm.k}};
  throw Error("unknown config section '" + name + "'");
}

Json PipelineConfig::settings_json() const {
  Json j = Json::object();
  for (const char* s : {"filters", "dedup", "cluster", "retrieval", "augment", "pairs", "sampler", "lm"}) {
    j[s] = section_json(s);
  }
  j["seed"] = seed;
  return j;
}

std::string PipelineConfig::settings_hash() const { return hex64(fnv1a64(settings_json().dump())); }

Json PipelineConfig::to_json() const {
  Json j = settings_json();
  Json in = Json::object();
  auto put = [&](const char* key, const std::filesystem::path& p) {
    if (!p.empty()) in[key] = p.string();
  };
  put("documents", inputs.documents);
  put("image_embeddings", inputs.image_embeddings);
  put("text_embeddings", inputs.text_embeddings);
  put("synthetic_embeddings", inputs.synthetic_embeddings);
  put("captions", inputs.captions);
  put("tags", inputs.tags);
  put("base_tags", inputs.base_tags);
  put("logprobs", inputs.logprobs);
  put("abbreviations", inputs.abbreviations);
  put("action_verbs", inputs.action_verbs);
  j["inputs"] = std::move(in);
  j["workers"] = workers;
  j["run_dir"] = run_dir.string();
  return j;
}

}  // namespace rsforge
