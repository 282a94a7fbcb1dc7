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

#include "rsforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "rsforge/cluster.hpp"
#include "rsforge/corpus.hpp"
#include "rsforge/dedup.hpp"
#include "rsforge/embed_store.hpp"
#include "rsforge/filters.hpp"
#include "rsforge/generation_clients.hpp"
#include "rsforge/ngram_lm.hpp"
#include "rsforge/pairs.hpp"
#include "rsforge/retrieval.hpp"
#include "rsforge/sampler.hpp"

namespace fs = std::filesystem;

namespace rsforge {

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {
      "extract",       "filter-images", "dedup-images", "filter-sentences", "entropy",
      "perplexity",    "dedup-sentences", "cluster-texts", "retrieve",       "augment",
      "join",          "gate",          "cluster-images", "sample"};
  return names;
}

// ---------------------------------------------------------------------------
// Ledgers

std::size_t StageCounts::rejected() const {
  std::size_t n = 0;
  for (const auto& [_, c] : reasons) n += c;
  return n;
}

Json StageCounts::to_json() const {
  Json r = Json::object();
  for (const auto& [k, v] : reasons) r[k] = v;
  return {{"input", input}, {"kept", kept}, {"rejected", rejected()}, {"reasons", std::move(r)}};
}

StageCounts StageCounts::from_json(const Json& j) {
  StageCounts c;
  c.input = j.at("input").get<std::size_t>();
  c.kept = j.at("kept").get<std::size_t>();
  for (const auto& [k, v] : j.at("reasons").items()) c.reasons[k] = v.get<std::size_t>();
  if (j.at("rejected").get<std::size_t>() != c.rejected()) {
    throw FormatError("stage counts: rejected does not equal the sum of reasons");
  }
  return c;
}

Json StageRecord::to_json() const {
  Json j = {{"stage", stage},
            {"status", status},
            {"key", key},
            {"inputs", inputs},
            {"outputs", outputs},
            {"counts", counts.to_json()},
            {"extra", extra},
            {"wall_ms", wall_ms}};
  if (!error.empty()) j["error"] = error;
  return j;
}

StageRecord StageRecord::from_json(const Json& j) {
  StageRecord r;
  r.stage = j.at("stage").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.key = j.at("key").get<std::string>();
  r.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  r.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  r.counts = StageCounts::from_json(j.at("counts"));
  r.extra = j.value("extra", Json::object());
  r.wall_ms = j.value("wall_ms", 0.0);
  r.error = j.value("error", std::string());
  return r;
}

namespace {

fs::path ledger_path(const fs::path& run_dir, std::string_view stage) {
  return run_dir / "stages" / (std::string(stage) + ".json");
}

std::optional<StageRecord> read_ledger(const fs::path& run_dir, std::string_view stage) {
  fs::path p = ledger_path(run_dir, stage);
  if (!fs::exists(p)) return std::nullopt;
  return StageRecord::from_json(Json::parse(read_file(p)));
}

void write_json_file(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) {
  return splitmix64(seed ^ fnv1a64(stage));
}

// Verdict line with a free-form reason, for reasons outside RejectReason.
Json verdict_json(const std::string& id, bool kept, const std::string& reason,
                  std::optional<double> score = std::nullopt) {
  Json j = {{"id", id}, {"kept", kept}};
  if (!kept) j["reason"] = reason;
  if (score) j["score"] = *score;
  return j;
}

// ---------------------------------------------------------------------------
// Stage plumbing

struct InputRef {
  std::string name;  // ledger key: file name in run_dir, or "inputs.<key>"
  fs::path path;
  bool external = false;
  bool embedding = false;
};

struct StageSpec {
  Json params = Json::object();
  std::vector<InputRef> inputs;
  std::vector<std::string> outputs;  // file names in run_dir
};

struct StageResult {
  StageCounts counts;
  Json extra = Json::object();
};

class StageRunner {
 public:
  StageRunner(const PipelineConfig& cfg, const RunOptions& opts) : cfg_(cfg), opts_(opts) {}

  StageSpec describe(const std::string& name) const;
  StageResult execute(const std::string& name) const;

 private:
  fs::path rd(const std::string& file) const { return cfg_.run_dir / file; }

  StageResult extract() const;
  StageResult filter_images() const;
  StageResult dedup_images() const;
  StageResult filter_sentences() const;
  StageResult entropy() const;
  StageResult perplexity() const;
  StageResult dedup_sentences() const;
  StageResult cluster_texts() const;
  StageResult retrieve() const;
  StageResult augment() const;
  StageResult join() const;
  StageResult gate() const;
  StageResult cluster_images() const;
  StageResult sample() const;

  StageResult dedup_stage(const std::vector<std::string>& ids, const fs::path& store_path, double tau,
                          const std::string& stage, std::vector<std::string>& survivors,
                          const std::string& map_file) const;

  const PipelineConfig& cfg_;
  const RunOptions& opts_;
};

InputRef run_file(const PipelineConfig& cfg, const std::string& file) {
  return {file, cfg.run_dir / file, false, false};
}

InputRef external(const std::string& key, const fs::path& path, bool embedding = false) {
  return {"inputs." + key, path, true, embedding};
}

Json dedup_params(const PipelineConfig& cfg, double tau, std::uint64_t seed) {
  Json j = {{"mode", cfg.dedup.mode}, {"tau", tau}};
  if (cfg.dedup.mode == "cluster_pruned") {
    j["prune_k"] = cfg.dedup.prune_k;
    j["max_iters"] = cfg.cluster.max_iters;
    j["tol"] = cfg.cluster.tol;
    j["seed"] = seed;
  }
  return j;
}

Json kmeans_params(const PipelineConfig& cfg, std::size_t k, std::uint64_t seed) {
  return {{"k", k},
          {"max_iters", cfg.cluster.max_iters},
          {"tol", cfg.cluster.tol},
          {"spherical", cfg.cluster.spherical},
          {"seed", seed}};
}

StageSpec StageRunner::describe(const std::string& name) const {
  const auto& in = cfg_.inputs;
  const auto& f = cfg_.filters;
  StageSpec s;
  auto rf = [&](const std::string& file) { return run_file(cfg_, file); };
  if (name == "extract") {
    s.inputs = {external("documents", in.documents)};
    if (!in.abbreviations.empty()) s.inputs.push_back(external("abbreviations", in.abbreviations));
    s.outputs = {"images.jsonl", "sentences.jsonl", "extract_errors.jsonl"};
  } else if (name == "filter-images") {
    s.params = {{"min_short_side", f.min_short_side}, {"max_aspect", f.max_aspect}};
    s.inputs = {rf("images.jsonl")};
    s.outputs = {"image_verdicts.jsonl", "images.kept.jsonl"};
  } else if (name == "dedup-images") {
    s.params = dedup_params(cfg_, cfg_.dedup.image_tau, stage_seed(cfg_.seed, name));
    s.inputs = {rf("images.kept.jsonl"), external("image_embeddings", in.image_embeddings, true)};
    s.outputs = {"images.dedup.jsonl", "image_dedup_map.jsonl"};
  } else if (name == "filter-sentences") {
    s.params = {{"min_words", f.min_words},
                {"max_words", f.max_words},
                {"complexity", f.complexity},
                {"complexity_min_tokens", f.complexity_min_tokens}};
    s.inputs = {rf("sentences.jsonl")};
    if (!in.action_verbs.empty()) s.inputs.push_back(external("action_verbs", in.action_verbs));
    s.outputs = {"sentence_verdicts.jsonl", "sentences.rules.jsonl"};
  } else if (name == "entropy") {
    s.params = {{"entropy_min", f.entropy_min}};
    s.inputs = {rf("sentences.jsonl"), rf("sentences.rules.jsonl")};
    s.outputs = {"entropy_verdicts.jsonl", "sentences.entropy.jsonl"};
  } else if (name == "perplexity") {
    s.params = {{"ppl_min", f.ppl_min}, {"ppl_max", f.ppl_max}};
    s.inputs = {rf("sentences.jsonl"), rf("sentences.entropy.jsonl")};
    if (!in.logprobs.empty()) {
      s.params["source"] = "logprobs";
      s.inputs.push_back(external("logprobs", in.logprobs));
    } else {
      s.params["source"] = "ngram";
      s.params["order"] = cfg_.lm.order;
      s.params["k"] = cfg_.lm.k;
    }
    s.outputs = {"ppl_verdicts.jsonl", "sentences.ppl.jsonl"};
  } else if (name == "dedup-sentences") {
    s.params = dedup_params(cfg_, cfg_.dedup.sentence_tau, stage_seed(cfg_.seed, name));
    s.inputs = {rf("sentences.ppl.jsonl"), external("text_embeddings", in.text_embeddings, true)};
    s.outputs = {"sentences.dedup.jsonl", "sentence_dedup_map.jsonl"};
  } else if (name == "cluster-texts") {
    s.params = kmeans_params(cfg_, cfg_.cluster.text_k, stage_seed(cfg_.seed, name));
    s.inputs = {rf("sentences.dedup.jsonl"), external("text_embeddings", in.text_embeddings, true)};
    s.outputs = {"text_centroids.rseb", "text_assignments.jsonl"};
  } else if (name == "retrieve") {
    s.params = {{"k", cfg_.retrieval.k}, {"probes", cfg_.retrieval.probes}};
    s.inputs = {rf("images.dedup.jsonl"), rf("text_centroids.rseb"), rf("text_assignments.jsonl"),
                external("image_embeddings", in.image_embeddings, true),
                external("text_embeddings", in.text_embeddings, true)};
    s.outputs = {"hits.jsonl"};
  } else if (name == "augment") {
    s.params = cfg_.section_json("augment");
    s.params.erase("batch");
    s.params.erase("window");
    s.params.erase("backoff_ms");
    if (opts_.client) s.params["generator"] = "injected";
    s.inputs = {rf("hits.jsonl"), rf("sentences.jsonl"), external("captions", in.captions),
                external("tags", in.tags), external("base_tags", in.base_tags)};
    s.outputs = {"lexicon.txt", "synthetic.jsonl"};
  } else if (name == "join") {
    s.inputs = {rf("images.dedup.jsonl"), rf("hits.jsonl"), rf("synthetic.jsonl"),
                external("image_embeddings", in.image_embeddings, true),
                external("synthetic_embeddings", in.synthetic_embeddings, true)};
    s.outputs = {"pairs.joined.jsonl"};
  } else if (name == "gate") {
    s.params = {{"band_lo", f.band_lo}, {"band_hi", f.band_hi}, {"gate_mode", cfg_.pairs.gate_mode}};
    s.inputs = {rf("pairs.joined.jsonl")};
    s.outputs = {"gate_verdicts.jsonl", "pairs.gated.jsonl"};
  } else if (name == "cluster-images") {
    s.params = kmeans_params(cfg_, cfg_.cluster.image_k, stage_seed(cfg_.seed, name));
    s.inputs = {rf("pairs.gated.jsonl"), external("image_embeddings", in.image_embeddings, true)};
    s.outputs = {"image_centroids.rseb", "image_assignments.jsonl", "pairs.clustered.jsonl"};
  } else if (name == "sample") {
    s.params = {{"cap", cfg_.sampler.cap}, {"seed", stage_seed(cfg_.seed, name)}};
    s.inputs = {rf("pairs.clustered.jsonl")};
    s.outputs = {"pairs.jsonl", "sample_report.json"};
  } else {
    throw Error("unknown stage '" + name + "'");
  }
  return s;
}

StageResult StageRunner::execute(const std::string& name) const {
  static const std::unordered_map<std::string, StageResult (StageRunner::*)() const> table = {
      {"extract", &StageRunner::extract},
      {"filter-images", &StageRunner::filter_images},
      {"dedup-images", &StageRunner::dedup_images},
      {"filter-sentences", &StageRunner::filter_sentences},
      {"entropy", &StageRunner::entropy},
      {"perplexity", &StageRunner::perplexity},
      {"dedup-sentences", &StageRunner::dedup_sentences},
      {"cluster-texts", &StageRunner::cluster_texts},
      {"retrieve", &StageRunner::retrieve},
      {"augment", &StageRunner::augment},
      {"join", &StageRunner::join},
      {"gate", &StageRunner::gate},
      {"cluster-images", &StageRunner::cluster_images},
      {"sample", &StageRunner::sample},
  };
  auto it = table.find(name);
  if (it == table.end()) throw Error("unknown stage '" + name + "'");
  return (this->*(it->second))();
}

// ---------------------------------------------------------------------------
// Stages

std::vector<std::string> image_ids_of(const std::vector<ImageRecord>& recs) {
  std::vector<std::string> ids;
  ids.reserve(recs.size());
  for (const auto& r : recs) ids.push_back(r.image_id);
  return ids;
}

std::vector<std::string> sentence_ids_of(const std::vector<SentenceRecord>& recs) {
  std::vector<std::string> ids;
  ids.reserve(recs.size());
  for (const auto& r : recs) ids.push_back(r.sentence_id);
  return ids;
}

template <typename Rec>
std::vector<Rec> keep_ids(const std::vector<Rec>& recs, const std::unordered_set<std::string>& keep,
                          std::string Rec::*id) {
  std::vector<Rec> out;
  for (const auto& r : recs) {
    if (keep.contains(r.*id)) out.push_back(r);
  }
  return out;
}

StageResult StageRunner::extract() const {
  ParsedDocuments parsed = parse_documents(cfg_.inputs.documents);
  SentenceSplitter splitter = cfg_.inputs.abbreviations.empty()
                                  ? SentenceSplitter()
                                  : SentenceSplitter::from_file(cfg_.inputs.abbreviations);
  Extraction ex = rsforge::extract(parsed.documents, splitter);
  write_image_records(rd("images.jsonl"), ex.images);
  write_sentence_records(rd("sentences.jsonl"), ex.sentences);
  JsonlWriter errs(rd("extract_errors.jsonl"));
  for (const auto& e : parsed.errors) errs.write({{"line", e.line}, {"error", e.message}});
  errs.close();

  StageResult r;
  r.counts.input = parsed.documents.size() + parsed.errors.size();
  r.counts.kept = parsed.documents.size();
  r.counts.reasons["malformed"] = parsed.errors.size();
  r.extra = {{"images", ex.images.size()}, {"sentences", ex.sentences.size()}};
  return r;
}

StageResult StageRunner::filter_images() const {
  auto images = read_image_records(rd("images.jsonl"));
  ImageRuleParams params{cfg_.filters.min_short_side, cfg_.filters.max_aspect};
  StageResult r;
  r.counts.input = images.size();
  r.counts.reasons = {{"size", 0}, {"aspect_ratio", 0}};
  std::vector<ImageRecord> kept;
  JsonlWriter verdicts(rd("image_verdicts.jsonl"));
  for (const auto& img : images) {
    FilterVerdict v = image_rule_filter(img, params);
    verdicts.write(to_json(v));
    if (v.kept) {
      kept.push_back(img);
    } else {
      ++r.counts.reasons[std::string(to_string(*v.reason))];
    }
  }
  verdicts.close();
  write_image_records(rd("images.kept.jsonl"), kept);
  r.counts.kept = kept.size();
  return r;
}

StageResult StageRunner::dedup_stage(const std::vector<std::string>& ids, const fs::path& store_path,
                                     double tau, const std::string& stage,
                                     std::vector<std::string>& survivors,
                                     const std::string& map_file) const {
  EmbeddingStore store = ensure_normalized(read_store(store_path));
  std::vector<std::string> present;
  std::size_t missing = 0;
  for (const auto& id : ids) {
    if (store.contains(id)) {
      present.push_back(id);
    } else {
      ++missing;
    }
  }
  EmbeddingStore sub = store.select(present);
  DedupMode mode = dedup_mode_from_string(cfg_.dedup.mode);
  std::optional<ClusterModel> model;
  Json extra = Json::object();
  if (mode == DedupMode::cluster_pruned && !sub.empty()) {
    std::size_t k = cfg_.dedup.prune_k;
    if (k == 0) k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(sub.size()))));
    k = std::min(k, sub.size());
    KMeansOptions opt{k, cfg_.cluster.max_iters, cfg_.cluster.tol, stage_seed(cfg_.seed, stage), true};
    model = kmeans_fit(sub, opt);
    extra["prune_k"] = k;
  }
  auto edges = build_similarity_edges(sub, tau, mode, model ? &*model : nullptr);
  DedupResult res = dedup_components(edges, present, static_cast<std::size_t>(current_workers()));
  write_dedup_map(rd(map_file), res);
  for (std::size_t i = 0; i < res.ids.size(); ++i) {
    if (res.is_representative(i)) survivors.push_back(res.ids[i]);
  }
  extra["edges"] = edges.size();
  extra["components"] = res.components.size();

  StageResult r;
  r.counts.input = ids.size();
  r.counts.kept = survivors.size();
  r.counts.reasons = {{"duplicate", res.removed()}, {"missing_embedding", missing}};
  r.extra = std::move(extra);
  return r;
}

StageResult StageRunner::dedup_images() const {
  auto images = read_image_records(rd("images.kept.jsonl"));
  std::vector<std::string> survivors;
  StageResult r = dedup_stage(image_ids_of(images), cfg_.inputs.image_embeddings, cfg_.dedup.image_tau,
                              "dedup-images", survivors, "image_dedup_map.jsonl");
  std::unordered_set<std::string> keep(survivors.begin(), survivors.end());
  write_image_records(rd("images.dedup.jsonl"), keep_ids(images, keep, &ImageRecord::image_id));
  return r;
}

StageResult StageRunner::filter_sentences() const {
  auto sentences = read_sentence_records(rd("sentences.jsonl"));
  SentenceRuleParams params{cfg_.filters.min_words, cfg_.filters.max_words};
  ComplexityAssessor assessor;
  if (cfg_.filters.complexity == "none") {
    assessor = accept_all_assessor();
  } else {
    std::vector<std::string> verbs;
    if (!cfg_.inputs.action_verbs.empty()) verbs = read_word_list(cfg_.inputs.action_verbs);
    assessor = action_lexicon_assessor(std::move(verbs), cfg_.filters.complexity_min_tokens);
  }
  std::vector<FilterVerdict> verdicts(sentences.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(sentences.size()); ++i) {
    const auto u = static_cast<std::size_t>(i);
    verdicts[u] = sentence_rule_filter(sentences[u], params, assessor);
  }
  StageResult r;
  r.counts.input = sentences.size();
  r.counts.reasons = {{"url", 0}, {"emoji", 0}, {"too_few_words", 0}, {"too_many_words", 0}, {"complexity", 0}};
  std::vector<SentenceRecord> kept;
  JsonlWriter out(rd("sentence_verdicts.jsonl"));
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    out.write(to_json(verdicts[i]));
    if (verdicts[i].kept) {
      kept.push_back(sentences[i]);
    } else {
      ++r.counts.reasons[std::string(to_string(*verdicts[i].reason))];
    }
  }
  out.close();
  write_sentence_records(rd("sentences.rules.jsonl"), kept);
  r.counts.kept = kept.size();
  return r;
}

StageResult StageRunner::entropy() const {
  auto corpus = read_sentence_records(rd("sentences.jsonl"));
  auto sentences = read_sentence_records(rd("sentences.rules.jsonl"));
  CorpusStats stats = build_corpus_stats(corpus);
  std::vector<FilterVerdict> verdicts(sentences.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(sentences.size()); ++i) {
    const auto u = static_cast<std::size_t>(i);
    verdicts[u] = entropy_filter(sentences[u], stats, cfg_.filters.entropy_min);
  }
  StageResult r;
  r.counts.input = sentences.size();
  r.counts.reasons = {{"low_entropy", 0}};
  std::vector<SentenceRecord> kept;
  JsonlWriter out(rd("entropy_verdicts.jsonl"));
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    out.write(to_json(verdicts[i]));
    if (verdicts[i].kept) {
      kept.push_back(sentences[i]);
    } else {
      ++r.counts.reasons["low_entropy"];
    }
  }
  out.close();
  write_sentence_records(rd("sentences.entropy.jsonl"), kept);
  r.counts.kept = kept.size();
  r.extra = {{"vocabulary", stats.vocabulary()}, {"total_tokens", stats.total_tokens}};
  return r;
}

StageResult StageRunner::perplexity() const {
  auto sentences = read_sentence_records(rd("sentences.entropy.jsonl"));
  PerplexityInterval interval{cfg_.filters.ppl_min, cfg_.filters.ppl_max};
  std::vector<Json> verdicts(sentences.size());
  std::vector<std::string> reason(sentences.size());  // empty = kept
  Json extra = Json::object();

  if (!cfg_.inputs.logprobs.empty()) {
    std::unordered_map<std::string, std::vector<double>> lp;
    for (const Json& j : read_jsonl(cfg_.inputs.logprobs)) {
      lp[j.at("id").get<std::string>()] = j.at("logprobs").get<std::vector<double>>();
    }
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto& id = sentences[i].sentence_id;
      auto it = lp.find(id);
      if (it == lp.end() || it->second.empty()) {
        reason[i] = "missing_logprobs";
        verdicts[i] = verdict_json(id, false, reason[i]);
        continue;
      }
      FilterVerdict v = perplexity_filter(id, it->second, interval);
      if (!v.kept) reason[i] = std::string(to_string(*v.reason));
      verdicts[i] = to_json(v);
    }
    extra["source"] = "logprobs";
  } else {
    auto corpus = read_sentence_records(rd("sentences.jsonl"));
    NgramLm lm = train_ngram_lm(corpus, cfg_.lm.order, cfg_.lm.k);
#pragma omp parallel for schedule(dynamic, 256)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(sentences.size()); ++i) {
      const auto u = static_cast<std::size_t>(i);
      try {
        FilterVerdict v = perplexity_filter(sentences[u], lm, interval);
        if (!v.kept) reason[u] = std::string(to_string(*v.reason));
        verdicts[u] = to_json(v);
      } catch (const DomainError&) {
        reason[u] = "no_tokens";
        verdicts[u] = verdict_json(sentences[u].sentence_id, false, reason[u]);
      }
    }
    extra = {{"source", "ngram"}, {"vocabulary", lm.vocabulary()}};
  }

  StageResult r;
  r.counts.input = sentences.size();
  r.counts.reasons = {{"perplexity_out_of_range", 0}};
  std::vector<SentenceRecord> kept;
  JsonlWriter out(rd("ppl_verdicts.jsonl"));
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    out.write(verdicts[i]);
    if (reason[i].empty()) {
      kept.push_back(sentences[i]);
    } else {
      ++r.counts.reasons[reason[i]];
    }
  }
  out.close();
  write_sentence_records(rd("sentences.ppl.jsonl"), kept);
  r.counts.kept = kept.size();
  r.extra = std::move(extra);
  return r;
}

StageResult StageRunner::dedup_sentences() const {
  auto sentences = read_sentence_records(rd("sentences.ppl.jsonl"));
  std::vector<std::string> survivors;
  StageResult r = dedup_stage(sentence_ids_of(sentences), cfg_.inputs.text_embeddings,
                              cfg_.dedup.sentence_tau, "dedup-sentences", survivors,
                              "sentence_dedup_map.jsonl");
  std::unordered_set<std::string> keep(survivors.begin(), survivors.end());
  write_sentence_records(rd("sentences.dedup.jsonl"), keep_ids(sentences, keep, &SentenceRecord::sentence_id));
  return r;
}

Json cluster_sizes(const ClusterModel& model) {
  Json sizes = Json::array();
  for (std::size_t c = 0; c < model.k(); ++c) sizes.push_back(model.members(c).size());
  return sizes;
}

ClusterModel fit_stage_model(const EmbeddingStore& store, std::size_t k_wanted, const PipelineConfig& cfg,
                             const std::string& stage, Json& extra) {
  if (store.empty()) throw Error("nothing to cluster");
  KMeansOptions opt;
  opt.k = std::min(k_wanted, store.size());
  opt.max_iters = cfg.cluster.max_iters;
  opt.tol = cfg.cluster.tol;
  opt.seed = stage_seed(cfg.seed, stage);
  opt.spherical = cfg.cluster.spherical;
  ClusterModel model = kmeans_fit(store, opt);
  extra = {{"k", opt.k},
           {"iterations", model.iterations()},
           {"inertia", model.inertia()},
           {"cluster_sizes", cluster_sizes(model)}};
  return model;
}

StageResult StageRunner::cluster_texts() const {
  auto sentences = read_sentence_records(rd("sentences.dedup.jsonl"));
  EmbeddingStore store = ensure_normalized(read_store(cfg_.inputs.text_embeddings));
  EmbeddingStore sub = store.select(sentence_ids_of(sentences));
  StageResult r;
  ClusterModel model = fit_stage_model(sub, cfg_.cluster.text_k, cfg_, "cluster-texts", r.extra);
  write_cluster_model(model, rd("text_centroids.rseb"), rd("text_assignments.jsonl"));
  r.counts.input = r.counts.kept = sentences.size();
  return r;
}

StageResult StageRunner::retrieve() const {
  auto images = read_image_records(rd("images.dedup.jsonl"));
  ClusterModel model = read_cluster_model(rd("text_centroids.rseb"), rd("text_assignments.jsonl"));
  EmbeddingStore texts = ensure_normalized(read_store(cfg_.inputs.text_embeddings)).select(model.ids());
  EmbeddingStore queries = ensure_normalized(read_store(cfg_.inputs.image_embeddings)).select(image_ids_of(images));
  if (queries.dim() != texts.dim()) {
    throw DomainError("image embeddings dim " + std::to_string(queries.dim()) +
                      " differs from text embeddings dim " + std::to_string(texts.dim()));
  }
  ClusterIndex index(model, texts);
  const std::size_t probes = std::min(cfg_.retrieval.probes, model.k());
  auto hits = retrieve_batch(queries, index, cfg_.retrieval.k, probes);
  write_hits(rd("hits.jsonl"), queries.ids(), hits);

  StageResult r;
  r.counts.input = images.size();
  r.counts.reasons = {{"no_hit", 0}};
  for (const auto& h : hits) {
    if (h.empty()) {
      ++r.counts.reasons["no_hit"];
    } else {
      ++r.counts.kept;
    }
  }
  r.extra = {{"probes", probes}, {"k", cfg_.retrieval.k}};
  return r;
}

StageResult StageRunner::augment() const {
  HitTable table = read_hits(rd("hits.jsonl"));
  auto corpus = read_sentence_records(rd("sentences.jsonl"));
  std::unordered_map<std::string, std::string> text_of;
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& s : corpus) {
    text_of.emplace(s.sentence_id, s.text);
    texts.push_back(s.text);
  }

  auto base = read_word_list(cfg_.inputs.base_tags);
  TagLexicon lexicon = expand_tag_lexicon(base, texts, cfg_.augment.lexicon_target);
  write_lexicon(rd("lexicon.txt"), lexicon);

  std::unordered_map<std::string, std::string> captions;
  for (const Json& j : read_jsonl(cfg_.inputs.captions)) {
    captions[j.at("image_id").get<std::string>()] = j.at("caption").get<std::string>();
  }
  std::unordered_map<std::string, std::vector<std::string>> tags;
  for (const Json& j : read_jsonl(cfg_.inputs.tags)) {
    std::vector<std::string> kept;
    for (const auto& t : j.at("tags")) {
      std::string tag = to_lower_ascii(trim(t.get<std::string>()));
      if (lexicon.contains(tag) && std::find(kept.begin(), kept.end(), tag) == kept.end()) kept.push_back(tag);
    }
    tags[j.at("image_id").get<std::string>()] = std::move(kept);
  }

  StageResult r;
  r.counts.reasons = {{"no_caption", 0}, {"generation_failed", 0}};
  std::vector<GenerationRequest> requests;
  for (const auto& image_id : table.image_ids) {
    const auto& hits = table.hits.at(image_id);
    if (hits.empty()) continue;
    ++r.counts.input;
    auto cap = captions.find(image_id);
    if (cap == captions.end() || trim(cap->second).empty()) {
      ++r.counts.reasons["no_caption"];
      continue;
    }
    auto t = tags.find(image_id);
    const std::size_t slots = std::min(cfg_.augment.slots, hits.size());
    for (std::size_t slot = 0; slot < slots; ++slot) {
      auto raw = text_of.find(hits[slot].sentence_id);
      if (raw == text_of.end()) {
        throw Error("hit sentence '" + hits[slot].sentence_id + "' not found in sentences.jsonl");
      }
      requests.push_back(assemble_prompt(raw->second, cap->second,
                                         t == tags.end() ? std::vector<std::string>{} : t->second, image_id,
                                         static_cast<std::uint32_t>(slot)));
    }
  }

  std::unique_ptr<GenerationClient> owned;
  GenerationClient* client = opts_.client;
  if (!client) {
    owned = make_generation_client(cfg_.augment.generator);
    client = owned.get();
  }
  GenerationOptions gopt;
  gopt.max_retries = cfg_.augment.max_retries;
  gopt.batch = cfg_.augment.batch;
  gopt.window = cfg_.augment.window;
  gopt.initial_backoff = std::chrono::milliseconds(cfg_.augment.backoff_ms);
  auto results = generate_synthetic(requests, *client, gopt);

  JsonlWriter out(rd("synthetic.jsonl"));
  std::size_t ok = 0;
  std::unordered_map<std::string, bool> any_ok;
  for (const auto& g : results) {
    out.write(to_json(g));
    bool good = g.status == GenerationStatus::ok;
    ok += good ? 1 : 0;
    any_ok[g.image_id] = any_ok[g.image_id] || good;
  }
  out.close();
  for (const auto& [_, good] : any_ok) {
    if (good) {
      ++r.counts.kept;
    } else {
      ++r.counts.reasons["generation_failed"];
    }
  }
  r.extra = {{"requests", requests.size()},
             {"ok", ok},
             {"failed", results.size() - ok},
             {"lexicon_size", lexicon.size()},
             {"lexicon_base", base.size()}};
  return r;
}

StageResult StageRunner::join() const {
  auto images = read_image_records(rd("images.dedup.jsonl"));
  HitTable table = read_hits(rd("hits.jsonl"));
  std::map<std::string, std::vector<GenerationResult>> synthetic;
  for (const Json& j : read_jsonl(rd("synthetic.jsonl"))) {
    GenerationResult g = generation_result_from_json(j);
    synthetic[g.image_id].push_back(std::move(g));
  }
  for (auto& [_, v] : synthetic) {
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.slot < b.slot; });
  }
  EmbeddingStore image_store = ensure_normalized(read_store(cfg_.inputs.image_embeddings));
  EmbeddingStore synthetic_store = read_store(cfg_.inputs.synthetic_embeddings);
  std::vector<std::string> ids = image_ids_of(images);
  JoinInputs in;
  in.image_ids = ids;
  in.hits = &table.hits;
  in.synthetic = &synthetic;
  in.image_store = &image_store;
  in.synthetic_store = &synthetic_store;
  JoinOutput out = join_pairs(in);
  write_pairs(rd("pairs.joined.jsonl"), out.records);

  StageResult r;
  r.counts.input = out.stats.input;
  r.counts.kept = out.stats.emitted;
  r.counts.reasons = {{"no_hit", out.stats.no_hit}, {"missing_embedding", out.stats.missing_embedding}};
  r.extra = {{"synthetic_failed", out.stats.synthetic_failed},
             {"synthetic_missing_embedding", out.stats.synthetic_missing_embedding}};
  return r;
}

StageResult StageRunner::gate() const {
  auto records = read_pairs(rd("pairs.joined.jsonl"));
  Band band{cfg_.filters.band_lo, cfg_.filters.band_hi};
  GateMode mode = gate_mode_from_string(cfg_.pairs.gate_mode);
  std::vector<PairRecord> scored;
  for (const auto& rec : records) {
    if (rec.gate_score) scored.push_back(rec);
  }
  BandOutput banded = apply_band(scored, band, mode);

  StageResult r;
  r.counts.input = records.size();
  r.counts.reasons = {{"band", 0}, {"no_synthetic", 0}};
  JsonlWriter out(rd("gate_verdicts.jsonl"));
  std::size_t next = 0;
  for (const auto& rec : records) {
    if (!rec.gate_score) {
      out.write(verdict_json(rec.image_id, false, "no_synthetic"));
      ++r.counts.reasons["no_synthetic"];
      continue;
    }
    const FilterVerdict& v = banded.verdicts[next++];
    out.write(to_json(v));
    if (!v.kept) ++r.counts.reasons["band"];
  }
  out.close();
  write_pairs(rd("pairs.gated.jsonl"), banded.kept);
  r.counts.kept = banded.kept.size();
  return r;
}

StageResult StageRunner::cluster_images() const {
  auto records = read_pairs(rd("pairs.gated.jsonl"));
  std::vector<std::string> ids;
  for (const auto& p : records) ids.push_back(p.image_id);
  EmbeddingStore sub = ensure_normalized(read_store(cfg_.inputs.image_embeddings)).select(ids);
  StageResult r;
  if (sub.empty()) {
    // Nothing survived the gate: empty model, empty outputs.
    write_cluster_model(ClusterModel(kernels::Centroids(0, sub.dim()), cfg_.cluster.spherical, {}, {}),
                        rd("image_centroids.rseb"), rd("image_assignments.jsonl"));
    write_pairs(rd("pairs.clustered.jsonl"), records);
    r.extra = {{"k", 0}, {"iterations", 0}, {"inertia", 0.0}, {"cluster_sizes", Json::array()}};
    return r;
  }
  ClusterModel model = fit_stage_model(sub, cfg_.cluster.image_k, cfg_, "cluster-images", r.extra);
  write_cluster_model(model, rd("image_centroids.rseb"), rd("image_assignments.jsonl"));
  for (auto& p : records) p.cluster = *model.cluster_of(p.image_id);
  write_pairs(rd("pairs.clustered.jsonl"), records);
  r.counts.input = r.counts.kept = records.size();
  return r;
}

StageResult StageRunner::sample() const {
  auto records = read_pairs(rd("pairs.clustered.jsonl"));
  SampleOutput out = balance_sample(records, cfg_.sampler.cap, stage_seed(cfg_.seed, "sample"));
  write_pairs(rd("pairs.jsonl"), out.sampled);
  write_json_file(rd("sample_report.json"), out.report.to_json());
  StageResult r;
  r.counts.input = records.size();
  r.counts.kept = out.sampled.size();
  r.counts.reasons = {{"over_cap", records.size() - out.sampled.size() - out.errors.size()},
                      {"missing_cluster", out.errors.size()}};
  r.extra = {{"cap", cfg_.sampler.cap},
             {"clusters", out.report.clusters.size()},
             {"head_ratio_before", out.report.head_ratio_before()},
             {"head_ratio_after", out.report.head_ratio_after()}};
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  config_.validate();
  set_workers(config_.workers > 0 ? config_.workers : workers_from_env());
}

StageRecord Pipeline::run_stage(std::string_view name_view, const RunOptions& options) {
  const std::string name(name_view);
  StageRunner runner(config_, options);
  StageSpec spec = runner.describe(name);
  fs::create_directories(run_dir() / "stages");

  StageRecord rec;
  rec.stage = name;
  auto fail = [&](const std::string& message) -> StageError {
    rec.status = "failed";
    rec.error = message;
    write_json_file(ledger_path(run_dir(), name), rec.to_json());
    return StageError(name, message);
  };

  for (const auto& in : spec.inputs) {
    if (fs::exists(in.path)) continue;
    if (in.external && in.path.empty()) throw fail("config key '" + in.name + "' is not set");
    if (in.embedding) throw fail("embedding file not found: " + in.path.string());
    if (in.external) throw fail("input file not found: " + in.path.string());
    const auto& names = stage_names();
    std::string producer;
    for (const auto& s : names) {
      auto outs = runner.describe(s).outputs;
      if (std::find(outs.begin(), outs.end(), in.name) != outs.end()) producer = s;
    }
    throw fail("missing " + in.path.string() + " (run stage '" + producer + "' first)");
  }

  std::string key_material = name + "\n" + spec.params.dump() + "\n";
  for (const auto& in : spec.inputs) {
    std::string d = file_digest(in.path);
    rec.inputs[in.name] = d;
    key_material += in.name + "=" + d + "\n";
  }
  rec.key = hex64(fnv1a64(key_material));

  if (!options.force) {
    if (auto prev = read_ledger(run_dir(), name); prev && prev->status == "ok" && prev->key == rec.key) {
      bool intact = true;
      for (const auto& out : spec.outputs) {
        fs::path p = run_dir() / out;
        auto it = prev->outputs.find(out);
        if (!fs::exists(p) || it == prev->outputs.end() || it->second != file_digest(p)) {
          intact = false;
          break;
        }
      }
      if (intact) {
        prev->cached = true;
        return *prev;
      }
    }
  }

  auto t0 = std::chrono::steady_clock::now();
  StageResult result;
  try {
    result = runner.execute(name);
  } catch (const std::exception& e) {
    throw fail(e.what());
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!result.counts.conserved()) throw fail("count conservation violated");
  rec.status = "ok";
  rec.counts = std::move(result.counts);
  rec.extra = std::move(result.extra);
  for (const auto& out : spec.outputs) rec.outputs[out] = file_digest(run_dir() / out);
  write_json_file(ledger_path(run_dir(), name), rec.to_json());
  return rec;
}

std::vector<StageRecord> Pipeline::run_all(const RunOptions& options) {
  fs::create_directories(run_dir());
  std::vector<StageRecord> out;
  auto finish = [&] {
    write_json_file(run_dir() / "manifest.json", build_manifest(run_dir(), config_));
    write_report(run_dir());
  };
  // Ledgers of later stages from an older run would otherwise be reported
  // as part of this one after a failure.
  bool failed = false;
  for (const auto& name : stage_names()) {
    if (failed) {
      fs::remove(ledger_path(run_dir(), name));
      continue;
    }
    try {
      out.push_back(run_stage(name, options));
    } catch (const StageError&) {
      failed = true;
      for (auto it = std::find(stage_names().begin(), stage_names().end(), name) + 1;
           it != stage_names().end(); ++it) {
        fs::remove(ledger_path(run_dir(), *it));
      }
      finish();
      throw;
    }
  }
  finish();
  return out;
}

// ---------------------------------------------------------------------------
// Reports

RunReport load_report(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw Error("run directory not found: " + run_dir.string());
  RunReport rep;
  for (const auto& name : stage_names()) {
    if (auto rec = read_ledger(run_dir, name)) {
      rep.stages.push_back(std::move(*rec));
    } else {
      rep.missing.push_back(name);
    }
  }
  rep.complete = rep.missing.empty() &&
                 std::all_of(rep.stages.begin(), rep.stages.end(), [](const auto& s) { return s.status == "ok"; });
  fs::path sample = run_dir / "sample_report.json";
  if (fs::exists(sample)) {
    Json j = Json::parse(read_file(sample));
    rep.cluster_histogram = j.value("per_cluster", Json::array());
  }
  fs::path manifest = run_dir / "manifest.json";
  if (fs::exists(manifest)) {
    Json j = Json::parse(read_file(manifest));
    rep.settings_hash = j.value("settings_hash", std::string());
    rep.seed = j.value("seed", std::uint64_t{0});
  }
  return rep;
}

Json RunReport::to_json() const {
  Json st = Json::array();
  for (const auto& s : stages) {
    Json j = {{"stage", s.stage}, {"status", s.status}, {"counts", s.counts.to_json()}, {"wall_ms", s.wall_ms}};
    if (!s.error.empty()) j["error"] = s.error;
    st.push_back(std::move(j));
  }
  return {{"complete", complete},
          {"settings_hash", settings_hash},
          {"seed", seed},
          {"stages", std::move(st)},
          {"missing", missing},
          {"cluster_histogram", cluster_histogram}};
}

std::string RunReport::to_text() const {
  std::ostringstream os;
  os << "run " << (complete ? "complete" : "INCOMPLETE") << "  settings " << settings_hash << "  seed " << seed
     << "\n\n";
  os << std::left << std::setw(18) << "stage" << std::setw(8) << "status" << std::right << std::setw(10) << "input"
     << std::setw(10) << "kept" << std::setw(10) << "rejected" << std::setw(12) << "wall_ms" << "  reasons\n";
  for (const auto& s : stages) {
    os << std::left << std::setw(18) << s.stage << std::setw(8) << s.status << std::right << std::setw(10)
       << s.counts.input << std::setw(10) << s.counts.kept << std::setw(10) << s.counts.rejected() << std::setw(12)
       << std::fixed << std::setprecision(1) << s.wall_ms << "  ";
    bool first = true;
    for (const auto& [k, v] : s.counts.reasons) {
      if (v == 0) continue;
      os << (first ? "" : ", ") << k << "=" << v;
      first = false;
    }
    if (!s.error.empty()) os << (first ? "" : "; ") << "error: " << s.error;
    os << "\n";
  }
  for (const auto& m : missing) os << std::left << std::setw(18) << m << "missing\n";
  if (!cluster_histogram.empty()) {
    std::size_t peak = 1;
    for (const auto& c : cluster_histogram) peak = std::max(peak, c.at("before").get<std::size_t>());
    os << "\nimage clusters (before -> after sampling)\n";
    for (const auto& c : cluster_histogram) {
      auto before = c.at("before").get<std::size_t>();
      auto after = c.at("after").get<std::size_t>();
      os << std::right << std::setw(6) << c.at("cluster").get<std::int64_t>() << std::setw(8) << before << " ->"
         << std::setw(6) << after << "  " << std::string((after * 40 + peak - 1) / peak, '#')
         << std::string(((before - after) * 40) / peak, '.') << "\n";
    }
  }
  return os.str();
}

RunReport write_report(const fs::path& run_dir) {
  RunReport rep = load_report(run_dir);
  write_json_file(run_dir / "report.json", rep.to_json());
  write_file(run_dir / "report.txt", rep.to_text());
  return rep;
}

Json build_manifest(const fs::path& run_dir, const PipelineConfig& config) {
  RunReport rep = load_report(run_dir);
  Json stages = Json::array();
  for (const auto& s : rep.stages) {
    stages.push_back({{"stage", s.stage},
                      {"status", s.status},
                      {"key", s.key},
                      {"inputs", s.inputs},
                      {"outputs", s.outputs},
                      {"counts", s.counts.to_json()},
                      {"extra", s.extra}});
  }
  Json j = {{"settings_hash", config.settings_hash()},
            {"seed", config.seed},
            {"complete", rep.complete},
            {"stages", std::move(stages)},
            {"missing", rep.missing}};
  if (rep.complete) j["final_pairs"] = rep.stages.back().counts.kept;
  return j;
}

}  // namespace rsforge
