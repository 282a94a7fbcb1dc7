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

#include "rsforge/toy.hpp"

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "rsforge/corpus.hpp"
#include "rsforge/embed_store.hpp"
#include "rsforge/jsonl.hpp"

namespace rsforge {

namespace {

struct Topic {
  const char* name;
  std::array<const char*, 10> nouns;
  std::array<const char*, 6> verbs;
  std::array<const char*, 3> places;
};

const std::array<Topic, 8> kTopics = {{
    {"harbor",
     {"boat", "sailor", "pier", "gull", "net", "dock", "ship", "rope", "lighthouse", "fisherman"},
     {"sailing", "pulling", "carrying", "watching", "waiting", "resting"},
     {"harbor", "bay", "marina"}},
    {"kitchen",
     {"chef", "pan", "bread", "oven", "table", "knife", "bowl", "cook", "soup", "apron"},
     {"cooking", "holding", "cutting", "eating", "carrying", "washing"},
     {"kitchen", "bakery", "restaurant"}},
    {"park",
     {"dog", "child", "ball", "bench", "tree", "kite", "bicycle", "grass", "swing", "path"},
     {"running", "playing", "jumping", "riding", "sitting", "walking"},
     {"park", "garden", "playground"}},
    {"mountain",
     {"climber", "rock", "trail", "goat", "peak", "tent", "ridge", "backpack", "snow", "cliff"},
     {"climbing", "standing", "resting", "walking", "carrying", "watching"},
     {"mountain", "valley", "canyon"}},
    {"street",
     {"bus", "taxi", "crowd", "woman", "man", "umbrella", "crosswalk", "shop", "car", "cyclist"},
     {"crossing", "waiting", "walking", "riding", "holding", "parked"},
     {"street", "city", "square"}},
    {"farm",
     {"cow", "horse", "farmer", "tractor", "barn", "field", "sheep", "fence", "hay", "chicken"},
     {"grazing", "pulling", "standing", "feeding", "resting", "eating"},
     {"farm", "meadow", "village"}},
    {"beach",
     {"surfer", "wave", "sand", "towel", "parasol", "shell", "swimmer", "kid", "dune", "sun"},
     {"surfing", "swimming", "playing", "building", "walking", "sitting"},
     {"beach", "shore", "coast"}},
    {"studio",
     {"artist", "canvas", "brush", "easel", "paint", "model", "chair", "lamp", "sculpture", "student"},
     {"painting", "drawing", "sitting", "holding", "reading", "watching"},
     {"studio", "gallery", "workshop"}},
}};

const std::array<const char*, 30> kAdjectives = {
    "old",    "young",  "small",  "large",   "red",    "blue",   "quiet",  "busy",
    "bright", "wooden", "tall",   "happy",   "white",  "dark",   "green",  "tiny",
    "heavy",  "gentle", "yellow", "striped", "rusty",  "shiny",  "muddy",  "famous",
    "lonely", "silver", "narrow", "crowded", "sunny",  "ancient"};

const std::array<const char*, 30> kObjects = {
    "bag",    "hat",    "camera", "basket", "map",     "lantern", "bottle", "blanket",
    "bucket", "ladder", "flag",   "kettle", "cart",    "drum",    "scarf",  "jacket",
    "crate",  "phone",  "book",   "cup",    "banner",  "clock",   "stool",  "mirror",
    "rug",    "wagon",  "coat",   "glove",  "notebook", "radio"};

const std::array<const char*, 12> kAdverbs = {"slowly",   "quietly",   "happily", "carefully",
                                              "quickly",  "calmly",    "together", "alone",
                                              "patiently", "gently",   "eagerly", "proudly"};

const std::array<const char*, 10> kTimes = {"this morning", "at noon",      "after lunch", "before sunset",
                                            "in the rain",  "under clouds", "at dawn",     "late at night",
                                            "on sunday",    "in winter"};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  bool chance(double p) { return uniform() < p; }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }
  template <typename A>
  const char* pick(const A& arr) {
    return arr[below(arr.size())];
  }

 private:
  std::mt19937_64 g_;
};

std::vector<double> unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

std::vector<double> gaussian(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

// Topic mean plus isotropic noise; `noise` is the per-coordinate scale
// relative to a unit topic vector.
std::vector<double> around(const std::vector<double>& mu, Rng& rng, double noise) {
  const double scale = noise / std::sqrt(static_cast<double>(mu.size()));
  std::vector<double> v(mu);
  for (double& x : v) x += scale * rng.normal();
  return unit(std::move(v));
}

// Unit vector with cosine exactly `c` (before float rounding) to unit `u`.
std::vector<double> at_cosine(const std::vector<double>& u, double c, Rng& rng) {
  std::vector<double> w = gaussian(rng, u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) d += w[i] * u[i];
  for (std::size_t i = 0; i < u.size(); ++i) w[i] -= d * u[i];
  w = unit(std::move(w));
  const double s = std::sqrt(1.0 - c * c);
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) v[i] = c * u[i] + s * w[i];
  return unit(std::move(v));
}

void append_row(std::vector<float>& data, const std::vector<double>& v) {
  for (double x : v) data.push_back(static_cast<float>(x));
}

std::string plural(const std::string& noun) {
  if (noun.back() == 's' || noun.back() == 'h') return noun + "es";
  if (noun.back() == 'y') return noun.substr(0, noun.size() - 1) + "ies";
  return noun + "s";
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string topical_sentence(const Topic& t, Rng& rng) {
  std::string n1 = rng.pick(t.nouns);
  std::string n2 = rng.pick(t.nouns);
  std::string v = rng.pick(t.verbs);
  std::string p = rng.pick(t.places);
  std::string a = rng.pick(kAdjectives);
  std::string a2 = rng.pick(kAdjectives);
  std::string o = rng.pick(kObjects);
  std::string adv = rng.pick(kAdverbs);
  std::string tm = rng.pick(kTimes);
  switch (rng.below(8)) {
    case 0:
      return "The " + a + " " + n1 + " is " + v + " " + adv + " near the " + n2 + " in the " + p + ".";
    case 1:
      return "A " + a + " " + n1 + " and a " + n2 + " are " + v + " by the " + p + " " + tm + ".";
    case 2:
      return "Two " + plural(n1) + " are " + v + " with the " + a + " " + n2 + " and a " + a2 + " " + o + ".";
    case 3:
      return "In the " + a2 + " " + p + ", the " + n1 + " is " + v + " while the " + n2 + " waits " + tm + ".";
    case 4:
      return "The " + n1 + " was " + v + " " + adv + " beside the " + a + " " + n2 + " for most of the afternoon.";
    case 5:
      return "We saw a " + a + " " + n1 + " " + v + " past the " + n2 + " at the " + a2 + " " + p + ".";
    case 6:
      return "Someone left a " + a + " " + o + " next to the " + n1 + " that was " + v + " " + tm + ".";
    default:
      return "Near the " + p + " a " + a2 + " " + n1 + " kept " + v + " " + adv + " with its " + o + ".";
  }
}

struct SentenceKind {
  std::string text;
  int topic = -1;  // -1 for off-topic text
};

// Text that a quality filter is meant to remove.
SentenceKind noisy_sentence(const Topic& t, int topic, Rng& rng) {
  std::string n1 = rng.pick(t.nouns);
  std::string n2 = rng.pick(t.nouns);
  std::string v = rng.pick(t.verbs);
  std::string p = rng.pick(t.places);
  switch (rng.below(7)) {
    case 0:
      return {"More photos of the " + n1 + " are at www.example.com/gallery for everyone.", topic};
    case 1:
      return {"The " + n1 + " is " + v + " near the " + n2 + " again \xF0\x9F\x98\x80 today.", topic};
    case 2:
      return {"Lovely " + n1 + ".", topic};
    case 3: {
      std::string s = "The " + n1;
      for (int i = 0; i < 28; ++i) s += std::string(" and the ") + rng.pick(t.nouns);
      return {s + " are " + v + " at the " + p + ".", topic};
    }
    case 4:
      return {"The " + std::string(rng.pick(kAdjectives)) + " " + n1 + " and the " + n2 + " of the " + p + ".",
              topic};
    case 5:
      return {"Zorblat quixum vendral running flimsy orrery.", -1};
    default:
      return {"All rights are reserved and the page is running ads.", -1};
  }
}

}  // namespace

ToySummary write_toy_corpus(const std::filesystem::path& dir, const ToyOptions& options) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  Rng rng(options.seed);
  const std::size_t dim = options.dim;

  std::vector<std::vector<double>> topic_mu;
  for (std::size_t t = 0; t < kTopics.size(); ++t) topic_mu.push_back(unit(gaussian(rng, dim)));
  const std::vector<double> offtopic_mu = unit(gaussian(rng, dim));

  std::vector<Document> docs;
  std::vector<int> image_topic;
  std::vector<std::string> image_ids;
  std::vector<std::string> seen_sentences;
  std::unordered_map<std::string, int> sentence_topic;
  Json captions = Json::array();
  Json tags = Json::array();

  for (std::size_t d = 0; d < options.documents; ++d) {
    const int topic = static_cast<int>(rng.below(kTopics.size()));
    const Topic& t = kTopics[static_cast<std::size_t>(topic)];
    Document doc;
    char buf[32];
    std::snprintf(buf, sizeof buf, "doc-%03zu", d);
    doc.doc_id = buf;

    const std::size_t blocks = 2 + rng.below(2);
    const std::size_t n_images = 1 + rng.below(3);
    std::size_t images_left = n_images;
    for (std::size_t b = 0; b < blocks; ++b) {
      std::string block;
      const std::size_t n_sent = 2 + rng.below(3);
      for (std::size_t s = 0; s < n_sent; ++s) {
        SentenceKind k;
        if (rng.chance(0.10)) {
          k = noisy_sentence(t, topic, rng);
        } else if (!seen_sentences.empty() && rng.chance(0.05)) {
          k.text = seen_sentences[rng.below(seen_sentences.size())];
          k.topic = sentence_topic.at(k.text);
        } else {
          k = {topical_sentence(t, rng), topic};
        }
        if (!sentence_topic.contains(k.text)) {
          sentence_topic.emplace(k.text, k.topic);
          seen_sentences.push_back(k.text);
        }
        block += (block.empty() ? "" : " ") + k.text;
      }
      doc.segments.push_back(TextBlock{block});
      if (images_left > 0 && (rng.chance(0.7) || b + 1 == blocks)) {
        const std::size_t here = b + 1 == blocks ? images_left : 1;
        for (std::size_t i = 0; i < here; ++i) {
          ImageRef img;
          img.image_id = doc.doc_id + "-img" + std::to_string(n_images - images_left);
          --images_left;
          const double roll = rng.uniform();
          if (roll < 0.05) {
            img.width = 64 + static_cast<std::uint32_t>(rng.below(36));
            img.height = 300;
          } else if (roll < 0.09) {
            img.width = 1200;
            img.height = 300 + static_cast<std::uint32_t>(rng.below(99));
          } else {
            img.width = 320 + 32 * static_cast<std::uint32_t>(rng.below(20));
            img.height = 240 + 32 * static_cast<std::uint32_t>(rng.below(15));
          }
          img.uri = "https://images.example.org/" + img.image_id + ".jpg";
          image_ids.push_back(img.image_id);
          image_topic.push_back(topic);
          doc.segments.push_back(img);

          if (!rng.chance(0.03)) {
            std::string cap = std::string("a ") + rng.pick(kAdjectives) + " " + rng.pick(t.nouns) + " " +
                              rng.pick(t.verbs) + " in the " + rng.pick(t.places);
            captions.push_back({{"image_id", img.image_id}, {"caption", cap}});
          }
          Json tl = Json::array({rng.pick(t.nouns), rng.pick(t.nouns), rng.pick(t.places)});
          if (rng.chance(0.4)) tl.push_back("blurry");
          if (rng.chance(0.3)) tl.push_back(capitalize(rng.pick(t.nouns)));
          tags.push_back({{"image_id", img.image_id}, {"tags", tl}});
        }
      }
    }
    docs.push_back(std::move(doc));
  }

  ToySummary sum;
  sum.documents = docs.size();
  {
    std::string lines;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      lines += to_json(docs[d]).dump() + "\n";
      if (d == docs.size() / 4) {
        lines += "{\"doc_id\": \"broken\", \"segments\": [\n";
        ++sum.malformed_lines;
      }
      if (d == (3 * docs.size()) / 4) {
        lines += "{\"segments\": []}\n";
        ++sum.malformed_lines;
      }
    }
    write_file(dir / "documents.jsonl", lines);
  }

  // Image embeddings; about 6% are near-copies of an earlier image.
  std::vector<float> image_data;
  std::vector<std::vector<double>> image_vecs;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    std::vector<double> v;
    if (i > 0 && rng.chance(0.06)) {
      v = around(image_vecs[i - 1], rng, 0.02);
    } else {
      v = around(topic_mu[static_cast<std::size_t>(image_topic[i])], rng, 0.9);
    }
    append_row(image_data, v);
    image_vecs.push_back(std::move(v));
  }
  write_store(EmbeddingStore(image_ids, dim, std::move(image_data), true), dir / "image_embeddings.rseb");

  // Text embeddings are a function of the sentence text, so repeated
  // sentences get identical rows.
  Extraction ex = extract(docs);
  std::vector<std::string> sentence_ids;
  std::vector<float> text_data;
  for (const auto& s : ex.sentences) {
    Rng local(options.seed ^ fnv1a64(s.text));
    auto it = sentence_topic.find(s.text);
    const int topic = it == sentence_topic.end() ? -1 : it->second;
    const auto& mu = topic < 0 ? offtopic_mu : topic_mu[static_cast<std::size_t>(topic)];
    sentence_ids.push_back(s.sentence_id);
    append_row(text_data, around(mu, local, 0.9));
  }
  write_store(EmbeddingStore(sentence_ids, dim, std::move(text_data), true), dir / "text_embeddings.rseb");

  std::vector<std::string> synth_ids;
  std::vector<float> synth_data;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    for (std::size_t slot = 0; slot < options.synthetic_slots; ++slot) {
      const double c = 0.45 + 0.22 * rng.uniform();
      synth_ids.push_back(image_ids[i] + "#" + std::to_string(slot));
      append_row(synth_data, at_cosine(image_vecs[i], c, rng));
    }
  }
  write_store(EmbeddingStore(synth_ids, dim, std::move(synth_data), true), dir / "synthetic_embeddings.rseb");

  {
    JsonlWriter w(dir / "captions.jsonl");
    for (const auto& c : captions) w.write(c);
    w.close();
  }
  {
    JsonlWriter w(dir / "tags.jsonl");
    for (const auto& t : tags) w.write(t);
    w.close();
  }
  {
    std::string base = "# base tag set\n";
    for (const auto& t : kTopics) {
      for (std::size_t i = 0; i < 6; ++i) base += std::string(t.nouns[i]) + "\n";
    }
    write_file(dir / "base_tags.txt", base);
  }
  Json config = {
      {"inputs",
       {{"documents", "documents.jsonl"},
        {"image_embeddings", "image_embeddings.rseb"},
        {"text_embeddings", "text_embeddings.rseb"},
        {"synthetic_embeddings", "synthetic_embeddings.rseb"},
        {"captions", "captions.jsonl"},
        {"tags", "tags.jsonl"},
        {"base_tags", "base_tags.txt"}}},
      {"cluster", {{"text_k", 8}, {"image_k", 6}}},
      {"augment", {{"generator", "echo"}, {"slots", 1}, {"lexicon_target", 96}}},
      {"sampler", {{"preset", "15m"}}},
      {"seed", 7},
      {"run_dir", "run"},
  };
  write_file(dir / "config.json", config.dump(2) + "\n");

  sum.images = image_ids.size();
  sum.sentences = ex.sentences.size();
  return sum;
}

}  // namespace rsforge
