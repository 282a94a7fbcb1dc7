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

#include "rsforge/corpus.hpp"

#include <cctype>
#include <limits>

#include "rsforge/default_lexicons.hpp"

namespace rsforge {

namespace {

const std::string& require_string(const Json& j, const char* key, std::string_view what) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string(what) + " missing \"" + key + "\"");
  if (!it->is_string()) throw FormatError(std::string(what) + " field \"" + key + "\" is not a string");
  return it->get_ref<const std::string&>();
}

std::uint32_t require_dimension(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string("image segment missing \"") + key + "\"");
  if (!it->is_number_integer()) throw FormatError(std::string("image ") + key + " is not an integer");
  auto v = it->get<std::int64_t>();
  if (v < 1 || v > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError(std::string("image ") + key + " must be >= 1, got " + std::to_string(v));
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

Document document_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("document is not a JSON object");
  Document doc;
  doc.doc_id = require_string(j, "doc_id", "document");
  if (doc.doc_id.empty()) throw FormatError("document has empty doc_id");
  auto segs = j.find("segments");
  if (segs == j.end() || !segs->is_array()) throw FormatError("document missing \"segments\" array");
  if (segs->empty()) throw FormatError("document " + doc.doc_id + " has no segments");
  for (const Json& s : *segs) {
    if (!s.is_object()) throw FormatError("segment is not an object");
    const std::string& type = require_string(s, "type", "segment");
    if (type == "text") {
      doc.segments.emplace_back(TextBlock{require_string(s, "text", "text segment")});
    } else if (type == "image") {
      ImageRef img;
      img.image_id = require_string(s, "image_id", "image segment");
      if (img.image_id.empty()) throw FormatError("image segment has empty image_id");
      img.width = require_dimension(s, "width");
      img.height = require_dimension(s, "height");
      img.uri = require_string(s, "uri", "image segment");
      doc.segments.emplace_back(std::move(img));
    } else {
      throw FormatError("unknown segment type \"" + type + "\"");
    }
  }
  return doc;
}

Json to_json(const Document& doc) {
  Json segs = Json::array();
  for (const Segment& seg : doc.segments) {
    if (const auto* t = std::get_if<TextBlock>(&seg)) {
      segs.push_back({{"type", "text"}, {"text", t->text}});
    } else {
      const auto& img = std::get<ImageRef>(seg);
      segs.push_back({{"type", "image"},
                      {"image_id", img.image_id},
                      {"width", img.width},
                      {"height", img.height},
                      {"uri", img.uri}});
    }
  }
  return {{"doc_id", doc.doc_id}, {"segments", std::move(segs)}};
}

Json to_json(const ImageRecord& rec) {
  return {{"image_id", rec.image_id}, {"width", rec.width},   {"height", rec.height},
          {"doc_id", rec.doc_id},     {"uri", rec.uri}};
}

Json to_json(const SentenceRecord& rec) {
  return {{"sentence_id", rec.sentence_id},
          {"text", rec.text},
          {"doc_id", rec.doc_id},
          {"ordinal", rec.ordinal}};
}

ImageRecord image_record_from_json(const Json& j) {
  ImageRecord rec;
  rec.image_id = require_string(j, "image_id", "image record");
  rec.width = require_dimension(j, "width");
  rec.height = require_dimension(j, "height");
  rec.doc_id = require_string(j, "doc_id", "image record");
  rec.uri = require_string(j, "uri", "image record");
  return rec;
}

SentenceRecord sentence_record_from_json(const Json& j) {
  SentenceRecord rec;
  rec.sentence_id = require_string(j, "sentence_id", "sentence record");
  rec.text = require_string(j, "text", "sentence record");
  rec.doc_id = require_string(j, "doc_id", "sentence record");
  rec.ordinal = j.at("ordinal").get<std::uint32_t>();
  return rec;
}

std::vector<ImageRecord> read_image_records(const std::filesystem::path& path) {
  std::vector<ImageRecord> out;
  for (const Json& j : read_jsonl(path)) out.push_back(image_record_from_json(j));
  return out;
}

std::vector<SentenceRecord> read_sentence_records(const std::filesystem::path& path) {
  std::vector<SentenceRecord> out;
  for (const Json& j : read_jsonl(path)) out.push_back(sentence_record_from_json(j));
  return out;
}

void write_image_records(const std::filesystem::path& path, std::span<const ImageRecord> recs) {
  JsonlWriter w(path);
  for (const auto& r : recs) w.write(to_json(r));
  w.close();
}

void write_sentence_records(const std::filesystem::path& path,
                            std::span<const SentenceRecord> recs) {
  JsonlWriter w(path);
  for (const auto& r : recs) w.write(to_json(r));
  w.close();
}

DocumentReader::DocumentReader(const std::filesystem::path& path)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw Error("cannot open '" + path.string() + "' for reading");
}

std::optional<Document> DocumentReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (trim(line).empty()) continue;
    try {
      return document_from_json(Json::parse(line));
    } catch (const Json::exception& e) {
      errors_.push_back({line_, e.what()});
    } catch (const FormatError& e) {
      errors_.push_back({line_, e.what()});
    }
  }
  return std::nullopt;
}

ParsedDocuments parse_documents(const std::filesystem::path& path) {
  DocumentReader reader(path);
  ParsedDocuments out;
  while (auto doc = reader.next()) out.documents.push_back(std::move(*doc));
  out.errors = reader.errors();
  return out;
}

// ---------------------------------------------------------------------------
// Sentence splitting

namespace {

const std::unordered_set<std::string>& default_abbreviations() {
  static const std::unordered_set<std::string> set = [] {
    auto words = parse_word_list(detail::kDefaultAbbreviations);
    return std::unordered_set<std::string>(words.begin(), words.end());
  }();
  return set;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool starts_with_at(std::string_view text, std::size_t pos, std::string_view what) {
  return text.substr(pos, what.size()) == what;
}

// Length of a closing quote/bracket at `pos`, or 0.
std::size_t closer_length(std::string_view text, std::size_t pos) {
  char c = text[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
  if (starts_with_at(text, pos, "\xE2\x80\x9D") || starts_with_at(text, pos, "\xE2\x80\x99")) return 3;
  return 0;
}

bool opens_sentence(std::string_view text, std::size_t pos) {
  char c = text[pos];
  if ((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '"' || c == '\'' || c == '(') {
    return true;
  }
  return starts_with_at(text, pos, "\xE2\x80\x9C") || starts_with_at(text, pos, "\xE2\x80\x98");
}

}  // namespace

SentenceSplitter::SentenceSplitter() : abbreviations_(default_abbreviations()) {}

SentenceSplitter::SentenceSplitter(std::vector<std::string> abbreviations)
    : abbreviations_(abbreviations.begin(), abbreviations.end()) {}

SentenceSplitter SentenceSplitter::from_file(const std::filesystem::path& path) {
  return SentenceSplitter(read_word_list(path));
}

bool SentenceSplitter::is_abbreviation(std::string_view token) const {
  while (!token.empty() && (token.front() == '(' || token.front() == '[' ||
                            token.front() == '"' || token.front() == '\'')) {
    token.remove_prefix(1);
  }
  return abbreviations_.contains(std::string(token));
}

std::vector<std::string> SentenceSplitter::split(std::string_view text) const {
  std::vector<std::string> out;
  auto emit = [&](std::size_t begin, std::size_t end) {
    std::string_view s = trim(text.substr(begin, end - begin));
    if (!s.empty()) out.emplace_back(s);
  };

  const std::size_t n = text.size();
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < n) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < n && (text[end] == '.' || text[end] == '!' || text[end] == '?')) ++end;
    while (end < n) {
      std::size_t len = closer_length(text, end);
      if (len == 0) break;
      end += len;
    }
    if (end >= n || !is_space(text[end])) {
      i = end;
      continue;
    }
    std::size_t next = end;
    while (next < n && is_space(text[next])) ++next;
    if (next >= n || !opens_sentence(text, next)) {
      i = next;
      continue;
    }
    if (c == '.' && end == i + 1) {
      std::size_t tok_begin = i;
      while (tok_begin > start && !is_space(text[tok_begin - 1])) --tok_begin;
      if (is_abbreviation(text.substr(tok_begin, i + 1 - tok_begin))) {
        i = next;
        continue;
      }
    }
    emit(start, end);
    start = next;
    i = next;
  }
  emit(start, n);
  return out;
}

std::string sentence_id_for(std::string_view doc_id, std::uint32_t ordinal) {
  return std::string(doc_id) + "#s" + std::to_string(ordinal);
}

std::vector<SentenceRecord> segment_sentences(const TextBlock& block, std::string_view doc_id,
                                              std::uint32_t base_ordinal,
                                              const SentenceSplitter& splitter) {
  std::vector<SentenceRecord> out;
  std::uint32_t ordinal = base_ordinal;
  for (std::string& s : splitter.split(block.text)) {
    out.push_back({sentence_id_for(doc_id, ordinal), std::move(s), std::string(doc_id), ordinal});
    ++ordinal;
  }
  return out;
}

Extraction extract(std::span<const Document> docs, const SentenceSplitter& splitter) {
  std::unordered_set<std::string> doc_ids;
  std::unordered_set<std::string> image_ids;
  for (const Document& doc : docs) {
    if (!doc_ids.insert(doc.doc_id).second) throw Error("duplicate doc_id '" + doc.doc_id + "'");
    for (const Segment& seg : doc.segments) {
      if (const auto* img = std::get_if<ImageRef>(&seg)) {
        if (!image_ids.insert(img->image_id).second) {
          throw Error("duplicate image_id '" + img->image_id + "' (document " + doc.doc_id + ")");
        }
      }
    }
  }

  // Segment in parallel, then concatenate in document order.
  const auto n = static_cast<std::ptrdiff_t>(docs.size());
  std::vector<std::vector<ImageRecord>> images(docs.size());
  std::vector<std::vector<SentenceRecord>> sentences(docs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t d = 0; d < n; ++d) {
    const Document& doc = docs[static_cast<std::size_t>(d)];
    std::uint32_t ordinal = 0;
    for (const Segment& seg : doc.segments) {
      if (const auto* img = std::get_if<ImageRef>(&seg)) {
        images[static_cast<std::size_t>(d)].push_back(
            {img->image_id, img->width, img->height, doc.doc_id, img->uri});
      } else {
        auto recs = segment_sentences(std::get<TextBlock>(seg), doc.doc_id, ordinal, splitter);
        ordinal += static_cast<std::uint32_t>(recs.size());
        auto& dst = sentences[static_cast<std::size_t>(d)];
        dst.insert(dst.end(), std::make_move_iterator(recs.begin()),
                   std::make_move_iterator(recs.end()));
      }
    }
  }

  Extraction out;
  out.stats.documents = docs.size();
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (auto& r : images[d]) out.images.push_back(std::move(r));
    for (auto& r : sentences[d]) out.sentences.push_back(std::move(r));
  }
  out.stats.images = out.images.size();
  out.stats.sentences = out.sentences.size();
  return out;
}

}  // namespace rsforge
