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

// Interleaved document model, documents.jsonl parsing, sentence
// segmentation and extraction of image / sentence record streams.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include "rsforge/jsonl.hpp"

namespace rsforge {

struct TextBlock {
  std::string text;
  bool operator==(const TextBlock&) const = default;
};

struct ImageRef {
  std::string image_id;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::string uri;
  bool operator==(const ImageRef&) const = default;
};

using Segment = std::variant<TextBlock, ImageRef>;

struct Document {
  std::string doc_id;
  std::vector<Segment> segments;
  bool operator==(const Document&) const = default;
};

struct SentenceRecord {
  std::string sentence_id;
  std::string text;
  std::string doc_id;
  std::uint32_t ordinal = 0;
  bool operator==(const SentenceRecord&) const = default;
};

struct ImageRecord {
  std::string image_id;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::string doc_id;
  std::string uri;
  bool operator==(const ImageRecord&) const = default;
};

/// Validates and converts one documents.jsonl object. Throws FormatError.
Document document_from_json(const Json& j);
Json to_json(const Document& doc);

Json to_json(const ImageRecord& rec);
Json to_json(const SentenceRecord& rec);
ImageRecord image_record_from_json(const Json& j);
SentenceRecord sentence_record_from_json(const Json& j);

std::vector<ImageRecord> read_image_records(const std::filesystem::path& path);
std::vector<SentenceRecord> read_sentence_records(const std::filesystem::path& path);
void write_image_records(const std::filesystem::path& path, std::span<const ImageRecord> recs);
void write_sentence_records(const std::filesystem::path& path,
                            std::span<const SentenceRecord> recs);

struct LineError {
  std::size_t line = 0;
  std::string message;
};

/// Streaming reader over documents.jsonl. Malformed lines are recorded in
/// errors() and skipped; an unreadable file throws on construction.
class DocumentReader {
 public:
  explicit DocumentReader(const std::filesystem::path& path);

  std::optional<Document> next();
  const std::vector<LineError>& errors() const { return errors_; }
  std::size_t lines_read() const { return line_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
  std::vector<LineError> errors_;
};

struct ParsedDocuments {
  std::vector<Document> documents;
  std::vector<LineError> errors;
};

ParsedDocuments parse_documents(const std::filesystem::path& path);

/// Rule-based splitter: a sentence ends at '.', '!' or '?' (plus any closing
/// quotes/brackets) followed by whitespace and then an uppercase letter, a
/// digit or an opening quote. A '.' ending a listed abbreviation never ends
/// a sentence.
class SentenceSplitter {
 public:
  /// Uses the abbreviation list compiled in from data/abbreviations.txt.
  SentenceSplitter();
  explicit SentenceSplitter(std::vector<std::string> abbreviations);
  static SentenceSplitter from_file(const std::filesystem::path& path);

  std::vector<std::string> split(std::string_view text) const;
  bool is_abbreviation(std::string_view token) const;

 private:
  std::unordered_set<std::string> abbreviations_;
};

std::string sentence_id_for(std::string_view doc_id, std::uint32_t ordinal);

std::vector<SentenceRecord> segment_sentences(const TextBlock& block, std::string_view doc_id,
                                              std::uint32_t base_ordinal,
                                              const SentenceSplitter& splitter = SentenceSplitter());

struct ExtractionStats {
  std::size_t documents = 0;
  std::size_t images = 0;
  std::size_t sentences = 0;
};

struct Extraction {
  std::vector<ImageRecord> images;
  std::vector<SentenceRecord> sentences;
  ExtractionStats stats;
};

/// Emits records in document order then segment order. Sentence ordinals
/// are document-global. Duplicate doc_id or image_id throws Error.
Extraction extract(std::span<const Document> docs,
                   const SentenceSplitter& splitter = SentenceSplitter());

}  // namespace rsforge
