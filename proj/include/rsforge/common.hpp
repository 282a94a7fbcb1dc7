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

// Shared error types, worker control, hashing and small text helpers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace rsforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk data (bad magic, truncated file, schema violation).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Workers

/// Worker count from RSFORGE_WORKERS, falling back to `fallback` (or the
/// OpenMP default when `fallback` is empty). Always >= 1.
int workers_from_env(std::optional<int> fallback = std::nullopt);

/// Sets the OpenMP team size used by every parallel kernel.
void set_workers(int workers);
int current_workers();

/// Restores the previous worker count on scope exit.
class ScopedWorkers {
 public:
  explicit ScopedWorkers(int workers);
  ~ScopedWorkers();
  ScopedWorkers(const ScopedWorkers&) = delete;
  ScopedWorkers& operator=(const ScopedWorkers&) = delete;

 private:
  int previous_;
};

// ---------------------------------------------------------------------------
// Hashing (stable across platforms and runs; not cryptographic)

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);
std::string hex64(std::uint64_t value);
/// FNV-1a digest of a file's bytes, as 16 hex characters.
std::string file_digest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Text

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
/// Whitespace-delimited tokens, verbatim.
std::vector<std::string_view> split_whitespace(std::string_view s);
/// Lowercased whitespace tokens with leading/trailing ASCII punctuation
/// stripped; tokens that become empty are dropped. Shared by corpus
/// statistics, the n-gram model and tag mining.
std::vector<std::string> word_tokens(std::string_view s);

/// Decodes UTF-8; invalid bytes decode as U+FFFD and advance one byte.
std::vector<char32_t> decode_utf8(std::string_view s);

/// Parses a newline-separated word list. Blank lines and lines starting
/// with '#' are skipped; entries are trimmed.
std::vector<std::string> parse_word_list(std::string_view text);
std::vector<std::string> read_word_list(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace rsforge
