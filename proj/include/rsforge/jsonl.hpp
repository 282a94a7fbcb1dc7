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

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rsforge/common.hpp"

namespace rsforge {

using Json = nlohmann::json;

/// Calls `fn(line_number, line)` for every non-empty line (1-based numbers).
/// Trailing '\r' is not stripped: the formats are LF-only.
inline void for_each_line(const std::filesystem::path& path,
                          const std::function<void(std::size_t, std::string_view)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    fn(number, line);
  }
}

/// Strict JSONL reader: any malformed line is fatal and names the line.
inline std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::vector<Json> out;
  for_each_line(path, [&](std::size_t number, std::string_view line) {
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  });
  return out;
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot open '" + path.string() + "' for writing");
  }

  void write(const Json& value) {
    out_ << value.dump() << '\n';
    ++count_;
  }

  void close() {
    out_.close();
    if (!out_) throw Error("short write to '" + path_.string() + "'");
  }

  std::size_t count() const { return count_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

}  // namespace rsforge
