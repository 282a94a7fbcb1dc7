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

#include <chrono>
#include <cstdio>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "rsforge/augment.hpp"

namespace rsforge {

/// In-process mock: answers each prompt with its payload suffix, i.e. the
/// text from "Raw caption:" to the end.
class EchoClient final : public GenerationClient {
 public:
  std::vector<ItemOutcome> generate(std::span<const WireRequest> batch) override;
  static std::string echo(std::string_view prompt);
};

/// Line-delimited channel: writes one request object per line to `out`,
/// then reads one response object per line from `in` and matches by id.
/// Calls are serialized.
class StreamGenerationClient final : public GenerationClient {
 public:
  StreamGenerationClient(std::istream& in, std::ostream& out);
  std::vector<ItemOutcome> generate(std::span<const WireRequest> batch) override;

 private:
  std::istream& in_;
  std::ostream& out_;
  std::mutex mu_;
};

/// Line-delimited channel to a child process started with /bin/sh -c.
class ProcessGenerationClient final : public GenerationClient {
 public:
  explicit ProcessGenerationClient(std::string command);
  ~ProcessGenerationClient() override;
  ProcessGenerationClient(const ProcessGenerationClient&) = delete;
  ProcessGenerationClient& operator=(const ProcessGenerationClient&) = delete;

  std::vector<ItemOutcome> generate(std::span<const WireRequest> batch) override;

 private:
  std::string command_;
  int pid_ = -1;
  std::FILE* to_child_ = nullptr;
  std::FILE* from_child_ = nullptr;
  std::mutex mu_;
};

/// POSTs a JSON array of requests to `url` (http://host:port/path) and
/// expects a JSON array of responses. Connection errors and 5xx are
/// transient; other non-200 statuses are permanent.
class HttpGenerationClient final : public GenerationClient {
 public:
  explicit HttpGenerationClient(std::string url,
                                std::chrono::seconds timeout = std::chrono::seconds(120));
  std::vector<ItemOutcome> generate(std::span<const WireRequest> batch) override;

 private:
  std::string host_;
  int port_ = 80;
  std::string path_;
  std::chrono::seconds timeout_;
};

/// Matches parsed response lines to a batch by id. Missing or unparsable
/// responses are permanent parse failures.
std::vector<ItemOutcome> match_responses(std::span<const WireRequest> batch,
                                         std::span<const std::string> response_lines);

/// "echo", "http://host:port/path" or "cmd:<shell command>".
std::unique_ptr<GenerationClient> make_generation_client(std::string_view spec);

}  // namespace rsforge
