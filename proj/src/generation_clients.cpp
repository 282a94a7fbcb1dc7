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

#include "rsforge/generation_clients.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "httplib.h"

namespace rsforge {

std::string EchoClient::echo(std::string_view prompt) {
  auto pos = prompt.rfind("Raw caption:");
  return std::string(pos == std::string_view::npos ? prompt : prompt.substr(pos));
}

std::vector<ItemOutcome> EchoClient::generate(std::span<const WireRequest> batch) {
  std::vector<ItemOutcome> out;
  out.reserve(batch.size());
  for (const auto& r : batch) out.push_back(ItemOutcome::success(echo(r.prompt)));
  return out;
}

std::vector<ItemOutcome> match_responses(std::span<const WireRequest> batch,
                                         std::span<const std::string> response_lines) {
  std::unordered_map<std::string, ItemOutcome> by_id;
  std::vector<ItemOutcome> positional;
  for (const auto& line : response_lines) {
    try {
      ParsedGeneration p = parse_generation_response(line);
      if (p.id.empty()) {
        positional.push_back(ItemOutcome::success(std::move(p.text)));
      } else {
        by_id.emplace(p.id, ItemOutcome::success(std::move(p.text)));
      }
    } catch (const GenerationParseError& e) {
      positional.push_back(ItemOutcome::fail(e.what()));
    }
  }
  std::vector<ItemOutcome> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (auto it = by_id.find(batch[i].id); it != by_id.end()) {
      out.push_back(it->second);
    } else if (by_id.empty() && i < positional.size()) {
      out.push_back(positional[i]);
    } else {
      out.push_back(ItemOutcome::fail("parse_error: no response for id '" + batch[i].id + "'"));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

StreamGenerationClient::StreamGenerationClient(std::istream& in, std::ostream& out)
    : in_(in), out_(out) {}

std::vector<ItemOutcome> StreamGenerationClient::generate(std::span<const WireRequest> batch) {
  std::lock_guard lock(mu_);
  for (const auto& r : batch) out_ << to_json(r).dump() << '\n';
  out_.flush();
  if (!out_) throw TransientError("generation channel closed for writing");
  std::vector<std::string> lines;
  std::string line;
  while (lines.size() < batch.size() && std::getline(in_, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  if (lines.size() < batch.size()) {
    in_.clear();
    throw TransientError("generation channel closed after " + std::to_string(lines.size()) + " of " +
                         std::to_string(batch.size()) + " responses");
  }
  return match_responses(batch, lines);
}

// ---------------------------------------------------------------------------

ProcessGenerationClient::ProcessGenerationClient(std::string command) : command_(std::move(command)) {
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0) throw Error("pipe() failed for generator process");
  pid_ = fork();
  if (pid_ < 0) throw Error("fork() failed for generator process");
  if (pid_ == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  to_child_ = fdopen(to_child[1], "w");
  from_child_ = fdopen(from_child[0], "r");
  if (!to_child_ || !from_child_) throw Error("fdopen() failed for generator process");
  signal(SIGPIPE, SIG_IGN);
}

ProcessGenerationClient::~ProcessGenerationClient() {
  if (to_child_) std::fclose(to_child_);
  if (from_child_) std::fclose(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

std::vector<ItemOutcome> ProcessGenerationClient::generate(std::span<const WireRequest> batch) {
  std::lock_guard lock(mu_);
  for (const auto& r : batch) {
    std::string line = to_json(r).dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), to_child_) != line.size()) {
      throw Error("generator process '" + command_ + "' closed its input");
    }
  }
  std::fflush(to_child_);
  std::vector<std::string> lines;
  char* buf = nullptr;
  std::size_t cap = 0;
  while (lines.size() < batch.size()) {
    ssize_t n = getline(&buf, &cap, from_child_);
    if (n < 0) break;
    std::string line(buf, static_cast<std::size_t>(n));
    if (!trim(line).empty()) lines.push_back(std::move(line));
  }
  std::free(buf);
  if (lines.size() < batch.size()) {
    throw Error("generator process '" + command_ + "' exited after " + std::to_string(lines.size()) +
                " of " + std::to_string(batch.size()) + " responses");
  }
  return match_responses(batch, lines);
}

// ---------------------------------------------------------------------------

HttpGenerationClient::HttpGenerationClient(std::string url, std::chrono::seconds timeout)
    : timeout_(timeout) {
  constexpr std::string_view kScheme = "http://";
  if (url.rfind(kScheme, 0) != 0) throw Error("generation URL must start with http://, got '" + url + "'");
  std::string rest = url.substr(kScheme.size());
  auto slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  auto colon = authority.rfind(':');
  if (colon != std::string::npos) {
    host_ = authority.substr(0, colon);
    port_ = std::stoi(authority.substr(colon + 1));
  } else {
    host_ = authority;
  }
  if (host_.empty()) throw Error("generation URL has no host: '" + url + "'");
}

std::vector<ItemOutcome> HttpGenerationClient::generate(std::span<const WireRequest> batch) {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  cli.set_write_timeout(timeout_);
  Json body = Json::array();
  for (const auto& r : batch) body.push_back(to_json(r));
  auto res = cli.Post(path_, body.dump(), "application/json");
  if (!res) throw TransientError("HTTP request to " + host_ + " failed: " + httplib::to_string(res.error()));
  if (res->status >= 500) throw TransientError("HTTP " + std::to_string(res->status) + " from " + host_);
  if (res->status != 200) {
    std::vector<ItemOutcome> out(batch.size(), ItemOutcome::fail("HTTP " + std::to_string(res->status)));
    return out;
  }
  Json parsed;
  try {
    parsed = Json::parse(res->body);
  } catch (const Json::exception& e) {
    return std::vector<ItemOutcome>(batch.size(), ItemOutcome::fail(std::string("parse_error: ") + e.what()));
  }
  if (!parsed.is_array()) {
    return std::vector<ItemOutcome>(batch.size(), ItemOutcome::fail("parse_error: response is not an array"));
  }
  std::vector<std::string> lines;
  for (const auto& item : parsed) lines.push_back(item.dump());
  return match_responses(batch, lines);
}

std::unique_ptr<GenerationClient> make_generation_client(std::string_view spec) {
  if (spec == "echo") return std::make_unique<EchoClient>();
  if (spec.rfind("http://", 0) == 0) return std::make_unique<HttpGenerationClient>(std::string(spec));
  if (spec.rfind("cmd:", 0) == 0) return std::make_unique<ProcessGenerationClient>(std::string(spec.substr(4)));
  throw Error("unknown generator '" + std::string(spec) + "' (expected echo, http://... or cmd:...)");
}

}  // namespace rsforge
