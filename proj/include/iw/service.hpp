// Copyright 2026 The iwarehouse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "iw/archive.hpp"
#include "iw/retrieval.hpp"

namespace iw {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path archive_dir = "archive";
  ScoringConfig scoring;
  std::vector<std::string> admin_actors{"admin"};
  /// Deterministic ids and clock for the archive (tests, demos).
  std::optional<std::uint64_t> seed;
  /// Rebuild the index before a search when it lags the journal.
  bool auto_reindex = false;

  /// Relative archive_dir values resolve against `base_dir`.
  static ServiceConfig from_json(const Json& doc, const std::filesystem::path& base_dir = {});
  static ServiceConfig load(const std::filesystem::path& file);
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  /// Value of "Authorization: Bearer <token>", without the prefix.
  std::string bearer;
};

struct ApiResponse {
  int status = 200;
  Json body;
};

struct ApiSession {
  std::string token;
  std::string actor;
  Millis created_at = 0;
  bool admin = false;
};

struct IndexStatus {
  std::uint64_t built_at_seq = 0;
  std::size_t documents = 0;
};

/// Transport-independent backend: routes JSON requests onto the archive
/// and the retrieval engine. All methods are safe to call concurrently.
class Service {
 public:
  Service(Archive& archive, ServiceConfig config);

  ApiResponse handle(const ApiRequest& request);

  std::shared_ptr<const PostingsIndex> index() const;
  /// Builds a fresh index at the current seq and swaps it in.
  IndexStatus reindex();
  /// Test hook, runs after a build and before the swap.
  void set_before_swap_hook(std::function<void()> hook);

  const ServiceConfig& config() const { return config_; }
  Archive& archive() { return archive_; }

 private:
  ApiResponse route(const ApiRequest& request);
  ApiSession authenticate(const ApiRequest& request) const;
  ApiSession create_session(const std::string& actor);

  Archive& archive_;
  ServiceConfig config_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, ApiSession> sessions_;

  mutable std::mutex index_mutex_;
  std::shared_ptr<const PostingsIndex> index_;
  std::mutex rebuild_mutex_;
  std::function<void()> before_swap_;
};

/// HTTP/1.1 front end for a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Blocks.
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace iw
