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

// Test-only helpers: fixture loading and independent oracles. The oracles
// work from raw data (export JSON, edge lists, plain strings) and share no
// code with the engine paths they check.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "iw/archive.hpp"
#include "iw/scenario.hpp"
#include "iw/schema.hpp"

namespace iw::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(IW_FIXTURES_DIR) / name;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline TaskTypeSchema patient_care() {
  return parse_schema(read_text(fixture("patient-care.schema.json")));
}

struct Replayed {
  std::unique_ptr<Archive> archive;
  ReplayResult ids;
};

inline Replayed replay_fixture(const std::string& script, std::uint64_t seed = 7) {
  Replayed r;
  ArchiveOptions options;
  options.seed = seed;
  r.archive = std::make_unique<Archive>(options);
  r.ids = replay(ScenarioScript::load(fixture(script)), *r.archive);
  return r;
}

/// Fresh temporary directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("iw-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Traversal oracles

struct RawEdge {
  std::string from, to, kind;
};

inline std::vector<RawEdge> raw_edges(const Json& exported) {
  std::vector<RawEdge> out;
  for (const auto& e : exported.at("edges")) {
    out.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                   e.at("kind").get<std::string>()});
  }
  return out;
}

/// Node -> hop count for an undirected walk of depth <= `depth`, rescanning the
/// full edge list at every level.
inline std::map<std::string, int> bidirectional_bfs(const std::vector<RawEdge>& edges,
                                                    const std::string& start, int depth) {
  std::map<std::string, int> dist{{start, 0}};
  for (int level = 1; level <= depth; ++level) {
    std::vector<std::string> found;
    for (const auto& e : edges) {
      auto f = dist.find(e.from);
      auto t = dist.find(e.to);
      if (f != dist.end() && f->second == level - 1 && t == dist.end()) found.push_back(e.to);
      if (t != dist.end() && t->second == level - 1 && f == dist.end()) found.push_back(e.from);
    }
    for (const auto& n : found) dist.emplace(n, level);
  }
  return dist;
}

/// Directed BFS over schema flow edges; forward = follow from->to.
inline std::map<std::string, int> flow_bfs(const Json& schema_doc, const std::string& start,
                                           int radius, bool forward) {
  std::map<std::string, int> dist{{start, 0}};
  for (int level = 1; level <= radius; ++level) {
    std::vector<std::string> found;
    for (const auto& e : schema_doc.at("flow_edges")) {
      const auto src = e.at(forward ? "from" : "to").get<std::string>();
      const auto dst = e.at(forward ? "to" : "from").get<std::string>();
      auto s = dist.find(src);
      if (s != dist.end() && s->second == level - 1 && !dist.contains(dst)) found.push_back(dst);
    }
    for (const auto& n : found) dist.emplace(n, level);
  }
  dist.erase(start);
  return dist;
}

// ---------------------------------------------------------------------------
// BM25 oracle

inline std::vector<std::string> ascii_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

/// Brute-force BM25 over (id, body) pairs. Distinct query terms, each weighted
/// by `weights` (default 1).
inline std::map<std::string, double> bm25_oracle(
    const std::vector<std::pair<std::string, std::string>>& docs, const std::string& query,
    double k1 = 1.2, double b = 0.75, const std::map<std::string, double>& extra_terms = {}) {
  std::map<std::string, std::vector<std::string>> toks;
  double total = 0;
  for (const auto& [id, body] : docs) {
    toks[id] = ascii_tokens(body);
    total += static_cast<double>(toks[id].size());
  }
  const double n = static_cast<double>(docs.size());
  const double avg = total / n;
  std::map<std::string, double> weights;
  for (const auto& t : ascii_tokens(query)) weights[t] = 1.0;
  for (const auto& [t, w] : extra_terms) weights.emplace(t, w);
  std::map<std::string, double> scores;
  for (const auto& [term, w] : weights) {
    double df = 0;
    for (const auto& [id, t] : toks) df += std::count(t.begin(), t.end(), term) > 0 ? 1 : 0;
    if (df == 0) continue;
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const auto& [id, t] : toks) {
      const double tf = static_cast<double>(std::count(t.begin(), t.end(), term));
      if (tf == 0) continue;
      const double dl = static_cast<double>(t.size());
      scores[id] += w * idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avg));
    }
  }
  return scores;
}

}  // namespace iw::testing
