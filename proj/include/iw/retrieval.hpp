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

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iw/archive.hpp"
#include "iw/schema.hpp"

namespace iw {

struct TokenizerOptions {
  /// Light plural stripping (-ies, -es, -s).
  bool stem = false;
  /// Drop a short English stopword list.
  bool stopwords = false;

  bool operator==(const TokenizerOptions&) const = default;
};

struct Token {
  std::string term;
  std::size_t begin = 0;  // code point offsets into the source text
  std::size_t end = 0;
};

/// Lowercases, splits on non-alphanumeric code points and drops tokens
/// shorter than two code points.
std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& options = {});
std::vector<Token> tokenize_with_offsets(std::string_view text,
                                         const TokenizerOptions& options = {});

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct ContextParams {
  /// Multiplicative boost w: score = base * (1 + w) for context-matched IEs.
  double boost = 0.5;
  /// Weight of semantic expansion terms in the score sum.
  double expansion_weight = 0.3;
};

struct ScoringConfig {
  Bm25Params bm25;
  ContextParams context;
  TokenizerOptions tokenizer;

  /// Reads {"k1", "b", "w", "expansion_weight", "stem", "stopwords"}; absent keys keep defaults.
  static ScoringConfig from_json(const Json& j);
};

struct Posting {
  std::string ie;
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

struct IndexDocument {
  std::string id;
  std::string category;
  std::string body;
};

struct PostingsIndex {
  std::size_t doc_count = 0;
  std::map<std::string, std::size_t> doc_len;
  double avg_len = 0.0;
  std::map<std::string, std::vector<Posting>> postings;  // per term, by IE id
  std::map<std::string, std::size_t> df;
  std::map<std::string, std::string> doc_category;
  std::uint64_t built_at_seq = 0;
  TokenizerOptions tokenizer;

  double idf(std::string_view term) const;
  Json to_json() const;
  static PostingsIndex from_json(const Json& j);
  /// Canonical form; byte-equal for equal indexes.
  std::string serialize() const;
};

PostingsIndex build_index(std::span<const IndexDocument> documents, std::uint64_t seq,
                          const TokenizerOptions& options = {});
/// Indexes every non-retracted IE body at the state's current seq.
PostingsIndex build_index(const ArchiveState& archive, const TokenizerOptions& options = {});

struct HitLink {
  std::string ie;
  std::string relation;  // "DS-out", "RS-in", ...
  std::string label;     // supports / supported-by / refers / referred-by
  std::string category;

  bool operator==(const HitLink&) const = default;
};

struct Hit {
  std::string ie;
  double score = 0.0;
  double base_score = 0.0;
  bool boosted = false;
  std::string category;
  /// Query or expansion terms present in the IE.
  std::vector<std::string> matched_terms;
  // Filled by annotate_hits.
  std::string snippet;
  std::vector<HitLink> neighbors;
  std::vector<std::string> concepts;

  Json to_json() const;
};

/// Top-k BM25. Ties break by IE id ascending. Throws invalid_argument for k = 0.
std::vector<Hit> search(const PostingsIndex& index, std::string_view query, std::size_t k,
                        const Bm25Params& params = {});

struct WorkContext {
  std::string instance;
  std::string activity_category;
  SchemaRef schema;
};

/// Expansion terms contributed by concepts linked to the content categories
/// associated with `activity`, for concept groups whose labels a query term hits.
std::vector<std::string> expansion_terms(const TaskTypeSchema& schema, std::string_view activity,
                                         std::span<const std::string> query_terms,
                                         const TokenizerOptions& options = {});

/// BM25 with work-context boost and optional semantic expansion. Throws
/// unresolvable_context when `ctx` does not resolve against `schema`.
std::vector<Hit> contextual_search(const PostingsIndex& index, const TaskTypeSchema& schema,
                                   std::string_view query, const WorkContext& ctx, std::size_t k,
                                   bool semantic, const ScoringConfig& config = {});

constexpr std::size_t kSnippetLength = 160;

/// Adds snippet, depth-1 episodic neighbors, and linked concepts.
std::vector<Hit> annotate_hits(const ArchiveState& archive, std::vector<Hit> hits,
                               const TokenizerOptions& options = {});

}  // namespace iw
