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

#include "iw/retrieval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "iw/error.hpp"

namespace iw {

namespace {

struct CodePoint {
  char32_t value;
  std::size_t byte;  // offset of its first byte
};

std::vector<CodePoint> decode_utf8(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    int len = 1;
    char32_t cp = c;
    if (c >= 0xF0 && c < 0xF8) {
      len = 4;
      cp = c & 0x07;
    } else if (c >= 0xE0) {
      len = c < 0xF0 ? 3 : 1;
      cp = c & 0x0F;
    } else if (c >= 0xC0) {
      len = 2;
      cp = c & 0x1F;
    }
    if (len > 1 && i + len <= text.size()) {
      for (int k = 1; k < len; ++k) {
        const auto cc = static_cast<unsigned char>(text[i + k]);
        if ((cc & 0xC0) != 0x80) {
          len = 1;
          break;
        }
        cp = (cp << 6) | (cc & 0x3F);
      }
    } else {
      len = 1;
    }
    if (len == 1 && c >= 0x80) cp = 0xFFFD;  // invalid byte
    out.push_back({cp, i});
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  if (cp == 0xFFFD) return false;
  if (cp <= 0xBF) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;  // Latin-1 punctuation/symbols
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, symbols, arrows, box drawing
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;  // emoji and pictographs
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

constexpr std::array<std::string_view, 33> kStopwords = {
    "a",    "an",   "and",  "are",  "as",   "at",   "be",   "but",  "by",   "for",  "if",
    "in",   "into", "is",   "it",   "no",   "not",  "of",   "on",   "or",   "such", "that",
    "the",  "their", "then", "there", "these", "they", "this", "to",  "was",  "will", "with"};

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Harman's S-stemmer.
std::string stem(std::string term) {
  if (ends_with(term, "ies") && !ends_with(term, "eies") && !ends_with(term, "aies")) {
    term.replace(term.size() - 3, 3, "y");
  } else if (ends_with(term, "es") && !ends_with(term, "aes") && !ends_with(term, "ees") &&
             !ends_with(term, "oes")) {
    term.pop_back();
  } else if (ends_with(term, "s") && !ends_with(term, "us") && !ends_with(term, "ss")) {
    term.pop_back();
  }
  return term;
}

}  // namespace

std::vector<Token> tokenize_with_offsets(std::string_view text, const TokenizerOptions& options) {
  const auto cps = decode_utf8(text);
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    if (!is_word_char(cps[i].value)) {
      ++i;
      continue;
    }
    const auto begin = i;
    std::string term;
    while (i < cps.size() && is_word_char(cps[i].value)) append_utf8(term, to_lower(cps[i++].value));
    if (i - begin < 2) continue;
    if (options.stopwords && std::ranges::find(kStopwords, term) != kStopwords.end()) continue;
    if (options.stem) term = stem(std::move(term));
    out.push_back({std::move(term), begin, i});
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& options) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(text, options)) out.push_back(std::move(t.term));
  return out;
}

ScoringConfig ScoringConfig::from_json(const Json& j) {
  ScoringConfig c;
  c.bm25.k1 = j.value("k1", c.bm25.k1);
  c.bm25.b = j.value("b", c.bm25.b);
  c.context.boost = j.value("w", c.context.boost);
  c.context.expansion_weight = j.value("expansion_weight", c.context.expansion_weight);
  c.tokenizer.stem = j.value("stem", false);
  c.tokenizer.stopwords = j.value("stopwords", false);
  return c;
}

// ---------------------------------------------------------------------------
// Index

double PostingsIndex::idf(std::string_view term) const {
  auto it = df.find(std::string(term));
  const double n = static_cast<double>(doc_count);
  const double d = it == df.end() ? 0.0 : static_cast<double>(it->second);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

Json PostingsIndex::to_json() const {
  Json postings_json = Json::object();
  for (const auto& [term, list] : postings) {
    Json arr = Json::array();
    for (const auto& p : list) arr.push_back(Json::array({p.ie, p.tf}));
    postings_json[term] = std::move(arr);
  }
  return {{"N", doc_count},
          {"doc_len", doc_len},
          {"avg_len", avg_len},
          {"postings", std::move(postings_json)},
          {"df", df},
          {"doc_category", doc_category},
          {"built_at_seq", built_at_seq},
          {"tokenizer", {{"stem", tokenizer.stem}, {"stopwords", tokenizer.stopwords}}}};
}

PostingsIndex PostingsIndex::from_json(const Json& j) {
  PostingsIndex idx;
  try {
    idx.doc_count = j.at("N").get<std::size_t>();
    idx.doc_len = j.at("doc_len").get<std::map<std::string, std::size_t>>();
    idx.avg_len = j.at("avg_len").get<double>();
    idx.df = j.at("df").get<std::map<std::string, std::size_t>>();
    idx.doc_category = j.at("doc_category").get<std::map<std::string, std::string>>();
    idx.built_at_seq = j.at("built_at_seq").get<std::uint64_t>();
    idx.tokenizer.stem = j.at("tokenizer").at("stem").get<bool>();
    idx.tokenizer.stopwords = j.at("tokenizer").at("stopwords").get<bool>();
    for (const auto& [term, arr] : j.at("postings").items()) {
      auto& list = idx.postings[term];
      for (const auto& p : arr) list.push_back({p.at(0).get<std::string>(), p.at(1).get<std::uint32_t>()});
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("malformed index: ") + e.what());
  }
  return idx;
}

std::string PostingsIndex::serialize() const { return to_json().dump(); }

PostingsIndex build_index(std::span<const IndexDocument> documents, std::uint64_t seq,
                          const TokenizerOptions& options) {
  PostingsIndex idx;
  idx.built_at_seq = seq;
  idx.tokenizer = options;
  std::size_t total = 0;
  for (const auto& doc : documents) {
    const auto terms = tokenize(doc.body, options);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : terms) ++tf[t];
    idx.doc_len[doc.id] = terms.size();
    idx.doc_category[doc.id] = doc.category;
    total += terms.size();
    for (const auto& [term, n] : tf) idx.postings[term].push_back({doc.id, n});
  }
  idx.doc_count = idx.doc_len.size();
  idx.avg_len = idx.doc_count ? static_cast<double>(total) / static_cast<double>(idx.doc_count) : 0.0;
  for (auto& [term, list] : idx.postings) {
    std::ranges::sort(list, {}, &Posting::ie);
    idx.df[term] = list.size();
  }
  return idx;
}

PostingsIndex build_index(const ArchiveState& archive, const TokenizerOptions& options) {
  std::vector<IndexDocument> docs;
  for (const auto& [id, e] : archive.elements) {
    if (!e.retracted) docs.push_back({id, e.category, e.body});
  }
  return build_index(docs, archive.seq, options);
}

// ---------------------------------------------------------------------------
// Scoring

Json Hit::to_json() const {
  Json links = Json::array();
  for (const auto& l : neighbors) {
    links.push_back({{"ie", l.ie}, {"relation", l.relation}, {"label", l.label}, {"category", l.category}});
  }
  return {{"ie", ie},
          {"score", score},
          {"base_score", base_score},
          {"boosted", boosted},
          {"category", category},
          {"matched_terms", matched_terms},
          {"snippet", snippet},
          {"links", {{"neighbors", std::move(links)}, {"category", category}, {"concepts", concepts}}}};
}

namespace {

struct Accumulator {
  double score = 0.0;
  std::set<std::string> terms;
};

/// Sums weight * BM25(term, doc) over `weighted` (processed in term order).
std::map<std::string, Accumulator> score_terms(const PostingsIndex& index,
                                               const std::map<std::string, double>& weighted,
                                               const Bm25Params& params) {
  std::map<std::string, Accumulator> acc;
  for (const auto& [term, weight] : weighted) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    const double idf = index.idf(term);
    for (const auto& p : it->second) {
      const double dl = static_cast<double>(index.doc_len.at(p.ie));
      const double tf = p.tf;
      const double norm = index.avg_len > 0 ? dl / index.avg_len : 0.0;
      const double s = idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
      auto& a = acc[p.ie];
      a.score += weight * s;
      a.terms.insert(term);
    }
  }
  return acc;
}

std::vector<Hit> rank(std::vector<Hit> hits, std::size_t k) {
  std::ranges::sort(hits, [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ie < b.ie;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

std::map<std::string, double> query_weights(std::string_view query, const TokenizerOptions& options) {
  std::map<std::string, double> weighted;
  for (auto& t : tokenize(query, options)) weighted.emplace(std::move(t), 1.0);
  return weighted;
}

std::string category_of(const PostingsIndex& index, const std::string& ie) {
  auto it = index.doc_category.find(ie);
  return it == index.doc_category.end() ? std::string{} : it->second;
}

}  // namespace

std::vector<Hit> search(const PostingsIndex& index, std::string_view query, std::size_t k,
                        const Bm25Params& params) {
  if (k == 0) throw Error(ErrorCode::invalid_argument, "k must be at least 1");
  const auto acc = score_terms(index, query_weights(query, index.tokenizer), params);
  std::vector<Hit> hits;
  for (const auto& [ie, a] : acc) {
    Hit h;
    h.ie = ie;
    h.score = h.base_score = a.score;
    h.category = category_of(index, ie);
    h.matched_terms.assign(a.terms.begin(), a.terms.end());
    hits.push_back(std::move(h));
  }
  return rank(std::move(hits), k);
}

std::vector<std::string> expansion_terms(const TaskTypeSchema& schema, std::string_view activity,
                                         std::span<const std::string> query_terms,
                                         const TokenizerOptions& options) {
  std::set<std::string> associated;
  for (const auto& e : schema.assoc_edges) {
    if (e.activity == activity) associated.insert(e.content);
  }
  const std::set<std::string> query(query_terms.begin(), query_terms.end());
  std::set<std::string> expansion;
  for (const auto& link : schema.semantic_links) {
    if (!associated.contains(link.category)) continue;
    const auto* concept_node = schema.find_concept(link.concept_id);
    if (!concept_node) continue;
    std::set<std::string> group;
    auto add_label = [&](const SemanticConcept& c) {
      for (auto& t : tokenize(c.label, options)) group.insert(std::move(t));
    };
    add_label(*concept_node);
    for (const auto& r : concept_node->related) {
      if (const auto* other = schema.find_concept(r.concept_id)) add_label(*other);
    }
    const bool hit = std::ranges::any_of(group, [&](const std::string& t) { return query.contains(t); });
    if (hit) expansion.insert(group.begin(), group.end());
  }
  std::vector<std::string> out;
  std::ranges::set_difference(expansion, query, std::back_inserter(out));
  return out;
}

std::vector<Hit> contextual_search(const PostingsIndex& index, const TaskTypeSchema& schema,
                                   std::string_view query, const WorkContext& ctx, std::size_t k,
                                   bool semantic, const ScoringConfig& config) {
  if (ctx.schema != schema.ref()) {
    throw Error(ErrorCode::unresolvable_context,
                "work context schema " + to_string(ctx.schema) + " does not match " + to_string(schema.ref()));
  }
  if (!schema.find_activity(ctx.activity_category)) {
    throw Error(ErrorCode::unresolvable_context,
                "unknown activity category '" + ctx.activity_category + "' in work context");
  }
  if (k == 0) throw Error(ErrorCode::invalid_argument, "k must be at least 1");

  auto weighted = query_weights(query, index.tokenizer);
  if (semantic) {
    std::vector<std::string> q;
    for (const auto& [t, _] : weighted) q.push_back(t);
    for (auto& t : expansion_terms(schema, ctx.activity_category, q, index.tokenizer)) {
      weighted.emplace(std::move(t), config.context.expansion_weight);
    }
  }
  std::set<std::string> associated;
  for (const auto& e : schema.assoc_edges) {
    if (e.activity == ctx.activity_category) associated.insert(e.content);
  }

  const auto acc = score_terms(index, weighted, config.bm25);
  std::vector<Hit> hits;
  for (const auto& [ie, a] : acc) {
    Hit h;
    h.ie = ie;
    h.base_score = a.score;
    h.category = category_of(index, ie);
    h.matched_terms.assign(a.terms.begin(), a.terms.end());
    const bool matched = associated.contains(h.category);
    h.score = matched ? a.score * (1.0 + config.context.boost) : a.score;
    h.boosted = matched && config.context.boost > 0.0;
    hits.push_back(std::move(h));
  }
  return rank(std::move(hits), k);
}

std::vector<Hit> annotate_hits(const ArchiveState& archive, std::vector<Hit> hits,
                               const TokenizerOptions& options) {
  for (auto& hit : hits) {
    auto it = archive.elements.find(hit.ie);
    if (it == archive.elements.end()) {
      throw Error(ErrorCode::unknown_element, "hit references unknown element '" + hit.ie + "'");
    }
    const auto& element = it->second;
    hit.category = element.category;

    hit.neighbors.clear();
    auto neighbor = [&](const std::string& id, const ContextVia& via) {
      HitLink link{id, via.relation(), std::string(via.label()), {}};
      if (auto n = archive.elements.find(id); n != archive.elements.end()) link.category = n->second.category;
      hit.neighbors.push_back(std::move(link));
    };
    for (const auto* e : archive.out_edges(element.id)) neighbor(e->to, {element.id, e->kind, Direction::out});
    for (const auto* e : archive.in_edges(element.id)) neighbor(e->from, {element.id, e->kind, Direction::in});
    std::ranges::sort(hit.neighbors, {}, [](const HitLink& l) { return std::pair(l.ie, l.relation); });

    hit.concepts.clear();
    if (const auto* schema = archive.schema_of_instance(element.instance)) {
      for (const auto& l : schema->semantic_links) {
        if (l.category == element.category) hit.concepts.push_back(l.concept_id);
      }
    }

    const auto cps = decode_utf8(element.body);
    if (cps.size() <= kSnippetLength) {
      hit.snippet = element.body;
      continue;
    }
    std::size_t start = 0;
    for (const auto& tok : tokenize_with_offsets(element.body, options)) {
      if (std::ranges::find(hit.matched_terms, tok.term) != hit.matched_terms.end()) {
        start = tok.begin > 40 ? tok.begin - 40 : 0;
        break;
      }
    }
    start = std::min(start, cps.size() - kSnippetLength);
    const auto end = start + kSnippetLength;
    const auto begin_byte = cps[start].byte;
    const auto end_byte = end < cps.size() ? cps[end].byte : element.body.size();
    hit.snippet = element.body.substr(begin_byte, end_byte - begin_byte);
  }
  return hits;
}

}  // namespace iw
