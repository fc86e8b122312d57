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

#include "iw/schema.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "iw/error.hpp"

namespace iw {

std::string_view to_string(FlowKind kind) noexcept {
  switch (kind) {
    case FlowKind::precedes: return "precedes";
    case FlowKind::iterates_to: return "iterates-to";
    case FlowKind::decomposes_into: return "decomposes-into";
  }
  return "";
}

std::string_view to_string(AssocRole role) noexcept {
  return role == AssocRole::produces ? "produces" : "consumes";
}

std::string_view to_string(LinkKind kind) noexcept { return kind == LinkKind::DS ? "DS" : "RS"; }

std::string_view to_string(ConceptRelation relation) noexcept {
  switch (relation) {
    case ConceptRelation::broader: return "broader";
    case ConceptRelation::narrower: return "narrower";
    case ConceptRelation::related: return "related";
  }
  return "";
}

std::optional<FlowKind> parse_flow_kind(std::string_view text) noexcept {
  if (text == "precedes") return FlowKind::precedes;
  if (text == "iterates-to") return FlowKind::iterates_to;
  if (text == "decomposes-into") return FlowKind::decomposes_into;
  return std::nullopt;
}

std::optional<AssocRole> parse_assoc_role(std::string_view text) noexcept {
  if (text == "produces") return AssocRole::produces;
  if (text == "consumes") return AssocRole::consumes;
  return std::nullopt;
}

std::optional<LinkKind> parse_link_kind(std::string_view text) noexcept {
  if (text == "DS") return LinkKind::DS;
  if (text == "RS") return LinkKind::RS;
  return std::nullopt;
}

std::optional<ConceptRelation> parse_concept_relation(std::string_view text) noexcept {
  if (text == "broader") return ConceptRelation::broader;
  if (text == "narrower") return ConceptRelation::narrower;
  if (text == "related") return ConceptRelation::related;
  return std::nullopt;
}

std::string to_string(const SchemaRef& ref) { return ref.id + "@" + std::to_string(ref.version); }

const ActivityCategory* TaskTypeSchema::find_activity(std::string_view activity_id) const {
  auto it = std::ranges::find(activities, activity_id, &ActivityCategory::id);
  return it == activities.end() ? nullptr : &*it;
}

const ContentCategory* TaskTypeSchema::find_content(std::string_view content_id) const {
  auto it = std::ranges::find(contents, content_id, &ContentCategory::id);
  return it == contents.end() ? nullptr : &*it;
}

const SemanticConcept* TaskTypeSchema::find_concept(std::string_view concept_id) const {
  auto it = std::ranges::find(concepts, concept_id, &SemanticConcept::id);
  return it == concepts.end() ? nullptr : &*it;
}

bool TaskTypeSchema::has_association(std::string_view activity_id, std::string_view content_id,
                                     AssocRole role) const {
  return std::ranges::any_of(assoc_edges, [&](const AssocEdge& e) {
    return e.activity == activity_id && e.content == content_id && e.role == role;
  });
}

namespace {

// Sort keys use the serialized spelling of enums so canonical order matches
// what a reader of the JSON would expect.
auto flow_key(const FlowEdge& e) { return std::tuple(e.from, e.to, to_string(e.kind)); }
auto assoc_key(const AssocEdge& e) {
  return std::tuple(e.activity, e.content, to_string(e.role));
}
auto template_key(const TemplateEdge& e) { return std::tuple(e.from, e.to, to_string(e.kind)); }
auto concept_link_key(const ConceptLink& l) {
  return std::pair(l.concept_id, to_string(l.relation));
}

}  // namespace

void normalize(TaskTypeSchema& schema) {
  std::ranges::sort(schema.activities, {}, &ActivityCategory::id);
  std::ranges::sort(schema.contents, {}, &ContentCategory::id);
  std::ranges::sort(schema.concepts, {}, &SemanticConcept::id);
  for (auto& c : schema.concepts) std::ranges::sort(c.related, {}, concept_link_key);
  std::ranges::sort(schema.flow_edges, {}, flow_key);
  std::ranges::sort(schema.assoc_edges, {}, assoc_key);
  std::ranges::sort(schema.template_edges, {}, template_key);
  std::ranges::sort(schema.semantic_links);
}

bool ValidationReport::has_error(std::string_view code) const {
  return std::ranges::any_of(errors, [&](const Finding& f) { return f.code == code; });
}

bool ValidationReport::has_warning(std::string_view code) const {
  return std::ranges::any_of(warnings, [&](const Finding& f) { return f.code == code; });
}

Json ValidationReport::to_json() const {
  auto list = [](const std::vector<Finding>& findings) {
    Json out = Json::array();
    for (const auto& f : findings) out.push_back({{"code", f.code}, {"message", f.message}});
    return out;
  };
  return {{"errors", list(errors)}, {"warnings", list(warnings)}};
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

[[noreturn]] void fail_syntax(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::syntax_error, where + ": " + what);
}

void check_fields(const Json& obj, const std::string& where,
                  std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail_syntax(where, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::ranges::find(allowed, key) == allowed.end()) {
      throw Error(ErrorCode::unknown_field, where + ": unknown field '" + key + "'");
    }
  }
}

std::string get_string(const Json& obj, const std::string& where, const char* key,
                       bool required = true) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) fail_syntax(where, std::string("missing field '") + key + "'");
    return {};
  }
  if (!it->is_string()) fail_syntax(where, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

const Json& get_array(const Json& obj, const std::string& where, const char* key) {
  static const Json kEmpty = Json::array();
  auto it = obj.find(key);
  if (it == obj.end()) return kEmpty;
  if (!it->is_array()) fail_syntax(where, std::string("field '") + key + "' must be an array");
  return *it;
}

template <class Enum, class ParseFn>
Enum get_enum(const Json& obj, const std::string& where, const char* key, ParseFn parse) {
  const auto text = get_string(obj, where, key);
  auto value = parse(text);
  if (!value) fail_syntax(where, std::string("invalid ") + key + " '" + text + "'");
  return *value;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace

TaskTypeSchema schema_from_json(const Json& doc) {
  check_fields(doc, "schema",
               {"id", "name", "version", "activities", "contents", "concepts", "flow_edges",
                "assoc_edges", "template_edges", "semantic_links"});
  TaskTypeSchema s;
  s.id = get_string(doc, "schema", "id");
  s.name = get_string(doc, "schema", "name", false);
  auto version = doc.find("version");
  if (version == doc.end() || !version->is_number_integer()) {
    fail_syntax("schema", "field 'version' must be an integer");
  }
  s.version = version->get<int>();

  for (std::size_t i = 0; const auto& a : get_array(doc, "schema", "activities")) {
    const auto where = "activities[" + std::to_string(i++) + "]";
    check_fields(a, where, {"id", "name", "description"});
    s.activities.push_back({get_string(a, where, "id"), get_string(a, where, "name", false),
                            get_string(a, where, "description", false)});
  }
  for (std::size_t i = 0; const auto& c : get_array(doc, "schema", "contents")) {
    const auto where = "contents[" + std::to_string(i++) + "]";
    check_fields(c, where, {"id", "name", "description"});
    s.contents.push_back({get_string(c, where, "id"), get_string(c, where, "name", false),
                          get_string(c, where, "description", false)});
  }
  for (std::size_t i = 0; const auto& c : get_array(doc, "schema", "concepts")) {
    const auto where = "concepts[" + std::to_string(i++) + "]";
    check_fields(c, where, {"id", "label", "definition", "related"});
    SemanticConcept sc{get_string(c, where, "id"), get_string(c, where, "label", false),
                       get_string(c, where, "definition", false), {}};
    for (std::size_t j = 0; const auto& r : get_array(c, where, "related")) {
      const auto rwhere = where + ".related[" + std::to_string(j++) + "]";
      check_fields(r, rwhere, {"concept", "relation"});
      sc.related.push_back({get_string(r, rwhere, "concept"),
                            get_enum<ConceptRelation>(r, rwhere, "relation",
                                                      parse_concept_relation)});
    }
    s.concepts.push_back(std::move(sc));
  }
  for (std::size_t i = 0; const auto& e : get_array(doc, "schema", "flow_edges")) {
    const auto where = "flow_edges[" + std::to_string(i++) + "]";
    check_fields(e, where, {"from", "to", "kind"});
    s.flow_edges.push_back({get_string(e, where, "from"), get_string(e, where, "to"),
                            get_enum<FlowKind>(e, where, "kind", parse_flow_kind)});
  }
  for (std::size_t i = 0; const auto& e : get_array(doc, "schema", "assoc_edges")) {
    const auto where = "assoc_edges[" + std::to_string(i++) + "]";
    check_fields(e, where, {"activity", "content", "role"});
    s.assoc_edges.push_back({get_string(e, where, "activity"), get_string(e, where, "content"),
                             get_enum<AssocRole>(e, where, "role", parse_assoc_role)});
  }
  for (std::size_t i = 0; const auto& e : get_array(doc, "schema", "template_edges")) {
    const auto where = "template_edges[" + std::to_string(i++) + "]";
    check_fields(e, where, {"from", "to", "kind"});
    s.template_edges.push_back({get_string(e, where, "from"), get_string(e, where, "to"),
                                get_enum<LinkKind>(e, where, "kind", parse_link_kind)});
  }
  for (std::size_t i = 0; const auto& l : get_array(doc, "schema", "semantic_links")) {
    const auto where = "semantic_links[" + std::to_string(i++) + "]";
    check_fields(l, where, {"category", "concept"});
    s.semantic_links.push_back({get_string(l, where, "category"), get_string(l, where, "concept")});
  }
  normalize(s);

  const auto report = validate_schema(s);
  for (const auto& f : report.errors) {
    if (f.code == "duplicate_id") throw Error(ErrorCode::duplicate_id, f.message);
  }
  for (const auto& f : report.errors) {
    if (f.code == "dangling_reference") throw Error(ErrorCode::dangling_reference, f.message);
  }
  return s;
}

TaskTypeSchema parse_schema(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte);
    throw Error(ErrorCode::syntax_error, "syntax error at line " + std::to_string(line) +
                                             ", column " + std::to_string(column) +
                                             " (byte " + std::to_string(e.byte) + ")");
  }
  return schema_from_json(doc);
}

Json schema_to_json(const TaskTypeSchema& schema) {
  TaskTypeSchema s = schema;
  normalize(s);
  Json doc = Json::object();
  doc["id"] = s.id;
  doc["name"] = s.name;
  doc["version"] = s.version;
  doc["activities"] = Json::array();
  for (const auto& a : s.activities) {
    doc["activities"].push_back({{"id", a.id}, {"name", a.name}, {"description", a.description}});
  }
  doc["contents"] = Json::array();
  for (const auto& c : s.contents) {
    doc["contents"].push_back({{"id", c.id}, {"name", c.name}, {"description", c.description}});
  }
  doc["concepts"] = Json::array();
  for (const auto& c : s.concepts) {
    Json related = Json::array();
    for (const auto& r : c.related) {
      related.push_back({{"concept", r.concept_id}, {"relation", to_string(r.relation)}});
    }
    doc["concepts"].push_back({{"id", c.id},
                               {"label", c.label},
                               {"definition", c.definition},
                               {"related", std::move(related)}});
  }
  doc["flow_edges"] = Json::array();
  for (const auto& e : s.flow_edges) {
    doc["flow_edges"].push_back({{"from", e.from}, {"to", e.to}, {"kind", to_string(e.kind)}});
  }
  doc["assoc_edges"] = Json::array();
  for (const auto& e : s.assoc_edges) {
    doc["assoc_edges"].push_back(
        {{"activity", e.activity}, {"content", e.content}, {"role", to_string(e.role)}});
  }
  doc["template_edges"] = Json::array();
  for (const auto& e : s.template_edges) {
    doc["template_edges"].push_back(
        {{"from", e.from}, {"to", e.to}, {"kind", to_string(e.kind)}});
  }
  doc["semantic_links"] = Json::array();
  for (const auto& l : s.semantic_links) {
    doc["semantic_links"].push_back({{"category", l.category}, {"concept", l.concept_id}});
  }
  return doc;
}

std::string serialize_schema(const TaskTypeSchema& schema) {
  return schema_to_json(schema).dump();
}

// ---------------------------------------------------------------------------
// Validation

namespace {

/// Returns one node on a cycle of the directed graph, if any.
std::optional<std::string> find_cycle(const std::set<std::string>& nodes,
                                      const std::vector<std::pair<std::string, std::string>>& edges) {
  std::map<std::string, std::vector<std::string>> out;
  std::map<std::string, int> indegree;
  for (const auto& n : nodes) indegree[n] = 0;
  for (const auto& [from, to] : edges) {
    if (!nodes.contains(from) || !nodes.contains(to)) continue;
    out[from].push_back(to);
    ++indegree[to];
  }
  std::deque<std::string> ready;
  for (const auto& [n, d] : indegree) {
    if (d == 0) ready.push_back(n);
  }
  std::size_t removed = 0;
  while (!ready.empty()) {
    const auto n = ready.front();
    ready.pop_front();
    ++removed;
    for (const auto& m : out[n]) {
      if (--indegree[m] == 0) ready.push_back(m);
    }
  }
  if (removed == nodes.size()) return std::nullopt;
  for (const auto& [n, d] : indegree) {
    if (d > 0) return n;
  }
  return std::nullopt;
}

}  // namespace

ValidationReport validate_schema(const TaskTypeSchema& s) {
  ValidationReport report;
  auto error = [&](std::string code, std::string message) {
    report.errors.push_back({std::move(code), std::move(message)});
  };
  auto warning = [&](std::string code, std::string message) {
    report.warnings.push_back({std::move(code), std::move(message)});
  };

  if (s.id.empty()) error("missing_id", "schema id is empty");
  if (s.version < 1) error("invalid_version", "version must be a positive integer");

  std::set<std::string> activity_ids, content_ids, concept_ids;
  for (const auto& a : s.activities) {
    if (!activity_ids.insert(a.id).second) error("duplicate_id", "duplicate activity id '" + a.id + "'");
  }
  for (const auto& c : s.contents) {
    if (!content_ids.insert(c.id).second) error("duplicate_id", "duplicate content id '" + c.id + "'");
  }
  for (const auto& c : s.concepts) {
    if (!concept_ids.insert(c.id).second) error("duplicate_id", "duplicate concept id '" + c.id + "'");
  }

  auto dangling = [&](const std::string& what, const std::string& id) {
    error("dangling_reference", what + " references unknown id '" + id + "'");
  };

  for (const auto& e : s.flow_edges) {
    const auto what = "flow edge " + e.from + " -" + std::string(to_string(e.kind)) + "-> " + e.to;
    if (!activity_ids.contains(e.from)) dangling(what, e.from);
    if (!activity_ids.contains(e.to)) dangling(what, e.to);
    if (e.from == e.to && e.kind != FlowKind::iterates_to) {
      error("self_loop", what + " is a self-loop");
    }
  }
  std::set<AssocEdge> seen_assoc;
  for (const auto& e : s.assoc_edges) {
    const auto what = "association " + e.activity + " " + std::string(to_string(e.role)) + " " + e.content;
    if (!activity_ids.contains(e.activity)) dangling(what, e.activity);
    if (!content_ids.contains(e.content)) dangling(what, e.content);
    if (!seen_assoc.insert(e).second) error("duplicate_association", what + " appears twice");
  }
  for (const auto& e : s.template_edges) {
    const auto what = "template edge " + e.from + " -" + std::string(to_string(e.kind)) + "-> " + e.to;
    if (!content_ids.contains(e.from)) dangling(what, e.from);
    if (!content_ids.contains(e.to)) dangling(what, e.to);
  }
  for (const auto& l : s.semantic_links) {
    const auto what = "semantic link " + l.category + " ~ " + l.concept_id;
    if (!activity_ids.contains(l.category) && !content_ids.contains(l.category)) {
      dangling(what, l.category);
    }
    if (!concept_ids.contains(l.concept_id)) dangling(what, l.concept_id);
  }
  for (const auto& c : s.concepts) {
    for (const auto& r : c.related) {
      if (!concept_ids.contains(r.concept_id)) dangling("concept " + c.id, r.concept_id);
      if (r.concept_id == c.id) error("self_relation", "concept '" + c.id + "' relates to itself");
    }
  }

  auto subgraph = [&](FlowKind kind) {
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& e : s.flow_edges) {
      if (e.kind == kind) edges.emplace_back(e.from, e.to);
    }
    return edges;
  };
  if (auto node = find_cycle(activity_ids, subgraph(FlowKind::decomposes_into))) {
    error("decomposition_cycle", "decomposition cycle through activity '" + *node + "'");
  }
  if (auto node = find_cycle(activity_ids, subgraph(FlowKind::precedes))) {
    error("precedence_cycle", "precedence cycle through activity '" + *node + "'");
  }

  for (const auto& c : s.contents) {
    const bool produced = std::ranges::any_of(s.assoc_edges, [&](const AssocEdge& e) {
      return e.content == c.id && e.role == AssocRole::produces;
    });
    if (!produced) warning("unproduced_content", "content category '" + c.id + "' is produced by no activity");
  }
  if (s.activities.size() > 1) {
    for (const auto& a : s.activities) {
      const bool linked = std::ranges::any_of(
          s.flow_edges, [&](const FlowEdge& e) { return e.from == a.id || e.to == a.id; });
      if (!linked) warning("isolated_activity", "activity '" + a.id + "' has no flow edges");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Queries

std::vector<ExpectedContent> expected_contents(const TaskTypeSchema& schema,
                                               std::string_view activity) {
  if (!schema.find_activity(activity)) {
    throw Error(ErrorCode::unknown_activity, "unknown activity category '" + std::string(activity) + "'");
  }
  std::vector<ExpectedContent> out;
  for (const auto& e : schema.assoc_edges) {
    if (e.activity == activity) out.push_back({e.content, e.role});
  }
  std::ranges::sort(out, {}, [](const ExpectedContent& c) {
    return std::pair(c.category, to_string(c.role));
  });
  return out;
}

namespace {

std::vector<ReachedActivity> flow_bfs(const TaskTypeSchema& schema, const std::string& focus,
                                      int radius, bool forward) {
  std::map<std::string, int> hops{{focus, 0}};
  std::vector<std::string> frontier{focus};
  for (int depth = 1; depth <= radius && !frontier.empty(); ++depth) {
    std::vector<std::string> next;
    for (const auto& node : frontier) {
      for (const auto& e : schema.flow_edges) {
        const auto& src = forward ? e.from : e.to;
        const auto& dst = forward ? e.to : e.from;
        if (src == node && !hops.contains(dst)) {
          hops.emplace(dst, depth);
          next.push_back(dst);
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<ReachedActivity> out;
  for (const auto& [id, h] : hops) {
    if (id != focus) out.push_back({id, h});
  }
  std::ranges::sort(out, {}, [](const ReachedActivity& r) { return std::pair(r.hops, r.id); });
  return out;
}

}  // namespace

std::vector<std::string> CategoricalContext::activity_set() const {
  std::set<std::string> ids{focus};
  for (const auto& r : before) ids.insert(r.id);
  for (const auto& r : after) ids.insert(r.id);
  return {ids.begin(), ids.end()};
}

CategoricalContext categorical_context(const TaskTypeSchema& schema, std::string_view activity,
                                       int radius) {
  if (!schema.find_activity(activity)) {
    throw Error(ErrorCode::unknown_activity, "unknown activity category '" + std::string(activity) + "'");
  }
  if (radius < 0) throw Error(ErrorCode::invalid_argument, "radius must be non-negative");

  CategoricalContext ctx;
  ctx.focus = std::string(activity);
  ctx.radius = radius;
  ctx.before = flow_bfs(schema, ctx.focus, radius, false);
  ctx.after = flow_bfs(schema, ctx.focus, radius, true);

  std::set<std::string> categories;
  std::set<std::string> linked_to;
  ctx.associations.push_back({ctx.focus, expected_contents(schema, ctx.focus)});
  for (const auto& id : ctx.activity_set()) {
    if (id != ctx.focus) ctx.associations.push_back({id, expected_contents(schema, id)});
    linked_to.insert(id);
  }
  for (const auto& a : ctx.associations) {
    for (const auto& c : a.contents) categories.insert(c.category);
  }
  linked_to.insert(categories.begin(), categories.end());

  for (const auto& e : schema.template_edges) {
    if (categories.contains(e.from) || categories.contains(e.to)) ctx.templates.push_back(e);
  }
  std::set<std::string> concepts;
  for (const auto& l : schema.semantic_links) {
    if (linked_to.contains(l.category)) concepts.insert(l.concept_id);
  }
  ctx.concepts.assign(concepts.begin(), concepts.end());
  return ctx;
}

Json CategoricalContext::to_json() const {
  auto reached = [](const std::vector<ReachedActivity>& list) {
    Json out = Json::array();
    for (const auto& r : list) out.push_back({{"activity", r.id}, {"hops", r.hops}});
    return out;
  };
  Json assoc = Json::array();
  for (const auto& a : associations) {
    Json contents = Json::array();
    for (const auto& c : a.contents) {
      contents.push_back({{"category", c.category}, {"role", to_string(c.role)}});
    }
    assoc.push_back({{"activity", a.activity}, {"contents", std::move(contents)}});
  }
  Json tmpl = Json::array();
  for (const auto& e : templates) {
    tmpl.push_back({{"from", e.from}, {"to", e.to}, {"kind", to_string(e.kind)}});
  }
  return {{"focus", focus},       {"radius", radius},       {"before", reached(before)},
          {"after", reached(after)}, {"associations", assoc}, {"templates", tmpl},
          {"concepts", concepts}};
}

}  // namespace iw
