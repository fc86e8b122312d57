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

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace iw {

using Json = nlohmann::json;

// Categorical context: the instance-independent task-type graph. A schema is
// immutable once loaded; a new version is a new schema.

enum class FlowKind { precedes, iterates_to, decomposes_into };
enum class AssocRole { produces, consumes };
/// DS = demand-satisfaction, RS = referential support.
enum class LinkKind { DS, RS };
enum class ConceptRelation { broader, narrower, related };

std::string_view to_string(FlowKind kind) noexcept;
std::string_view to_string(AssocRole role) noexcept;
std::string_view to_string(LinkKind kind) noexcept;
std::string_view to_string(ConceptRelation relation) noexcept;

std::optional<FlowKind> parse_flow_kind(std::string_view text) noexcept;
std::optional<AssocRole> parse_assoc_role(std::string_view text) noexcept;
std::optional<LinkKind> parse_link_kind(std::string_view text) noexcept;
std::optional<ConceptRelation> parse_concept_relation(std::string_view text) noexcept;

struct SchemaRef {
  std::string id;
  int version = 1;

  auto operator<=>(const SchemaRef&) const = default;
};

std::string to_string(const SchemaRef& ref);

struct ActivityCategory {
  std::string id;
  std::string name;
  std::string description;

  bool operator==(const ActivityCategory&) const = default;
};

struct ContentCategory {
  std::string id;
  std::string name;
  std::string description;

  bool operator==(const ContentCategory&) const = default;
};

struct ConceptLink {
  std::string concept_id;
  ConceptRelation relation = ConceptRelation::related;

  auto operator<=>(const ConceptLink&) const = default;
};

struct SemanticConcept {
  std::string id;
  std::string label;
  std::string definition;
  std::vector<ConceptLink> related;

  bool operator==(const SemanticConcept&) const = default;
};

struct FlowEdge {
  std::string from;
  std::string to;
  FlowKind kind = FlowKind::precedes;

  auto operator<=>(const FlowEdge&) const = default;
};

struct AssocEdge {
  std::string activity;
  std::string content;
  AssocRole role = AssocRole::produces;

  auto operator<=>(const AssocEdge&) const = default;
};

struct TemplateEdge {
  std::string from;
  std::string to;
  LinkKind kind = LinkKind::DS;

  auto operator<=>(const TemplateEdge&) const = default;
};

/// Ties an activity or content category to a semantic concept.
struct SemanticLink {
  std::string category;
  std::string concept_id;

  auto operator<=>(const SemanticLink&) const = default;
};

struct TaskTypeSchema {
  std::string id;
  std::string name;
  int version = 1;
  std::vector<ActivityCategory> activities;
  std::vector<ContentCategory> contents;
  std::vector<SemanticConcept> concepts;
  std::vector<FlowEdge> flow_edges;
  std::vector<AssocEdge> assoc_edges;
  std::vector<TemplateEdge> template_edges;
  std::vector<SemanticLink> semantic_links;

  SchemaRef ref() const { return {id, version}; }

  const ActivityCategory* find_activity(std::string_view activity_id) const;
  const ContentCategory* find_content(std::string_view content_id) const;
  const SemanticConcept* find_concept(std::string_view concept_id) const;

  /// True iff an AssocEdge (activity, content, role) exists.
  bool has_association(std::string_view activity_id, std::string_view content_id,
                       AssocRole role) const;

  bool operator==(const TaskTypeSchema&) const = default;
};

/// Sorts every node set by id and every edge list lexicographically.
void normalize(TaskTypeSchema& schema);

struct Finding {
  std::string code;
  std::string message;

  bool operator==(const Finding&) const = default;
};

struct ValidationReport {
  std::vector<Finding> errors;
  std::vector<Finding> warnings;

  bool ok() const noexcept { return errors.empty(); }
  bool has_error(std::string_view code) const;
  bool has_warning(std::string_view code) const;
  Json to_json() const;
};

/// Parses a schema document. Rejects malformed JSON (with line/column),
/// unknown fields, duplicate ids and dangling edge references. The result is
/// normalized. Other invariants are reported by validate_schema.
TaskTypeSchema parse_schema(std::string_view text);
TaskTypeSchema schema_from_json(const Json& doc);

Json schema_to_json(const TaskTypeSchema& schema);
/// Canonical form: sorted keys, sorted arrays, compact UTF-8.
std::string serialize_schema(const TaskTypeSchema& schema);

ValidationReport validate_schema(const TaskTypeSchema& schema);

struct ExpectedContent {
  std::string category;
  AssocRole role = AssocRole::produces;

  auto operator<=>(const ExpectedContent&) const = default;
};

/// AssocEdges of `activity`, ordered by (category id, role name).
std::vector<ExpectedContent> expected_contents(const TaskTypeSchema& schema,
                                               std::string_view activity);

struct ReachedActivity {
  std::string id;
  int hops = 0;

  auto operator<=>(const ReachedActivity&) const = default;
};

struct ActivityAssociations {
  std::string activity;
  std::vector<ExpectedContent> contents;

  bool operator==(const ActivityAssociations&) const = default;
};

struct CategoricalContext {
  std::string focus;
  int radius = 0;
  /// Activities that reach the focus within `radius` flow hops, by (hops, id).
  std::vector<ReachedActivity> before;
  /// Activities the focus reaches within `radius` flow hops, by (hops, id).
  std::vector<ReachedActivity> after;
  /// Focus first, then every other included activity by id.
  std::vector<ActivityAssociations> associations;
  /// Template edges touching any associated content category.
  std::vector<TemplateEdge> templates;
  /// Concepts linked to any included activity or associated content category.
  std::vector<std::string> concepts;

  /// Focus plus every activity in before/after, sorted, unique.
  std::vector<std::string> activity_set() const;
  Json to_json() const;
};

CategoricalContext categorical_context(const TaskTypeSchema& schema, std::string_view activity,
                                       int radius);

}  // namespace iw
