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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "iw/clock.hpp"
#include "iw/schema.hpp"

namespace iw {

// Episodic context: task instances, the activities performed in them, the
// information elements (IEs) those activities produced, and DS/RS edges among
// IEs. Edge direction: DS points from the satisfying IE to the demanding IE,
// RS from the referrer to the referee.

enum class InstanceStatus { open, closed };
enum class ActivityStatus { active, ended };

std::string_view to_string(InstanceStatus status) noexcept;
std::string_view to_string(ActivityStatus status) noexcept;

struct TaskInstance {
  std::string id;
  SchemaRef schema;
  std::string title;
  std::string actor;
  InstanceStatus status = InstanceStatus::open;
  Millis started_at = 0;
  std::optional<Millis> closed_at;

  bool operator==(const TaskInstance&) const = default;
};

struct ActivityInstance {
  std::string id;
  std::string instance;
  std::string category;
  ActivityStatus status = ActivityStatus::active;
  Millis started_at = 0;
  std::optional<Millis> ended_at;

  bool operator==(const ActivityInstance&) const = default;
};

struct InformationElement {
  std::string id;
  std::string instance;
  std::string activity;
  std::string category;
  std::string author;
  Millis created_at = 0;
  std::string body;
  std::vector<std::string> attachments;
  /// Recorded with a category its activity does not produce.
  bool override_mark = false;
  /// Superseded; kept for provenance, excluded from retrieval.
  bool retracted = false;

  bool operator==(const InformationElement&) const = default;
};

struct EpisodicEdge {
  std::string from;
  std::string to;
  LinkKind kind = LinkKind::DS;
  Millis created_at = 0;
  std::optional<std::string> note;

  bool operator==(const EpisodicEdge&) const = default;
};

struct JournalRecord {
  std::uint64_t seq = 0;
  Millis ts = 0;
  std::string op;
  Json payload;
};

Json to_json(const TaskInstance& instance);
Json to_json(const ActivityInstance& activity);
Json to_json(const InformationElement& element);
Json to_json(const EpisodicEdge& edge);
Json to_json(const JournalRecord& record);

/// Which way an edge runs relative to the node it was reached from.
enum class Direction { out, in };

struct ContextVia {
  std::string from;
  LinkKind kind = LinkKind::DS;
  Direction direction = Direction::out;

  /// "DS-out", "RS-in", ...
  std::string relation() const;
  /// supports / supported-by / refers / referred-by, read as "from <label> node".
  std::string_view label() const;

  auto operator<=>(const ContextVia&) const = default;
};

struct ContextNode {
  std::string ie;
  std::string instance;
  std::string activity;
  std::string category;
  int hops = 0;
  /// Belongs to another task instance than the one the subgraph describes.
  bool external = false;
  std::vector<ContextVia> via;
};

struct ContextSubgraph {
  std::optional<std::string> focus;
  std::optional<std::string> instance;
  int depth = 0;
  std::vector<ContextNode> nodes;  // sorted by (hops, ie)
  std::vector<EpisodicEdge> edges;  // edges with both endpoints among nodes (or incident, for instance graphs)

  const ContextNode* find(std::string_view ie) const;
  Json to_json() const;
};

struct ProfileEntry {
  SchemaRef schema;
  std::string activity_category;
  std::string content_category;
  std::size_t count = 0;
  std::vector<std::string> evidence;
};

struct ProfileReport {
  std::string actor;
  std::vector<ProfileEntry> entries;

  std::size_t total() const;
  Json to_json() const;
};

/// Full archive contents. Value type; the Archive hands out immutable copies
/// of it to readers.
class ArchiveState {
 public:
  std::map<SchemaRef, TaskTypeSchema> schemas;
  std::map<std::string, TaskInstance> instances;
  std::map<std::string, ActivityInstance> activities;
  std::map<std::string, InformationElement> elements;
  std::vector<EpisodicEdge> edges;
  std::uint64_t seq = 0;
  Millis last_ts = 0;

  /// Applies one journal record without business-rule checks. Throws
  /// Error(journal_corrupt) when the record is structurally unusable.
  void apply(const JournalRecord& record);

  const TaskTypeSchema* schema_of_instance(std::string_view instance) const;
  /// Active activity of the instance, if any.
  const ActivityInstance* active_activity(std::string_view instance) const;
  std::vector<const EpisodicEdge*> out_edges(std::string_view ie) const;
  std::vector<const EpisodicEdge*> in_edges(std::string_view ie) const;
  bool has_edge(std::string_view from, std::string_view to, LinkKind kind) const;
  /// True iff `to` is reachable from `from` over DS edges.
  bool ds_reachable(std::string_view from, std::string_view to) const;

  ContextSubgraph episodic_context(std::string_view ie, int depth) const;
  ContextSubgraph instance_graph(std::string_view instance) const;
  ProfileReport expertise_profile(std::string_view actor) const;
  ValidationReport integrity_check() const;

  /// Whole state as one sorted JSON document.
  Json canonical_export() const;
  static ArchiveState from_export(const Json& doc);

 private:
  void index_edge(std::size_t pos);
  void rebuild_adjacency();

  std::map<std::string, std::vector<std::size_t>, std::less<>> out_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> in_;
  std::map<std::string, std::string, std::less<>> active_;
};

struct ArchiveOptions {
  /// Fixes id generation and switches to a logical clock.
  std::optional<std::uint64_t> seed;
  /// Overrides the clock choice above.
  std::shared_ptr<Clock> clock;
};

struct RecordRequest {
  std::string instance;
  std::string activity;
  std::string category;
  std::string body;
  std::string author;
  std::vector<std::string> ds_targets;
  std::vector<std::string> rs_targets;
  std::vector<std::string> attachments;
  bool override_produces = false;
};

struct RecordResult {
  InformationElement element;
  std::vector<EpisodicEdge> edges;
};

/// Single-writer archive backed by an append-only journal. Mutations are
/// serialized; queries run under a shared lock or against view().
class Archive {
 public:
  /// In-memory archive with no journal file.
  explicit Archive(ArchiveOptions options = {});
  ~Archive();

  Archive(const Archive&) = delete;
  Archive& operator=(const Archive&) = delete;

  /// Opens (creating if needed) the archive directory and replays its journal,
  /// starting from the newest usable snapshot.
  static std::unique_ptr<Archive> open(const std::filesystem::path& dir,
                                       ArchiveOptions options = {});

  SchemaRef load_schema(const TaskTypeSchema& schema);
  TaskInstance begin_instance(const SchemaRef& schema, const std::string& title,
                              const std::string& actor);
  TaskInstance close_instance(const std::string& instance);
  ActivityInstance begin_activity(const std::string& instance, const std::string& category);
  ActivityInstance end_activity(const std::string& activity);
  RecordResult record_element(const RecordRequest& request);
  EpisodicEdge link_elements(const std::string& from, const std::string& to, LinkKind kind,
                             std::optional<std::string> note = std::nullopt);
  InformationElement retract_element(const std::string& element);

  /// Writes snapshot-{seq}.json; returns its path. No-op path for in-memory archives.
  std::filesystem::path write_snapshot();

  std::uint64_t seq() const;
  /// Immutable copy of the state at the current seq.
  std::shared_ptr<const ArchiveState> view() const;

  std::optional<TaskTypeSchema> schema(const SchemaRef& ref) const;
  ContextSubgraph episodic_context(std::string_view ie, int depth) const;
  ContextSubgraph instance_graph(std::string_view instance) const;
  ProfileReport expertise_profile(std::string_view actor) const;
  ValidationReport integrity_check() const;
  Json canonical_export() const;

  const std::optional<std::filesystem::path>& directory() const { return dir_; }

 private:
  std::string fresh_id(std::string_view prefix, Millis ts);
  Millis stamp();
  void commit(std::string op, Json payload, Millis ts);

  mutable std::shared_mutex mutex_;
  ArchiveState state_;
  mutable std::shared_ptr<const ArchiveState> view_;
  std::optional<std::filesystem::path> dir_;
  std::shared_ptr<Clock> clock_;
  std::mt19937_64 rng_;
};

/// Parses one journal line. Throws Error(journal_corrupt) naming `expected_seq`.
JournalRecord parse_journal_line(std::string_view line, std::uint64_t expected_seq);

}  // namespace iw
