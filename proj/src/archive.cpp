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

#include "iw/archive.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <regex>
#include <set>
#include <tuple>

#include "iw/error.hpp"

namespace iw {

std::string_view to_string(InstanceStatus status) noexcept {
  return status == InstanceStatus::open ? "open" : "closed";
}

std::string_view to_string(ActivityStatus status) noexcept {
  return status == ActivityStatus::active ? "active" : "ended";
}

// ---------------------------------------------------------------------------
// JSON forms

Json to_json(const TaskInstance& t) {
  Json j = {{"id", t.id},
            {"schema", {{"id", t.schema.id}, {"version", t.schema.version}}},
            {"title", t.title},
            {"actor", t.actor},
            {"status", to_string(t.status)},
            {"started_at", format_timestamp(t.started_at)}};
  if (t.closed_at) j["closed_at"] = format_timestamp(*t.closed_at);
  return j;
}

Json to_json(const ActivityInstance& a) {
  Json j = {{"id", a.id},
            {"instance", a.instance},
            {"category", a.category},
            {"status", to_string(a.status)},
            {"started_at", format_timestamp(a.started_at)}};
  if (a.ended_at) j["ended_at"] = format_timestamp(*a.ended_at);
  return j;
}

Json to_json(const InformationElement& e) {
  return {{"id", e.id},
          {"instance", e.instance},
          {"activity", e.activity},
          {"category", e.category},
          {"author", e.author},
          {"created_at", format_timestamp(e.created_at)},
          {"body", e.body},
          {"attachments", e.attachments},
          {"override", e.override_mark},
          {"retracted", e.retracted}};
}

Json to_json(const EpisodicEdge& e) {
  Json j = {{"from", e.from},
            {"to", e.to},
            {"kind", to_string(e.kind)},
            {"created_at", format_timestamp(e.created_at)}};
  if (e.note) j["note"] = *e.note;
  return j;
}

Json to_json(const JournalRecord& r) {
  return {{"seq", r.seq}, {"ts", format_timestamp(r.ts)}, {"op", r.op}, {"payload", r.payload}};
}

namespace {

std::optional<Millis> optional_time(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return parse_timestamp(it->get<std::string>());
}

TaskInstance instance_from_json(const Json& j) {
  TaskInstance t;
  t.id = j.at("id").get<std::string>();
  t.schema = {j.at("schema").at("id").get<std::string>(), j.at("schema").at("version").get<int>()};
  t.title = j.at("title").get<std::string>();
  t.actor = j.at("actor").get<std::string>();
  t.status = j.at("status").get<std::string>() == "closed" ? InstanceStatus::closed
                                                           : InstanceStatus::open;
  t.started_at = parse_timestamp(j.at("started_at").get<std::string>());
  t.closed_at = optional_time(j, "closed_at");
  return t;
}

ActivityInstance activity_from_json(const Json& j) {
  ActivityInstance a;
  a.id = j.at("id").get<std::string>();
  a.instance = j.at("instance").get<std::string>();
  a.category = j.at("category").get<std::string>();
  a.status = j.at("status").get<std::string>() == "ended" ? ActivityStatus::ended
                                                         : ActivityStatus::active;
  a.started_at = parse_timestamp(j.at("started_at").get<std::string>());
  a.ended_at = optional_time(j, "ended_at");
  return a;
}

InformationElement element_from_json(const Json& j) {
  InformationElement e;
  e.id = j.at("id").get<std::string>();
  e.instance = j.at("instance").get<std::string>();
  e.activity = j.at("activity").get<std::string>();
  e.category = j.at("category").get<std::string>();
  e.author = j.at("author").get<std::string>();
  e.created_at = parse_timestamp(j.at("created_at").get<std::string>());
  e.body = j.at("body").get<std::string>();
  e.attachments = j.value("attachments", std::vector<std::string>{});
  e.override_mark = j.value("override", false);
  e.retracted = j.value("retracted", false);
  return e;
}

EpisodicEdge edge_from_json(const Json& j) {
  EpisodicEdge e;
  e.from = j.at("from").get<std::string>();
  e.to = j.at("to").get<std::string>();
  auto kind = parse_link_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::journal_corrupt, "invalid edge kind");
  e.kind = *kind;
  e.created_at = parse_timestamp(j.at("created_at").get<std::string>());
  if (auto it = j.find("note"); it != j.end() && !it->is_null()) e.note = it->get<std::string>();
  return e;
}

bool edge_less(const EpisodicEdge& a, const EpisodicEdge& b) {
  return std::tie(a.from, a.to, a.kind, a.created_at) < std::tie(b.from, b.to, b.kind, b.created_at);
}

[[noreturn]] void corrupt(std::uint64_t seq, const std::string& what) {
  throw Error(ErrorCode::journal_corrupt,
              "corrupt journal record at seq " + std::to_string(seq) + ": " + what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Context types

std::string ContextVia::relation() const {
  return std::string(to_string(kind)) + (direction == Direction::out ? "-out" : "-in");
}

std::string_view ContextVia::label() const {
  if (kind == LinkKind::DS) return direction == Direction::out ? "supports" : "supported-by";
  return direction == Direction::out ? "refers" : "referred-by";
}

const ContextNode* ContextSubgraph::find(std::string_view ie) const {
  auto it = std::ranges::find(nodes, ie, &ContextNode::ie);
  return it == nodes.end() ? nullptr : &*it;
}

Json ContextSubgraph::to_json() const {
  Json j = Json::object();
  if (focus) j["focus"] = *focus;
  if (instance) j["instance"] = *instance;
  j["depth"] = depth;
  j["nodes"] = Json::array();
  for (const auto& n : nodes) {
    Json via = Json::array();
    for (const auto& v : n.via) {
      via.push_back({{"from", v.from}, {"relation", v.relation()}, {"label", v.label()}});
    }
    j["nodes"].push_back({{"ie", n.ie},
                          {"instance", n.instance},
                          {"activity", n.activity},
                          {"category", n.category},
                          {"hops", n.hops},
                          {"external", n.external},
                          {"via", std::move(via)}});
  }
  j["edges"] = Json::array();
  for (const auto& e : edges) j["edges"].push_back(iw::to_json(e));
  return j;
}

std::size_t ProfileReport::total() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.count;
  return n;
}

Json ProfileReport::to_json() const {
  Json list = Json::array();
  for (const auto& e : entries) {
    list.push_back({{"schema", {{"id", e.schema.id}, {"version", e.schema.version}}},
                    {"activity_category", e.activity_category},
                    {"content_category", e.content_category},
                    {"count", e.count},
                    {"evidence", e.evidence}});
  }
  return {{"actor", actor}, {"entries", std::move(list)}};
}

// ---------------------------------------------------------------------------
// ArchiveState

void ArchiveState::index_edge(std::size_t pos) {
  out_[edges[pos].from].push_back(pos);
  in_[edges[pos].to].push_back(pos);
}

void ArchiveState::rebuild_adjacency() {
  out_.clear();
  in_.clear();
  active_.clear();
  for (std::size_t i = 0; i < edges.size(); ++i) index_edge(i);
  for (const auto& [id, a] : activities) {
    if (a.status == ActivityStatus::active) active_[a.instance] = id;
  }
}

void ArchiveState::apply(const JournalRecord& r) {
  try {
    const auto& p = r.payload;
    if (r.op == "load_schema") {
      auto schema = schema_from_json(p.at("schema"));
      const auto ref = schema.ref();
      if (!schemas.emplace(ref, std::move(schema)).second) corrupt(r.seq, "schema loaded twice");
    } else if (r.op == "begin_instance") {
      auto t = instance_from_json(p.at("instance"));
      if (!instances.emplace(t.id, t).second) corrupt(r.seq, "instance id reused");
    } else if (r.op == "close_instance") {
      auto it = instances.find(p.at("id").get<std::string>());
      if (it == instances.end()) corrupt(r.seq, "close of unknown instance");
      it->second.status = InstanceStatus::closed;
      it->second.closed_at = r.ts;
    } else if (r.op == "begin_activity") {
      auto a = activity_from_json(p.at("activity"));
      const auto id = a.id;
      const auto instance = a.instance;
      if (!activities.emplace(id, std::move(a)).second) corrupt(r.seq, "activity id reused");
      active_[instance] = id;
    } else if (r.op == "end_activity") {
      auto it = activities.find(p.at("id").get<std::string>());
      if (it == activities.end()) corrupt(r.seq, "end of unknown activity");
      it->second.status = ActivityStatus::ended;
      it->second.ended_at = r.ts;
      if (auto act = active_.find(it->second.instance);
          act != active_.end() && act->second == it->first) {
        active_.erase(act);
      }
    } else if (r.op == "record_element") {
      auto e = element_from_json(p.at("element"));
      if (!elements.emplace(e.id, e).second) corrupt(r.seq, "element id reused");
      for (const auto& ej : p.at("edges")) {
        edges.push_back(edge_from_json(ej));
        index_edge(edges.size() - 1);
      }
    } else if (r.op == "link_elements") {
      edges.push_back(edge_from_json(p.at("edge")));
      index_edge(edges.size() - 1);
    } else if (r.op == "retract_element") {
      auto it = elements.find(p.at("id").get<std::string>());
      if (it == elements.end()) corrupt(r.seq, "retract of unknown element");
      it->second.retracted = true;
    } else {
      corrupt(r.seq, "unknown op '" + r.op + "'");
    }
  } catch (const Json::exception& e) {
    corrupt(r.seq, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::journal_corrupt) throw;
    corrupt(r.seq, e.what());
  }
  seq = r.seq;
  last_ts = std::max(last_ts, r.ts);
}

const TaskTypeSchema* ArchiveState::schema_of_instance(std::string_view instance) const {
  auto it = instances.find(std::string(instance));
  if (it == instances.end()) return nullptr;
  auto s = schemas.find(it->second.schema);
  return s == schemas.end() ? nullptr : &s->second;
}

const ActivityInstance* ArchiveState::active_activity(std::string_view instance) const {
  auto it = active_.find(instance);
  if (it == active_.end()) return nullptr;
  auto a = activities.find(it->second);
  return a == activities.end() ? nullptr : &a->second;
}

std::vector<const EpisodicEdge*> ArchiveState::out_edges(std::string_view ie) const {
  std::vector<const EpisodicEdge*> out;
  if (auto it = out_.find(ie); it != out_.end()) {
    for (auto pos : it->second) out.push_back(&edges[pos]);
  }
  return out;
}

std::vector<const EpisodicEdge*> ArchiveState::in_edges(std::string_view ie) const {
  std::vector<const EpisodicEdge*> out;
  if (auto it = in_.find(ie); it != in_.end()) {
    for (auto pos : it->second) out.push_back(&edges[pos]);
  }
  return out;
}

bool ArchiveState::has_edge(std::string_view from, std::string_view to, LinkKind kind) const {
  return std::ranges::any_of(out_edges(from), [&](const EpisodicEdge* e) {
    return e->to == to && e->kind == kind;
  });
}

bool ArchiveState::ds_reachable(std::string_view from, std::string_view to) const {
  std::set<std::string, std::less<>> seen{std::string(from)};
  std::vector<std::string> stack{std::string(from)};
  while (!stack.empty()) {
    const auto node = std::move(stack.back());
    stack.pop_back();
    if (node == to) return true;
    for (const auto* e : out_edges(node)) {
      if (e->kind == LinkKind::DS && seen.insert(e->to).second) stack.push_back(e->to);
    }
  }
  return false;
}

ContextSubgraph ArchiveState::episodic_context(std::string_view ie, int depth) const {
  auto focus_it = elements.find(std::string(ie));
  if (focus_it == elements.end()) {
    throw Error(ErrorCode::unknown_element, "unknown element '" + std::string(ie) + "'");
  }
  if (depth < 1) throw Error(ErrorCode::invalid_argument, "depth must be a positive integer");

  std::map<std::string, int> hops{{focus_it->first, 0}};
  std::map<std::string, std::set<ContextVia>> via;
  std::vector<std::string> frontier{focus_it->first};
  for (int d = 1; d <= depth && !frontier.empty(); ++d) {
    std::set<std::string> next;
    auto reach = [&](const std::string& node, ContextVia v) {
      auto [it, inserted] = hops.emplace(node, d);
      if (inserted) next.insert(node);
      if (it->second == d) via[node].insert(std::move(v));
    };
    for (const auto& node : frontier) {
      for (const auto* e : out_edges(node)) reach(e->to, {node, e->kind, Direction::out});
      for (const auto* e : in_edges(node)) reach(e->from, {node, e->kind, Direction::in});
    }
    frontier.assign(next.begin(), next.end());
  }

  ContextSubgraph g;
  g.focus = focus_it->first;
  g.instance = focus_it->second.instance;
  g.depth = depth;
  for (const auto& [id, h] : hops) {
    ContextNode n;
    n.ie = id;
    n.hops = h;
    if (auto el = elements.find(id); el != elements.end()) {
      n.instance = el->second.instance;
      n.activity = el->second.activity;
      n.category = el->second.category;
    }
    n.external = n.instance != *g.instance;
    if (auto v = via.find(id); v != via.end()) n.via.assign(v->second.begin(), v->second.end());
    g.nodes.push_back(std::move(n));
  }
  std::ranges::sort(g.nodes, {}, [](const ContextNode& n) { return std::pair(n.hops, n.ie); });
  for (const auto& e : edges) {
    if (hops.contains(e.from) && hops.contains(e.to)) g.edges.push_back(e);
  }
  std::ranges::sort(g.edges, edge_less);
  return g;
}

ContextSubgraph ArchiveState::instance_graph(std::string_view instance) const {
  if (!instances.contains(std::string(instance))) {
    throw Error(ErrorCode::unknown_instance, "unknown instance '" + std::string(instance) + "'");
  }
  ContextSubgraph g;
  g.instance = std::string(instance);
  std::set<std::string> members, external;
  for (const auto& [id, e] : elements) {
    if (e.instance == instance) members.insert(id);
  }
  for (const auto& e : edges) {
    const bool from_in = members.contains(e.from);
    const bool to_in = members.contains(e.to);
    if (!from_in && !to_in) continue;
    g.edges.push_back(e);
    if (!from_in) external.insert(e.from);
    if (!to_in) external.insert(e.to);
  }
  auto add = [&](const std::string& id, bool is_external) {
    ContextNode n;
    n.ie = id;
    n.external = is_external;
    if (auto el = elements.find(id); el != elements.end()) {
      n.instance = el->second.instance;
      n.activity = el->second.activity;
      n.category = el->second.category;
    }
    g.nodes.push_back(std::move(n));
  };
  for (const auto& id : members) add(id, false);
  for (const auto& id : external) add(id, true);
  std::ranges::sort(g.nodes, {}, &ContextNode::ie);
  std::ranges::sort(g.edges, edge_less);
  return g;
}

ProfileReport ArchiveState::expertise_profile(std::string_view actor) const {
  std::map<std::tuple<SchemaRef, std::string, std::string>, ProfileEntry> grouped;
  for (const auto& [id, e] : elements) {
    if (e.author != actor) continue;
    SchemaRef schema;
    if (auto t = instances.find(e.instance); t != instances.end()) schema = t->second.schema;
    std::string activity;
    if (auto a = activities.find(e.activity); a != activities.end()) activity = a->second.category;
    auto& entry = grouped[{schema, activity, e.category}];
    entry.schema = schema;
    entry.activity_category = activity;
    entry.content_category = e.category;
    ++entry.count;
    entry.evidence.push_back(id);
  }
  ProfileReport report;
  report.actor = std::string(actor);
  for (auto& [_, entry] : grouped) report.entries.push_back(std::move(entry));
  return report;
}

ValidationReport ArchiveState::integrity_check() const {
  ValidationReport report;
  auto error = [&](std::string code, std::string message) {
    report.errors.push_back({std::move(code), std::move(message)});
  };

  for (const auto& [id, t] : instances) {
    if (!schemas.contains(t.schema)) {
      error("unresolvable_schema", "instance " + id + " pins unknown schema " + to_string(t.schema));
    }
    if ((t.status == InstanceStatus::closed) != t.closed_at.has_value()) {
      error("status_mismatch", "instance " + id + " status disagrees with closed_at");
    }
    if (t.closed_at && *t.closed_at < t.started_at) {
      error("time_order", "instance " + id + " closed before it started");
    }
  }

  std::map<std::string, int> active_count;
  for (const auto& [id, a] : activities) {
    auto t = instances.find(a.instance);
    if (t == instances.end()) {
      error("orphan_activity", "activity " + id + " belongs to unknown instance " + a.instance);
      continue;
    }
    const auto* schema = schema_of_instance(a.instance);
    if (schema && !schema->find_activity(a.category)) {
      error("unknown_category", "activity " + id + " has unknown category " + a.category);
    }
    if ((a.status == ActivityStatus::ended) != a.ended_at.has_value()) {
      error("status_mismatch", "activity " + id + " status disagrees with ended_at");
    }
    if (a.ended_at && *a.ended_at < a.started_at) {
      error("time_order", "activity " + id + " ended before it started");
    }
    if (a.status == ActivityStatus::active) {
      ++active_count[a.instance];
      if (t->second.status == InstanceStatus::closed) {
        error("active_in_closed_instance", "activity " + id + " still active in closed instance");
      }
    }
  }
  for (const auto& [instance, n] : active_count) {
    if (n > 1) error("multiple_active", "instance " + instance + " has " + std::to_string(n) + " active activities");
  }

  for (const auto& [id, e] : elements) {
    if (!instances.contains(e.instance)) {
      error("orphan_element", "element " + id + " belongs to unknown instance " + e.instance);
      continue;
    }
    auto a = activities.find(e.activity);
    if (a == activities.end()) {
      error("unknown_activity", "element " + id + " refers to unknown activity " + e.activity);
    } else if (a->second.instance != e.instance) {
      error("activity_instance_mismatch", "element " + id + " activity belongs to another instance");
    }
    const auto* schema = schema_of_instance(e.instance);
    if (schema && !schema->find_content(e.category)) {
      error("unknown_category", "element " + id + " has unknown category " + e.category);
    }
    if (e.body.find_first_not_of(" \t\r\n") == std::string::npos) {
      error("empty_body", "element " + id + " has an empty body");
    }
    if (schema && a != activities.end() && !e.override_mark &&
        !schema->has_association(a->second.category, e.category, AssocRole::produces)) {
      error("produces_mismatch", "element " + id + " category " + e.category +
                                     " is not produced by " + a->second.category);
    }
  }

  std::set<std::tuple<std::string, std::string, LinkKind>> seen;
  for (const auto& e : edges) {
    const auto what = "edge " + e.from + " -" + std::string(to_string(e.kind)) + "-> " + e.to;
    auto from = elements.find(e.from);
    auto to = elements.find(e.to);
    if (from == elements.end() || to == elements.end()) {
      error("dangling_edge", what + " has a missing endpoint");
      continue;
    }
    if (e.from == e.to) error("self_loop", what + " is a self-loop");
    if (!seen.emplace(e.from, e.to, e.kind).second) error("duplicate_edge", what + " is duplicated");
    if (e.kind == LinkKind::DS && from->second.instance != to->second.instance) {
      error("ds_cross_instance", what + " crosses task instances");
    }
  }

  // DS acyclicity via topological sort.
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> ds_out;
  for (const auto& e : edges) {
    if (e.kind != LinkKind::DS || !elements.contains(e.from) || !elements.contains(e.to)) continue;
    indegree.try_emplace(e.from, 0);
    ++indegree[e.to];
    ds_out[e.from].push_back(e.to);
  }
  std::deque<std::string> ready;
  for (const auto& [n, d] : indegree) {
    if (d == 0) ready.push_back(n);
  }
  std::size_t sorted = 0;
  while (!ready.empty()) {
    const auto n = ready.front();
    ready.pop_front();
    ++sorted;
    for (const auto& m : ds_out[n]) {
      if (--indegree[m] == 0) ready.push_back(m);
    }
  }
  if (sorted != indegree.size()) error("ds_cycle", "DS subgraph contains a cycle");
  return report;
}

Json ArchiveState::canonical_export() const {
  Json doc = Json::object();
  doc["seq"] = seq;
  doc["schemas"] = Json::array();
  for (const auto& [_, s] : schemas) doc["schemas"].push_back(schema_to_json(s));
  doc["instances"] = Json::array();
  for (const auto& [_, t] : instances) doc["instances"].push_back(to_json(t));
  doc["activities"] = Json::array();
  for (const auto& [_, a] : activities) doc["activities"].push_back(to_json(a));
  doc["elements"] = Json::array();
  for (const auto& [_, e] : elements) doc["elements"].push_back(to_json(e));
  std::vector<const EpisodicEdge*> sorted;
  for (const auto& e : edges) sorted.push_back(&e);
  std::ranges::sort(sorted, [](const EpisodicEdge* a, const EpisodicEdge* b) { return edge_less(*a, *b); });
  doc["edges"] = Json::array();
  for (const auto* e : sorted) doc["edges"].push_back(to_json(*e));
  return doc;
}

ArchiveState ArchiveState::from_export(const Json& doc) {
  ArchiveState s;
  try {
    s.seq = doc.at("seq").get<std::uint64_t>();
    for (const auto& j : doc.at("schemas")) {
      auto schema = schema_from_json(j);
      s.schemas.emplace(schema.ref(), std::move(schema));
    }
    for (const auto& j : doc.at("instances")) {
      auto t = instance_from_json(j);
      s.instances.emplace(t.id, std::move(t));
    }
    for (const auto& j : doc.at("activities")) {
      auto a = activity_from_json(j);
      s.activities.emplace(a.id, std::move(a));
    }
    for (const auto& j : doc.at("elements")) {
      auto e = element_from_json(j);
      s.elements.emplace(e.id, std::move(e));
    }
    for (const auto& j : doc.at("edges")) s.edges.push_back(edge_from_json(j));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::journal_corrupt, std::string("unreadable snapshot: ") + e.what());
  }
  s.rebuild_adjacency();
  return s;
}

// ---------------------------------------------------------------------------
// Journal

JournalRecord parse_journal_line(std::string_view line, std::uint64_t expected_seq) {
  JournalRecord r;
  try {
    const auto j = Json::parse(line.begin(), line.end());
    r.seq = j.at("seq").get<std::uint64_t>();
    r.ts = parse_timestamp(j.at("ts").get<std::string>());
    r.op = j.at("op").get<std::string>();
    r.payload = j.at("payload");
    if (!r.payload.is_object()) corrupt(expected_seq, "payload is not an object");
  } catch (const Json::exception& e) {
    corrupt(expected_seq, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::journal_corrupt) throw;
    corrupt(expected_seq, e.what());
  }
  return r;
}

namespace {

constexpr const char* kJournalFile = "journal.ndjson";

std::shared_ptr<Clock> choose_clock(const ArchiveOptions& options) {
  if (options.clock) return options.clock;
  if (options.seed) return std::make_shared<LogicalClock>();
  return std::make_shared<SystemClock>();
}

std::uint64_t choose_seed(const ArchiveOptions& options) {
  if (options.seed) return *options.seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace

Archive::Archive(ArchiveOptions options)
    : clock_(choose_clock(options)), rng_(choose_seed(options)) {}

Archive::~Archive() = default;

std::unique_ptr<Archive> Archive::open(const std::filesystem::path& dir, ArchiveOptions options) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());

  std::vector<JournalRecord> records;
  if (std::ifstream in(dir / kJournalFile); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto expected = records.size() + 1;
      auto r = parse_journal_line(line, expected);
      if (r.seq > expected) {
        throw Error(ErrorCode::journal_gap, "journal gap: missing seq " + std::to_string(expected));
      }
      if (r.seq < expected) {
        corrupt(expected, "seq " + std::to_string(r.seq) + " out of order");
      }
      records.push_back(std::move(r));
    }
  }

  // Newest snapshot not ahead of the journal.
  std::optional<std::pair<std::uint64_t, fs::path>> snapshot;
  static const std::regex kSnapshotName(R"(snapshot-(\d+)\.json)");
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (!std::regex_match(name, m, kSnapshotName)) continue;
    const auto seq = std::stoull(m[1].str());
    if (seq <= records.size() && (!snapshot || seq > snapshot->first)) {
      snapshot.emplace(seq, entry.path());
    }
  }

  auto archive = std::make_unique<Archive>(std::move(options));
  archive->dir_ = dir;
  std::uint64_t start = 0;
  if (snapshot) {
    std::ifstream in(snapshot->second);
    Json doc;
    try {
      doc = Json::parse(in);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::journal_corrupt,
                  "unreadable snapshot " + snapshot->second.string() + ": " + e.what());
    }
    archive->state_ = ArchiveState::from_export(doc.at("state"));
    archive->state_.last_ts = doc.value("last_ts", Millis{0});
    if (archive->state_.seq != snapshot->first) {
      throw Error(ErrorCode::journal_corrupt, "snapshot seq mismatch in " + snapshot->second.string());
    }
    start = snapshot->first;
  }
  for (const auto& r : records) {
    if (r.seq > start) archive->state_.apply(r);
  }
  return archive;
}

Millis Archive::stamp() { return std::max(clock_->now(), state_.last_ts); }

std::string Archive::fresh_id(std::string_view prefix, Millis ts) {
  for (;;) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*s-%013lld-%08x", static_cast<int>(prefix.size()),
                  prefix.data(), static_cast<long long>(ts),
                  static_cast<unsigned>(rng_() & 0xffffffffu));
    std::string id = buf;
    if (!state_.instances.contains(id) && !state_.activities.contains(id) &&
        !state_.elements.contains(id)) {
      return id;
    }
  }
}

void Archive::commit(std::string op, Json payload, Millis ts) {
  JournalRecord r{state_.seq + 1, ts, std::move(op), std::move(payload)};
  if (dir_) {
    std::ofstream out(*dir_ / kJournalFile, std::ios::app | std::ios::binary);
    out << to_json(r).dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::io_error, "journal append failed in " + dir_->string());
  }
  state_.apply(r);
  view_.reset();
}

SchemaRef Archive::load_schema(const TaskTypeSchema& schema) {
  const auto report = validate_schema(schema);
  if (!report.ok()) {
    throw Error(ErrorCode::invalid_schema, "schema " + to_string(schema.ref()) +
                                               " is invalid: " + report.errors.front().message);
  }
  std::unique_lock lock(mutex_);
  if (state_.schemas.contains(schema.ref())) {
    throw Error(ErrorCode::duplicate_schema, "schema " + to_string(schema.ref()) + " already loaded");
  }
  commit("load_schema", {{"schema", schema_to_json(schema)}}, stamp());
  return schema.ref();
}

TaskInstance Archive::begin_instance(const SchemaRef& schema, const std::string& title,
                                     const std::string& actor) {
  std::unique_lock lock(mutex_);
  if (!state_.schemas.contains(schema)) {
    throw Error(ErrorCode::unknown_schema, "unknown schema " + to_string(schema));
  }
  if (actor.empty()) throw Error(ErrorCode::invalid_argument, "actor must not be empty");
  const auto ts = stamp();
  TaskInstance t{fresh_id("ti", ts), schema, title, actor, InstanceStatus::open, ts, std::nullopt};
  commit("begin_instance", {{"instance", to_json(t)}}, ts);
  return t;
}

TaskInstance Archive::close_instance(const std::string& instance) {
  std::unique_lock lock(mutex_);
  auto it = state_.instances.find(instance);
  if (it == state_.instances.end()) {
    throw Error(ErrorCode::unknown_instance, "unknown instance '" + instance + "'");
  }
  if (it->second.status == InstanceStatus::closed) {
    throw Error(ErrorCode::instance_closed, "instance " + instance + " is already closed");
  }
  if (const auto* a = state_.active_activity(instance)) {
    throw Error(ErrorCode::activity_still_active,
                "instance " + instance + " has active activity " + a->id);
  }
  commit("close_instance", {{"id", instance}}, stamp());
  return state_.instances.at(instance);
}

ActivityInstance Archive::begin_activity(const std::string& instance, const std::string& category) {
  std::unique_lock lock(mutex_);
  auto it = state_.instances.find(instance);
  if (it == state_.instances.end()) {
    throw Error(ErrorCode::unknown_instance, "unknown instance '" + instance + "'");
  }
  if (it->second.status == InstanceStatus::closed) {
    throw Error(ErrorCode::instance_closed, "instance " + instance + " is closed");
  }
  const auto* schema = state_.schema_of_instance(instance);
  if (!schema || !schema->find_activity(category)) {
    throw Error(ErrorCode::unknown_category, "activity category '" + category +
                                                 "' not in schema " + to_string(it->second.schema));
  }
  if (const auto* a = state_.active_activity(instance)) {
    throw Error(ErrorCode::activity_already_active,
                "instance " + instance + " already has active activity " + a->id);
  }
  const auto ts = stamp();
  ActivityInstance a{fresh_id("ai", ts), instance, category, ActivityStatus::active, ts,
                     std::nullopt};
  commit("begin_activity", {{"activity", to_json(a)}}, ts);
  return a;
}

ActivityInstance Archive::end_activity(const std::string& activity) {
  std::unique_lock lock(mutex_);
  auto it = state_.activities.find(activity);
  if (it == state_.activities.end()) {
    throw Error(ErrorCode::unknown_activity, "unknown activity '" + activity + "'");
  }
  if (it->second.status == ActivityStatus::ended) {
    throw Error(ErrorCode::activity_not_active, "activity " + activity + " already ended");
  }
  commit("end_activity", {{"id", activity}}, stamp());
  return state_.activities.at(activity);
}

RecordResult Archive::record_element(const RecordRequest& req) {
  std::unique_lock lock(mutex_);
  auto inst = state_.instances.find(req.instance);
  if (inst == state_.instances.end()) {
    throw Error(ErrorCode::unknown_instance, "unknown instance '" + req.instance + "'");
  }
  if (inst->second.status == InstanceStatus::closed) {
    throw Error(ErrorCode::instance_closed, "instance " + req.instance + " is closed");
  }
  auto act = state_.activities.find(req.activity);
  if (act == state_.activities.end()) {
    throw Error(ErrorCode::unknown_activity, "unknown activity '" + req.activity + "'");
  }
  if (act->second.instance != req.instance) {
    throw Error(ErrorCode::activity_instance_mismatch,
                "activity " + req.activity + " does not belong to instance " + req.instance);
  }
  if (act->second.status != ActivityStatus::active) {
    throw Error(ErrorCode::activity_not_active, "activity " + req.activity + " is not active");
  }
  const auto* schema = state_.schema_of_instance(req.instance);
  if (!schema || !schema->find_content(req.category)) {
    throw Error(ErrorCode::unknown_category, "content category '" + req.category + "' not in schema");
  }
  if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::empty_body, "element body must not be empty");
  }
  if (req.author.empty()) throw Error(ErrorCode::invalid_argument, "author must not be empty");
  const bool produced =
      schema->has_association(act->second.category, req.category, AssocRole::produces);
  if (!produced && !req.override_produces) {
    throw Error(ErrorCode::produces_mismatch, "activity category " + act->second.category +
                                                  " does not produce " + req.category);
  }
  auto check_targets = [&](const std::vector<std::string>& targets, LinkKind kind) {
    std::set<std::string> seen;
    for (const auto& t : targets) {
      auto it = state_.elements.find(t);
      if (it == state_.elements.end()) {
        throw Error(ErrorCode::unknown_target, "unknown target element '" + t + "'");
      }
      if (!seen.insert(t).second) {
        throw Error(ErrorCode::duplicate_edge, "target '" + t + "' listed twice");
      }
      if (kind == LinkKind::DS && it->second.instance != req.instance) {
        throw Error(ErrorCode::ds_cross_instance, "DS target '" + t + "' is in another instance");
      }
    }
  };
  check_targets(req.ds_targets, LinkKind::DS);
  check_targets(req.rs_targets, LinkKind::RS);

  const auto ts = stamp();
  RecordResult result;
  auto& e = result.element;
  e.id = fresh_id("ie", ts);
  e.instance = req.instance;
  e.activity = req.activity;
  e.category = req.category;
  e.author = req.author;
  e.created_at = ts;
  e.body = req.body;
  e.attachments = req.attachments;
  e.override_mark = !produced;
  Json edges = Json::array();
  for (const auto& t : req.ds_targets) {
    result.edges.push_back({e.id, t, LinkKind::DS, ts, std::nullopt});
    edges.push_back(to_json(result.edges.back()));
  }
  for (const auto& t : req.rs_targets) {
    result.edges.push_back({e.id, t, LinkKind::RS, ts, std::nullopt});
    edges.push_back(to_json(result.edges.back()));
  }
  commit("record_element", {{"element", to_json(e)}, {"edges", std::move(edges)}}, ts);
  return result;
}

EpisodicEdge Archive::link_elements(const std::string& from, const std::string& to, LinkKind kind,
                                    std::optional<std::string> note) {
  std::unique_lock lock(mutex_);
  auto f = state_.elements.find(from);
  if (f == state_.elements.end()) {
    throw Error(ErrorCode::unknown_element, "unknown element '" + from + "'");
  }
  auto t = state_.elements.find(to);
  if (t == state_.elements.end()) {
    throw Error(ErrorCode::unknown_target, "unknown target element '" + to + "'");
  }
  if (from == to) throw Error(ErrorCode::self_loop, "an element cannot link to itself");
  if (state_.has_edge(from, to, kind)) {
    throw Error(ErrorCode::duplicate_edge, std::string(to_string(kind)) + " edge " + from +
                                               " -> " + to + " already exists");
  }
  if (kind == LinkKind::DS) {
    if (f->second.instance != t->second.instance) {
      throw Error(ErrorCode::ds_cross_instance, "DS edges must stay within one task instance");
    }
    if (state_.ds_reachable(to, from)) {
      throw Error(ErrorCode::ds_cycle, "DS edge " + from + " -> " + to + " would close a cycle");
    }
  }
  const auto ts = stamp();
  EpisodicEdge e{from, to, kind, ts, std::move(note)};
  commit("link_elements", {{"edge", to_json(e)}}, ts);
  return e;
}

InformationElement Archive::retract_element(const std::string& element) {
  std::unique_lock lock(mutex_);
  auto it = state_.elements.find(element);
  if (it == state_.elements.end()) {
    throw Error(ErrorCode::unknown_element, "unknown element '" + element + "'");
  }
  if (it->second.retracted) {
    throw Error(ErrorCode::already_retracted, "element " + element + " is already retracted");
  }
  commit("retract_element", {{"id", element}}, stamp());
  return state_.elements.at(element);
}

std::filesystem::path Archive::write_snapshot() {
  std::shared_lock lock(mutex_);
  if (!dir_) return {};
  const auto path = *dir_ / ("snapshot-" + std::to_string(state_.seq) + ".json");
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    Json doc = {{"seq", state_.seq}, {"last_ts", state_.last_ts}, {"state", state_.canonical_export()}};
    out << doc.dump() << '\n';
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
  return path;
}

std::uint64_t Archive::seq() const {
  std::shared_lock lock(mutex_);
  return state_.seq;
}

std::shared_ptr<const ArchiveState> Archive::view() const {
  // Writers reset view_ under the unique lock, so a unique lock here is the
  // simplest way to fill the cache without racing other readers.
  std::unique_lock lock(mutex_);
  if (!view_) view_ = std::make_shared<const ArchiveState>(state_);
  return view_;
}

std::optional<TaskTypeSchema> Archive::schema(const SchemaRef& ref) const {
  std::shared_lock lock(mutex_);
  auto it = state_.schemas.find(ref);
  if (it == state_.schemas.end()) return std::nullopt;
  return it->second;
}

ContextSubgraph Archive::episodic_context(std::string_view ie, int depth) const {
  std::shared_lock lock(mutex_);
  return state_.episodic_context(ie, depth);
}

ContextSubgraph Archive::instance_graph(std::string_view instance) const {
  std::shared_lock lock(mutex_);
  return state_.instance_graph(instance);
}

ProfileReport Archive::expertise_profile(std::string_view actor) const {
  std::shared_lock lock(mutex_);
  return state_.expertise_profile(actor);
}

ValidationReport Archive::integrity_check() const {
  std::shared_lock lock(mutex_);
  return state_.integrity_check();
}

Json Archive::canonical_export() const {
  std::shared_lock lock(mutex_);
  return state_.canonical_export();
}

}  // namespace iw
