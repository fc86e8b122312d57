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

#include "iw/service.hpp"

#include <fstream>
#include <random>

#include "iw/error.hpp"

namespace iw {

ServiceConfig ServiceConfig::from_json(const Json& doc, const std::filesystem::path& base_dir) {
  ServiceConfig c;
  try {
    if (doc.contains("listen")) {
      const auto listen = doc.at("listen").get<std::string>();
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorCode::invalid_argument, "listen must be host:port");
      c.host = listen.substr(0, colon);
      c.port = std::stoi(listen.substr(colon + 1));
    }
    if (doc.contains("archive_dir")) {
      std::filesystem::path dir = doc.at("archive_dir").get<std::string>();
      c.archive_dir = (dir.is_relative() && !base_dir.empty() ? base_dir / dir : dir).lexically_normal();
    }
    if (doc.contains("scoring")) c.scoring = ScoringConfig::from_json(doc.at("scoring"));
    if (doc.contains("admin_actors")) c.admin_actors = doc.at("admin_actors").get<std::vector<std::string>>();
    if (doc.contains("seed") && !doc.at("seed").is_null()) c.seed = doc.at("seed").get<std::uint64_t>();
    c.auto_reindex = doc.value("auto_reindex", false);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad config: ") + e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad config: ") + e.what());
  }
  return c;
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::io_error, "cannot read config " + file.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::syntax_error, file.string() + ": " + e.what());
  }
  return from_json(doc, file.parent_path());
}

namespace {

ApiResponse error_response(const Error& e) {
  return {http_status(e.code()),
          {{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}}};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : path) {
    if (c == '/') {
      if (!current.empty()) parts.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) parts.push_back(std::move(current));
  return parts;
}

Json parse_body(const ApiRequest& request) {
  if (request.body.empty()) return Json::object();
  try {
    auto doc = Json::parse(request.body);
    if (!doc.is_object()) throw Error(ErrorCode::syntax_error, "request body must be a JSON object");
    return doc;
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::syntax_error, std::string("malformed JSON body: ") + e.what());
  }
}

template <class T>
T field(const Json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end()) throw Error(ErrorCode::invalid_argument, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::invalid_argument, std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const Json& body, const char* key, T fallback) {
  if (!body.contains(key) || body.at(key).is_null()) return fallback;
  return field<T>(body, key);
}

SchemaRef schema_ref(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "schema reference must be {id, version}");
  return {field<std::string>(j, "id"), field<int>(j, "version")};
}

int parse_int(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(what);
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::invalid_argument, std::string(what) + " must be an integer");
  }
}

std::string random_token() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

}  // namespace

Service::Service(Archive& archive, ServiceConfig config)
    : archive_(archive), config_(std::move(config)) {
  index_ = std::make_shared<const PostingsIndex>(build_index(*archive_.view(), config_.scoring.tokenizer));
}

std::shared_ptr<const PostingsIndex> Service::index() const {
  std::lock_guard lock(index_mutex_);
  return index_;
}

IndexStatus Service::reindex() {
  std::lock_guard rebuild(rebuild_mutex_);
  auto fresh = std::make_shared<const PostingsIndex>(build_index(*archive_.view(), config_.scoring.tokenizer));
  if (before_swap_) before_swap_();
  IndexStatus status{fresh->built_at_seq, fresh->doc_count};
  std::lock_guard lock(index_mutex_);
  index_ = std::move(fresh);
  return status;
}

void Service::set_before_swap_hook(std::function<void()> hook) {
  std::lock_guard rebuild(rebuild_mutex_);
  before_swap_ = std::move(hook);
}

ApiSession Service::create_session(const std::string& actor) {
  ApiSession s;
  s.actor = actor;
  s.created_at = SystemClock{}.now();
  s.admin = std::ranges::find(config_.admin_actors, actor) != config_.admin_actors.end();
  std::lock_guard lock(sessions_mutex_);
  do {
    s.token = random_token();
  } while (sessions_.contains(s.token));
  sessions_.emplace(s.token, s);
  return s;
}

ApiSession Service::authenticate(const ApiRequest& request) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(request.bearer);
  if (request.bearer.empty() || it == sessions_.end()) {
    throw Error(ErrorCode::unauthorized, "missing or invalid session token");
  }
  return it->second;
}

ApiResponse Service::handle(const ApiRequest& request) {
  try {
    return route(request);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const Json::exception& e) {
    return error_response(Error(ErrorCode::invalid_argument, e.what()));
  }
}

ApiResponse Service::route(const ApiRequest& req) {
  const auto p = split_path(req.path);
  const auto& m = req.method;
  auto is = [&](std::initializer_list<const char*> shape) {
    if (p.size() != shape.size()) return false;
    std::size_t i = 0;
    for (const char* s : shape) {
      if (s[0] != '*' && p[i] != s) return false;
      ++i;
    }
    return true;
  };
  if (p.empty() || p[0] != "api") {
    return {404, {{"error", {{"code", "no_route"}, {"message", "no route for " + req.path}}}}};
  }

  if (m == "POST" && is({"api", "sessions"})) {
    const auto body = parse_body(req);
    const auto actor = field<std::string>(body, "actor");
    if (actor.empty()) throw Error(ErrorCode::invalid_argument, "actor must not be empty");
    const auto s = create_session(actor);
    return {201, {{"token", s.token}, {"actor", s.actor}, {"admin", s.admin},
                  {"created_at", format_timestamp(s.created_at)}}};
  }

  const auto session = authenticate(req);

  if (m == "POST" && is({"api", "schemas"})) {
    const auto schema = parse_schema(req.body);
    const auto report = validate_schema(schema);
    if (!report.ok()) {
      ApiResponse r = error_response(Error(ErrorCode::invalid_schema, report.errors.front().message));
      r.body["error"]["findings"] = report.to_json();
      return r;
    }
    archive_.load_schema(schema);
    return {201, {{"schema", {{"id", schema.id}, {"version", schema.version}}},
                  {"warnings", report.to_json()["warnings"]}}};
  }
  if (m == "GET" && is({"api", "schemas", "*", "*"})) {
    const SchemaRef ref{p[2], parse_int(p[3], "version")};
    auto schema = archive_.schema(ref);
    if (!schema) throw Error(ErrorCode::unknown_schema, "unknown schema " + to_string(ref));
    return {200, schema_to_json(*schema)};
  }
  if (m == "POST" && is({"api", "instances"})) {
    const auto body = parse_body(req);
    const auto t = archive_.begin_instance(schema_ref(body.at("schema")),
                                           field_or<std::string>(body, "title", ""), session.actor);
    return {201, to_json(t)};
  }
  if (m == "PATCH" && is({"api", "instances", "*"})) {
    const auto body = parse_body(req);
    if (field_or<std::string>(body, "status", "closed") != "closed") {
      throw Error(ErrorCode::invalid_argument, "only status 'closed' is accepted");
    }
    return {200, to_json(archive_.close_instance(p[2]))};
  }
  if (m == "POST" && is({"api", "instances", "*", "activities"})) {
    const auto body = parse_body(req);
    return {201, to_json(archive_.begin_activity(p[2], field<std::string>(body, "category")))};
  }
  if (m == "PATCH" && is({"api", "activities", "*"})) {
    const auto body = parse_body(req);
    if (field_or<std::string>(body, "status", "ended") != "ended") {
      throw Error(ErrorCode::invalid_argument, "only status 'ended' is accepted");
    }
    return {200, to_json(archive_.end_activity(p[2]))};
  }
  if (m == "POST" && is({"api", "instances", "*", "elements"})) {
    const auto body = parse_body(req);
    RecordRequest r;
    r.instance = p[2];
    r.activity = field<std::string>(body, "activity");
    r.category = field<std::string>(body, "category");
    r.body = field<std::string>(body, "body");
    r.author = session.actor;
    r.ds_targets = field_or<std::vector<std::string>>(body, "ds_refs", {});
    r.rs_targets = field_or<std::vector<std::string>>(body, "rs_refs", {});
    r.attachments = field_or<std::vector<std::string>>(body, "attachments", {});
    r.override_produces = field_or<bool>(body, "override", false);
    const auto result = archive_.record_element(r);
    Json edges = Json::array();
    for (const auto& e : result.edges) edges.push_back(to_json(e));
    return {201, {{"element", to_json(result.element)}, {"edges", std::move(edges)}}};
  }
  if (m == "POST" && is({"api", "elements", "*", "links"})) {
    const auto body = parse_body(req);
    const auto kind = parse_link_kind(field<std::string>(body, "kind"));
    if (!kind) throw Error(ErrorCode::invalid_argument, "kind must be DS or RS");
    std::optional<std::string> note;
    if (body.contains("note") && !body.at("note").is_null()) note = field<std::string>(body, "note");
    return {201, to_json(archive_.link_elements(p[2], field<std::string>(body, "to"), *kind, note))};
  }
  if (m == "GET" && is({"api", "elements", "*", "context"})) {
    int depth = 1;
    if (auto it = req.query.find("depth"); it != req.query.end()) depth = parse_int(it->second, "depth");
    const auto view = archive_.view();
    const auto episodic = view->episodic_context(p[2], depth);
    const auto& element = view->elements.at(p[2]);
    Json categorical = nullptr;
    const auto* schema = view->schema_of_instance(element.instance);
    auto act = view->activities.find(element.activity);
    if (schema && act != view->activities.end() && schema->find_activity(act->second.category)) {
      categorical = categorical_context(*schema, act->second.category, 1).to_json();
    }
    return {200, {{"episodic", episodic.to_json()}, {"categorical", std::move(categorical)}}};
  }
  if (m == "POST" && is({"api", "search"})) {
    const auto body = parse_body(req);
    const auto query = field<std::string>(body, "query");
    const auto k = field_or<long long>(body, "k", 10);
    if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be at least 1");
    const bool semantic = field_or<bool>(body, "semantic", false);
    if (config_.auto_reindex && index()->built_at_seq < archive_.seq()) reindex();
    const auto idx = index();
    const auto view = archive_.view();
    std::vector<Hit> hits;
    const auto ctx_it = body.find("context");
    if (ctx_it != body.end() && !ctx_it->is_null()) {
      const auto& cj = *ctx_it;
      WorkContext ctx;
      ctx.instance = field<std::string>(cj, "instance");
      ctx.activity_category = field<std::string>(cj, "activity_category");
      auto inst = view->instances.find(ctx.instance);
      if (inst == view->instances.end()) {
        throw Error(ErrorCode::unresolvable_context, "unknown instance '" + ctx.instance + "' in work context");
      }
      ctx.schema = cj.contains("schema") ? schema_ref(cj.at("schema")) : inst->second.schema;
      if (ctx.schema != inst->second.schema) {
        throw Error(ErrorCode::unresolvable_context, "work context schema differs from the instance's pinned schema");
      }
      auto schema = view->schemas.find(ctx.schema);
      if (schema == view->schemas.end()) {
        throw Error(ErrorCode::unresolvable_context, "unknown schema " + to_string(ctx.schema));
      }
      hits = contextual_search(*idx, schema->second, query, ctx, static_cast<std::size_t>(k), semantic,
                               config_.scoring);
    } else {
      hits = search(*idx, query, static_cast<std::size_t>(k), config_.scoring.bm25);
    }
    // Hits for IEs the current view no longer has cannot occur: IEs are never deleted.
    hits = annotate_hits(*view, std::move(hits), idx->tokenizer);
    Json out = Json::array();
    for (const auto& h : hits) out.push_back(h.to_json());
    return {200, {{"hits", std::move(out)}, {"built_at_seq", idx->built_at_seq}}};
  }
  if (m == "GET" && is({"api", "instances", "*", "graph"})) {
    return {200, archive_.instance_graph(p[2]).to_json()};
  }
  if (m == "GET" && is({"api", "actors", "*", "profile"})) {
    return {200, archive_.expertise_profile(p[2]).to_json()};
  }
  if (m == "POST" && is({"api", "admin", "reindex"})) {
    if (!session.admin) throw Error(ErrorCode::forbidden, "reindex requires an admin session");
    const auto status = reindex();
    return {200, {{"built_at_seq", status.built_at_seq}, {"documents", status.documents}}};
  }
  return {404, {{"error", {{"code", "no_route"}, {"message", "no route for " + m + " " + req.path}}}}};
}

}  // namespace iw
