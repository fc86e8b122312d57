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

#include <doctest.h>

#include <atomic>
#include <future>

#include "http_target.hpp"
#include "iw/error.hpp"
#include "iw/service.hpp"
#include "support.hpp"

using namespace iw;
using iw::testing::fixture;
using iw::testing::read_text;
using iw::testing::replay_fixture;

namespace {

/// Drives a Service through handle() with per-actor sessions.
struct Client {
  Service& service;
  std::map<std::string, std::string> tokens;

  ApiResponse send(const std::string& method, const std::string& path, const Json& body = nullptr,
                   const std::string& actor = "dr-rao", std::map<std::string, std::string> query = {}) {
    ApiRequest r;
    r.method = method;
    r.path = path;
    r.query = std::move(query);
    r.body = body.is_null() ? "" : body.dump();
    if (!actor.empty()) r.bearer = token(actor);
    return service.handle(r);
  }

  std::string token(const std::string& actor) {
    if (auto it = tokens.find(actor); it != tokens.end()) return it->second;
    auto r = service.handle({"POST", "/api/sessions", {}, Json{{"actor", actor}}.dump(), ""});
    REQUIRE(r.status == 201);
    return tokens[actor] = r.body.at("token").get<std::string>();
  }
};

std::string error_of(const ApiResponse& r) { return r.body.at("error").at("code").get<std::string>(); }

struct Fixture {
  std::unique_ptr<Archive> archive;
  ReplayResult ids;
  Service service;
  Client client{service};

  explicit Fixture(const std::string& script, ServiceConfig config = {})
      : Fixture(replay_fixture(script), std::move(config)) {}

 private:
  Fixture(iw::testing::Replayed r, ServiceConfig config)
      : archive(std::move(r.archive)), ids(std::move(r.ids)), service(*archive, std::move(config)) {}
};

}  // namespace

TEST_CASE("sessions and authorization") {
  Fixture f("patient-a.scenario.json");
  auto r = f.service.handle({"POST", "/api/sessions", {}, R"({"actor":"dr-rao"})", ""});
  CHECK(r.status == 201);
  CHECK(r.body["actor"] == "dr-rao");
  CHECK_FALSE(r.body["admin"].get<bool>());
  CHECK(r.body["token"].get<std::string>().size() == 32);

  CHECK(f.service.handle({"POST", "/api/sessions", {}, R"({"actor":""})", ""}).status == 422);
  CHECK(f.service.handle({"POST", "/api/sessions", {}, "{not json", ""}).status == 422);

  const auto missing = f.service.handle({"GET", "/api/instances/x/graph", {}, "", ""});
  CHECK(missing.status == 401);
  CHECK(error_of(missing) == "unauthorized");
  CHECK(f.service.handle({"GET", "/api/instances/x/graph", {}, "", "forged"}).status == 401);

  const auto denied = f.client.send("POST", "/api/admin/reindex");
  CHECK(denied.status == 403);
  CHECK(error_of(denied) == "forbidden");
  const auto ok = f.client.send("POST", "/api/admin/reindex", nullptr, "admin");
  CHECK(ok.status == 200);
  CHECK(ok.body["documents"] == 6);

  CHECK(f.client.send("GET", "/nowhere").status == 404);
  CHECK(f.client.send("DELETE", "/api/instances").status == 404);
}

TEST_CASE("capture flow") {
  Fixture f("patient-a.scenario.json");
  auto& c = f.client;
  auto inst = c.send("POST", "/api/instances", {{"schema", {{"id", "patient-care"}, {"version", 1}}}, {"title", "P"}});
  REQUIRE(inst.status == 201);
  const auto instance = inst.body["id"].get<std::string>();
  CHECK(inst.body["actor"] == "dr-rao");
  CHECK(inst.body["status"] == "open");

  auto begin = [&](const std::string& category) {
    auto r = c.send("POST", "/api/instances/" + instance + "/activities", {{"category", category}});
    REQUIRE(r.status == 201);
    return r.body["id"].get<std::string>();
  };
  auto record = [&](const std::string& act, const std::string& category, const std::string& body,
                    Json ds = Json::array(), Json rs = Json::array()) {
    return c.send("POST", "/api/instances/" + instance + "/elements",
                  {{"activity", act}, {"category", category}, {"body", body}, {"ds_refs", ds}, {"rs_refs", rs}});
  };

  auto act = begin("Admit");
  const auto case_ie = record(act, "Case", "Fever.").body["element"]["id"].get<std::string>();
  CHECK(c.send("PATCH", "/api/activities/" + act, {{"status", "ended"}}).status == 200);

  SUBCASE("element with three edges") {
    act = begin("Examine");
    const auto ii = record(act, "Initial-Impression", "Stiff neck.").body["element"]["id"];
    const auto tr = record(act, "Test-Result", "NS1 negative.").body["element"]["id"];
    c.send("PATCH", "/api/activities/" + act, {{"status", "ended"}});
    act = begin("Diagnosis");
    const auto r = record(act, "Differential-Diagnostic", "Viral fever.", {case_ie}, {ii, tr});
    CHECK(r.status == 201);
    CHECK(r.body["edges"].size() == 3);
    CHECK(r.body["element"]["author"] == "dr-rao");
  }
  SUBCASE("status codes for rejected captures") {
    const auto ended = record(act, "Case", "again");
    CHECK(ended.status == 409);
    CHECK(error_of(ended) == "activity_not_active");
    act = begin("Examine");
    const auto mismatch = record(act, "Treatment-Plan", "Paracetamol.");
    CHECK(mismatch.status == 422);
    CHECK(error_of(mismatch) == "produces_mismatch");
    CHECK(c.send("POST", "/api/instances/" + instance + "/elements",
                 {{"activity", act}, {"category", "Treatment-Plan"}, {"body", "P."}, {"override", true}})
              .status == 201);
    CHECK(error_of(record(act, "Test-Result", "")) == "empty_body");
    CHECK(error_of(record(act, "Test-Result", "x", Json::array(), {"ie-nope"})) == "unknown_target");
    CHECK(c.send("POST", "/api/instances/" + instance + "/elements", {{"activity", act}}).status == 422);
    CHECK(c.send("POST", "/api/instances/ti-nope/activities", {{"category", "Examine"}}).status == 404);
    CHECK(c.send("PATCH", "/api/activities/ai-nope", Json::object()).status == 404);
    const auto twice = c.send("POST", "/api/instances/" + instance + "/activities", {{"category", "Diagnosis"}});
    CHECK(twice.status == 409);
    const auto still = c.send("PATCH", "/api/instances/" + instance, {{"status", "closed"}});
    CHECK(still.status == 409);
    CHECK(error_of(still) == "activity_still_active");
  }
  SUBCASE("links") {
    act = begin("Examine");
    const auto ii = record(act, "Initial-Impression", "Stiff neck.").body["element"]["id"].get<std::string>();
    auto link = c.send("POST", "/api/elements/" + ii + "/links", {{"to", case_ie}, {"kind", "RS"}, {"note", "see"}});
    CHECK(link.status == 201);
    CHECK(link.body["note"] == "see");
    CHECK(c.send("POST", "/api/elements/" + ii + "/links", {{"to", case_ie}, {"kind", "RS"}}).status == 409);
    CHECK(c.send("POST", "/api/elements/" + ii + "/links", {{"to", ii}, {"kind", "DS"}}).status == 422);
    CHECK(c.send("POST", "/api/elements/" + ii + "/links", {{"to", case_ie}, {"kind", "XX"}}).status == 422);
    CHECK(c.send("POST", "/api/elements/ie-nope/links", {{"to", case_ie}, {"kind", "RS"}}).status == 404);
  }
}

TEST_CASE("schemas") {
  Archive archive;
  Service service(archive, {});
  Client c{service};
  const auto text = read_text(fixture("patient-care.schema.json"));
  ApiRequest upload{"POST", "/api/schemas", {}, text, c.token("admin")};
  const auto first = service.handle(upload);
  CHECK(first.status == 201);
  CHECK(first.body["schema"]["id"] == "patient-care");
  CHECK(service.handle(upload).status == 409);

  const auto got = c.send("GET", "/api/schemas/patient-care/1");
  CHECK(got.status == 200);
  CHECK(got.body == schema_to_json(iw::testing::patient_care()));
  CHECK(c.send("GET", "/api/schemas/patient-care/2").status == 404);
  CHECK(c.send("GET", "/api/schemas/patient-care/two").status == 422);

  auto bad = Json::parse(text);
  bad["version"] = 2;
  bad["flow_edges"].push_back({{"from", "Diagnosis"}, {"to", "Admit"}, {"kind", "precedes"}});
  const auto rejected = service.handle({"POST", "/api/schemas", {}, bad.dump(), c.token("admin")});
  CHECK(rejected.status == 422);
  CHECK(error_of(rejected) == "invalid_schema");
  CHECK(rejected.body["error"]["findings"]["errors"][0]["code"] == "precedence_cycle");
  CHECK(service.handle({"POST", "/api/schemas", {}, "{\"id\":", c.token("admin")}).status == 422);
}

TEST_CASE("read endpoints") {
  Fixture f("two-patients.scenario.json");
  auto& c = f.client;
  const auto seq = f.archive->seq();

  SUBCASE("context at depth 3 matches the oracle") {
    const auto dd = f.ids.id("dd");
    const auto r = c.send("GET", "/api/elements/" + dd + "/context", nullptr, "dr-rao", {{"depth", "3"}});
    REQUIRE(r.status == 200);
    std::map<std::string, int> got;
    for (const auto& n : r.body["episodic"]["nodes"]) got[n["ie"]] = n["hops"];
    CHECK(got == iw::testing::bidirectional_bfs(iw::testing::raw_edges(f.archive->canonical_export()), dd, 3));
    CHECK(r.body["categorical"]["focus"] == "Diagnosis");
    CHECK(c.send("GET", "/api/elements/" + dd + "/context", nullptr, "dr-rao", {{"depth", "0"}}).status == 422);
    CHECK(c.send("GET", "/api/elements/" + dd + "/context", nullptr, "dr-rao", {{"depth", "x"}}).status == 422);
    CHECK(c.send("GET", "/api/elements/ie-nope/context").status == 404);
  }
  SUBCASE("graph and profile") {
    const auto g = c.send("GET", "/api/instances/" + f.ids.id("B") + "/graph");
    CHECK(g.status == 200);
    CHECK(g.body["nodes"].size() == 4);
    CHECK(c.send("GET", "/api/instances/ti-nope/graph").status == 404);
    const auto p = c.send("GET", "/api/actors/dr-mehta/profile");
    CHECK(p.status == 200);
    CHECK(p.body["actor"] == "dr-mehta");
    CHECK(p.body == f.archive->expertise_profile("dr-mehta").to_json());
  }
  SUBCASE("search") {
    auto r = c.send("POST", "/api/search",
                    {{"query", "fever"},
                     {"k", 3},
                     {"context", {{"instance", f.ids.id("A")}, {"activity_category", "Diagnosis"}}}});
    REQUIRE(r.status == 200);
    CHECK(r.body["built_at_seq"] == seq);
    REQUIRE(r.body["hits"].size() == 3);
    const auto& top = r.body["hits"][0];
    CHECK(top["boosted"] == true);
    CHECK(top["category"] == "Differential-Diagnostic");
    CHECK(top["links"]["neighbors"].size() >= 1);
    CHECK(!top["snippet"].get<std::string>().empty());

    CHECK(error_of(c.send("POST", "/api/search", {{"query", "fever"}, {"k", 0}})) == "invalid_argument");
    CHECK(c.send("POST", "/api/search", {{"k", 3}}).status == 422);
    const auto bad_ctx = c.send("POST", "/api/search",
                                {{"query", "fever"}, {"context", {{"instance", "ti-nope"}, {"activity_category", "X"}}}});
    CHECK(bad_ctx.status == 422);
    CHECK(error_of(bad_ctx) == "unresolvable_context");
    CHECK(error_of(c.send("POST", "/api/search",
                          {{"query", "fever"},
                           {"context", {{"instance", f.ids.id("A")}, {"activity_category", "Surgery"}}}})) ==
          "unresolvable_context");
  }
  // None of the above wrote to the journal.
  CHECK(f.archive->seq() == seq);
}

TEST_CASE("every error code has one status and a JSON body") {
  for (auto code : all_error_codes()) {
    const int status = http_status(code);
    CHECK((status == 401 || status == 403 || status == 404 || status == 409 || status == 422 || status == 500));
    CHECK(!to_string(code).empty());
    CHECK(iw::testing::error_code_named(std::string(to_string(code))) == code);
  }
  CHECK(http_status(ErrorCode::unauthorized) == 401);
  CHECK(http_status(ErrorCode::forbidden) == 403);
  CHECK(http_status(ErrorCode::unknown_element) == 404);
  CHECK(http_status(ErrorCode::activity_not_active) == 409);
  CHECK(http_status(ErrorCode::produces_mismatch) == 422);
  CHECK(http_status(ErrorCode::journal_gap) == 500);
}

TEST_CASE("searches are served from the previous index while a rebuild runs") {
  Fixture f("patient-a.scenario.json");
  const auto old_seq = f.service.index()->built_at_seq;
  // New content that only the next index will see.
  const auto inst = f.archive->begin_instance({"patient-care", 1}, "Q", "dr-rao");
  const auto act = f.archive->begin_activity(inst.id, "Admit");
  f.archive->record_element({inst.id, act.id, "Case", "Zoster rash.", "dr-rao", {}, {}, {}, false});

  std::promise<void> entered;
  std::promise<void> release;
  auto released = release.get_future().share();
  f.service.set_before_swap_hook([&] {
    entered.set_value();
    released.wait();
  });
  auto rebuild = std::async(std::launch::async, [&] { return f.service.reindex(); });
  entered.get_future().wait();

  const auto during = f.client.send("POST", "/api/search", {{"query", "zoster"}});
  CHECK(during.status == 200);
  CHECK(during.body["built_at_seq"] == old_seq);
  CHECK(during.body["hits"].empty());

  release.set_value();
  const auto status = rebuild.get();
  CHECK(status.built_at_seq == f.archive->seq());
  const auto after = f.client.send("POST", "/api/search", {{"query", "zoster"}});
  CHECK(after.body["hits"].size() == 1);
}

TEST_CASE("auto_reindex refreshes a lagging index before searching") {
  ServiceConfig config;
  config.auto_reindex = true;
  Fixture f("patient-a.scenario.json", config);
  const auto inst = f.archive->begin_instance({"patient-care", 1}, "Q", "dr-rao");
  const auto act = f.archive->begin_activity(inst.id, "Admit");
  f.archive->record_element({inst.id, act.id, "Case", "Zoster rash.", "dr-rao", {}, {}, {}, false});
  const auto r = f.client.send("POST", "/api/search", {{"query", "zoster"}});
  CHECK(r.body["hits"].size() == 1);
  CHECK(r.body["built_at_seq"] == f.archive->seq());
}

TEST_CASE("config file") {
  const auto c = ServiceConfig::load(fixture("iw.config.json"));
  CHECK(c.host == "127.0.0.1");
  CHECK(c.port == 8080);
  CHECK(c.archive_dir == fixture("archive"));
  CHECK(c.auto_reindex);
  CHECK(c.admin_actors == std::vector<std::string>{"admin"});
  CHECK(c.scoring.context.boost == 0.5);
  CHECK_THROWS_AS(ServiceConfig::from_json({{"listen", "nohost"}}), Error);
  CHECK_THROWS_AS(ServiceConfig::load(fixture("missing.json")), Error);
}

TEST_CASE("HTTP transport") {
  Archive archive(ArchiveOptions{.seed = 7, .clock = nullptr});
  iw::testing::LiveServer server(archive);
  iw::testing::HttpTarget http(server.port());
  const auto ids = replay(ScenarioScript::load(fixture("patient-a.scenario.json")), http);

  auto r = http.request("GET", "/api/instances/" + ids.id("A") + "/graph", nullptr, "dr-rao");
  CHECK(r.status == 200);
  CHECK(r.body["nodes"].size() == 6);
  r = http.request("GET", "/api/instances/" + ids.id("A") + "/graph", nullptr, "");
  CHECK(r.status == 401);
  r = http.request("POST", "/api/search", {{"query", "fever"}, {"k", 0}}, "dr-rao");
  CHECK(r.status == 422);
  CHECK(r.body["error"]["code"] == "invalid_argument");
  CHECK_THROWS_AS(http.call("PATCH", "/api/activities/" + ids.id("A.plan"), {{"status", "ended"}}, "dr-rao"),
                  Error);
}
