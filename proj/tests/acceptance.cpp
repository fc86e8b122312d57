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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "http_target.hpp"
#include "iw/error.hpp"
#include "iw/retrieval.hpp"
#include "support.hpp"

using namespace iw;
using iw::testing::bidirectional_bfs;
using iw::testing::fixture;
using iw::testing::raw_edges;
using iw::testing::replay_fixture;
using iw::testing::TempDir;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    if (failures.size() < 5) failures.push_back(what);
  }
};

using Criterion = std::function<void(Outcome&)>;

bool close_to(double got, double want, double tol = 1e-9) { return std::abs(got - want) <= tol; }

// ---------------------------------------------------------------------------

void scenario_fidelity(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  auto r = replay_fixture("patient-a.scenario.json");
  const auto g = r.archive->episodic_context(r.ids.id("dd"), 1);
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::map<std::string, std::string> got;
  for (const auto& n : g.nodes) {
    if (n.hops == 0) continue;
    for (const auto& v : n.via) got[n.ie + " " + n.category] = v.relation();
  }
  const std::map<std::string, std::string> want{
      {r.ids.id("case") + " Case", "DS-out"},
      {r.ids.id("ii") + " Initial-Impression", "RS-out"},
      {r.ids.id("tr") + " Test-Result", "RS-out"},
      {r.ids.id("tp") + " Treatment-Plan", "DS-in"}};
  o.expect(got == want, "context(DD, 1) differs from {Case DS-out, II RS-out, TR RS-out, TP DS-in}");
  o.expect(g.nodes.size() == 5, "unexpected node count");
  o.expect(elapsed < 1.0, "runtime " + std::to_string(elapsed) + " s");
  o.detail << "context(DD,1) = {Case DS-out, Initial-Impression RS-out, Test-Result RS-out, Treatment-Plan DS-in}; "
           << "replay+query " << static_cast<int>(elapsed * 1000) << " ms";
}

Json random_schema_doc(std::mt19937_64& rng, int index) {
  const int n = 3 + static_cast<int>(rng() % 8);
  Json doc{{"id", "random-" + std::to_string(index)}, {"name", "random"}, {"version", 1},
           {"activities", Json::array()}, {"contents", Json::array()}, {"concepts", Json::array()},
           {"flow_edges", Json::array()}, {"assoc_edges", Json::array()}, {"template_edges", Json::array()},
           {"semantic_links", Json::array()}};
  for (int i = 0; i < n; ++i) {
    doc["activities"].push_back({{"id", "A" + std::to_string(i)}, {"name", "A"}, {"description", ""}});
  }
  const char* kinds[] = {"precedes", "iterates-to", "decomposes-into"};
  std::set<std::pair<int, int>> seen;
  const int m = static_cast<int>(rng() % static_cast<unsigned>(2 * n + 1));
  for (int e = 0; e < m; ++e) {
    const int a = static_cast<int>(rng() % n), b = static_cast<int>(rng() % n);
    if (a == b || !seen.insert({a, b}).second) continue;
    doc["flow_edges"].push_back(
        {{"from", "A" + std::to_string(a)}, {"to", "A" + std::to_string(b)}, {"kind", kinds[rng() % 3]}});
  }
  return doc;
}

void traversal_oracles(Outcome& o) {
  std::size_t episodic_checks = 0, categorical_checks = 0;
  for (const auto* script : {"patient-a.scenario.json", "two-patients.scenario.json"}) {
    auto r = replay_fixture(script);
    const auto edges = raw_edges(r.archive->canonical_export());
    for (const auto& [id, _] : r.archive->view()->elements) {
      for (int depth = 1; depth <= 4; ++depth) {
        std::map<std::string, int> got;
        for (const auto& n : r.archive->episodic_context(id, depth).nodes) got[n.ie] = n.hops;
        o.expect(got == bidirectional_bfs(edges, id, depth),
                 std::string(script) + ": " + id + " depth " + std::to_string(depth));
        ++episodic_checks;
      }
    }
  }

  auto check_schema = [&](const Json& doc) {
    const auto schema = schema_from_json(doc);
    for (const auto& a : schema.activities) {
      for (int radius = 1; radius <= 4; ++radius) {
        const auto ctx = categorical_context(schema, a.id, radius);
        auto as_map = [](const std::vector<ReachedActivity>& v) {
          std::map<std::string, int> m;
          for (const auto& x : v) m[x.id] = x.hops;
          return m;
        };
        o.expect(as_map(ctx.before) == iw::testing::flow_bfs(doc, a.id, radius, false),
                 schema.id + ": before " + a.id + " r" + std::to_string(radius));
        o.expect(as_map(ctx.after) == iw::testing::flow_bfs(doc, a.id, radius, true),
                 schema.id + ": after " + a.id + " r" + std::to_string(radius));
        ++categorical_checks;
      }
    }
  };
  check_schema(Json::parse(iw::testing::read_text(fixture("patient-care.schema.json"))));
  std::mt19937_64 rng(2026);
  for (int i = 0; i < 50; ++i) check_schema(random_schema_doc(rng, i));

  o.detail << episodic_checks << " episodic (IE, depth 1-4) cases over 2 archives, " << categorical_checks
           << " categorical (activity, radius 1-4) cases over 51 schemas; mismatches "
           << (o.pass ? 0 : o.failures.size());
}

void scoring_oracles(Outcome& o) {
  const auto schema = iw::testing::patient_care();
  std::vector<std::string> categories;
  for (const auto& c : schema.contents) categories.push_back(c.id);
  const std::vector<std::string> vocab{"fever", "rash", "cough", "dengue", "viral", "pain", "ns1",
                                       "test",  "plan", "blood", "ct",    "scan",  "x9",    "neck"};
  std::mt19937_64 rng(42);
  constexpr int kCorpora = 25;
  std::size_t scores = 0, queries = 0;
  double worst = 0;
  for (int corpus = 0; corpus < kCorpora; ++corpus) {
    std::vector<std::pair<std::string, std::string>> docs;
    std::vector<IndexDocument> index_docs;
    const auto n = 1 + rng() % 50;
    for (std::size_t d = 0; d < n; ++d) {
      std::string body;
      const auto len = 1 + rng() % 25;
      for (std::size_t w = 0; w < len; ++w) body += vocab[rng() % vocab.size()] + (rng() % 4 ? " " : "; ");
      const auto id = "ie-" + std::to_string(100000 + rng() % 900000) + "-" + std::to_string(d);
      docs.emplace_back(id, body);
      index_docs.push_back({id, categories[rng() % categories.size()], body});
    }
    const auto index = build_index(index_docs, 0);
    for (int q = 0; q < 5; ++q) {
      std::string query;
      for (std::size_t t = 0, len = 1 + rng() % 3; t < len; ++t) query += vocab[rng() % vocab.size()] + " ";
      ++queries;
      const auto want = iw::testing::bm25_oracle(docs, query);
      const auto hits = search(index, query, docs.size());
      o.expect(hits.size() == want.size(), "hit count differs for '" + query + "'");
      for (const auto& h : hits) {
        auto it = want.find(h.ie);
        if (it == want.end()) {
          o.expect(false, "unexpected hit " + h.ie);
          continue;
        }
        worst = std::max(worst, std::abs(h.score - it->second));
        o.expect(close_to(h.score, it->second), "score for " + h.ie + " in '" + query + "'");
        ++scores;
      }

      ScoringConfig parity;
      parity.context.boost = 0.0;
      const WorkContext ctx{"ti-any", schema.activities[rng() % schema.activities.size()].id, schema.ref()};
      const auto k = 1 + rng() % docs.size();
      const auto plain = search(index, query, k);
      const auto contextual = contextual_search(index, schema, query, ctx, k, false, parity);
      bool same = plain.size() == contextual.size();
      for (std::size_t i = 0; same && i < plain.size(); ++i) {
        same = plain[i].ie == contextual[i].ie && plain[i].score == contextual[i].score;
      }
      o.expect(same, "w = 0 parity for '" + query + "'");
    }
  }
  o.detail << kCorpora << " corpora (<= 50 docs), " << queries << " queries, " << scores
           << " scores; max |diff| " << worst << " (tolerance 1e-9); w=0 parity on all " << queries;
}

void boost_behavior(Outcome& o) {
  auto r = replay_fixture("boost.scenario.json");
  const auto view = r.archive->view();
  const auto index = build_index(*view);
  const auto schema = iw::testing::patient_care();
  const WorkContext ctx{r.ids.id("C"), "Diagnosis", schema.ref()};
  const auto dd = r.ids.id("dd"), tp = r.ids.id("tp");
  o.expect(view->elements.at(dd).body == view->elements.at(tp).body, "bodies differ");

  for (double w : {1e-6, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0}) {
    ScoringConfig cfg;
    cfg.context.boost = w;
    const auto hits = contextual_search(index, schema, "fever", ctx, 10, false, cfg);
    o.expect(hits.size() == 2 && hits[0].ie == dd && hits[0].score > hits[1].score,
             "matched IE does not strictly outrank at w=" + std::to_string(w));
  }
  ScoringConfig zero;
  zero.context.boost = 0.0;
  const auto hits = contextual_search(index, schema, "fever", ctx, 10, false, zero);
  o.expect(hits.size() == 2 && hits[0].score == hits[1].score, "no tie at w=0");
  o.expect(hits.size() == 2 && hits[0].ie == std::min(dd, tp) && hits[0].ie < hits[1].ie,
           "tie at w=0 not broken by id ascending");
  o.detail << "matched IE strictly first for w in {1e-6, 0.1, 0.25, 0.5, 1, 2, 5}; tie at w=0 ordered by id";
}

void replay_determinism(Outcome& o) {
  TempDir source, a, b;
  {
    auto archive = Archive::open(source.path());
    replay(ScenarioScript::load(fixture("two-patients.scenario.json")), *archive);
    archive->write_snapshot();
    const auto t = archive->begin_instance({"patient-care", 1}, "after snapshot", "dr-rao");
    const auto act = archive->begin_activity(t.id, "Admit");
    archive->record_element({t.id, act.id, "Case", "Recorded after the snapshot.", "dr-rao", {}, {}, {}, false});
  }
  for (const auto* dir : {&a, &b}) {
    std::filesystem::copy_file(source.path() / "journal.ndjson", dir->path() / "journal.ndjson");
  }
  auto ra = Archive::open(a.path());
  auto rb = Archive::open(b.path());
  auto rs = Archive::open(source.path());  // resumes from the snapshot
  const auto ea = ra->canonical_export().dump();
  o.expect(ea == rb->canonical_export().dump(), "exports differ between fresh replays");
  o.expect(ea == rs->canonical_export().dump(), "snapshot-resumed export differs");

  const auto ia = build_index(*ra->view()).serialize();
  o.expect(ia == build_index(*rb->view()).serialize(), "indexes differ across archives");
  o.expect(ia == build_index(*ra->view()).serialize(), "index rebuild differs");

  auto s1 = replay_fixture("two-patients.scenario.json", 99);
  auto s2 = replay_fixture("two-patients.scenario.json", 99);
  o.expect(s1.archive->canonical_export().dump() == s2.archive->canonical_export().dump(),
           "seeded replays differ");
  o.detail << "export " << ea.size() << " bytes identical across 2 fresh replays and a snapshot resume; index "
           << ia.size() << " bytes identical on rebuild";
}

/// Random lifecycle/capture/link operations against one archive, valid and
/// invalid mixed.
class OpFuzzer {
 public:
  OpFuzzer(std::uint64_t seed, const TaskTypeSchema& schema)
      : archive_(ArchiveOptions{.seed = seed, .clock = nullptr}), rng_(seed) {
    archive_.load_schema(schema);
    ref_ = schema.ref();
    for (const auto& a : schema.activities) activity_categories_.push_back(a.id);
    for (const auto& c : schema.contents) content_categories_.push_back(c.id);
    activity_categories_.push_back("Surgery");
    content_categories_.push_back("X-Ray");
  }

  std::size_t accepted = 0;
  std::map<std::string, std::size_t> rejected;
  std::vector<std::string> problems;

  void step() {
    const auto before = archive_.seq();
    try {
      apply(rng_() % 10);
      ++accepted;
    } catch (const Error& e) {
      const auto codes = all_error_codes();
      if (std::ranges::find(codes, e.code()) == codes.end()) problems.push_back("unenumerated code");
      if (archive_.seq() != before) problems.push_back("rejected op changed the journal: " + std::string(e.what()));
      ++rejected[std::string(to_string(e.code()))];
    } catch (const std::exception& e) {
      problems.push_back(std::string("non-enumerated failure: ") + e.what());
    }
  }

  ValidationReport check() const { return archive_.integrity_check(); }

 private:
  std::string pick(const std::vector<std::string>& ids, const char* bogus) {
    if (ids.empty() || rng_() % 10 == 0) return bogus;
    return ids[rng_() % ids.size()];
  }
  bool coin(int percent) { return static_cast<int>(rng_() % 100) < percent; }

  void apply(std::uint64_t op) {
    switch (op) {
      case 0: {
        const SchemaRef ref = coin(90) ? ref_ : SchemaRef{"nope", 1};
        instances_.push_back(archive_.begin_instance(ref, "t", coin(50) ? "ana" : "ben").id);
        break;
      }
      case 1:
        if (coin(30)) archive_.close_instance(pick(instances_, "ti-bogus"));
        break;
      case 2:
      case 3:
        activities_.push_back(archive_.begin_activity(
            pick(instances_, "ti-bogus"), activity_categories_[rng_() % activity_categories_.size()]).id);
        break;
      case 4:
        archive_.end_activity(pick(activities_, "ai-bogus"));
        break;
      case 5:
      case 6:
      case 7: {
        RecordRequest r;
        r.activity = pick(activities_, "ai-bogus");
        const auto view = archive_.view();
        auto act = view->activities.find(r.activity);
        r.instance = act != view->activities.end() && coin(85) ? act->second.instance : pick(instances_, "ti-bogus");
        r.category = content_categories_[rng_() % content_categories_.size()];
        r.body = coin(8) ? " " : "note " + std::to_string(rng_() % 1000);
        r.author = coin(50) ? "ana" : "ben";
        for (auto n = rng_() % 3; n > 0; --n) r.ds_targets.push_back(pick(elements_, "ie-bogus"));
        for (auto n = rng_() % 3; n > 0; --n) r.rs_targets.push_back(pick(elements_, "ie-bogus"));
        r.override_produces = coin(30);
        elements_.push_back(archive_.record_element(r).element.id);
        break;
      }
      case 8:
        archive_.link_elements(pick(elements_, "ie-bogus"), pick(elements_, "ie-bogus"),
                               coin(50) ? LinkKind::DS : LinkKind::RS);
        break;
      default:
        if (coin(20)) archive_.retract_element(pick(elements_, "ie-bogus"));
        break;
    }
  }

  Archive archive_;
  std::mt19937_64 rng_;
  SchemaRef ref_;
  std::vector<std::string> activity_categories_, content_categories_;
  std::vector<std::string> instances_, activities_, elements_;
};

void invariant_suite(Outcome& o) {
  const auto schema = iw::testing::patient_care();
  constexpr int kSequences = 10000;
  std::size_t ops = 0, accepted = 0, rejected = 0, checks = 0;
  std::map<std::string, std::size_t> by_code;
  std::mt19937_64 lengths(5);
  for (int s = 0; s < kSequences; ++s) {
    OpFuzzer fuzzer(static_cast<std::uint64_t>(s) + 1, schema);
    const auto n = 10 + lengths() % 31;
    for (std::size_t i = 0; i < n; ++i) {
      fuzzer.step();
      const auto report = fuzzer.check();
      ++checks;
      if (!report.errors.empty()) {
        o.expect(false, "sequence " + std::to_string(s) + " op " + std::to_string(i) + ": " +
                            report.errors.front().code + " " + report.errors.front().message);
        break;
      }
    }
    ops += n;
    accepted += fuzzer.accepted;
    for (const auto& [code, count] : fuzzer.rejected) {
      by_code[code] += count;
      rejected += count;
    }
    for (const auto& p : fuzzer.problems) o.expect(false, "sequence " + std::to_string(s) + ": " + p);
  }
  o.detail << kSequences << " sequences, " << ops << " ops (" << accepted << " accepted, " << rejected
           << " rejected over " << by_code.size() << " enumerated codes), " << checks << " integrity checks";
}

void api_engine_equivalence(Outcome& o) {
  for (const auto* script : {"patient-a.scenario.json", "two-patients.scenario.json"}) {
    auto engine = replay_fixture(script, 7);
    Archive remote(ArchiveOptions{.seed = 7, .clock = nullptr});
    {
      iw::testing::LiveServer server(remote);
      iw::testing::HttpTarget http(server.port());
      const auto ids = replay(ScenarioScript::load(fixture(script)), http);
      o.expect(ids.ids == engine.ids.ids, std::string(script) + ": ids differ");
    }
    const auto a = engine.archive->canonical_export().dump();
    const auto b = remote.canonical_export().dump();
    o.expect(a == b, std::string(script) + ": exports differ");
    o.detail << script << " " << b.size() << " bytes " << (a == b ? "identical" : "DIFFERENT") << "; ";
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, Criterion>> criteria{
      {"scenario fidelity", scenario_fidelity},
      {"traversal oracle equivalence", traversal_oracles},
      {"scoring oracle equivalence", scoring_oracles},
      {"boost behavior", boost_behavior},
      {"replay determinism", replay_determinism},
      {"invariant suite", invariant_suite},
      {"API/engine equivalence", api_engine_equivalence},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      run(o);
    } catch (const std::exception& e) {
      o.expect(false, std::string("threw: ") + e.what());
    }
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << ms << " ms): " << o.detail.str() << '\n';
    for (const auto& f : o.failures) std::cout << "     - " << f << '\n';
    if (!o.pass) ++failed;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
