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

#include "iw/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include "iw/archive.hpp"
#include "iw/error.hpp"
#include "iw/retrieval.hpp"
#include "iw/scenario.hpp"
#include "iw/schema.hpp"
#include "iw/service.hpp"

namespace iw {

namespace {

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  bool json = false;
  std::string config;
  std::string archive;
  std::string file;
  std::string text;
  std::string activity;
  std::string instance;
  std::string schema;
  bool semantic = false;
  std::size_t k = 10;
  int depth = 1;
  std::optional<std::uint64_t> seed;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<ServiceConfig> load_config(const Options& o) {
  std::string path = o.config;
  if (path.empty()) {
    if (const char* env = std::getenv("IW_CONFIG")) path = env;
  }
  if (path.empty()) return std::nullopt;
  return ServiceConfig::load(path);
}

std::filesystem::path archive_dir(const Options& o) {
  if (!o.archive.empty()) return o.archive;
  if (auto cfg = load_config(o)) return cfg->archive_dir;
  throw UsageError("--archive is required (or a config with archive_dir via --config / IW_CONFIG)");
}

ScoringConfig scoring(const Options& o) {
  if (auto cfg = load_config(o)) return cfg->scoring;
  return {};
}

std::unique_ptr<Archive> open_existing(const Options& o) {
  const auto dir = archive_dir(o);
  if (!std::filesystem::exists(dir)) {
    throw Error(ErrorCode::io_error, "archive directory " + dir.string() + " does not exist");
  }
  return Archive::open(dir);
}

void print_report(const ValidationReport& report, std::ostream& out) {
  for (const auto& f : report.errors) out << "error   " << f.code << ": " << f.message << '\n';
  for (const auto& f : report.warnings) out << "warning " << f.code << ": " << f.message << '\n';
  if (report.errors.empty() && report.warnings.empty()) out << "ok\n";
}

int cmd_schema_validate(const Options& o, std::ostream& out) {
  const auto schema = parse_schema(read_file(o.file));
  const auto report = validate_schema(schema);
  if (o.json) {
    out << Json{{"schema", {{"id", schema.id}, {"version", schema.version}}}, {"report", report.to_json()}}.dump()
        << '\n';
  } else {
    out << schema.id << " v" << schema.version << ": " << schema.activities.size() << " activities, "
        << schema.contents.size() << " content categories\n";
    print_report(report, out);
  }
  return report.ok() ? kOk : kFindings;
}

int cmd_scenario_replay(const Options& o, std::ostream& out) {
  ArchiveOptions options;
  options.seed = o.seed;
  auto archive = Archive::open(archive_dir(o), options);
  const auto result = replay(ScenarioScript::load(o.file), *archive);
  if (o.json) {
    out << Json{{"ids", result.to_json()}, {"seq", archive->seq()}}.dump() << '\n';
  } else {
    for (const auto& [symbol, id] : result.ids) out << symbol << " = " << id << '\n';
    out << "journal seq " << archive->seq() << '\n';
  }
  return kOk;
}

PostingsIndex current_index(const Archive& archive, const TokenizerOptions& tokenizer) {
  const auto view = archive.view();
  if (archive.directory()) {
    const auto path = *archive.directory() / "index.json";
    if (std::ifstream in(path); in) {
      try {
        auto idx = PostingsIndex::from_json(Json::parse(in));
        if (idx.built_at_seq == view->seq && idx.tokenizer == tokenizer) return idx;
      } catch (const std::exception&) {
        // Stale or unreadable; rebuild below.
      }
    }
  }
  return build_index(*view, tokenizer);
}

int cmd_index_build(const Options& o, std::ostream& out) {
  auto archive = open_existing(o);
  const auto idx = build_index(*archive->view(), scoring(o).tokenizer);
  const auto path = archive_dir(o) / "index.json";
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  file << idx.serialize() << '\n';
  if (!file) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  if (o.json) {
    out << Json{{"built_at_seq", idx.built_at_seq}, {"N", idx.doc_count}, {"terms", idx.df.size()},
                {"path", path.string()}}.dump()
        << '\n';
  } else {
    out << "indexed " << idx.doc_count << " elements, " << idx.df.size() << " terms at seq "
        << idx.built_at_seq << " -> " << path.string() << '\n';
  }
  return kOk;
}

SchemaRef parse_schema_flag(const std::string& text) {
  const auto at = text.rfind('@');
  if (at == std::string::npos) throw UsageError("--schema expects id@version");
  try {
    return {text.substr(0, at), std::stoi(text.substr(at + 1))};
  } catch (const std::logic_error&) {
    throw UsageError("--schema expects id@version");
  }
}

int cmd_query(const Options& o, std::ostream& out) {
  auto archive = open_existing(o);
  const auto config = scoring(o);
  const auto idx = current_index(*archive, config.tokenizer);
  const auto view = archive->view();
  std::vector<Hit> hits;
  if (!o.activity.empty()) {
    WorkContext ctx;
    ctx.instance = o.instance;
    ctx.activity_category = o.activity;
    if (!o.instance.empty()) {
      auto it = view->instances.find(o.instance);
      if (it == view->instances.end()) {
        throw Error(ErrorCode::unresolvable_context, "unknown instance '" + o.instance + "'");
      }
      ctx.schema = it->second.schema;
    } else if (!o.schema.empty()) {
      ctx.schema = parse_schema_flag(o.schema);
    } else if (view->schemas.size() == 1) {
      ctx.schema = view->schemas.begin()->first;
    } else {
      throw UsageError("--activity needs --instance or --schema when the archive holds several schemas");
    }
    auto schema = view->schemas.find(ctx.schema);
    if (schema == view->schemas.end()) {
      throw Error(ErrorCode::unresolvable_context, "unknown schema " + to_string(ctx.schema));
    }
    hits = contextual_search(idx, schema->second, o.text, ctx, o.k, o.semantic, config);
  } else {
    hits = search(idx, o.text, o.k, config.bm25);
  }
  hits = annotate_hits(*view, std::move(hits), idx.tokenizer);
  if (o.json) {
    Json arr = Json::array();
    for (const auto& h : hits) arr.push_back(h.to_json());
    out << Json{{"hits", arr}, {"built_at_seq", idx.built_at_seq}}.dump() << '\n';
    return kOk;
  }
  if (hits.empty()) out << "no matches\n";
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto& h = hits[i];
    out << i + 1 << ". " << h.ie << "  " << h.category << "  score=" << h.score
        << (h.boosted ? "  [boosted]" : "") << '\n'
        << "   " << h.snippet << '\n';
  }
  return kOk;
}

int cmd_context(const Options& o, std::ostream& out) {
  auto archive = open_existing(o);
  const auto g = archive->episodic_context(o.text, o.depth);
  if (o.json) {
    out << g.to_json().dump() << '\n';
    return kOk;
  }
  for (const auto& n : g.nodes) {
    out << std::string(static_cast<std::size_t>(n.hops) * 2, ' ') << n.ie << "  " << n.category
        << (n.external ? "  (external)" : "");
    for (const auto& v : n.via) out << "  <" << v.relation() << " from " << v.from << ">";
    out << '\n';
  }
  return kOk;
}

int cmd_profile(const Options& o, std::ostream& out) {
  auto archive = open_existing(o);
  const auto report = archive->expertise_profile(o.text);
  if (o.json) {
    out << report.to_json().dump() << '\n';
    return kOk;
  }
  out << report.actor << ": " << report.total() << " elements\n";
  for (const auto& e : report.entries) {
    out << "  " << to_string(e.schema) << "  " << e.activity_category << " / " << e.content_category
        << "  " << e.count << '\n';
  }
  return kOk;
}

int cmd_export(const Options& o, std::ostream& out) {
  auto archive = open_existing(o);
  out << archive->canonical_export().dump() << '\n';
  return kOk;
}

int cmd_serve(const Options& o, std::ostream& out) {
  auto config = load_config(o);
  if (!config) throw UsageError("serve needs --config <file> or IW_CONFIG");
  if (!o.archive.empty()) config->archive_dir = o.archive;
  ArchiveOptions options;
  options.seed = config->seed;
  auto archive = Archive::open(config->archive_dir, options);
  Service service(*archive, *config);
  HttpServer server(service);
  const int port = server.bind(config->host, config->port);
  if (port < 0) {
    throw Error(ErrorCode::io_error, "cannot listen on " + config->host + ":" + std::to_string(config->port));
  }
  out << "serving " << config->archive_dir.string() << " on http://" << config->host << ':' << port
      << std::endl;
  server.run();
  return kOk;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Information warehouse tooling", "iw"};
  app.require_subcommand(1);
  app.add_flag("--json", o.json, "Machine-readable JSON on stdout");
  app.add_option("--config", o.config, "Service config file (default: $IW_CONFIG)");

  auto* schema = app.add_subcommand("schema", "Schema tools");
  schema->require_subcommand(1);
  auto* validate = schema->add_subcommand("validate", "Parse and validate a schema document");
  validate->add_option("file", o.file)->required();

  auto* scenario = app.add_subcommand("scenario", "Scenario scripts");
  scenario->require_subcommand(1);
  auto* replay_cmd = scenario->add_subcommand("replay", "Replay a scenario script into an archive");
  replay_cmd->add_option("script", o.file)->required();
  replay_cmd->add_option("--archive", o.archive);
  replay_cmd->add_option("--seed", o.seed, "Deterministic ids and clock");

  auto* index = app.add_subcommand("index", "Retrieval index");
  index->require_subcommand(1);
  auto* build = index->add_subcommand("build", "Build the index and store it in the archive");
  build->add_option("--archive", o.archive);

  auto* query = app.add_subcommand("query", "Ranked retrieval");
  query->add_option("text", o.text)->required();
  query->add_option("--activity", o.activity, "Work-context activity category");
  query->add_option("--instance", o.instance, "Work-context task instance");
  query->add_option("--schema", o.schema, "Work-context schema as id@version");
  query->add_flag("--semantic", o.semantic, "Expand with linked concept labels");
  query->add_option("--k", o.k)->check(CLI::PositiveNumber);
  query->add_option("--archive", o.archive);

  auto* context = app.add_subcommand("context", "Episodic context of an element");
  context->add_option("ie", o.text)->required();
  context->add_option("--depth", o.depth)->check(CLI::PositiveNumber);
  context->add_option("--archive", o.archive);

  auto* profile = app.add_subcommand("profile", "Expertise profile of an actor");
  profile->add_option("actor", o.text)->required();
  profile->add_option("--archive", o.archive);

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--archive", o.archive, "Overrides archive_dir from the config");

  auto* export_cmd = app.add_subcommand("export", "Canonical archive export to stdout");
  export_cmd->add_option("--archive", o.archive);

  // Accept --json / --config after the subcommand too.
  for (auto* sub : {validate, replay_cmd, build, query, context, profile, serve, export_cmd}) {
    sub->fallthrough();
  }
  schema->fallthrough();
  scenario->fallthrough();
  index->fallthrough();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kUsage;
  }

  auto fail = [&](std::string_view code, const std::string& message, int status) {
    err << "iw: " << message << '\n';
    if (o.json) out << Json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
    return status;
  };

  try {
    if (validate->parsed()) return cmd_schema_validate(o, out);
    if (replay_cmd->parsed()) return cmd_scenario_replay(o, out);
    if (build->parsed()) return cmd_index_build(o, out);
    if (query->parsed()) return cmd_query(o, out);
    if (context->parsed()) return cmd_context(o, out);
    if (profile->parsed()) return cmd_profile(o, out);
    if (serve->parsed()) return cmd_serve(o, out);
    if (export_cmd->parsed()) return cmd_export(o, out);
  } catch (const UsageError& e) {
    return fail("usage", e.what(), kUsage);
  } catch (const Error& e) {
    return fail(to_string(e.code()), e.what(), kFindings);
  }
  return fail("usage", "missing subcommand", kUsage);
}

}  // namespace iw
