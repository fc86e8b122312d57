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

#include "iw/scenario.hpp"

#include <fstream>
#include <sstream>

#include "iw/error.hpp"

namespace iw {

ScenarioScript ScenarioScript::parse(const Json& doc, std::filesystem::path base_dir) {
  ScenarioScript script;
  script.base_dir = std::move(base_dir);
  if (!doc.is_object() || !doc.contains("steps") || !doc.at("steps").is_array()) {
    throw Error(ErrorCode::invalid_argument, "scenario must be an object with a 'steps' array");
  }
  for (const auto& step : doc.at("steps")) {
    if (!step.is_object() || !step.contains("op") || !step.at("op").is_string()) {
      throw Error(ErrorCode::invalid_argument, "every scenario step needs a string 'op'");
    }
    script.steps.push_back(step);
  }
  return script;
}

ScenarioScript ScenarioScript::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + file.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::syntax_error, file.string() + ": " + e.what());
  }
  return parse(doc, file.parent_path());
}

void EngineTarget::load_schema(const TaskTypeSchema& schema, const std::string&) {
  archive_.load_schema(schema);
}

std::string EngineTarget::begin_instance(const SchemaRef& schema, const std::string& title,
                                         const std::string& actor) {
  return archive_.begin_instance(schema, title, actor).id;
}

void EngineTarget::close_instance(const std::string& instance, const std::string&) {
  archive_.close_instance(instance);
}

std::string EngineTarget::begin_activity(const std::string& instance, const std::string& category,
                                         const std::string&) {
  return archive_.begin_activity(instance, category).id;
}

void EngineTarget::end_activity(const std::string& activity, const std::string&) {
  archive_.end_activity(activity);
}

std::string EngineTarget::record_element(const RecordRequest& request) {
  return archive_.record_element(request).element.id;
}

void EngineTarget::link_elements(const std::string& from, const std::string& to, LinkKind kind,
                                 const std::optional<std::string>& note, const std::string&) {
  archive_.link_elements(from, to, kind, note);
}

void EngineTarget::retract_element(const std::string& element, const std::string&) {
  archive_.retract_element(element);
}

namespace {

class Replayer {
 public:
  Replayer(const ScenarioScript& script, ScenarioTarget& target) : script_(script), target_(target) {}

  ReplayResult run() {
    for (std::size_t i = 0; i < script_.steps.size(); ++i) {
      step_ = i + 1;
      try {
        execute(script_.steps[i]);
      } catch (const Error& e) {
        throw Error(e.code(), "step " + std::to_string(step_) + ": " + e.what());
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::invalid_argument, "step " + std::to_string(step_) + ": " + e.what());
      }
    }
    return std::move(result_);
  }

 private:
  std::string resolve(const std::string& symbol) const {
    auto it = result_.ids.find(symbol);
    if (it == result_.ids.end()) {
      throw Error(ErrorCode::invalid_argument, "symbol '" + symbol + "' used before definition");
    }
    return it->second;
  }

  void define(const Json& step, const std::string& id) {
    if (!step.contains("as")) return;
    const auto symbol = step.at("as").get<std::string>();
    if (!result_.ids.emplace(symbol, id).second) {
      throw Error(ErrorCode::invalid_argument, "symbol '" + symbol + "' defined twice");
    }
  }

  std::string actor_of_instance(const std::string& instance_id) const {
    auto it = instance_actor_.find(instance_id);
    return it == instance_actor_.end() ? std::string{} : it->second;
  }

  std::vector<std::string> resolve_all(const Json& step, const char* key) const {
    std::vector<std::string> out;
    for (const auto& s : step.value(key, Json::array())) out.push_back(resolve(s.get<std::string>()));
    return out;
  }

  void execute(const Json& step) {
    const auto op = step.at("op").get<std::string>();
    if (op == "load_schema") {
      TaskTypeSchema schema;
      if (step.contains("file")) {
        const auto path = script_.base_dir / step.at("file").get<std::string>();
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
        std::stringstream text;
        text << in.rdbuf();
        schema = parse_schema(text.str());
      } else {
        schema = schema_from_json(step.at("schema"));
      }
      target_.load_schema(schema, step.value("actor", std::string("admin")));
    } else if (op == "begin_instance") {
      const SchemaRef ref{step.at("schema").at("id").get<std::string>(),
                          step.at("schema").at("version").get<int>()};
      const auto actor = step.at("actor").get<std::string>();
      const auto id = target_.begin_instance(ref, step.value("title", std::string{}), actor);
      instance_actor_[id] = actor;
      define(step, id);
    } else if (op == "close_instance") {
      const auto instance = resolve(step.at("instance").get<std::string>());
      target_.close_instance(instance, step.value("actor", actor_of_instance(instance)));
    } else if (op == "begin_activity") {
      const auto instance = resolve(step.at("instance").get<std::string>());
      const auto actor = step.value("actor", actor_of_instance(instance));
      const auto id = target_.begin_activity(instance, step.at("category").get<std::string>(), actor);
      activity_actor_[id] = actor;
      define(step, id);
    } else if (op == "end_activity") {
      const auto activity = resolve(step.at("activity").get<std::string>());
      target_.end_activity(activity, step.value("actor", activity_actor_[activity]));
    } else if (op == "record_element") {
      RecordRequest req;
      req.instance = resolve(step.at("instance").get<std::string>());
      req.activity = resolve(step.at("activity").get<std::string>());
      req.category = step.at("category").get<std::string>();
      req.body = step.at("body").get<std::string>();
      req.author = step.value("author", actor_of_instance(req.instance));
      req.ds_targets = resolve_all(step, "ds");
      req.rs_targets = resolve_all(step, "rs");
      req.attachments = step.value("attachments", std::vector<std::string>{});
      req.override_produces = step.value("override", false);
      const auto id = target_.record_element(req);
      element_actor_[id] = req.author;
      define(step, id);
    } else if (op == "link_elements") {
      const auto from = resolve(step.at("from").get<std::string>());
      const auto to = resolve(step.at("to").get<std::string>());
      auto kind = parse_link_kind(step.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::invalid_argument, "kind must be DS or RS");
      std::optional<std::string> note;
      if (step.contains("note")) note = step.at("note").get<std::string>();
      target_.link_elements(from, to, *kind, note, step.value("actor", element_actor_[from]));
    } else if (op == "retract_element") {
      const auto element = resolve(step.at("element").get<std::string>());
      target_.retract_element(element, step.value("actor", element_actor_[element]));
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown scenario op '" + op + "'");
    }
  }

  const ScenarioScript& script_;
  ScenarioTarget& target_;
  ReplayResult result_;
  std::size_t step_ = 0;
  std::map<std::string, std::string> instance_actor_;
  std::map<std::string, std::string> activity_actor_;
  std::map<std::string, std::string> element_actor_;
};

}  // namespace

ReplayResult replay(const ScenarioScript& script, ScenarioTarget& target) {
  return Replayer(script, target).run();
}

ReplayResult replay(const ScenarioScript& script, Archive& archive) {
  EngineTarget target(archive);
  return replay(script, target);
}

}  // namespace iw
