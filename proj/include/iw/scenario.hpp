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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iw/archive.hpp"

namespace iw {

/// Ordered lifecycle/capture/link commands using symbolic ids. Each step is a
/// JSON object with an "op" and, for creating steps, an "as" symbol.
struct ScenarioScript {
  std::filesystem::path base_dir;  // schema files resolve relative to this
  std::vector<Json> steps;

  static ScenarioScript parse(const Json& doc, std::filesystem::path base_dir = {});
  static ScenarioScript load(const std::filesystem::path& file);
};

/// Where a scenario is executed: the engine directly, or a remote service.
class ScenarioTarget {
 public:
  virtual ~ScenarioTarget() = default;

  virtual void load_schema(const TaskTypeSchema& schema, const std::string& actor) = 0;
  virtual std::string begin_instance(const SchemaRef& schema, const std::string& title,
                                     const std::string& actor) = 0;
  virtual void close_instance(const std::string& instance, const std::string& actor) = 0;
  virtual std::string begin_activity(const std::string& instance, const std::string& category,
                                     const std::string& actor) = 0;
  virtual void end_activity(const std::string& activity, const std::string& actor) = 0;
  virtual std::string record_element(const RecordRequest& request) = 0;
  virtual void link_elements(const std::string& from, const std::string& to, LinkKind kind,
                             const std::optional<std::string>& note, const std::string& actor) = 0;
  virtual void retract_element(const std::string& element, const std::string& actor) = 0;
};

class EngineTarget final : public ScenarioTarget {
 public:
  explicit EngineTarget(Archive& archive) : archive_(archive) {}

  void load_schema(const TaskTypeSchema& schema, const std::string& actor) override;
  std::string begin_instance(const SchemaRef& schema, const std::string& title,
                             const std::string& actor) override;
  void close_instance(const std::string& instance, const std::string& actor) override;
  std::string begin_activity(const std::string& instance, const std::string& category,
                             const std::string& actor) override;
  void end_activity(const std::string& activity, const std::string& actor) override;
  std::string record_element(const RecordRequest& request) override;
  void link_elements(const std::string& from, const std::string& to, LinkKind kind,
                     const std::optional<std::string>& note, const std::string& actor) override;
  void retract_element(const std::string& element, const std::string& actor) override;

 private:
  Archive& archive_;
};

struct ReplayResult {
  /// symbol -> archive id
  std::map<std::string, std::string> ids;

  const std::string& id(const std::string& symbol) const { return ids.at(symbol); }
  Json to_json() const { return ids; }
};

/// Runs every step in order. Throws Error(invalid_argument) for malformed
/// steps or symbols used before definition; engine errors propagate with the
/// failing step number prefixed to the message.
ReplayResult replay(const ScenarioScript& script, ScenarioTarget& target);
ReplayResult replay(const ScenarioScript& script, Archive& archive);

}  // namespace iw
