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

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace iw {

/// Every failure the engine reports. Each code has a stable machine-readable
/// name and exactly one HTTP status (see http_status()).
enum class ErrorCode {
  // schema documents
  syntax_error,
  unknown_field,
  duplicate_id,
  dangling_reference,
  invalid_schema,
  duplicate_schema,
  // lookups by path/resource id
  unknown_schema,
  unknown_instance,
  unknown_activity,
  unknown_element,
  // references carried in request bodies
  unknown_category,
  unknown_target,
  unresolvable_context,
  // lifecycle
  instance_closed,
  activity_already_active,
  activity_not_active,
  activity_still_active,
  already_retracted,
  // element / edge validation
  activity_instance_mismatch,
  produces_mismatch,
  empty_body,
  self_loop,
  duplicate_edge,
  ds_cross_instance,
  ds_cycle,
  invalid_argument,
  // sessions
  unauthorized,
  forbidden,
  // persistence
  journal_corrupt,
  journal_gap,
  io_error,
};

std::string_view to_string(ErrorCode code) noexcept;

/// HTTP status the service answers with for `code`.
int http_status(ErrorCode code) noexcept;

/// All enumerated codes, for totality tests.
std::span<const ErrorCode> all_error_codes() noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace iw
