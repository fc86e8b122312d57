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

#include "iw/error.hpp"

#include <array>

namespace iw {

namespace {

constexpr std::array kAllCodes = {
    ErrorCode::syntax_error,         ErrorCode::unknown_field,
    ErrorCode::duplicate_id,         ErrorCode::dangling_reference,
    ErrorCode::invalid_schema,       ErrorCode::duplicate_schema,
    ErrorCode::unknown_schema,       ErrorCode::unknown_instance,
    ErrorCode::unknown_activity,     ErrorCode::unknown_element,
    ErrorCode::unknown_category,     ErrorCode::unknown_target,
    ErrorCode::unresolvable_context, ErrorCode::instance_closed,
    ErrorCode::activity_already_active, ErrorCode::activity_not_active,
    ErrorCode::activity_still_active, ErrorCode::already_retracted,
    ErrorCode::activity_instance_mismatch, ErrorCode::produces_mismatch,
    ErrorCode::empty_body,           ErrorCode::self_loop,
    ErrorCode::duplicate_edge,       ErrorCode::ds_cross_instance,
    ErrorCode::ds_cycle,             ErrorCode::invalid_argument,
    ErrorCode::unauthorized,         ErrorCode::forbidden,
    ErrorCode::journal_corrupt,      ErrorCode::journal_gap,
    ErrorCode::io_error,
};

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::syntax_error: return "syntax_error";
    case ErrorCode::unknown_field: return "unknown_field";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::dangling_reference: return "dangling_reference";
    case ErrorCode::invalid_schema: return "invalid_schema";
    case ErrorCode::duplicate_schema: return "duplicate_schema";
    case ErrorCode::unknown_schema: return "unknown_schema";
    case ErrorCode::unknown_instance: return "unknown_instance";
    case ErrorCode::unknown_activity: return "unknown_activity";
    case ErrorCode::unknown_element: return "unknown_element";
    case ErrorCode::unknown_category: return "unknown_category";
    case ErrorCode::unknown_target: return "unknown_target";
    case ErrorCode::unresolvable_context: return "unresolvable_context";
    case ErrorCode::instance_closed: return "instance_closed";
    case ErrorCode::activity_already_active: return "activity_already_active";
    case ErrorCode::activity_not_active: return "activity_not_active";
    case ErrorCode::activity_still_active: return "activity_still_active";
    case ErrorCode::already_retracted: return "already_retracted";
    case ErrorCode::activity_instance_mismatch: return "activity_instance_mismatch";
    case ErrorCode::produces_mismatch: return "produces_mismatch";
    case ErrorCode::empty_body: return "empty_body";
    case ErrorCode::self_loop: return "self_loop";
    case ErrorCode::duplicate_edge: return "duplicate_edge";
    case ErrorCode::ds_cross_instance: return "ds_cross_instance";
    case ErrorCode::ds_cycle: return "ds_cycle";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::unauthorized: return "unauthorized";
    case ErrorCode::forbidden: return "forbidden";
    case ErrorCode::journal_corrupt: return "journal_corrupt";
    case ErrorCode::journal_gap: return "journal_gap";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::unauthorized:
      return 401;
    case ErrorCode::forbidden:
      return 403;
    case ErrorCode::unknown_schema:
    case ErrorCode::unknown_instance:
    case ErrorCode::unknown_activity:
    case ErrorCode::unknown_element:
      return 404;
    case ErrorCode::duplicate_schema:
    case ErrorCode::instance_closed:
    case ErrorCode::activity_already_active:
    case ErrorCode::activity_not_active:
    case ErrorCode::activity_still_active:
    case ErrorCode::already_retracted:
    case ErrorCode::duplicate_edge:
      return 409;
    case ErrorCode::syntax_error:
    case ErrorCode::unknown_field:
    case ErrorCode::duplicate_id:
    case ErrorCode::dangling_reference:
    case ErrorCode::invalid_schema:
    case ErrorCode::unknown_category:
    case ErrorCode::unknown_target:
    case ErrorCode::unresolvable_context:
    case ErrorCode::activity_instance_mismatch:
    case ErrorCode::produces_mismatch:
    case ErrorCode::empty_body:
    case ErrorCode::self_loop:
    case ErrorCode::ds_cross_instance:
    case ErrorCode::ds_cycle:
    case ErrorCode::invalid_argument:
      return 422;
    case ErrorCode::journal_corrupt:
    case ErrorCode::journal_gap:
    case ErrorCode::io_error:
      return 500;
  }
  return 500;
}

std::span<const ErrorCode> all_error_codes() noexcept { return kAllCodes; }

}  // namespace iw
