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
#include <memory>
#include <string>
#include <string_view>

namespace iw {

/// Milliseconds since the Unix epoch, UTC.
using Millis = std::int64_t;

/// "2024-01-01T00:00:00.000Z"
std::string format_timestamp(Millis ms);

/// Inverse of format_timestamp; accepts only that exact shape.
/// Throws Error(invalid_argument) on malformed input.
Millis parse_timestamp(std::string_view text);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now() = 0;
};

class SystemClock final : public Clock {
 public:
  Millis now() override;
};

/// Deterministic clock: starts at `origin` and advances 1 ms per call.
class LogicalClock final : public Clock {
 public:
  static constexpr Millis kDefaultOrigin = 1704067200000;  // 2024-01-01T00:00:00Z

  explicit LogicalClock(Millis origin = kDefaultOrigin) : next_(origin) {}
  Millis now() override { return next_++; }

 private:
  Millis next_;
};

}  // namespace iw
