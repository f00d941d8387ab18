/*
   Copyright 2026 The profsim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "profsim/core/types.hpp"

namespace profsim::pbs {

struct Event {
  Millis virtual_time_ms{0};
  std::string event_kind;
  nlohmann::json payload;
};

/// Append-only record of simulator events, written out as JSON lines.
class EventLog {
 public:
  void record(Millis at, std::string kind, nlohmann::json payload = nlohmann::json::object()) {
    events_.push_back({at, std::move(kind), std::move(payload)});
  }

  [[nodiscard]] const std::vector<Event>& events() const noexcept { return events_; }
  [[nodiscard]] std::size_t count(std::string_view kind) const {
    std::size_t n = 0;
    for (const auto& e : events_) n += e.event_kind == kind ? 1 : 0;
    return n;
  }
  void clear() noexcept { events_.clear(); }

  void write_jsonl(std::ostream& out) const {
    for (const auto& e : events_) {
      nlohmann::ordered_json line;
      line["virtual_time_ms"] = e.virtual_time_ms;
      line["event_kind"] = e.event_kind;
      line["payload"] = e.payload;
      out << line.dump() << '\n';
    }
  }

 private:
  std::vector<Event> events_;
};

[[nodiscard]] inline std::string wei_string(const Wei& w) { return w.str(); }

}  // namespace profsim::pbs
