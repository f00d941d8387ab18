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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "profsim/ingest/bid_traces.hpp"

namespace profsim::ingest {

/// Relay API field names for the values a bid-trace record needs. Relays differ,
/// so the mapping is configuration rather than code.
struct FieldMapping {
  std::string slot{"slot"};
  std::string timestamp_ms{"timestamp_ms"};
  std::string value{"value"};
  std::string builder{"builder_pubkey"};
  std::string cancelled;  // empty: the API has no cancellation flag

  /// Field names of the mev-boost relay data API (`builder_blocks_received`).
  static FieldMapping mev_boost() { return {}; }
  /// Field names already in bid-trace record form.
  static FieldMapping native() { return {"slot", "timestamp_ms", "value_wei", "builder_id", "cancelled"}; }
};

struct FetchConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path{"/relay/v1/data/bidtraces/builder_blocks_received"};
  Slot first_slot{0};
  Slot last_slot{0};  // inclusive
  double requests_per_second{2.0};
  int max_attempts{5};
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{10};
  std::filesystem::path output;
  std::filesystem::path checkpoint;  // defaults to <output>.checkpoint.json
  bool resume{false};
  FieldMapping mapping{};
  TraceMetadata metadata{1'606'824'023'000, gwei(20), {}, nlohmann::json::object()};

  void validate() const {
    if (base_url.empty()) throw std::invalid_argument("endpoint URL is required");
    if (output.empty()) throw std::invalid_argument("output path is required");
    if (last_slot < first_slot) throw std::invalid_argument("slot range is empty");
    if (!(requests_per_second > 0.0)) throw std::invalid_argument("rate limit must be positive");
    if (max_attempts < 1) throw std::invalid_argument("need at least one attempt");
  }
  [[nodiscard]] std::filesystem::path checkpoint_path() const {
    if (!checkpoint.empty()) return checkpoint;
    auto p = output;
    p += ".checkpoint.json";
    return p;
  }
};

struct FetchResult {
  std::size_t pages{0};
  std::size_t records{0};
  std::size_t retries{0};
  std::optional<Slot> last_slot;
};

class FetchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

[[nodiscard]] inline std::optional<Slot> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    return j.at("last_slot").get<Slot>();
  } catch (const nlohmann::json::exception& e) {
    throw FetchError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
}

/// Replaces `path` with `contents` via a temporary file and rename.
inline void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FetchError("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw FetchError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_checkpoint(const std::filesystem::path& path, Slot last) {
  atomic_write(path, nlohmann::json{{"last_slot", last}}.dump() + "\n");
}

/// Maps one API object to a bid-trace record.
[[nodiscard]] inline BidTraceRecord map_record(const nlohmann::json& obj, const FieldMapping& m,
                                               Slot slot) {
  const auto need = [&](const std::string& name) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(name)) throw FetchError("response lacks field " + name);
    return obj.at(name);
  };
  BidTraceRecord r;
  const auto s = detail::json_int<std::uint64_t>(need(m.slot));
  const auto ts = detail::json_int<std::int64_t>(need(m.timestamp_ms));
  const auto v = detail::json_wei(need(m.value));
  const auto& b = need(m.builder);
  if (!s || !ts || !v || !b.is_string()) throw FetchError("malformed bid in slot " + std::to_string(slot));
  if (*s != slot) throw FetchError("response for slot " + std::to_string(slot) + " names slot " + std::to_string(*s));
  r.slot = *s;
  r.timestamp_ms = *ts;
  r.value_wei = *v;
  r.builder_id = b.get<std::string>();
  if (!m.cancelled.empty() && obj.contains(m.cancelled) && obj.at(m.cancelled).is_boolean()) {
    r.cancelled = obj.at(m.cancelled).get<bool>();
  }
  return r;
}

/// Downloads one page per slot, appending records to the output and advancing the
/// checkpoint after each page. Retries 429, 5xx and connection failures with
/// exponential backoff. On resume, records past the checkpoint (from a page whose
/// checkpoint never landed) are discarded first so no slot appears twice.
inline FetchResult fetch_bid_traces(const FetchConfig& cfg, const Sleeper& sleep = real_sleep) {
  cfg.validate();
  const auto checkpoint = cfg.checkpoint_path();
  Slot start = cfg.first_slot;
  if (cfg.resume) {
    if (const auto last = read_checkpoint(checkpoint)) {
      start = std::max(start, *last + 1);
      std::string kept;
      if (std::filesystem::exists(cfg.output)) {
        for (const auto& r : read_bid_records(cfg.output)) {
          if (r.slot <= *last) kept += format_bid_record(r) + "\n";
        }
      }
      atomic_write(cfg.output, kept);
    }
  } else {
    atomic_write(cfg.output, "");
    std::filesystem::remove(checkpoint);
  }
  if (!std::filesystem::exists(metadata_path(cfg.output))) {
    TraceMetadata meta = cfg.metadata;
    meta.provenance = {{"source", cfg.base_url + cfg.path}, {"base_fee", "default, not in relay data"}};
    atomic_write(metadata_path(cfg.output), metadata_json(meta).dump(2) + "\n");
  }

  httplib::Client client(cfg.base_url);
  client.set_connection_timeout(cfg.timeout);
  client.set_read_timeout(cfg.timeout);
  const auto min_gap = std::chrono::milliseconds(
      static_cast<long long>(std::ceil(1000.0 / cfg.requests_per_second)));

  FetchResult result;
  // Time already waited since the previous request; the rate gap only tops it up.
  std::optional<std::chrono::milliseconds> waited;
  std::ofstream out(cfg.output, std::ios::binary | std::ios::app);
  if (!out) throw FetchError("cannot append to " + cfg.output.string());

  for (Slot slot = start; slot <= cfg.last_slot; ++slot) {
    const std::string target = cfg.path + "?slot=" + std::to_string(slot);
    std::string body;
    for (int attempt = 1;; ++attempt) {
      if (waited && *waited < min_gap) sleep(min_gap - *waited);
      waited = std::chrono::milliseconds{0};
      const auto res = client.Get(target);
      const bool transient = !res || res->status == 429 || res->status >= 500;
      if (res && res->status == 200) {
        body = res->body;
        break;
      }
      if (!transient) {
        throw FetchError("GET " + target + " failed with HTTP " + std::to_string(res->status));
      }
      if (attempt >= cfg.max_attempts) {
        throw FetchError("GET " + target + " failed after " + std::to_string(attempt) +
                         " attempts: " + (res ? "HTTP " + std::to_string(res->status)
                                              : httplib::to_string(res.error())));
      }
      ++result.retries;
      const auto backoff = cfg.initial_backoff * (1LL << (attempt - 1));
      sleep(backoff);
      waited = backoff;
    }

    nlohmann::json page;
    try {
      page = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw FetchError("slot " + std::to_string(slot) + ": invalid JSON: " + e.what());
    }
    if (!page.is_array()) throw FetchError("slot " + std::to_string(slot) + ": expected a JSON array");
    for (const auto& obj : page) {
      out << format_bid_record(map_record(obj, cfg.mapping, slot)) << '\n';
      ++result.records;
    }
    out.flush();
    if (!out) throw FetchError("write to " + cfg.output.string() + " failed");
    write_checkpoint(checkpoint, slot);
    ++result.pages;
    result.last_slot = slot;
  }
  return result;
}

}  // namespace profsim::ingest
