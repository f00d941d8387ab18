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

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "profsim/latency/latency.hpp"

namespace profsim::ingest {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_{line} {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class MissingMetadata : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BidTraceRecord {
  Slot slot{0};
  std::int64_t timestamp_ms{0};  // epoch milliseconds
  Wei value_wei;
  std::string builder_id;
  bool cancelled{false};

  friend bool operator==(const BidTraceRecord&, const BidTraceRecord&) = default;
};

/// Sidecar `<stem>.meta.json` next to a bid-trace file.
struct TraceMetadata {
  std::int64_t slot_zero_ms{0};  // epoch ms at which slot 0 starts
  Wei default_base_fee{gwei(20)};
  std::map<Slot, Wei> base_fee;  // per-slot overrides
  nlohmann::json provenance = nlohmann::json::object();

  [[nodiscard]] Wei base_fee_for(Slot s) const {
    const auto it = base_fee.find(s);
    return it == base_fee.end() ? default_base_fee : it->second;
  }
  [[nodiscard]] std::int64_t slot_start_ms(Slot s) const {
    return slot_zero_ms + static_cast<std::int64_t>(s) * kSlotDurationMs;
  }
};

[[nodiscard]] inline std::filesystem::path metadata_path(const std::filesystem::path& traces) {
  auto p = traces;
  p.replace_extension(".meta.json");
  return p;
}

/// Parses a non-negative decimal integer.
[[nodiscard]] inline std::optional<Wei> parse_wei(std::string_view s) {
  if (s.empty() || s.size() > 78) return std::nullopt;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  return Wei{std::string(s)};
}

namespace detail {

template <typename Int>
std::optional<Int> json_int(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<Int>();
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    Int out{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc{} && p == s.data() + s.size()) return out;
  }
  return std::nullopt;
}

inline std::optional<Wei> json_wei(const nlohmann::json& v) {
  if (v.is_string()) return parse_wei(v.get_ref<const std::string&>());
  if (v.is_number_unsigned()) return Wei{v.get<std::uint64_t>()};
  return std::nullopt;
}

}  // namespace detail

[[nodiscard]] inline BidTraceRecord parse_bid_record(const std::string& line,
                                                     const std::string& source, std::size_t lineno) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, lineno, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(source, lineno, "expected a JSON object");
  const auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) throw ParseError(source, lineno, std::string("missing field ") + name);
    return j.at(name);
  };
  BidTraceRecord r;
  const auto slot = detail::json_int<std::uint64_t>(field("slot"));
  if (!slot) throw ParseError(source, lineno, "slot is not a non-negative integer");
  r.slot = *slot;
  const auto ts = detail::json_int<std::int64_t>(field("timestamp_ms"));
  if (!ts) throw ParseError(source, lineno, "timestamp_ms is not an integer");
  r.timestamp_ms = *ts;
  const auto value = detail::json_wei(field("value_wei"));
  if (!value) throw ParseError(source, lineno, "value_wei is not a non-negative integer");
  r.value_wei = *value;
  const auto& builder = field("builder_id");
  if (!builder.is_string()) throw ParseError(source, lineno, "builder_id is not a string");
  r.builder_id = builder.get<std::string>();
  if (j.contains("cancelled")) {
    if (!j["cancelled"].is_boolean()) throw ParseError(source, lineno, "cancelled is not a boolean");
    r.cancelled = j["cancelled"].get<bool>();
  }
  return r;
}

[[nodiscard]] inline std::string format_bid_record(const BidTraceRecord& r) {
  nlohmann::ordered_json j;
  j["slot"] = r.slot;
  j["timestamp_ms"] = r.timestamp_ms;
  j["value_wei"] = r.value_wei.str();
  j["builder_id"] = r.builder_id;
  j["cancelled"] = r.cancelled;
  return j.dump();
}

[[nodiscard]] inline TraceMetadata parse_metadata(const nlohmann::json& j) {
  TraceMetadata m;
  if (!j.is_object() || !j.contains("slot_zero_ms")) {
    throw MissingMetadata("metadata needs slot_zero_ms");
  }
  const auto zero = detail::json_int<std::int64_t>(j["slot_zero_ms"]);
  if (!zero) throw MissingMetadata("slot_zero_ms is not an integer");
  m.slot_zero_ms = *zero;
  if (j.contains("default_base_fee_wei")) {
    const auto f = detail::json_wei(j["default_base_fee_wei"]);
    if (!f) throw MissingMetadata("default_base_fee_wei is not a non-negative integer");
    m.default_base_fee = *f;
  }
  if (j.contains("base_fee_wei")) {
    for (const auto& [k, v] : j["base_fee_wei"].items()) {
      Slot s{};
      const auto [p, ec] = std::from_chars(k.data(), k.data() + k.size(), s);
      const auto f = detail::json_wei(v);
      if (ec != std::errc{} || p != k.data() + k.size() || !f) {
        throw MissingMetadata("bad base fee entry for slot " + k);
      }
      m.base_fee[s] = *f;
    }
  }
  if (j.contains("provenance")) m.provenance = j["provenance"];
  return m;
}

[[nodiscard]] inline nlohmann::ordered_json metadata_json(const TraceMetadata& m) {
  nlohmann::ordered_json j;
  j["slot_zero_ms"] = m.slot_zero_ms;
  j["default_base_fee_wei"] = m.default_base_fee.str();
  nlohmann::ordered_json fees = nlohmann::ordered_json::object();
  for (const auto& [s, f] : m.base_fee) fees[std::to_string(s)] = f.str();
  j["base_fee_wei"] = fees;
  j["provenance"] = m.provenance;
  return j;
}

[[nodiscard]] inline TraceMetadata load_metadata(const std::filesystem::path& traces) {
  const auto path = metadata_path(traces);
  std::ifstream in(path);
  if (!in) throw MissingMetadata("missing metadata file " + path.string());
  try {
    return parse_metadata(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw MissingMetadata("unreadable metadata " + path.string() + ": " + e.what());
  }
}

/// Groups records by slot, drops cancelled bids, converts timestamps to ms since
/// slot start and sorts each slot by time (stable, so equal times keep file order).
[[nodiscard]] inline std::vector<latency::SlotBids> group_records(
    const std::vector<BidTraceRecord>& records, const TraceMetadata& meta) {
  std::map<Slot, latency::SlotBids> by_slot;
  for (const auto& r : records) {
    auto& s = by_slot[r.slot];
    s.slot = r.slot;
    if (r.cancelled) continue;
    s.traces.push_back({r.timestamp_ms - meta.slot_start_ms(r.slot), r.value_wei, r.builder_id});
  }
  std::vector<latency::SlotBids> out;
  for (auto& [slot, s] : by_slot) {
    if (s.traces.empty()) continue;
    std::stable_sort(s.traces.begin(), s.traces.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    s.t0 = kSlotDurationMs;
    s.base_fee = meta.base_fee_for(slot);
    out.push_back(std::move(s));
  }
  return out;
}

[[nodiscard]] inline std::vector<BidTraceRecord> read_bid_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<BidTraceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_bid_record(line, path.string(), lineno));
  }
  return out;
}

[[nodiscard]] inline std::vector<latency::SlotBids> load_bid_traces(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("no such file " + path.string());
  const TraceMetadata meta = load_metadata(path);
  return group_records(read_bid_records(path), meta);
}

/// Writes slots as bid-trace records plus the metadata sidecar. Per-slot base
/// fees that differ from the default are recorded in the sidecar.
inline void write_bid_traces(const std::filesystem::path& path,
                             const std::vector<latency::SlotBids>& slots, TraceMetadata meta) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& s : slots) {
      if (s.base_fee != meta.default_base_fee) meta.base_fee[s.slot] = s.base_fee;
      for (const auto& b : s.traces) {
        out << format_bid_record({s.slot, meta.slot_start_ms(s.slot) + b.timestamp, b.value,
                                  b.builder_id, false})
            << '\n';
      }
    }
  }
  std::ofstream meta_out(metadata_path(path), std::ios::binary | std::ios::trunc);
  if (!meta_out) throw std::runtime_error("cannot write metadata for " + path.string());
  meta_out << metadata_json(meta).dump(2) << '\n';
}

}  // namespace profsim::ingest
