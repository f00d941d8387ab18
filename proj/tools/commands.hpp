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

#include <array>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "profsim/amm/mechanism.hpp"
#include "profsim/ingest/bid_traces.hpp"
#include "profsim/ingest/swap_events.hpp"
#include "profsim/latency/fixture.hpp"
#include "profsim/latency/latency.hpp"
#include "profsim/prof/protocol_sim.hpp"

namespace profsim::cli {

/// Problem with an input file: missing, unreadable or malformed.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form, independent of locale and stream state.
[[nodiscard]] inline std::string fmt(double v) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format number");
  return {buf.data(), end};
}

[[nodiscard]] inline std::filesystem::path data_dir() {
  const char* env = std::getenv("PROFSIM_DATA_DIR");
  return env != nullptr && *env != '\0' ? std::filesystem::path{env} : std::filesystem::path{"data"};
}

/// Relative inputs that do not exist as given are looked up in the data directory.
[[nodiscard]] inline std::filesystem::path resolve_input(const std::filesystem::path& p) {
  if (p.is_absolute() || std::filesystem::exists(p)) return p;
  const auto candidate = data_dir() / p;
  if (std::filesystem::exists(candidate)) return candidate;
  throw InputError("input not found: " + p.string() + " (also looked in " + data_dir().string() + ")");
}

/// Runs `write` against stdout for "-", otherwise against a truncated file.
template <class Fn>
void with_output(const std::string& path, Fn&& write) {
  if (path.empty()) return;
  if (path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  write(out);
  if (!out) throw std::runtime_error("write failed for " + path);
}

// ---- simulate-amm ----------------------------------------------------------

struct AmmOptions {
  amm::SimConfig sim{};
  std::vector<double> caps{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<int> users{20, 100};
  std::string out{"-"};
};

inline void write_study_csv(std::ostream& os, std::span<const amm::StudyRow> rows) {
  os << "demand_ratio_cap,mean_users,mechanism,mean_utility,std_utility,iterations,seed\n";
  for (const auto& r : rows) {
    os << fmt(r.demand_ratio_cap) << ',' << r.mean_users << ',' << amm::to_string(r.mechanism)
       << ',' << fmt(r.mean_utility) << ',' << fmt(r.std_utility) << ',' << r.iterations << ','
       << r.seed << '\n';
  }
}

inline void print_study_summary(std::ostream& os, std::span<const amm::StudyRow> rows) {
  std::array<char, 128> line{};
  std::snprintf(line.data(), line.size(), "%-6s %-5s %-11s %16s %14s\n", "cap", "N", "mechanism",
                "mean utility", "std error");
  os << line.data();
  for (const auto& r : rows) {
    std::snprintf(line.data(), line.size(), "%-6g %-5d %-11s %16.9g %14.3g\n", r.demand_ratio_cap,
                  r.mean_users, std::string{amm::to_string(r.mechanism)}.c_str(), r.mean_utility,
                  r.standard_error());
    os << line.data();
  }
}

[[nodiscard]] inline std::vector<amm::StudyRow> simulate_amm(const AmmOptions& o) {
  if (o.caps.empty() || o.users.empty()) throw std::invalid_argument("need at least one cap and one N");
  return amm::run_study(o.sim, o.caps, o.users);
}

// ---- demand-histogram ------------------------------------------------------

struct HistogramOptions {
  std::string input;
  std::size_t window{500};
  std::vector<double> edges{0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 4.0, 8.0};
  std::string out{"-"};
};

inline void write_histogram_csv(std::ostream& os, const amm::DemandHistogram& h) {
  os << "bin_low,bin_high,percent\n";
  for (std::size_t i = 0; i < h.percent.size(); ++i) {
    os << fmt(h.edges[i]) << ',' << fmt(h.edges[i + 1]) << ',' << fmt(h.percent[i]) << '\n';
  }
}

[[nodiscard]] inline amm::DemandHistogram demand_histogram(const HistogramOptions& o) {
  if (o.window == 0) throw std::invalid_argument("window must be positive");
  const auto path = resolve_input(o.input);
  return amm::demand_ratio_histogram(ingest::load_swap_events(path), o.window, o.edges);
}

// ---- analyze-latency -------------------------------------------------------

struct LatencyOptions {
  std::string input{"fixtures/synthetic_bids.jsonl"};
  std::vector<double> deltas{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100,
                             120, 140, 160, 180, 200};
  std::vector<double> gammas{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
  std::vector<Gas> gas{100'000, 250'000, 750'000, 1'500'000, 5'000'000, 15'000'000};
  latency::LatencyModel model{};
  latency::T0Strategy t0{latency::T0Strategy::SlotDeadline};
  std::string penalty_out{"penalty.csv"};
  std::string surface_out{"surface.csv"};
};

struct LatencyReport {
  std::size_t slots{0};
  latency::PenaltyCurves penalties;
  std::vector<latency::SurfacePoint> surface;
  double p90_slope{0.0};  // ETH per second; zero when the grid has no non-zero latency
};

inline void write_penalty_csv(std::ostream& os, const latency::PenaltyCurves& c) {
  os << "delta_ms,percentile,penalty_wei\n";
  for (std::size_t i = 0; i < c.deltas.size(); ++i) {
    os << fmt(c.deltas[i]) << ",mean," << c.mean[i].str() << '\n';
    for (int p : latency::kPercentiles) {
      os << fmt(c.deltas[i]) << ',' << p << ',' << c.percentile.at(p)[i].str() << '\n';
    }
  }
}

inline void write_surface_csv(std::ostream& os, std::span<const latency::SurfacePoint> pts) {
  os << "gas,gamma,alpha\n";
  for (const auto& p : pts) os << p.gas << ',' << fmt(p.gamma) << ',' << fmt(p.alpha) << '\n';
}

[[nodiscard]] inline std::vector<latency::SlotBids> load_traces(const std::string& input,
                                                                latency::T0Strategy t0) {
  auto slots = ingest::load_bid_traces(resolve_input(input));
  if (slots.empty()) throw InputError("no bids in " + input);
  for (auto& s : slots) s.t0 = latency::estimate_t0(s.traces, t0);
  return slots;
}

[[nodiscard]] inline LatencyReport analyze_latency(const LatencyOptions& o) {
  if (o.deltas.empty()) throw std::invalid_argument("latency grid is empty");
  for (double d : o.deltas) {
    if (!(d >= 0.0)) throw std::invalid_argument("latencies must be non-negative");
  }
  o.model.validate();
  const auto slots = load_traces(o.input, o.t0);
  LatencyReport r;
  r.slots = slots.size();
  r.penalties = latency::penalty_percentiles(slots, o.deltas);
  r.surface = latency::inclusion_surface(slots, o.gammas, o.gas, o.model);
  bool nonzero = false;
  for (double d : o.deltas) nonzero = nonzero || d > 0.0;
  if (nonzero) r.p90_slope = latency::slope_eth_per_second(o.deltas, r.penalties.percentile.at(90));
  return r;
}

// ---- simulate-protocol -----------------------------------------------------

struct ProtocolOptions {
  prof::ProtocolConfig config{};
  std::string out{"-"};
  std::string log_out;
};

inline void write_protocol_csv(std::ostream& os, const prof::ProtocolReport& r) {
  os << "slot,prof_won,share_path,share_won,missed,final_value_wei,baseline_value_wei,"
        "merge_requests,merge_refusals,released_headers,equivocation_attempts,"
        "equivocations_rejected,restarts\n";
  for (const auto& s : r.slots) {
    std::size_t refused = 0;
    for (const auto& m : s.merges) refused += m.refusal ? 1 : 0;
    os << s.slot << ',' << s.prof_won << ',' << s.share_path << ',' << s.share_won << ','
       << s.missed << ',' << s.final_value.str() << ',' << s.baseline_value.str() << ','
       << s.merges.size() << ',' << refused << ',' << s.released_headers << ','
       << s.equivocation_attempts << ',' << s.equivocations_rejected << ',' << s.restarts << '\n';
  }
}

inline void print_protocol_summary(std::ostream& os, const prof::ProtocolReport& r) {
  std::size_t prof = 0, missed = 0, refusals = 0;
  Wei revenue{0}, baseline{0};
  for (const auto& s : r.slots) {
    prof += s.prof_won ? 1 : 0;
    missed += s.missed ? 1 : 0;
    for (const auto& m : s.merges) refusals += m.refusal ? 1 : 0;
    revenue += s.final_value;
    baseline += s.baseline_value;
  }
  os << "slots " << r.slots.size() << ", PROF block chosen " << prof << ", missed " << missed
     << ", merge refusals " << refusals << "\nproposer revenue " << wei_to_ether(revenue)
     << " ETH (baseline " << wei_to_ether(baseline) << " ETH)\n";
}

// ---- gen-fixture -----------------------------------------------------------

struct FixtureOptions {
  latency::LinearFixtureParams params{};
  std::int64_t slot_zero_ms{1'606'824'023'000};
  std::string out{"synthetic_bids.jsonl"};
};

[[nodiscard]] inline nlohmann::json fixture_provenance(const FixtureOptions& o) {
  const auto& p = o.params;
  return {{"generator", "profsim gen-fixture"},
          {"kind", "linear"},
          {"slots", p.slots},
          {"q90_rate_eth_per_s", p.q90_rate_eth_per_s},
          {"rate_log_sigma", p.rate_log_sigma},
          {"dense_from_ms", p.dense_from},
          {"dense_interval_ms", p.dense_interval},
          {"sparse_interval_ms", p.sparse_interval},
          {"base_value_wei", p.base_value.str()},
          {"first_slot", p.first_slot},
          {"seed", p.seed}};
}

inline std::size_t generate_fixture(const FixtureOptions& o) {
  const auto slots = latency::make_linear_fixture(o.params);
  ingest::TraceMetadata meta;
  meta.slot_zero_ms = o.slot_zero_ms;
  meta.default_base_fee = o.params.base_fee;
  meta.provenance = fixture_provenance(o);
  ingest::write_bid_traces(o.out, slots, meta);
  return slots.size();
}

}  // namespace profsim::cli
