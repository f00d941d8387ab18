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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "profsim/amm/mechanism.hpp"
#include "profsim/amm/pool.hpp"
#include "profsim/core/rng.hpp"
#include "profsim/ingest/bid_traces.hpp"
#include "profsim/latency/fixture.hpp"
#include "profsim/latency/latency.hpp"
#include "profsim/prof/protocol_sim.hpp"

namespace {

using namespace profsim;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass{false};
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Log-uniform draw in [lo, hi].
double log_uniform(CounterRng& rng, double lo, double hi) {
  return std::exp(std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo)));
}

// ---- 1. constant product ---------------------------------------------------

Outcome constant_product() {
  const auto t0 = Clock::now();
  CounterRng rng{derive_key({1, 1})};
  double worst = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    const PoolState pool{log_uniform(rng, 1e3, 1e12), log_uniform(rng, 1e3, 1e12)};
    const double k = pool.reserve_x * pool.reserve_y;
    amm::SwapResult r;
    switch (rng() % 3) {
      case 0:
        r = amm::swap(pool, TradeDirection::SellX, pool.reserve_x * log_uniform(rng, 1e-8, 10.0));
        break;
      case 1:
        r = amm::swap(pool, TradeDirection::SellY, pool.reserve_y * log_uniform(rng, 1e-8, 10.0));
        break;
      default:  // buy X, leaving at least a sliver of the reserve
        r = amm::swap_x(pool, -pool.reserve_x * log_uniform(rng, 1e-8, 0.99));
        break;
    }
    worst = std::max(worst, std::fabs(r.pool.reserve_x * r.pool.reserve_y - k) / k);
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 1.0,
          "max relative drift " + num(worst) + " over 10000 swaps, " + num(secs) + " s"};
}

// ---- 2. backrun ------------------------------------------------------------

// Profit of moving t X into the pool (t < 0 takes X out) and closing the
// position at the static price: y*t/(x+t) - t*P.
double arb_profit(const PoolState& p, double price, double t) {
  return p.reserve_y * t / (p.reserve_x + t) - t * price;
}

Outcome backrun() {
  const auto t0 = Clock::now();
  CounterRng rng{derive_key({2, 1})};
  double worst_price = 0.0, worst_gap = 0.0;
  for (int i = 0; i < 1'000; ++i) {
    const PoolState start{log_uniform(rng, 1e4, 1e9), log_uniform(rng, 1e4, 1e9)};
    const amm::StaticMarket market{start.price()};
    const double frac = log_uniform(rng, 1e-4, 0.5);
    const auto traded = rng.coin() ? amm::swap(start, TradeDirection::SellX, start.reserve_x * frac)
                                   : amm::swap(start, TradeDirection::SellY, start.reserve_y * frac);
    const PoolState pool = traded.pool;
    const amm::Backrun b = amm::optimal_backrun(pool, market);
    worst_price = std::max(worst_price, std::fabs(b.pool_after.price() - market.price) / market.price);

    const double span = 2.0 * std::fabs(b.arb_x);
    double grid_best = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < 10'000; ++g) {
      const double t = -span + 2.0 * span * g / 9'999.0;
      if (pool.reserve_x + t <= 0.0) continue;
      grid_best = std::max(grid_best, arb_profit(pool, market.price, t));
    }
    worst_gap = std::max(worst_gap, (grid_best - b.profit) / b.profit);
  }
  const double secs = seconds_since(t0);
  return {worst_price <= 1e-9 && worst_gap <= 1e-6 && secs < 10.0,
          "max relative price error " + num(worst_price) + ", max (grid best - formula)/formula " +
              num(worst_gap) + ", " + num(secs) + " s"};
}

// ---- 3. equal treatment under MEV-Share ------------------------------------

Outcome mev_share_equal() {
  CounterRng rng{derive_key({3, 1})};
  const amm::SimConfig cfg{};
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    amm::BlockTrades t;
    const int n = 1 + static_cast<int>(rng() % 100);
    for (int k = 0; k < n; ++k) t.amounts.push_back(rng.coin() ? cfg.trade_size : -cfg.trade_size);
    const auto out = amm::run_mechanism(amm::Mechanism::MevShare, t, cfg);
    const auto [lo, hi] = std::minmax_element(out.utilities.begin(), out.utilities.end());
    worst = std::max(worst, *hi - *lo);
  }
  return {worst <= 1e-9, "max per-sequence utility spread " + num(worst) + " over 100 sequences"};
}

// ---- 4. mechanism ordering -------------------------------------------------

Outcome mechanism_ordering() {
  const auto t0 = Clock::now();
  amm::SimConfig cfg{};
  cfg.iterations = 200;
  const std::vector<double> caps{0.25, 0.5, 1.0, 4.0};
  const std::vector<int> users{20, 100};
  const auto rows = amm::run_study(cfg, caps, users);

  std::map<std::tuple<double, int, amm::Mechanism>, amm::StudyRow> at;
  for (const auto& r : rows) at[{r.demand_ratio_cap, r.mean_users, r.mechanism}] = r;

  bool ok = true;
  std::vector<std::string> failures;
  // a beats b by more than two standard errors of the difference.
  const auto beats = [&](double cap, int n, amm::Mechanism a, amm::Mechanism b) {
    const auto& ra = at.at({cap, n, a});
    const auto& rb = at.at({cap, n, b});
    const double diff = ra.mean_utility - rb.mean_utility;
    const double se = std::hypot(ra.standard_error(), rb.standard_error());
    if (diff > 2.0 * se) return;
    ok = false;
    failures.push_back(std::string{amm::to_string(a)} + ">" + std::string{amm::to_string(b)} +
                       "@cap" + num(cap) + ",N" + std::to_string(n) + " (diff " + num(diff) +
                       ", 2se " + num(2.0 * se) + ")");
  };
  using amm::Mechanism;
  for (int n : users) {
    for (double cap : caps) {
      beats(cap, n, Mechanism::ProfShare, Mechanism::MevShare);
      beats(cap, n, Mechanism::ProfShare, Mechanism::Prof);
    }
    beats(0.25, n, Mechanism::Prof, Mechanism::MevShare);
    beats(4.0, n, Mechanism::MevShare, Mechanism::Prof);
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  std::string detail = std::to_string(rows.size()) + " study rows, " + num(secs) + " s";
  for (const auto& f : failures) detail += "; failed " + f;
  return {ok, detail};
}

// ---- 5. latency model ------------------------------------------------------

Outcome latency_model() {
  const latency::LatencyModel model{};
  const double d = model.delta_ms(15'000'000);
  return {std::fabs(d - 85.0) <= 1.0 && std::fabs(d - 85.15) <= 1e-9,
          "delta(15M gas) = " + cli::fmt(d) + " ms"};
}

// ---- 6. inclusion pipeline on a calibrated fixture --------------------------

std::vector<double> delta_grid() {
  std::vector<double> d;
  for (int ms = 10; ms <= 200; ms += 10) d.push_back(ms);
  return d;
}

Outcome inclusion_pipeline(const fs::path& scratch) {
  latency::LinearFixtureParams p{};
  p.slots = 120;
  p.q90_rate_eth_per_s = 0.022;
  const auto generated = latency::make_linear_fixture(p);
  const fs::path file = scratch / "calibrated_bids.jsonl";
  ingest::TraceMetadata meta;
  meta.slot_zero_ms = 1'606'824'023'000;
  ingest::write_bid_traces(file, generated, meta);
  auto slots = ingest::load_bid_traces(file);

  const auto deltas = delta_grid();
  const auto curves = latency::penalty_percentiles(slots, deltas);
  const double slope = latency::slope_eth_per_second(deltas, curves.percentile.at(90));
  const double rel = std::fabs(slope - 0.022) / 0.022;

  const Gas g = 750'000;
  const double gamma = 0.1;
  const latency::LatencyModel model{};
  const double delta = model.delta_ms(g);
  std::vector<Wei> pen;
  for (const auto& s : slots) pen.push_back(latency::latency_penalty(s, delta));
  std::sort(pen.begin(), pen.end());
  const Wei p95 = latency::nearest_rank(pen, 95);
  const auto ppm = latency::gamma_to_ppm(gamma);
  // Smallest base fee with g * gamma * f strictly above the 95th-percentile penalty.
  Wei fee = p95 * 1'000'000 / (Wei{g} * ppm) + 1;
  while (latency::prof_fees(g, ppm, fee) <= p95) fee += 1;
  for (auto& s : slots) s.base_fee = fee;
  const double alpha = latency::inclusion_rate(
      slots, delta, [&](const latency::SlotBids& s) { return latency::prof_fees(g, ppm, s.base_fee); });

  return {slots.size() >= 100 && rel <= 0.10 && alpha >= 0.95,
          std::to_string(slots.size()) + " slots, p90 slope " + num(slope) + " ETH/s (" +
              num(100.0 * rel) + "% off), base fee " + num(wei_to_ether(fee) * 1e9) +
              " gwei, alpha " + num(alpha) + " (self-consistency check)"};
}

// ---- 7. inclusion-rate oracle ------------------------------------------------

// Brute force: no reliance on sorted traces or on the library's helpers.
double brute_inclusion(const std::vector<latency::SlotBids>& slots, double delta, Gas gas,
                       std::int64_t ppm) {
  std::size_t hits = 0;
  for (const auto& s : slots) {
    Wei late{0}, early{0};
    for (const auto& b : s.traces) {
      const double t = static_cast<double>(b.timestamp);
      if (t <= static_cast<double>(s.t0) && b.value > late) late = b.value;
      if (t <= static_cast<double>(s.t0) - delta && b.value > early) early = b.value;
    }
    const Wei fees = Wei{gas} * ppm * s.base_fee / 1'000'000;
    if (fees > late - early) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(slots.size());
}

std::vector<latency::SlotBids> random_fixture(std::uint64_t seed) {
  CounterRng rng{derive_key({7, seed})};
  std::vector<latency::SlotBids> out;
  for (Slot s = 0; s < 60; ++s) {
    latency::SlotBids slot;
    slot.slot = s;
    slot.base_fee = gwei(1 + static_cast<long>(rng() % 60));
    slot.t0 = 11'500 + static_cast<Millis>(rng() % 1'000);
    const int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      // Coarse times and values so ties are common.
      slot.traces.push_back({static_cast<Millis>(rng() % 130) * 100,
                             finney(static_cast<long>(rng() % 80)),
                             "b" + std::to_string(rng() % 3)});
    }
    std::stable_sort(slot.traces.begin(), slot.traces.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    out.push_back(std::move(slot));
  }
  return out;
}

Outcome inclusion_oracle(const fs::path& data) {
  const std::vector<std::pair<std::string, std::vector<latency::SlotBids>>> fixtures{
      {"linear", latency::make_linear_fixture({})},
      {"sample", ingest::load_bid_traces(data / "fixtures" / "sample_bids.jsonl")},
      {"random", random_fixture(1)}};
  const std::vector<double> deltas{0, 1, 10.195, 25, 85.15, 100, 500, 1'000, 5'000};
  const std::vector<double> gammas{0, 0.01, 0.1, 0.5, 1, 5, 50};
  const std::vector<Gas> gas{21'000, 750'000, 15'000'000};
  std::size_t checks = 0, mismatches = 0;
  for (const auto& [name, slots] : fixtures) {
    for (double d : deltas) {
      for (double gm : gammas) {
        const auto ppm = latency::gamma_to_ppm(gm);
        for (Gas g : gas) {
          const double lib = latency::inclusion_rate(slots, d, [&](const latency::SlotBids& s) {
            return latency::prof_fees(g, ppm, s.base_fee);
          });
          ++checks;
          if (lib != brute_inclusion(slots, d, g, ppm)) ++mismatches;
        }
      }
    }
  }
  return {mismatches == 0, std::to_string(checks) + " grid points on 3 fixtures, " +
                               std::to_string(mismatches) + " mismatches"};
}

// ---- 8. protocol invariants ------------------------------------------------

struct Tally {
  std::size_t slots{0}, headers{0}, merges{0}, refusals{0}, replays{0}, audits{0}, multi{0};
  std::vector<std::string> violations;
  void fail(std::string v) {
    if (violations.size() < 5) violations.push_back(std::move(v));
  }
};

prof::ProtocolConfig random_config(CounterRng& rng, std::uint64_t seed) {
  prof::ProtocolConfig c;
  c.slots = 4;
  c.seed = seed;
  c.builders = 1 + rng() % 4;
  c.bids_per_builder = 1 + rng() % 6;
  c.users = 1 + rng() % 8;
  c.arbitrageurs = rng() % 4;
  c.sequencers = 1 + rng() % 3;
  c.guard = std::array{prof::GuardMode::EnrichOnce, prof::GuardMode::BeginBeforeReveal,
                       prof::GuardMode::Unrestricted}[rng() % 3];
  c.enrich_cap = 1 + static_cast<int>(rng() % 4);
  c.policy = rng.coin() ? prof::SequencerPolicy::Fcfs : prof::SequencerPolicy::FeePriority;
  c.multi = rng.coin() ? prof::MultiStrategy::SequentialConcat : prof::MultiStrategy::ParallelBest;
  c.probes = rng() % 4;
  c.header_queries = rng() % 6;
  c.restart_probability = rng.uniform() * 0.6;
  c.equivocation_probability = rng.uniform() * 0.6;
  c.cancel_probability = rng.uniform() * 0.5;
  c.leak_probability = rng.uniform() * 0.6;
  c.conflict_probability = rng.uniform() * 0.4;
  switch (rng() % 4) {
    case 0: break;
    case 1: c.relay_mode = pbs::RelayMode::Optimistic; break;
    case 2: c.prof_share = true; break;
    default:
      c.relay_mode = pbs::RelayMode::Optimistic;
      c.hybrid = true;
      break;
  }
  return c;
}

// Merged block contents checked from scratch: unique ids and (sender, nonce)
// pairs, the block applies cleanly, and every bundle keeps its internal order.
std::optional<std::string> audit_block(const prof::MergeAudit& a) {
  if (a.rebuilt.header != a.reported_header) return "rebuilt header differs from the reported one";
  std::set<std::string> ids;
  std::set<std::pair<std::string, std::uint64_t>> nonces;
  for (const auto* tx : a.rebuilt.ordered()) {
    if (!ids.insert(tx->id).second) return "duplicate tx " + tx->id;
    if (!nonces.insert({tx->sender, tx->nonce}).second) return "duplicate nonce for " + tx->sender;
  }
  try {
    (void)apply_block(a.parent, a.rebuilt);
  } catch (const InvalidBlock& e) {
    return std::string{"invalid transaction: "} + e.what();
  }
  std::map<std::string, std::pair<std::size_t, std::size_t>> where;  // id -> (bundle, index)
  for (std::size_t b = 0; b < a.bundles.size(); ++b) {
    for (std::size_t i = 0; i < a.bundles[b].txs.size(); ++i) where[a.bundles[b].txs[i].id] = {b, i};
  }
  std::map<std::size_t, std::size_t> next;  // bundle -> smallest index allowed next
  for (const auto& tx : a.rebuilt.prof_txs) {
    const auto it = where.find(tx.id);
    if (it == where.end()) return "protected tx " + tx.id + " is not from any bundle";
    const auto [b, i] = it->second;
    if (next.count(b) && i < next[b]) return "bundle order broken at " + tx.id;
    next[b] = i + 1;
  }
  return std::nullopt;
}

void check_slot(const prof::ProtocolConfig& c, const prof::SlotTrace& s, Tally& t) {
  const std::string where = "seed " + std::to_string(c.seed) + " slot " + std::to_string(s.slot);
  ++t.slots;
  // (a)
  if (s.comparable) {
    for (const auto& h : s.headers) {
      ++t.headers;
      if (h.with_prof < h.baseline) t.fail("(a) " + where + ": PROF relay below baseline");
    }
  }
  // (b)
  if (s.released_headers > 1) t.fail("(b) " + where + ": several headers released");
  if (s.equivocations_rejected != s.equivocation_attempts) {
    t.fail("(b) " + where + ": an equivocating commit was served");
  }
  for (const auto& m : s.merges) {
    ++t.merges;
    t.refusals += m.refusal ? 1 : 0;
    t.replays += m.replay ? 1 : 0;
    const bool accepted = !m.refusal && m.reveal_time;
    if (!accepted || c.hybrid) continue;
    // (c)
    if (c.guard == prof::GuardMode::EnrichOnce && m.enrich_count_after > 1) {
      t.fail("(c) " + where + ": enriched twice");
    }
    // (d)
    if (c.guard == prof::GuardMode::BeginBeforeReveal) {
      if (m.first_reveal_before && m.submit_time > *m.first_reveal_before) {
        t.fail("(d) " + where + ": prefix accepted after the first reveal");
      }
      if (m.enrich_count_after > c.enrich_cap) t.fail("(d) " + where + ": enrich cap exceeded");
    }
    // (e)
    if (m.submit_time < m.boot_time + kSlotDurationMs) {
      t.fail("(e) " + where + ": enriched within 12 s of a restart");
    }
  }
  // (f)
  for (const auto& a : s.audits) {
    ++t.audits;
    if (auto v = audit_block(a)) t.fail("(f) " + where + ": " + *v);
  }
  // (g)
  if (s.multi) {
    ++t.multi;
    if (s.multi->second < s.multi->first) t.fail("(g) " + where + ": concat below parallel-best");
  }
}

Outcome protocol_invariants() {
  CounterRng rng{derive_key({8, 1})};
  Tally t;
  std::size_t runs = 0;
  while (t.slots < 1'200) {
    const auto cfg = random_config(rng, 1'000 + runs++);
    const auto report = prof::run_protocol(cfg);
    for (const auto& s : report.slots) check_slot(cfg, s, t);
  }
  std::string detail = std::to_string(t.slots) + " slot schedules over " + std::to_string(runs) +
                       " runs; " + std::to_string(t.headers) + " header checks, " +
                       std::to_string(t.merges) + " merge requests (" + std::to_string(t.refusals) +
                       " refused, " + std::to_string(t.replays) + " replays), " +
                       std::to_string(t.audits) + " audited blocks, " + std::to_string(t.multi) +
                       " multi-bundle slots";
  for (const auto& v : t.violations) detail += "; " + v;
  const bool exercised = t.replays > 0 && t.multi > 0 && t.audits > 0;
  if (!exercised) detail += "; some paths were never exercised";
  return {t.violations.empty() && exercised, detail};
}

// ---- 9. path independence --------------------------------------------------

Outcome path_independence() {
  CounterRng rng{derive_key({9, 1})};
  double worst = 0.0;
  std::size_t orders = 0;
  for (int i = 0; i < 500; ++i) {
    const PoolState start{log_uniform(rng, 1e4, 1e9), log_uniform(rng, 1e4, 1e9)};
    std::vector<double> trades(1 + rng() % 6);
    // Buys are bounded so that every ordering keeps the X reserve positive.
    for (auto& a : trades) {
      a = start.reserve_x * (rng.coin() ? log_uniform(rng, 1e-6, 1.0) : -log_uniform(rng, 1e-6, 0.15));
    }
    std::sort(trades.begin(), trades.end());
    std::optional<PoolState> first;
    do {
      PoolState p = start;
      for (double a : trades) p = amm::swap_x(p, a).pool;
      ++orders;
      if (!first) {
        first = p;
        continue;
      }
      worst = std::max({worst, std::fabs(p.reserve_x - first->reserve_x) / first->reserve_x,
                        std::fabs(p.reserve_y - first->reserve_y) / first->reserve_y});
    } while (std::next_permutation(trades.begin(), trades.end()));
  }
  return {worst <= 1e-9, std::to_string(orders) + " orderings of 500 multisets, max relative difference " +
                             num(worst)};
}

// ---- 10. determinism ---------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const fs::path& data, const fs::path& golden) {
  // Same options as the golden amm_study and latency_fixture CLI runs.
  cli::AmmOptions amm;
  amm.sim.iterations = 50;
  amm.caps = {0.25, 0.5, 1.0, 4.0};
  cli::LatencyOptions lat;
  lat.input = (data / "fixtures" / "synthetic_bids.jsonl").string();

  std::vector<std::string> runs[2];
  for (auto& out : runs) {
    std::ostringstream study, penalty, surface;
    cli::write_study_csv(study, cli::simulate_amm(amm));
    const auto r = cli::analyze_latency(lat);
    cli::write_penalty_csv(penalty, r.penalties);
    cli::write_surface_csv(surface, r.surface);
    out = {study.str(), penalty.str(), surface.str()};
  }
  const std::vector<std::string> files{"amm_study.csv", "latency_penalty.csv", "latency_surface.csv"};
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const bool stable = runs[0][i] == runs[1][i];
    const bool matches = runs[0][i] == slurp(golden / files[i]);
    ok = ok && stable && matches;
    detail += (i ? ", " : "") + files[i] + (stable ? " stable" : " UNSTABLE") +
              (matches ? "/golden" : "/DIFFERS FROM GOLDEN");
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const fs::path source{PROFSIM_SOURCE_DIR};
  const fs::path data = source / "data";
  const fs::path scratch = fs::temp_directory_path() / "profsim_acceptance";
  fs::create_directories(scratch);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"constant-product conservation", constant_product},
      {"backrun correctness", backrun},
      {"equal user utility under MEV-Share", mev_share_equal},
      {"mechanism ordering", mechanism_ordering},
      {"latency model", latency_model},
      {"inclusion pipeline on calibrated fixture", [&] { return inclusion_pipeline(scratch); }},
      {"inclusion-rate oracle equivalence", [&] { return inclusion_oracle(data); }},
      {"protocol invariants", protocol_invariants},
      {"path independence", path_independence},
      {"determinism", [&] { return determinism(data, source / "tests" / "golden"); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string{"exception: "} + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " ("
              << criteria[i].first << "): " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
