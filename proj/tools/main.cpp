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

#include <cstdio>
#include <iostream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "profsim/ingest/fetch.hpp"

namespace {

using namespace profsim;

enum Exit : int { kOk = 0, kConfig = 1, kInput = 2, kRuntime = 3 };

// Enum options are parsed as names and resolved once parsing has finished.
using Resolvers = std::vector<std::function<void()>>;

template <class E>
void add_choice(CLI::App* cmd, Resolvers& resolvers, const std::string& flag, E& target,
                std::string initial, std::map<std::string, E> names, const std::string& help) {
  auto text = std::make_shared<std::string>(std::move(initial));
  std::vector<std::string> keys;
  for (const auto& [k, v] : names) keys.push_back(k);
  cmd->add_option(flag, *text, help)->check(CLI::IsMember(keys))->capture_default_str();
  resolvers.push_back([text, &target, names = std::move(names)] { target = names.at(*text); });
}

// Wei amounts are decimal strings so values above 2^64 survive.
Wei parse_wei_option(const std::string& s, const std::string& name) {
  const auto w = ingest::parse_wei(s);
  if (!w) throw std::invalid_argument(name + " must be a non-negative integer amount of wei");
  return *w;
}

void add_simulate_amm(CLI::App& app, cli::AmmOptions& o) {
  auto* cmd = app.add_subcommand("simulate-amm", "Average user utility under PROF, PROF-Share and MEV-Share");
  auto& s = o.sim;
  cmd->add_option("--caps", o.caps, "Demand-ratio caps to study")->capture_default_str();
  cmd->add_option("--users", o.users, "Mean users per block (Poisson mean)")->capture_default_str();
  cmd->add_option("--iterations", s.iterations, "Blocks sampled per (cap, N)")->capture_default_str();
  cmd->add_option("--seed", s.seed, "Root seed")->capture_default_str();
  cmd->add_option("--kickback", s.kickback_fraction, "Share of arbitrage profit returned to users")
      ->capture_default_str();
  cmd->add_option("--liquidity", s.initial_liquidity, "Initial reserve of each token")->capture_default_str();
  cmd->add_option("--trade-size", s.trade_size, "Size of every user trade")->capture_default_str();
  cmd->add_option("--balance", s.initial_user_balance, "Starting balance of each user")
      ->capture_default_str();
  cmd->add_option("--max-attempts", s.max_attempts, "Resampling attempts per block before giving up")
      ->capture_default_str();
  cmd->add_option("--out", o.out, "Study CSV path, - for stdout")->capture_default_str();
}

void add_demand_histogram(CLI::App& app, cli::HistogramOptions& o) {
  auto* cmd = app.add_subcommand("demand-histogram", "Demand-ratio histogram of recorded swap events");
  cmd->add_option("--input", o.input, "Swap event CSV (pool_id,block_number,amount_x,amount_y)")
      ->required();
  cmd->add_option("--window", o.window, "Swaps in the variability window")->capture_default_str();
  cmd->add_option("--edges", o.edges, "Ascending bin edges")->capture_default_str();
  cmd->add_option("--out", o.out, "Histogram CSV path, - for stdout")->capture_default_str();
}

void add_analyze_latency(CLI::App& app, cli::LatencyOptions& o, Resolvers& r) {
  auto* cmd = app.add_subcommand("analyze-latency", "Latency penalty curves and PROF inclusion surface");
  cmd->add_option("--input", o.input, "Bid-trace JSONL; relative paths also resolve in $PROFSIM_DATA_DIR")
      ->capture_default_str();
  cmd->add_option("--deltas", o.deltas, "Latency grid in ms")->capture_default_str();
  cmd->add_option("--gammas", o.gammas, "Fee overheads (multiples of the base fee)")->capture_default_str();
  cmd->add_option("--gas", o.gas, "Bundle gas grid")->capture_default_str();
  cmd->add_option("--delta0", o.model.delta0_ms, "Fixed merge latency in ms")->capture_default_str();
  cmd->add_option("--beta", o.model.beta_ms_per_mgas, "Merge latency per million gas in ms")
      ->capture_default_str();
  add_choice<latency::T0Strategy>(cmd, r, "--t0", o.t0, "deadline",
                                  {{"deadline", latency::T0Strategy::SlotDeadline},
                                   {"winning-bid", latency::T0Strategy::WinningBidTimestamp}},
                                  "Commit time estimate");
  cmd->add_option("--penalty-out", o.penalty_out, "Penalty CSV path, - for stdout")->capture_default_str();
  cmd->add_option("--surface-out", o.surface_out, "Surface CSV path, - for stdout")->capture_default_str();
}

void add_simulate_protocol(CLI::App& app, cli::ProtocolOptions& o, Resolvers& r) {
  auto* cmd = app.add_subcommand("simulate-protocol", "Slot-by-slot PBS and PROF protocol simulation");
  auto& c = o.config;
  cmd->add_option("--slots", c.slots, "Slots to simulate")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Root seed")->capture_default_str();
  cmd->add_option("--builders", c.builders, "Competing builders")->capture_default_str();
  cmd->add_option("--bids-per-builder", c.bids_per_builder, "Bids per builder per slot")->capture_default_str();
  cmd->add_option("--users", c.users, "Protected transactions per slot")->capture_default_str();
  cmd->add_option("--sequencers", c.sequencers, "PROF sequencers")->capture_default_str();
  cmd->add_option("--arbitrageurs", c.arbitrageurs, "PROF-Share arbitrageurs")->capture_default_str();
  add_choice<prof::GuardMode>(cmd, r, "--guard", c.guard, "enrich-once",
                              {{"enrich-once", prof::GuardMode::EnrichOnce},
                               {"begin-before-reveal", prof::GuardMode::BeginBeforeReveal},
                               {"unrestricted", prof::GuardMode::Unrestricted}},
                              "Merger guard");
  cmd->add_option("--enrich-cap", c.enrich_cap, "Enrichments per slot under begin-before-reveal")
      ->capture_default_str();
  add_choice<pbs::RelayMode>(cmd, r, "--relay-mode", c.relay_mode, "pessimistic",
                             {{"pessimistic", pbs::RelayMode::Pessimistic},
                              {"optimistic", pbs::RelayMode::Optimistic}},
                             "Relay bid validation");
  cmd->add_flag("--hybrid", c.hybrid, "Builder-side merger submitting through an optimistic relay");
  cmd->add_flag("--prof-share", c.prof_share, "Run a PROF-Share backrun auction after commit");
  cmd->add_option("--probes", c.probes, "Extra merge requests with other prefixes per slot")
      ->capture_default_str();
  cmd->add_option("--restart-probability", c.restart_probability, "Merger restart chance per slot")
      ->capture_default_str();
  cmd->add_option("--equivocation-probability", c.equivocation_probability,
                  "Chance the proposer signs a second header")
      ->capture_default_str();
  cmd->add_option("--cancel-probability", c.cancel_probability, "Chance a builder cancels its bids")
      ->capture_default_str();
  cmd->add_option("--leak-probability", c.leak_probability, "Chance a builder copies a protected tx")
      ->capture_default_str();
  cmd->add_option("--conflict-probability", c.conflict_probability,
                  "Chance a user also sends a conflicting public tx")
      ->capture_default_str();
  add_choice<prof::SequencerPolicy>(cmd, r, "--policy", c.policy, "fcfs",
                                    {{"fcfs", prof::SequencerPolicy::Fcfs},
                                     {"fee-priority", prof::SequencerPolicy::FeePriority}},
                                    "Sequencer ordering");
  add_choice<prof::MultiStrategy>(cmd, r, "--multi", c.multi, "sequential",
                                  {{"sequential", prof::MultiStrategy::SequentialConcat},
                                   {"parallel", prof::MultiStrategy::ParallelBest}},
                                  "Combining several bundles");
  cmd->add_option("--delta0", c.latency.delta0_ms, "Fixed merge latency in ms")->capture_default_str();
  cmd->add_option("--beta", c.latency.beta_ms_per_mgas, "Merge latency per million gas in ms")
      ->capture_default_str();
  cmd->add_option("--seal-ms", c.seal_ms, "Bundle seal time within the slot")->capture_default_str();
  cmd->add_option("--query-ms", c.proposer_query_ms, "Proposer's final header request")->capture_default_str();
  cmd->add_option("--header-queries", c.header_queries, "Extra header requests per slot")->capture_default_str();
  cmd->add_option("--out", o.out, "Per-slot CSV path, - for stdout")->capture_default_str();
  cmd->add_option("--log-out", o.log_out, "Event log JSONL path");
}

struct FetchOptions {
  ingest::FetchConfig cfg{};
  std::string mapping{"mev-boost"};
  std::string base_fee{gwei(20).str()};
  long long backoff_ms{500};
  long long timeout_s{10};
};

void add_fetch_bids(CLI::App& app, FetchOptions& o) {
  auto* cmd = app.add_subcommand("fetch-bids", "Download bid traces from a relay data API");
  auto& c = o.cfg;
  cmd->add_option("--url", c.base_url, "Relay base URL, scheme://host[:port]")->required();
  cmd->add_option("--path", c.path, "Data API path")->capture_default_str();
  cmd->add_option("--from", c.first_slot, "First slot")->required();
  cmd->add_option("--to", c.last_slot, "Last slot, inclusive")->required();
  cmd->add_option("--out", c.output, "Output JSONL")->required();
  cmd->add_option("--checkpoint", c.checkpoint, "Checkpoint file (default <out>.checkpoint.json)");
  cmd->add_flag("--resume", c.resume, "Continue after the checkpointed slot");
  cmd->add_option("--rate", c.requests_per_second, "Requests per second")->capture_default_str();
  cmd->add_option("--attempts", c.max_attempts, "Attempts per page")->capture_default_str();
  cmd->add_option("--backoff-ms", o.backoff_ms, "First retry delay, doubled per retry")->capture_default_str();
  cmd->add_option("--timeout-s", o.timeout_s, "Connect and read timeout")->capture_default_str();
  cmd->add_option("--mapping", o.mapping, "Field names: mev-boost or native")
      ->check(CLI::IsMember({"mev-boost", "native"}))
      ->capture_default_str();
  cmd->add_option("--slot-zero-ms", c.metadata.slot_zero_ms, "Epoch ms of slot 0")->capture_default_str();
  cmd->add_option("--base-fee-wei", o.base_fee, "Base fee recorded in the metadata sidecar")
      ->capture_default_str();
}

void add_gen_fixture(CLI::App& app, cli::FixtureOptions& o, std::string& base_value) {
  auto* cmd = app.add_subcommand("gen-fixture", "Write a synthetic bid-trace fixture with linear bid growth");
  auto& p = o.params;
  cmd->add_option("--out", o.out, "Output JSONL (sidecar written next to it)")->capture_default_str();
  cmd->add_option("--slots", p.slots, "Slots to generate")->capture_default_str();
  cmd->add_option("--q90", p.q90_rate_eth_per_s, "90th-percentile growth rate in ETH/s")->capture_default_str();
  cmd->add_option("--sigma", p.rate_log_sigma, "Log-normal spread of growth rates")->capture_default_str();
  cmd->add_option("--seed", p.seed, "Seed for the slot order")->capture_default_str();
  cmd->add_option("--first-slot", p.first_slot, "Number of the first slot")->capture_default_str();
  cmd->add_option("--dense-from", p.dense_from, "Time after which bids arrive densely, ms")
      ->capture_default_str();
  cmd->add_option("--dense-interval", p.dense_interval, "Dense bid spacing, ms")->capture_default_str();
  cmd->add_option("--sparse-interval", p.sparse_interval, "Sparse bid spacing, ms")->capture_default_str();
  cmd->add_option("--base-value-wei", base_value, "Bid value at the start of the slot")->capture_default_str();
  cmd->add_option("--slot-zero-ms", o.slot_zero_ms, "Epoch ms of slot 0")->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{"profsim: protected order flow and PBS simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file with option values; flags override it");
  bool dump = false;
  app.add_flag("--dump-config", dump, "Print the effective configuration as TOML and exit")
      ->configurable(false);

  cli::AmmOptions amm_opts;
  cli::HistogramOptions hist_opts;
  cli::LatencyOptions lat_opts;
  cli::ProtocolOptions proto_opts;
  FetchOptions fetch_opts;
  cli::FixtureOptions fix_opts;
  std::string base_value = fix_opts.params.base_value.str();

  add_simulate_amm(app, amm_opts);
  add_demand_histogram(app, hist_opts);
  Resolvers resolvers;
  add_analyze_latency(app, lat_opts, resolvers);
  add_simulate_protocol(app, proto_opts, resolvers);
  add_fetch_bids(app, fetch_opts);
  add_gen_fixture(app, fix_opts, base_value);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  for (const auto& resolve : resolvers) resolve();
  if (dump) {
    std::cout << app.config_to_str(true, true);
    return kOk;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "simulate-amm") {
      const auto rows = cli::simulate_amm(amm_opts);
      cli::with_output(amm_opts.out, [&](std::ostream& os) { cli::write_study_csv(os, rows); });
      cli::print_study_summary(std::cerr, rows);
    } else if (name == "demand-histogram") {
      const auto h = cli::demand_histogram(hist_opts);
      cli::with_output(hist_opts.out, [&](std::ostream& os) { cli::write_histogram_csv(os, h); });
      std::cerr << "pools " << h.pools << '\n';
    } else if (name == "analyze-latency") {
      const auto r = cli::analyze_latency(lat_opts);
      cli::with_output(lat_opts.penalty_out,
                       [&](std::ostream& os) { cli::write_penalty_csv(os, r.penalties); });
      cli::with_output(lat_opts.surface_out,
                       [&](std::ostream& os) { cli::write_surface_csv(os, r.surface); });
      std::cerr << "slots " << r.slots << ", p90 penalty slope " << cli::fmt(r.p90_slope)
                << " ETH/s\n";
    } else if (name == "simulate-protocol") {
      proto_opts.config.validate();
      const auto report = prof::run_protocol(proto_opts.config);
      cli::with_output(proto_opts.out, [&](std::ostream& os) { cli::write_protocol_csv(os, report); });
      cli::with_output(proto_opts.log_out, [&](std::ostream& os) { report.log.write_jsonl(os); });
      cli::print_protocol_summary(std::cerr, report);
    } else if (name == "fetch-bids") {
      auto& c = fetch_opts.cfg;
      c.mapping = fetch_opts.mapping == "native" ? ingest::FieldMapping::native()
                                                 : ingest::FieldMapping::mev_boost();
      c.metadata.default_base_fee = parse_wei_option(fetch_opts.base_fee, "--base-fee-wei");
      if (fetch_opts.backoff_ms < 0 || fetch_opts.timeout_s <= 0) {
        throw std::invalid_argument("backoff must be non-negative and timeout positive");
      }
      c.initial_backoff = std::chrono::milliseconds{fetch_opts.backoff_ms};
      c.timeout = std::chrono::seconds{fetch_opts.timeout_s};
      c.validate();
      const auto r = ingest::fetch_bid_traces(c);
      std::cerr << "pages " << r.pages << ", records " << r.records << ", retries " << r.retries
                << '\n';
    } else if (name == "gen-fixture") {
      fix_opts.params.base_value = parse_wei_option(base_value, "--base-value-wei");
      const auto n = cli::generate_fixture(fix_opts);
      std::cerr << "wrote " << n << " slots to " << fix_opts.out << '\n';
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const cli::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const ingest::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const ingest::MissingMetadata& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
