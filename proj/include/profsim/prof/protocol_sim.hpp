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
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "profsim/core/hash.hpp"
#include "profsim/core/rng.hpp"
#include "profsim/core/state.hpp"
#include "profsim/pbs/event_log.hpp"
#include "profsim/pbs/relay.hpp"
#include "profsim/prof/hybrid.hpp"
#include "profsim/prof/merger.hpp"
#include "profsim/prof/prof_share.hpp"
#include "profsim/prof/sequencer.hpp"

namespace profsim::prof {

/// Randomized multi-slot run of the full PROF pipeline: builders bid into a
/// relay, protected transactions flow through sequencers into the merger, the
/// proposer queries and commits, optionally followed by a PROF-Share auction.
struct ProtocolConfig {
  std::size_t slots{10};
  std::uint64_t seed{1};
  std::size_t builders{3};
  std::size_t bids_per_builder{4};
  std::size_t users{6};       // protected transactions per slot
  std::size_t sequencers{1};  // more than one exercises multi-bundle merging
  std::size_t arbitrageurs{2};
  GuardMode guard{GuardMode::EnrichOnce};
  int enrich_cap{3};
  pbs::RelayMode relay_mode{pbs::RelayMode::Pessimistic};
  bool hybrid{false};
  bool prof_share{false};
  std::size_t probes{0};  // extra merge requests with other prefixes (grinding probes)
  double restart_probability{0.0};
  double equivocation_probability{0.0};
  double cancel_probability{0.2};
  double leak_probability{0.3};      // builder includes a protected tx in its prefix
  double conflict_probability{0.15}; // user also sends a conflicting public tx
  SequencerPolicy policy{SequencerPolicy::Fcfs};
  MultiStrategy multi{MultiStrategy::SequentialConcat};
  latency::LatencyModel latency{};
  Millis seal_ms{11'000};
  Millis proposer_query_ms{kSlotDurationMs};
  std::size_t header_queries{3};  // random get_header probes before the final one

  void validate() const {
    if (slots == 0) throw std::invalid_argument("need at least one slot");
    if (builders == 0) throw std::invalid_argument("need at least one builder");
    if (sequencers == 0) throw std::invalid_argument("need at least one sequencer");
    if (hybrid && relay_mode != pbs::RelayMode::Optimistic) {
      throw std::invalid_argument("hybrid mode needs an optimistic relay");
    }
    if (hybrid && prof_share) throw std::invalid_argument("PROF-Share runs with a relay-side merger");
    if (seal_ms < 0 || seal_ms > proposer_query_ms || proposer_query_ms > kSlotDurationMs) {
      throw std::invalid_argument("need 0 <= seal time <= proposer query <= slot end");
    }
    for (double p : {restart_probability, equivocation_probability, cancel_probability,
                     leak_probability, conflict_probability}) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
    }
    if (enrich_cap < 1) throw std::invalid_argument("enrich cap must be at least 1");
  }
};

struct HeaderCheck {
  Millis at{0};
  Wei with_prof;  // header value served by the PROF-enabled relay
  Wei baseline;   // same bids, PROF disabled
  bool prof_header{false};
};

struct MergeAttempt {
  Millis submit_time{0};
  Millis boot_time{0};  // merger boot time when the request arrived
  bool replay{false};   // request replayed after a restart
  std::optional<MergeRefusal> refusal;
  std::optional<Millis> reveal_time;
  std::optional<Millis> first_reveal_before;  // merger's first reveal before this request
  int enrich_count_after{0};
  Wei prefix_value;
  Wei value;
};

/// Independent reconstruction of an accepted merge, for auditing its contents.
struct MergeAudit {
  std::string reported_header;
  Block rebuilt;
  std::vector<Bundle> bundles;
  ChainState parent;
};

struct SlotTrace {
  Slot slot{0};
  bool comparable{true};  // baseline comparison meaningful (not hybrid)
  std::vector<HeaderCheck> headers;
  std::vector<MergeAttempt> merges;
  std::vector<MergeAudit> audits;
  std::optional<std::pair<Wei, Wei>> multi;  // (parallel-best, sequential-concat)
  std::size_t released_headers{0};
  std::size_t equivocation_attempts{0};
  std::size_t equivocations_rejected{0};
  bool prof_won{false};
  bool share_path{false};
  bool share_won{false};
  bool missed{false};
  Wei final_value;
  Wei baseline_value;
  std::size_t restarts{0};
};

struct ProtocolReport {
  ProtocolConfig config;
  std::vector<SlotTrace> slots;
  pbs::EventLog log;
};

namespace detail {

struct SimEvent {
  enum Kind { Bid, Cancel, SetBundle, Merge, Restart, Query };
  Millis time{0};
  Kind kind{Bid};
  std::size_t index{0};  // bid index / builder index
  bool replay{false};
  bool main{false};
};

inline AccountId builder_name(std::size_t i) { return "builder-" + std::to_string(i); }
inline AccountId user_name(std::size_t i) { return "user-" + std::to_string(i); }
inline AccountId arb_name(std::size_t i) { return "arb-" + std::to_string(i); }
inline constexpr const char* kProposer = "proposer";

inline Transaction plain_tx(std::string id, AccountId sender, std::uint64_t nonce, Wei tip, Gas gas,
                            const Wei& base_fee) {
  Transaction tx;
  tx.id = std::move(id);
  tx.sender = std::move(sender);
  tx.nonce = nonce;
  tx.gas_used = gas;
  tx.base_fee_per_gas = base_fee;
  tx.tip_per_gas = std::move(tip);
  return tx;
}

}  // namespace detail

[[nodiscard]] inline ProtocolReport run_protocol(const ProtocolConfig& cfg) {
  using detail::SimEvent;
  cfg.validate();
  ProtocolReport report;
  report.config = cfg;
  pbs::EventLog& log = report.log;

  const std::size_t user_accounts = std::max<std::size_t>(1, (cfg.users + 1) / 2);
  ChainState chain;
  chain.base_fee = gwei(20);
  for (std::size_t i = 0; i < cfg.builders; ++i) chain.balances[detail::builder_name(i)] = ether(1000);
  for (std::size_t i = 0; i < user_accounts; ++i) chain.balances[detail::user_name(i)] = ether(1000);
  for (std::size_t i = 0; i < cfg.arbitrageurs; ++i) chain.balances[detail::arb_name(i)] = ether(1000);

  MergerConfig mcfg;
  mcfg.guard = cfg.hybrid ? GuardMode::Unrestricted : cfg.guard;
  mcfg.enrich_cap = cfg.enrich_cap;
  mcfg.latency = cfg.latency;
  BundleMerger merger{mcfg, -kSlotDurationMs, &log};
  std::vector<BundleMerger> builder_mergers;
  if (cfg.hybrid) {
    for (std::size_t i = 0; i < cfg.builders; ++i) builder_mergers.emplace_back(mcfg, -kSlotDurationMs);
  }

  for (std::size_t s = 0; s < cfg.slots; ++s) {
    const Slot slot = s;
    const Millis start = static_cast<Millis>(s) * kSlotDurationMs;
    const ChainState parent = chain;
    CounterRng rng{derive_key({cfg.seed, 0x5107, s})};
    const auto chance = [&rng](double p) { return rng.uniform() < p; };

    SlotTrace trace;
    trace.slot = slot;
    trace.comparable = !cfg.hybrid;
    log.record(start, "slot_start", {{"slot", slot}});

    pbs::Relay relay{slot, parent, cfg.relay_mode, &log};
    pbs::Relay baseline{slot, parent, cfg.relay_mode};
    if (cfg.hybrid) relay.set_reject_after_prof_reveal(true);

    // Protected order flow.
    std::map<AccountId, std::uint64_t> next_nonce;
    std::vector<Transaction> user_txs;
    for (std::size_t j = 0; j < cfg.users; ++j) {
      const AccountId sender = detail::user_name(j % user_accounts);
      if (!next_nonce.contains(sender)) next_nonce[sender] = parent.nonce(sender);
      auto tx = detail::plain_tx("s" + std::to_string(s) + "-u" + std::to_string(j), sender,
                                 next_nonce[sender]++, gwei(1 + rng() % 20), 21'000 + rng() % 100'000,
                                 parent.base_fee);
      tx.arrival_time = start + static_cast<Millis>(rng() % static_cast<std::uint64_t>(cfg.seal_ms + 1));
      user_txs.push_back(std::move(tx));
    }
    std::vector<Sequencer> sequencers;
    for (std::size_t k = 0; k < cfg.sequencers; ++k) {
      sequencers.emplace_back(parent, "sequencer-" + std::to_string(k));
    }
    {
      auto by_arrival = user_txs;
      std::stable_sort(by_arrival.begin(), by_arrival.end(),
                       [](const auto& a, const auto& b) { return a.arrival_time < b.arrival_time; });
      for (const auto& tx : by_arrival) {
        const std::size_t owner = std::stoul(tx.sender.substr(5)) % cfg.sequencers;
        (void)sequencers[owner].ingest(tx, tx.arrival_time);
      }
    }
    std::vector<const Transaction*> first_of_sender;
    for (const auto& tx : user_txs) {
      if (tx.nonce == parent.nonce(tx.sender)) first_of_sender.push_back(&tx);
    }

    // Builder bids.
    std::vector<pbs::Bid> bids;
    std::vector<SimEvent> events;
    for (std::size_t i = 0; i < cfg.builders; ++i) {
      const AccountId builder = detail::builder_name(i);
      for (std::size_t b = 0; b < cfg.bids_per_builder; ++b) {
        const Millis t = start + static_cast<Millis>(rng() % static_cast<std::uint64_t>(kSlotDurationMs));
        Block block;
        block.slot = slot;
        block.fee_recipient = builder;
        block.proposer = detail::kProposer;
        const std::string tag = "s" + std::to_string(s) + "-b" + std::to_string(i) + "-" + std::to_string(b);
        auto pay = detail::plain_tx(tag, builder, parent.nonce(builder), Wei{0}, 21'000, parent.base_fee);
        pay.payload = Transfer{detail::kProposer, finney(10 + static_cast<long>(rng() % 190))};
        block.prefix_txs.push_back(std::move(pay));
        if (!first_of_sender.empty() && chance(cfg.leak_probability)) {
          block.prefix_txs.push_back(*first_of_sender[rng() % first_of_sender.size()]);
        } else if (!first_of_sender.empty() && chance(cfg.conflict_probability)) {
          const auto& victim = *first_of_sender[rng() % first_of_sender.size()];
          block.prefix_txs.push_back(detail::plain_tx(tag + "-c", victim.sender, victim.nonce,
                                                      gwei(3), 21'000, parent.base_fee));
        }
        block = sealed(std::move(block));
        Wei value = apply_block(parent, block).revenue;
        if (cfg.relay_mode == pbs::RelayMode::Optimistic && chance(0.05)) value += finney(1);
        bids.push_back({builder, slot, value, t, std::make_shared<const Block>(std::move(block))});
        events.push_back({t, SimEvent::Bid, bids.size() - 1});
      }
      if (chance(cfg.cancel_probability)) {
        events.push_back({start + static_cast<Millis>(rng() % static_cast<std::uint64_t>(kSlotDurationMs)),
                          SimEvent::Cancel, i});
      }
    }

    // Sealing and merge schedule.
    const Millis seal_time = start + cfg.seal_ms;
    const Millis slot_end = start + cfg.proposer_query_ms;
    std::vector<Bundle> bundles;
    for (auto& q : sequencers) bundles.push_back(q.seal(cfg.policy, seal_time));
    Gas bundle_gas = 0;
    for (const auto& b : bundles) bundle_gas += b.total_gas;
    const Millis delta = merger.delta_ms(bundle_gas);
    const Millis merge_time = std::max(seal_time, slot_end - delta);
    events.push_back({seal_time, SimEvent::SetBundle});
    events.push_back({merge_time, SimEvent::Merge, 0, false, true});
    const auto in_tail = [&] {
      return seal_time + static_cast<Millis>(rng() % static_cast<std::uint64_t>(slot_end - seal_time + 1));
    };
    for (std::size_t p = 0; p < cfg.probes; ++p) events.push_back({in_tail(), SimEvent::Merge});
    if (!cfg.hybrid && chance(cfg.restart_probability)) events.push_back({in_tail(), SimEvent::Restart});
    for (std::size_t q = 0; q < cfg.header_queries; ++q) {
      events.push_back({start + static_cast<Millis>(rng() % static_cast<std::uint64_t>(cfg.proposer_query_ms)),
                        SimEvent::Query});
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const SimEvent& a, const SimEvent& b) { return a.time < b.time; });

    // Prefix chosen for a merge request: the relay's best bid for the main request,
    // a random bid received so far for probes.
    const auto pick_prefix = [&](const SimEvent& e) -> const pbs::Bid* {
      if (e.main) {
        if (cfg.hybrid) return nullptr;
        auto best = relay.best_bid(e.time);
        if (!best) return nullptr;
        for (const auto& b : bids) {
          if (b.block == best->block) return &b;
        }
        return nullptr;
      }
      std::vector<const pbs::Bid*> seen;
      for (const auto& b : bids) {
        if (b.timestamp <= e.time) seen.push_back(&b);
      }
      return seen.empty() ? nullptr : seen[rng() % seen.size()];
    };

    std::vector<std::pair<const pbs::Bid*, Millis>> requests;  // for replay after restart
    const auto audit_merge = [&](const pbs::Bid& prefix, const EnrichedBid& bid) {
      // Builder-side mergers in hybrid mode only hold the first bundle.
      const std::vector<Bundle> merged =
          cfg.hybrid ? std::vector<Bundle>{bundles.front()} : bundles;
      std::vector<Transaction> txs;
      if (merged.size() == 1) {
        txs = merged.front().txs;
      } else if (cfg.multi == MultiStrategy::SequentialConcat) {
        txs = concat_bundles(*prefix.block, bundles, parent, mcfg.fee_routing, ConcatOrder::BestFirst);
      } else {
        std::optional<Wei> best;
        for (const auto& b : bundles) {
          const auto v = simulate_merge(*prefix.block, b.txs, parent, mcfg.fee_routing).value;
          if (!best || v > *best) {
            best = v;
            txs = b.txs;
          }
        }
      }
      trace.audits.push_back({bid.header, simulate_merge(*prefix.block, txs, parent, mcfg.fee_routing).block,
                              merged, parent});
    };

    const auto do_merge = [&](const pbs::Bid* prefix, Millis at, bool replay) {
      if (!prefix) return;
      if (cfg.hybrid) {
        const std::size_t owner = std::stoul(prefix->builder_id.substr(8));
        auto& m = builder_mergers[owner];
        MergeAttempt a;
        a.submit_time = at;
        a.boot_time = m.boot_time();
        a.replay = replay;
        a.first_reveal_before = m.first_reveal_time();
        a.prefix_value = prefix->value;
        const auto out = hybrid_merge(m, relay, prefix->builder_id, *prefix->block, at);
        a.refusal = out.merge.refusal;
        if (out.merge.ok()) {
          a.reveal_time = out.merge.bid->reveal_time;
          a.value = out.merge.bid->value;
          audit_merge(*prefix, *out.merge.bid);
        }
        a.enrich_count_after = m.enrich_count();
        trace.merges.push_back(std::move(a));
        return;
      }
      MergeAttempt a;
      a.submit_time = at;
      a.boot_time = merger.boot_time();
      a.replay = replay;
      a.first_reveal_before = merger.first_reveal_time();
      a.prefix_value = prefix->value;
      const MergeOutcome out =
          bundles.size() == 1
              ? merger.merge(*prefix->block, parent, at)
              : merger.merge_multi(*prefix->block, bundles, cfg.multi, parent, at);
      a.refusal = out.refusal;
      if (out.ok()) {
        a.reveal_time = out.bid->reveal_time;
        a.value = out.bid->value;
        relay.offer_prof(merger.offer(*out.bid));
        audit_merge(*prefix, *out.bid);
      }
      a.enrich_count_after = merger.enrich_count();
      trace.merges.push_back(std::move(a));
      if (!replay) requests.emplace_back(prefix, at);
    };

    for (const auto& e : events) {
      switch (e.kind) {
        case SimEvent::Bid:
          (void)relay.submit_bid(bids[e.index], e.time);
          (void)baseline.submit_bid(bids[e.index], e.time);
          break;
        case SimEvent::Cancel:
          relay.cancel_bids(detail::builder_name(e.index), e.time);
          baseline.cancel_bids(detail::builder_name(e.index), e.time);
          break;
        case SimEvent::SetBundle:
          if (cfg.hybrid) {
            for (auto& m : builder_mergers) m.set_bundle(bundles.front());
          } else if (bundles.size() == 1) {
            merger.set_bundle(bundles.front());
          } else {
            merger.begin_round();
          }
          break;
        case SimEvent::Merge:
          if (cfg.hybrid && e.main) {
            // Every builder enriches its own best block received so far.
            for (std::size_t i = 0; i < cfg.builders; ++i) {
              const pbs::Bid* own = nullptr;
              for (const auto& b : bids) {
                if (b.builder_id == detail::builder_name(i) && b.timestamp <= e.time &&
                    (!own || b.value > own->value)) {
                  own = &b;
                }
              }
              do_merge(own, e.time, false);
            }
          } else {
            do_merge(pick_prefix(e), e.time, false);
          }
          break;
        case SimEvent::Restart: {
          merger.restart(e.time);
          ++trace.restarts;
          // An attacker replays the earlier requests right away; the sequencer
          // resends its bundle.
          if (bundles.size() == 1) merger.set_bundle(bundles.front());
          const auto earlier = requests;
          for (const auto& [prefix, at] : earlier) {
            (void)at;
            do_merge(prefix, e.time + static_cast<Millis>(rng() % 2000), true);
          }
          break;
        }
        case SimEvent::Query: {
          const auto h = relay.get_header(e.time);
          const auto b = baseline.get_header(e.time);
          trace.headers.push_back({e.time, h ? h->value : Wei{0}, b ? b->value : Wei{0},
                                   h && h->prof});
          break;
        }
      }
    }

    if (bundles.size() > 1) {
      if (auto best = relay.best_bid(merge_time)) {
        Wei parallel{0};
        bool first = true;
        for (const auto& b : bundles) {
          const auto v = simulate_merge(*best->block, b.txs, parent, mcfg.fee_routing).value;
          if (first || v > parallel) parallel = v;
          first = false;
        }
        const auto all = concat_bundles(*best->block, bundles, parent, mcfg.fee_routing,
                                        ConcatOrder::BestFirst);
        trace.multi = {parallel, simulate_merge(*best->block, all, parent, mcfg.fee_routing).value};
      }
    }

    // Proposer: final query, commit, optional PROF-Share round.
    const auto final_header = relay.get_header(slot_end);
    const auto base_header = baseline.get_header(slot_end);
    trace.headers.push_back({slot_end, final_header ? final_header->value : Wei{0},
                             base_header ? base_header->value : Wei{0},
                             final_header && final_header->prof});
    trace.baseline_value = base_header ? base_header->value : Wei{0};
    std::optional<Block> landed;
    if (final_header) {
      const std::vector<pbs::HeaderOffer> offers{*final_header};
      const auto& chosen = offers[pbs::proposer_decide(offers)];
      trace.prof_won = chosen.prof;
      trace.final_value = chosen.value;
      const auto signed_header = sign_header(detail::kProposer, chosen.header, slot);
      const auto commit = relay.commit_header(signed_header, slot_end);
      if (commit.ok() && cfg.prof_share && chosen.prof) {
        trace.share_path = true;
        ProfShareSession session{*commit.block, parent,
                                 default_share_deadline(slot_end, bundle_gas, cfg.latency), &log};
        (void)session.hold(signed_header);
        std::vector<AccountId> prof_users;
        for (const auto& tx : commit.block->prof_txs) prof_users.push_back(tx.sender);
        for (std::size_t k = 0; k < cfg.arbitrageurs && !prof_users.empty(); ++k) {
          const AccountId arb = detail::arb_name(k);
          auto tx = detail::plain_tx("s" + std::to_string(s) + "-a" + std::to_string(k), arb,
                                     parent.nonce(arb), gwei(rng() % 10), 21'000, parent.base_fee);
          tx.payload = Transfer{prof_users[rng() % prof_users.size()], finney(static_cast<long>(rng() % 5))};
          (void)session.submit({arb, {std::move(tx)}, slot_end + static_cast<Millis>(rng() % 6000)});
        }
        if (const auto* w = session.winner(); w && chance(0.7)) {
          const Millis at = slot_end + static_cast<Millis>(rng() % static_cast<std::uint64_t>(kSlotDurationMs));
          (void)session.sign_share(sign_header(detail::kProposer, w->block.header, slot), at);
        }
        session.release(session.deadline());
        trace.share_won = session.released()->header != signed_header.header;
        trace.released_headers = 1;
        landed = session.released_block();
      } else {
        trace.released_headers = relay.release_count();
        if (commit.ok()) landed = commit.block;
      }
      if (chance(cfg.equivocation_probability)) {
        ++trace.equivocation_attempts;
        const std::string other = base_header && base_header->header != chosen.header
                                      ? base_header->header
                                      : std::string{"0xequivocation"};
        const auto second = relay.commit_header(sign_header(detail::kProposer, other, slot), slot_end);
        if (!second.ok()) ++trace.equivocations_rejected;
        if (!trace.share_path) trace.released_headers = relay.release_count();
      }
    }
    trace.missed = !landed.has_value();
    if (landed) chain = apply_block(parent, *landed).state;
    report.slots.push_back(std::move(trace));
  }
  return report;
}

}  // namespace profsim::prof
