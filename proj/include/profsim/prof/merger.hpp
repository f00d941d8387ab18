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
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "profsim/core/hash.hpp"
#include "profsim/core/state.hpp"
#include "profsim/latency/latency.hpp"
#include "profsim/pbs/event_log.hpp"
#include "profsim/pbs/relay.hpp"

namespace profsim::prof {

enum class GuardMode {
  EnrichOnce,         // at most one prefix block is ever enriched
  BeginBeforeReveal,  // no prefix submitted after the first reveal, at most enrich_cap
  Unrestricted,       // builder-hosted merger in hybrid mode; the relay guards instead
};

[[nodiscard]] inline std::string_view to_string(GuardMode g) {
  switch (g) {
    case GuardMode::EnrichOnce: return "enrich-once";
    case GuardMode::BeginBeforeReveal: return "begin-before-reveal";
    case GuardMode::Unrestricted: return "unrestricted";
  }
  return "?";
}

enum class MergeRefusal { Guard, ReplayWindow, Cap, NoBundle, InvalidPrefix };

[[nodiscard]] inline std::string_view to_string(MergeRefusal r) {
  switch (r) {
    case MergeRefusal::Guard: return "guard";
    case MergeRefusal::ReplayWindow: return "replay-window";
    case MergeRefusal::Cap: return "cap";
    case MergeRefusal::NoBundle: return "no-bundle";
    case MergeRefusal::InvalidPrefix: return "invalid-prefix";
  }
  return "?";
}

struct MergerConfig {
  GuardMode guard{GuardMode::EnrichOnce};
  int enrich_cap{3};
  latency::LatencyModel latency{};
  std::optional<Millis> fixed_delta_ms;  // overrides the latency model when set
  FeeRouting fee_routing{FeeRouting::ToProposer};
  Gas gas_limit{kDefaultBlockGasLimit};
  Millis replay_window_ms{kSlotDurationMs};

  void validate() const {
    if (enrich_cap < 1) throw std::invalid_argument("enrich cap must be at least 1");
    if (fixed_delta_ms && *fixed_delta_ms < 0) throw std::invalid_argument("negative merge latency");
    latency.validate();
  }
};

/// Everything a merger discloses before the proposer commits.
struct EnrichedBid {
  std::string header;
  Wei value;
  Millis reveal_time{0};
  Millis submit_time{0};
};

struct MergeOutcome {
  std::optional<EnrichedBid> bid;
  std::optional<MergeRefusal> refusal;
  [[nodiscard]] bool ok() const noexcept { return bid.has_value(); }
};

struct MergeSimulation {
  Block block;
  Wei value;
  std::vector<TxId> dropped;
};

/// Appends `bundle` to `prefix`, dropping transactions that are duplicates,
/// invalid at their position, or would overflow the gas limit. Survivors keep
/// their bundle order. Throws InvalidBlock if the prefix itself is invalid.
[[nodiscard]] inline MergeSimulation simulate_merge(const Block& prefix,
                                                    std::span<const Transaction> bundle,
                                                    const ChainState& state, FeeRouting routing,
                                                    Gas gas_limit = kDefaultBlockGasLimit) {
  Block block = prefix;
  block.prof_txs.clear();
  block.backrun_txs.clear();
  block.prof_fee_routing = routing;
  ChainState working = apply_block(state, block, gas_limit).state;

  MergeSimulation out;
  const AccountId recipient = tip_recipient_for_appended(block);
  Gas gas = block.total_gas();
  for (const auto& tx : bundle) {
    if (gas + tx.gas_used > gas_limit || try_apply(working, tx, recipient)) {
      out.dropped.push_back(tx.id);
      continue;
    }
    gas += tx.gas_used;
    block.prof_txs.push_back(tx);
  }
  out.block = sealed(std::move(block));
  out.value = apply_block(state, out.block, gas_limit).revenue;
  return out;
}

enum class MultiStrategy { ParallelBest, SequentialConcat };
enum class ConcatOrder { BestFirst, AsGiven };

/// Concatenation used by sequential merging. BestFirst ranks bundles by their
/// standalone merged value, highest first, keeping the given order on ties.
[[nodiscard]] inline std::vector<Transaction> concat_bundles(const Block& prefix,
                                                             std::span<const Bundle> bundles,
                                                             const ChainState& state,
                                                             FeeRouting routing, ConcatOrder order,
                                                             Gas gas_limit = kDefaultBlockGasLimit) {
  std::vector<std::size_t> rank(bundles.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  if (order == ConcatOrder::BestFirst) {
    std::vector<Wei> value;
    for (const auto& b : bundles) {
      value.push_back(simulate_merge(prefix, b.txs, state, routing, gas_limit).value);
    }
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return value[a] > value[b]; });
  }
  std::vector<Transaction> all;
  for (std::size_t i : rank) all.insert(all.end(), bundles[i].txs.begin(), bundles[i].txs.end());
  return all;
}

/// Stateful merger. Bundle contents and enriched blocks stay inside; the only
/// outputs before commitment are EnrichedBid values.
class BundleMerger {
 public:
  BundleMerger(MergerConfig config, Millis boot_time, pbs::EventLog* log = nullptr)
      : config_{std::move(config)}, boot_time_{boot_time}, log_{log} {
    config_.validate();
  }

  /// Replaces the current bundle. Guard counters are per bundle and start over.
  void set_bundle(Bundle bundle) {
    note(bundle.seal_time, "bundle_set", {{"txs", bundle.txs.size()}});
    bundle_ = std::move(bundle);
    begin_round();
  }

  /// Starts guard accounting for a fresh set of bundles. Used directly when the
  /// bundles are passed to merge_multi instead of being set one at a time.
  void begin_round() {
    enriched_.clear();
    released_.reset();
    enrich_count_ = 0;
    first_reveal_.reset();
  }
  [[nodiscard]] bool has_bundle() const noexcept { return bundle_.has_value(); }

  /// Merge latency for a bundle of `gas`, rounded up to whole milliseconds.
  [[nodiscard]] Millis delta_ms(Gas gas) const {
    if (config_.fixed_delta_ms) return *config_.fixed_delta_ms;
    return static_cast<Millis>(std::ceil(config_.latency.delta_ms(gas)));
  }

  /// Guard verdict for a merge submitted at `submit_time`.
  [[nodiscard]] std::optional<MergeRefusal> guard_check(Millis submit_time) const {
    if (submit_time < boot_time_ + config_.replay_window_ms) return MergeRefusal::ReplayWindow;
    switch (config_.guard) {
      case GuardMode::EnrichOnce:
        if (enrich_count_ >= 1) return MergeRefusal::Guard;
        break;
      case GuardMode::BeginBeforeReveal:
        if (first_reveal_ && submit_time > *first_reveal_) return MergeRefusal::Guard;
        if (enrich_count_ >= config_.enrich_cap) return MergeRefusal::Cap;
        break;
      case GuardMode::Unrestricted: break;
    }
    return std::nullopt;
  }

  MergeOutcome merge(const Block& prefix, const ChainState& state, Millis submit_time) {
    if (auto r = guard_check(submit_time)) return refuse(submit_time, *r);
    if (!bundle_) return refuse(submit_time, MergeRefusal::NoBundle);
    try {
      auto sim = simulate_merge(prefix, bundle_->txs, state, config_.fee_routing, config_.gas_limit);
      return record(std::move(sim), submit_time, delta_ms(bundle_->total_gas));
    } catch (const InvalidBlock&) {
      return refuse(submit_time, MergeRefusal::InvalidPrefix);
    }
  }

  /// Merges bundles from several sequencers in one enrichment. Parallel-best keeps
  /// the single most valuable bundle (first on ties). Sequential-concat appends all
  /// of them; with BestFirst the most valuable bundle goes first, so the result is
  /// never below parallel-best.
  MergeOutcome merge_multi(const Block& prefix, std::span<const Bundle> bundles,
                           MultiStrategy strategy, const ChainState& state, Millis submit_time,
                           ConcatOrder order = ConcatOrder::BestFirst) {
    if (auto r = guard_check(submit_time)) return refuse(submit_time, *r);
    if (bundles.empty()) return refuse(submit_time, MergeRefusal::NoBundle);
    try {
      if (strategy == MultiStrategy::ParallelBest) {
        std::optional<MergeSimulation> best;
        std::size_t best_index = 0;
        for (std::size_t i = 0; i < bundles.size(); ++i) {
          auto sim = simulate_merge(prefix, bundles[i].txs, state, config_.fee_routing,
                                    config_.gas_limit);
          if (!best || sim.value > best->value) {
            best = std::move(sim);
            best_index = i;
          }
        }
        return record(std::move(*best), submit_time, delta_ms(bundles[best_index].total_gas));
      }
      const auto all = concat_bundles(prefix, bundles, state, config_.fee_routing, order,
                                      config_.gas_limit);
      auto sim = simulate_merge(prefix, all, state, config_.fee_routing, config_.gas_limit);
      return record(std::move(sim), submit_time, delta_ms(sum_gas(all)));
    } catch (const InvalidBlock&) {
      return refuse(submit_time, MergeRefusal::InvalidPrefix);
    }
  }

  /// Contents of an enriched block, released against a valid proposer signature.
  /// After one header has been released no other header is.
  [[nodiscard]] std::optional<Block> release(const SignedHeader& signed_header) {
    if (!verify_signature(signed_header)) return std::nullopt;
    if (released_ && *released_ != signed_header.header) return std::nullopt;
    const auto it = enriched_.find(signed_header.header);
    if (it == enriched_.end()) return std::nullopt;
    released_ = signed_header.header;
    note(0, "enriched_released", {{"header", signed_header.header}});
    return it->second;
  }

  /// Relay-facing offer whose release is bound to this merger.
  [[nodiscard]] pbs::ProfOffer offer(const EnrichedBid& bid) {
    return {bid.header, bid.value, bid.reveal_time,
            [this](const SignedHeader& s) { return release(s); }};
  }

  /// Hybrid mode: a builder-hosted merger hands the full enriched block to an
  /// optimistic relay as an ordinary bid.
  [[nodiscard]] pbs::Bid relay_submission(const EnrichedBid& bid, std::string builder_id,
                                          Slot slot) const {
    const auto it = enriched_.find(bid.header);
    if (it == enriched_.end()) throw std::invalid_argument("unknown enriched header");
    return {std::move(builder_id), slot, bid.value, bid.reveal_time,
            std::make_shared<const Block>(it->second), true};
  }

  /// Models a reboot: the bundle and all merge state are lost.
  void restart(Millis now) {
    bundle_.reset();
    enriched_.clear();
    released_.reset();
    enrich_count_ = 0;
    first_reveal_.reset();
    boot_time_ = now;
    note(now, "merger_restart", nlohmann::json::object());
  }

  [[nodiscard]] int enrich_count() const noexcept { return enrich_count_; }
  [[nodiscard]] std::optional<Millis> first_reveal_time() const noexcept { return first_reveal_; }
  [[nodiscard]] Millis boot_time() const noexcept { return boot_time_; }
  [[nodiscard]] const MergerConfig& config() const noexcept { return config_; }

 private:
  MergeOutcome refuse(Millis at, MergeRefusal r) {
    note(at, "merge_refused", {{"reason", to_string(r)}});
    return {std::nullopt, r};
  }

  MergeOutcome record(MergeSimulation sim, Millis submit_time, Millis delta) {
    EnrichedBid bid{sim.block.header, sim.value, submit_time + delta, submit_time};
    ++enrich_count_;
    if (!first_reveal_) first_reveal_ = bid.reveal_time;
    enriched_.insert_or_assign(bid.header, std::move(sim.block));
    note(submit_time, "merge",
         {{"header", bid.header},
          {"value_wei", pbs::wei_string(bid.value)},
          {"reveal_time", bid.reveal_time},
          {"dropped", sim.dropped.size()}});
    return {std::move(bid), std::nullopt};
  }

  void note(Millis at, std::string kind, nlohmann::json payload) {
    if (log_) log_->record(at, std::move(kind), std::move(payload));
  }

  MergerConfig config_;
  Millis boot_time_;
  pbs::EventLog* log_;
  std::optional<Bundle> bundle_;
  std::map<std::string, Block> enriched_;
  std::optional<std::string> released_;
  int enrich_count_{0};
  std::optional<Millis> first_reveal_;
};

}  // namespace profsim::prof
