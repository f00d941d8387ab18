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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "profsim/core/state.hpp"

namespace profsim::prof {

enum class SequencerPolicy { Fcfs, FeePriority };

[[nodiscard]] inline std::string_view to_string(SequencerPolicy p) {
  return p == SequencerPolicy::Fcfs ? "fcfs" : "fee-priority";
}

/// The only transaction fields an ordering policy may look at.
struct OrderingKey {
  Millis arrival{0};
  Wei tip_per_gas;
  TxId id;

  static OrderingKey of(const Transaction& tx) { return {tx.arrival_time, tx.tip_per_gas, tx.id}; }
};

[[nodiscard]] inline bool precedes(SequencerPolicy policy, const OrderingKey& a,
                                   const OrderingKey& b) {
  if (policy == SequencerPolicy::Fcfs) {
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
  } else if (a.tip_per_gas != b.tip_per_gas) {
    return a.tip_per_gas > b.tip_per_gas;
  }
  return a.id < b.id;
}

/// Orders transactions by policy; payloads are never consulted.
inline void order_transactions(std::vector<Transaction>& txs, SequencerPolicy policy) {
  std::stable_sort(txs.begin(), txs.end(), [policy](const Transaction& a, const Transaction& b) {
    return precedes(policy, OrderingKey::of(a), OrderingKey::of(b));
  });
}

/// Collects protected transactions and seals them into bundles. Validity is
/// screened against the last finalized state plus the transactions already
/// accepted, so a sender may queue consecutive nonces.
class Sequencer {
 public:
  explicit Sequencer(ChainState finalized, std::string id = "sequencer-0")
      : finalized_{std::move(finalized)}, pending_{finalized_}, id_{std::move(id)} {}

  std::optional<TxError> ingest(Transaction tx, Millis arrival) {
    tx.arrival_time = arrival;
    if (auto err = try_apply(pending_, tx, kScreeningSink)) return err;
    mempool_.push_back(std::move(tx));
    return std::nullopt;
  }

  /// Seals the mempool into a bundle and empties it.
  [[nodiscard]] Bundle seal(SequencerPolicy policy, Millis now) {
    Bundle b;
    b.txs = std::move(mempool_);
    mempool_.clear();
    order_transactions(b.txs, policy);
    b.sequencer_id = id_;
    b.seal_time = now;
    b.total_gas = sum_gas(b.txs);
    return b;
  }

  /// New finalized state, e.g. after a block lands. Queued transactions that are
  /// no longer valid against it are dropped.
  void finalize(ChainState state) {
    finalized_ = std::move(state);
    pending_ = finalized_;
    std::vector<Transaction> keep;
    for (auto& tx : mempool_) {
      if (!try_apply(pending_, tx, kScreeningSink)) keep.push_back(std::move(tx));
    }
    mempool_ = std::move(keep);
  }

  [[nodiscard]] std::size_t pending() const noexcept { return mempool_.size(); }
  [[nodiscard]] const std::string& id() const noexcept { return id_; }

 private:
  inline static const AccountId kScreeningSink{"\x01screening"};

  ChainState finalized_;
  ChainState pending_;
  std::string id_;
  std::vector<Transaction> mempool_;
};

}  // namespace profsim::prof
