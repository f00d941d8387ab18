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
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace profsim {

// Wei amounts are exact and unbounded; AMM token amounts are doubles.
using Wei = boost::multiprecision::cpp_int;
using AccountId = std::string;
using TxId = std::string;
using Millis = std::int64_t;
using Gas = std::uint64_t;
using Slot = std::uint64_t;

inline constexpr Millis kSlotDurationMs = 12'000;
inline constexpr Gas kDefaultBlockGasLimit = 30'000'000;
inline constexpr Gas kBlockGasTarget = 15'000'000;

inline Wei gwei(std::uint64_t n) { return Wei{n} * Wei{1'000'000'000ULL}; }
inline Wei ether(std::uint64_t n) { return Wei{n} * Wei{1'000'000'000'000'000'000ULL}; }
// Milli-ether, handy for bid values in tests and fixtures.
inline Wei finney(std::uint64_t n) { return Wei{n} * Wei{1'000'000'000'000'000ULL}; }

inline double wei_to_ether(const Wei& w) { return w.convert_to<double>() / 1e18; }

enum class TradeDirection { SellX, SellY };

struct Trade {
  std::string pool_id;
  TradeDirection direction{TradeDirection::SellX};
  double amount{0.0};  // units of the token being sold, > 0
};

struct Transfer {
  AccountId to;
  Wei amount;
};

struct Opaque {};

using Payload = std::variant<Opaque, Transfer, Trade>;

struct Transaction {
  TxId id;
  AccountId sender;
  std::uint64_t nonce{0};
  Gas gas_used{21'000};
  Wei base_fee_per_gas;
  Wei tip_per_gas;
  Payload payload{Opaque{}};
  Millis arrival_time{0};

  [[nodiscard]] Wei burned_fee() const { return Wei{gas_used} * base_fee_per_gas; }
  [[nodiscard]] Wei tip() const { return Wei{gas_used} * tip_per_gas; }
  [[nodiscard]] Wei total_fee() const { return burned_fee() + tip(); }
};

struct Bundle {
  std::vector<Transaction> txs;
  std::string sequencer_id;
  Millis seal_time{0};
  Gas total_gas{0};

  [[nodiscard]] bool empty() const { return txs.empty(); }
};

inline Gas sum_gas(const std::vector<Transaction>& txs) {
  return std::accumulate(txs.begin(), txs.end(), Gas{0},
                         [](Gas acc, const Transaction& tx) { return acc + tx.gas_used; });
}

// Where tips of PROF and backrun transactions are credited.
enum class FeeRouting { ToProposer, ToFeeRecipient };

struct Block {
  Slot slot{0};
  std::vector<Transaction> prefix_txs;
  std::vector<Transaction> prof_txs;
  std::vector<Transaction> backrun_txs;
  AccountId fee_recipient;
  AccountId proposer;
  FeeRouting prof_fee_routing{FeeRouting::ToProposer};
  std::string header;

  [[nodiscard]] std::vector<const Transaction*> ordered() const {
    std::vector<const Transaction*> out;
    out.reserve(prefix_txs.size() + prof_txs.size() + backrun_txs.size());
    for (const auto* part : {&prefix_txs, &prof_txs, &backrun_txs}) {
      for (const auto& tx : *part) out.push_back(&tx);
    }
    return out;
  }

  [[nodiscard]] std::size_t size() const {
    return prefix_txs.size() + prof_txs.size() + backrun_txs.size();
  }

  [[nodiscard]] Gas total_gas() const {
    return sum_gas(prefix_txs) + sum_gas(prof_txs) + sum_gas(backrun_txs);
  }
};

struct SignedHeader {
  std::string header;
  AccountId proposer;
  Slot slot{0};
  std::string signature;

  friend bool operator==(const SignedHeader&, const SignedHeader&) = default;
};

struct TokenHoldings {
  double x{0.0};
  double y{0.0};
};

// Reserves of a constant-product pool. Defined here so ChainState can hold pools.
struct PoolState {
  double reserve_x{0.0};
  double reserve_y{0.0};

  [[nodiscard]] double price() const { return reserve_y / reserve_x; }  // Y per X
  [[nodiscard]] double invariant() const { return reserve_x * reserve_y; }
};

struct ChainState {
  std::map<AccountId, Wei> balances;
  std::map<AccountId, std::uint64_t> nonces;
  std::map<AccountId, TokenHoldings> tokens;
  std::map<std::string, PoolState> pools;
  std::set<TxId> included;
  Wei base_fee;

  [[nodiscard]] Wei balance(const AccountId& a) const {
    auto it = balances.find(a);
    return it == balances.end() ? Wei{0} : it->second;
  }
  [[nodiscard]] std::uint64_t nonce(const AccountId& a) const {
    auto it = nonces.find(a);
    return it == nonces.end() ? 0 : it->second;
  }
};

struct SlotClock {
  Millis genesis_ms{0};
  Millis slot_duration{kSlotDurationMs};

  [[nodiscard]] Millis slot_start(Slot s) const {
    return genesis_ms + static_cast<Millis>(s) * slot_duration;
  }
  [[nodiscard]] Slot slot_at(Millis t) const {
    return t < genesis_ms ? 0 : static_cast<Slot>((t - genesis_ms) / slot_duration);
  }
};

}  // namespace profsim
