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

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "profsim/amm/pool.hpp"
#include "profsim/core/types.hpp"

namespace profsim {

enum class TxError { Nonce, Balance, DuplicateId, Payload };

[[nodiscard]] inline std::string_view to_string(TxError e) {
  switch (e) {
    case TxError::Nonce: return "nonce";
    case TxError::Balance: return "balance";
    case TxError::DuplicateId: return "duplicate-id";
    case TxError::Payload: return "payload";
  }
  return "unknown";
}

class InvalidBlock : public std::runtime_error {
 public:
  InvalidBlock(const std::string& what, std::optional<TxError> reason = std::nullopt)
      : std::runtime_error(what), reason_(reason) {}
  [[nodiscard]] std::optional<TxError> reason() const { return reason_; }

 private:
  std::optional<TxError> reason_;
};

namespace detail {

[[nodiscard]] inline std::optional<TxError> check_transaction(const ChainState& state,
                                                              const Transaction& tx) {
  if (tx.nonce != state.nonce(tx.sender)) return TxError::Nonce;
  if (state.included.contains(tx.id)) return TxError::DuplicateId;

  Wei required = tx.total_fee();
  if (const auto* transfer = std::get_if<Transfer>(&tx.payload)) {
    if (transfer->amount < 0) return TxError::Payload;
    required += transfer->amount;
  }
  if (state.balance(tx.sender) < required) return TxError::Balance;

  if (const auto* trade = std::get_if<Trade>(&tx.payload)) {
    if (!(trade->amount > 0.0) || !state.pools.contains(trade->pool_id)) return TxError::Payload;
    auto it = state.tokens.find(tx.sender);
    const TokenHoldings held = it == state.tokens.end() ? TokenHoldings{} : it->second;
    const double available = trade->direction == TradeDirection::SellX ? held.x : held.y;
    if (available < trade->amount) return TxError::Balance;
  }
  return std::nullopt;
}

}  // namespace detail

/// Applies `tx` in place. On failure `state` is left untouched.
[[nodiscard]] inline std::optional<TxError> try_apply(ChainState& state, const Transaction& tx,
                                                      const AccountId& fee_recipient) {
  if (auto err = detail::check_transaction(state, tx)) return err;

  state.balances[tx.sender] -= tx.total_fee();
  state.balances[fee_recipient] += tx.tip();  // base fee is burned
  state.nonces[tx.sender] = tx.nonce + 1;
  state.included.insert(tx.id);

  if (const auto* transfer = std::get_if<Transfer>(&tx.payload)) {
    state.balances[tx.sender] -= transfer->amount;
    state.balances[transfer->to] += transfer->amount;
  } else if (const auto* trade = std::get_if<Trade>(&tx.payload)) {
    PoolState& pool = state.pools.at(trade->pool_id);
    const auto r = amm::swap(pool, trade->direction, trade->amount);
    pool = r.pool;
    TokenHoldings& held = state.tokens[tx.sender];
    if (trade->direction == TradeDirection::SellX) {
      held.x -= trade->amount;
      held.y += r.counter;
    } else {
      held.y -= trade->amount;
      held.x += r.counter;
    }
  }
  return std::nullopt;
}

struct TxResult {
  ChainState state;
  std::optional<TxError> error;

  [[nodiscard]] bool ok() const { return !error.has_value(); }
};

[[nodiscard]] inline TxResult apply_transaction(ChainState state, const Transaction& tx,
                                                const AccountId& fee_recipient) {
  auto err = try_apply(state, tx, fee_recipient);
  return {std::move(state), err};
}

/// Account whose balance delta is the block's bid value.
[[nodiscard]] inline const AccountId& revenue_account(const Block& block) {
  return block.proposer.empty() ? block.fee_recipient : block.proposer;
}

[[nodiscard]] inline const AccountId& tip_recipient_for_appended(const Block& block) {
  return block.prof_fee_routing == FeeRouting::ToProposer ? revenue_account(block)
                                                          : block.fee_recipient;
}

struct BlockApplication {
  ChainState state;
  Wei revenue;
};

/// Executes prefix, PROF and backrun transactions in order. Throws InvalidBlock if
/// any transaction is invalid or the block exceeds `gas_limit`.
[[nodiscard]] inline BlockApplication apply_block(ChainState state, const Block& block,
                                                  Gas gas_limit = kDefaultBlockGasLimit) {
  if (block.total_gas() > gas_limit) throw InvalidBlock("block exceeds gas limit");
  const AccountId& account = revenue_account(block);
  const Wei before = state.balance(account);

  const auto run = [&](const std::vector<Transaction>& txs, const AccountId& recipient) {
    for (const auto& tx : txs) {
      if (auto err = try_apply(state, tx, recipient)) {
        throw InvalidBlock("invalid transaction " + tx.id + ": " + std::string(to_string(*err)),
                           err);
      }
    }
  };
  run(block.prefix_txs, block.fee_recipient);
  run(block.prof_txs, tip_recipient_for_appended(block));
  run(block.backrun_txs, tip_recipient_for_appended(block));

  Wei revenue = state.balance(account) - before;
  return {std::move(state), std::move(revenue)};
}

}  // namespace profsim
