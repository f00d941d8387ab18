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

#include <string>

#include "profsim/core/hash.hpp"
#include "profsim/core/state.hpp"

namespace profsim::testing {

inline Transaction make_tx(std::string id, std::string sender, std::uint64_t nonce,
                           Wei tip_per_gas = gwei(2), Gas gas = 21'000, Millis arrival = 0) {
  Transaction tx;
  tx.id = std::move(id);
  tx.sender = std::move(sender);
  tx.nonce = nonce;
  tx.gas_used = gas;
  tx.base_fee_per_gas = gwei(20);
  tx.tip_per_gas = std::move(tip_per_gas);
  tx.arrival_time = arrival;
  return tx;
}

inline Transaction make_payment(std::string id, std::string sender, std::uint64_t nonce,
                                std::string to, Wei amount) {
  Transaction tx = make_tx(std::move(id), std::move(sender), nonce, Wei{0});
  tx.payload = Transfer{std::move(to), std::move(amount)};
  return tx;
}

inline ChainState funded_state(std::initializer_list<std::string> accounts,
                               Wei each = ether(100)) {
  ChainState s;
  s.base_fee = gwei(20);
  for (const auto& a : accounts) s.balances[a] = each;
  return s;
}

inline Block make_block(Slot slot, std::vector<Transaction> prefix, std::string proposer = "proposer") {
  Block b;
  b.slot = slot;
  b.prefix_txs = std::move(prefix);
  b.fee_recipient = proposer;
  b.proposer = std::move(proposer);
  return sealed(std::move(b));
}

}  // namespace profsim::testing
