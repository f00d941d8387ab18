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

#include <gtest/gtest.h>

#include "profsim/core/rng.hpp"
#include "support.hpp"

using namespace profsim;
using profsim::testing::funded_state;
using profsim::testing::make_block;
using profsim::testing::make_payment;
using profsim::testing::make_tx;

TEST(ApplyTransaction, ValidTxIncrementsNonceAndMovesFees) {
  const ChainState s = funded_state({"alice"});
  const auto tx = make_tx("t1", "alice", 0, gwei(2));
  const auto r = apply_transaction(s, tx, "proposer");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.state.nonce("alice"), 1u);
  EXPECT_EQ(r.state.balance("proposer"), Wei{21'000} * gwei(2));
  EXPECT_EQ(r.state.balance("alice"), ether(100) - Wei{21'000} * gwei(22));
}

TEST(ApplyTransaction, GapNonceIsInvalid) {
  const ChainState s = funded_state({"alice"});
  const auto r = apply_transaction(s, make_tx("t1", "alice", 1), "proposer");
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(*r.error, TxError::Nonce);
  EXPECT_EQ(r.state.nonce("alice"), 0u);
}

TEST(ApplyTransaction, ReplayedTxFailsOnNonce) {
  const auto tx = make_tx("t1", "alice", 0);
  const auto first = apply_transaction(funded_state({"alice"}), tx, "proposer");
  ASSERT_TRUE(first.ok());
  const auto second = apply_transaction(first.state, tx, "proposer");
  ASSERT_FALSE(second.ok());
  EXPECT_EQ(*second.error, TxError::Nonce);
}

TEST(ApplyTransaction, ReusedIdWithFreshNonceIsDuplicate) {
  const auto first = apply_transaction(funded_state({"alice"}), make_tx("t1", "alice", 0), "p");
  const auto second = apply_transaction(first.state, make_tx("t1", "alice", 1), "p");
  ASSERT_FALSE(second.ok());
  EXPECT_EQ(*second.error, TxError::DuplicateId);
}

TEST(ApplyTransaction, InsufficientBalanceForFeesAndTransfer) {
  ChainState s = funded_state({"alice"}, gwei(1'000'000));
  const auto pay = make_payment("t1", "alice", 0, "bob", gwei(1'000'000));
  const auto r = apply_transaction(s, pay, "p");
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(*r.error, TxError::Balance);
}

TEST(ApplyTransaction, TradeIsRoutedToThePool) {
  ChainState s = funded_state({"alice"});
  s.pools["XY"] = {1e7, 1e7};
  s.tokens["alice"] = {100.0, 100.0};
  Transaction tx = make_tx("t1", "alice", 0);
  tx.payload = Trade{"XY", TradeDirection::SellY, 100.0};
  const auto r = apply_transaction(s, tx, "p");
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.state.tokens.at("alice").x, 100.0 + 99.99900001, 1e-7);
  EXPECT_DOUBLE_EQ(r.state.tokens.at("alice").y, 0.0);
  EXPECT_DOUBLE_EQ(r.state.pools.at("XY").reserve_y, 1e7 + 100.0);

  tx.payload = Trade{"XY", TradeDirection::SellY, 150.0};
  EXPECT_EQ(*apply_transaction(s, tx, "p").error, TxError::Balance);
  tx.payload = Trade{"nope", TradeDirection::SellY, 1.0};
  EXPECT_EQ(*apply_transaction(s, tx, "p").error, TxError::Payload);
}

TEST(ApplyBlock, EmptyBlockLeavesStateUnchanged) {
  const ChainState s = funded_state({"alice"});
  const auto r = apply_block(s, make_block(1, {}));
  EXPECT_EQ(r.revenue, 0);
  EXPECT_EQ(r.state.balances, s.balances);
  EXPECT_EQ(r.state.nonces, s.nonces);
}

TEST(ApplyBlock, RevenueIsGasTimesTip) {
  const auto tx = make_tx("t1", "alice", 0, gwei(2), 150'000);
  const auto r = apply_block(funded_state({"alice"}), make_block(1, {tx}));
  EXPECT_EQ(r.revenue, gwei(300'000));
}

TEST(ApplyBlock, PrefixPaymentPlusProfTipsAdd) {
  ChainState s = funded_state({"builder", "alice"});
  Block b;
  b.slot = 3;
  b.fee_recipient = "builder";
  b.proposer = "proposer";
  b.prefix_txs.push_back(make_payment("pay", "builder", 0, "proposer", ether(1)));
  // 100k gas at 1000 gwei tip = 0.1 ETH
  b.prof_txs.push_back(make_tx("u1", "alice", 0, gwei(1000), 100'000));
  const auto r = apply_block(s, sealed(b));
  EXPECT_EQ(r.revenue, ether(1) + finney(100));

  b.prof_fee_routing = FeeRouting::ToFeeRecipient;
  EXPECT_EQ(apply_block(s, sealed(b)).revenue, ether(1));
}

TEST(ApplyBlock, RejectsInvalidTransactionsAndOversizedBlocks) {
  const ChainState s = funded_state({"alice"});
  try {
    (void)apply_block(s, make_block(1, {make_tx("a", "alice", 0), make_tx("b", "alice", 0)}));
    FAIL() << "expected InvalidBlock";
  } catch (const InvalidBlock& e) {
    EXPECT_EQ(e.reason(), TxError::Nonce);
  }
  const auto big = make_tx("big", "alice", 0, gwei(1), 20'000'000);
  EXPECT_THROW((void)apply_block(s, make_block(1, {big}), 15'000'000), InvalidBlock);
  EXPECT_NO_THROW((void)apply_block(s, make_block(1, {big})));
}

TEST(Header, DependsOnContentsAndSignaturesVerify) {
  const auto a = make_block(1, {make_tx("a", "alice", 0)});
  const auto b = make_block(1, {make_tx("b", "alice", 0)});
  EXPECT_NE(a.header, b.header);
  EXPECT_EQ(a.header, compute_header(a));
  auto sig = sign_header("proposer", a.header, 1);
  EXPECT_TRUE(verify_signature(sig));
  sig.header = b.header;
  EXPECT_FALSE(verify_signature(sig));
}

TEST(SlotClock, FixedTwelveSecondSlots) {
  SlotClock clock{1'000};
  EXPECT_EQ(clock.slot_duration, 12'000);
  EXPECT_EQ(clock.slot_start(2), 25'000);
  EXPECT_EQ(clock.slot_at(24'999), 1u);
}

namespace {

// Random block of tip-paying transfers among a few senders, possibly with gaps.
struct RandomBlock {
  ChainState state;
  std::vector<Transaction> txs;
};

RandomBlock random_block(CounterRng& rng, int n) {
  RandomBlock out{funded_state({"s0", "s1", "s2", "s3"}, ether(5)), {}};
  std::map<std::string, std::uint64_t> next;
  for (int i = 0; i < n; ++i) {
    const std::string sender = "s" + std::to_string(rng() % 4);
    const auto nonce = next[sender]++;
    out.txs.push_back(make_tx("r" + std::to_string(i), sender, nonce, gwei(rng() % 50),
                              21'000 + rng() % 200'000));
  }
  return out;
}

}  // namespace

TEST(ApplyBlockProperties, DeterministicAdditiveAndNonceMonotone) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CounterRng rng{derive_key({seed, 11})};
    auto rb = random_block(rng, 1 + static_cast<int>(rng() % 12));
    const auto cut = rng() % (rb.txs.size() + 1);
    std::vector<Transaction> head(rb.txs.begin(), rb.txs.begin() + static_cast<long>(cut));

    const auto full = apply_block(rb.state, make_block(1, rb.txs));
    const auto again = apply_block(rb.state, make_block(1, rb.txs));
    EXPECT_EQ(full.revenue, again.revenue);
    EXPECT_EQ(full.state.balances, again.state.balances);

    const auto partial = apply_block(rb.state, make_block(1, head));
    EXPECT_GE(full.revenue, partial.revenue);

    for (const auto& [acct, nonce] : full.state.nonces) {
      EXPECT_GE(nonce, partial.state.nonce(acct));
    }
  }
}
