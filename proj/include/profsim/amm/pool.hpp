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

#include <cmath>
#include <stdexcept>

#include "profsim/core/types.hpp"

namespace profsim::amm {

using profsim::PoolState;

inline constexpr double kRelTolerance = 1e-9;

/// Reference exchange with infinite liquidity: trades never move its price.
struct StaticMarket {
  double price{1.0};  // Y per X

  /// Value of a (dx, dy) position change in Y.
  [[nodiscard]] double value(double dx, double dy) const { return dx * price + dy; }
};

struct SwapResult {
  PoolState pool;
  /// Counter-token amount. For exact-in trades and for selling X this is what the
  /// trader receives; for buying X (negative signed amount) it is the Y paid.
  double counter{0.0};
};

inline void check_pool(const PoolState& pool) {
  if (!(pool.reserve_x > 0.0) || !(pool.reserve_y > 0.0)) {
    throw std::invalid_argument("pool reserves must be positive");
  }
}

/// Exact-input trade: the trader sells `amount` of the given token.
/// Computed as y*a/(x+a) rather than y - k/(x+a) to avoid cancellation.
[[nodiscard]] inline SwapResult swap(const PoolState& pool, TradeDirection dir, double amount) {
  check_pool(pool);
  if (amount < 0.0 || !std::isfinite(amount)) {
    throw std::invalid_argument("swap amount must be finite and non-negative");
  }
  if (amount == 0.0) return {pool, 0.0};
  if (dir == TradeDirection::SellX) {
    const double out = pool.reserve_y * amount / (pool.reserve_x + amount);
    return {{pool.reserve_x + amount, pool.reserve_y * pool.reserve_x / (pool.reserve_x + amount)},
            out};
  }
  const double out = pool.reserve_x * amount / (pool.reserve_y + amount);
  return {{pool.reserve_x * pool.reserve_y / (pool.reserve_y + amount), pool.reserve_y + amount},
          out};
}

/// Signed trade expressed as the change of the pool's X reserve: amount_x > 0 sells
/// X into the pool, amount_x < 0 buys |amount_x| X out of it. The final X reserve is
/// L_X + sum(amount_x), so sequences of these trades are order independent.
[[nodiscard]] inline SwapResult swap_x(const PoolState& pool, double amount_x) {
  check_pool(pool);
  if (!std::isfinite(amount_x)) throw std::invalid_argument("swap amount must be finite");
  if (amount_x == 0.0) return {pool, 0.0};
  if (amount_x > 0.0) return swap(pool, TradeDirection::SellX, amount_x);
  const double buy = -amount_x;
  if (buy >= pool.reserve_x) throw std::domain_error("trade would drain the X reserve");
  const double remaining = pool.reserve_x - buy;
  const double paid = pool.reserve_y * buy / remaining;
  return {{remaining, pool.reserve_y * pool.reserve_x / remaining}, paid};
}

struct Backrun {
  /// Signed X the arbitrageur moves into the pool (negative: takes X out).
  double arb_x{0.0};
  PoolState pool_after;
  /// Profit in Y, valued at the static market price. Never negative.
  double profit{0.0};
};

/// The arbitrage trade that moves the pool price to the static market price and
/// the profit it earns by round-tripping through the static market.
[[nodiscard]] inline Backrun optimal_backrun(const PoolState& pool, const StaticMarket& market) {
  check_pool(pool);
  if (!(market.price > 0.0)) throw std::invalid_argument("market price must be positive");
  const double target_x = std::sqrt(pool.reserve_x * pool.reserve_y / market.price);
  const double arb_x = target_x - pool.reserve_x;
  if (arb_x == 0.0) return {0.0, pool, 0.0};

  const SwapResult r = swap_x(pool, arb_x);
  double profit = arb_x > 0.0 ? r.counter - arb_x * market.price  // sell X dear, buy it cheap
                              : (-arb_x) * market.price - r.counter;
  // Rounding can leave a tiny negative residue when the pool is already at price.
  if (profit < 0.0) profit = 0.0;
  // Land exactly on the target reserve so the post-trade price matches the market.
  const PoolState after{target_x, pool.reserve_x * pool.reserve_y / target_x};
  return {arb_x, after, profit};
}

}  // namespace profsim::amm
