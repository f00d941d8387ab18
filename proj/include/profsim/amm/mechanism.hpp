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

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/random/poisson_distribution.hpp>

#include "profsim/amm/demand.hpp"
#include "profsim/amm/pool.hpp"
#include "profsim/core/rng.hpp"

namespace profsim::amm {

enum class Mechanism { Prof, ProfShare, MevShare };

inline constexpr std::array<Mechanism, 3> kAllMechanisms{Mechanism::Prof, Mechanism::ProfShare,
                                                         Mechanism::MevShare};

[[nodiscard]] inline std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::Prof: return "PROF";
    case Mechanism::ProfShare: return "PROF_SHARE";
    case Mechanism::MevShare: return "MEV_SHARE";
  }
  return "?";
}

struct SimConfig {
  int mean_users{20};
  double demand_ratio_cap{std::numeric_limits<double>::infinity()};
  int iterations{1000};
  double kickback_fraction{0.9};
  double initial_liquidity{1e7};
  double trade_size{100.0};
  double initial_user_balance{100.0};
  std::uint64_t seed{1};
  int max_attempts{10'000};

  void validate() const {
    if (mean_users <= 0) throw std::invalid_argument("mean users per block must be positive");
    if (!(demand_ratio_cap > 0.0)) throw std::invalid_argument("demand ratio cap must be positive");
    if (iterations <= 0) throw std::invalid_argument("iterations must be positive");
    if (!(kickback_fraction >= 0.0 && kickback_fraction <= 1.0)) {
      throw std::invalid_argument("kickback fraction must lie in [0, 1]");
    }
    if (!(initial_liquidity > 0.0)) throw std::invalid_argument("liquidity must be positive");
    if (!(trade_size > 0.0)) throw std::invalid_argument("trade size must be positive");
    if (trade_size > initial_user_balance) {
      throw std::invalid_argument("trade size exceeds the users' starting balance");
    }
    if (max_attempts <= 0) throw std::invalid_argument("attempt cap must be positive");
  }
};

/// Standard deviation of a block's traded volume when the trade count is
/// Poisson(N) and every trade has the same size: trade_size * sqrt(N).
/// Per-block sample deviation is zero for equal-size trades, so the sampler
/// normalises net demand by this instead.
[[nodiscard]] inline double analytic_variability(const SimConfig& c) {
  return c.trade_size * std::sqrt(static_cast<double>(c.mean_users));
}

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Poisson(N) trades of +/- trade_size with equal probability, resampled until
/// net demand / analytic variability is strictly below the cap. Blocks with no
/// trades are resampled as well since they have no users to score.
[[nodiscard]] inline BlockTrades sample_block_trades(const SimConfig& c, CounterRng& rng) {
  const double scale = analytic_variability(c);
  boost::random::poisson_distribution<int, double> count_dist(static_cast<double>(c.mean_users));
  for (int attempt = 0; attempt < c.max_attempts; ++attempt) {
    const int n = count_dist(rng);
    if (n == 0) continue;
    BlockTrades t;
    t.amounts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t.amounts.push_back(rng.coin() ? c.trade_size : -c.trade_size);
    if (std::isinf(c.demand_ratio_cap) || net_demand(t) / scale < c.demand_ratio_cap) return t;
  }
  throw SamplingError("no trade sequence with demand ratio below " +
                      std::to_string(c.demand_ratio_cap) + " for N=" +
                      std::to_string(c.mean_users) + " after " + std::to_string(c.max_attempts) +
                      " attempts");
}

struct MechanismOutcome {
  Mechanism mechanism{Mechanism::Prof};
  std::vector<double> utilities;  // Y-equivalent at the static price
  double mean{0.0};
  double stddev{0.0};
  double arb_profit{0.0};         // gross, before kickbacks
  double kickbacks{0.0};
  double pool_value_change{0.0};  // final minus initial pool value
};

/// Runs one block of user trades through a mechanism. Positive amounts sell
/// trade-size X, negative amounts sell trade-size Y. The pool starts at
/// (L, L) and the static market is pinned to that top-of-block price.
///  - PROF: trades only, no arbitrage.
///  - PROF_SHARE: one backrun after the whole bundle, kickback split by trade value.
///  - MEV_SHARE: a backrun after every trade, kickback to that trade's user.
[[nodiscard]] inline MechanismOutcome run_mechanism(Mechanism kind, const BlockTrades& trades,
                                                    const SimConfig& c) {
  const PoolState start{c.initial_liquidity, c.initial_liquidity};
  const StaticMarket market{start.price()};
  PoolState pool = start;

  MechanismOutcome out;
  out.mechanism = kind;
  out.utilities.reserve(trades.amounts.size());
  std::vector<double> traded_value;
  traded_value.reserve(trades.amounts.size());

  for (double a : trades.amounts) {
    const double amount = std::fabs(a);
    const bool sell_x = a > 0.0;
    const SwapResult r = swap(pool, sell_x ? TradeDirection::SellX : TradeDirection::SellY, amount);
    pool = r.pool;
    const double dx = sell_x ? -amount : r.counter;
    const double dy = sell_x ? r.counter : -amount;
    out.utilities.push_back(market.value(dx, dy));
    traded_value.push_back(sell_x ? amount * market.price : amount);

    if (kind == Mechanism::MevShare) {
      const Backrun b = optimal_backrun(pool, market);
      pool = b.pool_after;
      const double kick = c.kickback_fraction * b.profit;
      out.arb_profit += b.profit;
      out.kickbacks += kick;
      out.utilities.back() += kick;
    }
  }

  if (kind == Mechanism::ProfShare && !trades.amounts.empty()) {
    const Backrun b = optimal_backrun(pool, market);
    pool = b.pool_after;
    const double pot = c.kickback_fraction * b.profit;
    out.arb_profit += b.profit;
    out.kickbacks += pot;
    double total = 0.0;
    for (double v : traded_value) total += v;
    for (std::size_t i = 0; i < out.utilities.size(); ++i) {
      out.utilities[i] += pot * traded_value[i] / total;
    }
  }

  out.pool_value_change = market.value(pool.reserve_x - start.reserve_x,
                                       pool.reserve_y - start.reserve_y);
  if (!out.utilities.empty()) {
    double sum = 0.0;
    for (double u : out.utilities) sum += u;
    out.mean = sum / static_cast<double>(out.utilities.size());
    double acc = 0.0;
    for (double u : out.utilities) acc += (u - out.mean) * (u - out.mean);
    out.stddev = std::sqrt(acc / static_cast<double>(out.utilities.size()));
  }
  return out;
}

struct StudyRow {
  double demand_ratio_cap{0.0};
  int mean_users{0};
  Mechanism mechanism{Mechanism::Prof};
  double mean_utility{0.0};  // mean over iterations of the block's mean user utility
  double std_utility{0.0};   // sample standard deviation over iterations
  int iterations{0};
  std::uint64_t seed{0};

  [[nodiscard]] double standard_error() const {
    return iterations > 0 ? std_utility / std::sqrt(static_cast<double>(iterations)) : 0.0;
  }
};

/// Per-iteration random stream, a pure function of (seed, cap index, N, iteration).
[[nodiscard]] inline CounterRng iteration_rng(std::uint64_t seed, std::size_t cap_index, int users,
                                              int iteration) {
  return CounterRng{derive_key({seed, cap_index, static_cast<std::uint64_t>(users),
                                static_cast<std::uint64_t>(iteration)})};
}

/// Rows ordered by cap, then N, then mechanism. All three mechanisms see the
/// same sampled trades in each iteration.
[[nodiscard]] inline std::vector<StudyRow> run_study(const SimConfig& base,
                                                     std::span<const double> caps,
                                                     std::span<const int> user_counts) {
  base.validate();
  std::vector<StudyRow> rows;
  for (std::size_t ci = 0; ci < caps.size(); ++ci) {
    for (int users : user_counts) {
      SimConfig cfg = base;
      cfg.demand_ratio_cap = caps[ci];
      cfg.mean_users = users;
      cfg.validate();

      std::array<std::vector<double>, kAllMechanisms.size()> samples;
      for (int it = 0; it < cfg.iterations; ++it) {
        CounterRng rng = iteration_rng(cfg.seed, ci, users, it);
        const BlockTrades trades = sample_block_trades(cfg, rng);
        for (std::size_t m = 0; m < kAllMechanisms.size(); ++m) {
          samples[m].push_back(run_mechanism(kAllMechanisms[m], trades, cfg).mean);
        }
      }
      for (std::size_t m = 0; m < kAllMechanisms.size(); ++m) {
        const auto& s = samples[m];
        double mean = 0.0;
        for (double v : s) mean += v;
        mean /= static_cast<double>(s.size());
        double acc = 0.0;
        for (double v : s) acc += (v - mean) * (v - mean);
        const double sd = s.size() > 1 ? std::sqrt(acc / static_cast<double>(s.size() - 1)) : 0.0;
        rows.push_back({caps[ci], users, kAllMechanisms[m], mean, sd, cfg.iterations, cfg.seed});
      }
    }
  }
  return rows;
}

}  // namespace profsim::amm
