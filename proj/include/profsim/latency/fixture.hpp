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
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "profsim/core/rng.hpp"
#include "profsim/latency/latency.hpp"

namespace profsim::latency {

/// Synthetic slots whose bids grow exactly linearly in time. Per-slot growth
/// rates are log-normal, placed on stratified quantiles so the cross-slot 90th
/// percentile rate lands on `q90_rate_eth_per_s`.
struct LinearFixtureParams {
  std::size_t slots{120};
  double q90_rate_eth_per_s{0.022};
  double rate_log_sigma{0.5};
  Millis dense_from{11'400};
  Millis dense_interval{10};
  Millis sparse_interval{1'000};
  Wei base_value{finney(50)};
  Wei base_fee{gwei(20)};
  Slot first_slot{8'000'000};
  std::uint64_t seed{7};
};

[[nodiscard]] inline std::vector<SlotBids> make_linear_fixture(const LinearFixtureParams& p) {
  if (p.slots == 0) throw std::invalid_argument("fixture needs at least one slot");
  if (p.dense_interval <= 0 || p.sparse_interval <= 0) {
    throw std::invalid_argument("bid intervals must be positive");
  }
  const boost::math::normal standard;
  const double z90 = boost::math::quantile(standard, 0.9);

  std::vector<std::size_t> order(p.slots);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng{derive_key({p.seed, 0xf1c7})};
  for (std::size_t i = order.size(); i > 1; --i) {  // Fisher-Yates
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
  }

  std::vector<SlotBids> out;
  out.reserve(p.slots);
  const char* builders[] = {"builder-a", "builder-b", "builder-c"};
  for (std::size_t i = 0; i < p.slots; ++i) {
    const double q = (static_cast<double>(order[i]) + 0.5) / static_cast<double>(p.slots);
    const double z = boost::math::quantile(standard, q);
    const double rate = p.q90_rate_eth_per_s * std::exp(p.rate_log_sigma * (z - z90));

    SlotBids s;
    s.slot = p.first_slot + i;
    s.base_fee = p.base_fee;
    s.t0 = kSlotDurationMs;
    std::size_t k = 0;
    const auto add = [&](Millis t) {
      // rate [ETH/s] * t [ms] = rate * t * 1e15 wei
      const Wei grown{static_cast<long long>(std::llround(rate * static_cast<double>(t) * 1e15))};
      s.traces.push_back({t, p.base_value + grown, builders[k++ % 3]});
    };
    for (Millis t = 0; t < p.dense_from; t += p.sparse_interval) add(t);
    for (Millis t = p.dense_from; t <= s.t0; t += p.dense_interval) add(t);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace profsim::latency
