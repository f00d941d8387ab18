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
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "profsim/core/rng.hpp"
#include "profsim/latency/latency.hpp"

namespace profsim::pbs {

/// value(t) = v0 + drift * t + surge * [t > surge_after] + noise, sampled per
/// builder on a fixed cadence. Builders keep their own non-decreasing timestamps.
struct SyntheticBidModel {
  Wei v0{finney(40)};
  double drift_wei_per_ms{5e12};     // 0.005 ETH/s
  Wei surge{finney(10)};
  Millis surge_after{11'000};
  double noise_sd_wei{1e15};
  Millis interval_ms{250};
  Millis horizon_ms{kSlotDurationMs};
  std::vector<std::string> builders{"builder-a", "builder-b", "builder-c"};

  void validate() const {
    if (interval_ms <= 0) throw std::invalid_argument("bid interval must be positive");
    if (builders.empty()) throw std::invalid_argument("need at least one builder");
    if (noise_sd_wei < 0.0) throw std::invalid_argument("noise must be non-negative");
  }

  [[nodiscard]] Wei mean_value(Millis t) const {
    Wei v = v0 + Wei{static_cast<long long>(std::llround(drift_wei_per_ms * static_cast<double>(t)))};
    if (t > surge_after) v += surge;
    return v;
  }

  /// Bids of one slot, sorted by (timestamp, builder). Builders start at
  /// staggered offsets so their bids interleave. Values never go negative.
  [[nodiscard]] std::vector<latency::BidPoint> generate(Slot slot, std::uint64_t seed) const {
    validate();
    std::vector<latency::BidPoint> out;
    for (std::size_t b = 0; b < builders.size(); ++b) {
      CounterRng rng{derive_key({seed, slot, b})};
      boost::random::normal_distribution<double> noise(0.0, noise_sd_wei);
      const Millis offset = interval_ms * static_cast<Millis>(b) / static_cast<Millis>(builders.size());
      for (Millis t = offset; t <= horizon_ms; t += interval_ms) {
        Wei v = mean_value(t);
        if (noise_sd_wei > 0.0) v += Wei{static_cast<long long>(std::llround(noise(rng)))};
        out.push_back({t, v < 0 ? Wei{0} : v, builders[b]});
      }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.builder_id < b.builder_id;
    });
    return out;
  }

  [[nodiscard]] latency::SlotBids slot_bids(Slot slot, std::uint64_t seed, Wei base_fee) const {
    return {slot, generate(slot, seed), kSlotDurationMs, std::move(base_fee)};
  }
};

}  // namespace profsim::pbs
