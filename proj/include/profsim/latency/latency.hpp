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
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "profsim/core/types.hpp"

namespace profsim::latency {

struct BidPoint {
  Millis timestamp{0};  // ms since the start of the slot's auction window
  Wei value;
  std::string builder_id;

  friend bool operator==(const BidPoint&, const BidPoint&) = default;
};

/// Cancellation-resolved bids of one slot, sorted by timestamp.
struct SlotBids {
  Slot slot{0};
  std::vector<BidPoint> traces;
  Millis t0{kSlotDurationMs};  // time of the request the proposer commits to
  Wei base_fee;

  friend bool operator==(const SlotBids&, const SlotBids&) = default;
};

/// Merge latency as a function of bundle gas: delta0 + gas * beta.
struct LatencyModel {
  double delta0_ms{6.25};
  double beta_ms_per_mgas{5.26};

  void validate() const {
    if (delta0_ms < 0.0 || beta_ms_per_mgas < 0.0) {
      throw std::invalid_argument("latency model parameters must be non-negative");
    }
  }
  [[nodiscard]] double delta_ms(Gas gas) const {
    return delta0_ms + static_cast<double>(gas) / 1e6 * beta_ms_per_mgas;
  }
};

/// Highest bid received at or before `t`; zero when there is none.
[[nodiscard]] inline Wei max_bid_at(const SlotBids& slot, double t) {
  Wei best{0};
  for (const auto& b : slot.traces) {
    if (static_cast<double>(b.timestamp) > t) break;
    if (b.value > best) best = b.value;
  }
  return best;
}

/// max(Bids(T0)) - max(Bids(T0 - delta)). An empty early window counts as zero,
/// the value of building locally without PBS.
[[nodiscard]] inline Wei latency_penalty(const SlotBids& slot, double delta_ms) {
  if (slot.traces.empty()) throw std::invalid_argument("slot has no bids");
  if (delta_ms < 0.0) throw std::invalid_argument("latency must be non-negative");
  const double t0 = static_cast<double>(slot.t0);
  return max_bid_at(slot, t0) - max_bid_at(slot, t0 - delta_ms);
}

inline constexpr std::array<int, 4> kPercentiles{50, 75, 90, 99};

/// Nearest-rank percentile of a sorted sample.
[[nodiscard]] inline Wei nearest_rank(std::span<const Wei> sorted, int pct) {
  if (sorted.empty()) throw std::invalid_argument("percentile of empty sample");
  const std::size_t n = sorted.size();
  std::size_t rank = (static_cast<std::size_t>(pct) * n + 99) / 100;
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

struct PenaltyCurves {
  std::vector<double> deltas;
  std::vector<Wei> mean;  // floor of the arithmetic mean
  std::map<int, std::vector<Wei>> percentile;
};

[[nodiscard]] inline PenaltyCurves penalty_percentiles(std::span<const SlotBids> slots,
                                                       std::span<const double> deltas) {
  if (slots.empty()) throw std::invalid_argument("need at least one slot");
  PenaltyCurves out;
  out.deltas.assign(deltas.begin(), deltas.end());
  std::vector<Wei> sample(slots.size());
  for (double d : deltas) {
    Wei sum{0};
    for (std::size_t i = 0; i < slots.size(); ++i) {
      sample[i] = latency_penalty(slots[i], d);
      sum += sample[i];
    }
    std::sort(sample.begin(), sample.end());
    out.mean.push_back(sum / static_cast<unsigned>(slots.size()));
    for (int p : kPercentiles) out.percentile[p].push_back(nearest_rank(sample, p));
  }
  return out;
}

/// Least-squares slope through the origin of a penalty curve, in ETH per second.
[[nodiscard]] inline double slope_eth_per_second(std::span<const double> deltas_ms,
                                                 std::span<const Wei> penalties) {
  if (deltas_ms.size() != penalties.size() || deltas_ms.empty()) {
    throw std::invalid_argument("curve shape mismatch");
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < deltas_ms.size(); ++i) {
    const double x = deltas_ms[i] / 1000.0;
    sxy += x * wei_to_ether(penalties[i]);
    sxx += x * x;
  }
  if (sxx == 0.0) throw std::invalid_argument("slope needs a non-zero latency");
  return sxy / sxx;
}

using FeesFn = std::function<Wei(const SlotBids&)>;

/// Fraction of slots whose PROF fees strictly exceed the latency penalty.
[[nodiscard]] inline double inclusion_rate(std::span<const SlotBids> slots, double delta_ms,
                                           const FeesFn& fees) {
  if (slots.empty()) throw std::invalid_argument("need at least one slot");
  std::size_t included = 0;
  for (const auto& s : slots) {
    if (fees(s) > latency_penalty(s, delta_ms)) ++included;
  }
  return static_cast<double>(included) / static_cast<double>(slots.size());
}

/// Fee overhead in parts per million of the base fee, so fee arithmetic stays exact.
[[nodiscard]] inline std::int64_t gamma_to_ppm(double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("fee overhead must be non-negative");
  return std::llround(gamma * 1e6);
}

/// Tip paid to the proposer by a bundle of `gas` gas at overhead gamma: g * gamma * f.
[[nodiscard]] inline Wei prof_fees(Gas gas, std::int64_t gamma_ppm, const Wei& base_fee) {
  return Wei{gas} * base_fee * gamma_ppm / 1'000'000;
}

struct SurfacePoint {
  Gas gas{0};
  double gamma{0.0};
  double delta_ms{0.0};
  double alpha{0.0};
};

/// Inclusion likelihood over a (gas, gamma) grid with delta = delta0 + gas * beta.
[[nodiscard]] inline std::vector<SurfacePoint> inclusion_surface(std::span<const SlotBids> slots,
                                                                 std::span<const double> gammas,
                                                                 std::span<const Gas> gas_grid,
                                                                 const LatencyModel& model) {
  if (gammas.empty() || gas_grid.empty()) throw std::invalid_argument("empty grid");
  model.validate();
  std::vector<SurfacePoint> out;
  for (Gas g : gas_grid) {
    if (g == 0) throw std::invalid_argument("bundle gas must be positive");
    const double delta = model.delta_ms(g);
    for (double gamma : gammas) {
      const auto ppm = gamma_to_ppm(gamma);
      const double alpha = inclusion_rate(
          slots, delta, [&](const SlotBids& s) { return prof_fees(g, ppm, s.base_fee); });
      out.push_back({g, gamma, delta, alpha});
    }
  }
  return out;
}

enum class T0Strategy { WinningBidTimestamp, SlotDeadline };

/// Estimate of when the proposer's committed request reaches the relay.
[[nodiscard]] inline Millis estimate_t0(std::span<const BidPoint> traces, T0Strategy strategy) {
  if (strategy == T0Strategy::SlotDeadline) return kSlotDurationMs;
  if (traces.empty()) throw std::invalid_argument("winning-bid estimate needs bids");
  const BidPoint* best = &traces.front();
  for (const auto& b : traces) {
    if (b.value > best->value || (b.value == best->value && b.timestamp < best->timestamp)) {
      best = &b;
    }
  }
  return best->timestamp;
}

}  // namespace profsim::latency
