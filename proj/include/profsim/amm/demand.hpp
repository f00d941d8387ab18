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
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace profsim::amm {

/// Signed token-X amounts of the swaps in one block: > 0 sells X, < 0 buys X.
struct BlockTrades {
  std::vector<double> amounts;

  friend bool operator==(const BlockTrades&, const BlockTrades&) = default;
};

/// |sum of amounts|.
[[nodiscard]] inline double net_demand(const BlockTrades& trades) {
  double sum = 0.0;
  for (double a : trades.amounts) sum += a;
  return std::fabs(sum);
}

/// Population standard deviation of |amount| over `amounts`.
[[nodiscard]] inline double volume_stddev(std::span<const double> amounts) {
  if (amounts.empty()) throw std::invalid_argument("variability of an empty trade list");
  double mean = 0.0;
  for (double a : amounts) mean += std::fabs(a);
  mean /= static_cast<double>(amounts.size());
  double acc = 0.0;
  for (double a : amounts) {
    const double d = std::fabs(a) - mean;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(amounts.size()));
}

[[nodiscard]] inline double variability(const BlockTrades& trades) {
  return volume_stddev(trades.amounts);
}

/// Net demand over variability; empty when variability is zero.
[[nodiscard]] inline std::optional<double> demand_ratio(const BlockTrades& trades) {
  if (trades.amounts.empty()) return std::nullopt;
  const double v = variability(trades);
  if (v == 0.0) return std::nullopt;
  return net_demand(trades) / v;
}

/// Variability of a block measured over a window of `window` swaps centred on it.
/// `stream` holds one pool's swaps in chain order and the block occupies
/// [block_begin, block_begin + block_len). A block holding more than `window`
/// swaps uses only its own swaps. Near the ends of the stream the window is
/// shifted to stay inside it.
[[nodiscard]] inline double windowed_variability(std::span<const double> stream,
                                                 std::size_t block_begin, std::size_t block_len,
                                                 std::size_t window) {
  if (window == 0) throw std::invalid_argument("window size must be positive");
  if (stream.empty() || block_len == 0) throw std::invalid_argument("no swaps to measure");
  if (block_begin + block_len > stream.size()) throw std::out_of_range("block outside stream");

  if (block_len >= window) return volume_stddev(stream.subspan(block_begin, block_len));

  const std::size_t before = (window - block_len) / 2;
  std::size_t start = block_begin >= before ? block_begin - before : 0;
  std::size_t end = std::min(stream.size(), start + window);
  start = end >= window ? end - window : 0;
  return volume_stddev(stream.subspan(start, end - start));
}

using PoolSwaps = std::map<std::uint64_t, BlockTrades>;    // block number -> swaps
using SwapDataset = std::map<std::string, PoolSwaps>;      // pool id -> blocks

struct DemandHistogram {
  std::vector<double> edges;    // bin i is [edges[i], edges[i+1])
  std::vector<double> percent;  // pool-averaged share of blocks per bin
  std::size_t pools{0};         // pools that contributed
};

/// Share of blocks per demand-ratio bin, computed for each pool separately and
/// then averaged over pools. Blocks whose windowed variability is zero have no
/// defined ratio and are left out.
[[nodiscard]] inline DemandHistogram demand_ratio_histogram(const SwapDataset& data,
                                                            std::size_t window,
                                                            std::vector<double> edges) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) {
    throw std::invalid_argument("need at least two ascending bin edges");
  }
  DemandHistogram out{std::move(edges), {}, 0};
  const std::size_t bins = out.edges.size() - 1;
  out.percent.assign(bins, 0.0);

  for (const auto& [pool, blocks] : data) {
    std::vector<double> stream;
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (const auto& [number, trades] : blocks) {
      spans.emplace_back(stream.size(), trades.amounts.size());
      stream.insert(stream.end(), trades.amounts.begin(), trades.amounts.end());
    }

    std::vector<std::size_t> counts(bins, 0);
    std::size_t analysed = 0;
    auto span_it = spans.begin();
    for (const auto& [number, trades] : blocks) {
      const auto [begin, len] = *span_it++;
      if (len == 0) continue;
      const double v = windowed_variability(stream, begin, len, window);
      if (v == 0.0) continue;
      const double ratio = net_demand(trades) / v;
      ++analysed;
      auto upper = std::upper_bound(out.edges.begin(), out.edges.end(), ratio);
      if (upper == out.edges.begin() || upper == out.edges.end()) continue;
      ++counts[static_cast<std::size_t>(upper - out.edges.begin()) - 1];
    }
    if (analysed == 0) continue;
    ++out.pools;
    for (std::size_t i = 0; i < bins; ++i) {
      out.percent[i] += 100.0 * static_cast<double>(counts[i]) / static_cast<double>(analysed);
    }
  }
  if (out.pools == 0) {
    out.percent.clear();
    return out;
  }
  for (auto& p : out.percent) p /= static_cast<double>(out.pools);
  return out;
}

}  // namespace profsim::amm
