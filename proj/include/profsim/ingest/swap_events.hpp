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

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "profsim/amm/demand.hpp"
#include "profsim/ingest/bid_traces.hpp"

namespace profsim::ingest {

inline constexpr std::string_view kSwapCsvHeader = "pool_id,block_number,amount_x,amount_y";

struct SwapEventRecord {
  std::string pool_id;
  std::uint64_t block_number{0};
  double amount_x{0.0};  // > 0: X flows into the pool
  double amount_y{0.0};
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

[[nodiscard]] inline SwapEventRecord parse_swap_row(std::string line, const std::string& source,
                                                    std::size_t lineno) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto cells = detail::split_csv(line);
  if (cells.size() != 4) throw ParseError(source, lineno, "expected 4 columns");
  SwapEventRecord r;
  r.pool_id = cells[0];
  if (r.pool_id.empty()) throw ParseError(source, lineno, "empty pool_id");
  const auto& bn = cells[1];
  const auto [p, ec] = std::from_chars(bn.data(), bn.data() + bn.size(), r.block_number);
  if (ec != std::errc{} || p != bn.data() + bn.size()) {
    throw ParseError(source, lineno, "block_number is not a non-negative integer");
  }
  if (!detail::parse_double(cells[2], r.amount_x) || !detail::parse_double(cells[3], r.amount_y)) {
    throw ParseError(source, lineno, "amounts must be finite numbers");
  }
  // One token goes in, the other comes out.
  if ((r.amount_x < 0.0) == (r.amount_y < 0.0)) {
    throw ParseError(source, lineno, "exactly one of amount_x, amount_y must be negative");
  }
  return r;
}

/// Reads swap rows grouped by pool and block. The signed X amount of each swap
/// is amount_x as recorded from the pool's side: positive sells X to the pool.
[[nodiscard]] inline amm::SwapDataset read_swap_events(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSwapCsvHeader) throw ParseError(source, 1, "unexpected header");
  amm::SwapDataset out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto r = parse_swap_row(line, source, lineno);
    out[r.pool_id][r.block_number].amounts.push_back(r.amount_x);
  }
  return out;
}

[[nodiscard]] inline amm::SwapDataset load_swap_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_swap_events(in, path.string());
}

}  // namespace profsim::ingest
