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

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "profsim/core/types.hpp"

// Headers and signatures are modeled, not cryptographic: a header is a stable
// digest of the block contents, a signature an unforgeable-by-convention token.

namespace profsim {

class Fnv1a {
 public:
  Fnv1a& add(std::string_view s) {
    for (unsigned char c : s) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    // Field separator so ("ab","c") and ("a","bc") differ.
    state_ ^= 0xff;
    state_ *= 0x100000001b3ULL;
    return *this;
  }
  Fnv1a& add(std::uint64_t v) { return add(std::to_string(v)); }
  Fnv1a& add(const Wei& v) { return add(v.str()); }

  [[nodiscard]] std::string hex() const {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_{0xcbf29ce484222325ULL};
};

[[nodiscard]] inline std::string compute_header(const Block& block) {
  Fnv1a h;
  h.add("block").add(block.slot).add(block.fee_recipient).add(block.proposer);
  h.add(block.prof_fee_routing == FeeRouting::ToProposer ? "p" : "r");
  const auto section = [&h](std::string_view tag, const std::vector<Transaction>& txs) {
    h.add(tag).add(static_cast<std::uint64_t>(txs.size()));
    for (const auto& tx : txs) {
      h.add(tx.id).add(tx.sender).add(tx.nonce).add(tx.gas_used).add(tx.tip_per_gas);
    }
  };
  section("prefix", block.prefix_txs);
  section("prof", block.prof_txs);
  section("backrun", block.backrun_txs);
  return h.hex();
}

/// Returns the block with its header field filled in.
[[nodiscard]] inline Block sealed(Block block) {
  block.header = compute_header(block);
  return block;
}

[[nodiscard]] inline std::string signature_token(const AccountId& proposer,
                                                 const std::string& header, Slot slot) {
  return Fnv1a{}.add("sig").add(proposer).add(header).add(slot).hex();
}

[[nodiscard]] inline SignedHeader sign_header(const AccountId& proposer, const std::string& header,
                                              Slot slot) {
  return {header, proposer, slot, signature_token(proposer, header, slot)};
}

[[nodiscard]] inline bool verify_signature(const SignedHeader& s) {
  return s.signature == signature_token(s.proposer, s.header, s.slot);
}

}  // namespace profsim
