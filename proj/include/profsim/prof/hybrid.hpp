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

#include <stdexcept>
#include <string>

#include "profsim/pbs/relay.hpp"
#include "profsim/prof/merger.hpp"

namespace profsim::prof {

struct HybridOutcome {
  MergeOutcome merge;
  std::optional<pbs::SubmitResult> submit;
};

/// Builder-hosted merger enriching one of the builder's own blocks and sending it
/// to an optimistic relay. The merger cannot stop a builder from enriching
/// several blocks; the relay refuses every bid once an enriched header is out.
inline HybridOutcome hybrid_merge(BundleMerger& merger, pbs::Relay& relay,
                                  const std::string& builder_id, const Block& prefix,
                                  Millis submit_time) {
  if (relay.mode() != pbs::RelayMode::Optimistic) {
    throw std::invalid_argument("hybrid mode needs an optimistic relay");
  }
  relay.set_reject_after_prof_reveal(true);
  HybridOutcome out{merger.merge(prefix, relay.parent_state(), submit_time), std::nullopt};
  if (out.merge.ok()) {
    const auto& bid = *out.merge.bid;
    out.submit = relay.submit_bid(merger.relay_submission(bid, builder_id, relay.slot()),
                                  bid.reveal_time);
  }
  return out;
}

}  // namespace profsim::prof
