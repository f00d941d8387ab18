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
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "profsim/core/hash.hpp"
#include "profsim/core/state.hpp"
#include "profsim/latency/latency.hpp"
#include "profsim/pbs/event_log.hpp"

namespace profsim::prof {

struct BackrunSubmission {
  std::string arbitrageur;
  std::vector<Transaction> txs;
  Millis time{0};
};

enum class ShareRejection { NotOpen, Late, InvalidBlock };

[[nodiscard]] inline std::string_view to_string(ShareRejection r) {
  switch (r) {
    case ShareRejection::NotOpen: return "not-open";
    case ShareRejection::Late: return "late";
    case ShareRejection::InvalidBlock: return "invalid-block";
  }
  return "?";
}

struct ScoredBackrun {
  std::size_t index{0};
  std::string arbitrageur;
  Wei user_revenue;      // paid by the backrun to senders of the PROF transactions
  Wei proposer_revenue;  // proposer revenue on top of the committed block
  Block block;           // the committed block with the backrun appended
};

class DoubleRelease : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Default close of the second auction: one merge latency before the end of the
/// slot following the commitment at `commit_time`.
[[nodiscard]] inline Millis default_share_deadline(Millis commit_time, Gas bundle_gas,
                                                   const latency::LatencyModel& model = {}) {
  return commit_time + kSlotDurationMs -
         static_cast<Millis>(std::ceil(model.delta_ms(bundle_gas)));
}

/// Second auction over a committed PROF block. The proposer's signature on the
/// PROF block is held back; exactly one signed header ever leaves the session.
class ProfShareSession {
 public:
  ProfShareSession(Block prof_block, ChainState parent, Millis deadline,
                   pbs::EventLog* log = nullptr)
      : prof_block_{sealed(std::move(prof_block))},
        parent_{std::move(parent)},
        deadline_{deadline},
        log_{log} {
    base_revenue_ = apply_block(parent_, prof_block_).revenue;
    for (const auto& tx : prof_block_.prof_txs) users_.insert(tx.sender);
  }

  /// Stores the proposer's commitment to the PROF block and opens the auction.
  bool hold(const SignedHeader& committed) {
    if (held_ || !verify_signature(committed) || committed.header != prof_block_.header ||
        committed.slot != prof_block_.slot) {
      return false;
    }
    held_ = committed;
    note(0, "share_opened", {{"header", committed.header}});
    return true;
  }

  /// Contents visible to arbitrageurs once the commitment is held.
  [[nodiscard]] const Block* revealed_block() const noexcept {
    return held_ ? &prof_block_ : nullptr;
  }

  /// Validates the backrun on top of the committed block and scores it.
  std::optional<ShareRejection> submit(BackrunSubmission s) {
    if (!held_ || released_) return ShareRejection::NotOpen;
    if (s.time > deadline_) return ShareRejection::Late;
    Block block = prof_block_;
    block.backrun_txs = s.txs;
    block = sealed(std::move(block));
    Wei revenue;
    try {
      revenue = apply_block(parent_, block).revenue;
    } catch (const InvalidBlock&) {
      note(s.time, "backrun_rejected", {{"arbitrageur", s.arbitrageur}});
      return ShareRejection::InvalidBlock;
    }
    Wei to_users{0};
    for (const auto& tx : s.txs) {
      if (const auto* t = std::get_if<Transfer>(&tx.payload); t && users_.contains(t->to)) {
        to_users += t->amount;
      }
    }
    scored_.push_back({scored_.size(), s.arbitrageur, to_users, revenue - base_revenue_,
                       std::move(block)});
    note(s.time, "backrun_scored",
         {{"arbitrageur", s.arbitrageur},
          {"user_revenue_wei", pbs::wei_string(to_users)},
          {"proposer_revenue_wei", pbs::wei_string(scored_.back().proposer_revenue)}});
    return std::nullopt;
  }

  /// Highest user revenue among backruns that leave the proposer something;
  /// earliest submission on ties.
  [[nodiscard]] const ScoredBackrun* winner() const {
    const ScoredBackrun* best = nullptr;
    for (const auto& s : scored_) {
      if (s.proposer_revenue <= 0) continue;
      if (!best || s.user_revenue > best->user_revenue) best = &s;
    }
    return best;
  }

  /// Proposer's signature on the winning PROF-Share block. Rejected unless it
  /// verifies, names the current winner and arrives by the deadline.
  bool sign_share(const SignedHeader& s, Millis at) {
    const auto* w = winner();
    if (!held_ || released_ || !w || at > deadline_ || !verify_signature(s) ||
        s.header != w->block.header || s.slot != prof_block_.slot ||
        s.proposer != held_->proposer) {
      note(at, "share_signature_rejected", {{"header", s.header}});
      return false;
    }
    share_signature_ = s;
    share_block_ = w->block;
    return true;
  }

  /// Releases the PROF-Share signature if one was obtained, else the held PROF
  /// signature. Throws DoubleRelease on a second call.
  SignedHeader release(Millis now) {
    if (released_) throw DoubleRelease("a header was already released for this slot");
    if (!held_) throw std::logic_error("no commitment held");
    released_ = share_signature_ ? *share_signature_ : *held_;
    released_block_ = share_signature_ ? *share_block_ : prof_block_;
    note(now, "header_released",
         {{"header", released_->header}, {"share", share_signature_.has_value()}});
    return *released_;
  }

  [[nodiscard]] const std::optional<SignedHeader>& released() const noexcept { return released_; }
  [[nodiscard]] const std::optional<Block>& released_block() const noexcept {
    return released_block_;
  }
  [[nodiscard]] const std::vector<ScoredBackrun>& submissions() const noexcept { return scored_; }
  [[nodiscard]] Millis deadline() const noexcept { return deadline_; }
  [[nodiscard]] const Block& prof_block() const noexcept { return prof_block_; }

 private:
  void note(Millis at, std::string kind, nlohmann::json payload) {
    if (log_) log_->record(at, std::move(kind), std::move(payload));
  }

  Block prof_block_;
  ChainState parent_;
  Millis deadline_;
  pbs::EventLog* log_;
  Wei base_revenue_;
  std::set<AccountId> users_;
  std::optional<SignedHeader> held_;
  std::vector<ScoredBackrun> scored_;
  std::optional<SignedHeader> share_signature_;
  std::optional<Block> share_block_;
  std::optional<SignedHeader> released_;
  std::optional<Block> released_block_;
};

}  // namespace profsim::prof
