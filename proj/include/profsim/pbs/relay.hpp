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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "profsim/core/hash.hpp"
#include "profsim/core/state.hpp"
#include "profsim/pbs/event_log.hpp"

namespace profsim::pbs {

struct Bid {
  std::string builder_id;
  Slot slot{0};
  Wei value;           // declared revenue for the proposer
  Millis timestamp{0};  // ms since slot start
  std::shared_ptr<const Block> block;
  bool prof_enriched{false};  // enriched by a builder-hosted merger (hybrid mode)
};

enum class RelayMode { Pessimistic, Optimistic };

enum class BidRejection { WrongSlot, InvalidBlock, ValueMismatch, PostReveal };

[[nodiscard]] inline std::string_view to_string(BidRejection r) {
  switch (r) {
    case BidRejection::WrongSlot: return "wrong-slot";
    case BidRejection::InvalidBlock: return "invalid-block";
    case BidRejection::ValueMismatch: return "value-mismatch";
    case BidRejection::PostReveal: return "post-reveal";
  }
  return "?";
}

struct SubmitResult {
  std::optional<BidRejection> rejection;
  [[nodiscard]] bool accepted() const noexcept { return !rejection.has_value(); }
};

/// Enriched bid handed to the relay by a bundle merger. Only the header, value and
/// reveal time are visible; the contents come out of `release` once the proposer
/// has signed the header.
struct ProfOffer {
  std::string header;
  Wei value;
  Millis reveal_time{0};
  std::function<std::optional<Block>(const SignedHeader&)> release;
};

struct HeaderOffer {
  std::string header;
  Wei value;
  bool prof{false};
  std::string builder_id;  // empty for relay-side PROF offers
};

enum class CommitError { InvalidSignature, UnknownHeader, Equivocation, Withheld };

[[nodiscard]] inline std::string_view to_string(CommitError e) {
  switch (e) {
    case CommitError::InvalidSignature: return "invalid-signature";
    case CommitError::UnknownHeader: return "unknown-header";
    case CommitError::Equivocation: return "equivocation";
    case CommitError::Withheld: return "withheld";
  }
  return "?";
}

struct CommitResult {
  std::optional<Block> block;
  std::optional<CommitError> error;
  [[nodiscard]] bool ok() const noexcept { return block.has_value(); }
};

struct EquivocationReport {
  Slot slot{0};
  SignedHeader first;
  SignedHeader second;
};

/// Post-hoc finding of an optimistic relay: a stored bid whose block is invalid
/// or whose declared value does not match its recomputed revenue.
struct AuditFinding {
  std::string builder_id;
  std::string header;
  Millis timestamp{0};
  BidRejection reason{BidRejection::InvalidBlock};
};

/// First-price block auction for a single slot.
class Relay {
 public:
  Relay(Slot slot, ChainState parent, RelayMode mode = RelayMode::Pessimistic,
        EventLog* log = nullptr)
      : slot_{slot}, parent_{std::move(parent)}, mode_{mode}, log_{log} {}

  /// Hybrid rule: once an enriched header has been served, accept no new bids.
  void set_reject_after_prof_reveal(bool on) noexcept { reject_after_reveal_ = on; }
  void set_gas_limit(Gas limit) noexcept { gas_limit_ = limit; }

  [[nodiscard]] Slot slot() const noexcept { return slot_; }
  [[nodiscard]] RelayMode mode() const noexcept { return mode_; }
  [[nodiscard]] const ChainState& parent_state() const noexcept { return parent_; }
  [[nodiscard]] bool prof_revealed() const noexcept { return prof_revealed_; }

  SubmitResult submit_bid(Bid bid, Millis now) {
    const auto reject = [&](BidRejection r) {
      note(now, "bid_rejected", {{"builder_id", bid.builder_id}, {"reason", to_string(r)}});
      return SubmitResult{r};
    };
    if (bid.slot != slot_ || !bid.block) return reject(BidRejection::WrongSlot);
    if (reject_after_reveal_ && prof_revealed_) return reject(BidRejection::PostReveal);
    if (mode_ == RelayMode::Pessimistic) {
      if (auto r = revalidate(bid)) return reject(*r);
    }
    note(now, "bid_accepted", {{"builder_id", bid.builder_id},
                               {"value_wei", wei_string(bid.value)},
                               {"header", bid.block->header},
                               {"prof_enriched", bid.prof_enriched}});
    bids_.push_back({std::move(bid), false});
    return {};
  }

  /// Tombstones every bid of `builder_id` received at or before `at`.
  void cancel_bids(const std::string& builder_id, Millis at) {
    std::size_t n = 0;
    for (auto& e : bids_) {
      if (e.bid.builder_id == builder_id && e.bid.timestamp <= at && !e.cancelled) {
        e.cancelled = true;
        ++n;
      }
    }
    note(at, "bids_cancelled", {{"builder_id", builder_id}, {"count", n}});
  }

  /// Highest live bid with timestamp <= at. Ties go to the earlier bid, then to
  /// the lexicographically smaller builder id.
  [[nodiscard]] std::optional<Bid> best_bid(Millis at) const {
    const Bid* best = nullptr;
    for (const auto& e : bids_) {
      const Bid& b = e.bid;
      if (e.cancelled || b.timestamp > at) continue;
      if (!best || b.value > best->value ||
          (b.value == best->value &&
           (b.timestamp < best->timestamp ||
            (b.timestamp == best->timestamp && b.builder_id < best->builder_id)))) {
        best = &b;
      }
    }
    if (!best) return std::nullopt;
    return *best;
  }

  void offer_prof(ProfOffer offer) {
    note(offer.reveal_time, "prof_offer",
         {{"header", offer.header}, {"value_wei", wei_string(offer.value)}});
    prof_offers_.push_back(std::move(offer));
  }

  /// Best header available at `at` among PBS bids and revealed PROF offers.
  /// PBS wins ties.
  std::optional<HeaderOffer> get_header(Millis at) {
    std::optional<HeaderOffer> out;
    Source source;
    if (auto b = best_bid(at)) {
      out = HeaderOffer{b->block->header, b->value, b->prof_enriched, b->builder_id};
      source = Source{b->block, 0};
    }
    for (std::size_t i = 0; i < prof_offers_.size(); ++i) {
      const auto& o = prof_offers_[i];
      if (o.reveal_time > at) continue;
      if (!out || o.value > out->value) {
        out = HeaderOffer{o.header, o.value, true, {}};
        source = Source{nullptr, i};
      }
    }
    if (!out) return out;
    served_[out->header] = source;
    if (out->prof) prof_revealed_ = true;
    note(at, "get_header",
         {{"header", out->header}, {"value_wei", wei_string(out->value)}, {"prof", out->prof}});
    return out;
  }

  /// Releases the block behind a served header exactly once per slot. Replaying
  /// the released commitment is idempotent; any other header is equivocation.
  CommitResult commit_header(const SignedHeader& signed_header, Millis at = kSlotDurationMs) {
    if (!verify_signature(signed_header) || signed_header.slot != slot_) {
      return fail(at, CommitError::InvalidSignature, signed_header);
    }
    // A second signed header for the slot is an equivocation even when the first
    // commit could not be served.
    if (first_commit_ && first_commit_->header != signed_header.header) {
      equivocations_.push_back({slot_, *first_commit_, signed_header});
      return fail(at, CommitError::Equivocation, signed_header);
    }
    if (released_) return {released_->second, std::nullopt};
    const auto it = served_.find(signed_header.header);
    if (it == served_.end()) return fail(at, CommitError::UnknownHeader, signed_header);
    first_commit_ = signed_header;

    std::optional<Block> block;
    if (it->second.block) {
      block = *it->second.block;
    } else {
      block = prof_offers_[it->second.offer].release(signed_header);
    }
    if (!block) return fail(at, CommitError::Withheld, signed_header);
    released_.emplace(signed_header, *block);
    ++release_count_;
    note(at, "block_released", {{"header", signed_header.header}});
    return {block, std::nullopt};
  }

  [[nodiscard]] std::size_t release_count() const noexcept { return release_count_; }
  [[nodiscard]] const std::vector<EquivocationReport>& equivocations() const noexcept {
    return equivocations_;
  }
  [[nodiscard]] std::size_t live_bid_count() const {
    return static_cast<std::size_t>(
        std::count_if(bids_.begin(), bids_.end(), [](const Entry& e) { return !e.cancelled; }));
  }

  /// Revalidates every stored bid; the optimistic relay's after-the-fact check.
  [[nodiscard]] std::vector<AuditFinding> audit() {
    std::vector<AuditFinding> out;
    for (const auto& e : bids_) {
      if (auto r = revalidate(e.bid)) {
        out.push_back({e.bid.builder_id, e.bid.block->header, e.bid.timestamp, *r});
        note(e.bid.timestamp, "audit_flag",
             {{"builder_id", e.bid.builder_id}, {"reason", to_string(*r)}});
      }
    }
    return out;
  }

 private:
  struct Entry {
    Bid bid;
    bool cancelled{false};
  };
  struct Source {
    std::shared_ptr<const Block> block;
    std::size_t offer{0};  // index into prof_offers_ when block is null
  };

  [[nodiscard]] std::optional<BidRejection> revalidate(const Bid& bid) const {
    try {
      if (apply_block(parent_, *bid.block, gas_limit_).revenue != bid.value) {
        return BidRejection::ValueMismatch;
      }
    } catch (const InvalidBlock&) {
      return BidRejection::InvalidBlock;
    }
    return std::nullopt;
  }

  CommitResult fail(Millis at, CommitError e, const SignedHeader& s) {
    note(at, "commit_rejected", {{"header", s.header}, {"reason", to_string(e)}});
    return {std::nullopt, e};
  }

  void note(Millis at, std::string kind, nlohmann::json payload) {
    if (log_) log_->record(at, std::move(kind), std::move(payload));
  }

  Slot slot_;
  ChainState parent_;
  RelayMode mode_;
  EventLog* log_;
  Gas gas_limit_{kDefaultBlockGasLimit};
  bool reject_after_reveal_{false};
  bool prof_revealed_{false};
  std::vector<Entry> bids_;
  std::vector<ProfOffer> prof_offers_;
  std::map<std::string, Source> served_;
  std::optional<std::pair<SignedHeader, Block>> released_;
  std::optional<SignedHeader> first_commit_;
  std::size_t release_count_{0};
  std::vector<EquivocationReport> equivocations_;
};

/// argmax by value; the first listed header wins ties.
[[nodiscard]] inline std::size_t proposer_decide(std::span<const HeaderOffer> headers) {
  if (headers.empty()) throw std::invalid_argument("proposer needs at least one header");
  std::size_t best = 0;
  for (std::size_t i = 1; i < headers.size(); ++i) {
    if (headers[i].value > headers[best].value) best = i;
  }
  return best;
}

}  // namespace profsim::pbs
