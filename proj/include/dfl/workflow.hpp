//
// Copyright 2026 The dflsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "dfl/committee.hpp"
#include "dfl/messages.hpp"

namespace dfl {

// The four-phase iteration state machine and the adaptive state-transition
// detector that decides when a stage has collected enough requests.

// Work -> Elect only when the committee's iterations are used up.
Phase phase_successor(Phase phase, const CommitteeView& view);

// Algorithm-2 style two-timer detector. timer1 is the hard backstop at mt;
// timer2 starts once >= 80% of the expected requests arrived, is reset by
// each new arrival, and halves on every expiry until it reaches zero.
//
// The caller owns actual timer scheduling: actions say what to do next.
enum class DetectorAction : uint8_t {
  None,
  StartTimer2,  // arm timer2 with current t_ms
  ResetTimer2,  // re-arm timer2 with current t_ms
  RearmTimer2,  // halved; re-arm with current t_ms
  EndStage,
};

class TransitionDetector {
 public:
  TransitionDetector(int64_t mt_ms, uint32_t expected_total)
      : mt_ms_(mt_ms), tot_(expected_total) {}

  // Call once when the stage opens; handles the nothing-expected case.
  DetectorAction on_stage_start(int64_t now_ms);
  DetectorAction on_arrival(int64_t now_ms);
  DetectorAction on_timer1();
  DetectorAction on_timer2();

  int64_t mt_ms() const { return mt_ms_; }
  int64_t t_ms() const { return t_ms_; }
  bool timer2_active() const { return timer2_active_; }
  bool ended() const { return ended_; }
  uint32_t arrival_count() const { return static_cast<uint32_t>(arrivals_.size()); }
  const std::vector<int64_t>& arrivals() const { return arrivals_; }

 private:
  bool threshold_met() const {
    return uint64_t(arrivals_.size()) * 5 >= uint64_t(tot_) * 4;
  }

  int64_t mt_ms_;
  uint32_t tot_;
  std::vector<int64_t> arrivals_;
  int64_t t_ms_ = 0;
  bool timer2_active_ = false;
  bool ended_ = false;
};

// What a node has learned from contract events; enough to fast-forward a
// stalled node to the present.
struct LocalStateView {
  uint64_t round = 1;
  Phase phase = Phase::Pledge;
  CommitteeView committee;
  std::map<NodeId, PublicKey> registry;                // from init/registered events
  std::vector<std::pair<NodeId, Milli>> stake;         // this round
  std::vector<std::pair<NodeId, Digest>> submissions;  // this round
  Digest global_model;
  uint32_t global_score = 0;
  // Per-node (score sum, sample count) across finalized rounds; feeds the
  // election's historical-accuracy term.
  std::map<NodeId, std::pair<uint64_t, uint64_t>> score_history;

  const PublicKey* key_of(const NodeId& n) const;
  double historical_acc(const NodeId& n) const;
  bool in_stake_list(const NodeId& n) const;
  std::optional<Digest> submission_of(const NodeId& n) const;

  // Adopt a finalized phase: the idempotent, monotonic event application.
  // Returns false when the event is stale and was ignored.
  bool apply_finalized(const PhaseFinalizedEvent& ev);
};

struct WorkProduct {
  Digest global_digest;
  uint32_t global_score = 0;
  std::vector<std::pair<NodeId, uint32_t>> submodel_scores;  // sorted by NodeId

  bool operator==(const WorkProduct&) const = default;
};

struct ResultInputs {
  const LocalStateView* prior = nullptr;
  ElectionConfig election;
  Milli min_candidate_pledge = kMilli;
  // Work phase only: this node's evaluation/aggregation product.
  const WorkProduct* own_work = nullptr;
  uint64_t pbft_view = 0;
};

// Deterministic function of (request set, prior finalized state): every
// honest replica computes byte-identical result bytes regardless of request
// delivery order. Stale (it, status) tuples are excluded and reported;
// accepted_tuples receives the deduped fresh tuples backing the result (the
// originals a submitter hands to the contract).
PhaseResult compute_phase_result(Phase phase, uint64_t round,
                                 const std::vector<ConsensusRequest>& executed,
                                 const ResultInputs& in,
                                 std::vector<RequestTuple>* replay_flagged = nullptr,
                                 std::vector<RequestTuple>* accepted_tuples = nullptr);

// Phase request constructors (payload layout per phase).
ConsensusRequest build_elect_request(uint64_t round, const NodeId& id, const KeyPair& kp,
                                     Milli pledge_eth, uint32_t claimed_acc);
ConsensusRequest build_pledge_request(uint64_t round, const NodeId& id, const KeyPair& kp,
                                      Milli money);
ConsensusRequest build_commit_request(uint64_t round, const NodeId& id, const KeyPair& kp,
                                      const Digest& submodel_digest);
ConsensusRequest build_work_request(uint64_t round, const NodeId& id, const KeyPair& kp,
                                    const WorkProduct& product);

}  // namespace dfl
