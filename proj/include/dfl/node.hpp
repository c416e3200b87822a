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

#include <memory>
#include <optional>

#include "dfl/contract.hpp"
#include "dfl/fl.hpp"
#include "dfl/netsim.hpp"
#include "dfl/pbft.hpp"
#include "dfl/store.hpp"
#include "dfl/workflow.hpp"

namespace dfl {

// Observation points the harness uses for metrics; nodes report, the
// scenario aggregates. Not part of the protocol.
struct MetricsSink {
  virtual ~MetricsSink() = default;
  virtual void on_request_sent(const Digest&, Phase, const NodeId&, int64_t) {}
  virtual void on_request_executed(const Digest&, const NodeId&, int64_t, uint64_t round,
                                   Phase) {}
  virtual void on_pbft_sent(PbftKind, const NodeId&, int64_t) {}
  virtual void on_reply_produced(const NodeId&, uint64_t round, Phase, const Digest&) {}
  virtual void on_replay_dropped(const Digest&, const NodeId&) {}
  virtual void on_replay_sent(const Digest&, const NodeId&) {}
  virtual void on_submission_abandoned(const NodeId&, uint64_t round) {}
};

struct NodeConfig {
  // Per-phase maximum acceptable times, indexed by Phase.
  std::array<int64_t, 4> mt_ms{30'000, 30'000, 120'000, 120'000};
  int64_t aggregation_window_ms = 5'000;
  int64_t view_timeout_ms = 15'000;
  int64_t think_min_ms = 500;
  int64_t think_max_ms = 2'500;
  int64_t training_ms = 20'000;   // virtual duration of local training
  int64_t work_ms = 10'000;       // evaluate+aggregate base duration
  int64_t work_per_model_ms = 2'500;  // per-submodel evaluation cost
  Milli participation_pledge = kMilli;
  Milli candidate_pledge = 2 * kMilli;
  Milli min_candidate_pledge = kMilli;
  int64_t gas_price_micro = 10;
  bool run_for_committee = true;
  ElectionConfig election;
  // FL behavior
  bool fl_enabled = true;
  int epochs = 30;
  double lr = 0.5;
  bool dp_enabled = true;
  DpConfig dp;
};

// One logical node: a registered participant that trains and pledges, and a
// PBFT committee replica whenever elected. All behavior is driven by
// contract events and virtual timers.
class SimNode {
 public:
  SimNode(Simulator& sim, StateContract& contract, ContentStore& store,
          MetricsSink* metrics, NodeConfig cfg, uint64_t identity_seed,
          Dataset train_data, const Dataset* shared_test);

  const NodeId& id() const { return id_; }
  const PublicKey& pk() const { return kp_.public_key; }
  Milli deposit_hint() const { return pool_estimate_; }
  void set_initial_deposit(Milli d) { pool_estimate_ = d; }

  void set_adversary(const AdversarySpec& spec) { adversary_ = spec; }

  // Subscribes to the contract; everything else is event-driven.
  void start();

  const LocalStateView& state() const { return state_; }
  const PbftReplica& replica() const { return *replica_; }
  uint64_t replays_dropped() const { return replays_dropped_; }

 private:
  bool behaving(AdversaryBehavior b) const {
    return adversary_ && adversary_->behavior == b && adversary_->active(state_.round);
  }
  bool silent() const { return behaving(AdversaryBehavior::Silent); }
  bool is_member() const { return state_.committee.contains(id_); }

  void rebuild_replica(bool equivocate);
  void on_envelope(const Envelope& env);
  void on_contract_event(const EventRecord& ev);
  void enter_phase();
  void drain_future_buffer();

  // Participant side.
  void schedule_participation();
  void send_phase_request(const ConsensusRequest& req);
  void start_training();
  void finish_training();
  void start_work();
  void finish_work();

  // Committee side.
  void on_wire_request(const ConsensusRequest& req);
  void on_pbft_message(const PbftMessage& msg);
  void on_reply(const ReplyMsg& reply);
  void on_request_executed(const ConsensusRequest& req);
  void handle_end_executed(const EndRequest& end);
  void on_detector_action(DetectorAction action);
  void on_stage_end();
  void send_end(const Digest& hash);
  void maybe_submit_proof(const Digest& hash);
  std::optional<PhaseResult> local_result(std::vector<RequestTuple>* accepted = nullptr,
                                          std::vector<RequestTuple>* flagged = nullptr);
  ModelParams fetch_model(const Digest& d) const;

  int64_t think_delay();
  void schedule_in_phase(int64_t delay, std::function<void()> fn);

  Simulator& sim_;
  StateContract& contract_;
  ContentStore& store_;
  MetricsSink* metrics_;
  NodeConfig cfg_;

  NodeId id_;
  KeyPair kp_;
  Rng rng_;
  Dataset train_data_;
  const Dataset* test_data_;

  LocalStateView state_;
  std::unique_ptr<PbftReplica> replica_;
  std::optional<AdversarySpec> adversary_;

  // Per-phase working state; cleared by enter_phase.
  uint64_t phase_gen_ = 0;
  int64_t phase_entered_at_ = 0;
  std::unique_ptr<TransitionDetector> detector_;
  uint64_t timer2_gen_ = 0;
  bool stage_ended_ = false;
  bool end_pending_work_ = false;
  std::optional<WorkProduct> work_product_;
  std::set<Digest> sent_end_hashes_;
  struct Collector {
    EndRequest end;
    Bytes result;
    std::vector<RequestTuple> originals;
    std::map<NodeId, ReplyMsg> replies;
  };
  std::map<Digest, Collector> collectors_;  // keyed by end hash
  bool proof_submitted_ = false;

  // Requests/PBFT messages for a (round, phase) we have not reached yet.
  struct Buffered {
    uint64_t round;
    Phase phase;
    WireMessage msg;
  };
  std::vector<Buffered> future_;

  // Replayer state: last round's own request, re-sent verbatim.
  std::optional<ConsensusRequest> captured_request_;

  Milli pool_estimate_ = 0;
  bool candidacy_sent_this_round_ = false;
  uint64_t replays_dropped_ = 0;
};

}  // namespace dfl
