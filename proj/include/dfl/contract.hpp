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

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dfl/committee.hpp"
#include "dfl/fl.hpp"
#include "dfl/incentives.hpp"
#include "dfl/messages.hpp"
#include "dfl/netsim.hpp"
#include "dfl/workflow.hpp"

namespace dfl {

// The simulated state contract: registration and fund pools, phase and round
// bookkeeping, transition-proof verification, batch debits, the accuracy-
// price curve, gas metering, event emission and immutable history. Calls are
// queued as transactions and mined at block ticks; reads are immediate.

struct AccuracyPriceCurve {
  std::vector<std::pair<double, Milli>> points;  // acc strictly increasing

  void validate() const;
  // Exact point -> its price; strictly between two points -> mean of their
  // prices; outside the range -> clamped to the nearest end.
  Milli price_of(double acc) const;
};

struct GasPolicy {
  int64_t base = 21000;
  int64_t per_signature = 3000;
  int64_t per_debit = 5000;
  // Micro-units of currency per gas unit: a full transition call should
  // cost a fraction of one round's pledge inflow.
  int64_t gas_price_micro = 10;

  Milli cost_of(int64_t gas_used) const { return gas_used * gas_price_micro / 1000; }
};

struct ContractConfig {
  AccuracyPriceCurve curve;
  Digest initial_global_model;
  DpConfig dp;
  bool dp_enabled = true;
  uint64_t elect_times = 2;
  ElectionConfig election;
  Milli registration_min = kMilli;
  Milli min_candidate_pledge = kMilli;
  PenaltyPolicy penalties;
  GasPolicy gas;
  Milli masternode_base_score = kMilli;     // PS in the masternode bonus
  Milli model_reward_budget = 10 * kMilli;  // per-round quality-reward budget
  Milli round_payout = 5 * kMilli;
  double malicious_rate = 0.5;  // n in the quality judgement
  int64_t block_interval_ms = 13000;
  bool stochastic_blocks = false;  // exponential inter-block gaps
  size_t max_event_payload = 1 << 20;
};

struct RegistrationRecord {
  PublicKey pk;
  Milli deposit = 0;
  uint64_t block = 0;
};

struct HistoryRecord {
  uint64_t round = 1;
  Phase phase = Phase::Pledge;
  Digest result_digest;
  Digest proof_digest;
  uint64_t block = 0;
  int64_t gas_used = 0;
  int64_t at_ms = 0;  // virtual time of finalization
};

struct SubmitOutcome {
  enum class Status : uint8_t { Accepted, DuplicateRejected, Rejected };
  Status status = Status::Rejected;
  std::string reason;
  int64_t gas_used = 0;
  Milli ts = 0;
  int replay_flagged = 0;
  int tuples_debited = 0;
};

struct ContractState {
  bool initialized = false;
  uint64_t round = 1;
  Phase phase = Phase::Pledge;
  std::map<NodeId, RegistrationRecord> registry;
  std::map<NodeId, Milli> fund_pools;
  CommitteeView committee;
  AccuracyPriceCurve curve;
  Digest global_model_digest;
  uint32_t global_model_score = 0;
  Milli global_model_price = 0;
  RewardLedger reward_ledger;
  std::vector<HistoryRecord> history;
  std::vector<EventRecord> events;
  // Round-scoped results.
  std::vector<std::pair<NodeId, Milli>> stake;
  std::vector<std::pair<NodeId, Digest>> submissions;
  // Score history feeding the election accuracy term: (sum, count).
  std::map<NodeId, std::pair<uint64_t, uint64_t>> score_history;
  // Conservation: sum(pools) + tm + payouts + gas burned == deposits.
  Milli total_deposits = 0;
  Milli total_payouts = 0;
  Milli total_gas_burned = 0;
  std::map<NodeId, Milli> payouts_by_node;

  Milli pool_of(const NodeId& n) const;
  Milli pools_sum() const;
  bool conservation_holds() const;
};

class StateContract {
 public:
  StateContract(Simulator& sim, ContractConfig cfg, uint64_t seed);

  static NodeId address() { return NodeId{}; }  // all-zero pseudo address

  // Genesis: register initial nodes, then initialize. initialize rejects
  // malformed configuration and double initialization.
  void register_genesis(const NodeId& node, const PublicKey& pk, Milli deposit);
  void initialize(const std::vector<NodeId>& genesis_committee);

  // Transactions: queued and executed at the next block tick.
  void submit_register_tx(const NodeId& node, const PublicKey& pk, Milli deposit);
  void submit_transition_tx(const NodeId& caller, TransitionProof proof,
                            std::vector<RequestTuple> originals);

  // Event subscription. A late subscriber receives the full backlog.
  void subscribe(const NodeId& node);

  // Direct call used by tests and by the scenario at genesis.
  EventRecord emit_event(const std::string& kind, Bytes payload);

  // Reads.
  const ContractState& state() const { return state_; }
  std::optional<HistoryRecord> query_history(uint64_t round, Phase phase) const;
  uint64_t block_number() const { return block_number_; }
  const std::vector<SubmitOutcome>& outcomes() const { return outcomes_; }

  // Exports.
  void export_event_log_jsonl(const std::string& path) const;
  void export_history_csv(const std::string& path) const;

  // Deterministic gas model: base + 3000 per reply signature checked +
  // 5000 per original tuple processed.
  int64_t meter_call(int reply_signatures, int tuples_processed) const;

  const ContractConfig& config() const { return cfg_; }

 private:
  struct PendingTx {
    enum class Kind : uint8_t { Register, Transition } kind;
    NodeId caller;
    PublicKey pk;  // Register
    Milli deposit = 0;
    TransitionProof proof;  // Transition
    std::vector<RequestTuple> originals;
  };

  void ensure_block_scheduled();
  void on_block_tick();
  int64_t next_block_gap_ms();
  void deliver_event(const NodeId& subscriber, const EventRecord& ev);
  void apply_register(const PendingTx& tx);
  SubmitOutcome apply_transition(const NodeId& caller, const TransitionProof& proof,
                                 const std::vector<RequestTuple>& originals);
  void finalize_phase(const NodeId& caller, const TransitionProof& proof,
                      PhaseResult effective, int reply_signatures, int tuples_processed,
                      Milli rs_count);
  // Moves min(amount, pool) from the node's pool into the reward pool.
  Milli charge_pool(const NodeId& node, Milli amount);
  void assert_conservation() const;

  Simulator& sim_;
  ContractConfig cfg_;
  ContractState state_;
  Rng block_rng_;
  uint64_t block_number_ = 0;
  bool tick_scheduled_ = false;
  std::vector<PendingTx> pending_;
  std::set<NodeId> subscribers_;
  uint64_t next_event_seq_ = 0;
  std::vector<SubmitOutcome> outcomes_;
};

}  // namespace dfl
