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

#include <filesystem>
#include <memory>
#include <string>

#include "dfl/contract.hpp"
#include "dfl/node.hpp"

namespace dfl {

// Flat key=value configuration with [sections]; '#' starts a comment.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  // Currency values are written in whole units and stored in milli-units.
  Milli get_money(const std::string& section, const std::string& key, Milli fallback) const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct AdversaryConfig {
  int node_index = 0;
  AdversaryBehavior behavior = AdversaryBehavior::Silent;
  uint64_t from_round = 1;
  uint64_t to_round = UINT64_MAX;
};

// Everything a run needs; every constraint from the protocol modules is
// validated up front so a bad config fails before any event runs.
struct ScenarioConfig {
  uint64_t seed = 42;
  uint64_t rounds = 3;
  int nodes = 10;
  bool genesis_committee = true;  // otherwise the run opens with an election

  ElectionConfig election;       // need, p
  uint64_t elect_times = 2;
  Milli registration_deposit = 500 * kMilli;
  Milli registration_min = kMilli;
  Milli participation_pledge = kMilli;
  Milli candidate_pledge = 2 * kMilli;
  Milli min_candidate_pledge = kMilli;
  PenaltyPolicy penalties;
  GasPolicy gas;
  Milli masternode_base_score = kMilli;
  Milli model_reward_budget = 10 * kMilli;
  Milli round_payout = 5 * kMilli;
  double malicious_rate = 0.5;
  AccuracyPriceCurve curve{{{0.5, 50 * kMilli}, {0.8, 100 * kMilli}, {0.9, 200 * kMilli}}};

  std::array<int64_t, 4> mt_ms{30'000, 30'000, 120'000, 120'000};
  int64_t aggregation_window_ms = 5'000;
  int64_t view_timeout_ms = 15'000;
  int64_t think_min_ms = 500;
  int64_t think_max_ms = 2'500;
  int64_t training_ms = 20'000;
  int64_t work_ms = 10'000;
  int64_t work_per_model_ms = 2'500;
  int64_t block_interval_ms = 13'000;
  bool stochastic_blocks = false;
  LatencyModel latency{50, 20, 0.0};
  ProcessingModel processing{2, 1};

  bool capture_trace = false;
  bool fl_enabled = true;
  int fl_classes = 3;
  int fl_features = 5;
  int fl_train_rows = 60;
  int fl_test_rows = 150;
  double fl_spread = 1.2;
  int fl_epochs = 30;
  double fl_lr = 0.5;
  std::string dataset = "blobs";  // blobs | moons | file:<path>
  bool dp_enabled = false;
  DpConfig dp{1.0, 1e-5, 1.0};

  std::vector<AdversaryConfig> adversaries;
  int64_t virtual_time_limit_ms = 0;  // 0: derived from rounds and mt

  static ScenarioConfig from_config(const ConfigFile& file);
  void validate() const;
  int64_t time_limit() const;
};

// ---- Metrics ----

struct IterationRow {
  uint64_t round = 0;
  int64_t start_ms = 0;
  int64_t end_ms = 0;
  std::array<int64_t, 4> phase_ms{-1, -1, -1, -1};
};

struct AccuracyRow {
  uint64_t round = 0;
  std::string node;
  uint32_t local = 0;
  uint32_t global = 0;
};

struct LatencyRow {
  Phase phase = Phase::Pledge;
  int64_t sent_ms = 0;
  int64_t executed_ms = 0;
};

struct MetricsBundle {
  std::vector<IterationRow> iterations;
  std::vector<AccuracyRow> accuracy;
  std::vector<LatencyRow> latencies;
  std::map<PbftKind, uint64_t> pbft_sent;
  uint64_t requests_sent = 0;
  uint64_t total_pbft_messages = 0;
  uint64_t replays_sent = 0;
  uint64_t replays_rejected = 0;  // primary-verification drops + contract flags
  uint64_t abandoned_submissions = 0;
  // Safety bookkeeping: per (round, phase), per honest node, the sequence of
  // executed request ids; honest sequences must be prefix-compatible.
  std::map<std::pair<uint64_t, Phase>, std::map<NodeId, std::vector<Digest>>> executions;
  // Honest reply digests per (round, phase, end-hash).
  std::map<std::tuple<uint64_t, Phase, Digest>, std::set<NodeId>> replies;

  uint64_t rounds_completed = 0;
  bool conservation_ok = false;
  bool deadlock = false;
  bool timed_out = false;
  int64_t end_time_ms = 0;
};

// Owns the whole simulated world for one scenario run.
class ScenarioRunner : public MetricsSink {
 public:
  explicit ScenarioRunner(ScenarioConfig cfg);
  ~ScenarioRunner() override;

  // Runs to completion (rounds reached, deadlock, or time limit).
  const MetricsBundle& run();

  const ScenarioConfig& config() const { return cfg_; }
  const StateContract& contract() const { return *contract_; }
  const MetricsBundle& metrics() const { return metrics_; }
  const std::vector<std::unique_ptr<SimNode>>& sim_nodes() const { return nodes_; }
  Simulator& simulator() { return *sim_; }
  bool node_is_honest(const NodeId& id) const;

  // Writes iterations/accuracy/latency/messages/incentives CSVs plus the
  // event log and trace exports into the directory.
  void write_outputs(const std::string& dir) const;

  // MetricsSink
  void on_request_sent(const Digest& id, Phase phase, const NodeId& sender,
                       int64_t t) override;
  void on_request_executed(const Digest& id, const NodeId& replica, int64_t t,
                           uint64_t round, Phase phase) override;
  void on_pbft_sent(PbftKind kind, const NodeId& sender, int64_t fanout) override;
  void on_reply_produced(const NodeId& node, uint64_t round, Phase phase,
                         const Digest& result_digest) override;
  void on_replay_dropped(const Digest& id, const NodeId& node) override;
  void on_replay_sent(const Digest& id, const NodeId& node) override;
  void on_submission_abandoned(const NodeId& node, uint64_t round) override;

 private:
  void build();
  void on_monitor_event(const EventRecord& ev);
  void finalize_metrics();

  ScenarioConfig cfg_;
  std::unique_ptr<Simulator> sim_;
  std::unique_ptr<ContentStore> store_;
  std::unique_ptr<StateContract> contract_;
  std::vector<std::unique_ptr<SimNode>> nodes_;
  Dataset test_data_;
  NodeId monitor_id_;
  std::set<NodeId> adversary_ids_;

  struct RequestTrace {
    Phase phase = Phase::Pledge;
    int64_t sent_ms = -1;
    int64_t first_executed_ms = -1;
  };
  std::map<Digest, RequestTrace> request_traces_;
  std::set<Digest> replay_ids_sent_;
  std::set<Digest> replay_ids_rejected_;
  struct Finalization {
    uint64_t round;
    Phase phase;
    int64_t at_ms;
    PhaseResult result;
  };
  std::vector<Finalization> finalizations_;
  struct LedgerSnapshot {
    uint64_t round;
    std::map<NodeId, Milli> scores;
    std::map<NodeId, Milli> payouts;
    std::map<std::pair<NodeId, OffenseKind>, int> offenses;
  };
  std::vector<LedgerSnapshot> ledger_snapshots_;
  MetricsBundle metrics_;
  bool ran_ = false;
};

// ---- CSV schemas ----

namespace csv_schema {
inline constexpr const char* kIterations =
    "round,start_ms,end_ms,duration_ms,elect_ms,pledge_ms,commit_ms,work_ms";
inline constexpr const char* kAccuracy = "round,node,local_score,global_score";
inline constexpr const char* kLatency = "phase,sent_ms,executed_ms,latency_ms";
inline constexpr const char* kMessages = "kind,count";
inline constexpr const char* kIncentives =
    "round,node,score,score_delta,payout,offense_unanswered,offense_low_quality";
inline constexpr const char* kHistory = "round,phase,result_digest,proof_digest,block,gas";
}  // namespace csv_schema

// True when every CSV in the directory matches its registered header.
bool self_check_outputs(const std::string& dir, std::string* diagnostic = nullptr);

}  // namespace dfl
