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
#include <map>
#include <set>
#include <vector>

#include "dfl/committee.hpp"
#include "dfl/crypto.hpp"
#include "dfl/messages.hpp"

namespace dfl {

// One PBFT replica, scoped to the current (epoch, round, phase). The master
// batches requests arriving within the aggregation window into one instance;
// replicas run the classic PrePrepare / Prepare / Commit exchange and
// execute committed batches in sequence order. Logs are truncated wholesale
// when the contract finalizes the phase; a replica that lost an instance to
// drops simply stalls until the state-change event resynchronizes it.
class PbftReplica {
 public:
  struct Hooks {
    std::function<void(const PbftMessage&)> broadcast;  // to other members
    // Equivocation delivery: first message to one half of the committee,
    // second to the other half. Only a Byzantine master uses this.
    std::function<void(const PbftMessage&, const PbftMessage&)> send_split;
    // One committed request at a time, in sequence order, deduplicated.
    std::function<void(const ConsensusRequest&)> on_executed;
    std::function<void(uint32_t view)> on_view_change;
    std::function<void(int64_t delay_ms, std::function<void()>)> schedule;
    std::function<int64_t()> now;
  };

  struct Options {
    int64_t aggregation_window_ms = 5000;
    int64_t view_timeout_ms = 15000;
    bool equivocate = false;  // Byzantine master: conflicting PrePrepares
  };

  PbftReplica(NodeId self, KeyPair kp, Hooks hooks, Options opts);

  // Phase advance or committee switch: adopt the view and wipe the log.
  // In-flight instances from the old scope are dropped; the view counter
  // survives phase changes within an epoch and resets on a new epoch.
  void configure(const CommitteeView& committee, std::map<NodeId, PublicKey> registry,
                 uint64_t round, Phase phase);

  bool active() const { return committee_.contains(self_); }
  bool is_master() const { return active() && master_of(view_) == self_; }
  NodeId master() const { return master_of(view_); }
  uint32_t view() const { return view_; }
  uint64_t epoch() const { return committee_.epoch; }

  // Primary-verified request intake (both participant payloads and wrapped
  // End requests travel this path).
  void submit_request(const ConsensusRequest& req);
  void on_message(const PbftMessage& msg);

  const std::vector<ConsensusRequest>& executed() const { return executed_order_; }
  size_t pending_count() const { return pending_order_.size(); }

  struct Stats {
    uint64_t preprepares_sent = 0;
    uint64_t prepares_sent = 0;
    uint64_t commits_sent = 0;
    uint64_t view_changes_sent = 0;
    uint64_t equivocations_observed = 0;
    uint64_t invalid_dropped = 0;
  };
  const Stats& stats() const { return stats_; }

 private:
  struct Instance {
    bool have_batch = false;
    RequestBatch batch;
    Digest batch_digest;
    uint32_t view = 0;
    // Votes bucketed by digest: quorums count only matching votes, and F+1
    // distinct voters behind a foreign digest expose master equivocation.
    std::map<Digest, std::set<NodeId>> prepare_votes;
    std::map<Digest, std::set<NodeId>> commit_votes;
    bool prepare_sent = false;
    bool commit_sent = false;
    bool executed = false;

    size_t prepares_for(const Digest& d) const {
      auto it = prepare_votes.find(d);
      return it == prepare_votes.end() ? 0 : it->second.size();
    }
    size_t commits_for(const Digest& d) const {
      auto it = commit_votes.find(d);
      return it == commit_votes.end() ? 0 : it->second.size();
    }
    size_t foreign_voters(const Digest& mine) const {
      std::set<NodeId> voters;
      for (const auto& [d, who] : prepare_votes)
        if (d != mine) voters.insert(who.begin(), who.end());
      for (const auto& [d, who] : commit_votes)
        if (d != mine) voters.insert(who.begin(), who.end());
      return voters.size();
    }
    void reset_votes() {
      prepare_votes.clear();
      commit_votes.clear();
      prepare_sent = false;
      commit_sent = false;
    }
  };

  NodeId master_of(uint32_t view) const;
  int fault_limit() const;
  const PublicKey* key_of(const NodeId& n) const;
  PbftMessage make_message(PbftKind kind, uint64_t seq, const Digest& req_id, Bytes extra);
  void broadcast(PbftMessage msg);

  void open_window_if_needed();
  void cut_batch();
  void propose(uint64_t seq, RequestBatch batch);
  void handle_preprepare(const PbftMessage& msg);
  void handle_prepare(const PbftMessage& msg);
  void handle_commit(const PbftMessage& msg);
  void handle_view_change(const PbftMessage& msg);
  void check_foreign_votes(const Instance& inst);
  void check_progress(uint64_t seq);
  void try_execute();
  void arm_request_timeout(const Digest& id);
  void initiate_view_change();
  void send_view_change(uint32_t v);
  void enter_view(uint32_t v);

  NodeId self_;
  KeyPair kp_;
  Hooks hooks_;
  Options opts_;

  CommitteeView committee_;
  std::map<NodeId, PublicKey> registry_;
  uint64_t round_ = 1;
  Phase phase_ = Phase::Pledge;
  uint32_t view_ = 0;

  std::map<uint64_t, Instance> log_;
  uint64_t next_seq_ = 1;
  uint64_t exec_next_ = 1;
  std::map<Digest, ConsensusRequest> pending_;
  std::vector<Digest> pending_order_;
  std::set<Digest> batched_;   // master-side: already proposed this view
  std::set<Digest> executed_ids_;
  std::vector<ConsensusRequest> executed_order_;
  bool window_open_ = false;

  // view -> sender -> certs from that sender
  std::map<uint32_t, std::map<NodeId, ViewChangePayload>> vc_msgs_;
  std::map<uint32_t, ViewChangePayload> own_vc_payload_;
  uint32_t vc_requested_ = 0;  // highest view we voted for

  Stats stats_;
};

}  // namespace dfl
