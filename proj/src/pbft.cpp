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

#include "dfl/pbft.hpp"

#include <algorithm>

namespace dfl {

PbftReplica::PbftReplica(NodeId self, KeyPair kp, Hooks hooks, Options opts)
    : self_(self), kp_(std::move(kp)), hooks_(std::move(hooks)), opts_(opts) {}

void PbftReplica::configure(const CommitteeView& committee,
                            std::map<NodeId, PublicKey> registry, uint64_t round,
                            Phase phase) {
  bool epoch_changed = committee.epoch != committee_.epoch || committee_.members.empty();
  committee_ = committee;
  registry_ = std::move(registry);
  round_ = round;
  phase_ = phase;
  if (epoch_changed) view_ = 0;
  committee_.view_changes = view_;

  log_.clear();
  next_seq_ = 1;
  exec_next_ = 1;
  pending_.clear();
  pending_order_.clear();
  batched_.clear();
  executed_ids_.clear();
  executed_order_.clear();
  window_open_ = false;
  vc_msgs_.clear();
  vc_requested_ = view_;
}

NodeId PbftReplica::master_of(uint32_t view) const {
  CommitteeView v = committee_;
  v.view_changes = view;
  return select_master(v);
}

int PbftReplica::fault_limit() const {
  return fault_threshold(static_cast<int>(committee_.members.size()));
}

const PublicKey* PbftReplica::key_of(const NodeId& n) const {
  auto it = registry_.find(n);
  return it == registry_.end() ? nullptr : &it->second;
}

PbftMessage PbftReplica::make_message(PbftKind kind, uint64_t seq, const Digest& req_id,
                                      Bytes extra) {
  PbftMessage msg;
  msg.kind = kind;
  msg.epoch = committee_.epoch;
  msg.round = round_;
  msg.phase = phase_;
  msg.view = view_;
  msg.seq = seq;
  msg.req_id = req_id;
  msg.sender = self_;
  msg.extra = std::move(extra);
  msg.sign_with(kp_);
  return msg;
}

void PbftReplica::broadcast(PbftMessage msg) {
  switch (msg.kind) {
    case PbftKind::PrePrepare: ++stats_.preprepares_sent; break;
    case PbftKind::Prepare: ++stats_.prepares_sent; break;
    case PbftKind::Commit: ++stats_.commits_sent; break;
    case PbftKind::ViewChange: ++stats_.view_changes_sent; break;
  }
  hooks_.broadcast(msg);
}

void PbftReplica::submit_request(const ConsensusRequest& req) {
  if (!active()) return;
  if (executed_ids_.count(req.id) || pending_.count(req.id)) return;
  pending_.emplace(req.id, req);
  pending_order_.push_back(req.id);
  arm_request_timeout(req.id);
  if (is_master()) open_window_if_needed();
}

void PbftReplica::arm_request_timeout(const Digest& id) {
  uint32_t view_at_intake = view_;
  hooks_.schedule(opts_.view_timeout_ms, [this, id, view_at_intake] {
    if (!active()) return;
    if (!pending_.count(id)) return;  // executed or cleared meanwhile
    if (view_ != view_at_intake) {
      arm_request_timeout(id);  // give the new master its own timeout
      return;
    }
    initiate_view_change();
    arm_request_timeout(id);
  });
}

void PbftReplica::open_window_if_needed() {
  if (window_open_) return;
  bool has_unbatched = false;
  for (const auto& id : pending_order_)
    if (pending_.count(id) && !batched_.count(id)) has_unbatched = true;
  if (!has_unbatched) return;
  window_open_ = true;
  hooks_.schedule(opts_.aggregation_window_ms, [this] {
    window_open_ = false;
    if (is_master()) cut_batch();
  });
}

void PbftReplica::cut_batch() {
  RequestBatch batch;
  for (const auto& id : pending_order_) {
    auto it = pending_.find(id);
    if (it == pending_.end() || batched_.count(id)) continue;
    batch.requests.push_back(it->second);
    batched_.insert(id);
  }
  if (batch.requests.empty()) return;
  propose(next_seq_++, std::move(batch));
  open_window_if_needed();  // anything that arrived mid-cut
}

void PbftReplica::propose(uint64_t seq, RequestBatch batch) {
  if (!opts_.equivocate || committee_.members.size() < 2 || batch.requests.size() < 1) {
    Digest d = batch.digest_of();
    Instance& inst = log_[seq];
    inst.have_batch = true;
    inst.batch = batch;
    inst.batch_digest = d;
    inst.view = view_;
    broadcast(make_message(PbftKind::PrePrepare, seq, d, encode(batch)));
    check_progress(seq);
    return;
  }

  // Equivocating master: half the committee sees the full batch, the other
  // half sees a conflicting one at the same (view, seq).
  RequestBatch alt = batch;
  if (alt.requests.size() > 1) {
    alt.requests.pop_back();
  } else {
    alt.requests.clear();
  }
  Instance& inst = log_[seq];
  inst.have_batch = true;
  inst.batch = batch;
  inst.batch_digest = batch.digest_of();
  inst.view = view_;
  PbftMessage full = make_message(PbftKind::PrePrepare, seq, batch.digest_of(), encode(batch));
  PbftMessage altm = make_message(PbftKind::PrePrepare, seq, alt.digest_of(), encode(alt));
  ++stats_.preprepares_sent;
  if (hooks_.send_split) hooks_.send_split(full, altm);
}

void PbftReplica::on_message(const PbftMessage& msg) {
  if (!active()) return;
  if (msg.epoch != committee_.epoch) return;
  if (!committee_.contains(msg.sender) || msg.sender == self_) return;
  const PublicKey* pk = key_of(msg.sender);
  if (!pk || !msg.verify_sig(*pk)) {
    ++stats_.invalid_dropped;
    return;
  }
  if (msg.kind != PbftKind::ViewChange && (msg.round != round_ || msg.phase != phase_))
    return;  // node-level buffering feeds us only current-scope messages

  switch (msg.kind) {
    case PbftKind::PrePrepare: handle_preprepare(msg); break;
    case PbftKind::Prepare: handle_prepare(msg); break;
    case PbftKind::Commit: handle_commit(msg); break;
    case PbftKind::ViewChange: handle_view_change(msg); break;
  }
}

void PbftReplica::handle_preprepare(const PbftMessage& msg) {
  if (msg.view != view_) return;
  if (msg.sender != master_of(msg.view)) return;

  auto batch = try_decode<RequestBatch>(msg.extra);
  if (!batch || batch->digest_of() != msg.req_id) {
    ++stats_.invalid_dropped;
    return;
  }

  Instance& inst = log_[msg.seq];
  if (inst.executed) return;
  if (inst.have_batch && inst.view == msg.view && inst.batch_digest != msg.req_id) {
    // Conflicting PrePrepares in one (view, seq): equivocation evidence.
    ++stats_.equivocations_observed;
    initiate_view_change();
    return;
  }
  if (inst.have_batch && inst.batch_digest == msg.req_id && inst.prepare_sent) return;

  inst.have_batch = true;
  inst.batch = std::move(*batch);
  inst.batch_digest = msg.req_id;
  inst.view = msg.view;
  if (!inst.prepare_sent) {
    inst.prepare_sent = true;
    inst.prepare_votes[msg.req_id].insert(self_);
    broadcast(make_message(PbftKind::Prepare, msg.seq, msg.req_id, {}));
  }
  check_progress(msg.seq);
}

void PbftReplica::handle_prepare(const PbftMessage& msg) {
  if (msg.view != view_) return;
  if (msg.sender == master_of(msg.view)) return;  // the master never prepares
  Instance& inst = log_[msg.seq];
  if (inst.executed) return;
  inst.prepare_votes[msg.req_id].insert(msg.sender);
  check_foreign_votes(inst);
  check_progress(msg.seq);
}

void PbftReplica::handle_commit(const PbftMessage& msg) {
  if (msg.view != view_) return;
  Instance& inst = log_[msg.seq];
  if (inst.executed) return;
  inst.commit_votes[msg.req_id].insert(msg.sender);
  check_foreign_votes(inst);
  check_progress(msg.seq);
}

void PbftReplica::check_foreign_votes(const Instance& inst) {
  if (!inst.have_batch) return;
  // F+1 distinct voters behind a digest we never saw pre-prepared means at
  // least one honest replica accepted a conflicting proposal.
  if (inst.foreign_voters(inst.batch_digest) >=
      static_cast<size_t>(fault_limit() + 1)) {
    ++stats_.equivocations_observed;
    initiate_view_change();
  }
}

void PbftReplica::check_progress(uint64_t seq) {
  auto it = log_.find(seq);
  if (it == log_.end()) return;
  Instance& inst = it->second;
  if (!inst.have_batch || inst.executed) return;
  const int f = fault_limit();

  // prepared: the batch plus 2F matching prepares from distinct replicas
  // (a backup counts its own; the master never prepares).
  bool prepared = inst.prepares_for(inst.batch_digest) >= static_cast<size_t>(2 * f);

  if (prepared && !inst.commit_sent) {
    inst.commit_sent = true;
    inst.commit_votes[inst.batch_digest].insert(self_);
    broadcast(make_message(PbftKind::Commit, seq, inst.batch_digest, {}));
  }
  try_execute();
}

void PbftReplica::try_execute() {
  const int f = fault_limit();
  while (true) {
    auto it = log_.find(exec_next_);
    if (it == log_.end()) return;
    Instance& inst = it->second;
    if (!inst.have_batch || inst.executed) return;
    bool committed = inst.commit_sent &&
                     inst.commits_for(inst.batch_digest) >= static_cast<size_t>(2 * f + 1);
    if (!committed) return;
    inst.executed = true;
    for (const auto& req : inst.batch.requests) {
      if (executed_ids_.count(req.id)) continue;
      if (req.id != digest(req.payload)) continue;
      const PublicKey* pk = key_of(req.sender);
      if (!pk || !req.verify_sig(*pk)) continue;
      executed_ids_.insert(req.id);
      executed_order_.push_back(req);
      pending_.erase(req.id);
      hooks_.on_executed(req);
    }
    ++exec_next_;
  }
}

void PbftReplica::handle_view_change(const PbftMessage& msg) {
  if (msg.view <= view_) return;
  auto payload = try_decode<ViewChangePayload>(msg.extra);
  if (!payload) {
    ++stats_.invalid_dropped;
    return;
  }
  vc_msgs_[msg.view][msg.sender] = *payload;

  const int f = fault_limit();
  const auto& votes = vc_msgs_[msg.view];
  // Join a view change once F+1 members demand it.
  if (votes.size() >= static_cast<size_t>(f + 1) && vc_requested_ < msg.view)
    send_view_change(msg.view);
  size_t have = votes.size() + (vc_requested_ >= msg.view ? 1 : 0);
  if (have >= static_cast<size_t>(2 * f + 1)) enter_view(msg.view);
}

void PbftReplica::initiate_view_change() {
  send_view_change(view_ + 1);
  const int f = fault_limit();
  auto it = vc_msgs_.find(view_ + 1);
  size_t have = 1 + (it == vc_msgs_.end() ? 0 : it->second.size());
  if (have >= static_cast<size_t>(2 * f + 1)) enter_view(view_ + 1);
}

void PbftReplica::send_view_change(uint32_t v) {
  if (vc_requested_ >= v) return;
  vc_requested_ = v;
  ViewChangePayload payload;
  for (const auto& [seq, inst] : log_) {
    if (!inst.have_batch || inst.executed) continue;
    const int f = fault_limit();
    if (inst.prepares_for(inst.batch_digest) < static_cast<size_t>(2 * f)) continue;
    payload.prepared.push_back(PreparedCert{inst.view, seq, encode(inst.batch)});
  }
  own_vc_payload_[v] = payload;
  PbftMessage msg = make_message(PbftKind::ViewChange, 0, Digest{}, encode(payload));
  msg.view = v;
  msg.sign_with(kp_);
  broadcast(std::move(msg));
}

void PbftReplica::enter_view(uint32_t v) {
  if (v <= view_) return;
  // Gather prepared certs from the quorum before clearing.
  std::map<uint64_t, PreparedCert> best;
  auto consider = [&](const ViewChangePayload& p) {
    for (const auto& cert : p.prepared) {
      auto it = best.find(cert.seq);
      if (it == best.end() || cert.view > it->second.view) best[cert.seq] = cert;
    }
  };
  for (uint32_t u = view_ + 1; u <= v; ++u) {
    auto it = vc_msgs_.find(u);
    if (it != vc_msgs_.end())
      for (const auto& [sender, payload] : it->second) consider(payload);
    auto own = own_vc_payload_.find(u);
    if (own != own_vc_payload_.end()) consider(own->second);
  }

  view_ = v;
  committee_.view_changes = v;
  for (auto& [seq, inst] : log_) {
    if (inst.executed) continue;
    inst.reset_votes();
  }
  batched_.clear();
  if (hooks_.on_view_change) hooks_.on_view_change(v);

  if (is_master()) {
    // Re-propose prepared instances at their sequence numbers, then fold
    // every pending request into a fresh batch.
    uint64_t max_seq = next_seq_ - 1;
    for (const auto& [seq, cert] : best) {
      if (seq < exec_next_) continue;  // already executed here
      auto batch = try_decode<RequestBatch>(cert.batch);
      if (!batch) continue;
      for (const auto& req : batch->requests) batched_.insert(req.id);
      propose(seq, std::move(*batch));
      max_seq = std::max(max_seq, seq);
    }
    next_seq_ = std::max(next_seq_, max_seq + 1);
    RequestBatch rest;
    for (const auto& id : pending_order_) {
      auto it = pending_.find(id);
      if (it == pending_.end() || batched_.count(id)) continue;
      rest.requests.push_back(it->second);
      batched_.insert(id);
    }
    if (!rest.requests.empty()) propose(next_seq_++, std::move(rest));
  }
}

}  // namespace dfl
