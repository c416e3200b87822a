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

#include "dfl/node.hpp"

#include <algorithm>

namespace dfl {

namespace {

// Position of (round, phase) in the global phase order.
int64_t position(uint64_t round, Phase phase) {
  return int64_t(round) * 4 + int64_t(phase);
}

}  // namespace

SimNode::SimNode(Simulator& sim, StateContract& contract, ContentStore& store,
                 MetricsSink* metrics, NodeConfig cfg, uint64_t identity_seed,
                 Dataset train_data, const Dataset* shared_test)
    : sim_(sim),
      contract_(contract),
      store_(store),
      metrics_(metrics),
      cfg_(cfg),
      rng_(Rng::derive(identity_seed, "node")),
      train_data_(std::move(train_data)),
      test_data_(shared_test) {
  auto [id, kp] = generate_identity(identity_seed);
  id_ = id;
  kp_ = kp;
  rebuild_replica(false);
}

void SimNode::rebuild_replica(bool equivocate) {
  PbftReplica::Hooks hooks;
  hooks.broadcast = [this](const PbftMessage& msg) {
    if (silent()) return;
    if (metrics_)
      metrics_->on_pbft_sent(msg.kind, id_,
                             int64_t(state_.committee.members.size()) - 1);
    sim_.broadcast(id_, state_.committee.members, wire_encode(WireMessage{msg}));
  };
  hooks.send_split = [this](const PbftMessage& a, const PbftMessage& b) {
    if (silent()) return;
    size_t i = 0;
    for (const auto& m : state_.committee.members) {
      if (m == id_) continue;
      sim_.send(id_, m, wire_encode(WireMessage{(i % 2 == 0) ? a : b}));
      ++i;
    }
    if (metrics_)
      metrics_->on_pbft_sent(PbftKind::PrePrepare, id_,
                             int64_t(state_.committee.members.size()) - 1);
  };
  hooks.on_executed = [this](const ConsensusRequest& req) { on_request_executed(req); };
  hooks.on_view_change = [this](uint32_t v) { state_.committee.view_changes = v; };
  hooks.schedule = [this](int64_t delay, std::function<void()> fn) {
    sim_.schedule_timer(delay, std::move(fn));
  };
  hooks.now = [this] { return sim_.now(); };

  PbftReplica::Options opts;
  opts.aggregation_window_ms = cfg_.aggregation_window_ms;
  opts.view_timeout_ms = cfg_.view_timeout_ms;
  opts.equivocate = equivocate;
  replica_ = std::make_unique<PbftReplica>(id_, kp_, std::move(hooks), opts);
}

void SimNode::start() {
  if (adversary_ && adversary_->behavior == AdversaryBehavior::EquivocatingMaster)
    rebuild_replica(true);
  sim_.add_node(id_, [this](const Envelope& env) { on_envelope(env); });
  contract_.subscribe(id_);
}

void SimNode::on_envelope(const Envelope& env) {
  if (env.src == StateContract::address()) {
    auto ev = try_decode<EventRecord>(env.payload);
    if (ev) on_contract_event(*ev);
    return;
  }
  auto msg = wire_decode(env.payload);
  if (!msg) return;
  std::visit(
      [&](auto&& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConsensusRequest>) {
          on_wire_request(m);
        } else if constexpr (std::is_same_v<T, PbftMessage>) {
          on_pbft_message(m);
        } else if constexpr (std::is_same_v<T, ReplyMsg>) {
          on_reply(m);
        }
        // Bare EndRequests never travel unwrapped.
      },
      *msg);
}

void SimNode::on_contract_event(const EventRecord& ev) {
  if (ev.kind == event_kind::kInitialized) {
    auto init = try_decode<InitEvent>(ev.payload);
    if (!init) return;
    for (const auto& [node, pk] : init->registry) state_.registry[node] = pk;
    state_.committee = init->committee;
    state_.round = init->round;
    state_.phase = init->phase;
    state_.global_model = init->initial_global_model;
    enter_phase();
    return;
  }
  if (ev.kind == event_kind::kRegistered) {
    auto reg = try_decode<RegisteredEvent>(ev.payload);
    if (reg) state_.registry[reg->node] = reg->pk;
    return;
  }
  if (ev.kind == event_kind::kPhaseFinalized) {
    auto fin = try_decode<PhaseFinalizedEvent>(ev.payload);
    if (!fin) return;

    // Pool estimate upkeep (node-side balance heuristic).
    if (fin->phase == Phase::Pledge) {
      auto result = try_decode<PhaseResult>(fin->result);
      if (result) {
        for (const auto& [node, money] : std::get<PledgeResult>(result->body).stake)
          if (node == id_) pool_estimate_ -= money;
      }
    } else if (fin->phase == Phase::Elect && candidacy_sent_this_round_) {
      pool_estimate_ -= cfg_.candidate_pledge;
    }
    if (fin->caller == id_)
      pool_estimate_ -= Milli(fin->gas_used) * cfg_.gas_price_micro / 1000;
    if (pool_estimate_ < 0) pool_estimate_ = 0;

    if (state_.apply_finalized(*fin)) enter_phase();
  }
}

void SimNode::enter_phase() {
  ++phase_gen_;
  ++timer2_gen_;
  phase_entered_at_ = sim_.now();
  stage_ended_ = false;
  end_pending_work_ = false;
  work_product_.reset();
  sent_end_hashes_.clear();
  collectors_.clear();
  proof_submitted_ = false;
  if (state_.phase == Phase::Pledge) candidacy_sent_this_round_ = false;

  uint32_t tot = 0;
  switch (state_.phase) {
    case Phase::Elect:
    case Phase::Pledge:
      tot = uint32_t(state_.registry.size());
      break;
    case Phase::Commit:
      tot = uint32_t(state_.stake.size());
      break;
    case Phase::Work:
      tot = uint32_t(state_.committee.members.size());
      break;
  }

  replica_->configure(state_.committee, state_.registry, state_.round, state_.phase);
  state_.committee.view_changes = replica_->view();

  if (is_member()) {
    detector_ = std::make_unique<TransitionDetector>(cfg_.mt_ms[size_t(state_.phase)], tot);
    on_detector_action(detector_->on_stage_start(sim_.now()));
    schedule_in_phase(cfg_.mt_ms[size_t(state_.phase)], [this] {
      if (detector_) on_detector_action(detector_->on_timer1());
    });
  } else {
    detector_.reset();
  }

  drain_future_buffer();
  schedule_participation();
}

void SimNode::drain_future_buffer() {
  std::vector<Buffered> keep;
  for (auto& buf : future_) {
    int64_t pos = position(buf.round, buf.phase);
    int64_t here = position(state_.round, state_.phase);
    if (pos > here) {
      keep.push_back(std::move(buf));
    } else if (pos == here) {
      std::visit(
          [&](auto&& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConsensusRequest>)
              on_wire_request(m);
            else if constexpr (std::is_same_v<T, PbftMessage>)
              on_pbft_message(m);
          },
          buf.msg);
    }
    // Stale entries drop out.
  }
  future_ = std::move(keep);
}

int64_t SimNode::think_delay() {
  return cfg_.think_min_ms +
         int64_t(rng_.uniform_u64(uint64_t(cfg_.think_max_ms - cfg_.think_min_ms + 1)));
}

void SimNode::schedule_in_phase(int64_t delay, std::function<void()> fn) {
  uint64_t gen = phase_gen_;
  sim_.schedule_timer(delay, [this, gen, fn = std::move(fn)] {
    if (gen == phase_gen_) fn();
  });
}

void SimNode::schedule_participation() {
  switch (state_.phase) {
    case Phase::Elect: {
      if (!cfg_.run_for_committee) break;
      if (pool_estimate_ < cfg_.candidate_pledge) break;
      uint32_t claimed = uint32_t(state_.historical_acc(id_) * 1000.0);
      schedule_in_phase(think_delay(), [this, claimed] {
        candidacy_sent_this_round_ = true;
        send_phase_request(build_elect_request(state_.round, id_, kp_,
                                               cfg_.candidate_pledge, claimed));
      });
      break;
    }
    case Phase::Pledge: {
      if (pool_estimate_ < cfg_.participation_pledge) break;
      schedule_in_phase(think_delay(), [this] {
        ConsensusRequest req =
            build_pledge_request(state_.round, id_, kp_, cfg_.participation_pledge);
        if (behaving(AdversaryBehavior::Replayer) && captured_request_) {
          if (metrics_) metrics_->on_replay_sent(captured_request_->id, id_);
          send_phase_request(*captured_request_);
        }
        captured_request_ = req;
        send_phase_request(req);
      });
      break;
    }
    case Phase::Commit: {
      if (!state_.in_stake_list(id_)) break;
      if (behaving(AdversaryBehavior::NoSubmitAfterPledge)) break;
      start_training();
      break;
    }
    case Phase::Work: {
      if (is_member()) start_work();
      break;
    }
  }
}

void SimNode::send_phase_request(const ConsensusRequest& req) {
  if (silent()) return;
  if (metrics_) {
    auto payload = try_decode<PhasePayload>(req.payload);
    if (payload)
      metrics_->on_request_sent(req.id, payload->tuple.status, id_, sim_.now());
  }
  Bytes wire = wire_encode(WireMessage{req});
  sim_.broadcast(id_, state_.committee.members, wire);
  if (is_member()) on_wire_request(req);  // self-delivery
}

void SimNode::start_training() {
  // Virtual training duration with per-node jitter; machines differ.
  schedule_in_phase(cfg_.training_ms + think_delay(), [this] { finish_training(); });
}

void SimNode::finish_training() {
  if (sim_.now() - phase_entered_at_ > cfg_.mt_ms[size_t(Phase::Commit)] || stage_ended_) {
    // Too late to submit this round; the node bears the consequence.
    if (metrics_) metrics_->on_submission_abandoned(id_, state_.round);
    return;
  }
  ModelParams submitted;
  if (behaving(AdversaryBehavior::LowQualitySubmitter)) {
    ModelParams global = fetch_model(state_.global_model);
    submitted = global;
    for (Eigen::Index i = 0; i < submitted.weights.size(); ++i)
      submitted.weights[i] = rng_.normal(0, 10.0);
  } else if (cfg_.fl_enabled) {
    ModelParams global = fetch_model(state_.global_model);
    ModelParams trained = train_local(global, train_data_, cfg_.epochs, cfg_.lr,
                                      state_.round * 1000003 + id_.bytes[0]);
    if (cfg_.dp_enabled) {
      ModelParams delta = trained;
      delta.weights -= global.weights;
      ModelParams noised =
          add_dp_noise(delta, cfg_.dp, state_.round * 7919 + id_.bytes[1]);
      submitted = global;
      submitted.weights += noised.weights;
    } else {
      submitted = trained;
    }
  } else {
    submitted = fetch_model(state_.global_model);
  }
  Digest d = store_.put(encode(submitted));
  send_phase_request(build_commit_request(state_.round, id_, kp_, d));
}

void SimNode::start_work() {
  // Evaluation cost grows with the number of submitted sub-models.
  int64_t duration =
      cfg_.work_ms + cfg_.work_per_model_ms * int64_t(state_.submissions.size());
  schedule_in_phase(duration + think_delay(), [this] { finish_work(); });
}

void SimNode::finish_work() {
  if (work_product_) return;
  WorkProduct product;
  std::vector<std::pair<ModelParams, double>> parts;
  for (const auto& [owner, d] : state_.submissions) {
    const Bytes* bytes = store_.get(d);
    uint32_t score = 0;
    if (bytes) {
      auto params = try_decode<ModelParams>(*bytes);
      if (params && cfg_.fl_enabled && test_data_ &&
          params->dims.features == test_data_->features.cols()) {
        score = uint32_t(evaluate(*params, *test_data_).value);
        parts.emplace_back(std::move(*params), 1.0);
      } else if (params && !cfg_.fl_enabled) {
        parts.emplace_back(std::move(*params), 1.0);
      }
    }
    product.submodel_scores.emplace_back(owner, score);
  }
  if (!parts.empty()) {
    ModelParams global = fed_avg(parts);
    product.global_digest = store_.put(encode(global));
    product.global_score =
        cfg_.fl_enabled && test_data_ ? uint32_t(evaluate(global, *test_data_).value) : 0;
  } else {
    product.global_digest = state_.global_model;
    const Bytes* prior = store_.get(state_.global_model);
    if (prior && cfg_.fl_enabled && test_data_) {
      auto params = try_decode<ModelParams>(*prior);
      if (params && params->dims.features == test_data_->features.cols())
        product.global_score = uint32_t(evaluate(*params, *test_data_).value);
    }
  }
  work_product_ = std::move(product);

  send_phase_request(build_work_request(state_.round, id_, kp_, *work_product_));
  if (end_pending_work_) {
    end_pending_work_ = false;
    on_stage_end();
  }
}

ModelParams SimNode::fetch_model(const Digest& d) const {
  const Bytes* bytes = store_.get(d);
  if (bytes) {
    auto params = try_decode<ModelParams>(*bytes);
    if (params) return *params;
  }
  // Unknown digest: fall back to a zero model of the local shape.
  ModelDims dims{int(train_data_.features.cols()),
                 int(train_data_.labels.size() ? train_data_.labels.maxCoeff() + 1 : 2)};
  return ModelParams::zeros(dims);
}

void SimNode::on_wire_request(const ConsensusRequest& req) {
  if (!is_member()) return;
  const PublicKey* pk = state_.key_of(req.sender);
  if (!pk || !req.verify_sig(*pk)) return;

  // Wrapped End request?
  if (auto end = try_decode<EndRequest>(req.payload)) {
    if (end->address != req.sender) return;
    if (!end->verify_sig(*pk)) return;
    if (end->type != state_.phase) {
      if (int(end->type) > int(state_.phase) ||
          state_.phase == Phase::Work) {  // next phase, maybe next round
        uint64_t round = int(end->type) > int(state_.phase) ? state_.round : state_.round + 1;
        future_.push_back(Buffered{round, end->type, WireMessage{req}});
      }
      return;
    }
    replica_->submit_request(req);
    return;
  }

  auto payload = try_decode<PhasePayload>(req.payload);
  if (!payload) return;
  if (payload->tuple.address != req.sender) return;

  int64_t pos = position(payload->tuple.it, payload->tuple.status);
  int64_t here = position(state_.round, state_.phase);
  if (pos < here) {
    ++replays_dropped_;
    if (metrics_) metrics_->on_replay_dropped(req.id, id_);
    return;
  }
  if (pos > here) {
    future_.push_back(Buffered{payload->tuple.it, payload->tuple.status, WireMessage{req}});
    return;
  }

  // Primary verification: registration and signature only, plus phase
  // eligibility; balances are the contract's business.
  switch (state_.phase) {
    case Phase::Commit:
      if (!state_.in_stake_list(req.sender)) return;
      break;
    case Phase::Work:
      if (!state_.committee.contains(req.sender)) return;
      break;
    default:
      break;
  }

  if (detector_ && !detector_->ended()) {
    on_detector_action(detector_->on_arrival(sim_.now()));
  } else if (detector_) {
    detector_->on_arrival(sim_.now());  // late extras still counted
  }
  replica_->submit_request(req);
}

void SimNode::on_pbft_message(const PbftMessage& msg) {
  if (!is_member()) return;
  if (msg.kind != PbftKind::ViewChange) {
    int64_t pos = position(msg.round, msg.phase);
    int64_t here = position(state_.round, state_.phase);
    if (pos > here) {
      future_.push_back(Buffered{msg.round, msg.phase, WireMessage{msg}});
      return;
    }
    if (pos < here) return;
  }
  replica_->on_message(msg);
}

void SimNode::on_request_executed(const ConsensusRequest& req) {
  if (metrics_)
    metrics_->on_request_executed(req.id, id_, sim_.now(), state_.round, state_.phase);
  if (auto end = try_decode<EndRequest>(req.payload)) handle_end_executed(*end);
}

std::optional<PhaseResult> SimNode::local_result(std::vector<RequestTuple>* accepted,
                                                 std::vector<RequestTuple>* flagged) {
  if (state_.phase == Phase::Work && !work_product_) return std::nullopt;
  ResultInputs in;
  in.prior = &state_;
  in.election = cfg_.election;
  in.min_candidate_pledge = cfg_.min_candidate_pledge;
  in.own_work = work_product_ ? &*work_product_ : nullptr;
  in.pbft_view = replica_->view();
  return compute_phase_result(state_.phase, state_.round, replica_->executed(), in,
                              flagged, accepted);
}

void SimNode::handle_end_executed(const EndRequest& end) {
  if (end.type != state_.phase) return;

  std::vector<RequestTuple> accepted, flagged;
  auto result = local_result(&accepted, &flagged);
  if (!result) return;  // work product not ready; cannot attest

  Bytes result_bytes = encode(*result);
  Digest my_hash = digest(result_bytes);

  if (behaving(AdversaryBehavior::WrongHashReplier)) {
    ReplyMsg reply;
    reply.address = id_;
    reply.type = state_.phase;
    reply.result = Bytes{uint8_t(rng_.next_u64())};
    reply.hash = digest(reply.result);  // consistent hash over a bogus result
    reply.sign_with(kp_);
    if (!silent()) {
      if (end.address == id_)
        on_reply(reply);
      else
        sim_.send(id_, end.address, wire_encode(WireMessage{reply}));
    }
    return;
  }

  if (my_hash == end.hash) {
    if (metrics_) metrics_->on_reply_produced(id_, state_.round, state_.phase, my_hash);
    ReplyMsg reply;
    reply.address = id_;
    reply.type = state_.phase;
    reply.hash = my_hash;
    reply.result = result_bytes;
    reply.sign_with(kp_);
    if (silent()) return;
    if (end.address == id_) {
      on_reply(reply);
    } else {
      sim_.send(id_, end.address, wire_encode(WireMessage{reply}));
    }
    return;
  }

  // Mismatch: if our stage already ended, push our own view of the result.
  if (stage_ended_ && !sent_end_hashes_.count(my_hash)) send_end(my_hash);
}

void SimNode::on_detector_action(DetectorAction action) {
  switch (action) {
    case DetectorAction::None:
      break;
    case DetectorAction::StartTimer2:
    case DetectorAction::ResetTimer2:
    case DetectorAction::RearmTimer2: {
      uint64_t gen = ++timer2_gen_;
      uint64_t pgen = phase_gen_;
      sim_.schedule_timer(detector_->t_ms(), [this, gen, pgen] {
        if (pgen != phase_gen_ || gen != timer2_gen_ || !detector_) return;
        on_detector_action(detector_->on_timer2());
      });
      break;
    }
    case DetectorAction::EndStage:
      on_stage_end();
      break;
  }
}

void SimNode::on_stage_end() {
  if (stage_ended_ && state_.phase != Phase::Work) return;
  stage_ended_ = true;
  if (state_.phase == Phase::Work && !work_product_) {
    end_pending_work_ = true;
    return;
  }
  auto result = local_result();
  if (!result) return;
  send_end(digest(encode(*result)));
}

void SimNode::send_end(const Digest& hash) {
  if (sent_end_hashes_.count(hash)) return;
  sent_end_hashes_.insert(hash);

  EndRequest end;
  end.address = id_;
  end.type = state_.phase;
  end.hash = hash;
  end.sign_with(kp_);

  Collector collector;
  collector.end = end;
  std::vector<RequestTuple> accepted, flagged;
  auto result = local_result(&accepted, &flagged);
  if (result) {
    collector.result = encode(*result);
    collector.originals = accepted;
    // Replayed tuples ride along as on-chain evidence.
    for (const auto& t : flagged) collector.originals.push_back(t);
  }
  collectors_[hash] = std::move(collector);

  if (silent()) return;

  ConsensusRequest wrapped;
  wrapped.payload = encode(end);
  wrapped.id = digest(wrapped.payload);
  wrapped.sender = id_;
  wrapped.sig = sign(kp_, wrapped.payload);
  sim_.broadcast(id_, state_.committee.members, wire_encode(WireMessage{wrapped}));
  if (is_member()) on_wire_request(wrapped);
}

void SimNode::on_reply(const ReplyMsg& reply) {
  if (!is_member()) return;
  if (reply.type != state_.phase) return;
  auto it = collectors_.find(reply.hash);
  if (it == collectors_.end()) return;
  if (!state_.committee.contains(reply.address)) return;
  const PublicKey* pk = state_.key_of(reply.address);
  if (!pk || !reply.verify_sig(*pk)) return;
  if (digest(reply.result) != reply.hash) return;
  if (it->second.replies.count(reply.address)) return;  // duplicate responder
  it->second.replies[reply.address] = reply;
  maybe_submit_proof(reply.hash);
}

void SimNode::maybe_submit_proof(const Digest& hash) {
  if (proof_submitted_ || silent()) return;
  auto& collector = collectors_[hash];
  int f = fault_threshold(int(state_.committee.members.size()));
  if (int(collector.replies.size()) < f + 1) return;

  TransitionProof proof;
  proof.end = collector.end;
  proof.round = state_.round;
  proof.phase = state_.phase;
  for (const auto& [node, reply] : collector.replies) proof.replies.push_back(reply);
  proof_submitted_ = true;
  contract_.submit_transition_tx(id_, std::move(proof), collector.originals);
}

}  // namespace dfl
