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

#include "dfl/contract.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dfl {

void AccuracyPriceCurve::validate() const {
  if (points.size() < 2) throw std::invalid_argument("price curve needs >= 2 points");
  for (size_t i = 0; i < points.size(); ++i) {
    if (points[i].first < 0.0 || points[i].first > 1.0)
      throw std::invalid_argument("curve accuracy out of [0,1]");
    if (i > 0 && points[i].first <= points[i - 1].first)
      throw std::invalid_argument("curve accuracies must be strictly increasing");
  }
}

Milli AccuracyPriceCurve::price_of(double acc) const {
  if (acc < 0.0 || acc > 1.0) throw std::invalid_argument("accuracy out of [0,1]");
  if (acc <= points.front().first) return points.front().second;
  if (acc >= points.back().first) return points.back().second;
  for (size_t i = 1; i < points.size(); ++i) {
    if (acc == points[i].first) return points[i].second;
    if (acc < points[i].first) {
      // Strictly between two scatter points: the average principle.
      return (points[i - 1].second + points[i].second) / 2;
    }
  }
  return points.back().second;
}

Milli ContractState::pool_of(const NodeId& n) const {
  auto it = fund_pools.find(n);
  return it == fund_pools.end() ? 0 : it->second;
}

Milli ContractState::pools_sum() const {
  Milli sum = 0;
  for (const auto& [node, balance] : fund_pools) sum += balance;
  return sum;
}

bool ContractState::conservation_holds() const {
  return pools_sum() + reward_ledger.tm + total_payouts + total_gas_burned ==
         total_deposits;
}

StateContract::StateContract(Simulator& sim, ContractConfig cfg, uint64_t seed)
    : sim_(sim), cfg_(std::move(cfg)), block_rng_(Rng::derive(seed, "blocks")) {
  cfg_.curve.validate();
  cfg_.election.validate();
  cfg_.penalties.validate();
  if (cfg_.dp_enabled) cfg_.dp.validate();
  if (cfg_.block_interval_ms <= 0) throw std::invalid_argument("block interval must be > 0");
  state_.curve = cfg_.curve;
}

void StateContract::register_genesis(const NodeId& node, const PublicKey& pk,
                                     Milli deposit) {
  if (state_.initialized) throw std::logic_error("genesis registration after init");
  if (node != node_id_of(pk)) throw std::invalid_argument("node id does not match key");
  if (state_.registry.count(node)) throw std::invalid_argument("duplicate registration");
  if (deposit < cfg_.registration_min)
    throw std::invalid_argument("deposit below registration minimum");
  state_.registry[node] = RegistrationRecord{pk, deposit, 0};
  state_.fund_pools[node] = deposit;
  state_.total_deposits += deposit;
}

void StateContract::initialize(const std::vector<NodeId>& genesis_committee) {
  if (state_.initialized) throw std::logic_error("contract already initialized");
  if (state_.registry.empty()) throw std::invalid_argument("no registered genesis nodes");
  const int need = cfg_.election.need;

  CommitteeView view;
  view.epoch = 0;
  view.view_changes = 0;
  if (!genesis_committee.empty()) {
    if (static_cast<int>(genesis_committee.size()) != need)
      throw std::invalid_argument("genesis committee size != need");
    for (const auto& m : genesis_committee)
      if (!state_.registry.count(m))
        throw std::invalid_argument("genesis committee member not registered");
    view.members = genesis_committee;
    view.elect_times_remaining = cfg_.elect_times;
    state_.phase = Phase::Pledge;
  } else {
    // Bootstrap committee for the opening election: the first `need`
    // registrants in NodeId order, agreed offline.
    if (static_cast<int>(state_.registry.size()) < need)
      throw std::invalid_argument("not enough registrants to bootstrap a committee");
    for (const auto& [node, rec] : state_.registry) {
      view.members.push_back(node);
      if (static_cast<int>(view.members.size()) == need) break;
    }
    view.elect_times_remaining = 0;
    state_.phase = Phase::Elect;
  }
  view.master = select_master(view);
  state_.committee = view;
  state_.round = 1;
  state_.global_model_digest = cfg_.initial_global_model;
  state_.initialized = true;

  InitEvent init;
  init.need = static_cast<uint32_t>(need);
  init.elect_times = cfg_.elect_times;
  init.weight_p = cfg_.election.p;
  init.initial_global_model = cfg_.initial_global_model;
  init.committee = view;
  init.round = state_.round;
  init.phase = state_.phase;
  init.dp_eps = cfg_.dp.eps;
  init.dp_delta = cfg_.dp.delta;
  init.dp_clip = cfg_.dp.clip_norm;
  init.dp_enabled = cfg_.dp_enabled;
  for (const auto& [node, rec] : state_.registry) init.registry.emplace_back(node, rec.pk);
  emit_event(event_kind::kInitialized, encode(init));

  ensure_block_scheduled();
}

void StateContract::subscribe(const NodeId& node) {
  if (!subscribers_.insert(node).second) return;
  // Late subscriber: replay the backlog in order.
  for (const auto& ev : state_.events) deliver_event(node, ev);
}

void StateContract::deliver_event(const NodeId& subscriber, const EventRecord& ev) {
  sim_.send_reliable(address(), subscriber, encode(ev));
}

EventRecord StateContract::emit_event(const std::string& kind, Bytes payload) {
  if (payload.size() > cfg_.max_event_payload)
    throw std::logic_error("event payload exceeds size limit");
  if (contains_model_params_blob(payload))
    throw std::logic_error("event payload contains raw model parameters");
  EventRecord ev;
  ev.seq = next_event_seq_++;
  ev.block = block_number_;
  ev.kind = kind;
  ev.payload = std::move(payload);
  state_.events.push_back(ev);
  for (const auto& sub : subscribers_) deliver_event(sub, ev);
  return ev;
}

int64_t StateContract::next_block_gap_ms() {
  if (!cfg_.stochastic_blocks) return cfg_.block_interval_ms;
  double gap = block_rng_.exponential(double(cfg_.block_interval_ms));
  return std::max<int64_t>(1, static_cast<int64_t>(std::llround(gap)));
}

void StateContract::ensure_block_scheduled() {
  if (tick_scheduled_ || !state_.initialized) return;
  tick_scheduled_ = true;
  sim_.schedule_block_tick(next_block_gap_ms(), [this] { on_block_tick(); });
}

void StateContract::on_block_tick() {
  tick_scheduled_ = false;
  ++block_number_;
  std::vector<PendingTx> batch;
  batch.swap(pending_);
  for (const auto& tx : batch) {
    if (tx.kind == PendingTx::Kind::Register) {
      apply_register(tx);
    } else {
      outcomes_.push_back(apply_transition(tx.caller, tx.proof, tx.originals));
    }
  }
  // The clock stops itself at quiescence so empty scenarios drain.
  if (sim_.live_events() > 0 || !pending_.empty()) {
    tick_scheduled_ = true;
    sim_.schedule_block_tick(next_block_gap_ms(), [this] { on_block_tick(); });
  }
}

void StateContract::submit_register_tx(const NodeId& node, const PublicKey& pk,
                                       Milli deposit) {
  PendingTx tx;
  tx.kind = PendingTx::Kind::Register;
  tx.caller = node;
  tx.pk = pk;
  tx.deposit = deposit;
  pending_.push_back(std::move(tx));
  ensure_block_scheduled();
}

void StateContract::submit_transition_tx(const NodeId& caller, TransitionProof proof,
                                         std::vector<RequestTuple> originals) {
  PendingTx tx;
  tx.kind = PendingTx::Kind::Transition;
  tx.caller = caller;
  tx.proof = std::move(proof);
  tx.originals = std::move(originals);
  pending_.push_back(std::move(tx));
  ensure_block_scheduled();
}

void StateContract::apply_register(const PendingTx& tx) {
  if (tx.caller != node_id_of(tx.pk) || state_.registry.count(tx.caller) ||
      tx.deposit < cfg_.registration_min) {
    ByteWriter w;
    tx.caller.encode(w);
    w.str("registration rejected");
    emit_event(event_kind::kWarning, w.take());
    return;
  }
  state_.registry[tx.caller] = RegistrationRecord{tx.pk, tx.deposit, block_number_};
  state_.fund_pools[tx.caller] = tx.deposit;
  state_.total_deposits += tx.deposit;
  emit_event(event_kind::kRegistered,
             encode(RegisteredEvent{tx.caller, tx.pk, tx.deposit}));
  assert_conservation();
}

int64_t StateContract::meter_call(int reply_signatures, int tuples_processed) const {
  return cfg_.gas.base + cfg_.gas.per_signature * reply_signatures +
         cfg_.gas.per_debit * tuples_processed;
}

Milli StateContract::charge_pool(const NodeId& node, Milli amount) {
  Milli& pool = state_.fund_pools[node];
  Milli taken = std::min(amount, pool);
  pool -= taken;
  state_.reward_ledger.tm += taken;
  return taken;
}

namespace {

struct ValidTuple {
  RequestTuple tuple;
  bool balance_ok = false;
};

}  // namespace

SubmitOutcome StateContract::apply_transition(const NodeId& caller,
                                              const TransitionProof& proof,
                                              const std::vector<RequestTuple>& originals) {
  SubmitOutcome out;
  auto reject = [&](const std::string& why) {
    out.status = SubmitOutcome::Status::Rejected;
    out.reason = why;
    ByteWriter w;
    caller.encode(w);
    w.str(why);
    emit_event(event_kind::kWarning, w.take());
    return out;
  };

  if (!state_.initialized) return reject("not initialized");
  if (!state_.committee.contains(caller)) return reject("caller not in committee");
  if (proof.replies.empty()) return reject("no replies");

  const Bytes& result_bytes = proof.replies.front().result;
  auto result = try_decode<PhaseResult>(result_bytes);
  if (!result) return reject("undecodable result");
  if (result->round != proof.round || result->phase != proof.phase)
    return reject("proof round/phase mismatch with result");

  // First legal proof wins; anything later for the same slot is a duplicate.
  if (query_history(result->round, result->phase)) {
    out.status = SubmitOutcome::Status::DuplicateRejected;
    out.reason = "already finalized";
    ByteWriter w;
    w.u64(result->round);
    w.u8(static_cast<uint8_t>(result->phase));
    caller.encode(w);
    emit_event(event_kind::kDuplicateProof, w.take());
    return out;
  }
  if (result->round != state_.round || result->phase != state_.phase)
    return reject("proof is for a different (round, phase)");

  const int need = static_cast<int>(state_.committee.members.size());
  const int f = fault_threshold(need);
  // Gas counts reply signature checks and tuples processed.
  int reply_signatures = 0;
  int tuples_processed = 0;

  // End request: committee member, valid signature, hash binds the result.
  if (!state_.committee.contains(proof.end.address)) return reject("end sender not in committee");
  if (proof.end.type != state_.phase) return reject("end phase mismatch");
  auto end_reg = state_.registry.find(proof.end.address);
  if (end_reg == state_.registry.end()) return reject("end sender unregistered");
  if (!proof.end.verify_sig(end_reg->second.pk)) return reject("bad end signature");
  if (proof.end.hash != digest(result_bytes)) return reject("end hash != result digest");

  // Replies: >= F+1 distinct committee members attesting one hash.
  std::set<NodeId> responders;
  for (const auto& reply : proof.replies) {
    if (reply.type != state_.phase) return reject("reply phase mismatch");
    if (reply.hash != proof.end.hash) return reject("reply hash mismatch");
    if (reply.result != result_bytes) return reject("reply result bytes differ");
    if (!state_.committee.contains(reply.address)) return reject("responder not in committee");
    if (!responders.insert(reply.address).second) continue;  // duplicate responder ignored
    auto reg = state_.registry.find(reply.address);
    if (reg == state_.registry.end()) return reject("responder unregistered");
    ++reply_signatures;
    if (!reply.verify_sig(reg->second.pk)) return reject("bad reply signature");
  }
  if (static_cast<int>(responders.size()) < f + 1)
    return reject("fewer than F+1 distinct replies");

  // Originals: signature and (it, status) checks; stale tuples are replay.
  std::map<NodeId, ValidTuple> valid;
  for (const auto& tuple : originals) {
    ++tuples_processed;
    auto reg = state_.registry.find(tuple.address);
    if (reg == state_.registry.end()) continue;
    if (!tuple.verify_sig(reg->second.pk)) continue;
    if (tuple.it != state_.round || tuple.status != state_.phase) {
      ++out.replay_flagged;
      ReplayFlaggedEvent ev{state_.round, state_.phase, tuple};
      emit_event(event_kind::kReplayFlagged, encode(ev));
      continue;
    }
    if (valid.count(tuple.address)) continue;
    ValidTuple vt;
    vt.tuple = tuple;
    vt.balance_ok = state_.pool_of(tuple.address) >= tuple.money && tuple.money >= 0;
    valid.emplace(tuple.address, vt);
  }

  // Cross-check the result against the contract's own records, then shape
  // the effective result (insufficient-balance tuples drop out here).
  PhaseResult effective = *result;
  switch (state_.phase) {
    case Phase::Elect: {
      std::vector<Candidate> candidates;
      for (const auto& [addr, vt] : valid) {
        if (vt.tuple.money < cfg_.min_candidate_pledge) continue;
        double acc = 0;
        auto hist = state_.score_history.find(addr);
        if (hist != state_.score_history.end() && hist->second.second > 0)
          acc = double(hist->second.first) / double(hist->second.second) / 1000.0;
        candidates.push_back(Candidate{addr, double(vt.tuple.money) / kMilli, acc});
      }
      std::vector<NodeId> expected = run_election(candidates, cfg_.election);
      const auto& body = std::get<ElectResult>(result->body);
      if (expected.empty()) {
        if (body.members != state_.committee.members ||
            body.next_epoch != state_.committee.epoch)
          return reject("election shortfall result mismatch");
      } else {
        if (body.members != expected || body.next_epoch != state_.committee.epoch + 1)
          return reject("election result mismatch");
      }
      break;
    }
    case Phase::Pledge: {
      const auto& body = std::get<PledgeResult>(result->body);
      std::vector<std::pair<NodeId, Milli>> expected;
      for (const auto& [addr, vt] : valid) expected.emplace_back(addr, vt.tuple.money);
      if (body.stake != expected) return reject("stake list mismatch with originals");
      auto& eff = std::get<PledgeResult>(effective.body);
      eff.stake.clear();
      for (const auto& [addr, vt] : valid)
        if (vt.balance_ok) eff.stake.emplace_back(addr, vt.tuple.money);
      break;
    }
    case Phase::Commit: {
      const auto& body = std::get<CommitResult>(result->body);
      for (const auto& [addr, d] : body.submissions) {
        bool staked = false;
        for (const auto& [saddr, money] : state_.stake) staked |= (saddr == addr);
        if (!staked) return reject("commit submission from non-staked node");
        if (!valid.count(addr)) return reject("commit submission without valid tuple");
      }
      break;
    }
    case Phase::Work: {
      const auto& body = std::get<WorkResult>(result->body);
      for (const auto& [addr, score] : body.submodel_scores) {
        (void)score;
        bool submitted = false;
        for (const auto& [saddr, d] : state_.submissions) submitted |= (saddr == addr);
        if (!submitted) return reject("work score for a node that submitted nothing");
      }
      for (const auto& m : body.matched_members)
        if (!state_.committee.contains(m)) return reject("matched member not in committee");
      for (const auto& m : body.unanswered_members)
        if (!state_.committee.contains(m)) return reject("unanswered member not in committee");
      break;
    }
  }

  // Batch debit: every valid tuple with a funded pool pays its money in one
  // call (election pledges and participation pledges alike).
  Milli rs_count = 0;
  for (const auto& [addr, vt] : valid) {
    ++rs_count;
    if (!vt.balance_ok || vt.tuple.money == 0) continue;
    charge_pool(addr, vt.tuple.money);
    ++out.tuples_debited;
  }

  finalize_phase(caller, proof, std::move(effective), reply_signatures, tuples_processed,
                 rs_count);

  out.status = SubmitOutcome::Status::Accepted;
  out.gas_used = state_.history.back().gas_used;
  out.ts = cfg_.gas.cost_of(out.gas_used);
  return out;
}

void StateContract::finalize_phase(const NodeId& caller, const TransitionProof& proof,
                                   PhaseResult effective, int reply_signatures,
                                   int tuples_processed, Milli rs_count) {
  const Phase phase = state_.phase;
  const uint64_t round = state_.round;
  auto& ledger = state_.reward_ledger;

  // Apply the effective result.
  switch (phase) {
    case Phase::Elect: {
      const auto& body = std::get<ElectResult>(effective.body);
      CommitteeView next;
      next.members = body.members;
      next.epoch = body.next_epoch;
      next.elect_times_remaining = cfg_.elect_times;
      next.view_changes = 0;
      next.master = select_master(next);
      state_.committee = next;
      state_.stake.clear();
      state_.submissions.clear();
      break;
    }
    case Phase::Pledge: {
      state_.stake = std::get<PledgeResult>(effective.body).stake;
      state_.submissions.clear();
      break;
    }
    case Phase::Commit: {
      state_.submissions = std::get<CommitResult>(effective.body).submissions;
      // Pledged but silent: linearly decreasing deduction.
      for (const auto& [addr, money] : state_.stake) {
        bool submitted = false;
        for (const auto& [saddr, d] : state_.submissions) submitted |= (saddr == addr);
        if (submitted) continue;
        IncentiveEvent ev;
        ev.kind = IncentiveKind::ModelNotSubmittedAfterPledge;
        ev.subject = addr;
        ev.round = round;
        auto outcome = apply_event(ledger, ev, cfg_.penalties, state_.pool_of(addr));
        if (outcome.penalty > 0) charge_pool(addr, outcome.penalty);
      }
      break;
    }
    case Phase::Work: {
      const auto& body = std::get<WorkResult>(effective.body);
      state_.global_model_digest = body.global_digest;
      state_.global_model_score = body.global_score;
      state_.global_model_price = state_.curve.price_of(body.global_score / 1000.0);

      for (const auto& [addr, score] : body.submodel_scores) {
        auto& [sum, count] = state_.score_history[addr];
        sum += score;
        count += 1;
      }

      // Committee attestation outcomes.
      for (const auto& m : body.matched_members) {
        for (IncentiveKind kind : {IncentiveKind::CommitteeCorrectAggregation,
                                   IncentiveKind::CommitteeEvaluatesCorrectly}) {
          IncentiveEvent ev;
          ev.kind = kind;
          ev.subject = m;
          ev.round = round;
          apply_event(ledger, ev, cfg_.penalties, state_.pool_of(m));
        }
      }
      for (const auto& m : body.unanswered_members) {
        IncentiveEvent ev;
        ev.kind = IncentiveKind::CommitteeUnanswered;
        ev.subject = m;
        ev.round = round;
        auto outcome = apply_event(ledger, ev, cfg_.penalties, state_.pool_of(m));
        if (outcome.penalty > 0) charge_pool(m, outcome.penalty);
      }

      // Model quality: median-anchored rewards and punishments.
      if (!body.submodel_scores.empty()) {
        std::vector<std::pair<NodeId, AccuracyScore>> scored;
        for (const auto& [addr, score] : body.submodel_scores)
          scored.emplace_back(addr, AccuracyScore{static_cast<int>(score)});
        auto verdicts = model_quality_outcomes(scored, cfg_.malicious_rate);
        const int m_count = static_cast<int>(verdicts.size());
        for (const auto& v : verdicts) {
          IncentiveEvent ev;
          ev.subject = v.node;
          ev.round = round;
          ev.rank = v.rank;
          ev.m = m_count;
          ev.budget = cfg_.model_reward_budget;
          if (v.outcome == QualityOutcome::Punish) {
            ev.kind = IncentiveKind::LowQualityModel;
            auto outcome = apply_event(ledger, ev, cfg_.penalties, state_.pool_of(v.node));
            if (outcome.penalty > 0) charge_pool(v.node, outcome.penalty);
          } else if (v.outcome == QualityOutcome::Reward) {
            ev.kind = v.rank == 0 ? IncentiveKind::HighQualityModel
                                  : IncentiveKind::RegularQualityModel;
            apply_event(ledger, ev, cfg_.penalties, state_.pool_of(v.node));
          }
        }
      }
      break;
    }
  }

  // Per-stage incentives: active responders and the masternode bonus.
  std::set<NodeId> responders;
  for (const auto& reply : proof.replies) responders.insert(reply.address);
  for (const auto& r : responders) {
    IncentiveEvent ev;
    ev.kind = IncentiveKind::CommitteeActivelyResponds;
    ev.subject = r;
    ev.round = round;
    apply_event(ledger, ev, cfg_.penalties, state_.pool_of(r));
  }
  {
    CommitteeView inferred = state_.committee;
    inferred.view_changes = effective.pbft_view;
    IncentiveEvent ev;
    ev.kind = IncentiveKind::CommitteeMasternodeWorking;
    ev.subject = select_master(inferred);
    ev.round = round;
    ev.rs = static_cast<int>(rs_count);
    ev.ps = cfg_.masternode_base_score;
    apply_event(ledger, ev, cfg_.penalties, 0);
  }

  // Settlement and round advance happen at Work.
  uint64_t next_round = round;
  if (phase == Phase::Work) {
    Milli payout_total = std::min(cfg_.round_payout, ledger.tm);
    auto payouts = settle_pool(ledger, payout_total);
    Milli paid = 0;
    for (const auto& [node, amount] : payouts) {
      paid += amount;
      state_.payouts_by_node[node] += amount;
    }
    ledger.tm -= paid;
    state_.total_payouts += paid;

    if (state_.committee.elect_times_remaining > 0) --state_.committee.elect_times_remaining;
    next_round = round + 1;
    state_.stake.clear();
    state_.submissions.clear();
  }
  Phase next_phase = phase_successor(phase, state_.committee);

  // Gas on the caller, then the contract-call reward in the same call.
  int64_t gas_used = meter_call(reply_signatures, tuples_processed);
  Milli ts = cfg_.gas.cost_of(gas_used);
  Milli& caller_pool = state_.fund_pools[caller];
  Milli burned = std::min(ts, caller_pool);
  caller_pool -= burned;
  state_.total_gas_burned += burned;
  {
    IncentiveEvent ev;
    ev.kind = IncentiveKind::CommitteeSubmitVerification;
    ev.subject = caller;
    ev.round = round;
    ev.ts = burned;
    auto outcome = apply_event(ledger, ev, cfg_.penalties, 0);
    if (outcome.warning) {
      ByteWriter w;
      caller.encode(w);
      w.str("reward pool does not cover the call cost");
      emit_event(event_kind::kWarning, w.take());
    }
  }

  state_.round = next_round;
  state_.phase = next_phase;

  Bytes effective_bytes = encode(effective);
  HistoryRecord record;
  record.round = round;
  record.phase = phase;
  record.result_digest = digest(effective_bytes);
  record.proof_digest = proof.digest_of();
  record.block = block_number_;
  record.gas_used = gas_used;
  record.at_ms = sim_.now();
  state_.history.push_back(record);

  PhaseFinalizedEvent ev;
  ev.round = round;
  ev.phase = phase;
  ev.result = std::move(effective_bytes);
  ev.proof_digest = record.proof_digest;
  ev.next_round = next_round;
  ev.next_phase = next_phase;
  ev.committee = state_.committee;
  ev.gas_used = static_cast<uint64_t>(gas_used);
  ev.caller = caller;
  emit_event(event_kind::kPhaseFinalized, encode(ev));

  assert_conservation();
}

void StateContract::assert_conservation() const {
  if (!state_.conservation_holds())
    throw std::logic_error("fund conservation violated");
}

std::optional<HistoryRecord> StateContract::query_history(uint64_t round,
                                                          Phase phase) const {
  for (const auto& rec : state_.history)
    if (rec.round == round && rec.phase == phase) return rec;
  return std::nullopt;
}

void StateContract::export_event_log_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  Digest prev{};  // zero digest chains the first record
  for (const auto& ev : state_.events) {
    ByteWriter w;
    w.u64(ev.seq);
    w.u64(ev.block);
    w.str(ev.kind);
    w.blob(ev.payload);
    prev.encode(w);
    Digest link = digest(w.bytes());
    nlohmann::json row = {
        {"seq", ev.seq},         {"block", ev.block},
        {"kind", ev.kind},       {"payload", to_hex(ev.payload)},
        {"prev", prev.hex()},    {"digest", link.hex()},
    };
    out << row.dump() << "\n";
    prev = link;
  }
}

void StateContract::export_history_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "round,phase,result_digest,proof_digest,block,gas\n";
  for (const auto& rec : state_.history) {
    out << rec.round << ',' << phase_name(rec.phase) << ',' << rec.result_digest.hex()
        << ',' << rec.proof_digest.hex() << ',' << rec.block << ',' << rec.gas_used
        << "\n";
  }
}

}  // namespace dfl
