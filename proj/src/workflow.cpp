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

#include "dfl/workflow.hpp"

#include <algorithm>
#include <stdexcept>

namespace dfl {

Phase phase_successor(Phase phase, const CommitteeView& view) {
  switch (phase) {
    case Phase::Elect: return Phase::Pledge;
    case Phase::Pledge: return Phase::Commit;
    case Phase::Commit: return Phase::Work;
    case Phase::Work: return should_reelect(view) ? Phase::Elect : Phase::Pledge;
  }
  throw std::logic_error("bad phase");
}

DetectorAction TransitionDetector::on_stage_start(int64_t now_ms) {
  (void)now_ms;
  if (tot_ == 0 && !timer2_active_ && !ended_) {
    // Nothing expected: arm timer2 immediately so the stage closes fast.
    t_ms_ = 0;
    timer2_active_ = true;
    return DetectorAction::StartTimer2;
  }
  return DetectorAction::None;
}

DetectorAction TransitionDetector::on_arrival(int64_t now_ms) {
  arrivals_.push_back(now_ms);  // late extras still counted
  if (ended_) return DetectorAction::None;
  if (timer2_active_) return DetectorAction::ResetTimer2;
  if (threshold_met()) {
    if (arrivals_.size() >= 2) {
      t_ms_ = (arrivals_.back() - arrivals_.front()) /
              static_cast<int64_t>(arrivals_.size() - 1);
    } else {
      t_ms_ = 0;
    }
    timer2_active_ = true;
    return DetectorAction::StartTimer2;
  }
  return DetectorAction::None;
}

DetectorAction TransitionDetector::on_timer1() {
  if (ended_) return DetectorAction::None;
  ended_ = true;
  return DetectorAction::EndStage;
}

DetectorAction TransitionDetector::on_timer2() {
  if (ended_ || !timer2_active_) return DetectorAction::None;
  t_ms_ /= 2;
  if (t_ms_ <= 0) {
    ended_ = true;
    return DetectorAction::EndStage;
  }
  return DetectorAction::RearmTimer2;
}

const PublicKey* LocalStateView::key_of(const NodeId& n) const {
  auto it = registry.find(n);
  return it == registry.end() ? nullptr : &it->second;
}

double LocalStateView::historical_acc(const NodeId& n) const {
  auto it = score_history.find(n);
  if (it == score_history.end() || it->second.second == 0) return 0.0;
  return double(it->second.first) / double(it->second.second) / 1000.0;
}

bool LocalStateView::in_stake_list(const NodeId& n) const {
  for (const auto& [node, money] : stake)
    if (node == n) return true;
  return false;
}

std::optional<Digest> LocalStateView::submission_of(const NodeId& n) const {
  for (const auto& [node, d] : submissions)
    if (node == n) return d;
  return std::nullopt;
}

bool LocalStateView::apply_finalized(const PhaseFinalizedEvent& ev) {
  // Monotonic: ignore events older than the local position.
  if (ev.round < round || (ev.round == round && ev.phase < phase)) return false;
  auto result = try_decode<PhaseResult>(ev.result);
  if (!result) return false;

  switch (ev.phase) {
    case Phase::Elect:
      stake.clear();
      submissions.clear();
      break;
    case Phase::Pledge:
      stake = std::get<PledgeResult>(result->body).stake;
      submissions.clear();
      break;
    case Phase::Commit:
      submissions = std::get<CommitResult>(result->body).submissions;
      break;
    case Phase::Work: {
      const auto& work = std::get<WorkResult>(result->body);
      global_model = work.global_digest;
      global_score = work.global_score;
      for (const auto& [node, score] : work.submodel_scores) {
        auto& [sum, count] = score_history[node];
        sum += score;
        count += 1;
      }
      stake.clear();
      submissions.clear();
      break;
    }
  }
  committee = ev.committee;
  round = ev.next_round;
  phase = ev.next_phase;
  return true;
}

namespace {

// One deduped request per sender: smallest request id wins so the choice is
// independent of delivery order.
std::map<NodeId, std::pair<Digest, PhasePayload>> dedupe_requests(
    Phase phase, uint64_t round, const std::vector<ConsensusRequest>& executed,
    std::vector<RequestTuple>* replay_flagged) {
  std::map<NodeId, std::pair<Digest, PhasePayload>> by_sender;
  for (const auto& req : executed) {
    auto payload = try_decode<PhasePayload>(req.payload);
    if (!payload) continue;
    if (payload->tuple.address != req.sender) continue;
    if (payload->tuple.it != round || payload->tuple.status != phase) {
      if (replay_flagged) replay_flagged->push_back(payload->tuple);
      continue;
    }
    auto it = by_sender.find(req.sender);
    if (it == by_sender.end() || req.id < it->second.first)
      by_sender[req.sender] = {req.id, *payload};
  }
  return by_sender;
}

}  // namespace

PhaseResult compute_phase_result(Phase phase, uint64_t round,
                                 const std::vector<ConsensusRequest>& executed,
                                 const ResultInputs& in,
                                 std::vector<RequestTuple>* replay_flagged,
                                 std::vector<RequestTuple>* accepted_tuples) {
  if (!in.prior) throw std::invalid_argument("compute_phase_result needs prior state");
  const LocalStateView& prior = *in.prior;
  auto deduped = dedupe_requests(phase, round, executed, replay_flagged);
  if (accepted_tuples)
    for (const auto& [sender, entry] : deduped)
      accepted_tuples->push_back(entry.second.tuple);

  PhaseResult result;
  result.round = round;
  result.phase = phase;
  result.pbft_view = in.pbft_view;

  switch (phase) {
    case Phase::Elect: {
      std::vector<Candidate> candidates;
      for (const auto& [sender, entry] : deduped) {
        const auto* body = std::get_if<ElectBody>(&entry.second.body);
        if (!body) continue;
        if (entry.second.tuple.money < in.min_candidate_pledge) continue;
        candidates.push_back(Candidate{sender, double(entry.second.tuple.money) / kMilli,
                                       prior.historical_acc(sender)});
      }
      std::vector<NodeId> elected = run_election(candidates, in.election);
      ElectResult body;
      if (elected.empty()) {
        body.next_epoch = prior.committee.epoch;  // shortfall: incumbent continues
        body.members = prior.committee.members;
      } else {
        body.next_epoch = prior.committee.epoch + 1;
        body.members = std::move(elected);
      }
      result.body = std::move(body);
      break;
    }
    case Phase::Pledge: {
      PledgeResult body;
      for (const auto& [sender, entry] : deduped) {
        if (!std::holds_alternative<PledgeBody>(entry.second.body)) continue;
        body.stake.emplace_back(sender, entry.second.tuple.money);
      }
      result.body = std::move(body);  // map iteration is already NodeId-sorted
      break;
    }
    case Phase::Commit: {
      CommitResult body;
      for (const auto& [sender, entry] : deduped) {
        const auto* cb = std::get_if<CommitBody>(&entry.second.body);
        if (!cb) continue;
        if (!prior.in_stake_list(sender)) continue;
        body.submissions.emplace_back(sender, cb->submodel_digest);
      }
      result.body = std::move(body);
      break;
    }
    case Phase::Work: {
      if (!in.own_work) throw std::invalid_argument("work result needs own product");
      WorkResult body;
      body.global_digest = in.own_work->global_digest;
      body.global_score = in.own_work->global_score;
      body.submodel_scores = in.own_work->submodel_scores;
      for (const auto& member : prior.committee.members) {
        auto it = deduped.find(member);
        if (it == deduped.end()) {
          body.unanswered_members.push_back(member);
          continue;
        }
        const auto* wb = std::get_if<WorkBody>(&it->second.second.body);
        if (!wb) {
          body.unanswered_members.push_back(member);
          continue;
        }
        WorkProduct claimed{wb->global_digest, wb->global_score, wb->submodel_scores};
        if (claimed == *in.own_work) body.matched_members.push_back(member);
      }
      std::sort(body.matched_members.begin(), body.matched_members.end());
      std::sort(body.unanswered_members.begin(), body.unanswered_members.end());
      result.body = std::move(body);
      break;
    }
  }
  return result;
}

namespace {

ConsensusRequest build_request(Phase phase, uint64_t round, const NodeId& id,
                               const KeyPair& kp, Milli money,
                               std::variant<ElectBody, PledgeBody, CommitBody, WorkBody> body) {
  PhasePayload payload;
  payload.tuple.it = round;
  payload.tuple.status = phase;
  payload.tuple.money = money;
  payload.tuple.address = id;
  payload.tuple.sign_with(kp);
  payload.body = std::move(body);
  return ConsensusRequest::make(payload, id, kp);
}

}  // namespace

ConsensusRequest build_elect_request(uint64_t round, const NodeId& id, const KeyPair& kp,
                                     Milli pledge_eth, uint32_t claimed_acc) {
  return build_request(Phase::Elect, round, id, kp, pledge_eth,
                       ElectBody{pledge_eth, claimed_acc});
}

ConsensusRequest build_pledge_request(uint64_t round, const NodeId& id, const KeyPair& kp,
                                      Milli money) {
  return build_request(Phase::Pledge, round, id, kp, money, PledgeBody{});
}

ConsensusRequest build_commit_request(uint64_t round, const NodeId& id, const KeyPair& kp,
                                      const Digest& submodel_digest) {
  return build_request(Phase::Commit, round, id, kp, 0, CommitBody{submodel_digest});
}

ConsensusRequest build_work_request(uint64_t round, const NodeId& id, const KeyPair& kp,
                                    const WorkProduct& product) {
  return build_request(Phase::Work, round, id, kp, 0,
                       WorkBody{product.global_digest, product.global_score,
                                product.submodel_scores});
}

}  // namespace dfl
