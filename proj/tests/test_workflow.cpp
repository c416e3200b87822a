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

#include <doctest.h>

#include <algorithm>

#include "dfl/rng.hpp"
#include "dfl/workflow.hpp"

using namespace dfl;

namespace {

// Minimal virtual-timer harness around the detector: replays an arrival
// schedule and fires timers in time order, the way the node loop would.
struct DetectorDriver {
  TransitionDetector det;
  int64_t timer1_at;
  int64_t timer2_at = -1;
  int64_t end_time = -1;
  int64_t stage_start = 0;
  int64_t t_initial = -1;  // timer2 budget captured at the 80% crossing

  DetectorDriver(int64_t mt, uint32_t tot, int64_t start = 0)
      : det(mt, tot), timer1_at(start + mt), stage_start(start) {
    apply(det.on_stage_start(start), start);
  }

  void apply(DetectorAction action, int64_t now) {
    switch (action) {
      case DetectorAction::StartTimer2:
        t_initial = det.t_ms();
        [[fallthrough]];
      case DetectorAction::ResetTimer2:
      case DetectorAction::RearmTimer2:
        timer2_at = now + det.t_ms();
        break;
      case DetectorAction::EndStage:
        if (end_time < 0) end_time = now;
        timer2_at = -1;
        break;
      case DetectorAction::None:
        break;
    }
  }

  // Runs until the stage ends; arrivals must be sorted ascending.
  int64_t run(const std::vector<int64_t>& arrivals) {
    size_t next = 0;
    while (end_time < 0) {
      int64_t t_arr = next < arrivals.size() ? arrivals[next] : INT64_MAX;
      int64_t t2 = timer2_at >= 0 ? timer2_at : INT64_MAX;
      int64_t t1 = timer1_at;
      int64_t t = std::min({t_arr, t1, t2});
      if (t == t_arr) {
        ++next;
        apply(det.on_arrival(t), t);
      } else if (t == t2) {
        timer2_at = -1;
        apply(det.on_timer2(), t);
      } else {
        apply(det.on_timer1(), t);
      }
    }
    return end_time;
  }
};

NodeId id_of(uint64_t seed) { return generate_identity(seed).first; }

}  // namespace

TEST_CASE("detector starts timer2 at the 80% threshold with the mean gap") {
  DetectorDriver drv(60'000, 10);
  std::vector<int64_t> arrivals;
  for (int i = 1; i <= 7; ++i) {
    drv.apply(drv.det.on_arrival(i * 1000), i * 1000);
    CHECK_FALSE(drv.det.timer2_active());
  }
  drv.apply(drv.det.on_arrival(8000), 8000);
  CHECK(drv.det.timer2_active());
  CHECK(drv.det.t_ms() == 1000);  // (8000-1000)/7
}

TEST_CASE("halving series ends 1994 ms after the last arrival for t=1000") {
  // 1000+500+250+125+62+31+15+7+3+1 = 1994, then t reaches 0.
  DetectorDriver drv(600'000, 10);
  std::vector<int64_t> arrivals;
  for (int i = 1; i <= 8; ++i) arrivals.push_back(i * 1000);
  int64_t end = drv.run(arrivals);
  CHECK(end == 8000 + 1994);
}

TEST_CASE("timer1 is the backstop when the threshold is never met") {
  DetectorDriver drv(60'000, 10);
  int64_t end = drv.run({100, 200, 300});  // 3 of 10
  CHECK(end == 60'000);
}

TEST_CASE("nothing expected ends the stage immediately") {
  DetectorDriver drv(60'000, 0);
  CHECK(drv.run({}) == 0);
}

TEST_CASE("detector bounds over random arrival patterns") {
  Rng rng(2026);
  for (int trial = 0; trial < 1000; ++trial) {
    uint32_t tot = 1 + uint32_t(rng.uniform_u64(20));
    int64_t mt = 5'000 + int64_t(rng.uniform_u64(55'000));
    uint32_t arriving = uint32_t(rng.uniform_u64(tot + 1));
    std::vector<int64_t> arrivals;
    int64_t t = 0;
    for (uint32_t i = 0; i < arriving; ++i) {
      t += 1 + int64_t(rng.uniform_u64(3000));
      arrivals.push_back(t);
    }
    DetectorDriver drv(mt, tot);
    int64_t end = drv.run(arrivals);

    // Hard backstop: no stage outlives mt.
    CHECK(end <= mt);

    // When the 80% threshold was crossed and arrivals ceased, the stage ends
    // within twice the initial timer2 budget (plus halving residue).
    if (drv.t_initial >= 0 && end < mt) {
      int64_t last = arrivals.empty() ? 0 : arrivals.back();
      CHECK(end <= last + 2 * drv.t_initial + 12);
    }
  }
}

TEST_CASE("late extras are counted but do not restart an ended stage") {
  DetectorDriver drv(10'000, 1);
  int64_t end = drv.run({500});
  CHECK(end >= 500);
  auto action = drv.det.on_arrival(end + 100);
  CHECK(action == DetectorAction::None);
  CHECK(drv.det.arrival_count() == 2);
}

TEST_CASE("phase successor") {
  CommitteeView view;
  view.elect_times_remaining = 2;
  CHECK(phase_successor(Phase::Elect, view) == Phase::Pledge);
  CHECK(phase_successor(Phase::Pledge, view) == Phase::Commit);
  CHECK(phase_successor(Phase::Commit, view) == Phase::Work);
  CHECK(phase_successor(Phase::Work, view) == Phase::Pledge);
  view.elect_times_remaining = 0;
  CHECK(phase_successor(Phase::Work, view) == Phase::Elect);
}

namespace {

struct Party {
  NodeId id;
  KeyPair kp;
};

Party party(uint64_t seed) {
  auto [id, kp] = generate_identity(seed);
  return Party{id, kp};
}

LocalStateView base_state(const std::vector<Party>& committee_members) {
  LocalStateView state;
  state.round = 1;
  state.phase = Phase::Pledge;
  for (const auto& p : committee_members) {
    state.committee.members.push_back(p.id);
    state.registry[p.id] = p.kp.public_key;
  }
  state.committee.master = state.committee.members[0];
  state.committee.elect_times_remaining = 2;
  return state;
}

}  // namespace

TEST_CASE("compute_phase_result is order independent and filters replays") {
  std::vector<Party> parties;
  for (uint64_t s = 1; s <= 6; ++s) parties.push_back(party(s));
  LocalStateView state = base_state({parties[0], parties[1], parties[2], parties[3]});
  for (const auto& p : parties) state.registry[p.id] = p.kp.public_key;

  std::vector<ConsensusRequest> requests;
  for (int i = 0; i < 5; ++i)
    requests.push_back(build_pledge_request(1, parties[i].id, parties[i].kp, 1000));
  // A replayed tuple from round 0 sneaks into the executed set.
  requests.push_back(build_pledge_request(0, parties[5].id, parties[5].kp, 1000));

  ResultInputs in;
  in.prior = &state;
  in.election.need = 4;

  std::vector<RequestTuple> flagged;
  PhaseResult one = compute_phase_result(Phase::Pledge, 1, requests, in, &flagged);
  CHECK(flagged.size() == 1);
  CHECK(flagged[0].address == parties[5].id);
  const auto& stake = std::get<PledgeResult>(one.body).stake;
  CHECK(stake.size() == 5);
  CHECK(std::is_sorted(stake.begin(), stake.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; }));

  // Same set, different delivery order: byte-identical result.
  std::reverse(requests.begin(), requests.end());
  PhaseResult two = compute_phase_result(Phase::Pledge, 1, requests, in);
  CHECK(encode(one) == encode(two));
}

TEST_CASE("elect result falls back to the incumbent committee on shortfall") {
  std::vector<Party> parties;
  for (uint64_t s = 1; s <= 4; ++s) parties.push_back(party(s));
  LocalStateView state = base_state(parties);
  state.phase = Phase::Elect;
  state.committee.epoch = 3;

  ResultInputs in;
  in.prior = &state;
  in.election.need = 4;
  in.min_candidate_pledge = kMilli;

  // Two candidates only.
  std::vector<ConsensusRequest> requests{
      build_elect_request(1, parties[0].id, parties[0].kp, 5 * kMilli, 0),
      build_elect_request(1, parties[1].id, parties[1].kp, 5 * kMilli, 0),
  };
  PhaseResult result = compute_phase_result(Phase::Elect, 1, requests, in);
  const auto& body = std::get<ElectResult>(result.body);
  CHECK(body.members == state.committee.members);
  CHECK(body.next_epoch == 3);

  // Enough candidates: fresh epoch and need winners.
  for (int i = 0; i < 4; ++i)
    requests.push_back(
        build_elect_request(1, parties[i].id, parties[i].kp, Milli((i + 2) * kMilli), 0));
  PhaseResult full = compute_phase_result(Phase::Elect, 1, requests, in);
  const auto& fbody = std::get<ElectResult>(full.body);
  CHECK(fbody.next_epoch == 4);
  CHECK(fbody.members.size() == 4);
}

TEST_CASE("duplicate senders keep the smallest request id") {
  std::vector<Party> parties{party(1), party(2), party(3), party(4)};
  LocalStateView state = base_state(parties);

  ConsensusRequest a = build_pledge_request(1, parties[0].id, parties[0].kp, 1000);
  ConsensusRequest b = build_pledge_request(1, parties[0].id, parties[0].kp, 2000);
  ResultInputs in;
  in.prior = &state;

  PhaseResult one = compute_phase_result(Phase::Pledge, 1, {a, b}, in);
  PhaseResult two = compute_phase_result(Phase::Pledge, 1, {b, a}, in);
  CHECK(encode(one) == encode(two));
  const auto& stake = std::get<PledgeResult>(one.body).stake;
  REQUIRE(stake.size() == 1);
  CHECK(stake[0].second == (a.id < b.id ? 1000 : 2000));
}

TEST_CASE("work result records matched and unanswered members") {
  std::vector<Party> parties{party(1), party(2), party(3), party(4)};
  LocalStateView state = base_state(parties);
  state.phase = Phase::Work;

  WorkProduct product;
  product.global_digest = digest(std::string("global"));
  product.global_score = 800;
  product.submodel_scores = {{parties[0].id, 790}};

  WorkProduct wrong = product;
  wrong.global_score = 123;

  std::vector<ConsensusRequest> requests{
      build_work_request(1, parties[0].id, parties[0].kp, product),
      build_work_request(1, parties[1].id, parties[1].kp, product),
      build_work_request(1, parties[2].id, parties[2].kp, wrong),
      // parties[3] never answers
  };

  ResultInputs in;
  in.prior = &state;
  in.own_work = &product;
  in.pbft_view = 2;

  PhaseResult result = compute_phase_result(Phase::Work, 1, requests, in);
  CHECK(result.pbft_view == 2);
  const auto& body = std::get<WorkResult>(result.body);
  CHECK(body.global_score == 800);
  CHECK(body.matched_members == std::vector<NodeId>{
            std::min(parties[0].id, parties[1].id), std::max(parties[0].id, parties[1].id)});
  CHECK(body.unanswered_members == std::vector<NodeId>{parties[3].id});
}

TEST_CASE("apply_finalized is monotonic and idempotent") {
  std::vector<Party> parties{party(1), party(2), party(3), party(4)};
  LocalStateView state = base_state(parties);

  PhaseResult result;
  result.round = 1;
  result.phase = Phase::Pledge;
  result.body = PledgeResult{{{parties[0].id, 1000}}};

  PhaseFinalizedEvent ev;
  ev.round = 1;
  ev.phase = Phase::Pledge;
  ev.result = encode(result);
  ev.next_round = 1;
  ev.next_phase = Phase::Commit;
  ev.committee = state.committee;

  CHECK(state.apply_finalized(ev));
  CHECK(state.phase == Phase::Commit);
  CHECK(state.stake.size() == 1);

  // Duplicate delivery is a no-op.
  CHECK_FALSE(state.apply_finalized(ev));
  CHECK(state.phase == Phase::Commit);

  // Fast-forward from a later Work event, skipping Commit.
  PhaseResult work;
  work.round = 1;
  work.phase = Phase::Work;
  WorkResult wr;
  wr.global_digest = digest(std::string("g2"));
  wr.global_score = 640;
  wr.submodel_scores = {{parties[0].id, 640}};
  work.body = wr;

  PhaseFinalizedEvent ev2;
  ev2.round = 1;
  ev2.phase = Phase::Work;
  ev2.result = encode(work);
  ev2.next_round = 2;
  ev2.next_phase = Phase::Pledge;
  ev2.committee = state.committee;
  ev2.committee.elect_times_remaining = 1;

  CHECK(state.apply_finalized(ev2));
  CHECK(state.round == 2);
  CHECK(state.phase == Phase::Pledge);
  CHECK(state.global_score == 640);
  CHECK(state.score_history[parties[0].id].second == 1);
  CHECK(state.stake.empty());
}
