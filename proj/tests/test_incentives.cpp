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

#include "dfl/incentives.hpp"
#include "dfl/rng.hpp"

using namespace dfl;

namespace {

NodeId make_id(uint8_t tag) {
  NodeId id;
  id.bytes.fill(0);
  id.bytes[31] = tag;
  return id;
}

}  // namespace

TEST_CASE("contract call reward closed form") {
  // ts=10, sum_p=99, tm=1000 in whole units -> s = 10*99/990 = 1.0 exactly.
  CHECK(contract_call_reward(10 * kMilli, 99 * kMilli, 1000 * kMilli) == 1 * kMilli);
  CHECK(contract_call_reward(0, 99 * kMilli, 1000 * kMilli) == 0);

  bool warning = false;
  CHECK(contract_call_reward(10, 5, 10, &warning) == 0);
  CHECK(warning);
}

TEST_CASE("contract call reward satisfies the payout-gain inequality") {
  // Crediting s must make the caller's payout gain at least ts:
  // tm*s >= ts*(sum_p + s), checked exactly in 128-bit arithmetic.
  Rng rng(7);
  int checked = 0;
  while (checked < 10000) {
    Milli tm = 1 + Milli(rng.uniform_u64(1'000'000'000));
    Milli ts = Milli(rng.uniform_u64(uint64_t(tm)));  // ts < tm
    Milli sum_p = Milli(rng.uniform_u64(1'000'000'000));
    if (tm <= ts) continue;
    Milli s = contract_call_reward(ts, sum_p, tm);
    __int128 lhs = static_cast<__int128>(tm) * s;
    __int128 rhs = static_cast<__int128>(ts) * (sum_p + s);
    CHECK(lhs >= rhs);
    ++checked;
  }
}

TEST_CASE("masternode bonus") {
  CHECK(masternode_bonus(10, kMilli) == 1100);    // n = 1.1
  CHECK(masternode_bonus(100, kMilli) == 2000);   // n = 2
  CHECK(masternode_bonus(0, 5 * kMilli) == 5000); // coefficient floor 1
  CHECK(masternode_bonus(250, kMilli) == 2000);   // capped at 2
}

TEST_CASE("model quality outcomes") {
  auto scores = [](std::vector<int> vals) {
    std::vector<std::pair<NodeId, AccuracyScore>> out;
    for (size_t i = 0; i < vals.size(); ++i)
      out.emplace_back(make_id(uint8_t(i + 1)), AccuracyScore{vals[i]});
    return out;
  };

  SUBCASE("hand-enumerated example") {
    // [900,850,800,700,300], n=0.5: mids=800. 300 < 400 punished; 900 and
    // 850 rewarded with fractions 0.8 and 0.6; 800 and 700 neutral.
    auto verdicts = model_quality_outcomes(scores({900, 850, 800, 700, 300}), 0.5);
    REQUIRE(verdicts.size() == 5);
    CHECK(verdicts[0].outcome == QualityOutcome::Reward);
    CHECK(verdicts[0].fraction == doctest::Approx(0.8));
    CHECK(verdicts[1].outcome == QualityOutcome::Reward);
    CHECK(verdicts[1].fraction == doctest::Approx(0.6));
    CHECK(verdicts[2].outcome == QualityOutcome::Neutral);
    CHECK(verdicts[3].outcome == QualityOutcome::Neutral);
    CHECK(verdicts[4].outcome == QualityOutcome::Punish);
  }
  SUBCASE("all equal scores: nobody rewarded or punished") {
    auto verdicts = model_quality_outcomes(scores({700, 700, 700, 700}), 0.5);
    for (const auto& v : verdicts) CHECK(v.outcome == QualityOutcome::Neutral);
  }
  SUBCASE("single submitter is neutral") {
    auto verdicts = model_quality_outcomes(scores({500}), 0.5);
    REQUIRE(verdicts.size() == 1);
    CHECK(verdicts[0].outcome == QualityOutcome::Neutral);
  }
  SUBCASE("even count uses the mean of the middles") {
    // [900, 600, 400, 100], mids = 500; n=0.5 -> threshold 250.
    auto verdicts = model_quality_outcomes(scores({900, 600, 400, 100}), 0.5);
    CHECK(verdicts[0].outcome == QualityOutcome::Reward);
    CHECK(verdicts[1].outcome == QualityOutcome::Reward);
    CHECK(verdicts[2].outcome == QualityOutcome::Neutral);
    CHECK(verdicts[3].outcome == QualityOutcome::Punish);
  }
  SUBCASE("permutation invariance") {
    auto base = model_quality_outcomes(scores({900, 850, 800, 700, 300}), 0.5);
    std::vector<std::pair<NodeId, AccuracyScore>> shuffled = {
        {make_id(3), AccuracyScore{800}}, {make_id(5), AccuracyScore{300}},
        {make_id(1), AccuracyScore{900}}, {make_id(4), AccuracyScore{700}},
        {make_id(2), AccuracyScore{850}},
    };
    auto permuted = model_quality_outcomes(shuffled, 0.5);
    REQUIRE(base.size() == permuted.size());
    for (size_t i = 0; i < base.size(); ++i) {
      CHECK(base[i].node == permuted[i].node);
      CHECK(base[i].outcome == permuted[i].outcome);
      CHECK(base[i].rank == permuted[i].rank);
    }
  }
}

TEST_CASE("linear penalty") {
  PenaltyPolicy policy;
  policy.linear_rate = 0.08;
  policy.max_pledge = 100 * kMilli;
  CHECK(linear_penalty(policy, 1'000'000) == 8 * kMilli);
  CHECK(linear_penalty(policy, 5 * kMilli) == 5 * kMilli);  // capped at the pool
  // Linear, not compounding: same deduction every offense.
  CHECK(linear_penalty(policy, 1'000'000) == 8 * kMilli);
}

TEST_CASE("exponential penalty") {
  RewardLedger ledger;
  NodeId a = make_id(1);
  Milli pool = 1'000'000;
  CHECK(exponential_penalty(ledger, a, OffenseKind::CommitteeUnanswered, pool) == 2 * kMilli);
  CHECK(exponential_penalty(ledger, a, OffenseKind::CommitteeUnanswered, pool) == 4 * kMilli);
  CHECK(exponential_penalty(ledger, a, OffenseKind::CommitteeUnanswered, pool) == 8 * kMilli);
  // Counters are per offense kind.
  CHECK(exponential_penalty(ledger, a, OffenseKind::LowQualityModel, pool) == 2 * kMilli);
  // Cap at the pool.
  CHECK(exponential_penalty(ledger, a, OffenseKind::LowQualityModel, 3 * kMilli) ==
        3 * kMilli);
  // Counters never reset implicitly.
  CHECK(ledger.offenses[{a, OffenseKind::CommitteeUnanswered}] == 3);
  CHECK(ledger.offenses[{a, OffenseKind::LowQualityModel}] == 2);
}

TEST_CASE("settle pool") {
  RewardLedger ledger;
  NodeId a = make_id(1), b = make_id(2), c = make_id(3);

  SUBCASE("proportional split 1:1:2") {
    ledger.scores = {{a, kMilli}, {b, kMilli}, {c, 2 * kMilli}};
    auto payouts = settle_pool(ledger, 100 * kMilli);
    CHECK(payouts[a] == 25 * kMilli);
    CHECK(payouts[b] == 25 * kMilli);
    CHECK(payouts[c] == 50 * kMilli);
  }
  SUBCASE("residue goes to the smallest NodeId among ties") {
    ledger.scores = {{a, kMilli}, {b, kMilli}, {c, kMilli}};
    auto payouts = settle_pool(ledger, 100);
    CHECK(payouts[a] == 34);
    CHECK(payouts[b] == 33);
    CHECK(payouts[c] == 33);
  }
  SUBCASE("single node takes everything") {
    ledger.scores = {{a, 5 * kMilli}};
    auto payouts = settle_pool(ledger, 77);
    CHECK(payouts[a] == 77);
  }
  SUBCASE("zero scores pay nothing") {
    ledger.scores = {{a, 0}};
    CHECK(settle_pool(ledger, 100).empty());
  }
  SUBCASE("payouts are monotone in own score") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      ledger.scores = {{a, Milli(1 + rng.uniform_u64(10000))},
                       {b, Milli(1 + rng.uniform_u64(10000))},
                       {c, Milli(1 + rng.uniform_u64(10000))}};
      Milli total = 1'000'000;
      auto before = settle_pool(ledger, total);
      ledger.scores[b] += Milli(1 + rng.uniform_u64(5000));
      auto after = settle_pool(ledger, total);
      CHECK(after[b] >= before[b]);
    }
  }
}

TEST_CASE("apply_event dispatch") {
  RewardLedger ledger;
  ledger.tm = 1000 * kMilli;
  PenaltyPolicy policy;
  NodeId a = make_id(1);
  ledger.scores[a] = 99 * kMilli;

  SUBCASE("active response credits one point") {
    IncentiveEvent ev;
    ev.kind = IncentiveKind::CommitteeActivelyResponds;
    ev.subject = a;
    auto out = apply_event(ledger, ev, policy, 0);
    CHECK(out.score_delta == kMilli);
    CHECK(ledger.score_of(a) == 100 * kMilli);
  }
  SUBCASE("submit verification routes to the contract-call reward") {
    IncentiveEvent ev;
    ev.kind = IncentiveKind::CommitteeSubmitVerification;
    ev.subject = a;
    ev.ts = 10 * kMilli;
    auto out = apply_event(ledger, ev, policy, 0);
    CHECK(out.score_delta == contract_call_reward(10 * kMilli, 99 * kMilli, 1000 * kMilli));
  }
  SUBCASE("quality reward uses the rank fraction") {
    IncentiveEvent ev;
    ev.kind = IncentiveKind::HighQualityModel;
    ev.subject = a;
    ev.rank = 0;
    ev.m = 5;
    ev.budget = 10 * kMilli;
    auto out = apply_event(ledger, ev, policy, 0);
    CHECK(out.score_delta == 8 * kMilli);  // (5-0-1)/5 of the budget
  }
  SUBCASE("unanswered committee node pays exponentially") {
    IncentiveEvent ev;
    ev.kind = IncentiveKind::CommitteeUnanswered;
    ev.subject = a;
    auto out = apply_event(ledger, ev, policy, 100 * kMilli);
    CHECK(out.penalty == 2 * kMilli);
  }
}
