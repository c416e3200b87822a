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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dfl/crypto.hpp"
#include "dfl/fl.hpp"
#include "dfl/messages.hpp"

namespace dfl {

// The reward/penalty economy. Incentive scores and currency are both
// integer milli-units so pool conservation can be checked exactly.

enum class IncentiveKind : uint8_t {
  CommitteeCorrectAggregation,   // +1
  CommitteeEvaluatesCorrectly,   // +1
  CommitteeSubmitVerification,   // contract-call reward
  CommitteeMasternodeWorking,    // masternode bonus
  CommitteeUnanswered,           // exponential deduction
  CommitteeActivelyResponds,     // +1
  ModelNotSubmittedAfterPledge,  // linear deduction
  LowQualityModel,               // exponential deduction
  HighQualityModel,              // quality reward
  RegularQualityModel,           // quality reward (neutral rank yields 0)
};

const char* incentive_kind_name(IncentiveKind k);

// Scores saturate here; the contract-call reward diverges as the call cost
// approaches the whole pool, and saturation keeps sums inside int64.
inline constexpr Milli kScoreCap = Milli(1) << 62;

// Offense kinds with their own exponential counters.
enum class OffenseKind : uint8_t {
  CommitteeUnanswered = 0,
  LowQualityModel = 1,
};

struct PenaltyPolicy {
  double linear_rate = 0.08;
  Milli max_pledge = 10 * kMilli;

  void validate() const;
};

struct RewardLedger {
  std::map<NodeId, Milli> scores;                          // incentive scores p_i
  Milli tm = 0;                                            // reward pool
  std::map<std::pair<NodeId, OffenseKind>, int> offenses;  // counters x

  Milli score_sum() const;
  Milli score_of(const NodeId& n) const;
  void credit(const NodeId& n, Milli delta);
};

struct IncentiveEvent {
  IncentiveKind kind;
  NodeId subject;
  uint64_t round = 1;
  // Magnitude inputs; which ones are read depends on kind.
  Milli ts = 0;       // contract-call gas cost
  int rs = 0;         // unique requests this stage
  Milli ps = kMilli;  // masternode base score
  int rank = 0;       // zero-based descending rank (quality rewards)
  int m = 1;          // submitter count (quality rewards)
  Milli budget = 0;   // per-round model reward budget
};

// What applying an event did: score movement and any currency to pull from
// the subject's fund pool (the contract caps it at the pool balance).
struct IncentiveOutcome {
  Milli score_delta = 0;
  Milli penalty = 0;  // uncapped currency deduction
  bool warning = false;
};

// Contract-call reward s = ceil(ts * sum_p / (tm - ts)), the smallest
// integer satisfying tm*s >= ts*(sum_p + s). Requires tm > ts; otherwise
// credits nothing and flags a configuration warning.
Milli contract_call_reward(Milli ts, Milli score_sum, Milli tm, bool* warning = nullptr);

// s = (1 + min(RS,100)/100) * PS
Milli masternode_bonus(int rs, Milli ps);

enum class QualityOutcome : uint8_t { Reward, Punish, Neutral };

struct QualityVerdict {
  NodeId node;
  QualityOutcome outcome = QualityOutcome::Neutral;
  int rank = 0;          // zero-based rank in descending score order
  double fraction = 0;   // reward fraction (m - rank - 1)/m when rewarded
};

// Median-anchored quality judgement: score < median*n punishes, score >
// median rewards with fraction (m - r - 1)/m, anything else is neutral.
// Permutation-invariant; ranks tie-break by NodeId ascending.
std::vector<QualityVerdict> model_quality_outcomes(
    const std::vector<std::pair<NodeId, AccuracyScore>>& scores, double malicious_rate);

// 8% of the maximum pledge, capped at the remaining pool balance.
Milli linear_penalty(const PenaltyPolicy& policy, Milli pool_balance);

// Increments the per-(node, kind) counter and deducts 2^x units, capped.
Milli exponential_penalty(RewardLedger& ledger, const NodeId& node, OffenseKind kind,
                          Milli pool_balance);

// Dispatches a table event to the matching rule above.
IncentiveOutcome apply_event(RewardLedger& ledger, const IncentiveEvent& event,
                             const PenaltyPolicy& policy, Milli pool_balance);

// Proportional payout: node n gets payout_total * p_n / sum_p, rounding
// residue to the highest-score node (ties by NodeId ascending).
std::map<NodeId, Milli> settle_pool(const RewardLedger& ledger, Milli payout_total);

}  // namespace dfl
