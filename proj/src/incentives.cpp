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

#include "dfl/incentives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dfl {

const char* incentive_kind_name(IncentiveKind k) {
  switch (k) {
    case IncentiveKind::CommitteeCorrectAggregation: return "committee-correct-aggregation";
    case IncentiveKind::CommitteeEvaluatesCorrectly: return "committee-evaluates-correctly";
    case IncentiveKind::CommitteeSubmitVerification: return "committee-submit-verification";
    case IncentiveKind::CommitteeMasternodeWorking: return "committee-masternode-working";
    case IncentiveKind::CommitteeUnanswered: return "committee-unanswered";
    case IncentiveKind::CommitteeActivelyResponds: return "committee-actively-responds";
    case IncentiveKind::ModelNotSubmittedAfterPledge: return "model-not-submitted";
    case IncentiveKind::LowQualityModel: return "low-quality-model";
    case IncentiveKind::HighQualityModel: return "high-quality-model";
    case IncentiveKind::RegularQualityModel: return "regular-quality-model";
  }
  return "?";
}

void PenaltyPolicy::validate() const {
  if (!(linear_rate > 0 && linear_rate < 1))
    throw std::invalid_argument("linear_rate must be in (0,1)");
  if (max_pledge < 0) throw std::invalid_argument("max_pledge must be >= 0");
}

Milli RewardLedger::score_sum() const {
  __int128 sum = 0;
  for (const auto& [node, p] : scores) sum += p;
  if (sum > kScoreCap) return kScoreCap;
  return static_cast<Milli>(sum);
}

Milli RewardLedger::score_of(const NodeId& n) const {
  auto it = scores.find(n);
  return it == scores.end() ? 0 : it->second;
}

void RewardLedger::credit(const NodeId& n, Milli delta) {
  Milli& p = scores[n];
  __int128 next = static_cast<__int128>(p) + delta;
  if (next < 0) next = 0;  // scores never go negative
  if (next > kScoreCap) next = kScoreCap;
  p = static_cast<Milli>(next);
}

Milli contract_call_reward(Milli ts, Milli score_sum, Milli tm, bool* warning) {
  if (warning) *warning = false;
  if (ts < 0 || score_sum < 0) throw std::invalid_argument("negative reward inputs");
  if (tm <= ts) {
    // Reward pool cannot cover the call cost; the closed form is undefined.
    if (warning) *warning = true;
    return 0;
  }
  if (ts == 0 || score_sum == 0) return 0;
  __int128 num = static_cast<__int128>(ts) * score_sum;
  __int128 den = tm - ts;
  __int128 s = (num + den - 1) / den;  // ceil: smallest s with tm*s >= ts*(sum+s)
  // The closed form diverges as tm -> ts; saturate instead of overflowing.
  if (s > kScoreCap) s = kScoreCap;
  return static_cast<Milli>(s);
}

Milli masternode_bonus(int rs, Milli ps) {
  if (rs < 0 || ps < 0) throw std::invalid_argument("negative bonus inputs");
  int capped = std::min(rs, 100);
  return ps + ps * capped / 100;
}

std::vector<QualityVerdict> model_quality_outcomes(
    const std::vector<std::pair<NodeId, AccuracyScore>>& scores, double malicious_rate) {
  if (scores.empty()) throw std::invalid_argument("empty score list");
  if (!(malicious_rate > 0 && malicious_rate < 1))
    throw std::invalid_argument("malicious rate must be in (0,1)");

  std::vector<std::pair<NodeId, AccuracyScore>> ranked = scores;
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.value != b.second.value) return a.second.value > b.second.value;
    return a.first < b.first;
  });

  const int m = static_cast<int>(ranked.size());
  std::vector<int> sorted_values;
  sorted_values.reserve(m);
  for (const auto& [node, s] : ranked) sorted_values.push_back(s.value);
  // ranked is descending; median over values (mean of the two middles when even)
  double mids = (m % 2 == 1)
                    ? double(sorted_values[m / 2])
                    : (double(sorted_values[m / 2 - 1]) + double(sorted_values[m / 2])) / 2.0;

  std::vector<QualityVerdict> out;
  out.reserve(m);
  for (int r = 0; r < m; ++r) {
    QualityVerdict v;
    v.node = ranked[r].first;
    v.rank = r;
    double score = ranked[r].second.value;
    if (score < mids * malicious_rate) {
      v.outcome = QualityOutcome::Punish;
    } else if (score > mids) {
      v.outcome = QualityOutcome::Reward;
      v.fraction = double(m - r - 1) / double(m);
    }
    out.push_back(v);
  }
  return out;
}

Milli linear_penalty(const PenaltyPolicy& policy, Milli pool_balance) {
  policy.validate();
  Milli d = static_cast<Milli>(std::llround(policy.linear_rate * double(policy.max_pledge)));
  return std::min(d, std::max<Milli>(pool_balance, 0));
}

Milli exponential_penalty(RewardLedger& ledger, const NodeId& node, OffenseKind kind,
                          Milli pool_balance) {
  int& x = ledger.offenses[{node, kind}];
  ++x;  // counter starts at 1 on the first offense
  Milli d;
  if (x >= 40) {
    d = std::numeric_limits<Milli>::max() / 4;  // 2^40+ exceeds any pool
  } else {
    d = (Milli(1) << x) * kMilli;
  }
  return std::min(d, std::max<Milli>(pool_balance, 0));
}

IncentiveOutcome apply_event(RewardLedger& ledger, const IncentiveEvent& event,
                             const PenaltyPolicy& policy, Milli pool_balance) {
  IncentiveOutcome out;
  switch (event.kind) {
    case IncentiveKind::CommitteeCorrectAggregation:
    case IncentiveKind::CommitteeEvaluatesCorrectly:
    case IncentiveKind::CommitteeActivelyResponds:
      out.score_delta = kMilli;
      break;
    case IncentiveKind::CommitteeSubmitVerification: {
      bool warn = false;
      out.score_delta = contract_call_reward(event.ts, ledger.score_sum(), ledger.tm, &warn);
      out.warning = warn;
      break;
    }
    case IncentiveKind::CommitteeMasternodeWorking:
      out.score_delta = masternode_bonus(event.rs, event.ps);
      break;
    case IncentiveKind::CommitteeUnanswered:
      out.penalty = exponential_penalty(ledger, event.subject, OffenseKind::CommitteeUnanswered,
                                        pool_balance);
      break;
    case IncentiveKind::ModelNotSubmittedAfterPledge:
      out.penalty = linear_penalty(policy, pool_balance);
      break;
    case IncentiveKind::LowQualityModel:
      out.penalty = exponential_penalty(ledger, event.subject, OffenseKind::LowQualityModel,
                                        pool_balance);
      break;
    case IncentiveKind::HighQualityModel:
    case IncentiveKind::RegularQualityModel: {
      if (event.m <= 0 || event.rank < 0 || event.rank >= event.m)
        throw std::invalid_argument("bad quality reward rank");
      __int128 amount = static_cast<__int128>(event.budget) * (event.m - event.rank - 1) /
                        event.m;
      out.score_delta = static_cast<Milli>(amount);
      break;
    }
  }
  if (out.score_delta != 0) ledger.credit(event.subject, out.score_delta);
  return out;
}

std::map<NodeId, Milli> settle_pool(const RewardLedger& ledger, Milli payout_total) {
  std::map<NodeId, Milli> payouts;
  Milli sum = ledger.score_sum();
  if (sum <= 0 || payout_total <= 0) return payouts;

  Milli distributed = 0;
  const NodeId* top = nullptr;
  Milli top_score = -1;
  for (const auto& [node, p] : ledger.scores) {
    Milli share = static_cast<Milli>(static_cast<__int128>(payout_total) * p / sum);
    if (share > 0) payouts[node] = share;
    distributed += share;
    if (p > top_score) {  // map order gives NodeId-ascending tie-break
      top_score = p;
      top = &node;
    }
  }
  Milli residue = payout_total - distributed;
  if (residue > 0 && top) payouts[*top] += residue;
  return payouts;
}

}  // namespace dfl
