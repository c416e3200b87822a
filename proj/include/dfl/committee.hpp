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
#include <vector>

#include "dfl/bytes.hpp"
#include "dfl/crypto.hpp"

namespace dfl {

// Stake-weighted committee election. Every tie anywhere breaks by NodeId
// ascending so all honest nodes reach byte-identical results.

struct Candidate {
  NodeId node;
  double pledge_eth = 0;  // currency units
  double acc = 0;         // average historical accuracy in [0,1]
};

struct ElectionConfig {
  double p = 0.3;  // weight adjustment coefficient; accuracy-dominant default
  int need = 4;    // committee size, must be 3F+1

  void validate() const;
};

struct CommitteeView {
  std::vector<NodeId> members;  // election order
  NodeId master;
  uint64_t elect_times_remaining = 0;
  uint64_t epoch = 0;
  uint64_t view_changes = 0;  // PBFT view-change counter within the epoch

  bool contains(const NodeId& n) const;
  int index_of(const NodeId& n) const;  // -1 when absent

  void encode(ByteWriter& w) const;
  static CommitteeView decode(ByteReader& r);
};

// True iff n has the form 3F+1 with F >= 1.
bool is_valid_committee_size(int n);
// F = (n-1)/3; throws std::invalid_argument when n is not 3F+1.
int fault_threshold(int n);

// Mean pledge of the `need` candidates with the highest pledges, ranked by
// pledge alone (the pre-ranking pass that breaks the weight circularity).
double eth_bar(const std::vector<Candidate>& candidates, int need);

// w = p*eth + (1-p)*acc*eth_bar
double candidate_weight(const Candidate& c, double p, double eth_bar_value);

// The `need` candidates with the highest weights, ordered by descending
// weight. Fewer than `need` candidates is a defined outcome: empty result,
// the incumbent committee continues.
std::vector<NodeId> run_election(const std::vector<Candidate>& clist,
                                 const ElectionConfig& cfg);

NodeId select_master(const CommitteeView& view);

bool should_reelect(const CommitteeView& view);

}  // namespace dfl
