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

#include "dfl/committee.hpp"

#include <algorithm>
#include <stdexcept>

namespace dfl {

void ElectionConfig::validate() const {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("election p must be in [0,1]");
  if (!is_valid_committee_size(need))
    throw std::invalid_argument("committee size must be 3F+1 with F >= 1");
}

bool CommitteeView::contains(const NodeId& n) const {
  return std::find(members.begin(), members.end(), n) != members.end();
}

int CommitteeView::index_of(const NodeId& n) const {
  auto it = std::find(members.begin(), members.end(), n);
  return it == members.end() ? -1 : static_cast<int>(it - members.begin());
}

void CommitteeView::encode(ByteWriter& w) const {
  w.u32(static_cast<uint32_t>(members.size()));
  for (const auto& m : members) m.encode(w);
  master.encode(w);
  w.u64(elect_times_remaining);
  w.u64(epoch);
  w.u64(view_changes);
}

CommitteeView CommitteeView::decode(ByteReader& r) {
  CommitteeView v;
  uint32_t n = r.u32();
  v.members.reserve(n);
  for (uint32_t i = 0; i < n; ++i) v.members.push_back(NodeId::decode(r));
  v.master = NodeId::decode(r);
  v.elect_times_remaining = r.u64();
  v.epoch = r.u64();
  v.view_changes = r.u64();
  return v;
}

bool is_valid_committee_size(int n) { return n >= 4 && (n - 1) % 3 == 0; }

int fault_threshold(int n) {
  if (!is_valid_committee_size(n))
    throw std::invalid_argument("committee size must be 3F+1 with F >= 1");
  return (n - 1) / 3;
}

double eth_bar(const std::vector<Candidate>& candidates, int need) {
  if (static_cast<int>(candidates.size()) < need)
    throw std::invalid_argument("fewer candidates than committee size");
  std::vector<const Candidate*> ranked;
  ranked.reserve(candidates.size());
  for (const auto& c : candidates) ranked.push_back(&c);
  std::sort(ranked.begin(), ranked.end(), [](const Candidate* a, const Candidate* b) {
    if (a->pledge_eth != b->pledge_eth) return a->pledge_eth > b->pledge_eth;
    return a->node < b->node;
  });
  double sum = 0;
  for (int i = 0; i < need; ++i) sum += ranked[i]->pledge_eth;
  return sum / need;
}

double candidate_weight(const Candidate& c, double p, double eth_bar_value) {
  return p * c.pledge_eth + (1.0 - p) * c.acc * eth_bar_value;
}

std::vector<NodeId> run_election(const std::vector<Candidate>& clist,
                                 const ElectionConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(clist.size()) < cfg.need) return {};

  const double bar = eth_bar(clist, cfg.need);
  struct Entry {
    NodeId node;
    double w;
  };
  std::vector<Entry> entries;
  entries.reserve(clist.size());
  for (const auto& c : clist) entries.push_back({c.node, candidate_weight(c, cfg.p, bar)});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.w != b.w) return a.w > b.w;
    return a.node < b.node;
  });

  std::vector<NodeId> result;
  result.reserve(cfg.need);
  for (int i = 0; i < cfg.need; ++i) result.push_back(entries[i].node);
  return result;
}

NodeId select_master(const CommitteeView& view) {
  if (view.members.empty()) throw std::invalid_argument("empty committee view");
  size_t idx = (view.epoch + view.view_changes) % view.members.size();
  return view.members[idx];
}

bool should_reelect(const CommitteeView& view) { return view.elect_times_remaining == 0; }

}  // namespace dfl
