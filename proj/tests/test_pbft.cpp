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

#include <deque>
#include <memory>

#include "dfl/pbft.hpp"
#include "dfl/workflow.hpp"

using namespace dfl;

namespace {

// A deterministic bus: broadcasts queue messages and timers in virtual time;
// step() drains everything due. Keeps the replica logic under a microscope
// without the network simulator.
struct Bus {
  struct Party {
    NodeId id;
    KeyPair kp;
    std::unique_ptr<PbftReplica> replica;
    std::vector<ConsensusRequest> executed;
    bool offline = false;  // silent: drops outbound
  };

  int64_t now = 0;
  std::deque<std::pair<int64_t, std::function<void()>>> timers;
  std::deque<std::pair<NodeId, PbftMessage>> mailbox;  // (dst, msg)
  std::vector<std::unique_ptr<Party>> parties;
  CommitteeView view;
  std::map<NodeId, PublicKey> registry;
  uint64_t pbft_messages = 0;

  explicit Bus(int n, int64_t window_ms = 100, int64_t view_timeout_ms = 5000) {
    for (int i = 0; i < n; ++i) {
      auto [id, kp] = generate_identity(uint64_t(i + 1));
      auto party = std::make_unique<Party>();
      party->id = id;
      party->kp = kp;
      parties.push_back(std::move(party));
      registry[id] = kp.public_key;
    }
    std::sort(parties.begin(), parties.end(),
              [](const auto& a, const auto& b) { return a->id < b->id; });
    for (const auto& p : parties) view.members.push_back(p->id);
    view.epoch = 0;
    view.master = select_master(view);

    for (auto& p : parties) {
      Party* raw = p.get();
      PbftReplica::Hooks hooks;
      hooks.broadcast = [this, raw](const PbftMessage& msg) {
        if (raw->offline) return;
        ++pbft_messages;
        for (const auto& other : parties)
          if (other->id != raw->id) mailbox.emplace_back(other->id, msg);
      };
      hooks.send_split = [this, raw](const PbftMessage& a, const PbftMessage& b) {
        if (raw->offline) return;
        size_t i = 0;
        for (const auto& other : parties) {
          if (other->id == raw->id) continue;
          mailbox.emplace_back(other->id, (i % 2 == 0) ? a : b);
          ++i;
        }
      };
      hooks.on_executed = [raw](const ConsensusRequest& req) {
        raw->executed.push_back(req);
      };
      hooks.schedule = [this](int64_t delay, std::function<void()> fn) {
        timers.emplace_back(now + delay, std::move(fn));
      };
      hooks.now = [this] { return now; };
      PbftReplica::Options opts;
      opts.aggregation_window_ms = window_ms;
      opts.view_timeout_ms = view_timeout_ms;
      p->replica = std::make_unique<PbftReplica>(p->id, p->kp, std::move(hooks), opts);
      p->replica->configure(view, registry, 1, Phase::Pledge);
    }
  }

  Party& master() {
    for (auto& p : parties)
      if (p->replica->is_master()) return *p;
    throw std::logic_error("no master");
  }

  void deliver_all() {
    while (!mailbox.empty()) {
      auto [dst, msg] = mailbox.front();
      mailbox.pop_front();
      for (auto& p : parties)
        if (p->id == dst && !p->offline) p->replica->on_message(msg);
    }
  }

  // Advance time, firing due timers and draining the mailbox.
  void run_for(int64_t ms) {
    int64_t deadline = now + ms;
    while (true) {
      deliver_all();
      int64_t next = INT64_MAX;
      for (const auto& [at, fn] : timers) next = std::min(next, at);
      if (next == INT64_MAX || next > deadline) break;
      now = next;
      std::deque<std::pair<int64_t, std::function<void()>>> rest;
      std::deque<std::function<void()>> due;
      for (auto& [at, fn] : timers) {
        if (at <= now)
          due.push_back(std::move(fn));
        else
          rest.emplace_back(at, std::move(fn));
      }
      timers = std::move(rest);
      for (auto& fn : due) fn();
    }
    now = deadline;
    deliver_all();
  }

  ConsensusRequest make_request(uint64_t seed, Milli money = 1000) {
    auto [id, kp] = generate_identity(1000 + seed);
    registry[id] = kp.public_key;
    for (auto& p : parties) p->replica->configure(view, registry, 1, Phase::Pledge);
    return build_pledge_request(1, id, kp, money);
  }
};

}  // namespace

TEST_CASE("single request commits at all four replicas") {
  Bus bus(4);
  ConsensusRequest req = bus.make_request(1);
  for (auto& p : bus.parties) p->replica->submit_request(req);
  bus.run_for(1000);

  for (auto& p : bus.parties) {
    REQUIRE(p->executed.size() == 1);
    CHECK(p->executed[0].id == req.id);
  }
  // Hand-traced exchange: one PrePrepare broadcast, three Prepare
  // broadcasts (backups), four Commit broadcasts.
  CHECK(bus.parties[0]->replica->stats().preprepares_sent +
            bus.parties[1]->replica->stats().preprepares_sent +
            bus.parties[2]->replica->stats().preprepares_sent +
            bus.parties[3]->replica->stats().preprepares_sent ==
        1);
  uint64_t prepares = 0, commits = 0;
  for (auto& p : bus.parties) {
    prepares += p->replica->stats().prepares_sent;
    commits += p->replica->stats().commits_sent;
  }
  CHECK(prepares == 3);
  CHECK(commits == 4);
}

TEST_CASE("requests in one window land in a single batch") {
  Bus bus(4);
  auto r1 = bus.make_request(1);
  auto r2 = bus.make_request(2);
  auto r3 = bus.make_request(3);
  for (auto& p : bus.parties)
    for (const auto& r : {r1, r2, r3}) p->replica->submit_request(r);
  bus.run_for(1000);

  for (auto& p : bus.parties) CHECK(p->executed.size() == 3);
  uint64_t preprepares = 0;
  for (auto& p : bus.parties) preprepares += p->replica->stats().preprepares_sent;
  CHECK(preprepares == 1);
}

TEST_CASE("one silent replica cannot stop a 3F+1 committee") {
  Bus bus(4);
  // Silence a non-master backup.
  for (auto& p : bus.parties) {
    if (!p->replica->is_master()) {
      p->offline = true;
      break;
    }
  }
  ConsensusRequest req = bus.make_request(1);
  for (auto& p : bus.parties)
    if (!p->offline) p->replica->submit_request(req);
  bus.run_for(1000);

  int executed = 0;
  for (auto& p : bus.parties)
    if (!p->offline && p->executed.size() == 1) ++executed;
  CHECK(executed == 3);  // 2F+1 = 3 still commit
}

TEST_CASE("silent master triggers a view change and the request still lands") {
  Bus bus(4, 100, 500);
  bus.master().offline = true;
  NodeId old_master = bus.master().id;

  ConsensusRequest req = bus.make_request(1);
  for (auto& p : bus.parties) p->replica->submit_request(req);
  bus.run_for(5000);

  int executed = 0;
  for (auto& p : bus.parties)
    if (!p->offline && p->executed.size() == 1) ++executed;
  CHECK(executed == 3);
  for (auto& p : bus.parties) {
    if (p->offline) continue;
    CHECK(p->replica->view() >= 1);
    CHECK(p->replica->master() != old_master);
  }
}

TEST_CASE("equivocating master is detected and replaced") {
  Bus bus(4, 100, 500);
  Bus::Party& master = bus.master();
  // Rebuild the master's replica with the equivocation knob on.
  {
    PbftReplica::Hooks hooks;
    Bus* b = &bus;
    Bus::Party* raw = &master;
    hooks.broadcast = [b, raw](const PbftMessage& msg) {
      for (const auto& other : b->parties)
        if (other->id != raw->id) b->mailbox.emplace_back(other->id, msg);
    };
    hooks.send_split = [b, raw](const PbftMessage& x, const PbftMessage& y) {
      size_t i = 0;
      for (const auto& other : b->parties) {
        if (other->id == raw->id) continue;
        b->mailbox.emplace_back(other->id, (i % 2 == 0) ? y : x);
        ++i;
      }
    };
    hooks.on_executed = [raw](const ConsensusRequest& req) {
      raw->executed.push_back(req);
    };
    hooks.schedule = [b](int64_t delay, std::function<void()> fn) {
      b->timers.emplace_back(b->now + delay, std::move(fn));
    };
    hooks.now = [b] { return b->now; };
    PbftReplica::Options opts;
    opts.aggregation_window_ms = 100;
    opts.view_timeout_ms = 500;
    opts.equivocate = true;
    master.replica = std::make_unique<PbftReplica>(master.id, master.kp, std::move(hooks),
                                                   opts);
    master.replica->configure(bus.view, bus.registry, 1, Phase::Pledge);
  }

  auto r1 = bus.make_request(1);
  auto r2 = bus.make_request(2);
  for (auto& p : bus.parties)
    for (const auto& r : {r1, r2}) p->replica->submit_request(r);
  bus.run_for(10000);

  // Honest replicas agree on the same executed set containing both requests.
  std::vector<Bus::Party*> honest;
  for (auto& p : bus.parties)
    if (p.get() != &master) honest.push_back(p.get());
  for (auto* p : honest) {
    CHECK(p->executed.size() == 2);
    CHECK(p->replica->view() >= 1);
  }
  std::set<Digest> a, b;
  for (const auto& r : honest[0]->executed) a.insert(r.id);
  for (const auto& r : honest[1]->executed) b.insert(r.id);
  CHECK(a == b);
}

TEST_CASE("no honest divergence in executed order") {
  Bus bus(7);
  std::vector<ConsensusRequest> reqs;
  for (int i = 0; i < 5; ++i) reqs.push_back(bus.make_request(uint64_t(i)));
  for (auto& p : bus.parties)
    for (const auto& r : reqs) p->replica->submit_request(r);
  bus.run_for(2000);

  for (auto& p : bus.parties) REQUIRE(p->executed.size() == 5);
  for (size_t i = 1; i < bus.parties.size(); ++i) {
    for (size_t k = 0; k < 5; ++k)
      CHECK(bus.parties[i]->executed[k].id == bus.parties[0]->executed[k].id);
  }
}

TEST_CASE("message totals scale quadratically with committee size") {
  std::vector<std::pair<int, uint64_t>> samples;
  for (int n : {4, 7, 10, 13}) {
    Bus bus(n);
    ConsensusRequest req = bus.make_request(1);
    for (auto& p : bus.parties) p->replica->submit_request(req);
    bus.run_for(2000);
    uint64_t total = 0;
    for (auto& p : bus.parties) {
      total += p->replica->stats().preprepares_sent * (n - 1);
      total += p->replica->stats().prepares_sent * (n - 1);
      total += p->replica->stats().commits_sent * (n - 1);
    }
    samples.emplace_back(n, total);
  }
  // 1 + (n-1) + n broadcasts, each to n-1 peers: strictly superlinear.
  for (size_t i = 1; i < samples.size(); ++i) {
    double ratio = double(samples[i].second) / double(samples[i - 1].second);
    double n_ratio = double(samples[i].first) / double(samples[i - 1].first);
    CHECK(ratio > n_ratio);  // grows faster than linearly
  }
}
