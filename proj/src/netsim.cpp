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

#include "dfl/netsim.hpp"

#include <stdexcept>

namespace dfl {

void LatencyModel::validate() const {
  if (base_ms < 0 || jitter_ms < 0) throw std::invalid_argument("negative latency");
  if (!(drop_rate >= 0.0 && drop_rate < 1.0))
    throw std::invalid_argument("drop_rate must be in [0,1)");
}

AdversaryBehavior adversary_behavior_from_string(const std::string& s) {
  if (s == "silent") return AdversaryBehavior::Silent;
  if (s == "equivocating-master") return AdversaryBehavior::EquivocatingMaster;
  if (s == "wrong-hash-replier") return AdversaryBehavior::WrongHashReplier;
  if (s == "replayer") return AdversaryBehavior::Replayer;
  if (s == "low-quality-submitter") return AdversaryBehavior::LowQualitySubmitter;
  if (s == "no-submit-after-pledge") return AdversaryBehavior::NoSubmitAfterPledge;
  throw std::invalid_argument("unknown adversary behavior: " + s);
}

const char* adversary_behavior_name(AdversaryBehavior b) {
  switch (b) {
    case AdversaryBehavior::Silent: return "silent";
    case AdversaryBehavior::EquivocatingMaster: return "equivocating-master";
    case AdversaryBehavior::WrongHashReplier: return "wrong-hash-replier";
    case AdversaryBehavior::Replayer: return "replayer";
    case AdversaryBehavior::LowQualitySubmitter: return "low-quality-submitter";
    case AdversaryBehavior::NoSubmitAfterPledge: return "no-submit-after-pledge";
  }
  return "?";
}

Simulator::Simulator(uint64_t seed, LatencyModel latency, ProcessingModel proc)
    : latency_(latency), proc_(proc), rng_(Rng::derive(seed, "netsim")) {
  latency_.validate();
}

void Simulator::add_node(const NodeId& id, MessageHandler handler) {
  handlers_[id] = std::move(handler);
  node_free_at_.emplace(id, 0);
}

void Simulator::push(int64_t time, bool block_tick, std::function<void()> fn) {
  if (time < now_) throw std::invalid_argument("cannot schedule into the past");
  if (!block_tick) ++live_events_;
  queue_.push(Ev{time, next_seq_++, block_tick, std::move(fn)});
}

void Simulator::send(const NodeId& src, const NodeId& dst, Bytes payload) {
  ++stats_.scheduled;
  if (latency_.drop_rate > 0 && rng_.bernoulli(latency_.drop_rate)) {
    ++stats_.dropped;
    return;
  }
  deliver(src, dst, std::move(payload));
}

void Simulator::send_reliable(const NodeId& src, const NodeId& dst, Bytes payload) {
  ++stats_.scheduled;
  deliver(src, dst, std::move(payload));
}

void Simulator::deliver(const NodeId& src, const NodeId& dst, Bytes payload) {
  auto it = handlers_.find(dst);
  if (it == handlers_.end()) return;  // departed node

  int64_t arrival = now_ + latency_.base_ms +
                    (latency_.jitter_ms > 0
                         ? int64_t(rng_.uniform_u64(uint64_t(latency_.jitter_ms) + 1))
                         : 0);
  int64_t& free_at = node_free_at_[dst];
  int64_t start = std::max(arrival, free_at);
  int64_t done = start + proc_.cost_ms(payload.size());
  free_at = done;

  Envelope env;
  env.src = src;
  env.dst = dst;
  env.payload = std::move(payload);
  env.send_time = now_;
  env.deliver_time = done;

  push(done, false, [this, env = std::move(env)]() {
    ++stats_.delivered;
    stats_.payload_bytes += env.payload.size();
    if (trace_enabled_) {
      trace_.push_back(TraceRow{env.deliver_time, env.send_time, env.src, env.dst,
                                env.payload.size(),
                                env.payload.empty() ? uint8_t(0) : env.payload[0]});
    }
    auto h = handlers_.find(env.dst);
    if (h != handlers_.end()) h->second(env);
  });
}

void Simulator::broadcast(const NodeId& src, const std::vector<NodeId>& dsts,
                          const Bytes& payload) {
  for (const auto& dst : dsts) {
    if (dst == src) continue;
    send(src, dst, payload);
  }
}

uint64_t Simulator::schedule_timer(int64_t delay_ms, std::function<void()> fn) {
  if (delay_ms < 0) throw std::invalid_argument("negative timer delay");
  uint64_t id = next_seq_;
  push(now_ + delay_ms, false, std::move(fn));
  return id;
}

void Simulator::schedule_block_tick(int64_t delay_ms, std::function<void()> fn) {
  if (delay_ms < 0) throw std::invalid_argument("negative block delay");
  push(now_ + delay_ms, true, std::move(fn));
}

SimReport Simulator::run_until(const std::function<bool()>& predicate,
                               int64_t time_limit_ms) {
  SimReport report;
  if (predicate && predicate()) {
    report.completed = true;
    report.end_time_ms = now_;
    return report;
  }
  while (!queue_.empty()) {
    const Ev& top = queue_.top();
    if (top.time > time_limit_ms) {
      report.timed_out = true;
      report.end_time_ms = now_;
      return report;
    }
    Ev ev = std::move(const_cast<Ev&>(top));
    queue_.pop();
    now_ = ev.time;
    if (!ev.block_tick) --live_events_;
    ev.fn();
    ++report.events_processed;
    if (predicate && predicate()) {
      report.completed = true;
      report.end_time_ms = now_;
      return report;
    }
  }
  report.deadlock = true;
  report.end_time_ms = now_;
  return report;
}

}  // namespace dfl
