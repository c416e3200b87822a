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
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "dfl/crypto.hpp"
#include "dfl/messages.hpp"
#include "dfl/rng.hpp"

namespace dfl {

// Seeded discrete-event network with a virtual millisecond clock. All
// nondeterminism (latency, drops, block gaps) comes from the run seed, so
// identical (config, seed) replays identical event traces.

struct Envelope {
  NodeId src;
  NodeId dst;
  Bytes payload;
  int64_t send_time = 0;
  int64_t deliver_time = 0;
};

struct LatencyModel {
  int64_t base_ms = 50;
  int64_t jitter_ms = 20;  // uniform in [0, jitter_ms]
  double drop_rate = 0.0;

  void validate() const;
};

// Receiver-side serial processing: a node handles one message at a time and
// charges proc_base_ms + proc_per_kib_ms per KiB of payload. This is what
// makes iteration time grow with load, mirroring a saturating server.
struct ProcessingModel {
  int64_t proc_base_ms = 2;
  int64_t proc_per_kib_ms = 1;

  int64_t cost_ms(size_t payload_bytes) const {
    return proc_base_ms + proc_per_kib_ms * int64_t(payload_bytes / 1024);
  }
};

enum class AdversaryBehavior : uint8_t {
  Silent,
  EquivocatingMaster,
  WrongHashReplier,
  Replayer,
  LowQualitySubmitter,
  NoSubmitAfterPledge,
};

AdversaryBehavior adversary_behavior_from_string(const std::string& s);
const char* adversary_behavior_name(AdversaryBehavior b);

struct AdversarySpec {
  NodeId node;
  AdversaryBehavior behavior = AdversaryBehavior::Silent;
  uint64_t from_round = 1;
  uint64_t to_round = UINT64_MAX;

  bool active(uint64_t round) const { return round >= from_round && round <= to_round; }
};

struct NetStats {
  uint64_t scheduled = 0;
  uint64_t delivered = 0;
  uint64_t dropped = 0;
  uint64_t payload_bytes = 0;
};

struct SimReport {
  bool completed = false;  // predicate became true
  bool deadlock = false;   // queue exhausted first
  bool timed_out = false;  // virtual time limit hit first
  uint64_t events_processed = 0;
  int64_t end_time_ms = 0;
};

struct TraceRow {
  int64_t deliver_time = 0;
  int64_t send_time = 0;
  NodeId src;
  NodeId dst;
  size_t bytes = 0;
  uint8_t wire_tag = 0;
};

class Simulator {
 public:
  using MessageHandler = std::function<void(const Envelope&)>;

  Simulator(uint64_t seed, LatencyModel latency, ProcessingModel proc = {});

  int64_t now() const { return now_; }

  void add_node(const NodeId& id, MessageHandler handler);

  // Unicast with latency, drop and receiver-processing applied.
  void send(const NodeId& src, const NodeId& dst, Bytes payload);
  // Drop-exempt unicast: contract event reads are local chain reads, not
  // lossy network traffic. Latency and processing still apply.
  void send_reliable(const NodeId& src, const NodeId& dst, Bytes payload);
  // Unicast fan-out with independent latency draws per destination.
  void broadcast(const NodeId& src, const std::vector<NodeId>& dsts, const Bytes& payload);

  // Virtual timer; negative delay is an error. Returns an id for logging.
  uint64_t schedule_timer(int64_t delay_ms, std::function<void()> fn);
  // Block ticks do not count as live work; see run_until.
  void schedule_block_tick(int64_t delay_ms, std::function<void()> fn);

  // Pops events in (time, insertion) order until the predicate holds, the
  // virtual time limit passes, or the queue runs dry (deadlock report).
  SimReport run_until(const std::function<bool()>& predicate, int64_t time_limit_ms);

  // Live events are everything except block ticks; the block clock stops
  // itself when no live work remains, letting quiescence surface as
  // queue exhaustion instead of ticking forever.
  uint64_t live_events() const { return live_events_; }

  const NetStats& stats() const { return stats_; }
  Rng& rng() { return rng_; }

  void enable_trace(bool on) { trace_enabled_ = on; }
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  struct Ev {
    int64_t time;
    uint64_t seq;
    bool block_tick;
    std::function<void()> fn;
  };
  struct EvOrder {
    bool operator()(const Ev& a, const Ev& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  void push(int64_t time, bool block_tick, std::function<void()> fn);
  void deliver(const NodeId& src, const NodeId& dst, Bytes payload);

  int64_t now_ = 0;
  uint64_t next_seq_ = 0;
  uint64_t live_events_ = 0;
  std::priority_queue<Ev, std::vector<Ev>, EvOrder> queue_;
  std::map<NodeId, MessageHandler> handlers_;
  std::map<NodeId, int64_t> node_free_at_;
  LatencyModel latency_;
  ProcessingModel proc_;
  Rng rng_;
  NetStats stats_;
  bool trace_enabled_ = false;
  std::vector<TraceRow> trace_;
};

}  // namespace dfl
