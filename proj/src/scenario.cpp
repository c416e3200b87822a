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

#include "dfl/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dfl {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("bad section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("expected key=value at line " + std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("empty key at line " + std::to_string(lineno));
    cfg.sections_[section][key] = value;
  }
  return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key);
}

std::string ConfigFile::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

int64_t ConfigFile::get_int(const std::string& section, const std::string& key,
                            int64_t fallback) const {
  if (!has(section, key)) return fallback;
  return std::stoll(get(section, key, ""));
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
  if (!has(section, key)) return fallback;
  return std::stod(get(section, key, ""));
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get(section, key, "");
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("bad boolean for " + section + "." + key + ": " + v);
}

Milli ConfigFile::get_money(const std::string& section, const std::string& key,
                            Milli fallback) const {
  if (!has(section, key)) return fallback;
  double units = std::stod(get(section, key, ""));
  return static_cast<Milli>(std::llround(units * double(kMilli)));
}

ScenarioConfig ScenarioConfig::from_config(const ConfigFile& f) {
  ScenarioConfig c;
  c.seed = uint64_t(f.get_int("scenario", "seed", int64_t(c.seed)));
  c.rounds = uint64_t(f.get_int("scenario", "rounds", int64_t(c.rounds)));
  c.nodes = int(f.get_int("scenario", "nodes", c.nodes));
  c.genesis_committee = f.get_bool("scenario", "genesis_committee", c.genesis_committee);
  c.election.need = int(f.get_int("scenario", "committee_need", c.election.need));
  c.election.p = f.get_double("scenario", "weight_p", c.election.p);
  c.elect_times = uint64_t(f.get_int("scenario", "elect_times", int64_t(c.elect_times)));
  c.registration_deposit =
      f.get_money("scenario", "registration_deposit", c.registration_deposit);
  c.registration_min = f.get_money("scenario", "registration_min", c.registration_min);
  c.participation_pledge =
      f.get_money("scenario", "participation_pledge", c.participation_pledge);
  c.candidate_pledge = f.get_money("scenario", "candidate_pledge", c.candidate_pledge);
  c.min_candidate_pledge =
      f.get_money("scenario", "min_candidate_pledge", c.min_candidate_pledge);
  c.penalties.linear_rate =
      f.get_double("incentives", "linear_rate", c.penalties.linear_rate);
  c.penalties.max_pledge = f.get_money("incentives", "max_pledge", c.penalties.max_pledge);
  c.masternode_base_score =
      f.get_money("incentives", "master_base_score", c.masternode_base_score);
  c.model_reward_budget =
      f.get_money("incentives", "model_reward_budget", c.model_reward_budget);
  c.round_payout = f.get_money("incentives", "round_payout", c.round_payout);
  c.malicious_rate = f.get_double("incentives", "malicious_rate", c.malicious_rate);

  if (f.has("curve", "points")) {
    c.curve.points.clear();
    std::istringstream in(f.get("curve", "points", ""));
    std::string piece;
    while (std::getline(in, piece, ',')) {
      auto colon = piece.find(':');
      if (colon == std::string::npos) throw std::runtime_error("curve point needs acc:price");
      double acc = std::stod(trim(piece.substr(0, colon)));
      double price = std::stod(trim(piece.substr(colon + 1)));
      c.curve.points.emplace_back(acc, Milli(std::llround(price * double(kMilli))));
    }
  } else {
    c.curve.points = {{0.5, 50 * kMilli}, {0.8, 100 * kMilli}, {0.9, 200 * kMilli}};
  }

  c.mt_ms[0] = f.get_int("timers", "mt_elect_ms", c.mt_ms[0]);
  c.mt_ms[1] = f.get_int("timers", "mt_pledge_ms", c.mt_ms[1]);
  c.mt_ms[2] = f.get_int("timers", "mt_commit_ms", c.mt_ms[2]);
  c.mt_ms[3] = f.get_int("timers", "mt_work_ms", c.mt_ms[3]);
  c.aggregation_window_ms =
      f.get_int("timers", "aggregation_window_ms", c.aggregation_window_ms);
  c.view_timeout_ms = f.get_int("timers", "view_timeout_ms", c.view_timeout_ms);
  c.think_min_ms = f.get_int("timers", "think_min_ms", c.think_min_ms);
  c.think_max_ms = f.get_int("timers", "think_max_ms", c.think_max_ms);
  c.training_ms = f.get_int("timers", "training_ms", c.training_ms);
  c.work_ms = f.get_int("timers", "work_ms", c.work_ms);
  c.work_per_model_ms = f.get_int("timers", "work_per_model_ms", c.work_per_model_ms);
  c.virtual_time_limit_ms =
      f.get_int("timers", "virtual_time_limit_ms", c.virtual_time_limit_ms);

  c.block_interval_ms = f.get_int("chain", "block_interval_ms", c.block_interval_ms);
  c.stochastic_blocks = f.get_bool("chain", "stochastic_blocks", c.stochastic_blocks);
  c.gas.base = f.get_int("chain", "gas_base", c.gas.base);
  c.gas.per_signature = f.get_int("chain", "gas_per_signature", c.gas.per_signature);
  c.gas.per_debit = f.get_int("chain", "gas_per_debit", c.gas.per_debit);
  c.gas.gas_price_micro = f.get_int("chain", "gas_price_micro", c.gas.gas_price_micro);

  c.latency.base_ms = f.get_int("net", "latency_base_ms", c.latency.base_ms);
  c.latency.jitter_ms = f.get_int("net", "latency_jitter_ms", c.latency.jitter_ms);
  c.latency.drop_rate = f.get_double("net", "drop_rate", c.latency.drop_rate);
  c.processing.proc_base_ms = f.get_int("net", "proc_base_ms", c.processing.proc_base_ms);
  c.processing.proc_per_kib_ms =
      f.get_int("net", "proc_per_kib_ms", c.processing.proc_per_kib_ms);
  c.capture_trace = f.get_bool("net", "capture_trace", c.capture_trace);

  c.fl_enabled = f.get_bool("fl", "enabled", c.fl_enabled);
  c.fl_classes = int(f.get_int("fl", "classes", c.fl_classes));
  c.fl_features = int(f.get_int("fl", "features", c.fl_features));
  c.fl_train_rows = int(f.get_int("fl", "train_rows", c.fl_train_rows));
  c.fl_test_rows = int(f.get_int("fl", "test_rows", c.fl_test_rows));
  c.fl_spread = f.get_double("fl", "spread", c.fl_spread);
  c.fl_epochs = int(f.get_int("fl", "epochs", c.fl_epochs));
  c.fl_lr = f.get_double("fl", "lr", c.fl_lr);
  c.dataset = f.get("fl", "dataset", c.dataset);
  c.dp_enabled = f.get_bool("fl", "dp_enabled", c.dp_enabled);
  c.dp.eps = f.get_double("fl", "dp_eps", c.dp.eps);
  c.dp.delta = f.get_double("fl", "dp_delta", c.dp.delta);
  c.dp.clip_norm = f.get_double("fl", "dp_clip", c.dp.clip_norm);

  int count = int(f.get_int("adversaries", "count", 0));
  for (int i = 0; i < count; ++i) {
    std::string prefix = std::to_string(i) + ".";
    AdversaryConfig adv;
    adv.node_index = int(f.get_int("adversaries", prefix + "node", 0));
    adv.behavior =
        adversary_behavior_from_string(f.get("adversaries", prefix + "behavior", "silent"));
    adv.from_round = uint64_t(f.get_int("adversaries", prefix + "from_round", 1));
    adv.to_round = uint64_t(
        f.get_int("adversaries", prefix + "to_round", int64_t(INT64_MAX)));
    c.adversaries.push_back(adv);
  }
  return c;
}

void ScenarioConfig::validate() const {
  election.validate();
  curve.validate();
  penalties.validate();
  latency.validate();
  if (dp_enabled) dp.validate();
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (nodes < election.need) throw std::invalid_argument("fewer nodes than committee need");
  if (think_min_ms < 0 || think_max_ms < think_min_ms)
    throw std::invalid_argument("bad think delay range");
  if (block_interval_ms <= 0) throw std::invalid_argument("block interval must be > 0");
  for (int64_t mt : mt_ms)
    if (mt <= 0) throw std::invalid_argument("mt must be > 0");
  if (fl_enabled && fl_classes < 2) throw std::invalid_argument("need >= 2 classes");
  for (const auto& adv : adversaries) {
    if (adv.node_index < 0 || adv.node_index >= nodes)
      throw std::invalid_argument("adversary node index out of range");
  }
}

int64_t ScenarioConfig::time_limit() const {
  if (virtual_time_limit_ms > 0) return virtual_time_limit_ms;
  int64_t per_round = mt_ms[0] + mt_ms[1] + mt_ms[2] + mt_ms[3];
  // Generous: every phase can burn its backstop plus blocks and slack.
  return int64_t(rounds + 2) * (per_round + 8 * block_interval_ms) + 60'000;
}

// ---- ScenarioRunner ----

ScenarioRunner::ScenarioRunner(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build();
}

ScenarioRunner::~ScenarioRunner() = default;

bool ScenarioRunner::node_is_honest(const NodeId& id) const {
  return !adversary_ids_.count(id);
}

void ScenarioRunner::build() {
  sim_ = std::make_unique<Simulator>(cfg_.seed, cfg_.latency, cfg_.processing);
  sim_->enable_trace(cfg_.capture_trace);
  store_ = std::make_unique<ContentStore>();

  ContractConfig ccfg;
  ccfg.curve = cfg_.curve;
  ccfg.dp = cfg_.dp;
  ccfg.dp_enabled = cfg_.dp_enabled;
  ccfg.elect_times = cfg_.elect_times;
  ccfg.election = cfg_.election;
  ccfg.registration_min = cfg_.registration_min;
  ccfg.min_candidate_pledge = cfg_.min_candidate_pledge;
  ccfg.penalties = cfg_.penalties;
  ccfg.gas = cfg_.gas;
  ccfg.masternode_base_score = cfg_.masternode_base_score;
  ccfg.model_reward_budget = cfg_.model_reward_budget;
  ccfg.round_payout = cfg_.round_payout;
  ccfg.malicious_rate = cfg_.malicious_rate;
  ccfg.block_interval_ms = cfg_.block_interval_ms;
  ccfg.stochastic_blocks = cfg_.stochastic_blocks;

  // Shared pre-consensus test set and the initial global model.
  ModelDims dims{cfg_.fl_features, cfg_.fl_classes};
  if (cfg_.fl_enabled) {
    if (cfg_.dataset == "moons") {
      dims = ModelDims{2, 2};
      test_data_ = make_moons(cfg_.fl_test_rows, 0.15, cfg_.seed * 31 + 7, DatasetRole::Test);
    } else if (cfg_.dataset.rfind("file:", 0) == 0) {
      test_data_ = load_delimited(cfg_.dataset.substr(5), DatasetRole::Test);
      dims = ModelDims{int(test_data_.features.cols()),
                       int(test_data_.labels.maxCoeff() + 1)};
    } else {
      test_data_ = make_blobs(cfg_.fl_classes, cfg_.fl_features, cfg_.fl_test_rows,
                              cfg_.fl_spread, cfg_.seed * 31 + 7, DatasetRole::Test);
    }
  }
  ModelParams initial = ModelParams::zeros(dims);
  ccfg.initial_global_model = store_->put(encode(initial));

  contract_ = std::make_unique<StateContract>(*sim_, ccfg, cfg_.seed);

  NodeConfig ncfg;
  ncfg.mt_ms = cfg_.mt_ms;
  ncfg.aggregation_window_ms = cfg_.aggregation_window_ms;
  ncfg.view_timeout_ms = cfg_.view_timeout_ms;
  ncfg.think_min_ms = cfg_.think_min_ms;
  ncfg.think_max_ms = cfg_.think_max_ms;
  ncfg.training_ms = cfg_.training_ms;
  ncfg.work_ms = cfg_.work_ms;
  ncfg.work_per_model_ms = cfg_.work_per_model_ms;
  ncfg.participation_pledge = cfg_.participation_pledge;
  ncfg.candidate_pledge = cfg_.candidate_pledge;
  ncfg.min_candidate_pledge = cfg_.min_candidate_pledge;
  ncfg.gas_price_micro = cfg_.gas.gas_price_micro;
  ncfg.election = cfg_.election;
  ncfg.fl_enabled = cfg_.fl_enabled;
  ncfg.epochs = cfg_.fl_epochs;
  ncfg.lr = cfg_.fl_lr;
  ncfg.dp_enabled = cfg_.dp_enabled;
  ncfg.dp = cfg_.dp;

  for (int i = 0; i < cfg_.nodes; ++i) {
    uint64_t identity_seed = cfg_.seed * 100'000 + uint64_t(i);
    Dataset train;
    if (cfg_.fl_enabled) {
      if (cfg_.dataset == "moons") {
        train = make_moons(cfg_.fl_train_rows, 0.15, identity_seed * 13 + 1,
                           DatasetRole::Train);
      } else if (cfg_.dataset.rfind("file:", 0) == 0) {
        train = load_delimited(cfg_.dataset.substr(5), DatasetRole::Train);
        train.role = DatasetRole::Train;
      } else {
        train = make_blobs(cfg_.fl_classes, cfg_.fl_features, cfg_.fl_train_rows,
                           cfg_.fl_spread, identity_seed * 13 + 1, DatasetRole::Train);
      }
    } else {
      train = make_blobs(2, 2, 4, 1.0, identity_seed, DatasetRole::Train);
    }
    auto node = std::make_unique<SimNode>(*sim_, *contract_, *store_, this, ncfg,
                                          identity_seed, std::move(train),
                                          cfg_.fl_enabled ? &test_data_ : nullptr);
    node->set_initial_deposit(cfg_.registration_deposit);
    nodes_.push_back(std::move(node));
  }

  for (const auto& adv : cfg_.adversaries) {
    SimNode& node = *nodes_[size_t(adv.node_index)];
    AdversarySpec spec;
    spec.node = node.id();
    spec.behavior = adv.behavior;
    spec.from_round = adv.from_round;
    spec.to_round = adv.to_round;
    node.set_adversary(spec);
    adversary_ids_.insert(node.id());
  }

  for (const auto& node : nodes_)
    contract_->register_genesis(node->id(), node->pk(), cfg_.registration_deposit);

  // Monitor: a silent observer collecting events for metrics.
  monitor_id_ = generate_identity(cfg_.seed * 100'000 + 999'983).first;
  sim_->add_node(monitor_id_, [this](const Envelope& env) {
    if (env.src != StateContract::address()) return;
    auto ev = try_decode<EventRecord>(env.payload);
    if (ev) on_monitor_event(*ev);
  });
  contract_->subscribe(monitor_id_);

  for (const auto& node : nodes_) node->start();

  std::vector<NodeId> committee;
  if (cfg_.genesis_committee)
    for (int i = 0; i < cfg_.election.need; ++i) committee.push_back(nodes_[size_t(i)]->id());
  contract_->initialize(committee);
}

const MetricsBundle& ScenarioRunner::run() {
  if (ran_) return metrics_;
  ran_ = true;
  uint64_t target_round = cfg_.rounds + 1;
  SimReport report = sim_->run_until(
      [&] { return contract_->state().round >= target_round; }, cfg_.time_limit());
  metrics_.deadlock = report.deadlock;
  metrics_.timed_out = report.timed_out;
  metrics_.end_time_ms = report.end_time_ms;
  if (report.completed) {
    // Drain in-flight event deliveries so the monitor sees the last
    // finalization; too short for any new phase to finalize.
    sim_->run_until([] { return false; }, report.end_time_ms + 5'000);
  }
  finalize_metrics();
  return metrics_;
}

void ScenarioRunner::on_monitor_event(const EventRecord& ev) {
  if (ev.kind != event_kind::kPhaseFinalized) return;
  auto fin = try_decode<PhaseFinalizedEvent>(ev.payload);
  if (!fin) return;
  auto result = try_decode<PhaseResult>(fin->result);
  if (!result) return;
  finalizations_.push_back(Finalization{fin->round, fin->phase, sim_->now(), *result});

  if (fin->phase == Phase::Work) {
    LedgerSnapshot snap;
    snap.round = fin->round;
    snap.scores = contract_->state().reward_ledger.scores;
    snap.payouts = contract_->state().payouts_by_node;
    snap.offenses = contract_->state().reward_ledger.offenses;
    ledger_snapshots_.push_back(std::move(snap));
  }
}

void ScenarioRunner::finalize_metrics() {
  const auto& history = contract_->state().history;

  // Iteration rows from the contract's finalization timeline.
  std::map<uint64_t, IterationRow> rows;
  int64_t prev_end = 0;  // previous finalization; phases run back to back
  for (const auto& rec : history) {
    auto& row = rows[rec.round];
    if (row.round == 0) {
      row.round = rec.round;
      row.start_ms = prev_end;
    }
    row.phase_ms[size_t(rec.phase)] = rec.at_ms - prev_end;
    prev_end = rec.at_ms;
    if (rec.phase == Phase::Work) {
      row.end_ms = rec.at_ms;
      ++metrics_.rounds_completed;
    }
  }
  for (auto& [round, row] : rows)
    if (row.end_ms > 0) metrics_.iterations.push_back(row);

  // Accuracy rows from Work results.
  for (const auto& fin : finalizations_) {
    if (fin.phase != Phase::Work) continue;
    const auto& body = std::get<WorkResult>(fin.result.body);
    for (const auto& [owner, score] : body.submodel_scores)
      metrics_.accuracy.push_back(
          AccuracyRow{fin.round, owner.short_hex(), score, body.global_score});
  }

  // Latency rows for executed requests.
  for (const auto& [id, trace] : request_traces_) {
    if (trace.sent_ms < 0 || trace.first_executed_ms < 0) continue;
    metrics_.latencies.push_back(
        LatencyRow{trace.phase, trace.sent_ms, trace.first_executed_ms});
  }

  uint64_t flagged_on_chain = 0;
  for (const auto& ev : contract_->state().events)
    if (ev.kind == event_kind::kReplayFlagged) ++flagged_on_chain;
  metrics_.replays_sent = replay_ids_sent_.size();
  metrics_.replays_rejected = replay_ids_rejected_.size() + flagged_on_chain;

  metrics_.conservation_ok = contract_->state().conservation_holds();
  for (const auto& [kind, count] : metrics_.pbft_sent)
    metrics_.total_pbft_messages += count;
}

void ScenarioRunner::on_request_sent(const Digest& id, Phase phase, const NodeId&,
                                     int64_t t) {
  ++metrics_.requests_sent;
  auto it = request_traces_.find(id);
  if (it == request_traces_.end())
    request_traces_[id] = RequestTrace{phase, t, -1};
}

void ScenarioRunner::on_request_executed(const Digest& id, const NodeId& replica,
                                         int64_t t, uint64_t round, Phase phase) {
  auto it = request_traces_.find(id);
  if (it != request_traces_.end() && it->second.first_executed_ms < 0)
    it->second.first_executed_ms = t;
  if (node_is_honest(replica))
    metrics_.executions[{round, phase}][replica].push_back(id);
}

void ScenarioRunner::on_pbft_sent(PbftKind kind, const NodeId&, int64_t fanout) {
  metrics_.pbft_sent[kind] += uint64_t(std::max<int64_t>(fanout, 0));
}

void ScenarioRunner::on_reply_produced(const NodeId& node, uint64_t round, Phase phase,
                                       const Digest& result_digest) {
  metrics_.replies[{round, phase, result_digest}].insert(node);
}

void ScenarioRunner::on_replay_dropped(const Digest& id, const NodeId&) {
  replay_ids_rejected_.insert(id);
}

void ScenarioRunner::on_replay_sent(const Digest& id, const NodeId&) {
  replay_ids_sent_.insert(id);
}

void ScenarioRunner::on_submission_abandoned(const NodeId&, uint64_t) {
  ++metrics_.abandoned_submissions;
}

namespace {

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << header << "\n";
  for (const auto& row : rows) out << row << "\n";
}

}  // namespace

void ScenarioRunner::write_outputs(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  auto path = [&](const std::string& name) { return dir + "/" + name; };

  std::vector<std::string> rows;
  for (const auto& it : metrics_.iterations) {
    std::ostringstream os;
    os << it.round << ',' << it.start_ms << ',' << it.end_ms << ','
       << (it.end_ms - it.start_ms);
    for (int p = 0; p < 4; ++p) os << ',' << it.phase_ms[size_t(p)];
    rows.push_back(os.str());
  }
  write_csv(path("iterations.csv"), csv_schema::kIterations, rows);

  rows.clear();
  for (const auto& a : metrics_.accuracy) {
    std::ostringstream os;
    os << a.round << ',' << a.node << ',' << a.local << ',' << a.global;
    rows.push_back(os.str());
  }
  write_csv(path("accuracy.csv"), csv_schema::kAccuracy, rows);

  rows.clear();
  for (const auto& l : metrics_.latencies) {
    std::ostringstream os;
    os << phase_name(l.phase) << ',' << l.sent_ms << ',' << l.executed_ms << ','
       << (l.executed_ms - l.sent_ms);
    rows.push_back(os.str());
  }
  write_csv(path("latency.csv"), csv_schema::kLatency, rows);

  rows.clear();
  auto kind_name = [](PbftKind k) {
    switch (k) {
      case PbftKind::PrePrepare: return "preprepare";
      case PbftKind::Prepare: return "prepare";
      case PbftKind::Commit: return "commit";
      case PbftKind::ViewChange: return "view-change";
    }
    return "?";
  };
  for (const auto& [kind, count] : metrics_.pbft_sent) {
    std::ostringstream os;
    os << kind_name(kind) << ',' << count;
    rows.push_back(os.str());
  }
  {
    std::ostringstream os;
    os << "requests," << metrics_.requests_sent;
    rows.push_back(os.str());
  }
  write_csv(path("messages.csv"), csv_schema::kMessages, rows);

  rows.clear();
  std::map<NodeId, Milli> prev_scores, prev_payouts;
  for (const auto& snap : ledger_snapshots_) {
    for (const auto& [node, score] : snap.scores) {
      Milli delta = score - (prev_scores.count(node) ? prev_scores[node] : 0);
      Milli payout = 0;
      auto p = snap.payouts.find(node);
      if (p != snap.payouts.end())
        payout = p->second - (prev_payouts.count(node) ? prev_payouts[node] : 0);
      int unanswered = 0, low_quality = 0;
      auto u = snap.offenses.find({node, OffenseKind::CommitteeUnanswered});
      if (u != snap.offenses.end()) unanswered = u->second;
      auto lq = snap.offenses.find({node, OffenseKind::LowQualityModel});
      if (lq != snap.offenses.end()) low_quality = lq->second;
      std::ostringstream os;
      os << snap.round << ',' << node.short_hex() << ',' << score << ',' << delta << ','
         << payout << ',' << unanswered << ',' << low_quality;
      rows.push_back(os.str());
    }
    prev_scores = snap.scores;
    prev_payouts = snap.payouts;
  }
  write_csv(path("incentives.csv"), csv_schema::kIncentives, rows);

  contract_->export_history_csv(path("history.csv"));
  contract_->export_event_log_jsonl(path("events.jsonl"));

  if (cfg_.capture_trace) {
    std::ofstream out(path("trace.jsonl"));
    for (const auto& row : sim_->trace()) {
      nlohmann::json j = {{"deliver_ms", row.deliver_time}, {"send_ms", row.send_time},
                          {"src", to_hex(row.src.bytes.data(), 4)},
                          {"dst", to_hex(row.dst.bytes.data(), 4)},
                          {"bytes", row.bytes},    {"tag", row.wire_tag}};
      out << j.dump() << "\n";
    }
  }
}

bool self_check_outputs(const std::string& dir, std::string* diagnostic) {
  static const std::map<std::string, std::string> schemas = {
      {"iterations.csv", csv_schema::kIterations}, {"accuracy.csv", csv_schema::kAccuracy},
      {"latency.csv", csv_schema::kLatency},       {"messages.csv", csv_schema::kMessages},
      {"incentives.csv", csv_schema::kIncentives}, {"history.csv", csv_schema::kHistory},
  };
  for (const auto& [name, header] : schemas) {
    std::string full = dir + "/" + name;
    std::ifstream in(full);
    if (!in) continue;  // optional outputs may be absent
    std::string first;
    std::getline(in, first);
    if (first != header) {
      if (diagnostic) *diagnostic = full + ": header mismatch";
      return false;
    }
  }
  return true;
}

}  // namespace dfl
