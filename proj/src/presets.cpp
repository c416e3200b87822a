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

#include "dfl/presets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dfl {

namespace {

std::string fmt_eps(double eps) {
  std::ostringstream os;
  os << eps;
  return os.str();
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

}  // namespace

double quadratic_fit_r2(const std::vector<std::pair<double, double>>& samples) {
  const size_t n = samples.size();
  if (n < 3) return 0;
  // Normal equations for y = a*x^2 + b*x + c.
  double s0 = double(n), s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  double t0 = 0, t1 = 0, t2 = 0;
  for (const auto& [x, y] : samples) {
    double x2 = x * x;
    s1 += x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
    t0 += y;
    t1 += x * y;
    t2 += x2 * y;
  }
  // Solve the 3x3 system via Cramer's rule.
  auto det3 = [](double a11, double a12, double a13, double a21, double a22, double a23,
                 double a31, double a32, double a33) {
    return a11 * (a22 * a33 - a23 * a32) - a12 * (a21 * a33 - a23 * a31) +
           a13 * (a21 * a32 - a22 * a31);
  };
  double d = det3(s4, s3, s2, s3, s2, s1, s2, s1, s0);
  if (std::abs(d) < 1e-12) return 0;
  double a = det3(t2, s3, s2, t1, s2, s1, t0, s1, s0) / d;
  double b = det3(s4, t2, s2, s3, t1, s1, s2, t0, s0) / d;
  double c = det3(s4, s3, t2, s3, s2, t1, s2, s1, t0) / d;

  double mean = t0 / double(n);
  double ss_res = 0, ss_tot = 0;
  for (const auto& [x, y] : samples) {
    double fit = a * x * x + b * x + c;
    ss_res += (y - fit) * (y - fit);
    ss_tot += (y - mean) * (y - mean);
  }
  if (ss_tot < 1e-12) return 1.0;
  return 1.0 - ss_res / ss_tot;
}

DpSweepResult preset_dp_sweep(const ScenarioConfig& base, const std::vector<double>& eps,
                              uint64_t rounds, uint64_t seed, const std::string& out_dir) {
  if (eps.empty()) throw std::invalid_argument("empty eps list");
  ensure_dir(out_dir);

  std::vector<double> ordered = eps;
  std::sort(ordered.begin(), ordered.end());

  DpSweepResult result;
  auto run_one = [&](double e, const std::string& label) {
    ScenarioConfig cfg = base;
    cfg.seed = seed;
    cfg.rounds = rounds;
    cfg.fl_enabled = true;
    cfg.dp_enabled = e > 0;
    if (e > 0) cfg.dp.eps = e;
    ScenarioRunner runner(cfg);
    const auto& m = runner.run();
    DpCurve curve;
    curve.label = label;
    curve.eps = e;
    std::map<uint64_t, uint32_t> global_by_round;
    for (const auto& a : m.accuracy) global_by_round[a.round] = a.global;
    for (const auto& [round, score] : global_by_round) curve.points.emplace_back(round, score);
    result.curves.push_back(std::move(curve));
  };

  run_one(0.0, "no_dp");
  for (double e : ordered) run_one(e, "eps_" + fmt_eps(e));

  if (!out_dir.empty()) {
    for (const auto& curve : result.curves) {
      std::ofstream out(out_dir + "/dp_" + curve.label + ".csv");
      out << "round,global_score\n";
      for (const auto& [round, score] : curve.points) out << round << ',' << score << "\n";
    }
    std::ofstream summary(out_dir + "/dp_summary.csv");
    summary << "label,eps,final_score\n";
    for (const auto& curve : result.curves)
      summary << curve.label << ',' << curve.eps << ',' << curve.final_score() << "\n";
  }
  return result;
}

namespace {

// Consensus-only load profile: small fixed latencies and a processing cost
// per message so committee traffic, not training, dominates the clock.
ScenarioConfig scaling_profile(uint64_t seed) {
  ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.rounds = 3;
  cfg.fl_enabled = false;
  cfg.block_interval_ms = 500;
  cfg.latency = LatencyModel{20, 10, 0.0};
  cfg.processing = ProcessingModel{150, 8};
  cfg.aggregation_window_ms = 1'000;
  cfg.think_min_ms = 200;
  cfg.think_max_ms = 900;
  cfg.training_ms = 500;
  cfg.work_ms = 500;
  cfg.work_per_model_ms = 0;
  cfg.mt_ms = {60'000, 60'000, 60'000, 60'000};
  return cfg;
}

}  // namespace

ScalingSweepResult preset_scaling_sweep(const std::vector<int>& node_counts,
                                        const std::vector<int>& committee_sizes,
                                        uint64_t seed, const std::string& out_dir) {
  ensure_dir(out_dir);
  ScalingSweepResult result;

  for (int n : node_counts) {
    ScenarioConfig cfg = scaling_profile(seed);
    cfg.nodes = n;
    cfg.election.need = 4;
    ScenarioRunner runner(cfg);
    const auto& m = runner.run();
    int64_t total = 0;
    for (const auto& it : m.iterations) total += it.end_ms - it.start_ms;
    ScalingRow row;
    row.nodes = n;
    row.mean_iteration_ms =
        m.iterations.empty() ? 0 : total / int64_t(m.iterations.size());
    row.pbft_messages = m.total_pbft_messages;
    result.node_rows.push_back(row);
  }

  std::vector<std::pair<double, double>> fit_samples;
  for (int need : committee_sizes) {
    // Wide window and light processing: per-batch quorum traffic, which is
    // the quadratic term, dominates the counts.
    ScenarioConfig cfg = scaling_profile(seed + 1);
    cfg.aggregation_window_ms = 5'000;
    cfg.processing = ProcessingModel{25, 4};
    cfg.block_interval_ms = 1'000;
    cfg.nodes = std::max(16, need + 3);
    cfg.election.need = need;
    ScenarioRunner runner(cfg);
    const auto& m = runner.run();
    CommitteeScalingRow row;
    row.need = need;
    row.pbft_messages = m.total_pbft_messages;
    result.need_rows.push_back(row);
    fit_samples.emplace_back(double(need), double(m.total_pbft_messages));
  }
  result.quadratic_r2 = quadratic_fit_r2(fit_samples);

  if (!out_dir.empty()) {
    std::ofstream out(out_dir + "/scaling_nodes.csv");
    out << "nodes,mean_iteration_ms,pbft_messages\n";
    for (const auto& row : result.node_rows)
      out << row.nodes << ',' << row.mean_iteration_ms << ',' << row.pbft_messages << "\n";
    std::ofstream out2(out_dir + "/scaling_committee.csv");
    out2 << "need,pbft_messages\n";
    for (const auto& row : result.need_rows)
      out2 << row.need << ',' << row.pbft_messages << "\n";
  }
  return result;
}

PhaseBreakdownResult preset_phase_breakdown(const ScenarioConfig& cfg,
                                            const std::string& out_dir) {
  if (!cfg.fl_enabled)
    throw std::invalid_argument("phase breakdown requires FL training loaded");
  ensure_dir(out_dir);
  ScenarioRunner runner(cfg);
  const auto& m = runner.run();

  PhaseBreakdownResult result;
  int64_t total = 0;
  for (const auto& it : m.iterations) {
    for (int p = 0; p < 4; ++p) {
      if (it.phase_ms[size_t(p)] < 0) continue;
      result.total_ms[size_t(p)] += it.phase_ms[size_t(p)];
      total += it.phase_ms[size_t(p)];
    }
  }
  if (total > 0)
    for (int p = 0; p < 4; ++p)
      result.share[size_t(p)] = double(result.total_ms[size_t(p)]) / double(total);

  if (!out_dir.empty()) {
    std::ofstream out(out_dir + "/phase_breakdown.csv");
    out << "phase,total_ms,share\n";
    for (int p = 0; p < 4; ++p)
      out << phase_name(Phase(p)) << ',' << result.total_ms[size_t(p)] << ','
          << result.share[size_t(p)] << "\n";
  }
  return result;
}

double LatencyHistogramResult::fraction_within(int64_t ms) const {
  if (total == 0) return 0;
  uint64_t within = 0;
  for (size_t k = 0; k < buckets.size(); ++k) {
    int64_t upper = int64_t(k + 1) * bucket_ms;
    if (upper <= ms) within += buckets[k];
  }
  return double(within) / double(total);
}

LatencyHistogramResult preset_consensus_latency(const ScenarioConfig& cfg,
                                                const std::string& out_dir) {
  ensure_dir(out_dir);
  ScenarioRunner runner(cfg);
  const auto& m = runner.run();

  LatencyHistogramResult result;
  std::vector<int64_t> values;
  for (const auto& l : m.latencies) values.push_back(l.executed_ms - l.sent_ms);
  std::sort(values.begin(), values.end());
  result.total = values.size();
  if (!values.empty()) {
    result.max_ms = values.back();
    result.p50_ms = values[values.size() / 2];
    result.p90_ms = values[size_t(double(values.size()) * 0.9)];
    size_t nb = size_t(result.max_ms / result.bucket_ms) + 1;
    result.buckets.assign(nb, 0);
    for (int64_t v : values) ++result.buckets[size_t(v / result.bucket_ms)];
  }

  if (!out_dir.empty()) {
    std::ofstream out(out_dir + "/latency_histogram.csv");
    out << "bucket_upper_ms,count\n";
    for (size_t k = 0; k < result.buckets.size(); ++k)
      out << (k + 1) * size_t(result.bucket_ms) << ',' << result.buckets[k] << "\n";
  }
  return result;
}

}  // namespace dfl
