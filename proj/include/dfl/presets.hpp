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

#include "dfl/scenario.hpp"

namespace dfl {

// Experiment presets: each one is a pure function of (config, seed) to a
// result table, optionally written as CSVs under out_dir ("" skips files).

struct DpCurve {
  std::string label;  // "eps_0.5" ... or "no_dp"
  double eps = 0;     // 0 for the baseline
  std::vector<std::pair<uint64_t, uint32_t>> points;  // (round, global score)

  uint32_t final_score() const { return points.empty() ? 0 : points.back().second; }
};

struct DpSweepResult {
  std::vector<DpCurve> curves;  // baseline first, then ascending eps
};

DpSweepResult preset_dp_sweep(const ScenarioConfig& base, const std::vector<double>& eps,
                              uint64_t rounds, uint64_t seed,
                              const std::string& out_dir = "");

struct ScalingRow {
  int nodes = 0;
  int64_t mean_iteration_ms = 0;
  uint64_t pbft_messages = 0;
};

struct CommitteeScalingRow {
  int need = 0;
  uint64_t pbft_messages = 0;
};

struct ScalingSweepResult {
  std::vector<ScalingRow> node_rows;            // total node count sweep
  std::vector<CommitteeScalingRow> need_rows;   // committee size sweep
  double quadratic_r2 = 0;                      // fit over need_rows
};

// No training loaded: everything measured is consensus machinery.
ScalingSweepResult preset_scaling_sweep(const std::vector<int>& node_counts,
                                        const std::vector<int>& committee_sizes,
                                        uint64_t seed, const std::string& out_dir = "");

struct PhaseBreakdownResult {
  std::array<int64_t, 4> total_ms{0, 0, 0, 0};
  std::array<double, 4> share{0, 0, 0, 0};
};

PhaseBreakdownResult preset_phase_breakdown(const ScenarioConfig& cfg,
                                            const std::string& out_dir = "");

struct LatencyHistogramResult {
  int64_t bucket_ms = 1'000;
  std::vector<uint64_t> buckets;  // count per [k*bucket, (k+1)*bucket)
  uint64_t total = 0;
  int64_t p50_ms = 0;
  int64_t p90_ms = 0;
  int64_t max_ms = 0;

  double fraction_within(int64_t ms) const;
};

LatencyHistogramResult preset_consensus_latency(const ScenarioConfig& cfg,
                                                const std::string& out_dir = "");

// Least-squares quadratic fit quality for (x, y) samples.
double quadratic_fit_r2(const std::vector<std::pair<double, double>>& samples);

}  // namespace dfl
