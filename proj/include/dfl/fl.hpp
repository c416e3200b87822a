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

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfl/bytes.hpp"
#include "dfl/crypto.hpp"

namespace dfl {

// Desk-scale federated learning on a multinomial logistic-regression model.
// Parameters are a flat weight vector of shape classes x (features + 1),
// row-major, bias last per class row.

struct ModelDims {
  int features = 0;
  int classes = 0;

  bool operator==(const ModelDims&) const = default;
  int param_count() const { return classes * (features + 1); }
};

struct ModelParams {
  Eigen::VectorXd weights;
  ModelDims dims;

  static ModelParams zeros(ModelDims dims) {
    return ModelParams{Eigen::VectorXd::Zero(dims.param_count()), dims};
  }

  void encode(ByteWriter& w) const;
  static ModelParams decode(ByteReader& r);
};

// Integer accuracy in [0, 1000]: accuracy at three-decimal precision.
struct AccuracyScore {
  int value = 0;

  auto operator<=>(const AccuracyScore&) const = default;
};

enum class DatasetRole : uint8_t { Train = 0, Test = 1 };

struct Dataset {
  Eigen::MatrixXd features;  // one row per sample
  Eigen::VectorXi labels;    // class index per row
  DatasetRole role = DatasetRole::Train;

  Eigen::Index rows() const { return features.rows(); }
};

struct SubModel {
  ModelParams params;
  NodeId owner;
  uint64_t round = 1;
  std::optional<AccuracyScore> score;
};

struct DpConfig {
  double eps = 1.0;
  double delta = 1e-5;
  double clip_norm = 1.0;

  void validate() const;
};

// Per-coordinate Gaussian scale for the (eps, delta) budget at sensitivity
// clip_norm: sigma = clip_norm * sqrt(2 ln(1.25/delta)) / eps.
double gaussian_sigma(const DpConfig& cfg);

// Full-batch gradient descent on softmax cross-entropy, starting from the
// shared global model. Deterministic for fixed inputs; lr = 0 is the
// identity. Throws std::runtime_error if the loss diverges to non-finite.
ModelParams train_local(const ModelParams& global, const Dataset& data, int epochs,
                        double lr, uint64_t seed);

// Element-wise weighted average, weights normalized to sum 1.
ModelParams fed_avg(const std::vector<std::pair<ModelParams, double>>& parts);

// round(correct / total * 1000) on the argmax prediction.
AccuracyScore evaluate(const ModelParams& params, const Dataset& test);

// L2-clip to cfg.clip_norm, then add per-coordinate Gaussian noise.
ModelParams add_dp_noise(const ModelParams& params, const DpConfig& cfg, uint64_t seed);

// True when the bytes embed a well-formed canonical ModelParams encoding at
// any offset. The contract's event filter uses this to refuse payloads that
// would leak raw model weights.
bool contains_model_params_blob(const Bytes& data);

// Delimited numeric text, one sample per row, label in the last column.
Dataset load_delimited(const std::string& path, DatasetRole role);

// Gaussian class blobs: class means spread on a circle in the first two
// dimensions, isotropic noise elsewhere.
Dataset make_blobs(int classes, int features, int rows, double spread, uint64_t seed,
                   DatasetRole role);

// Two interleaved half-circles, 2 features, 2 classes.
Dataset make_moons(int rows, double noise, uint64_t seed, DatasetRole role);

}  // namespace dfl
