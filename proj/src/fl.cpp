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

#include "dfl/fl.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dfl/rng.hpp"

namespace dfl {

namespace {

constexpr uint8_t kTagModelParams = 8;

// logits = X_aug * W^T with W laid out classes x (features + 1), bias last.
Eigen::MatrixXd logits_of(const ModelParams& p, const Eigen::MatrixXd& features) {
  const int c = p.dims.classes;
  const int d = p.dims.features;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      w(p.weights.data(), c, d + 1);
  Eigen::MatrixXd logits = features * w.leftCols(d).transpose();
  logits.rowwise() += w.col(d).transpose();
  return logits;
}

Eigen::MatrixXd softmax_rows(Eigen::MatrixXd logits) {
  Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  Eigen::MatrixXd expd = logits.array().exp().matrix();
  Eigen::VectorXd sums = expd.rowwise().sum();
  return expd.array().colwise() / sums.array();
}

void check_dataset(const Dataset& data, const ModelDims& dims) {
  if (data.features.rows() != data.labels.rows())
    throw std::invalid_argument("dataset row count mismatch between features and labels");
  if (data.features.cols() != dims.features)
    throw std::invalid_argument("dataset feature count does not match model dims");
  for (Eigen::Index i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] < 0 || data.labels[i] >= dims.classes)
      throw std::invalid_argument("label out of class range");
  }
}

}  // namespace

void ModelParams::encode(ByteWriter& w) const {
  w.u8(kTagModelParams);
  w.u32(static_cast<uint32_t>(dims.features));
  w.u32(static_cast<uint32_t>(dims.classes));
  w.u32(static_cast<uint32_t>(weights.size()));
  for (Eigen::Index i = 0; i < weights.size(); ++i) w.f64(weights[i]);
}

ModelParams ModelParams::decode(ByteReader& r) {
  if (r.u8() != kTagModelParams) throw CodecError("bad model params tag");
  ModelParams p;
  p.dims.features = static_cast<int>(r.u32());
  p.dims.classes = static_cast<int>(r.u32());
  if (p.dims.features < 0 || p.dims.classes < 0 ||
      int64_t(p.dims.features + 1) * p.dims.classes > (1 << 24))
    throw CodecError("model params dims out of range");
  uint32_t n = r.u32();
  if (n != static_cast<uint32_t>(p.dims.param_count()))
    throw CodecError("model params length mismatch");
  p.weights.resize(n);
  for (uint32_t i = 0; i < n; ++i) p.weights[i] = r.f64();
  return p;
}

void DpConfig::validate() const {
  if (!(eps > 0)) throw std::invalid_argument("dp eps must be positive");
  if (!(delta > 0 && delta < 1)) throw std::invalid_argument("dp delta must be in (0,1)");
  if (!(clip_norm > 0)) throw std::invalid_argument("dp clip_norm must be positive");
}

double gaussian_sigma(const DpConfig& cfg) {
  cfg.validate();
  return cfg.clip_norm * std::sqrt(2.0 * std::log(1.25 / cfg.delta)) / cfg.eps;
}

ModelParams train_local(const ModelParams& global, const Dataset& data, int epochs,
                        double lr, uint64_t seed) {
  (void)seed;  // full-batch descent is already deterministic
  if (data.role != DatasetRole::Train)
    throw std::invalid_argument("train_local requires a train-role dataset");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (lr < 0) throw std::invalid_argument("learning rate must be >= 0");
  check_dataset(data, global.dims);
  const auto n = data.rows();
  if (n == 0) throw std::invalid_argument("empty training set");

  const int c = global.dims.classes;
  const int d = global.dims.features;
  ModelParams out = global;
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
      out.weights.data(), c, d + 1);

  Eigen::MatrixXd one_hot = Eigen::MatrixXd::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) one_hot(i, data.labels[i]) = 1.0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Eigen::MatrixXd logits = logits_of(out, data.features);
    // Cross-entropy straight from logits: log-sum-exp minus the true logit.
    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double row_max = logits.row(i).maxCoeff();
      double lse = std::log((logits.row(i).array() - row_max).exp().sum()) + row_max;
      loss += lse - logits(i, data.labels[i]);
    }
    loss /= double(n);
    if (!std::isfinite(loss))
      throw std::runtime_error("training diverged: non-finite loss");
    Eigen::MatrixXd probs = softmax_rows(std::move(logits));
    Eigen::MatrixXd err = (probs - one_hot) / double(n);  // n x c
    // grad over weights: err^T * X ; over bias: column sums of err.
    Eigen::MatrixXd grad_w = err.transpose() * data.features;
    Eigen::VectorXd grad_b = err.colwise().sum();
    w.leftCols(d) -= lr * grad_w;
    w.col(d) -= lr * grad_b;
    if (!out.weights.allFinite())
      throw std::runtime_error("training diverged to non-finite parameters");
  }
  return out;
}

ModelParams fed_avg(const std::vector<std::pair<ModelParams, double>>& parts) {
  if (parts.empty()) throw std::invalid_argument("fed_avg of empty list");
  const ModelDims dims = parts.front().first.dims;
  double total = 0;
  for (const auto& [params, weight] : parts) {
    if (!(weight > 0)) throw std::invalid_argument("fed_avg weights must be positive");
    if (!(params.dims == dims)) throw std::invalid_argument("fed_avg dims mismatch");
    total += weight;
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dims.param_count());
  for (const auto& [params, weight] : parts) acc += (weight / total) * params.weights;
  return ModelParams{std::move(acc), dims};
}

AccuracyScore evaluate(const ModelParams& params, const Dataset& test) {
  if (test.role != DatasetRole::Test)
    throw std::invalid_argument("evaluate requires a test-role dataset");
  if (test.rows() == 0) throw std::invalid_argument("empty test set");
  check_dataset(test, params.dims);

  Eigen::MatrixXd logits = logits_of(params, test.features);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    Eigen::Index pred;
    logits.row(i).maxCoeff(&pred);
    if (static_cast<int>(pred) == test.labels[i]) ++correct;
  }
  return AccuracyScore{
      static_cast<int>(std::lround(1000.0 * double(correct) / double(test.rows())))};
}

ModelParams add_dp_noise(const ModelParams& params, const DpConfig& cfg, uint64_t seed) {
  const double sigma = gaussian_sigma(cfg);
  ModelParams out = params;
  const double norm = out.weights.norm();
  if (norm > cfg.clip_norm) out.weights *= cfg.clip_norm / norm;
  Rng rng = Rng::derive(seed, "dp-noise");
  for (Eigen::Index i = 0; i < out.weights.size(); ++i)
    out.weights[i] += rng.normal(0.0, sigma);
  return out;
}

bool contains_model_params_blob(const Bytes& data) {
  for (size_t i = 0; i < data.size(); ++i) {
    if (data[i] != kTagModelParams) continue;
    try {
      ByteReader r(data.data() + i, data.size() - i);
      ModelParams p = ModelParams::decode(r);
      if (p.dims.features > 0 && p.dims.classes > 0) return true;
    } catch (const CodecError&) {
      // not a params blob at this offset
    }
  }
  return false;
}

Dataset load_delimited(const std::string& path, DatasetRole role) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (row.size() < 2) throw std::runtime_error("dataset row needs >= 1 feature + label");
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged dataset rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty dataset file: " + path);

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size() - 1);
  Dataset ds;
  ds.role = role;
  ds.features.resize(n, d);
  ds.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) ds.features(i, j) = rows[i][j];
    ds.labels[i] = static_cast<int>(std::lround(rows[i][d]));
    if (ds.labels[i] < 0) throw std::runtime_error("negative class label");
  }
  return ds;
}

Dataset make_blobs(int classes, int features, int rows, double spread, uint64_t seed,
                   DatasetRole role) {
  if (classes < 2 || features < 2 || rows < classes)
    throw std::invalid_argument("make_blobs needs >=2 classes, >=2 features, rows >= classes");
  Rng rng = Rng::derive(seed, "blobs");
  Dataset ds;
  ds.role = role;
  ds.features.resize(rows, features);
  ds.labels.resize(rows);
  const double radius = 3.0;
  for (int i = 0; i < rows; ++i) {
    int cls = i % classes;
    double angle = 2.0 * M_PI * cls / classes;
    ds.labels[i] = cls;
    ds.features(i, 0) = radius * std::cos(angle) + rng.normal(0, spread);
    ds.features(i, 1) = radius * std::sin(angle) + rng.normal(0, spread);
    for (int j = 2; j < features; ++j) ds.features(i, j) = rng.normal(0, spread);
  }
  return ds;
}

Dataset make_moons(int rows, double noise, uint64_t seed, DatasetRole role) {
  if (rows < 2) throw std::invalid_argument("make_moons needs rows >= 2");
  Rng rng = Rng::derive(seed, "moons");
  Dataset ds;
  ds.role = role;
  ds.features.resize(rows, 2);
  ds.labels.resize(rows);
  for (int i = 0; i < rows; ++i) {
    int cls = i % 2;
    double t = M_PI * rng.uniform_double();
    double x = std::cos(t), y = std::sin(t);
    if (cls == 1) {
      x = 1.0 - x;
      y = 0.5 - y;
    }
    ds.labels[i] = cls;
    ds.features(i, 0) = x + rng.normal(0, noise);
    ds.features(i, 1) = y + rng.normal(0, noise);
  }
  return ds;
}

}  // namespace dfl
