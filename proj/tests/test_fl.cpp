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

#include <cmath>
#include <numeric>

#include "dfl/fl.hpp"
#include "dfl/rng.hpp"

using namespace dfl;

namespace {

ModelParams random_params(ModelDims dims, uint64_t seed) {
  Rng rng(seed);
  ModelParams p = ModelParams::zeros(dims);
  for (Eigen::Index i = 0; i < p.weights.size(); ++i) p.weights[i] = rng.normal(0, 1);
  return p;
}

// Independent element-wise oracle for the weighted mean.
ModelParams fed_avg_oracle(const std::vector<std::pair<ModelParams, double>>& parts) {
  double total = 0;
  for (const auto& [p, w] : parts) total += w;
  ModelParams out = ModelParams::zeros(parts.front().first.dims);
  for (Eigen::Index i = 0; i < out.weights.size(); ++i) {
    double acc = 0;
    for (const auto& [p, w] : parts) acc += p.weights[i] * w;
    out.weights[i] = acc / total;
  }
  return out;
}

Dataset all_zero_label_dataset(int rows, int zeros) {
  Dataset ds;
  ds.role = DatasetRole::Test;
  ds.features = Eigen::MatrixXd::Zero(rows, 2);
  ds.labels.resize(rows);
  for (int i = 0; i < rows; ++i) ds.labels[i] = i < zeros ? 0 : 1;
  return ds;
}

}  // namespace

TEST_CASE("fed_avg matches the brute-force oracle") {
  ModelDims dims{4, 3};
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<ModelParams, double>> parts;
    int k = 1 + int(rng.uniform_u64(5));
    for (int i = 0; i < k; ++i)
      parts.emplace_back(random_params(dims, trial * 10 + i), 0.1 + rng.uniform_double());
    ModelParams got = fed_avg(parts);
    ModelParams want = fed_avg_oracle(parts);
    CHECK((got.weights - want.weights).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fed_avg basics") {
  ModelDims dims{2, 2};
  ModelParams a = random_params(dims, 1);

  SUBCASE("identical models average to themselves") {
    auto got = fed_avg({{a, 1.0}, {a, 7.0}, {a, 0.5}});
    CHECK((got.weights - a.weights).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("equal weights give the arithmetic mean") {
    ModelParams b = random_params(dims, 2);
    auto got = fed_avg({{a, 1.0}, {b, 1.0}});
    CHECK((got.weights - (a.weights + b.weights) / 2).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("weights (1,1,2)") {
    ModelParams b = random_params(dims, 2);
    ModelParams c = random_params(dims, 3);
    auto got = fed_avg({{a, 1}, {b, 1}, {c, 2}});
    auto want = fed_avg_oracle({{a, 1}, {b, 1}, {c, 2}});
    CHECK((got.weights - want.weights).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("permutation invariance") {
    ModelParams b = random_params(dims, 2);
    ModelParams c = random_params(dims, 3);
    auto one = fed_avg({{a, 1}, {b, 2}, {c, 3}});
    auto two = fed_avg({{c, 3}, {a, 1}, {b, 2}});
    CHECK((one.weights - two.weights).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("errors") {
    CHECK_THROWS(fed_avg({}));
    ModelParams other = random_params(ModelDims{3, 2}, 4);
    CHECK_THROWS(fed_avg({{a, 1.0}, {other, 1.0}}));
    CHECK_THROWS(fed_avg({{a, 0.0}}));
  }
}

TEST_CASE("evaluate scores and rounding") {
  // Zero weights predict class 0 everywhere (first argmax index).
  ModelParams zero = ModelParams::zeros(ModelDims{2, 2});

  SUBCASE("perfect classification") {
    Dataset ds = all_zero_label_dataset(50, 50);
    CHECK(evaluate(zero, ds).value == 1000);
  }
  SUBCASE("987 of 1000") {
    Dataset ds = all_zero_label_dataset(1000, 987);
    CHECK(evaluate(zero, ds).value == 987);
  }
  SUBCASE("2 of 3 rounds to 667") {
    Dataset ds = all_zero_label_dataset(3, 2);
    CHECK(evaluate(zero, ds).value == 667);
  }
  SUBCASE("row permutation invariance") {
    Dataset ds = make_blobs(3, 4, 60, 0.8, 5, DatasetRole::Test);
    ModelParams p = random_params(ModelDims{4, 3}, 9);
    int base = evaluate(p, ds).value;
    Dataset shuffled = ds;
    std::vector<int> idx(ds.rows());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(3);
    for (int i = int(idx.size()) - 1; i > 0; --i)
      std::swap(idx[i], idx[rng.uniform_u64(i + 1)]);
    for (int i = 0; i < ds.rows(); ++i) {
      shuffled.features.row(i) = ds.features.row(idx[i]);
      shuffled.labels[i] = ds.labels[idx[i]];
    }
    CHECK(evaluate(p, shuffled).value == base);
  }
  SUBCASE("errors") {
    Dataset empty;
    empty.role = DatasetRole::Test;
    empty.features.resize(0, 2);
    empty.labels.resize(0);
    CHECK_THROWS(evaluate(zero, empty));
    Dataset train = all_zero_label_dataset(3, 2);
    train.role = DatasetRole::Train;
    CHECK_THROWS(evaluate(zero, train));
  }
}

TEST_CASE("train_local") {
  ModelDims dims{2, 2};
  Dataset data = make_blobs(2, 2, 80, 0.5, 21, DatasetRole::Train);
  ModelParams global = ModelParams::zeros(dims);

  SUBCASE("zero learning rate is the identity") {
    ModelParams out = train_local(global, data, 1, 0.0, 0);
    CHECK(out.weights == global.weights);
  }
  SUBCASE("epochs must be >= 1") { CHECK_THROWS(train_local(global, data, 0, 0.1, 0)); }
  SUBCASE("separable blobs reach 95% train accuracy") {
    ModelParams out = train_local(global, data, 50, 0.5, 0);
    Dataset eval_view = data;
    eval_view.role = DatasetRole::Test;
    CHECK(evaluate(out, eval_view).value >= 950);
  }
  SUBCASE("deterministic") {
    ModelParams a = train_local(global, data, 10, 0.3, 7);
    ModelParams b = train_local(global, data, 10, 0.3, 7);
    CHECK(a.weights == b.weights);
  }
  SUBCASE("dimensionality preserved") {
    ModelParams out = train_local(global, data, 5, 0.2, 0);
    CHECK(out.dims == dims);
    CHECK(out.weights.size() == global.weights.size());
  }
  SUBCASE("divergence raises") {
    // A step near the double limit overflows weights or logits within two
    // epochs; the non-finite loss check reports the divergent config.
    CHECK_THROWS_AS(train_local(global, data, 5, 1e308, 0), std::runtime_error);
  }
}

TEST_CASE("gaussian sigma matches the closed form") {
  DpConfig cfg{1.0, 1e-5, 1.0};
  double want = std::sqrt(2.0 * std::log(1.25 / 1e-5));  // independent evaluation
  CHECK(gaussian_sigma(cfg) == doctest::Approx(want).epsilon(1e-12));
  CHECK(gaussian_sigma(cfg) == doctest::Approx(4.8446).epsilon(1e-3));
}

TEST_CASE("add_dp_noise") {
  SUBCASE("huge eps leaves the clipped input intact") {
    ModelParams p = random_params(ModelDims{4, 3}, 3);
    DpConfig cfg{1e9, 1e-5, 1.0};
    ModelParams noised = add_dp_noise(p, cfg, 1);
    ModelParams clipped = p;
    double norm = clipped.weights.norm();
    if (norm > cfg.clip_norm) clipped.weights *= cfg.clip_norm / norm;
    CHECK((noised.weights - clipped.weights).cwiseAbs().maxCoeff() < 1e-3);
  }
  SUBCASE("zero vector noise has near-zero empirical mean") {
    const int d = 100;
    ModelParams p = ModelParams::zeros(ModelDims{d - 1, 1});
    REQUIRE(p.weights.size() == d);
    DpConfig cfg{1.0, 1e-5, 1.0};
    // Pool coordinates across seeds for >= 10^4 samples.
    double sum = 0;
    int count = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
      ModelParams noised = add_dp_noise(p, cfg, seed);
      sum += noised.weights.sum();
      count += d;
    }
    double sigma = gaussian_sigma(cfg);
    CHECK(std::abs(sum / count) < 3 * sigma / std::sqrt(double(count)));
  }
  SUBCASE("smaller eps means larger expected perturbation") {
    ModelParams p = ModelParams::zeros(ModelDims{9, 1});
    DpConfig tight{0.5, 1e-5, 1.0};
    DpConfig loose{4.0, 1e-5, 1.0};
    double tight_sum = 0, loose_sum = 0;
    for (uint64_t seed = 0; seed < 120; ++seed) {
      tight_sum += add_dp_noise(p, tight, seed).weights.norm();
      loose_sum += add_dp_noise(p, loose, seed).weights.norm();
    }
    CHECK(tight_sum > loose_sum);
  }
  SUBCASE("deterministic for a fixed seed") {
    ModelParams p = random_params(ModelDims{3, 2}, 5);
    DpConfig cfg{1.0, 1e-5, 1.0};
    CHECK(add_dp_noise(p, cfg, 9).weights == add_dp_noise(p, cfg, 9).weights);
  }
  SUBCASE("config validation") {
    ModelParams p = ModelParams::zeros(ModelDims{2, 2});
    CHECK_THROWS(add_dp_noise(p, DpConfig{0.0, 1e-5, 1.0}, 0));
    CHECK_THROWS(add_dp_noise(p, DpConfig{1.0, 0.0, 1.0}, 0));
    CHECK_THROWS(add_dp_noise(p, DpConfig{1.0, 1e-5, 0.0}, 0));
  }
}

TEST_CASE("model params blob scanner") {
  ModelParams p = random_params(ModelDims{3, 2}, 8);
  Bytes blob = encode(p);
  CHECK(contains_model_params_blob(blob));

  Bytes wrapped;
  wrapped.push_back(0x42);
  wrapped.insert(wrapped.end(), blob.begin(), blob.end());
  wrapped.push_back(0x17);
  CHECK(contains_model_params_blob(wrapped));

  Bytes clean{1, 2, 3, 4, 5, 6, 7, 9, 10};
  CHECK_FALSE(contains_model_params_blob(clean));
}

TEST_CASE("dataset generators and loader") {
  Dataset blobs = make_blobs(3, 5, 90, 0.7, 4, DatasetRole::Train);
  CHECK(blobs.rows() == 90);
  CHECK(blobs.features.cols() == 5);
  CHECK(blobs.labels.maxCoeff() == 2);

  Dataset moons = make_moons(50, 0.1, 4, DatasetRole::Train);
  CHECK(moons.rows() == 50);
  CHECK(moons.features.cols() == 2);

  // Loader handles comments, commas and plain whitespace.
  std::string path = "test_dataset_tmp.csv";
  {
    FILE* f = fopen(path.c_str(), "w");
    REQUIRE(f);
    fprintf(f, "# comment\n0.5, 1.25, 0\n-1.0 2.5 1\n");
    fclose(f);
  }
  Dataset loaded = load_delimited(path, DatasetRole::Train);
  CHECK(loaded.rows() == 2);
  CHECK(loaded.features(0, 1) == doctest::Approx(1.25));
  CHECK(loaded.labels[1] == 1);
  remove(path.c_str());
}
