// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doctest.h"

#include "hfl/datagen.hpp"
#include "hfl/models.hpp"

using hfl::ModelKind;
using hfl::ModelSpec;

namespace {

hfl::Dataset blobs(int K, int per_class, int dim, double sep, std::uint64_t seed) {
  hfl::Rng rng(seed);
  return hfl::make_synthetic_dataset({K, per_class, dim, sep, 1.0}, rng);
}

hfl::ParamVector random_params(const ModelSpec& spec, hfl::Rng& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  hfl::ParamVector w(spec.dim());
  for (auto& x : w) x = normal(rng);
  return w;
}

double rel_err(const hfl::ParamVector& a, const hfl::ParamVector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-12);
}

}  // namespace

TEST_CASE("dimension follows the documented layout") {
  CHECK(ModelSpec{ModelKind::logistic, 5, 3, 0}.dim() == 18);
  CHECK(ModelSpec{ModelKind::mlp, 5, 3, 4}.dim() == 4 * 6 + 3 * 5);
  CHECK(ModelSpec{ModelKind::quadratic, 5, 0, 0}.dim() == 5);
  CHECK_THROWS_AS(ModelSpec({ModelKind::logistic, 5, 1, 0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec({ModelKind::mlp, 5, 3, 0}).validate(), std::invalid_argument);
}

TEST_CASE("zero logistic weights give ln K") {
  for (int K : {2, 3, 10}) {
    const ModelSpec spec{ModelKind::logistic, 4, K, 0};
    const auto data = blobs(K, 3, 4, 3.0, 1);
    CHECK(hfl::loss(spec, hfl::ParamVector::Zero(spec.dim()), data) ==
          doctest::Approx(std::log(static_cast<double>(K))).epsilon(1e-15));
  }
}

TEST_CASE("loss ignores batch order and duplication") {
  const ModelSpec spec{ModelKind::mlp, 3, 4, 5};
  hfl::Rng rng(2);
  const auto w = random_params(spec, rng, 0.7);
  auto data = blobs(4, 5, 3, 2.0, 3);
  const double base = hfl::loss(spec, w, data);
  auto shuffled = data;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(hfl::loss(spec, w, shuffled) == doctest::Approx(base).epsilon(1e-13));
  auto doubled = data;
  doubled.insert(doubled.end(), data.begin(), data.end());
  CHECK(hfl::loss(spec, w, doubled) == doctest::Approx(base).epsilon(1e-13));
}

TEST_CASE("empty batch is rejected") {
  const ModelSpec spec{ModelKind::logistic, 2, 2, 0};
  const hfl::Dataset empty;
  const hfl::ParamVector w = hfl::ParamVector::Zero(spec.dim());
  CHECK_THROWS_AS(hfl::loss(spec, w, empty), std::invalid_argument);
  CHECK_THROWS_AS(hfl::gradient(spec, w, empty), std::invalid_argument);
}

TEST_CASE("single-sample logistic gradient at zero matches the softmax residual") {
  // At w = 0 every class has probability 1/K, so
  //   dW = (1/K - [k == y]) x^T,  db = 1/K - [k == y].
  const int K = 3;
  const ModelSpec spec{ModelKind::logistic, 2, K, 0};
  hfl::LabeledSample s;
  s.features = Eigen::Vector2d(2.0, -1.0);
  s.label = 1;
  const hfl::Dataset one{s};
  const auto g = hfl::gradient(spec, hfl::ParamVector::Zero(spec.dim()), one);
  const double expected[] = {
      2.0 / 3, -1.0 / 3,   // row 0
      -4.0 / 3, 2.0 / 3,   // row 1 (true class)
      2.0 / 3, -1.0 / 3,   // row 2
      1.0 / 3, -2.0 / 3, 1.0 / 3};
  for (int i = 0; i < spec.dim(); ++i) CHECK(g[i] == doctest::Approx(expected[i]).epsilon(1e-15));
}

TEST_CASE("finite differences on a quadratic are exact up to rounding") {
  const ModelSpec spec{ModelKind::quadratic, 3, 0, 0};
  hfl::LabeledSample a;
  a.features = Eigen::Vector3d(1.0, -2.0, 0.5);
  const hfl::Dataset data{a};
  const Eigen::Vector3d w(0.3, 0.4, -5.0);
  const auto fd = hfl::finite_diff_gradient(spec, w, data, 1e-4);
  CHECK((fd - (w - a.features)).norm() < 1e-8);
  CHECK_THROWS_AS(hfl::finite_diff_gradient(spec, w, data, 0.0), std::invalid_argument);
}

TEST_CASE("analytic gradient matches central differences") {
  hfl::Rng rng(4);
  for (ModelKind kind : {ModelKind::logistic, ModelKind::mlp}) {
    const ModelSpec spec{kind, 4, 3, 5};
    for (int draw = 0; draw < 20; ++draw) {
      const auto data = blobs(3, 4, 4, 3.0, 100 + draw);
      const auto w = random_params(spec, rng, 0.5);
      const auto g = hfl::gradient(spec, w, data);
      const auto fd = hfl::finite_diff_gradient(spec, w, data, 1e-5);
      CHECK(rel_err(fd, g) < 1e-5);
    }
  }
}

TEST_CASE("central-difference error shrinks quadratically in h") {
  const ModelSpec spec{ModelKind::mlp, 3, 3, 4};
  hfl::Rng rng(5);
  const auto w = random_params(spec, rng, 0.8);
  const auto data = blobs(3, 4, 3, 2.0, 6);
  const auto g = hfl::gradient(spec, w, data);
  const double e1 = (hfl::finite_diff_gradient(spec, w, data, 2e-2) - g).norm();
  const double e2 = (hfl::finite_diff_gradient(spec, w, data, 1e-2) - g).norm();
  CHECK(e1 / e2 > 3.5);
  CHECK(e1 / e2 < 4.5);
}

TEST_CASE("gradient vanishes at the minimizer of an overlapping two-class problem") {
  const ModelSpec spec{ModelKind::logistic, 2, 2, 0};
  const auto data = blobs(2, 20, 2, 1.0, 7);  // classes overlap: finite minimizer
  hfl::ParamVector w = hfl::ParamVector::Zero(spec.dim());
  for (int it = 0; it < 20000; ++it) w -= 0.5 * hfl::gradient(spec, w, data);
  CHECK(hfl::gradient(spec, w, data).norm() < 1e-6);
}

TEST_CASE("mini-batch gradients are unbiased and their variance falls like 1/B") {
  const ModelSpec spec{ModelKind::logistic, 3, 3, 0};
  const auto data = blobs(3, 30, 3, 2.0, 8);
  hfl::Rng rng(9);
  const auto w = random_params(spec, rng, 0.3);
  const auto full = hfl::gradient(spec, w, data);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);

  auto stats = [&](int B, int reps) {
    hfl::ParamVector mean = hfl::ParamVector::Zero(spec.dim());
    double var = 0.0;
    std::vector<std::size_t> batch(B);
    for (int r = 0; r < reps; ++r) {
      for (auto& b : batch) b = pick(rng);
      const auto g = hfl::gradient(spec, w, data, batch);
      mean += g;
      var += (g - full).squaredNorm();
    }
    return std::pair{hfl::ParamVector(mean / reps), var / reps};
  };

  const int reps = 20000;
  const auto [mean4, var4] = stats(4, reps);
  const auto [mean8, var8] = stats(8, reps);
  // Each coordinate of the mean has standard error sqrt(var_i / reps).
  CHECK((mean4 - full).norm() <= 4.0 * std::sqrt(var4 / reps));
  CHECK(var8 <= 0.5 * var4 * 1.25);
  CHECK(var8 >= 0.5 * var4 * 0.75);
}

TEST_CASE("accuracy is NaN for the quadratic surrogate") {
  const ModelSpec spec{ModelKind::quadratic, 1, 0, 0};
  hfl::LabeledSample s;
  s.features = Eigen::VectorXd::Ones(1);
  CHECK(std::isnan(hfl::accuracy(spec, hfl::ParamVector::Zero(1), hfl::Dataset{s})));
}

TEST_CASE("mlp initialization breaks symmetry deterministically") {
  const ModelSpec spec{ModelKind::mlp, 4, 3, 6};
  hfl::Rng a(10), b(10);
  const auto wa = hfl::initial_params(spec, a);
  CHECK(wa == hfl::initial_params(spec, b));
  CHECK(wa.norm() > 0.0);
}
