// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small differentiable classifiers with a flat parameter layout, plus a
// quadratic surrogate whose constants (L = delta = 1) are known exactly.
//
// Parameter layouts (row-major blocks, in this order):
//   logistic:  W [K x in], b [K]
//   mlp:       W1 [H x in], b1 [H], W2 [K x H], b2 [K]   (tanh hidden layer)
//   quadratic: w [in]; per-sample loss 0.5 * ||w - x||^2, label ignored

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hfl/rng.hpp"

namespace hfl {

using ParamVector = Eigen::VectorXd;

struct LabeledSample {
  Eigen::VectorXd features;
  int label = 0;
};

using Dataset = std::vector<LabeledSample>;

enum class ModelKind { logistic, mlp, quadratic };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ModelSpec {
  ModelKind kind = ModelKind::logistic;
  int input_dim = 1;
  int num_classes = 2;
  int hidden_width = 0;  // mlp only

  void validate() const;
  Eigen::Index dim() const;
  bool is_classifier() const { return kind != ModelKind::quadratic; }
};

/// Zeros for logistic/quadratic; scaled normal weights for the MLP so the
/// hidden units are not symmetric.
ParamVector initial_params(const ModelSpec& spec, Rng& rng);

// Batches are either a span of samples, or a span plus an index list into it
// (mini-batches drawn with replacement).
double loss(const ModelSpec& spec, const ParamVector& w,
            std::span<const LabeledSample> data);
double loss(const ModelSpec& spec, const ParamVector& w,
            std::span<const LabeledSample> data,
            std::span<const std::size_t> batch);

ParamVector gradient(const ModelSpec& spec, const ParamVector& w,
                     std::span<const LabeledSample> data);
ParamVector gradient(const ModelSpec& spec, const ParamVector& w,
                     std::span<const LabeledSample> data,
                     std::span<const std::size_t> batch);

/// Central differences, one coordinate at a time, with step h * (1 + |w_i|).
ParamVector finite_diff_gradient(const ModelSpec& spec, const ParamVector& w,
                                 std::span<const LabeledSample> data, double h);

int predict(const ModelSpec& spec, const ParamVector& w,
            const Eigen::VectorXd& features);

/// Fraction of correctly classified samples; NaN for the quadratic surrogate.
double accuracy(const ModelSpec& spec, const ParamVector& w,
                std::span<const LabeledSample> data);

}  // namespace hfl
