// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Unbiased stochastic s-level quantizer with norm scaling.
//
// Each component is encoded as sign(x_i) * ||x|| * k/s for an integer level
// k in [0, s]. The level is drawn between the two grid points bracketing
// |x_i| / ||x|| with probabilities that make the output unbiased.

#pragma once

#include <Eigen/Core>

#include "hfl/rng.hpp"

namespace hfl {

enum class QuantizerMode { stochastic, identity };

struct QuantizerSpec {
  QuantizerMode mode = QuantizerMode::identity;
  int levels = 1;
  // Measured or supplied bound on E||Q(x)-x||^2 / ||x||^2.
  double variance_factor = 0.0;

  static QuantizerSpec identity() { return {}; }
  static QuantizerSpec stochastic(int levels, double variance_factor = 0.0);

  /// Throws std::invalid_argument if the invariants do not hold.
  void validate() const;
};

/// Throws std::domain_error on non-finite input.
Eigen::VectorXd quantize(const Eigen::VectorXd& x, const QuantizerSpec& spec,
                         Rng& rng);

struct VarianceEstimateOptions {
  int probes = 2048;
};

// Empirical q: maximum over standard-normal probe vectors of the mean
// squared quantization error relative to ||x||^2. `trials` is the number of
// quantizer draws per probe.
double estimate_variance_factor(int levels, int dim, int trials, Rng& rng,
                                VarianceEstimateOptions options = {});

double estimate_variance_factor(const QuantizerSpec& spec, int dim, int trials,
                                Rng& rng, VarianceEstimateOptions options = {});

}  // namespace hfl
