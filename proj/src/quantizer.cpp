// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfl/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfl {

QuantizerSpec QuantizerSpec::stochastic(int levels, double variance_factor) {
  QuantizerSpec spec;
  spec.mode = QuantizerMode::stochastic;
  spec.levels = levels;
  spec.variance_factor = variance_factor;
  spec.validate();
  return spec;
}

void QuantizerSpec::validate() const {
  if (levels < 1) {
    throw std::invalid_argument("quantizer levels must be >= 1, got " +
                                std::to_string(levels));
  }
  if (!(variance_factor >= 0.0)) {
    throw std::invalid_argument("quantizer variance factor must be >= 0");
  }
  if (mode == QuantizerMode::identity && variance_factor != 0.0) {
    throw std::invalid_argument(
        "identity quantizer must have variance factor 0");
  }
}

Eigen::VectorXd quantize(const Eigen::VectorXd& x, const QuantizerSpec& spec,
                         Rng& rng) {
  spec.validate();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw std::domain_error("quantize: non-finite component at index " +
                              std::to_string(i) +
                              " (upstream numerical blow-up)");
    }
  }
  if (spec.mode == QuantizerMode::identity) return x;

  const double norm = x.norm();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  if (norm == 0.0) return out;

  const int s = spec.levels;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    // One draw per component keeps the stream position independent of x.
    const double u = unit(rng);
    if (x[i] == 0.0) continue;
    const double scaled = std::abs(x[i]) / norm * s;
    const int lower = std::min(static_cast<int>(std::floor(scaled)), s - 1);
    const double p_up = scaled - lower;
    const int level = lower + (u < p_up ? 1 : 0);
    const double magnitude = norm * level / s;
    out[i] = x[i] > 0.0 ? magnitude : -magnitude;
  }
  return out;
}

double estimate_variance_factor(int levels, int dim, int trials, Rng& rng,
                                VarianceEstimateOptions options) {
  return estimate_variance_factor(QuantizerSpec::stochastic(levels), dim,
                                  trials, rng, options);
}

double estimate_variance_factor(const QuantizerSpec& spec, int dim, int trials,
                                Rng& rng, VarianceEstimateOptions options) {
  if (trials <= 0) throw std::invalid_argument("trials must be positive");
  if (dim <= 0) throw std::invalid_argument("dimension must be positive");
  if (options.probes <= 0) throw std::invalid_argument("probes must be positive");
  spec.validate();
  if (spec.mode == QuantizerMode::identity) return 0.0;

  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  Eigen::VectorXd probe(dim);
  for (int p = 0; p < options.probes; ++p) {
    for (int i = 0; i < dim; ++i) probe[i] = normal(rng);
    const double norm2 = probe.squaredNorm();
    if (norm2 == 0.0) continue;
    double sum = 0.0;
    for (int r = 0; r < trials; ++r) {
      sum += (quantize(probe, spec, rng) - probe).squaredNorm();
    }
    worst = std::max(worst, sum / trials / norm2);
  }
  return worst;
}

}  // namespace hfl
