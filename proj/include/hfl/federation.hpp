// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical execution engine: devices -> edge servers -> cloud.
//
// QHetFed global iteration:
//   tau rounds of  {device mini-batch gradient -> Q1 -> edge mean -> shared step}
//   gamma local mini-batch steps per device
//   edge: base + mean Q1(local model - base)
//   cloud: w + (1/N) sum_l N_l Q2(edge model_l - w)
//
// Hier-Local-QSGD replaces each intra-set round with gamma local steps
// followed by an edge model-delta aggregation.
//
// Randomness is coupled across variants: the mini-batch for a device's k-th
// local gradient evaluation inside global iteration t is drawn from the
// stream (seed, batch, device, step counter), where the step counter is the
// same for every variant that performs that evaluation.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hfl/datagen.hpp"
#include "hfl/models.hpp"
#include "hfl/planner.hpp"
#include "hfl/quantizer.hpp"
#include "hfl/rng.hpp"
#include "hfl/topology.hpp"

namespace hfl {

struct Schedule {
  int tau = 12;
  int gamma = 3;
  double mu = 0.01;
  int global_iterations = 100;
  int batch = 100;

  void validate() const;
};

enum class Algorithm { qhetfed, hier_local_qsgd, qhetfed_gamma1, centralized_sgd };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct FedRunConfig {
  Topology topology;
  Schedule schedule;
  ModelSpec model;
  std::vector<DeviceShard> shards;  // one per device, in (set, device) order
  Dataset test_set;                 // may be empty (accuracy reported as NaN)
  QuantizerSpec q1;                 // device -> edge
  QuantizerSpec q2;                 // edge -> cloud
  Algorithm algorithm = Algorithm::qhetfed;
  std::uint64_t seed = 1;
  StageTimes times{1.0, 0.0, 0.0};
  std::optional<ParamVector> initial;  // default: initial_params(model, seed)
  // Steps the centralized oracle takes per recorded iteration; 0 means
  // tau + gamma.
  int centralized_steps_per_iteration = 0;
  // Record device 0 of set 0 after every descent step.
  bool trace_steps = false;
  // Compute train loss / accuracy every k-th global iteration (and the last).
  int metric_cadence = 1;

  void validate() const;
};

struct IterationMetrics {
  int t = 0;  // 1-based global iteration
  std::string param_hash;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double runtime_s = 0.0;
};

struct RunRecord {
  Algorithm algorithm = Algorithm::qhetfed;
  std::uint64_t seed = 0;
  std::vector<IterationMetrics> metrics;
  // Global model after each global iteration; trajectory[0] is the start.
  std::vector<ParamVector> trajectory;
  std::vector<ParamVector> step_trace;
  std::optional<int> diverged_at;
  std::string divergence_reason;
};

/// Absolute bound on ||w|| before a run is declared divergent.
inline constexpr double kDivergenceNorm = 1e9;

ParamVector edge_aggregate_gradients(std::span<const ParamVector> local_grads,
                                     const QuantizerSpec& q1, Rng& rng);

ParamVector edge_aggregate_models(std::span<const ParamVector> deltas,
                                  const ParamVector& base,
                                  const QuantizerSpec& q1, Rng& rng);

ParamVector cloud_aggregate(std::span<const ParamVector> set_models,
                            const ParamVector& global_prev,
                            const Topology& topology, const QuantizerSpec& q2,
                            Rng& rng);

RunRecord run_qhetfed(const FedRunConfig& config);
RunRecord run_hier_local_qsgd(const FedRunConfig& config);
RunRecord run_qhetfed_gamma1(const FedRunConfig& config);
RunRecord run_centralized_sgd(const FedRunConfig& config);

/// Dispatches on config.algorithm.
RunRecord run(const FedRunConfig& config);

/// FNV-1a over the raw parameter bytes, as 16 hex digits.
std::string param_hash(const ParamVector& w);

/// Modeled wall time per global iteration for the given algorithm.
double modeled_iteration_delay(Algorithm a, const Schedule& s, const StageTimes& times);

}  // namespace hfl
