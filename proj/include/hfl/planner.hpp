// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Delay model and deadline-constrained choice of (tau, gamma).
//
// Per global iteration QHetFed spends (tau + gamma) compute slots, tau
// device-edge uploads and one edge-cloud exchange. Under a deadline T_d over
// T global iterations, gamma is pinned by tau, and the remaining
// one-dimensional objective J(tau) has stationary points at the roots of a
// quadratic a0*tau^2 + b0*tau + c0.

#pragma once

#include <optional>
#include <vector>

namespace hfl {

struct LinkComputeParams {
  double bandwidth_hz = 1e6;
  double power_w = 0.5;
  double noise_w = 1e-10;
  double cycles_per_bit = 20.0;
  double channel_gain = 1e-8;
  double cpu_freq_hz = 1e9;
  double bits_per_local_iter = 1e8;
  double model_bits = 1e6;
  // Exactly one of these is used: an absolute edge-cloud time, or a multiple
  // of the device-edge time.
  std::optional<double> edge_cloud_time_s;
  double edge_cloud_ratio = 10.0;

  void validate() const;
};

struct StageTimes {
  double t_cp = 0.0;  // local computation per step
  double t_de = 0.0;  // device <-> edge exchange
  double t_ec = 0.0;  // edge <-> cloud exchange
};

StageTimes compute_times(const LinkComputeParams& lp);

/// (tau + gamma) t_cp + tau t_de + t_ec
double iteration_delay(int tau, int gamma, const StageTimes& times);
/// tau gamma t_cp + tau t_de + t_ec
double baseline_iteration_delay(int tau, int gamma, const StageTimes& times);

struct DeadlinePlan {
  double deadline_s = 0.0;
  int global_iterations = 1;
  StageTimes times;

  /// Requires deadline > T * t_ec and positive stage times.
  void validate() const;
  /// Real-valued tau at which gamma(tau) = 1.
  double tau_limit() const;
};

/// gamma = T_d/(T t_cp) - (1 + t_de/t_cp) tau - t_ec/t_cp (not integerized).
double gamma_from_tau(double tau, const DeadlinePlan& plan);

struct ObjectiveWeights {
  double q1 = 0.0;
  int num_sets = 1;
  int num_devices = 1;

  double k() const { return static_cast<double>(num_sets) / num_devices * (1.0 + q1); }
};

/// J(tau) with gamma from gamma_from_tau. Throws if gamma(tau) < 1.
double objective_J(double tau, const DeadlinePlan& plan, const ObjectiveWeights& w);
/// The two-argument form before substituting the deadline.
double objective_J(double tau, double gamma, const ObjectiveWeights& w);

struct QuadraticCoefficients {
  double a0 = 0.0;
  double b0 = 0.0;
  double c0 = 0.0;
};

QuadraticCoefficients stationarity_coefficients(const DeadlinePlan& plan,
                                                const ObjectiveWeights& w);

/// dJ/dtau evaluated directly (no polynomial form).
double objective_derivative(double tau, const DeadlinePlan& plan,
                            const ObjectiveWeights& w);

struct SchedulePlan {
  QuadraticCoefficients coefficients;
  std::vector<double> stationary_points;  // real roots inside [1, tau_limit]
  std::vector<double> candidates;
  double tau_opt = 1.0;
  double gamma_opt = 1.0;
  double J_opt = 0.0;
  int tau_int = 1;
  int gamma_int = 1;
  double J_int = 0.0;  // objective_J(tau_int) with real gamma(tau_int)
};

/// Throws std::domain_error when gamma(1) < 1 (deadline too tight).
SchedulePlan optimize_schedule(const DeadlinePlan& plan, const ObjectiveWeights& w);

struct GridResult {
  int tau_star = 1;
  double gamma_star = 1.0;
  double J_star = 0.0;
};

/// Exhaustive over integer tau in [1, tau_max]; tau_max <= 0 means
/// floor(tau_limit()).
GridResult grid_search_schedule(const DeadlinePlan& plan, const ObjectiveWeights& w,
                                int tau_max = 0);

}  // namespace hfl
