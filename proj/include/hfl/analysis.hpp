// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form convergence calculators for QHetFed and Hier-Local-QSGD.
//
// Both optimality-gap bounds share the shape
//   gap_T <= c^T gap_0 + (1 - c^T) / (1 - c) * e
// with a contraction factor c and a persistent error e that collects the
// mini-batch noise (sigma^2 / B), quantization (q1, q2) and heterogeneity
// (G^2) contributions.

#pragma once

#include <vector>

namespace hfl {

struct TheoryParams {
  double L = 1.0;       // gradient Lipschitz constant
  double delta = 1.0;   // PL constant
  double sigma2 = 0.0;  // per-sample gradient variance bound
  double B = 1.0;       // mini-batch size
  double G2 = 0.0;      // heterogeneity
  double q1 = 0.0;
  double q2 = 0.0;
  double mu = 0.01;
  int tau = 1;
  int gamma = 1;
  int T = 1;
  std::vector<int> set_sizes{1};  // N_l; C = size(), N = sum

  int C() const { return static_cast<int>(set_sizes.size()); }
  int N() const;
  int max_set() const;
  int min_set() const;
  void validate() const;
};

struct LrConditions {
  double lhs_A = 0.0;
  double lhs_B = 0.0;
  bool cond_A = false;
  bool cond_B = false;
  bool ok() const { return cond_A && cond_B; }
};

LrConditions check_lr_conditions(const TheoryParams& p);

/// The single learning-rate condition of the baseline bound; returns the LHS.
double baseline_lr_condition_lhs(const TheoryParams& p);

struct GapBound {
  double c = 0.0;
  double e = 0.0;
  double bound = 0.0;
  // False when c <= -1: the closed form is still evaluated, but the bound no
  // longer contracts.
  bool contractive = true;
};

double qhetfed_error_term(const TheoryParams& p);
double baseline_error_term(const TheoryParams& p);

/// c^T gap0 + (1 - c^T)/(1 - c) e, with the c = 1 limit T e.
double assemble_gap(double c, double e, int T, double gap0);

GapBound qhetfed_gap_bound(const TheoryParams& p, double gap0);
GapBound baseline_gap_bound(const TheoryParams& p, double gap0);

/// Error term of the single-cell special case (C = 1, q2 = 0), written out
/// on its own rather than by substitution.
double single_cell_error_term(const TheoryParams& p);

/// Error term and learning-rate condition LHS of the gamma = 1 variant.
double gamma1_error_term(const TheoryParams& p);
double gamma1_lr_condition_lhs(const TheoryParams& p);

struct ErrorGap {
  double total = 0.0;  // e_bar - e
  double d_q1 = 0.0;
  double d_q2 = 0.0;
  double d_local = 0.0;
  double d_het = 0.0;
  double sum() const { return d_q1 + d_q2 + d_local + d_het; }
};

ErrorGap error_gap_decomposition(const TheoryParams& p);

/// Bound on the average squared global-gradient norm over T iterations.
double convergence_rate_bound(const TheoryParams& p, int T, double gap0);

enum class TauPreference { prefer_high_tau, prefer_low_tau, indifferent };

const char* to_string(TauPreference p);

/// Compares q1 with N/C - 1.
TauPreference tau_preference(double q1, int N, int C);

}  // namespace hfl
