// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hfl {

int TheoryParams::N() const {
  return std::accumulate(set_sizes.begin(), set_sizes.end(), 0);
}

int TheoryParams::max_set() const {
  return *std::max_element(set_sizes.begin(), set_sizes.end());
}

int TheoryParams::min_set() const {
  return *std::min_element(set_sizes.begin(), set_sizes.end());
}

void TheoryParams::validate() const {
  if (set_sizes.empty()) throw std::invalid_argument("need at least one device set");
  for (int n : set_sizes)
    if (n < 1) throw std::invalid_argument("set sizes must be >= 1");
  if (!(L >= 0 && delta >= 0 && sigma2 >= 0 && G2 >= 0 && q1 >= 0 && q2 >= 0)) {
    throw std::invalid_argument("theory constants must be non-negative");
  }
  if (!(B > 0)) throw std::invalid_argument("batch size must be positive");
  if (!(mu > 0)) throw std::invalid_argument("mu must be positive");
  if (tau < 1 || gamma < 1 || T < 1) {
    throw std::invalid_argument("tau, gamma, T must be >= 1");
  }
}

LrConditions check_lr_conditions(const TheoryParams& p) {
  const double L = p.L, mu = p.mu, q1 = p.q1, q2 = p.q2;
  const double tau = p.tau, gamma = p.gamma;
  const double N = p.N();
  const double inv_min = 1.0 / p.min_set();  // max_l 1/N_l
  const double max_n = p.max_set();

  LrConditions out;
  out.lhs_A = 1.0 -
              L * L * mu * mu *
                  (tau * gamma + tau * (tau - 1.0) / 2.0 + q1 * (tau + gamma) * inv_min) -
              L * mu * (tau + q1 / N + q2 * q1 / N + tau * q2 * max_n / N);
  out.lhs_B = 1.0 - L * L * mu * mu * gamma * (gamma - 1.0) / 2.0 -
              L * mu * gamma * (1.0 + (1.0 + q2) * q1 / N + q2 * max_n / N);
  out.cond_A = out.lhs_A >= 0.0;
  out.cond_B = out.lhs_B >= 0.0;
  return out;
}

double baseline_lr_condition_lhs(const TheoryParams& p) {
  const double L = p.L, mu = p.mu, q1 = p.q1, q2 = p.q2;
  const double tau = p.tau, gamma = p.gamma;
  const double N = p.N();
  return 1.0 -
         L * L * mu * mu *
             (gamma * (gamma - 1.0) / 2.0 + gamma * tau * (tau * (tau - 1.0) / 2.0 + q1 * tau)) -
         L * mu * (1.0 + q2) * (gamma * tau + q1 * gamma / N);
}

double qhetfed_error_term(const TheoryParams& p) {
  p.validate();
  const double L = p.L, mu = p.mu, q1 = p.q1, q2 = p.q2;
  const double tau = p.tau, gamma = p.gamma;
  const double N = p.N(), C = p.C();
  const double noise = p.sigma2 / p.B;
  const double inner = L * mu / N * C * (1.0 + q1) * tau * ((tau - 1.0) / 2.0 + gamma) +
                       L * mu * gamma * (gamma - 1.0) / 2.0 +
                       (tau + gamma) * (1.0 + q2) * (1.0 + q1) / N;
  return L * mu * mu / 2.0 * noise * inner + mu * (tau + gamma) / 2.0 * p.G2;
}

double baseline_error_term(const TheoryParams& p) {
  p.validate();
  const double L = p.L, mu = p.mu, q1 = p.q1, q2 = p.q2;
  const double tau = p.tau, gamma = p.gamma;
  const double N = p.N(), C = p.C();
  const double noise = p.sigma2 / p.B;
  const double inner = L * mu / N * C * (1.0 + q1) * gamma * gamma * tau * (tau - 1.0) / 2.0 +
                       L * mu * tau * gamma * (gamma - 1.0) / 2.0 +
                       tau * gamma * (1.0 + q2) * (1.0 + q1) / N;
  return L * mu * mu / 2.0 * noise * inner + mu * tau * gamma / 2.0 * p.G2;
}

double assemble_gap(double c, double e, int T, double gap0) {
  const double cT = std::pow(c, T);
  const double geometric = c == 1.0 ? static_cast<double>(T) : (1.0 - cT) / (1.0 - c);
  return cT * gap0 + geometric * e;
}

GapBound qhetfed_gap_bound(const TheoryParams& p, double gap0) {
  GapBound g;
  g.c = 1.0 - p.mu * (p.tau + p.gamma) * p.delta;
  g.e = qhetfed_error_term(p);
  g.bound = assemble_gap(g.c, g.e, p.T, gap0);
  g.contractive = g.c > -1.0;
  return g;
}

GapBound baseline_gap_bound(const TheoryParams& p, double gap0) {
  GapBound g;
  g.c = 1.0 - p.mu * p.tau * p.gamma * p.delta;
  g.e = baseline_error_term(p);
  g.bound = assemble_gap(g.c, g.e, p.T, gap0);
  g.contractive = g.c > -1.0;
  return g;
}

double single_cell_error_term(const TheoryParams& p) {
  p.validate();
  const double L = p.L, mu = p.mu, q1 = p.q1;
  const double tau = p.tau, gamma = p.gamma;
  const double N = p.N();
  const double noise = p.sigma2 / p.B;
  return L * mu * mu / 2.0 * noise *
             (L * mu / N * (1.0 + q1) * tau * ((tau - 1.0) / 2.0 + gamma) +
              L * mu * gamma * (gamma - 1.0) / 2.0 + (tau + gamma) * (1.0 + q1) / N) +
         mu * (tau + gamma) / 2.0 * p.G2;
}

double gamma1_error_term(const TheoryParams& p) {
  p.validate();
  const double L = p.L, mu = p.mu, q1 = p.q1, q2 = p.q2;
  const double tau = p.tau;
  const double N = p.N(), C = p.C();
  const double noise = p.sigma2 / p.B;
  return L * mu * mu / 2.0 * noise *
             (L * mu / N * C * (1.0 + q1) * (tau + 1.0) * tau / 2.0 +
              (tau + 1.0) * (1.0 + q2) * (1.0 + q1) / N) +
         mu * (tau + 1.0) / 2.0 * p.G2;
}

double gamma1_lr_condition_lhs(const TheoryParams& p) {
  const double L = p.L, mu = p.mu, q1 = p.q1, q2 = p.q2;
  const double tau = p.tau;
  const double N = p.N();
  return 1.0 -
         L * L * mu * mu * (tau + tau * (tau - 1.0) / 2.0 + q1 * (tau + 1.0) / p.min_set()) -
         L * mu * (1.0 + q2) * (tau * p.max_set() / N + q1 / N);
}

ErrorGap error_gap_decomposition(const TheoryParams& p) {
  p.validate();
  const double L = p.L, mu = p.mu, q1 = p.q1, q2 = p.q2;
  const double tau = p.tau, gamma = p.gamma;
  const double N = p.N(), C = p.C();
  const double noise = p.sigma2 / p.B;
  const double excess = tau * gamma - tau - gamma;

  ErrorGap d;
  d.d_q1 = L * L * mu * mu * mu / (2.0 * N) * noise * C * (1.0 + q1) *
           ((gamma * gamma - 1.0) * tau * (tau - 1.0) / 2.0 - tau * gamma);
  d.d_q2 = L * mu * mu / (2.0 * N) * noise * (1.0 + q2) * (1.0 + q1) * excess;
  d.d_local = L * L * mu * mu * mu / 2.0 * noise * (tau - 1.0) * gamma * (gamma - 1.0) / 2.0;
  d.d_het = mu / 2.0 * p.G2 * excess;
  d.total = baseline_error_term(p) - qhetfed_error_term(p);
  return d;
}

double convergence_rate_bound(const TheoryParams& p, int T, double gap0) {
  p.validate();
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  const double L = p.L, mu = p.mu, q1 = p.q1, q2 = p.q2;
  const double tau = p.tau, gamma = p.gamma;
  const double N = p.N(), C = p.C();
  const double noise = p.sigma2 / p.B;
  const double s = tau + gamma;
  return 2.0 * gap0 / (mu * s * T) +
         L * L * mu * mu / 2.0 * noise *
             (C / N * (1.0 + q1) * tau * (1.0 + (gamma - 1.0) / s) + gamma * (gamma - 1.0) / s) +
         L * mu * noise / N * (1.0 + q2) * (1.0 + q1) + p.G2;
}

const char* to_string(TauPreference p) {
  switch (p) {
    case TauPreference::prefer_high_tau: return "prefer_high_tau";
    case TauPreference::prefer_low_tau: return "prefer_low_tau";
    case TauPreference::indifferent: return "indifferent";
  }
  return "unknown";
}

TauPreference tau_preference(double q1, int N, int C) {
  if (N < 1 || C < 1) throw std::invalid_argument("N and C must be >= 1");
  // Sign of 1 - (C/N)(1 + q1), evaluated without division.
  const double lhs = static_cast<double>(C) * (1.0 + q1);
  const double rhs = static_cast<double>(N);
  if (lhs < rhs) return TauPreference::prefer_high_tau;
  if (lhs > rhs) return TauPreference::prefer_low_tau;
  return TauPreference::indifferent;
}

}  // namespace hfl
