// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfl/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hfl {
namespace {

// gamma(tau) may land a few ulps below 1 at the feasibility boundary.
constexpr double kGammaSlack = 1e-9;

struct Ratios {
  double A;  // T_d / (T t_cp) - t_ec / t_cp, i.e. tau + gamma + r tau
  double r;  // t_de / t_cp
};

Ratios ratios(const DeadlinePlan& plan) {
  const StageTimes& t = plan.times;
  return {plan.deadline_s / (plan.global_iterations * t.t_cp) - t.t_ec / t.t_cp,
          t.t_de / t.t_cp};
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite");
  }
}

}  // namespace

void LinkComputeParams::validate() const {
  require_positive(bandwidth_hz, "bandwidth_hz");
  require_positive(power_w, "power_w");
  require_positive(noise_w, "noise_w");
  require_positive(cycles_per_bit, "cycles_per_bit");
  require_positive(channel_gain, "channel_gain");
  require_positive(cpu_freq_hz, "cpu_freq_hz");
  require_positive(bits_per_local_iter, "bits_per_local_iter");
  require_positive(model_bits, "model_bits");
  if (edge_cloud_time_s) {
    require_positive(*edge_cloud_time_s, "edge_cloud_time_s");
  } else {
    require_positive(edge_cloud_ratio, "edge_cloud_ratio");
  }
}

StageTimes compute_times(const LinkComputeParams& lp) {
  lp.validate();
  StageTimes t;
  t.t_cp = lp.cycles_per_bit * lp.bits_per_local_iter / lp.cpu_freq_hz;
  const double snr = lp.channel_gain * lp.power_w / lp.noise_w;
  t.t_de = lp.model_bits / (lp.bandwidth_hz * std::log2(1.0 + snr));
  t.t_ec = lp.edge_cloud_time_s ? *lp.edge_cloud_time_s : lp.edge_cloud_ratio * t.t_de;
  return t;
}

double iteration_delay(int tau, int gamma, const StageTimes& times) {
  if (tau < 1 || gamma < 1) throw std::invalid_argument("tau and gamma must be >= 1");
  return (tau + gamma) * times.t_cp + tau * times.t_de + times.t_ec;
}

double baseline_iteration_delay(int tau, int gamma, const StageTimes& times) {
  if (tau < 1 || gamma < 1) throw std::invalid_argument("tau and gamma must be >= 1");
  return static_cast<double>(tau) * gamma * times.t_cp + tau * times.t_de + times.t_ec;
}

void DeadlinePlan::validate() const {
  if (global_iterations < 1) throw std::invalid_argument("T must be >= 1");
  require_positive(deadline_s, "deadline");
  require_positive(times.t_cp, "t_cp");
  if (times.t_de < 0.0 || times.t_ec < 0.0) {
    throw std::invalid_argument("communication times must be non-negative");
  }
  if (!(deadline_s > global_iterations * times.t_ec)) {
    throw std::invalid_argument("deadline does not exceed T * t_ec");
  }
}

double DeadlinePlan::tau_limit() const {
  validate();
  const Ratios q = ratios(*this);
  return (q.A - 1.0) / (1.0 + q.r);
}

double gamma_from_tau(double tau, const DeadlinePlan& plan) {
  plan.validate();
  const Ratios q = ratios(plan);
  return q.A - (1.0 + q.r) * tau;
}

double objective_J(double tau, double gamma, const ObjectiveWeights& w) {
  const double s = tau + gamma;
  return w.k() * tau * (1.0 + (gamma - 1.0) / s) + gamma * (gamma - 1.0) / s;
}

double objective_J(double tau, const DeadlinePlan& plan, const ObjectiveWeights& w) {
  const double gamma = gamma_from_tau(tau, plan);
  if (tau < 1.0 || gamma < 1.0 - kGammaSlack) {
    throw std::domain_error("tau = " + std::to_string(tau) +
                            " is infeasible under the deadline (gamma = " +
                            std::to_string(gamma) + ")");
  }
  return objective_J(tau, gamma, w);
}

QuadraticCoefficients stationarity_coefficients(const DeadlinePlan& plan,
                                                const ObjectiveWeights& w) {
  plan.validate();
  const Ratios q = ratios(plan);
  const double k = w.k();
  const double m = k - 1.0 - q.r;
  const double A = q.A;
  const double r = q.r;
  QuadraticCoefficients c;
  c.a0 = m * (r * r + r) + k * r * r;
  c.b0 = m * (r - A - 2.0 * A * r) - (A + r) * m - 2.0 * k * A * r;
  c.c0 = m * (A * A - A) - (A + r) * A + k * A * A;
  return c;
}

double objective_derivative(double tau, const DeadlinePlan& plan,
                            const ObjectiveWeights& w) {
  const Ratios q = ratios(plan);
  const double k = w.k();
  const double m = k - 1.0 - q.r;
  const double s = q.A - q.r * tau;
  return m * (1.0 - (1.0 + tau) / s) - (q.A + q.r) / (s * s) * (m * tau + q.A) + k;
}

SchedulePlan optimize_schedule(const DeadlinePlan& plan, const ObjectiveWeights& w) {
  plan.validate();
  if (w.num_sets < 1 || w.num_devices < 1 || w.q1 < 0.0) {
    throw std::invalid_argument("objective weights need C, N >= 1 and q1 >= 0");
  }
  const double limit = plan.tau_limit();
  if (limit < 1.0) {
    throw std::domain_error("deadline infeasible: gamma(1) = " +
                            std::to_string(gamma_from_tau(1.0, plan)) + " < 1");
  }

  SchedulePlan out;
  out.coefficients = stationarity_coefficients(plan, w);
  const auto [a0, b0, c0] = out.coefficients;
  const double scale = std::max({std::abs(a0), std::abs(b0), std::abs(c0)});

  std::vector<double> roots;
  if (std::abs(a0) <= 1e-12 * scale) {
    if (b0 != 0.0) roots.push_back(-c0 / b0);
  } else {
    const double disc = b0 * b0 - 4.0 * a0 * c0;
    if (disc >= 0.0) {
      const double qq = -0.5 * (b0 + std::copysign(std::sqrt(disc), b0));
      if (qq != 0.0) {
        roots.push_back(qq / a0);
        roots.push_back(c0 / qq);
      } else {
        roots.push_back(0.0);
      }
    }
  }
  for (double r : roots) {
    if (std::isfinite(r) && r >= 1.0 && r <= limit) out.stationary_points.push_back(r);
  }

  // The feasible interval's endpoints are always candidates.
  out.candidates.push_back(1.0);
  out.candidates.insert(out.candidates.end(), out.stationary_points.begin(),
                        out.stationary_points.end());
  if (limit > 1.0) out.candidates.push_back(limit);

  out.J_opt = std::numeric_limits<double>::infinity();
  for (double tau : out.candidates) {
    const double J = objective_J(tau, plan, w);
    if (J < out.J_opt) {
      out.J_opt = J;
      out.tau_opt = tau;
    }
  }
  out.gamma_opt = gamma_from_tau(out.tau_opt, plan);

  // The integer optimum sits next to a local minimum of J on [1, floor(limit)],
  // so every candidate's neighbours are tried, not just those of tau_opt.
  const int tau_hi = std::max(1, static_cast<int>(std::floor(limit)));
  out.J_int = std::numeric_limits<double>::infinity();
  for (double c : out.candidates) {
    for (double cand : {std::floor(c), std::ceil(c)}) {
      const int tau = std::clamp(static_cast<int>(cand), 1, tau_hi);
      const double gamma = gamma_from_tau(tau, plan);
      if (gamma < 1.0 - kGammaSlack) continue;
      const double J = objective_J(tau, plan, w);
      if (J < out.J_int) {
        out.J_int = J;
        out.tau_int = tau;
        out.gamma_int = std::max(1, static_cast<int>(std::floor(gamma + kGammaSlack)));
      }
    }
  }
  // Flooring gamma with slack must never break the deadline.
  while (out.gamma_int > 1 &&
         plan.global_iterations * iteration_delay(out.tau_int, out.gamma_int, plan.times) >
             plan.deadline_s) {
    --out.gamma_int;
  }
  return out;
}

GridResult grid_search_schedule(const DeadlinePlan& plan, const ObjectiveWeights& w,
                                int tau_max) {
  plan.validate();
  if (tau_max <= 0) tau_max = static_cast<int>(std::floor(plan.tau_limit()));
  GridResult best;
  best.J_star = std::numeric_limits<double>::infinity();
  for (int tau = 1; tau <= tau_max; ++tau) {
    const double gamma = gamma_from_tau(tau, plan);
    if (gamma < 1.0 - kGammaSlack) continue;
    const double J = objective_J(tau, gamma, w);
    if (J < best.J_star) {
      best = {tau, gamma, J};
    }
  }
  if (!std::isfinite(best.J_star)) {
    throw std::domain_error("no feasible integer tau under the deadline");
  }
  return best;
}

}  // namespace hfl
