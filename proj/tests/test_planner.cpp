// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"

#include "hfl/planner.hpp"

namespace {

hfl::StageTimes table_three() { return hfl::compute_times(hfl::LinkComputeParams{}); }

hfl::DeadlinePlan plan_with_limit(double tau_limit, hfl::StageTimes times, int T) {
  // tau_limit = (A - 1) / (1 + r), A = T_d / (T t_cp) - t_ec / t_cp
  const double r = times.t_de / times.t_cp;
  const double A = 1.0 + (1.0 + r) * tau_limit;
  return {T * times.t_cp * (A + times.t_ec / times.t_cp), T, times};
}

// J with the deadline already substituted for gamma.
double substituted_J(double tau, const hfl::DeadlinePlan& p, const hfl::ObjectiveWeights& w) {
  const auto& t = p.times;
  const double a = p.deadline_s / (p.global_iterations * t.t_cp) - t.t_ec / t.t_cp;
  const double r = t.t_de / t.t_cp;
  const double k = static_cast<double>(w.num_sets) / w.num_devices * (1 + w.q1);
  return (1 - (1 + tau) / (a - r * tau)) * ((k - 1 - r) * tau + a) + k * tau;
}

}  // namespace

TEST_CASE("stage times from the reference link and compute parameters") {
  const auto t = table_three();
  CHECK(t.t_de == doctest::Approx(1.0 / std::log2(51.0)).epsilon(1e-6));
  CHECK(t.t_de == doctest::Approx(0.17629).epsilon(1e-4));
  CHECK(t.t_ec == doctest::Approx(10.0 / std::log2(51.0)).epsilon(1e-12));
  CHECK(t.t_cp == doctest::Approx(2.0).epsilon(1e-15));
  hfl::LinkComputeParams fast;
  fast.cpu_freq_hz *= 2;
  CHECK(hfl::compute_times(fast).t_cp == t.t_cp / 2);
  hfl::LinkComputeParams fixed;
  fixed.edge_cloud_time_s = 4.0;
  CHECK(hfl::compute_times(fixed).t_ec == 4.0);
}

TEST_CASE("per-iteration delays") {
  const hfl::StageTimes t{2.0, 0.17629, 1.7629};
  CHECK(hfl::iteration_delay(1, 1, t) == doctest::Approx(2 * 2.0 + 0.17629 + 1.7629));
  CHECK(hfl::baseline_iteration_delay(1, 1, t) == doctest::Approx(2.0 + 0.17629 + 1.7629));
  CHECK(hfl::iteration_delay(12, 3, t) == doctest::Approx(33.878).epsilon(1e-4));
  for (int tau = 1; tau <= 6; ++tau)
    for (int gamma = 1; gamma <= 6; ++gamma) {
      const double gap = hfl::baseline_iteration_delay(tau, gamma, t) - hfl::iteration_delay(tau, gamma, t);
      CHECK(gap == doctest::Approx((tau * gamma - tau - gamma) * t.t_cp));
    }
  CHECK_THROWS_AS(hfl::iteration_delay(0, 1, t), std::invalid_argument);
}

TEST_CASE("gamma from the deadline") {
  const hfl::StageTimes t{2.0, 0.17629, 1.7629};
  const hfl::DeadlinePlan built{100 * hfl::iteration_delay(12, 3, t), 100, t};
  CHECK(hfl::gamma_from_tau(12, built) == doctest::Approx(3.0).epsilon(1e-12));
  const hfl::DeadlinePlan p{15600, 100, t};
  CHECK(hfl::gamma_from_tau(12, p) == doctest::Approx(64.0608).epsilon(1e-5));
  CHECK(hfl::gamma_from_tau(p.tau_limit(), p) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("objective values") {
  const hfl::StageTimes t{2.0, 0.17629, 1.7629};
  const hfl::ObjectiveWeights w{11.9, 3, 60};
  const hfl::DeadlinePlan p{15600, 100, t};
  // gamma = 1 removes the second term.
  CHECK(hfl::objective_J(5.0, 1.0, w) == doctest::Approx(w.k() * 5.0).epsilon(1e-15));
  CHECK(hfl::objective_J(p.tau_limit(), p, w) ==
        doctest::Approx(w.k() * p.tau_limit()).epsilon(1e-9));
  for (double tau : {1.0, 2.5, 12.0, 30.0, 60.0}) {
    CHECK(hfl::objective_J(tau, p, w) == doctest::Approx(substituted_J(tau, p, w)).epsilon(1e-12));
    const hfl::ObjectiveWeights heavier{20.0, 3, 60};
    CHECK(hfl::objective_J(tau, p, heavier) > hfl::objective_J(tau, p, w));
  }
  CHECK_THROWS_AS(hfl::objective_J(p.tau_limit() + 1.0, p, w), std::domain_error);
}

TEST_CASE("derivative agrees with differencing and vanishes at stationary points") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked_roots = 0;
  for (int i = 0; i < 200; ++i) {
    const hfl::StageTimes t{0.5 + 3 * u(rng), 0.01 + u(rng), 0.1 + 5 * u(rng)};
    const double limit = 3 + 80 * u(rng);
    const auto p = plan_with_limit(limit, t, 10 + static_cast<int>(190 * u(rng)));
    const hfl::ObjectiveWeights w{200 * u(rng), 3, 60};
    const double tau = 1 + (p.tau_limit() - 2) * u(rng);
    const double h = 1e-5 * tau;
    const double fd = (hfl::objective_J(tau + h, p, w) - hfl::objective_J(tau - h, p, w)) / (2 * h);
    CHECK(hfl::objective_derivative(tau, p, w) ==
          doctest::Approx(fd).epsilon(1e-6).scale(hfl::objective_J(tau, p, w) / tau));
    for (double root : hfl::optimize_schedule(p, w).stationary_points) {
      ++checked_roots;
      const double scale = hfl::objective_J(root, p, w) / root;
      CHECK(std::abs(hfl::objective_derivative(root, p, w)) <= 1e-7 * scale);
    }
  }
  CHECK(checked_roots > 0);
}

TEST_CASE("closed form agrees with exhaustive search") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const hfl::StageTimes t{0.5 + 3 * u(rng), 0.01 + u(rng), 0.1 + 5 * u(rng)};
    const double limit = 1.5 + 100 * u(rng);
    const auto p = plan_with_limit(limit, t, 10 + static_cast<int>(190 * u(rng)));
    const int C = 1 + static_cast<int>(5 * u(rng));
    const double q1 = 200 * u(rng);
    const hfl::ObjectiveWeights w{q1, C, C + static_cast<int>(100 * u(rng))};
    const auto plan = hfl::optimize_schedule(p, w);
    const auto grid = hfl::grid_search_schedule(p, w);
    CHECK(std::abs(grid.tau_star - plan.tau_int) <= 1);
    CHECK(grid.J_star <= plan.J_int * (1 + 1e-12));
    CHECK(plan.J_int <= 1.02 * grid.J_star);
    CHECK(plan.J_opt <= grid.J_star * (1 + 1e-12));
    CHECK(p.global_iterations * hfl::iteration_delay(plan.tau_int, plan.gamma_int, t) <=
          p.deadline_s * (1 + 1e-12));
  }
}

TEST_CASE("single feasible tau") {
  const auto p = plan_with_limit(1.4, {2.0, 0.2, 2.0}, 50);
  const hfl::ObjectiveWeights w{3.0, 3, 60};
  CHECK(hfl::grid_search_schedule(p, w).tau_star == 1);
  CHECK(hfl::optimize_schedule(p, w).tau_int == 1);
}

TEST_CASE("cheap uploads and coarse quantization favour few intra-set rounds") {
  const auto p = plan_with_limit(40, {2.0, 1e-9, 1.0}, 100);
  const hfl::ObjectiveWeights w{1e4, 3, 60};
  CHECK(hfl::grid_search_schedule(p, w).tau_star == 1);
  CHECK(hfl::optimize_schedule(p, w).tau_int == 1);
}

TEST_CASE("156 s per iteration with the reference times") {
  const auto t = table_three();
  const hfl::DeadlinePlan p{156.0 * 100, 100, t};
  const auto plan = hfl::optimize_schedule(p, {11.9, 3, 60});
  const double delay = hfl::iteration_delay(plan.tau_int, plan.gamma_int, t);
  CHECK(plan.gamma_int >= 1);
  CHECK(delay <= 156.0);
  CHECK(std::abs(delay - 156.0) <= 0.05 * 156.0);
}

TEST_CASE("infeasible deadlines") {
  const hfl::StageTimes t{2.0, 0.2, 2.0};
  const hfl::ObjectiveWeights w{1.0, 1, 1};
  CHECK_THROWS_AS(hfl::optimize_schedule({100 * 2.0, 100, t}, w), std::invalid_argument);
  // Room for the cloud exchange but not for one upload plus two compute steps.
  const hfl::DeadlinePlan tight{100 * (2.0 + 2.0 + 0.2 + 0.5), 100, t};
  CHECK_THROWS_AS(hfl::optimize_schedule(tight, w), std::domain_error);
  CHECK_THROWS_AS(hfl::grid_search_schedule(tight, w), std::domain_error);
}
