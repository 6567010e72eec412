// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"

#include "hfl/analysis.hpp"
#include "hfl/federation.hpp"

using hfl::TheoryParams;

namespace {

TheoryParams table_one() {
  TheoryParams p;
  p.L = 1.0;
  p.delta = 1.0;
  p.sigma2 = 100.0;
  p.B = 100.0;  // sigma^2 / B = 1
  p.G2 = 1.0;
  p.q1 = 2.0;
  p.q2 = 0.3;
  p.mu = 0.01;
  p.tau = 12;
  p.gamma = 3;
  p.T = 100;
  p.set_sizes = {20, 20, 20};
  return p;
}

TheoryParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> small(1, 20), sets(1, 5), size(1, 30);
  TheoryParams p;
  p.L = 0.1 + 10 * u(rng);
  p.delta = 0.01 + u(rng);
  p.sigma2 = 10 * u(rng);
  p.B = 1 + 200 * u(rng);
  p.G2 = 5 * u(rng);
  p.q1 = 50 * u(rng);
  p.q2 = 5 * u(rng);
  p.mu = 1e-4 + 0.1 * u(rng);
  p.tau = small(rng);
  p.gamma = small(rng);
  p.T = small(rng);
  p.set_sizes.assign(sets(rng), 0);
  for (auto& n : p.set_sizes) n = size(rng);
  return p;
}

// Baseline persistent error, written term by term from its defining expression.
double spreadsheet_baseline_e(const TheoryParams& p) {
  const double N = p.N(), C = p.C();
  const double t = p.tau, g = p.gamma;
  const double term1 = p.L * p.mu / N * C * (1 + p.q1) * (g * g * t * (t - 1) / 2);
  const double term2 = p.L * p.mu * (t * g * (g - 1) / 2);
  const double term3 = 1 / N * t * g * (1 + p.q2) * (1 + p.q1);
  const double pre = p.L * p.mu * p.mu / 2 * (p.sigma2 / p.B);
  return pre * (term1 + term2 + term3) + p.mu * t * g / 2 * p.G2;
}

double largest_feasible_mu(TheoryParams p) {
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    p.mu = 0.5 * (lo + hi);
    (hfl::check_lr_conditions(p).ok() ? lo : hi) = p.mu;
  }
  return lo;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("learning-rate conditions at the extremes") {
  auto p = table_one();
  p.mu = 0.0;
  const auto z = hfl::check_lr_conditions(p);
  CHECK(z.lhs_A == 1.0);
  CHECK(z.lhs_B == 1.0);
  CHECK(z.ok());
  p.tau = p.gamma = 1;
  p.mu = 1e3 / p.L;
  const auto big = hfl::check_lr_conditions(p);
  CHECK_FALSE(big.cond_A);
  CHECK_FALSE(big.cond_B);
  CHECK(hfl::check_lr_conditions(table_one()).ok());
}

TEST_CASE("equal set sizes admit the widest learning-rate interval") {
  auto p = table_one();
  p.q1 = p.q2 = 1.5;
  const double equal = largest_feasible_mu(p);
  p.set_sizes = {40, 10, 10};
  const double unequal = largest_feasible_mu(p);
  CHECK(equal > unequal);
  CHECK(equal > 0.0);
}

TEST_CASE("contraction factors") {
  const auto p = table_one();
  CHECK(hfl::qhetfed_gap_bound(p, 1.0).c == doctest::Approx(0.85).epsilon(1e-14));
  CHECK(hfl::baseline_gap_bound(p, 1.0).c == doctest::Approx(1 - 0.01 * 36).epsilon(1e-14));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto q = random_params(rng);
    const double c = hfl::qhetfed_gap_bound(q, 1).c, cb = hfl::baseline_gap_bound(q, 1).c;
    CHECK((cb <= c) == (q.tau * q.gamma >= q.tau + q.gamma));
  }
}

TEST_CASE("noise-free bounds reduce to pure contraction") {
  auto p = table_one();
  p.sigma2 = 0.0;
  p.G2 = 0.0;
  const auto g = hfl::qhetfed_gap_bound(p, 2.0);
  CHECK(g.e == 0.0);
  CHECK(g.bound == doctest::Approx(std::pow(0.85, 100) * 2.0).epsilon(1e-14));
  for (auto [tau, gamma] : {std::pair{1, 5}, std::pair{7, 1}}) {
    p.tau = tau;
    p.gamma = gamma;
    CHECK(hfl::baseline_gap_bound(p, 1.0).e == 0.0);
  }
}

TEST_CASE("geometric assembly handles c = 1 and flags non-contraction") {
  CHECK(hfl::assemble_gap(1.0, 0.5, 8, 3.0) == doctest::Approx(3.0 + 8 * 0.5));
  CHECK(hfl::assemble_gap(0.5, 1.0, 2, 4.0) == doctest::Approx(0.25 * 4 + 1.5));
  auto p = table_one();
  p.mu = 0.2;  // c = 1 - 3 = -2
  CHECK_FALSE(hfl::qhetfed_gap_bound(p, 1.0).contractive);
}

TEST_CASE("baseline error matches a term-by-term recomputation") {
  const auto p = table_one();
  CHECK(rel(hfl::baseline_error_term(p), spreadsheet_baseline_e(p)) <= 1e-12);
  const auto g = hfl::baseline_gap_bound(p, 1.0);
  const double cb = 1 - p.mu * p.tau * p.gamma;
  const double want = std::pow(cb, p.T) + (1 - std::pow(cb, p.T)) / (1 - cb) * spreadsheet_baseline_e(p);
  CHECK(rel(g.bound, want) <= 1e-12);
}

TEST_CASE("error-gap components sum to the difference of the two error terms") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_params(rng);
    const auto d = hfl::error_gap_decomposition(p);
    const double diff = hfl::baseline_error_term(p) - hfl::qhetfed_error_term(p);
    CHECK(rel(d.total, diff) <= 1e-10);
    if (std::abs(diff) > 1e-12 * hfl::baseline_error_term(p)) {
      CHECK(rel(d.sum(), diff) <= 1e-10);
    } else {
      CHECK(std::abs(d.sum() - diff) <= 1e-12 * hfl::baseline_error_term(p));
    }
  }
}

TEST_CASE("heterogeneity component sign follows tau*gamma - tau - gamma") {
  auto p = table_one();
  p.tau = 2;
  p.gamma = 2;
  p.G2 = 4.0;
  CHECK(hfl::error_gap_decomposition(p).d_het == 0.0);
  p.tau = 3;
  CHECK(hfl::error_gap_decomposition(p).d_het > 0.0);
  p.tau = p.gamma = 1;
  CHECK(hfl::error_gap_decomposition(p).d_het < 0.0);
}

TEST_CASE("error term is affine in G2 and sigma2 and increasing in q1, q2") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    auto p = random_params(rng);
    auto at = [&](double TheoryParams::*field, double v) {
      auto q = p;
      q.*field = v;
      return hfl::qhetfed_error_term(q);
    };
    for (auto field : {&TheoryParams::G2, &TheoryParams::sigma2}) {
      const double e0 = at(field, 1.0), e1 = at(field, 2.0), e2 = at(field, 3.0);
      CHECK(std::abs((e2 - e1) - (e1 - e0)) <= 1e-12 * std::max(1.0, e2));
    }
    for (auto field : {&TheoryParams::q1, &TheoryParams::q2}) {
      if (p.sigma2 > 0) CHECK(at(field, p.*field + 1.0) > at(field, p.*field));
    }
  }
}

TEST_CASE("single-cell and gamma = 1 special cases agree with the general term") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    auto p = random_params(rng);
    p.set_sizes = {p.set_sizes.front()};
    p.q2 = 0.0;
    CHECK(rel(hfl::single_cell_error_term(p), hfl::qhetfed_error_term(p)) <= 1e-12);
    auto r = random_params(rng);
    r.gamma = 1;
    CHECK(rel(hfl::gamma1_error_term(r), hfl::qhetfed_error_term(r)) <= 1e-12);
  }
}

TEST_CASE("rate bound limits") {
  auto p = table_one();
  const double gap0 = 3.0;
  const int big = 1 << 30;
  const double far = hfl::convergence_rate_bound(p, big, gap0);
  const double near = hfl::convergence_rate_bound(p, 10, gap0);
  const double limit = far - 2 * gap0 / (p.mu * 15 * static_cast<double>(big));
  CHECK(near - 2 * gap0 / (p.mu * 15 * 10) == doctest::Approx(limit).epsilon(1e-12));
  p.sigma2 = 0.0;
  CHECK(hfl::convergence_rate_bound(p, 7, gap0) ==
        doctest::Approx(2 * gap0 / (p.mu * 15 * 7) + p.G2).epsilon(1e-14));
}

TEST_CASE("simulated quadratic respects the rate bound") {
  // F(w) = 0.5 (w - 1)^2 on every device: L = delta = 1, sigma^2 = G^2 = 0.
  const hfl::Topology topo{{2, 2}};
  hfl::FedRunConfig c;
  c.topology = topo;
  c.schedule = {4, 2, 0.05, 20, 1};
  c.model = {hfl::ModelKind::quadratic, 1, 0, 0};
  hfl::LabeledSample a;
  a.features = Eigen::VectorXd::Ones(1);
  for (int l = 0; l < 2; ++l)
    for (int n = 0; n < 2; ++n) c.shards.push_back({l, n, {a}});
  c.q1 = c.q2 = hfl::QuantizerSpec::identity();
  c.initial = Eigen::VectorXd::Constant(1, -2.0);
  const auto r = hfl::run_qhetfed(c);
  double avg = 0.0;
  for (int t = 0; t < 20; ++t) avg += (r.trajectory[t][0] - 1.0) * (r.trajectory[t][0] - 1.0);
  avg /= 20;
  TheoryParams p;
  p.mu = 0.05;
  p.tau = 4;
  p.gamma = 2;
  p.T = 20;
  p.set_sizes = {2, 2};
  CHECK(avg <= hfl::convergence_rate_bound(p, 20, 0.5 * 9.0));
}

TEST_CASE("tau preference threshold") {
  CHECK(hfl::tau_preference(11.9, 60, 3) == hfl::TauPreference::prefer_high_tau);
  CHECK(hfl::tau_preference(149.3, 60, 3) == hfl::TauPreference::prefer_low_tau);
  CHECK(hfl::tau_preference(19.0, 60, 3) == hfl::TauPreference::indifferent);
  CHECK_THROWS(hfl::tau_preference(1.0, 0, 1));
}
