// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// hflsim: command-line front end.
//
//   hflsim run --config exp.json [--set schedule.tau=10 ...]
//   hflsim plan --deadline 15600 --T 100 --q1 11.9
//   hflsim bounds --mu 0.01 --tau 12 --gamma 3 --sets 20,20,20 ...
//   hflsim quantizer-table --dim 16 --levels 1,2,4,8,16
//   hflsim dataset --out data.csv

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hfl/analysis.hpp"
#include "hfl/datagen.hpp"
#include "hfl/harness.hpp"
#include "hfl/planner.hpp"
#include "hfl/quantizer.hpp"

namespace {

void kv(const std::string& key, double v) { std::printf("%s=%.12g\n", key.c_str(), v); }
void kv(const std::string& key, int v) { std::printf("%s=%d\n", key.c_str(), v); }
void kv(const std::string& key, const std::string& v) {
  std::printf("%s=%s\n", key.c_str(), v.c_str());
}
void kv(const std::string& key, bool v) { std::printf("%s=%s\n", key.c_str(), v ? "true" : "false"); }

void add_link_flags(CLI::App* app, hfl::LinkComputeParams& lp, double& t_ec) {
  app->add_option("--bandwidth", lp.bandwidth_hz, "Channel bandwidth (Hz)")->capture_default_str();
  app->add_option("--power", lp.power_w, "Transmit power (W)")->capture_default_str();
  app->add_option("--noise", lp.noise_w, "Noise power (W)")->capture_default_str();
  app->add_option("--cycles-per-bit", lp.cycles_per_bit)->capture_default_str();
  app->add_option("--gain", lp.channel_gain, "Channel gain")->capture_default_str();
  app->add_option("--cpu-freq", lp.cpu_freq_hz, "CPU frequency (Hz)")->capture_default_str();
  app->add_option("--bits-per-iter", lp.bits_per_local_iter)->capture_default_str();
  app->add_option("--model-bits", lp.model_bits)->capture_default_str();
  app->add_option("--ec-ratio", lp.edge_cloud_ratio, "t_EC as a multiple of t_DE")
      ->capture_default_str();
  app->add_option("--t-ec", t_ec, "Absolute t_EC in seconds (overrides --ec-ratio)");
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides) {
  nlohmann::json j = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config " + config_path);
    in >> j;
  }
  for (const auto& o : overrides) hfl::apply_override(j, o);
  const hfl::ExperimentConfig cfg = hfl::config_from_json(j);
  const hfl::ExperimentResult res = hfl::run_experiment(cfg);
  for (const auto& curve : res.report.curves) {
    if (curve.points.empty()) continue;
    const auto& last = curve.points.back();
    std::printf("%s: t=%d runtime_s=%.6g accuracy=%.4f+-%.4f loss=%.6g\n",
                hfl::to_string(curve.algorithm).c_str(), last.t, last.runtime_s,
                last.accuracy_mean, last.accuracy_std, last.loss_mean);
  }
  int diverged = 0;
  for (const auto& r : res.runs) diverged += r.record.diverged_at.has_value();
  std::printf("wrote %zu files to %s\n", res.files.size(), cfg.output_dir.c_str());
  if (diverged > 0) {
    std::fprintf(stderr, "%d run(s) diverged\n", diverged);
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical federated learning simulator"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment");
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int repeats = 0;
  std::string out_dir;
  run->add_option("-c,--config", config_path, "Experiment config (JSON)");
  run->add_option("--set", overrides, "Override a config key, e.g. schedule.tau=10");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--repeats", repeats, "Number of repetitions");
  run->add_option("-o,--output-dir", out_dir, "Output directory");

  // plan
  auto* plan = app.add_subcommand("plan", "Choose tau and gamma under a deadline");
  hfl::LinkComputeParams plan_link;
  double plan_t_ec = 0.0;
  double deadline = 0.0;
  double per_iteration = 0.0;
  int plan_T = 100;
  double plan_q1 = 0.0;
  int plan_C = 3;
  int plan_N = 60;
  add_link_flags(plan, plan_link, plan_t_ec);
  auto* deadline_opt = plan->add_option("--deadline", deadline, "Total deadline T_d (s)");
  plan->add_option("--per-iteration", per_iteration, "Deadline per global iteration (s)")
      ->excludes(deadline_opt);
  plan->add_option("--T", plan_T, "Global iterations")->capture_default_str();
  plan->add_option("--q1", plan_q1, "Device quantizer variance factor")->capture_default_str();
  plan->add_option("--C", plan_C, "Number of device sets")->capture_default_str();
  plan->add_option("--N", plan_N, "Total number of devices")->capture_default_str();

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Evaluate convergence bounds");
  hfl::TheoryParams tp;
  tp.set_sizes = {20, 20, 20};
  tp.mu = 0.01;
  tp.tau = 12;
  tp.gamma = 3;
  tp.T = 100;
  tp.B = 100;
  double gap0 = 1.0;
  bounds->add_option("--L", tp.L)->capture_default_str();
  bounds->add_option("--delta", tp.delta)->capture_default_str();
  bounds->add_option("--sigma2", tp.sigma2)->capture_default_str();
  bounds->add_option("--B", tp.B)->capture_default_str();
  bounds->add_option("--G2", tp.G2)->capture_default_str();
  bounds->add_option("--q1", tp.q1)->capture_default_str();
  bounds->add_option("--q2", tp.q2)->capture_default_str();
  bounds->add_option("--mu", tp.mu)->capture_default_str();
  bounds->add_option("--tau", tp.tau)->capture_default_str();
  bounds->add_option("--gamma", tp.gamma)->capture_default_str();
  bounds->add_option("--T", tp.T)->capture_default_str();
  bounds->add_option("--sets", tp.set_sizes, "Devices per set")->delimiter(',');
  bounds->add_option("--gap0", gap0, "Initial optimality gap")->capture_default_str();

  // quantizer-table
  auto* qtab = app.add_subcommand("quantizer-table", "Measured q for a range of levels");
  int q_dim = 16;
  std::vector<int> q_levels{1, 2, 3, 4, 7, 8, 16};
  int q_trials = 1000;
  int q_probes = 256;
  std::uint64_t q_seed = 1;
  qtab->add_option("--dim", q_dim)->capture_default_str();
  qtab->add_option("--levels", q_levels)->delimiter(',');
  qtab->add_option("--trials", q_trials, "Draws per probe")->capture_default_str();
  qtab->add_option("--probes", q_probes)->capture_default_str();
  qtab->add_option("--seed", q_seed)->capture_default_str();

  // dataset
  auto* ds = app.add_subcommand("dataset", "Generate and export a synthetic dataset");
  hfl::SyntheticSpec ds_spec;
  std::string ds_out;
  std::uint64_t ds_seed = 1;
  ds->add_option("--out", ds_out)->required();
  ds->add_option("--classes", ds_spec.num_classes)->capture_default_str();
  ds->add_option("--per-class", ds_spec.per_class)->capture_default_str();
  ds->add_option("--dim", ds_spec.input_dim)->capture_default_str();
  ds->add_option("--separation", ds_spec.separation)->capture_default_str();
  ds->add_option("--seed", ds_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (run->count("--seed")) overrides.push_back("seed=" + std::to_string(seed));
      if (run->count("--repeats")) overrides.push_back("repeats=" + std::to_string(repeats));
      if (run->count("--output-dir")) overrides.push_back("output_dir=\"" + out_dir + "\"");
      return cmd_run(config_path, overrides);
    }
    if (*plan) {
      if (plan->count("--t-ec")) plan_link.edge_cloud_time_s = plan_t_ec;
      const hfl::StageTimes times = hfl::compute_times(plan_link);
      if (per_iteration > 0.0) deadline = per_iteration * plan_T;
      const hfl::DeadlinePlan dp{deadline, plan_T, times};
      const hfl::ObjectiveWeights w{plan_q1, plan_C, plan_N};
      const hfl::SchedulePlan sp = hfl::optimize_schedule(dp, w);
      kv("t_CP", times.t_cp);
      kv("t_DE", times.t_de);
      kv("t_EC", times.t_ec);
      kv("a0", sp.coefficients.a0);
      kv("b0", sp.coefficients.b0);
      kv("c0", sp.coefficients.c0);
      std::string cands;
      for (double c : sp.candidates) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%.9g", cands.empty() ? "" : ",", c);
        cands += buf;
      }
      kv("candidates", cands);
      kv("tau_opt", sp.tau_opt);
      kv("gamma_opt", sp.gamma_opt);
      kv("J_opt", sp.J_opt);
      kv("tau_int", sp.tau_int);
      kv("gamma_int", sp.gamma_int);
      kv("J_int", sp.J_int);
      kv("iteration_delay_int", hfl::iteration_delay(sp.tau_int, sp.gamma_int, times));
      return 0;
    }
    if (*bounds) {
      tp.validate();
      const auto lr = hfl::check_lr_conditions(tp);
      const auto q = hfl::qhetfed_gap_bound(tp, gap0);
      const auto b = hfl::baseline_gap_bound(tp, gap0);
      const auto d = hfl::error_gap_decomposition(tp);
      kv("cond_A_lhs", lr.lhs_A);
      kv("cond_A", lr.cond_A);
      kv("cond_B_lhs", lr.lhs_B);
      kv("cond_B", lr.cond_B);
      kv("baseline_cond_lhs", hfl::baseline_lr_condition_lhs(tp));
      kv("c", q.c);
      kv("e", q.e);
      kv("bound", q.bound);
      kv("contractive", q.contractive);
      kv("c_bar", b.c);
      kv("e_bar", b.e);
      kv("bound_bar", b.bound);
      kv("delta_total", d.total);
      kv("delta_q1", d.d_q1);
      kv("delta_q2", d.d_q2);
      kv("delta_local", d.d_local);
      kv("delta_het", d.d_het);
      kv("rate_bound", hfl::convergence_rate_bound(tp, tp.T, gap0));
      kv("tau_preference", std::string(hfl::to_string(hfl::tau_preference(tp.q1, tp.N(), tp.C()))));
      return 0;
    }
    if (*qtab) {
      std::printf("levels,q\n");
      for (int s : q_levels) {
        hfl::Rng rng = hfl::make_stream(q_seed, hfl::Stream::probe,
                                        {static_cast<std::uint64_t>(q_dim)});
        const double q = hfl::estimate_variance_factor(s, q_dim, q_trials, rng, {q_probes});
        std::printf("%d,%.6g\n", s, q);
      }
      return 0;
    }
    if (*ds) {
      hfl::Rng rng = hfl::make_stream(ds_seed, hfl::Stream::dataset);
      hfl::write_dataset(ds_out, hfl::make_synthetic_dataset(ds_spec, rng));
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
