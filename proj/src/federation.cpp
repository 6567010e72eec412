// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfl/federation.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace hfl {
namespace {

struct Diverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_same_lengths(std::span<const ParamVector> vs, const char* what) {
  if (vs.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
  for (const auto& v : vs) {
    if (v.size() != vs.front().size()) {
      throw std::invalid_argument(std::string(what) + ": vector length mismatch");
    }
  }
}

class Engine {
 public:
  explicit Engine(const FedRunConfig& config) : cfg_(config) {
    cfg_.validate();
    rec_.algorithm = cfg_.algorithm;
    rec_.seed = cfg_.seed;
    for (int l = 0; l < cfg_.topology.num_sets(); ++l) {
      set_offsets_.push_back(cfg_.topology.device_offset(l));
    }
  }

  template <typename Iteration>
  RunRecord drive(double delay_per_iteration, Iteration&& iteration) {
    ParamVector w = start_point();
    rec_.trajectory.push_back(w);
    const int T = cfg_.schedule.global_iterations;
    for (int t = 0; t < T; ++t) {
      try {
        w = iteration(t, w);
        guard(w);
        record(t + 1, w, delay_per_iteration);
      } catch (const Diverged& e) {
        mark_divergence(t + 1, e.what());
        break;
      } catch (const std::domain_error& e) {
        mark_divergence(t + 1, e.what());
        break;
      }
    }
    return std::move(rec_);
  }

  const FedRunConfig& cfg() const { return cfg_; }

  int global_device(int set, int n) const { return set_offsets_[set] + n; }

  const DeviceShard& shard(int set, int n) const {
    return cfg_.shards[global_device(set, n)];
  }

  ParamVector device_gradient(int set, int n, const ParamVector& w,
                              std::uint64_t step) {
    const DeviceShard& s = shard(set, n);
    draw_batch(static_cast<std::uint64_t>(global_device(set, n)), step, s.size());
    return gradient(cfg_.model, w, s.samples, batch_);
  }

  ParamVector pooled_gradient(const Dataset& pooled, const ParamVector& w,
                              std::uint64_t step) {
    draw_batch(0, step, pooled.size());
    return gradient(cfg_.model, w, pooled, batch_);
  }

  void trace(const ParamVector& w) {
    if (cfg_.trace_steps) rec_.step_trace.push_back(w);
  }

  void guard(const ParamVector& w) const {
    if (!w.allFinite()) throw Diverged("non-finite parameter");
    if (w.norm() > kDivergenceNorm) throw Diverged("parameter norm exceeded 1e9");
  }

 private:
  ParamVector start_point() const {
    if (cfg_.initial) return *cfg_.initial;
    Rng rng = make_stream(cfg_.seed, Stream::init);
    return initial_params(cfg_.model, rng);
  }

  void draw_batch(std::uint64_t device, std::uint64_t step, std::size_t size) {
    Rng rng = make_stream(cfg_.seed, Stream::batch, {device, step});
    std::uniform_int_distribution<std::size_t> pick(0, size - 1);
    batch_.resize(static_cast<std::size_t>(cfg_.schedule.batch));
    for (auto& b : batch_) b = pick(rng);
  }

  void record(int t, const ParamVector& w, double delay) {
    rec_.trajectory.push_back(w);
    const int T = cfg_.schedule.global_iterations;
    if (t % cfg_.metric_cadence != 0 && t != T) return;
    IterationMetrics m;
    m.t = t;
    m.param_hash = param_hash(w);
    m.train_loss = global_loss(cfg_.model, w, cfg_.shards);
    if (!std::isfinite(m.train_loss)) throw Diverged("non-finite training loss");
    m.test_accuracy = accuracy(cfg_.model, w, cfg_.test_set);
    m.runtime_s = t * delay;
    rec_.metrics.push_back(std::move(m));
  }

  void mark_divergence(int t, const std::string& why) {
    rec_.diverged_at = t;
    rec_.divergence_reason = why;
  }

  const FedRunConfig& cfg_;
  RunRecord rec_;
  std::vector<int> set_offsets_;
  std::vector<std::size_t> batch_;
};

}  // namespace

void Schedule::validate() const {
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  if (gamma < 1) throw std::invalid_argument("gamma must be >= 1");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be >= 0");
  if (global_iterations < 1) throw std::invalid_argument("T must be >= 1");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::qhetfed: return "qhetfed";
    case Algorithm::hier_local_qsgd: return "hier_local_qsgd";
    case Algorithm::qhetfed_gamma1: return "qhetfed_gamma1";
    case Algorithm::centralized_sgd: return "centralized_sgd";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "qhetfed") return Algorithm::qhetfed;
  if (name == "hier_local_qsgd") return Algorithm::hier_local_qsgd;
  if (name == "qhetfed_gamma1") return Algorithm::qhetfed_gamma1;
  if (name == "centralized_sgd") return Algorithm::centralized_sgd;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

void FedRunConfig::validate() const {
  topology.validate();
  schedule.validate();
  model.validate();
  q1.validate();
  q2.validate();
  if (static_cast<int>(shards.size()) != topology.total_devices()) {
    throw std::invalid_argument("expected " + std::to_string(topology.total_devices()) +
                                " shards, got " + std::to_string(shards.size()));
  }
  std::size_t k = 0;
  for (int l = 0; l < topology.num_sets(); ++l) {
    for (int n = 0; n < topology.devices_per_set[l]; ++n, ++k) {
      if (shards[k].set_index != l || shards[k].device_index != n) {
        throw std::invalid_argument("shard " + std::to_string(k) +
                                    " is not in (set, device) order");
      }
      if (shards[k].samples.empty()) {
        throw std::invalid_argument("shard " + std::to_string(k) + " is empty");
      }
    }
  }
  if (initial && initial->size() != model.dim()) {
    throw std::invalid_argument("initial parameters have the wrong length");
  }
  if (metric_cadence < 1) throw std::invalid_argument("metric cadence must be >= 1");
  if (centralized_steps_per_iteration < 0) {
    throw std::invalid_argument("centralized steps per iteration must be >= 0");
  }
}

ParamVector edge_aggregate_gradients(std::span<const ParamVector> local_grads,
                                     const QuantizerSpec& q1, Rng& rng) {
  check_same_lengths(local_grads, "edge_aggregate_gradients");
  ParamVector sum = ParamVector::Zero(local_grads.front().size());
  for (const auto& g : local_grads) sum += quantize(g, q1, rng);
  return sum / static_cast<double>(local_grads.size());
}

ParamVector edge_aggregate_models(std::span<const ParamVector> deltas,
                                  const ParamVector& base,
                                  const QuantizerSpec& q1, Rng& rng) {
  check_same_lengths(deltas, "edge_aggregate_models");
  if (deltas.front().size() != base.size()) {
    throw std::invalid_argument("edge_aggregate_models: base length mismatch");
  }
  ParamVector sum = ParamVector::Zero(base.size());
  for (const auto& d : deltas) sum += quantize(d, q1, rng);
  return base + sum / static_cast<double>(deltas.size());
}

ParamVector cloud_aggregate(std::span<const ParamVector> set_models,
                            const ParamVector& global_prev,
                            const Topology& topology, const QuantizerSpec& q2,
                            Rng& rng) {
  topology.validate();
  if (static_cast<int>(set_models.size()) != topology.num_sets()) {
    throw std::invalid_argument("cloud_aggregate: expected one model per set");
  }
  check_same_lengths(set_models, "cloud_aggregate");
  if (set_models.front().size() != global_prev.size()) {
    throw std::invalid_argument("cloud_aggregate: global model length mismatch");
  }
  ParamVector sum = ParamVector::Zero(global_prev.size());
  for (int l = 0; l < topology.num_sets(); ++l) {
    sum += topology.devices_per_set[l] * quantize(set_models[l] - global_prev, q2, rng);
  }
  return global_prev + sum / static_cast<double>(topology.total_devices());
}

RunRecord run_qhetfed(const FedRunConfig& config) {
  Engine eng(config);
  const Schedule& s = config.schedule;
  const Topology& topo = config.topology;
  const auto per_iter = static_cast<std::uint64_t>(s.tau + s.gamma);

  return eng.drive(iteration_delay(s.tau, s.gamma, config.times),
                   [&](int t, const ParamVector& w) {
    const auto tt = static_cast<std::uint64_t>(t);
    std::vector<ParamVector> set_models;
    for (int l = 0; l < topo.num_sets(); ++l) {
      const auto ll = static_cast<std::uint64_t>(l);
      const int n_l = topo.devices_per_set[l];
      // Every device in the set holds this value between shared steps.
      ParamVector shared = w;
      std::vector<ParamVector> grads(n_l);
      for (int i = 0; i < s.tau; ++i) {
        for (int n = 0; n < n_l; ++n) {
          grads[n] = eng.device_gradient(l, n, shared, tt * per_iter + i);
        }
        Rng qrng = make_stream(config.seed, Stream::quantize_device,
                               {ll, tt, static_cast<std::uint64_t>(i)});
        shared -= s.mu * edge_aggregate_gradients(grads, config.q1, qrng);
        eng.guard(shared);
        if (l == 0) eng.trace(shared);
      }
      std::vector<ParamVector> deltas(n_l);
      for (int n = 0; n < n_l; ++n) {
        ParamVector local = shared;
        for (int j = 0; j < s.gamma; ++j) {
          local -= s.mu * eng.device_gradient(l, n, local, tt * per_iter + s.tau + j);
          if (l == 0 && n == 0) eng.trace(local);
        }
        deltas[n] = local - shared;
      }
      Rng qrng = make_stream(config.seed, Stream::quantize_device,
                             {ll, tt, static_cast<std::uint64_t>(s.tau)});
      set_models.push_back(edge_aggregate_models(deltas, shared, config.q1, qrng));
    }
    Rng crng = make_stream(config.seed, Stream::quantize_edge, {tt});
    return cloud_aggregate(set_models, w, topo, config.q2, crng);
  });
}

RunRecord run_hier_local_qsgd(const FedRunConfig& config) {
  Engine eng(config);
  const Schedule& s = config.schedule;
  const Topology& topo = config.topology;
  const auto per_iter = static_cast<std::uint64_t>(s.tau) * s.gamma;

  return eng.drive(baseline_iteration_delay(s.tau, s.gamma, config.times),
                   [&](int t, const ParamVector& w) {
    const auto tt = static_cast<std::uint64_t>(t);
    std::vector<ParamVector> set_models;
    for (int l = 0; l < topo.num_sets(); ++l) {
      const auto ll = static_cast<std::uint64_t>(l);
      const int n_l = topo.devices_per_set[l];
      ParamVector edge = w;
      std::vector<ParamVector> deltas(n_l);
      for (int i = 0; i < s.tau; ++i) {
        for (int n = 0; n < n_l; ++n) {
          ParamVector local = edge;
          for (int j = 0; j < s.gamma; ++j) {
            const std::uint64_t step = tt * per_iter +
                                       static_cast<std::uint64_t>(i) * s.gamma + j;
            local -= s.mu * eng.device_gradient(l, n, local, step);
            if (l == 0 && n == 0) eng.trace(local);
          }
          deltas[n] = local - edge;
        }
        Rng qrng = make_stream(config.seed, Stream::quantize_device,
                               {ll, tt, static_cast<std::uint64_t>(i)});
        edge = edge_aggregate_models(deltas, edge, config.q1, qrng);
        eng.guard(edge);
      }
      // The closing edge line of the baseline is the i = tau aggregation above.
      set_models.push_back(std::move(edge));
    }
    Rng crng = make_stream(config.seed, Stream::quantize_edge, {tt});
    return cloud_aggregate(set_models, w, topo, config.q2, crng);
  });
}

RunRecord run_qhetfed_gamma1(const FedRunConfig& config) {
  if (config.schedule.gamma != 1) {
    throw std::invalid_argument("run_qhetfed_gamma1 requires gamma = 1");
  }
  Engine eng(config);
  const Schedule& s = config.schedule;
  const Topology& topo = config.topology;
  const auto per_iter = static_cast<std::uint64_t>(s.tau + 1);

  return eng.drive(iteration_delay(s.tau, 1, config.times),
                   [&](int t, const ParamVector& w) {
    const auto tt = static_cast<std::uint64_t>(t);
    std::vector<ParamVector> set_models;
    for (int l = 0; l < topo.num_sets(); ++l) {
      const auto ll = static_cast<std::uint64_t>(l);
      const int n_l = topo.devices_per_set[l];
      ParamVector shared = w;
      std::vector<ParamVector> grads(n_l);
      for (int i = 0; i <= s.tau; ++i) {
        for (int n = 0; n < n_l; ++n) {
          grads[n] = eng.device_gradient(l, n, shared, tt * per_iter + i);
        }
        Rng qrng = make_stream(config.seed, Stream::quantize_device,
                               {ll, tt, static_cast<std::uint64_t>(i)});
        shared -= s.mu * edge_aggregate_gradients(grads, config.q1, qrng);
        eng.guard(shared);
        if (l == 0) eng.trace(shared);
      }
      set_models.push_back(std::move(shared));
    }
    Rng crng = make_stream(config.seed, Stream::quantize_edge, {tt});
    return cloud_aggregate(set_models, w, topo, config.q2, crng);
  });
}

RunRecord run_centralized_sgd(const FedRunConfig& config) {
  Engine eng(config);
  const Schedule& s = config.schedule;
  const int steps = config.centralized_steps_per_iteration > 0
                        ? config.centralized_steps_per_iteration
                        : s.tau + s.gamma;
  const Dataset pooled = pool_shards(config.shards);

  return eng.drive(steps * config.times.t_cp, [&](int t, const ParamVector& w) {
    ParamVector cur = w;
    for (int j = 0; j < steps; ++j) {
      const std::uint64_t step = static_cast<std::uint64_t>(t) * steps + j;
      cur -= s.mu * eng.pooled_gradient(pooled, cur, step);
      eng.trace(cur);
    }
    return cur;
  });
}

RunRecord run(const FedRunConfig& config) {
  switch (config.algorithm) {
    case Algorithm::qhetfed: return run_qhetfed(config);
    case Algorithm::hier_local_qsgd: return run_hier_local_qsgd(config);
    case Algorithm::qhetfed_gamma1: return run_qhetfed_gamma1(config);
    case Algorithm::centralized_sgd: return run_centralized_sgd(config);
  }
  throw std::invalid_argument("unknown algorithm");
}

std::string param_hash(const ParamVector& w) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(w.data());
  const std::size_t n = static_cast<std::size_t>(w.size()) * sizeof(double);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double modeled_iteration_delay(Algorithm a, const Schedule& s, const StageTimes& times) {
  switch (a) {
    case Algorithm::qhetfed: return iteration_delay(s.tau, s.gamma, times);
    case Algorithm::qhetfed_gamma1: return iteration_delay(s.tau, 1, times);
    case Algorithm::hier_local_qsgd: return baseline_iteration_delay(s.tau, s.gamma, times);
    case Algorithm::centralized_sgd: return (s.tau + s.gamma) * times.t_cp;
  }
  return 0.0;
}

}  // namespace hfl
