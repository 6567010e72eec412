// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic classification data, device partitioning, and the empirical
// heterogeneity estimate max_{n,w} ||grad F(w) - grad F_n(w)||^2.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hfl/models.hpp"
#include "hfl/rng.hpp"
#include "hfl/topology.hpp"

namespace hfl {

struct DeviceShard {
  int set_index = 0;
  int device_index = 0;
  Dataset samples;

  std::size_t size() const { return samples.size(); }
};

enum class PartitionKind { iid, mixed, noniid1, noniid2 };

std::string to_string(PartitionKind kind);
PartitionKind partition_kind_from_string(const std::string& name);

struct PartitionScheme {
  PartitionKind kind = PartitionKind::iid;
  int size_min = 50;
  int size_max = 150;
  // When a class pool runs dry it is refilled, so a sample can land on more
  // than one device. With this off, exhaustion is an error.
  bool allow_replacement = true;

  /// Labels per device for the non-iid flavours (2 or 1); 0 for iid.
  int classes_per_device() const;
  void validate(int num_classes) const;
};

struct SyntheticSpec {
  int num_classes = 10;
  int per_class = 600;
  int input_dim = 32;
  // Pairwise distance between class means, in units of the per-feature noise.
  double separation = 4.0;
  double noise = 1.0;
};

/// Gaussian clusters, balanced classes, samples ordered by class.
Dataset make_synthetic_dataset(const SyntheticSpec& spec, Rng& rng);

struct HoldoutSplit {
  Dataset train;
  Dataset test;
};

/// Shuffled, stratified by label.
HoldoutSplit split_holdout(const Dataset& data, double test_fraction, Rng& rng);

std::vector<DeviceShard> partition(const Dataset& data, int num_classes,
                                   const Topology& topology,
                                   const PartitionScheme& scheme, Rng& rng);

/// Concatenation of all shards in (set, device) order.
Dataset pool_shards(std::span<const DeviceShard> shards);

/// Weighted global loss sum_n D_n F_n(w) / sum_n D_n.
double global_loss(const ModelSpec& spec, const ParamVector& w,
                   std::span<const DeviceShard> shards);
ParamVector global_gradient(const ModelSpec& spec, const ParamVector& w,
                            std::span<const DeviceShard> shards);

double estimate_heterogeneity(std::span<const DeviceShard> shards,
                              const ModelSpec& spec,
                              std::span<const ParamVector> probes);

// Probe points for the estimate above: the initialization followed by
// `snapshots` points along a full-batch centralized descent path.
std::vector<ParamVector> heterogeneity_probes(
    std::span<const DeviceShard> shards, const ModelSpec& spec,
    const ParamVector& init, int snapshots, int steps_between, double mu);

// One sample per line: label, then features, comma separated.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace hfl
