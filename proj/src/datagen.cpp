// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/QR>

namespace hfl {
namespace {

// Per-class index pools consumed front to back; refilled (reshuffled) when
// empty if replacement is allowed.
class ClassPools {
 public:
  ClassPools(const Dataset& data, int num_classes, bool refill, Rng& rng)
      : all_(num_classes), live_(num_classes), refill_(refill), rng_(rng) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const int y = data[i].label;
      if (y < 0 || y >= num_classes) {
        throw std::invalid_argument("dataset label outside [0, K)");
      }
      all_[y].push_back(i);
    }
    for (int k = 0; k < num_classes; ++k) reset(k);
  }

  bool has_class(int k) const { return !all_[k].empty(); }

  std::size_t take(int k) {
    if (all_[k].empty()) {
      throw std::invalid_argument("class " + std::to_string(k) +
                                  " has no samples");
    }
    if (live_[k].empty()) {
      if (!refill_) {
        throw std::invalid_argument(
            "class " + std::to_string(k) +
            " exhausted; enable allow_replacement or enlarge the dataset");
      }
      reset(k);
    }
    const std::size_t idx = live_[k].back();
    live_[k].pop_back();
    return idx;
  }

 private:
  void reset(int k) {
    live_[k] = all_[k];
    std::shuffle(live_[k].begin(), live_[k].end(), rng_);
  }

  std::vector<std::vector<std::size_t>> all_;
  std::vector<std::vector<std::size_t>> live_;
  bool refill_;
  Rng& rng_;
};

PartitionKind device_kind(PartitionKind scheme, int set, int device,
                          int set_size) {
  if (scheme != PartitionKind::mixed) return scheme;
  // Sets cycle through: iid, non-iid, half/half.
  switch (set % 3) {
    case 0: return PartitionKind::iid;
    case 1: return PartitionKind::noniid1;
    default: return device < set_size / 2 ? PartitionKind::iid : PartitionKind::noniid1;
  }
}

}  // namespace

std::string to_string(PartitionKind kind) {
  switch (kind) {
    case PartitionKind::iid: return "iid";
    case PartitionKind::mixed: return "mixed";
    case PartitionKind::noniid1: return "noniid1";
    case PartitionKind::noniid2: return "noniid2";
  }
  return "unknown";
}

PartitionKind partition_kind_from_string(const std::string& name) {
  if (name == "iid") return PartitionKind::iid;
  if (name == "mixed") return PartitionKind::mixed;
  if (name == "noniid1") return PartitionKind::noniid1;
  if (name == "noniid2") return PartitionKind::noniid2;
  throw std::invalid_argument("unknown partition scheme '" + name + "'");
}

int PartitionScheme::classes_per_device() const {
  switch (kind) {
    case PartitionKind::noniid1:
    case PartitionKind::mixed: return 2;
    case PartitionKind::noniid2: return 1;
    case PartitionKind::iid: return 0;
  }
  return 0;
}

void PartitionScheme::validate(int num_classes) const {
  if (size_min < 1) throw std::invalid_argument("partition size_min must be >= 1");
  if (size_max < size_min) {
    throw std::invalid_argument("partition size_max must be >= size_min");
  }
  const int cpd = classes_per_device();
  if (cpd > num_classes) {
    throw std::invalid_argument("partition scheme " + to_string(kind) +
                                " needs " + std::to_string(cpd) +
                                " classes but the dataset has " +
                                std::to_string(num_classes));
  }
  if (cpd > size_min) {
    throw std::invalid_argument(
        "partition size_min is smaller than the classes held per device");
  }
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec, Rng& rng) {
  if (spec.num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (spec.per_class < 1) throw std::invalid_argument("per_class must be >= 1");
  if (spec.input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (!(spec.noise > 0.0)) throw std::invalid_argument("noise must be > 0");

  const int K = spec.num_classes;
  const int dim = spec.input_dim;
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd directions(dim, K);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < dim; ++i) directions(i, k) = normal(rng);
  if (dim >= K) {
    // Orthonormal directions put every pair of means exactly `separation` apart.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(directions);
    directions = qr.householderQ() * Eigen::MatrixXd::Identity(dim, K);
  } else {
    directions.colwise().normalize();
  }
  const double radius = spec.separation * spec.noise / std::sqrt(2.0);

  Dataset out;
  out.reserve(static_cast<std::size_t>(K) * spec.per_class);
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd mean = radius * directions.col(k);
    for (int j = 0; j < spec.per_class; ++j) {
      LabeledSample s;
      s.label = k;
      s.features = mean;
      for (int i = 0; i < dim; ++i) s.features[i] += spec.noise * normal(rng);
      out.push_back(std::move(s));
    }
  }
  return out;
}

HoldoutSplit split_holdout(const Dataset& data, double test_fraction, Rng& rng) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("holdout fraction must be in [0, 1)");
  }
  int max_label = 0;
  for (const auto& s : data) max_label = std::max(max_label, s.label);
  std::vector<std::vector<std::size_t>> by_label(max_label + 1);
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data[i].label].push_back(i);

  HoldoutSplit split;
  for (auto& idx : by_label) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      (j < n_test ? split.test : split.train).push_back(data[idx[j]]);
    }
  }
  return split;
}

std::vector<DeviceShard> partition(const Dataset& data, int num_classes,
                                   const Topology& topology,
                                   const PartitionScheme& scheme, Rng& rng) {
  topology.validate();
  scheme.validate(num_classes);
  if (data.empty()) throw std::invalid_argument("cannot partition an empty dataset");

  ClassPools pools(data, num_classes, scheme.allow_replacement, rng);
  std::vector<int> present;
  for (int k = 0; k < num_classes; ++k)
    if (pools.has_class(k)) present.push_back(k);

  std::uniform_int_distribution<int> size_dist(scheme.size_min, scheme.size_max);
  std::vector<DeviceShard> shards;
  shards.reserve(topology.total_devices());

  for (int l = 0; l < topology.num_sets(); ++l) {
    const int n_l = topology.devices_per_set[l];
    for (int n = 0; n < n_l; ++n) {
      DeviceShard shard;
      shard.set_index = l;
      shard.device_index = n;
      const int size = size_dist(rng);
      const PartitionKind kind = device_kind(scheme.kind, l, n, n_l);
      shard.samples.reserve(size);

      if (kind == PartitionKind::iid) {
        std::uniform_int_distribution<std::size_t> cls(0, present.size() - 1);
        for (int j = 0; j < size; ++j) {
          shard.samples.push_back(data[pools.take(present[cls(rng)])]);
        }
      } else {
        const int cpd = kind == PartitionKind::noniid2 ? 1 : 2;
        if (static_cast<int>(present.size()) < cpd) {
          throw std::invalid_argument("not enough populated classes for " +
                                      to_string(kind));
        }
        std::vector<int> classes = present;
        std::shuffle(classes.begin(), classes.end(), rng);
        classes.resize(cpd);
        std::sort(classes.begin(), classes.end());
        // Even split so every chosen class is present.
        for (int c = 0; c < cpd; ++c) {
          const int count = size / cpd + (c < size % cpd ? 1 : 0);
          for (int j = 0; j < count; ++j) {
            shard.samples.push_back(data[pools.take(classes[c])]);
          }
        }
      }
      shards.push_back(std::move(shard));
    }
  }
  return shards;
}

Dataset pool_shards(std::span<const DeviceShard> shards) {
  Dataset out;
  std::size_t total = 0;
  for (const auto& s : shards) total += s.size();
  out.reserve(total);
  for (const auto& s : shards) out.insert(out.end(), s.samples.begin(), s.samples.end());
  return out;
}

double global_loss(const ModelSpec& spec, const ParamVector& w,
                   std::span<const DeviceShard> shards) {
  if (shards.empty()) throw std::invalid_argument("no shards");
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& s : shards) {
    const auto d = static_cast<double>(s.size());
    weighted += d * loss(spec, w, s.samples);
    total += d;
  }
  return weighted / total;
}

ParamVector global_gradient(const ModelSpec& spec, const ParamVector& w,
                            std::span<const DeviceShard> shards) {
  if (shards.empty()) throw std::invalid_argument("no shards");
  ParamVector g = ParamVector::Zero(spec.dim());
  double total = 0.0;
  for (const auto& s : shards) {
    const auto d = static_cast<double>(s.size());
    g += d * gradient(spec, w, s.samples);
    total += d;
  }
  return g / total;
}

double estimate_heterogeneity(std::span<const DeviceShard> shards,
                              const ModelSpec& spec,
                              std::span<const ParamVector> probes) {
  if (shards.empty()) throw std::invalid_argument("no shards");
  if (probes.empty()) throw std::invalid_argument("no probe points");
  double worst = 0.0;
  for (const auto& w : probes) {
    const ParamVector global = global_gradient(spec, w, shards);
    for (const auto& s : shards) {
      worst = std::max(worst, (global - gradient(spec, w, s.samples)).squaredNorm());
    }
  }
  return worst;
}

std::vector<ParamVector> heterogeneity_probes(
    std::span<const DeviceShard> shards, const ModelSpec& spec,
    const ParamVector& init, int snapshots, int steps_between, double mu) {
  std::vector<ParamVector> probes{init};
  ParamVector w = init;
  for (int s = 0; s < snapshots; ++s) {
    for (int k = 0; k < steps_between; ++k) w -= mu * global_gradient(spec, w, shards);
    probes.push_back(w);
  }
  return probes;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& s : data) {
    out << s.label;
    for (Eigen::Index i = 0; i < s.features.size(); ++i) out << ',' << s.features[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    LabeledSample s;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      try {
        if (first) {
          s.label = std::stoi(cell);
          first = false;
        } else {
          values.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": malformed cell '" + cell + "'");
      }
    }
    s.features = Eigen::Map<Eigen::VectorXd>(values.data(), values.size());
    if (width >= 0 && s.features.size() != width) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": inconsistent feature count");
    }
    width = s.features.size();
    data.push_back(std::move(s));
  }
  return data;
}

}  // namespace hfl
