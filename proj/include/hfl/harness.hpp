// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration, orchestration, and result files.
//
// An experiment is R seeded repetitions. Each repetition draws one dataset
// and one partition, then runs every requested algorithm on that same data so
// the algorithms are compared pairwise.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hfl/datagen.hpp"
#include "hfl/federation.hpp"
#include "hfl/planner.hpp"

namespace hfl {

struct QuantizerConfig {
  QuantizerMode mode = QuantizerMode::stochastic;
  int levels_device = 4;  // s1
  int levels_edge = 10;   // s2
};

struct DatasetConfig {
  SyntheticSpec synthetic;
  double holdout_fraction = 0.2;
  std::optional<std::string> file;  // import instead of generating
};

struct PlannerConfig {
  double deadline_s = 0.0;
  double q1 = 0.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int repeats = 10;
  std::vector<Algorithm> algorithms{Algorithm::qhetfed, Algorithm::hier_local_qsgd};
  Topology topology{{20, 20, 20}};
  Schedule schedule;
  ModelSpec model{ModelKind::logistic, 32, 10, 0};
  QuantizerConfig quantizer;
  DatasetConfig dataset;
  PartitionScheme partition;
  LinkComputeParams link;
  int metric_cadence = 1;
  std::string output_dir = "results";
  std::optional<PlannerConfig> planner;

  void validate() const;
};

/// Throws std::invalid_argument naming the offending key path.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& c);

/// Applies "a.b.c=value" overrides; value is parsed as JSON, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Stable 64-bit hash of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

struct RepetitionData {
  std::uint64_t seed = 0;
  std::vector<DeviceShard> shards;
  Dataset test_set;
};

RepetitionData prepare_repetition(const ExperimentConfig& c, int repetition);

FedRunConfig make_run_config(const ExperimentConfig& c, const RepetitionData& data,
                             Algorithm algorithm);

struct LabeledRun {
  std::string run_id;
  RunRecord record;
};

struct CurvePoint {
  int t = 0;
  double runtime_s = 0.0;
  int count = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;  // sample std (n - 1); 0 when count < 2
  double loss_mean = 0.0;
  double loss_std = 0.0;
};

struct AlgorithmCurve {
  Algorithm algorithm = Algorithm::qhetfed;
  std::vector<CurvePoint> points;
};

struct ComparisonReport {
  std::vector<AlgorithmCurve> curves;
  nlohmann::json config_echo;
};

ComparisonReport aggregate(const std::vector<LabeledRun>& runs,
                           const nlohmann::json& config_echo = {});

/// Header: run_id,algorithm,t,train_loss,test_accuracy,runtime_s
void write_metrics_table(const std::filesystem::path& path,
                         const std::vector<LabeledRun>& runs);
void write_aggregate(const std::filesystem::path& csv_path,
                     const std::filesystem::path& json_path,
                     const ComparisonReport& report);

struct ExperimentResult {
  std::vector<LabeledRun> runs;
  ComparisonReport report;
  std::vector<std::filesystem::path> files;
};

ExperimentResult run_experiment(const ExperimentConfig& c);

/// Last recorded accuracy whose runtime does not exceed the budget (NaN if none).
double accuracy_at_runtime(const RunRecord& r, double runtime_budget);

}  // namespace hfl
