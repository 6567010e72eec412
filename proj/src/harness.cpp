// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfl/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hfl {
namespace {

using nlohmann::json;

// Strict reader: every key must be consumed, errors carry the key path.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(at(key) + ": " + e.what());
    }
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    return Reader(j_.at(key), at(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw std::invalid_argument("unknown config key '" + at(it.key()) + "'");
      }
    }
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
auto wrap(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(key + ": " + e.what());
  }
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void open_or_throw(std::ofstream& out, const std::filesystem::path& path) {
  out.open(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
}

void write_rows(std::ostream& out, const LabeledRun& run) {
  for (const auto& m : run.record.metrics) {
    out << run.run_id << ',' << to_string(run.record.algorithm) << ',' << m.t << ','
        << fmt_double(m.train_loss) << ',' << fmt_double(m.test_accuracy) << ','
        << fmt_double(m.runtime_s) << '\n';
  }
}

constexpr const char* kMetricsHeader = "run_id,algorithm,t,train_loss,test_accuracy,runtime_s\n";

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if (algorithms.empty()) throw std::invalid_argument("algorithms must not be empty");
  wrap("topology", [&] { topology.validate(); });
  wrap("schedule", [&] { schedule.validate(); });
  wrap("model", [&] { model.validate(); });
  if (quantizer.levels_device < 1 || quantizer.levels_edge < 1) {
    throw std::invalid_argument("quantizer levels must be >= 1");
  }
  if (model.is_classifier()) wrap("partition", [&] { partition.validate(model.num_classes); });
  if (!(dataset.holdout_fraction >= 0.0 && dataset.holdout_fraction < 1.0)) {
    throw std::invalid_argument("dataset.holdout must be in [0, 1)");
  }
  if (dataset.file && !std::filesystem::exists(*dataset.file)) {
    throw std::invalid_argument("dataset.file: '" + *dataset.file + "' does not exist");
  }
  wrap("runtime", [&] { link.validate(); });
  if (metric_cadence < 1) throw std::invalid_argument("metric_cadence must be >= 1");
  for (Algorithm a : algorithms) {
    if (a == Algorithm::qhetfed_gamma1 && schedule.gamma != 1) {
      throw std::invalid_argument("algorithm qhetfed_gamma1 requires schedule.gamma = 1");
    }
  }
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Reader root(j, "");
  root.get("seed", c.seed);
  root.get("repeats", c.repeats);
  root.get("metric_cadence", c.metric_cadence);
  root.get("output_dir", c.output_dir);
  if (root.has("algorithms")) {
    std::vector<std::string> names;
    root.get("algorithms", names);
    c.algorithms.clear();
    for (const auto& n : names) {
      c.algorithms.push_back(wrap("algorithms", [&] { return algorithm_from_string(n); }));
    }
  }
  if (root.has("topology")) {
    Reader r = root.child("topology");
    r.get("devices_per_set", c.topology.devices_per_set);
    r.finish();
  }
  if (root.has("schedule")) {
    Reader r = root.child("schedule");
    r.get("tau", c.schedule.tau);
    r.get("gamma", c.schedule.gamma);
    r.get("mu", c.schedule.mu);
    r.get("T", c.schedule.global_iterations);
    r.get("batch", c.schedule.batch);
    r.finish();
  }
  if (root.has("model")) {
    Reader r = root.child("model");
    if (r.has("kind")) {
      std::string kind;
      r.get("kind", kind);
      c.model.kind = wrap("model.kind", [&] { return model_kind_from_string(kind); });
    }
    r.get("input_dim", c.model.input_dim);
    r.get("num_classes", c.model.num_classes);
    r.get("hidden_width", c.model.hidden_width);
    r.finish();
  }
  if (root.has("quantizer")) {
    Reader r = root.child("quantizer");
    if (r.has("mode")) {
      std::string mode;
      r.get("mode", mode);
      if (mode == "stochastic") {
        c.quantizer.mode = QuantizerMode::stochastic;
      } else if (mode == "identity") {
        c.quantizer.mode = QuantizerMode::identity;
      } else {
        throw std::invalid_argument("quantizer.mode: expected 'stochastic' or 'identity'");
      }
    }
    r.get("levels_device", c.quantizer.levels_device);
    r.get("levels_edge", c.quantizer.levels_edge);
    r.finish();
  }
  if (root.has("dataset")) {
    Reader r = root.child("dataset");
    r.get("per_class", c.dataset.synthetic.per_class);
    r.get("separation", c.dataset.synthetic.separation);
    r.get("noise", c.dataset.synthetic.noise);
    r.get("holdout", c.dataset.holdout_fraction);
    if (r.has("file")) {
      std::string f;
      r.get("file", f);
      c.dataset.file = f;
    }
    r.finish();
  }
  if (root.has("partition")) {
    Reader r = root.child("partition");
    if (r.has("scheme")) {
      std::string s;
      r.get("scheme", s);
      c.partition.kind = wrap("partition.scheme", [&] { return partition_kind_from_string(s); });
    }
    r.get("size_min", c.partition.size_min);
    r.get("size_max", c.partition.size_max);
    r.get("allow_replacement", c.partition.allow_replacement);
    r.finish();
  }
  if (root.has("runtime")) {
    Reader r = root.child("runtime");
    LinkComputeParams& l = c.link;
    r.get("bandwidth_hz", l.bandwidth_hz);
    r.get("power_w", l.power_w);
    r.get("noise_w", l.noise_w);
    r.get("cycles_per_bit", l.cycles_per_bit);
    r.get("channel_gain", l.channel_gain);
    r.get("cpu_freq_hz", l.cpu_freq_hz);
    r.get("bits_per_local_iter", l.bits_per_local_iter);
    r.get("model_bits", l.model_bits);
    r.get("edge_cloud_ratio", l.edge_cloud_ratio);
    if (r.has("edge_cloud_time_s")) {
      double t = 0.0;
      r.get("edge_cloud_time_s", t);
      l.edge_cloud_time_s = t;
    }
    r.finish();
  }
  if (root.has("planner")) {
    Reader r = root.child("planner");
    PlannerConfig p;
    r.get("deadline_s", p.deadline_s);
    r.get("q1", p.q1);
    r.finish();
    c.planner = p;
  }
  root.finish();
  c.dataset.synthetic.num_classes = c.model.num_classes;
  c.dataset.synthetic.input_dim = c.model.input_dim;
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["repeats"] = c.repeats;
  j["metric_cadence"] = c.metric_cadence;
  j["output_dir"] = c.output_dir;
  j["algorithms"] = json::array();
  for (Algorithm a : c.algorithms) j["algorithms"].push_back(to_string(a));
  j["topology"] = {{"devices_per_set", c.topology.devices_per_set}};
  j["schedule"] = {{"tau", c.schedule.tau},
                   {"gamma", c.schedule.gamma},
                   {"mu", c.schedule.mu},
                   {"T", c.schedule.global_iterations},
                   {"batch", c.schedule.batch}};
  j["model"] = {{"kind", to_string(c.model.kind)},
                {"input_dim", c.model.input_dim},
                {"num_classes", c.model.num_classes},
                {"hidden_width", c.model.hidden_width}};
  j["quantizer"] = {
      {"mode", c.quantizer.mode == QuantizerMode::identity ? "identity" : "stochastic"},
      {"levels_device", c.quantizer.levels_device},
      {"levels_edge", c.quantizer.levels_edge}};
  j["dataset"] = {{"per_class", c.dataset.synthetic.per_class},
                  {"separation", c.dataset.synthetic.separation},
                  {"noise", c.dataset.synthetic.noise},
                  {"holdout", c.dataset.holdout_fraction}};
  if (c.dataset.file) j["dataset"]["file"] = *c.dataset.file;
  j["partition"] = {{"scheme", to_string(c.partition.kind)},
                    {"size_min", c.partition.size_min},
                    {"size_max", c.partition.size_max},
                    {"allow_replacement", c.partition.allow_replacement}};
  const LinkComputeParams& l = c.link;
  j["runtime"] = {{"bandwidth_hz", l.bandwidth_hz},
                  {"power_w", l.power_w},
                  {"noise_w", l.noise_w},
                  {"cycles_per_bit", l.cycles_per_bit},
                  {"channel_gain", l.channel_gain},
                  {"cpu_freq_hz", l.cpu_freq_hz},
                  {"bits_per_local_iter", l.bits_per_local_iter},
                  {"model_bits", l.model_bits},
                  {"edge_cloud_ratio", l.edge_cloud_ratio}};
  if (l.edge_cloud_time_s) j["runtime"]["edge_cloud_time_s"] = *l.edge_cloud_time_s;
  if (c.planner) {
    j["planner"] = {{"deadline_s", c.planner->deadline_s}, {"q1", c.planner->q1}};
  }
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
  std::ofstream out;
  open_or_throw(out, path);
  out << config_to_json(c).dump(2) << '\n';
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_null()) next = json::object();
    node = &next;
  }
  (*node)[parts.back()] = value;
}

std::string config_hash(const ExperimentConfig& c) {
  json j = config_to_json(c);
  j.erase("output_dir");
  return hex16(fnv1a(j.dump()));
}

RepetitionData prepare_repetition(const ExperimentConfig& c, int repetition) {
  RepetitionData out;
  out.seed = derive_seed(c.seed, Stream::repeat, {static_cast<std::uint64_t>(repetition)});

  Dataset all;
  if (c.dataset.file) {
    all = read_dataset(*c.dataset.file);
  } else {
    Rng drng = make_stream(out.seed, Stream::dataset);
    SyntheticSpec spec = c.dataset.synthetic;
    spec.num_classes = c.model.num_classes;
    spec.input_dim = c.model.input_dim;
    all = make_synthetic_dataset(spec, drng);
  }
  Rng hrng = make_stream(out.seed, Stream::holdout);
  HoldoutSplit split = split_holdout(all, c.dataset.holdout_fraction, hrng);
  out.test_set = std::move(split.test);
  Rng prng = make_stream(out.seed, Stream::partition);
  out.shards = partition(split.train, c.model.num_classes, c.topology, c.partition, prng);
  return out;
}

FedRunConfig make_run_config(const ExperimentConfig& c, const RepetitionData& data,
                             Algorithm algorithm) {
  FedRunConfig f;
  f.topology = c.topology;
  f.schedule = c.schedule;
  f.model = c.model;
  f.shards = data.shards;
  f.test_set = data.test_set;
  if (c.quantizer.mode == QuantizerMode::stochastic) {
    f.q1 = QuantizerSpec::stochastic(c.quantizer.levels_device);
    f.q2 = QuantizerSpec::stochastic(c.quantizer.levels_edge);
  }
  f.algorithm = algorithm;
  f.seed = data.seed;
  f.times = compute_times(c.link);
  f.metric_cadence = c.metric_cadence;
  return f;
}

ComparisonReport aggregate(const std::vector<LabeledRun>& runs, const json& config_echo) {
  ComparisonReport report;
  report.config_echo = config_echo;
  // Algorithm order follows first appearance; t ascending.
  std::vector<Algorithm> order;
  std::map<std::pair<int, int>, std::vector<const IterationMetrics*>> cells;
  for (const auto& r : runs) {
    const Algorithm a = r.record.algorithm;
    if (std::find(order.begin(), order.end(), a) == order.end()) order.push_back(a);
    for (const auto& m : r.record.metrics) {
      cells[{static_cast<int>(a), m.t}].push_back(&m);
    }
  }
  for (Algorithm a : order) {
    AlgorithmCurve curve;
    curve.algorithm = a;
    for (const auto& [key, ms] : cells) {
      if (key.first != static_cast<int>(a)) continue;
      CurvePoint p;
      p.t = key.second;
      p.count = static_cast<int>(ms.size());
      p.runtime_s = ms.front()->runtime_s;
      std::vector<double> acc, loss_v;
      for (const auto* m : ms) {
        acc.push_back(m->test_accuracy);
        loss_v.push_back(m->train_loss);
      }
      for (double x : acc) p.accuracy_mean += x;
      for (double x : loss_v) p.loss_mean += x;
      p.accuracy_mean /= p.count;
      p.loss_mean /= p.count;
      p.accuracy_std = sample_std(acc, p.accuracy_mean);
      p.loss_std = sample_std(loss_v, p.loss_mean);
      curve.points.push_back(p);
    }
    report.curves.push_back(std::move(curve));
  }
  return report;
}

void write_metrics_table(const std::filesystem::path& path,
                         const std::vector<LabeledRun>& runs) {
  std::ofstream out;
  open_or_throw(out, path);
  out << kMetricsHeader;
  for (const auto& r : runs) write_rows(out, r);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_aggregate(const std::filesystem::path& csv_path,
                     const std::filesystem::path& json_path,
                     const ComparisonReport& report) {
  std::ofstream csv;
  open_or_throw(csv, csv_path);
  csv << "algorithm,t,runtime_s,runs,accuracy_mean,accuracy_std,loss_mean,loss_std\n";
  json curves = json::array();
  for (const auto& c : report.curves) {
    json points = json::array();
    for (const auto& p : c.points) {
      csv << to_string(c.algorithm) << ',' << p.t << ',' << fmt_double(p.runtime_s) << ','
          << p.count << ',' << fmt_double(p.accuracy_mean) << ','
          << fmt_double(p.accuracy_std) << ',' << fmt_double(p.loss_mean) << ','
          << fmt_double(p.loss_std) << '\n';
      points.push_back({{"t", p.t},
                        {"runtime_s", p.runtime_s},
                        {"runs", p.count},
                        {"accuracy_mean", std::isnan(p.accuracy_mean) ? json() : json(p.accuracy_mean)},
                        {"accuracy_std", std::isnan(p.accuracy_std) ? json() : json(p.accuracy_std)},
                        {"loss_mean", p.loss_mean},
                        {"loss_std", p.loss_std}});
    }
    curves.push_back({{"algorithm", to_string(c.algorithm)}, {"points", points}});
  }
  if (!csv) throw std::runtime_error("write failed: " + csv_path.string());
  std::ofstream js;
  open_or_throw(js, json_path);
  js << json{{"config", report.config_echo}, {"curves", curves}}.dump(2) << '\n';
  if (!js) throw std::runtime_error("write failed: " + json_path.string());
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  namespace fs = std::filesystem;
  const fs::path dir = c.output_dir;
  fs::create_directories(dir);
  const std::string hash = config_hash(c);
  const json echo = config_to_json(c);

  ExperimentResult result;
  const fs::path cfg_path = dir / "config.json";
  save_config(cfg_path, c);
  result.files.push_back(cfg_path);

  json divergences = json::array();
  for (int r = 0; r < c.repeats; ++r) {
    const RepetitionData data = prepare_repetition(c, r);
    for (Algorithm a : c.algorithms) {
      LabeledRun run;
      run.run_id = to_string(a) + "_r" + std::to_string(r);
      run.record = hfl::run(make_run_config(c, data, a));
      run.record.trajectory.clear();
      run.record.trajectory.shrink_to_fit();

      const fs::path path = dir / ("run_" + to_string(a) + "_seed" + std::to_string(data.seed) +
                                   "_" + hash + ".csv");
      std::ofstream out;
      open_or_throw(out, path);
      out << kMetricsHeader;
      write_rows(out, run);
      if (run.record.diverged_at) {
        out << "# diverged_at=" << *run.record.diverged_at << ' '
            << run.record.divergence_reason << '\n';
        divergences.push_back({{"run_id", run.run_id},
                               {"t", *run.record.diverged_at},
                               {"reason", run.record.divergence_reason}});
      }
      if (!out) throw std::runtime_error("write failed: " + path.string());
      result.files.push_back(path);
      result.runs.push_back(std::move(run));
    }
  }

  const fs::path metrics = dir / "metrics.csv";
  write_metrics_table(metrics, result.runs);
  result.files.push_back(metrics);

  json echo_with_status = echo;
  echo_with_status["divergences"] = divergences;
  result.report = aggregate(result.runs, echo_with_status);
  const fs::path agg_csv = dir / "aggregate.csv";
  const fs::path agg_json = dir / "aggregate.json";
  write_aggregate(agg_csv, agg_json, result.report);
  result.files.push_back(agg_csv);
  result.files.push_back(agg_json);

  if (c.planner) {
    DeadlinePlan plan{c.planner->deadline_s, c.schedule.global_iterations, compute_times(c.link)};
    ObjectiveWeights w{c.planner->q1, c.topology.num_sets(), c.topology.total_devices()};
    const SchedulePlan sp = optimize_schedule(plan, w);
    const fs::path plan_path = dir / "plan.json";
    std::ofstream out;
    open_or_throw(out, plan_path);
    out << json{{"tau_opt", sp.tau_opt},   {"gamma_opt", sp.gamma_opt},
                {"J_opt", sp.J_opt},       {"tau_int", sp.tau_int},
                {"gamma_int", sp.gamma_int}, {"J_int", sp.J_int}}
               .dump(2)
        << '\n';
    result.files.push_back(plan_path);
  }
  return result;
}

double accuracy_at_runtime(const RunRecord& r, double runtime_budget) {
  double acc = std::numeric_limits<double>::quiet_NaN();
  for (const auto& m : r.metrics) {
    if (m.runtime_s <= runtime_budget) acc = m.test_accuracy;
  }
  return acc;
}

}  // namespace hfl
