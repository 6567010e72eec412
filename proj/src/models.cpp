// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfl/models.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hfl {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

void check_batch(const ModelSpec& spec, const ParamVector& w,
                 std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("empty batch");
  if (w.size() != spec.dim()) {
    throw std::invalid_argument("parameter length " + std::to_string(w.size()) +
                                " does not match model dimension " +
                                std::to_string(spec.dim()));
  }
}

const LabeledSample& checked_sample(const ModelSpec& spec,
                                    const LabeledSample& s) {
  if (s.features.size() != spec.input_dim) {
    throw std::invalid_argument("sample feature width mismatch");
  }
  if (spec.is_classifier() && (s.label < 0 || s.label >= spec.num_classes)) {
    throw std::invalid_argument("sample label out of range");
  }
  return s;
}

template <typename Fn>
void visit(std::span<const LabeledSample> data,
           std::span<const std::size_t> batch, Fn&& fn) {
  if (batch.empty()) {
    for (const auto& s : data) fn(s);
  } else {
    for (std::size_t idx : batch) {
      if (idx >= data.size()) throw std::out_of_range("batch index out of range");
      fn(data[idx]);
    }
  }
}

// Softmax cross-entropy for one logit vector; writes probabilities into probs.
double softmax_xent(const Eigen::VectorXd& logits, int label,
                    Eigen::VectorXd& probs) {
  const double m = logits.maxCoeff();
  probs = (logits.array() - m).exp();
  const double z = probs.sum();
  probs /= z;
  return m + std::log(z) - logits[label];
}

struct LogisticView {
  ConstMatMap W;
  ConstVecMap b;
  LogisticView(const ModelSpec& s, const ParamVector& w)
      : W(w.data(), s.num_classes, s.input_dim),
        b(w.data() + s.num_classes * s.input_dim, s.num_classes) {}
};

struct MlpView {
  ConstMatMap W1;
  ConstVecMap b1;
  ConstMatMap W2;
  ConstVecMap b2;
  MlpView(const ModelSpec& s, const ParamVector& w)
      : W1(w.data(), s.hidden_width, s.input_dim),
        b1(w.data() + s.hidden_width * s.input_dim, s.hidden_width),
        W2(w.data() + s.hidden_width * (s.input_dim + 1), s.num_classes,
           s.hidden_width),
        b2(w.data() + s.hidden_width * (s.input_dim + 1) +
               s.num_classes * s.hidden_width,
           s.num_classes) {}
};

double loss_impl(const ModelSpec& spec, const ParamVector& w,
                 std::span<const LabeledSample> data,
                 std::span<const std::size_t> batch) {
  spec.validate();
  const std::size_t n = batch.empty() ? data.size() : batch.size();
  check_batch(spec, w, n);
  double total = 0.0;
  Eigen::VectorXd probs;
  switch (spec.kind) {
    case ModelKind::logistic: {
      LogisticView m(spec, w);
      visit(data, batch, [&](const LabeledSample& s) {
        checked_sample(spec, s);
        total += softmax_xent(m.W * s.features + m.b, s.label, probs);
      });
      break;
    }
    case ModelKind::mlp: {
      MlpView m(spec, w);
      visit(data, batch, [&](const LabeledSample& s) {
        checked_sample(spec, s);
        Eigen::VectorXd h = (m.W1 * s.features + m.b1).array().tanh();
        total += softmax_xent(m.W2 * h + m.b2, s.label, probs);
      });
      break;
    }
    case ModelKind::quadratic:
      visit(data, batch, [&](const LabeledSample& s) {
        checked_sample(spec, s);
        total += 0.5 * (w - s.features).squaredNorm();
      });
      break;
  }
  return total / static_cast<double>(n);
}

ParamVector gradient_impl(const ModelSpec& spec, const ParamVector& w,
                          std::span<const LabeledSample> data,
                          std::span<const std::size_t> batch) {
  spec.validate();
  const std::size_t n = batch.empty() ? data.size() : batch.size();
  check_batch(spec, w, n);
  ParamVector g = ParamVector::Zero(spec.dim());
  Eigen::VectorXd probs;
  switch (spec.kind) {
    case ModelKind::logistic: {
      LogisticView m(spec, w);
      MatMap gW(g.data(), spec.num_classes, spec.input_dim);
      VecMap gb(g.data() + spec.num_classes * spec.input_dim, spec.num_classes);
      visit(data, batch, [&](const LabeledSample& s) {
        checked_sample(spec, s);
        softmax_xent(m.W * s.features + m.b, s.label, probs);
        probs[s.label] -= 1.0;
        gW.noalias() += probs * s.features.transpose();
        gb += probs;
      });
      break;
    }
    case ModelKind::mlp: {
      MlpView m(spec, w);
      const int H = spec.hidden_width;
      const int in = spec.input_dim;
      const int K = spec.num_classes;
      MatMap gW1(g.data(), H, in);
      VecMap gb1(g.data() + H * in, H);
      MatMap gW2(g.data() + H * (in + 1), K, H);
      VecMap gb2(g.data() + H * (in + 1) + K * H, K);
      Eigen::VectorXd h(H), dh(H);
      visit(data, batch, [&](const LabeledSample& s) {
        checked_sample(spec, s);
        h = (m.W1 * s.features + m.b1).array().tanh();
        softmax_xent(m.W2 * h + m.b2, s.label, probs);
        probs[s.label] -= 1.0;
        gW2.noalias() += probs * h.transpose();
        gb2 += probs;
        dh.noalias() = m.W2.transpose() * probs;
        dh.array() *= 1.0 - h.array().square();
        gW1.noalias() += dh * s.features.transpose();
        gb1 += dh;
      });
      break;
    }
    case ModelKind::quadratic:
      visit(data, batch, [&](const LabeledSample& s) {
        checked_sample(spec, s);
        g += w - s.features;
      });
      break;
  }
  g /= static_cast<double>(n);
  return g;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::logistic: return "logistic";
    case ModelKind::mlp: return "mlp";
    case ModelKind::quadratic: return "quadratic";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "logistic") return ModelKind::logistic;
  if (name == "mlp") return ModelKind::mlp;
  if (name == "quadratic") return ModelKind::quadratic;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (kind != ModelKind::quadratic && num_classes < 2) {
    throw std::invalid_argument("num_classes must be >= 2");
  }
  if (kind == ModelKind::mlp && hidden_width < 1) {
    throw std::invalid_argument("mlp hidden_width must be >= 1");
  }
}

Eigen::Index ModelSpec::dim() const {
  switch (kind) {
    case ModelKind::logistic:
      return static_cast<Eigen::Index>(num_classes) * (input_dim + 1);
    case ModelKind::mlp:
      return static_cast<Eigen::Index>(hidden_width) * (input_dim + 1) +
             static_cast<Eigen::Index>(num_classes) * (hidden_width + 1);
    case ModelKind::quadratic:
      return input_dim;
  }
  return 0;
}

ParamVector initial_params(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  ParamVector w = ParamVector::Zero(spec.dim());
  if (spec.kind != ModelKind::mlp) return w;
  const int H = spec.hidden_width;
  const int in = spec.input_dim;
  const int K = spec.num_classes;
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(H));
  for (int i = 0; i < H * in; ++i) w[i] = s1 * normal(rng);
  const Eigen::Index w2 = static_cast<Eigen::Index>(H) * (in + 1);
  for (int i = 0; i < K * H; ++i) w[w2 + i] = s2 * normal(rng);
  return w;
}

double loss(const ModelSpec& spec, const ParamVector& w,
            std::span<const LabeledSample> data) {
  return loss_impl(spec, w, data, {});
}

double loss(const ModelSpec& spec, const ParamVector& w,
            std::span<const LabeledSample> data,
            std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  return loss_impl(spec, w, data, batch);
}

ParamVector gradient(const ModelSpec& spec, const ParamVector& w,
                     std::span<const LabeledSample> data) {
  return gradient_impl(spec, w, data, {});
}

ParamVector gradient(const ModelSpec& spec, const ParamVector& w,
                     std::span<const LabeledSample> data,
                     std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  return gradient_impl(spec, w, data, batch);
}

ParamVector finite_diff_gradient(const ModelSpec& spec, const ParamVector& w,
                                 std::span<const LabeledSample> data,
                                 double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be > 0");
  ParamVector g(w.size());
  ParamVector probe = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double step = h * (1.0 + std::abs(w[i]));
    probe[i] = w[i] + step;
    const double up = loss(spec, probe, data);
    probe[i] = w[i] - step;
    const double down = loss(spec, probe, data);
    probe[i] = w[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

int predict(const ModelSpec& spec, const ParamVector& w,
            const Eigen::VectorXd& features) {
  Eigen::Index best = 0;
  switch (spec.kind) {
    case ModelKind::logistic: {
      LogisticView m(spec, w);
      (m.W * features + m.b).maxCoeff(&best);
      break;
    }
    case ModelKind::mlp: {
      MlpView m(spec, w);
      Eigen::VectorXd h = (m.W1 * features + m.b1).array().tanh();
      (m.W2 * h + m.b2).maxCoeff(&best);
      break;
    }
    case ModelKind::quadratic:
      throw std::invalid_argument("quadratic surrogate has no predictions");
  }
  return static_cast<int>(best);
}

double accuracy(const ModelSpec& spec, const ParamVector& w,
                std::span<const LabeledSample> data) {
  if (!spec.is_classifier() || data.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::size_t hits = 0;
  for (const auto& s : data) hits += predict(spec, w, s.features) == s.label;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace hfl
