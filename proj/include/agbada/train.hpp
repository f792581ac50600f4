#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "agbada/data/batches.hpp"
#include "agbada/errors.hpp"
#include "agbada/model.hpp"
#include "agbada/rng.hpp"
#include "agbada/tensor.hpp"
#include "agbada/weights_io.hpp"

namespace agbada {

struct ReduceLrConfig {
  double factor = 0.5;
  int patience = 3;
  double min_lr = 1e-6;
};

struct EarlyStopConfig {
  int patience = 10;
  double min_delta = 1e-4;
};

struct TrainConfig {
  int epochs = 50;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  ReduceLrConfig reduce_lr;
  EarlyStopConfig early_stop;
  std::string checkpoint_path;  // empty: keep the best checkpoint in memory only
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ParameterError("epochs must be >= 1");
    if (batch_size < 1) throw ParameterError("batch size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ParameterError("learning rate must be >= 0");
    if (!(reduce_lr.factor > 0.0 && reduce_lr.factor < 1.0)) throw ParameterError("reduce-lr factor must be in (0,1)");
    if (reduce_lr.patience < 1 || early_stop.patience < 1) throw ParameterError("patience must be >= 1");
    if (!(reduce_lr.min_lr > 0.0)) throw ParameterError("min_lr must be > 0");
    if (!(early_stop.min_delta >= 0.0)) throw ParameterError("min_delta must be >= 0");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
  std::int64_t wall_ms = 0;
};

// ---------------------------------------------------------------------------
// Loss

inline constexpr double kBceEpsilon = 1e-7;

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> dlogits;  // dL/dz for z the sigmoid pre-activation
};

// Mean binary cross-entropy with p clamped to [eps, 1-eps]; the gradient uses
// the fused sigmoid identity dL/dz = (p - y) / N.
template <typename T>
LossResult<T> bce_loss(const Tensor<T>& p, const Tensor<T>& y) {
  if (p.shape() != y.shape() || p.rank() != 2 || p.dim(1) != 1) {
    throw DimensionError("bce_loss expects matching (N,1) tensors, got " + shape_string(p.shape()) + " and " +
                         shape_string(y.shape()));
  }
  const std::size_t n = p.dim(0);
  LossResult<T> out;
  out.dlogits = Tensor<T>(p.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = std::clamp(static_cast<double>(p[i]), kBceEpsilon, 1.0 - kBceEpsilon);
    const double yi = static_cast<double>(y[i]);
    sum += yi * std::log(pi) + (1.0 - yi) * std::log(1.0 - pi);
    out.dlogits[i] = static_cast<T>((static_cast<double>(p[i]) - yi) / static_cast<double>(n));
  }
  out.loss = -sum / static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

// p <- p - lr * g for every trainable parameter; gradients are cleared after.
template <typename T>
void sgd_step(SequentialModel<T>& model, double lr) {
  bool any = false;
  for (const auto& l : model.layers)
    if (l.trainable && !l.grads.empty()) any = true;
  if (!any) throw StateError("sgd_step called without gradients");
  const T step = static_cast<T>(lr);
  for (auto& l : model.layers) {
    if (l.trainable) {
      for (auto& [pname, g] : l.grads) {
        auto pv = l.params.at(pname).data();
        const auto gv = g.data();
        for (std::size_t i = 0; i < pv.size(); ++i) pv[i] -= step * gv[i];
      }
    }
    l.grads.clear();
  }
}

// ---------------------------------------------------------------------------
// Callbacks

struct CallbackState {
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int epochs_since_improve_lr = 0;
  int epochs_since_improve_stop = 0;
};

struct CallbackDecision {
  bool save_checkpoint = false;
  std::optional<double> new_lr;
  bool stop = false;
};

// Checkpoint on improvement (val_loss < best - min_delta), reduce the learning
// rate after `reduce_lr.patience` epochs without improvement, stop after
// `early_stop.patience`.
inline CallbackDecision apply_callbacks(CallbackState& state, int epoch, double val_loss, double lr,
                                        const TrainConfig& cfg) {
  CallbackDecision d;
  if (val_loss < state.best_val_loss - cfg.early_stop.min_delta) {
    state.best_val_loss = val_loss;
    state.best_epoch = epoch;
    state.epochs_since_improve_lr = 0;
    state.epochs_since_improve_stop = 0;
    d.save_checkpoint = true;
    return d;
  }
  if (++state.epochs_since_improve_lr >= cfg.reduce_lr.patience) {
    state.epochs_since_improve_lr = 0;
    const double reduced = std::max(lr * cfg.reduce_lr.factor, cfg.reduce_lr.min_lr);
    if (reduced < lr) d.new_lr = reduced;
  }
  if (++state.epochs_since_improve_stop >= cfg.early_stop.patience) d.stop = true;
  return d;
}

// ---------------------------------------------------------------------------
// Loop

struct EvalPass {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Infer-mode pass over every batch; loss is the sample-weighted mean BCE.
template <typename T>
EvalPass evaluate_stream(SequentialModel<T>& model, data::BatchStream& stream) {
  stream.set_epoch(0);
  double loss_sum = 0.0;
  std::size_t correct = 0, total = 0;
  for (std::size_t s = 0; s < stream.steps(); ++s) {
    const auto batch = stream.batch(s);
    const Tensor<T> x = batch.inputs.template cast<T>();
    const Tensor<T> y = batch.targets.template cast<T>();
    const Tensor<T> p = forward(model, x, Mode::Infer);
    const auto loss = bce_loss(p, y);
    const std::size_t n = p.dim(0);
    loss_sum += loss.loss * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) correct += ((p[i] > T(0.5)) == (y[i] > T(0.5))) ? 1 : 0;
    total += n;
  }
  if (total == 0) return {};
  return {loss_sum / static_cast<double>(total), static_cast<double>(correct) / static_cast<double>(total)};
}

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
  std::size_t steps = 0;
};

using EpochObserver = std::function<void(const EpochRecord&, const CallbackDecision&)>;

// Mini-batch gradient descent with validation-driven callbacks. On return the
// model holds the best checkpoint's weights.
template <typename T>
TrainResult run_training(SequentialModel<T>& model, data::BatchStream& train, data::BatchStream& val,
                         const TrainConfig& cfg, const EpochObserver& observer = {}) {
  cfg.validate();
  if (train.size() == 0) throw ParameterError("training split is empty");
  if (val.size() == 0) throw ParameterError("validation split is empty");

  TrainResult result;
  CallbackState state;
  double lr = cfg.learning_rate;
  ParameterSet<T> best = snapshot(model);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    train.set_epoch(epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0, total = 0;
    for (std::size_t step = 0; step < train.steps(); ++step) {
      const auto batch = train.batch(step);
      const Tensor<T> x = batch.inputs.template cast<T>();
      const Tensor<T> y = batch.targets.template cast<T>();
      Rng dropout_rng(mix_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), step}), Stream::Dropout);
      const Tensor<T> p = forward(model, x, Mode::Train, &dropout_rng);
      const auto loss = bce_loss(p, y);
      if (!std::isfinite(loss.loss)) throw NonFiniteLossError(epoch, step);
      backward_from_logits(model, loss.dlogits);
      sgd_step(model, lr);
      ++result.steps;

      const std::size_t n = p.dim(0);
      loss_sum += loss.loss * static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) correct += ((p[i] > T(0.5)) == (y[i] > T(0.5))) ? 1 : 0;
      total += n;
    }
    clear_caches(model);

    const EvalPass v = evaluate_stream(model, val);
    if (!std::isfinite(v.loss)) throw NonFiniteLossError(epoch, train.steps());

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(total);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(total);
    rec.val_loss = v.loss;
    rec.val_acc = v.accuracy;
    rec.lr = lr;

    const CallbackDecision decision = apply_callbacks(state, epoch, v.loss, lr, cfg);
    if (decision.save_checkpoint) {
      best = snapshot(model);
      if (!cfg.checkpoint_path.empty()) save_weights(model, cfg.checkpoint_path);
    }
    if (decision.new_lr) lr = *decision.new_lr;
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    if (observer) observer(rec, decision);
    if (decision.stop) {
      result.stopped_early = true;
      break;
    }
  }
  restore(model, best);
  result.best_epoch = state.best_epoch;
  result.best_val_loss = state.best_val_loss;
  return result;
}

}  // namespace agbada
