#pragma once

// Mini-batch training with Adam, early stopping on validation accuracy and
// divergence detection.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xqsv/dataset.hpp"
#include "xqsv/network.hpp"

namespace xqsv {

struct TrainOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 256;
  int max_epochs = 200;
  int patience = 10;  // epochs without validation improvement; 0 disables
  std::optional<double> target_train_accuracy;  // stop once reached (inference-mode train top-1)
  bool track_train_accuracy = false;
  bool restore_best = true;  // keep the parameters of the best validation epoch
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  std::optional<double> train_accuracy;
  std::optional<double> validation_accuracy;
  double seconds = 0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  std::optional<double> best_validation_accuracy;
  std::string stop_reason;
  double seconds = 0;
};

/// Inference-mode unfiltered top-1 accuracy.
template <typename S>
double top1_accuracy(const Network<S>& net, std::span<const TrainingSample> samples, std::size_t batch_size = 512) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  std::vector<std::span<const int>> xs;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    xs.clear();
    for (std::size_t i = start; i < end; ++i) xs.emplace_back(samples[i].x);
    const auto probs = net.forward_batch(xs, Mode::Infer);
    for (std::size_t i = start; i < end; ++i) {
      Eigen::Index best = 0;
      const auto col = probs.col(static_cast<Eigen::Index>(i - start));
      for (Eigen::Index r = 1; r < col.size(); ++r) {
        if (col(r) > col(best)) best = r;
      }
      correct += best == samples[i].y;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

template <typename S>
class Adam {
 public:
  using Mat = typename Network<S>::Mat;

  Adam(const Network<S>& net, const TrainOptions& opts) : opts_(opts) {
    for (std::size_t i = 0; i < net.tensor_count(); ++i) {
      m_.push_back(Mat::Zero(net.tensor(i).rows(), net.tensor(i).cols()));
      v_.push_back(Mat::Zero(net.tensor(i).rows(), net.tensor(i).cols()));
    }
  }

  void step(Network<S>& net, const std::vector<Mat>& grads) {
    ++t_;
    const S b1 = S(opts_.beta1), b2 = S(opts_.beta2);
    const S c1 = S(1) - S(std::pow(opts_.beta1, t_));
    const S c2 = S(1) - S(std::pow(opts_.beta2, t_));
    const S lr = S(opts_.learning_rate);
    const S eps = S(opts_.adam_eps);
    for (std::size_t i = 0; i < net.tensor_count(); ++i) {
      if (!net.info(i).trainable) continue;
      m_[i] = b1 * m_[i] + (S(1) - b1) * grads[i];
      v_[i] = b2 * v_[i] + (S(1) - b2) * grads[i].cwiseAbs2();
      net.tensor(i).array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

 private:
  TrainOptions opts_;
  std::vector<Mat> m_, v_;
  int t_ = 0;
};

/// Trains in place. `on_epoch` (optional) sees every epoch record as it completes.
template <typename S>
TrainResult train(Network<S>& net, std::span<const TrainingSample> train_set,
                  std::span<const TrainingSample> validation, const TrainOptions& opts,
                  const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (train_set.empty()) throw Error(ErrorCode::InvalidConfig, "empty training set");
  if (opts.batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch size must be positive");
  using Mat = typename Network<S>::Mat;
  const auto start = std::chrono::steady_clock::now();
  Adam<S> adam(net, opts);
  Rng order_rng = make_rng(opts.seed, 21);
  Rng dropout_rng = make_rng(opts.seed, 22);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  std::vector<Mat> best = {};
  int since_best = 0;
  std::vector<Mat> grads;
  std::vector<std::span<const int>> xs;
  std::vector<int> ys;
  typename Network<S>::Cache cache;

  for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    shuffle(order, order_rng);
    double loss_sum = 0;
    for (std::size_t b = 0; b < order.size(); b += opts.batch_size) {
      const std::size_t end = std::min(order.size(), b + opts.batch_size);
      xs.clear();
      ys.clear();
      for (std::size_t i = b; i < end; ++i) {
        xs.emplace_back(train_set[order[i]].x);
        ys.push_back(train_set[order[i]].y);
      }
      const S loss = net.loss(xs, ys, Mode::Train, &dropout_rng, &grads, &cache);
      if (!std::isfinite(static_cast<double>(loss))) {
        throw Error(ErrorCode::DivergenceDetected, "non-finite loss at epoch " + std::to_string(epoch));
      }
      adam.step(net, grads);
      net.update_running_stats(cache);
      loss_sum += static_cast<double>(loss) * static_cast<double>(end - b);
    }
    if (!net.all_finite()) {
      throw Error(ErrorCode::DivergenceDetected, "non-finite parameters at epoch " + std::to_string(epoch));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (opts.track_train_accuracy || opts.target_train_accuracy) rec.train_accuracy = top1_accuracy(net, train_set);
    if (!validation.empty()) rec.validation_accuracy = top1_accuracy(net, validation);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.validation_accuracy) {
      if (!result.best_validation_accuracy || *rec.validation_accuracy > *result.best_validation_accuracy) {
        result.best_validation_accuracy = rec.validation_accuracy;
        result.best_epoch = epoch;
        since_best = 0;
        if (opts.restore_best) {
          best.clear();
          for (std::size_t i = 0; i < net.tensor_count(); ++i) best.push_back(net.tensor(i));
        }
      } else {
        ++since_best;
      }
    } else {
      result.best_epoch = epoch;
    }

    if (opts.target_train_accuracy && *rec.train_accuracy >= *opts.target_train_accuracy) {
      result.stop_reason = "target train accuracy reached";
      best.clear();
      result.best_epoch = epoch;
      break;
    }
    if (opts.patience > 0 && since_best >= opts.patience) {
      result.stop_reason = "early stopping";
      break;
    }
  }
  if (result.stop_reason.empty()) result.stop_reason = "max epochs";
  if (!best.empty() && result.best_epoch != static_cast<int>(result.history.size())) {
    for (std::size_t i = 0; i < net.tensor_count(); ++i) net.tensor(i) = best[i];
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace xqsv
