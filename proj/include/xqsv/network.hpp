#pragma once

// Structurally variable move classifier:
//   embedding -> single recurrent layer (LSTM/GRU, optionally reading the
//   history most-recent-first) -> RNN activation -> optional batch norm ->
//   num_fc hidden layers -> output projection -> softmax over the vocabulary.
//
// Column-major batches: every activation matrix is (features x batch).
// Variable-length histories are right-aligned; steps before a sequence
// starts keep the zero state through an activity mask.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "xqsv/config.hpp"
#include "xqsv/error.hpp"
#include "xqsv/random.hpp"

namespace xqsv {

enum class Mode { Train, Infer };

/// Probability vector over the vocabulary.
struct PredictionDistribution {
  std::vector<double> probs;
  bool filtered = false;
};

namespace detail {

template <typename Mat>
void apply_activation(Activation act, Mat& m) {
  using S = typename Mat::Scalar;
  switch (act) {
    case Activation::ReLU: m = m.cwiseMax(S(0)); break;
    case Activation::Tanh: m = m.array().tanh().matrix(); break;
    case Activation::Linear: break;
    case Activation::Softmax:
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        auto col = m.col(c);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
      }
      break;
  }
}

/// Gradient w.r.t. the pre-activation given the pre-activation `z`, output `a` and upstream `d`.
template <typename Mat>
Mat activation_backward(Activation act, const Mat& z, const Mat& a, const Mat& d) {
  using S = typename Mat::Scalar;
  switch (act) {
    case Activation::ReLU: return (z.array() > S(0)).select(d, Mat::Zero(d.rows(), d.cols()));
    case Activation::Tanh: return (d.array() * (S(1) - a.array().square())).matrix();
    case Activation::Linear: return d;
    case Activation::Softmax: {
      Mat out(d.rows(), d.cols());
      for (Eigen::Index c = 0; c < d.cols(); ++c) {
        const S dot = a.col(c).dot(d.col(c));
        out.col(c) = (a.col(c).array() * (d.col(c).array() - dot)).matrix();
      }
      return out;
    }
  }
  return d;
}

template <typename Mat>
Mat sigmoid(const Mat& m) {
  using S = typename Mat::Scalar;
  return (S(1) / (S(1) + (-m.array()).exp())).matrix();
}

}  // namespace detail

template <typename S>
class Network {
 public:
  using Scalar = S;
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

  static constexpr S kBatchNormEps = S(1e-5);
  static constexpr S kBatchNormMomentum = S(0.1);

  struct TensorInfo {
    std::string name;
    bool trainable;
    bool regularized;  // included in the fc_reg penalty
  };

  /// Everything the backward pass needs from one forward pass.
  struct Cache {
    int batch = 0;
    std::vector<std::vector<int>> tokens;  // [step][sample], -1 before the sequence starts
    std::vector<RowVec> active;
    std::vector<Mat> x, h_prev, c_prev, gates, c_new, tanh_c, gru_hn;
    Mat h_final, rnn_mask, rnn_pre, rnn_out;
    Mat bn_xhat, bn_out;
    Mat bn_mean, bn_var_biased, bn_inv_std;
    std::vector<Mat> fc_in, fc_pre, fc_act, fc_mask;
    Mat head_in, probs;
  };

  Network(const StructureConfig& config, int vocab_size, std::uint64_t seed, bool any_width = false)
      : config_(config), vocab_size_(vocab_size) {
    config_.validate(any_width);
    if (vocab_size < 2) throw Error(ErrorCode::InvalidConfig, "vocabulary too small");
    const int h = config_.rnn_hidden;
    const int e = input_width();
    const int gates = is_lstm(config_.rnn) ? 4 : 3;

    infos_.push_back({"embedding", !config_.one_hot, false});
    tensors_.push_back(Mat(e, vocab_size + 1));
    infos_.push_back({"rnn.w_input", true, false});
    tensors_.push_back(Mat(gates * h, e));
    infos_.push_back({"rnn.w_hidden", true, false});
    tensors_.push_back(Mat(gates * h, h));
    infos_.push_back({"rnn.b_input", true, false});
    tensors_.push_back(Mat(gates * h, 1));
    if (!is_lstm(config_.rnn)) {
      infos_.push_back({"rnn.b_hidden", true, false});
      tensors_.push_back(Mat(gates * h, 1));
    }
    if (config_.batch_norm) {
      for (const char* n : {"bn.gamma", "bn.beta", "bn.running_mean", "bn.running_var"}) {
        const bool trainable = std::string(n).find("running") == std::string::npos;
        infos_.push_back({n, trainable, false});
        tensors_.push_back(Mat(h, 1));
      }
    }
    for (int l = 0; l < config_.num_fc; ++l) {
      infos_.push_back({"fc" + std::to_string(l) + ".w", true, true});
      tensors_.push_back(Mat(h, h));
      infos_.push_back({"fc" + std::to_string(l) + ".b", true, false});
      tensors_.push_back(Mat(h, 1));
    }
    infos_.push_back({"out.w", true, true});
    tensors_.push_back(Mat(vocab_size, h));
    infos_.push_back({"out.b", true, false});
    tensors_.push_back(Mat(vocab_size, 1));
    initialize(seed);
  }

  const StructureConfig& config() const { return config_; }
  int vocab_size() const { return vocab_size_; }
  int hidden() const { return config_.rnn_hidden; }
  int input_width() const { return config_.one_hot ? vocab_size_ + 1 : config_.embedding; }
  int start_token() const { return vocab_size_; }

  std::size_t tensor_count() const { return tensors_.size(); }
  const TensorInfo& info(std::size_t i) const { return infos_[i]; }
  Mat& tensor(std::size_t i) { return tensors_[i]; }
  const Mat& tensor(std::size_t i) const { return tensors_[i]; }

  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < infos_.size(); ++i) {
      if (infos_[i].name == name) return i;
    }
    throw Error(ErrorCode::InvalidConfig, "no tensor named " + name);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      if (infos_[i].trainable) n += static_cast<std::size_t>(tensors_[i].size());
    }
    return n;
  }

  bool all_finite() const {
    return std::all_of(tensors_.begin(), tensors_.end(), [](const Mat& m) { return m.allFinite(); });
  }

  /// Copy with another scalar type (e.g. float weights promoted for checking).
  template <typename T>
  Network<T> cast() const {
    Network<T> out(config_, vocab_size_, 0, true);
    for (std::size_t i = 0; i < tensors_.size(); ++i) out.tensor(i) = tensors_[i].template cast<T>();
    return out;
  }

  /// Forward pass over a batch. In Train mode batch norm uses batch statistics
  /// and dropout is applied when `dropout_rng` is given. Returns (|V| x batch) probabilities.
  Mat forward_batch(std::span<const std::span<const int>> histories, Mode mode, Rng* dropout_rng = nullptr,
                    Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    run_recurrent(histories, c);
    run_head(mode, dropout_rng, c);
    return c.probs;
  }

  /// Single-history prediction.
  PredictionDistribution forward(std::span<const int> history, Mode mode, Rng* dropout_rng = nullptr) const {
    const std::span<const int> one[1] = {history};
    const Mat probs = forward_batch(one, mode, dropout_rng);
    PredictionDistribution d;
    d.probs.resize(static_cast<std::size_t>(vocab_size_));
    for (int i = 0; i < vocab_size_; ++i) d.probs[i] = static_cast<double>(probs(i, 0));
    return d;
  }

  /// Logits before the final softmax, for the equivalence checks.
  Mat logits(std::span<const std::span<const int>> histories, Mode mode) const {
    Cache c;
    run_recurrent(histories, c);
    run_head(mode, nullptr, c);
    return out_w() * c.head_in + out_b().replicate(1, c.batch);
  }

  /// Sum of squares of the penalised weights.
  S regularization_sum() const {
    S total = 0;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      if (infos_[i].regularized) total += tensors_[i].squaredNorm();
    }
    return total;
  }

  /// Mean cross-entropy of the unfiltered softmax plus fc_reg times the
  /// penalty. When `grads` is given it receives d(loss)/d(tensor) for every
  /// tensor (zero for non-trainable ones).
  S loss(std::span<const std::span<const int>> histories, std::span<const int> targets, Mode mode,
         Rng* dropout_rng = nullptr, std::vector<Mat>* grads = nullptr, Cache* cache_out = nullptr) const {
    if (histories.empty() || histories.size() != targets.size()) {
      throw Error(ErrorCode::InvalidConfig, "loss needs a non-empty batch with one target per history");
    }
    Cache local;
    Cache& c = cache_out ? *cache_out : local;
    forward_batch(histories, mode, dropout_rng, &c);
    const int b = c.batch;
    S ce = 0;
    for (int j = 0; j < b; ++j) {
      check_index(targets[j]);
      ce -= std::log(std::max(c.probs(targets[j], j), std::numeric_limits<S>::min()));
    }
    const S total = ce / S(b) + S(config_.fc_reg) * regularization_sum();
    if (grads) backward(targets, mode, c, *grads);
    return total;
  }

  /// Moves the batch-norm running statistics towards a training batch.
  void update_running_stats(const Cache& c) {
    if (!config_.batch_norm || c.batch < 1) return;
    const S n = S(c.batch);
    const S unbias = c.batch > 1 ? n / (n - S(1)) : S(1);
    tensor(find("bn.running_mean")) =
        (S(1) - kBatchNormMomentum) * tensor(find("bn.running_mean")) + kBatchNormMomentum * c.bn_mean;
    tensor(find("bn.running_var")) = (S(1) - kBatchNormMomentum) * tensor(find("bn.running_var")) +
                                     kBatchNormMomentum * unbias * c.bn_var_biased;
  }

 private:
  const Mat& emb() const { return tensors_[0]; }
  const Mat& w_in() const { return tensors_[1]; }
  const Mat& w_hid() const { return tensors_[2]; }
  const Mat& b_in() const { return tensors_[3]; }
  const Mat& b_hid() const { return tensors_[4]; }
  std::size_t bn_index() const { return is_lstm(config_.rnn) ? 4 : 5; }
  std::size_t fc_index() const { return bn_index() + (config_.batch_norm ? 4 : 0); }
  const Mat& out_w() const { return tensors_[tensors_.size() - 2]; }
  const Mat& out_b() const { return tensors_[tensors_.size() - 1]; }

  void check_index(int token) const {
    if (token < 0 || token >= vocab_size_) {
      throw Error(ErrorCode::IndexOutOfRange, "token index " + std::to_string(token));
    }
  }

  void initialize(std::uint64_t seed) {
    Rng rng = make_rng(seed, 7);
    const int h = config_.rnn_hidden;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      Mat& m = tensors_[i];
      const std::string& name = infos_[i].name;
      if (name == "embedding") {
        if (config_.one_hot) {
          m.setIdentity();
          continue;
        }
        fill_uniform(m, S(1), rng);
      } else if (name == "bn.gamma" || name == "bn.running_var") {
        m.setOnes();
      } else if (name == "bn.beta" || name == "bn.running_mean") {
        m.setZero();
      } else if (name == "rnn.w_input") {
        fill_uniform(m, S(1) / std::sqrt(S(input_width())), rng);
      } else if (name.rfind("rnn.", 0) == 0) {
        fill_uniform(m, S(1) / std::sqrt(S(h)), rng);
      } else {
        // fc*.w / fc*.b / out.*: fan-in is the layer input width
        fill_uniform(m, S(1) / std::sqrt(S(h)), rng);
      }
    }
  }

  static void fill_uniform(Mat& m, S limit, Rng& rng) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<S>(uniform(rng, -limit, limit));
    }
  }

  Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) const {
    Mat mask(rows, cols);
    const S keep_scale = S(1.0 / (1.0 - p));
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = uniform01(*rng) < p ? S(0) : keep_scale;
    }
    return mask;
  }

  void run_recurrent(std::span<const std::span<const int>> histories, Cache& c) const {
    const int b = static_cast<int>(histories.size());
    const int h = config_.rnn_hidden;
    const bool lstm = is_lstm(config_.rnn);
    const bool reversed = is_backward(config_.rnn);
    c.batch = b;

    std::size_t steps = 1;
    for (const auto& x : histories) steps = std::max(steps, x.size());
    c.tokens.assign(steps, std::vector<int>(static_cast<std::size_t>(b), -1));
    for (int j = 0; j < b; ++j) {
      const auto& x = histories[j];
      if (x.empty()) {
        c.tokens[steps - 1][j] = start_token();
        continue;
      }
      const std::size_t offset = steps - x.size();
      for (std::size_t t = 0; t < x.size(); ++t) {
        const int token = reversed ? x[x.size() - 1 - t] : x[t];
        check_index(token);
        c.tokens[offset + t][j] = token;
      }
    }

    for (auto* v : {&c.x, &c.h_prev, &c.c_prev, &c.gates, &c.c_new, &c.tanh_c, &c.gru_hn}) v->assign(steps, Mat());
    c.active.assign(steps, RowVec());
    Mat hs = Mat::Zero(h, b);
    Mat cs = Mat::Zero(h, b);
    for (std::size_t t = 0; t < steps; ++t) {
      Mat x = Mat::Zero(input_width(), b);
      RowVec active = RowVec::Zero(b);
      for (int j = 0; j < b; ++j) {
        const int token = c.tokens[t][j];
        if (token < 0) continue;
        x.col(j) = emb().col(token);
        active(j) = S(1);
      }
      Mat gi = w_in() * x;
      gi.colwise() += b_in().col(0);
      Mat gh = w_hid() * hs;
      c.h_prev[t] = hs;
      if (lstm) {
        Mat g = gi + gh;
        Mat acts(4 * h, b);
        acts.topRows(h) = detail::sigmoid(Mat(g.topRows(h)));
        acts.middleRows(h, h) = detail::sigmoid(Mat(g.middleRows(h, h)));
        acts.middleRows(2 * h, h) = g.middleRows(2 * h, h).array().tanh().matrix();
        acts.bottomRows(h) = detail::sigmoid(Mat(g.bottomRows(h)));
        Mat c_new = (acts.middleRows(h, h).array() * cs.array() +
                     acts.topRows(h).array() * acts.middleRows(2 * h, h).array())
                        .matrix();
        Mat tanh_c = c_new.array().tanh().matrix();
        Mat h_new = (acts.bottomRows(h).array() * tanh_c.array()).matrix();
        c.c_prev[t] = cs;
        Mat dc = c_new - cs;
        dc.array().rowwise() *= active.array();
        cs += dc;
        c.gates[t] = std::move(acts);
        c.c_new[t] = std::move(c_new);
        c.tanh_c[t] = std::move(tanh_c);
        Mat dh = h_new - hs;
        dh.array().rowwise() *= active.array();
        hs += dh;
      } else {
        gh.colwise() += b_hid().col(0);
        Mat acts(3 * h, b);
        acts.topRows(h) = detail::sigmoid(Mat(gi.topRows(h) + gh.topRows(h)));
        acts.middleRows(h, h) = detail::sigmoid(Mat(gi.middleRows(h, h) + gh.middleRows(h, h)));
        Mat hn = gh.bottomRows(h);
        acts.bottomRows(h) =
            (gi.bottomRows(h).array() + acts.topRows(h).array() * hn.array()).tanh().matrix();
        const auto z = acts.middleRows(h, h).array();
        Mat h_new = ((S(1) - z) * acts.bottomRows(h).array() + z * hs.array()).matrix();
        c.gates[t] = std::move(acts);
        c.gru_hn[t] = std::move(hn);
        Mat dh = h_new - hs;
        dh.array().rowwise() *= active.array();
        hs += dh;
      }
      c.x[t] = std::move(x);
      c.active[t] = std::move(active);
    }
    c.h_final = std::move(hs);
  }

  void run_head(Mode mode, Rng* dropout_rng, Cache& c) const {
    const int b = c.batch;
    const bool train = mode == Mode::Train;
    const bool drop = train && dropout_rng != nullptr;

    c.rnn_pre = c.h_final;
    if (drop && config_.rnn_dropout > 0) {
      c.rnn_mask = dropout_mask(c.rnn_pre.rows(), b, config_.rnn_dropout, dropout_rng);
      c.rnn_pre = c.rnn_pre.cwiseProduct(c.rnn_mask);
    } else {
      c.rnn_mask.resize(0, 0);
    }
    c.rnn_out = c.rnn_pre;
    detail::apply_activation(config_.rnn_activation, c.rnn_out);

    Mat a = c.rnn_out;
    if (config_.batch_norm) {
      const std::size_t k = bn_index();
      const Mat& gamma = tensors_[k];
      const Mat& beta = tensors_[k + 1];
      if (train) {
        c.bn_mean = a.rowwise().mean();
        Mat centered = a.colwise() - c.bn_mean.col(0);
        c.bn_var_biased = centered.array().square().rowwise().mean().matrix();
        c.bn_inv_std = (c.bn_var_biased.array() + kBatchNormEps).rsqrt().matrix();
        c.bn_xhat = (centered.array().colwise() * c.bn_inv_std.col(0).array()).matrix();
      } else {
        const Mat& mean = tensors_[k + 2];
        const Mat& var = tensors_[k + 3];
        Mat inv = (var.array() + kBatchNormEps).rsqrt().matrix();
        c.bn_xhat = ((a.colwise() - mean.col(0)).array().colwise() * inv.col(0).array()).matrix();
      }
      a = (c.bn_xhat.array().colwise() * gamma.col(0).array()).matrix();
      a.colwise() += beta.col(0);
      c.bn_out = a;
    }

    c.fc_in.assign(static_cast<std::size_t>(config_.num_fc), Mat());
    c.fc_pre = c.fc_in;
    c.fc_act = c.fc_in;
    c.fc_mask = c.fc_in;
    for (int l = 0; l < config_.num_fc; ++l) {
      const std::size_t k = fc_index() + 2 * static_cast<std::size_t>(l);
      c.fc_in[l] = a;
      Mat z = tensors_[k] * a;
      z.colwise() += tensors_[k + 1].col(0);
      c.fc_pre[l] = z;
      detail::apply_activation(config_.fc_activation, z);
      c.fc_act[l] = z;
      if (drop && config_.fc_dropout > 0) {
        c.fc_mask[l] = dropout_mask(z.rows(), b, config_.fc_dropout, dropout_rng);
        z = z.cwiseProduct(c.fc_mask[l]);
      }
      a = std::move(z);
    }
    c.head_in = a;
    Mat logits = out_w() * a;
    logits.colwise() += out_b().col(0);
    detail::apply_activation(Activation::Softmax, logits);
    c.probs = std::move(logits);
  }

  void backward(std::span<const int> targets, Mode mode, const Cache& c, std::vector<Mat>& grads) const {
    const int b = c.batch;
    const int h = config_.rnn_hidden;
    grads.resize(tensors_.size());
    for (std::size_t i = 0; i < tensors_.size(); ++i) grads[i] = Mat::Zero(tensors_[i].rows(), tensors_[i].cols());
    const S reg2 = S(2) * S(config_.fc_reg);

    Mat d = c.probs;
    for (int j = 0; j < b; ++j) d(targets[j], j) -= S(1);
    d /= S(b);

    grads[tensors_.size() - 2] = d * c.head_in.transpose() + reg2 * out_w();
    grads[tensors_.size() - 1] = d.rowwise().sum();
    Mat da = out_w().transpose() * d;

    for (int l = config_.num_fc - 1; l >= 0; --l) {
      const std::size_t k = fc_index() + 2 * static_cast<std::size_t>(l);
      if (c.fc_mask[l].size()) da = da.cwiseProduct(c.fc_mask[l]);
      Mat dz = detail::activation_backward(config_.fc_activation, c.fc_pre[l], c.fc_act[l], da);
      grads[k] = dz * c.fc_in[l].transpose() + reg2 * tensors_[k];
      grads[k + 1] = dz.rowwise().sum();
      da = tensors_[k].transpose() * dz;
    }

    if (config_.batch_norm) {
      const std::size_t k = bn_index();
      const Mat& gamma = tensors_[k];
      grads[k] = (da.cwiseProduct(c.bn_xhat)).rowwise().sum();
      grads[k + 1] = da.rowwise().sum();
      Mat dxhat = (da.array().colwise() * gamma.col(0).array()).matrix();
      if (mode == Mode::Train) {
        const S n = S(b);
        Mat sum_d = dxhat.rowwise().sum();
        Mat sum_dx = dxhat.cwiseProduct(c.bn_xhat).rowwise().sum();
        Mat dx = (n * dxhat).colwise() - sum_d.col(0);
        dx -= (c.bn_xhat.array().colwise() * sum_dx.col(0).array()).matrix();
        da = (dx.array().colwise() * (c.bn_inv_std.col(0).array() / n)).matrix();
      } else {
        const Mat& var = tensors_[k + 3];
        Mat inv = (var.array() + kBatchNormEps).rsqrt().matrix();
        da = (dxhat.array().colwise() * inv.col(0).array()).matrix();
      }
    }

    Mat dh = detail::activation_backward(config_.rnn_activation, c.rnn_pre, c.rnn_out, da);
    if (c.rnn_mask.size()) dh = dh.cwiseProduct(c.rnn_mask);

    Mat& g_emb = grads[0];
    Mat& g_win = grads[1];
    Mat& g_whid = grads[2];
    Mat& g_bin = grads[3];
    const bool lstm = is_lstm(config_.rnn);
    Mat dc = Mat::Zero(h, b);
    for (std::size_t t = c.x.size(); t-- > 0;) {
      const RowVec& active = c.active[t];
      Mat dh_new = dh;
      dh_new.array().rowwise() *= active.array();
      Mat dh_prev = dh - dh_new;  // inactive columns pass straight through
      Mat dx;
      if (lstm) {
        const Mat& acts = c.gates[t];
        const auto i_g = acts.topRows(h).array();
        const auto f_g = acts.middleRows(h, h).array();
        const auto g_g = acts.middleRows(2 * h, h).array();
        const auto o_g = acts.bottomRows(h).array();
        Mat dc_new = dc;
        dc_new.array().rowwise() *= active.array();
        Mat dc_prev = dc - dc_new;
        dc_new.array() += dh_new.array() * o_g * (S(1) - c.tanh_c[t].array().square());
        Mat dg(4 * h, b);
        dg.topRows(h) = (dc_new.array() * g_g * i_g * (S(1) - i_g)).matrix();
        dg.middleRows(h, h) = (dc_new.array() * c.c_prev[t].array() * f_g * (S(1) - f_g)).matrix();
        dg.middleRows(2 * h, h) = (dc_new.array() * i_g * (S(1) - g_g.square())).matrix();
        dg.bottomRows(h) = (dh_new.array() * c.tanh_c[t].array() * o_g * (S(1) - o_g)).matrix();
        dc_prev.array() += dc_new.array() * f_g;
        dc = std::move(dc_prev);
        g_win.noalias() += dg * c.x[t].transpose();
        g_whid.noalias() += dg * c.h_prev[t].transpose();
        g_bin += dg.rowwise().sum();
        dh_prev.noalias() += w_hid().transpose() * dg;
        dx = w_in().transpose() * dg;
      } else {
        const Mat& acts = c.gates[t];
        const auto r = acts.topRows(h).array();
        const auto z = acts.middleRows(h, h).array();
        const auto nn = acts.bottomRows(h).array();
        const auto hp = c.h_prev[t].array();
        Mat dn_pre = (dh_new.array() * (S(1) - z) * (S(1) - nn.square())).matrix();
        Mat dz_pre = (dh_new.array() * (hp - nn) * z * (S(1) - z)).matrix();
        Mat dr_pre = (dn_pre.array() * c.gru_hn[t].array() * r * (S(1) - r)).matrix();
        dh_prev.array() += dh_new.array() * z;
        Mat dgi(3 * h, b), dgh(3 * h, b);
        dgi.topRows(h) = dr_pre;
        dgi.middleRows(h, h) = dz_pre;
        dgi.bottomRows(h) = dn_pre;
        dgh.topRows(h) = dr_pre;
        dgh.middleRows(h, h) = dz_pre;
        dgh.bottomRows(h) = (dn_pre.array() * r).matrix();
        g_win.noalias() += dgi * c.x[t].transpose();
        g_bin += dgi.rowwise().sum();
        g_whid.noalias() += dgh * c.h_prev[t].transpose();
        grads[4] += dgh.rowwise().sum();
        dh_prev.noalias() += w_hid().transpose() * dgh;
        dx = w_in().transpose() * dgi;
      }
      if (infos_[0].trainable) {
        for (int j = 0; j < b; ++j) {
          const int token = c.tokens[t][j];
          if (token >= 0) g_emb.col(token) += dx.col(j);
        }
      }
      dh = std::move(dh_prev);
    }
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      if (!infos_[i].trainable) grads[i].setZero();
    }
  }

  StructureConfig config_;
  int vocab_size_;
  std::vector<TensorInfo> infos_;
  std::vector<Mat> tensors_;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst_tensor;
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps entries
/// whose true gradient is below finite-difference resolution from dominating.
inline double gradient_relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares analytic gradients of the training loss (batch statistics,
/// dropout disabled) against central differences at 64-bit precision over
/// `count` randomly chosen trainable parameters.
inline GradientCheckResult gradient_check(const StructureConfig& config, std::uint64_t seed, int vocab_size = 13,
                                          std::size_t count = 240, double step = 1e-5) {
  Network<double> net(config, vocab_size, seed, true);
  Rng rng = make_rng(seed, 11);
  const std::size_t window = config.memory ? static_cast<std::size_t>(*config.memory) : 8;
  std::vector<std::vector<int>> xs;
  std::vector<int> ys;
  for (std::size_t j = 0; j < 6; ++j) {
    const std::size_t len = j == 0 ? 0 : 1 + uniform_index(rng, window);
    std::vector<int> x;
    for (std::size_t t = 0; t < len; ++t) x.push_back(static_cast<int>(uniform_index(rng, vocab_size)));
    xs.push_back(std::move(x));
    ys.push_back(static_cast<int>(uniform_index(rng, vocab_size)));
  }
  const std::vector<std::span<const int>> batch(xs.begin(), xs.end());
  std::vector<Eigen::MatrixXd> grads;
  net.loss(batch, ys, Mode::Train, nullptr, &grads);

  std::vector<std::pair<std::size_t, Eigen::Index>> params;
  for (std::size_t t = 0; t < net.tensor_count(); ++t) {
    if (!net.info(t).trainable) continue;
    for (Eigen::Index i = 0; i < net.tensor(t).size(); ++i) params.emplace_back(t, i);
  }
  shuffle(params, rng);
  if (params.size() > count) params.resize(count);

  GradientCheckResult out;
  for (const auto& [t, i] : params) {
    double& w = net.tensor(t).data()[i];
    const double original = w;
    w = original + step;
    const double up = net.loss(batch, ys, Mode::Train);
    w = original - step;
    const double down = net.loss(batch, ys, Mode::Train);
    w = original;
    const double err = gradient_relative_error(grads[t].data()[i], (up - down) / (2 * step));
    if (err > out.max_relative_error) {
      out.max_relative_error = err;
      out.worst_tensor = net.info(t).name;
    }
    ++out.checked;
  }
  return out;
}

}  // namespace xqsv
