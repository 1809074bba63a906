#include <gtest/gtest.h>

#include <cmath>

#include "net_oracle.hpp"
#include "xqsv/network.hpp"

using namespace xqsv;

namespace {

constexpr int kVocab = 11;

StructureConfig small(RnnKind kind, bool bn, Activation fc, int num_fc = 2, int hidden = 6) {
  StructureConfig c;
  c.rnn = kind;
  c.batch_norm = bn;
  c.fc_activation = fc;
  c.num_fc = num_fc;
  c.rnn_hidden = hidden;
  c.embedding = 4;
  return c;
}

std::vector<std::vector<int>> histories(std::uint64_t seed, int count, int max_len) {
  Rng rng = make_rng(seed);
  std::vector<std::vector<int>> out;
  for (int i = 0; i < count; ++i) {
    std::vector<int> x(uniform_index(rng, static_cast<std::uint64_t>(max_len) + 1));
    for (int& v : x) v = static_cast<int>(uniform_index(rng, kVocab));
    out.push_back(x);
  }
  return out;
}

std::vector<std::span<const int>> spans(const std::vector<std::vector<int>>& xs) {
  return {xs.begin(), xs.end()};
}

/// Gives batch-norm running statistics values away from their (0, 1) start.
void perturb_running_stats(Network<double>& net, std::uint64_t seed) {
  if (!net.config().batch_norm) return;
  Rng rng = make_rng(seed, 5);
  for (auto& v : net.tensor(net.find("bn.running_mean")).reshaped()) v = uniform(rng, -0.3, 0.3);
  for (auto& v : net.tensor(net.find("bn.running_var")).reshaped()) v = uniform(rng, 0.5, 2.0);
  for (auto& v : net.tensor(net.find("bn.gamma")).reshaped()) v = uniform(rng, 0.5, 1.5);
}

const RnnKind kKinds[] = {RnnKind::LSTM, RnnKind::GRU, RnnKind::BackwardLSTM, RnnKind::BackwardGRU};
const Activation kActs[] = {Activation::ReLU, Activation::Softmax, Activation::Linear, Activation::Tanh};

}  // namespace

TEST(Network, ParameterCountFormula) {
  for (auto kind : kKinds) {
    for (bool bn : {false, true}) {
      for (int nfc : {0, 1, 3}) {
        for (bool one_hot : {false, true}) {
          auto cfg = small(kind, bn, Activation::ReLU, nfc, 7);
          cfg.one_hot = one_hot;
          const Network<double> net(cfg, kVocab, 1, true);
          const std::size_t v = kVocab, h = 7, e = one_hot ? v + 1 : 4;
          const bool gru = kind == RnnKind::GRU || kind == RnnKind::BackwardGRU;
          const std::size_t g = gru ? 3 : 4;
          std::size_t expected = (one_hot ? 0 : e * (v + 1)) + g * h * e + g * h * h + g * h * (gru ? 2 : 1);
          expected += bn ? 2 * h : 0;
          expected += static_cast<std::size_t>(nfc) * (h * h + h);
          expected += v * h + v;
          EXPECT_EQ(net.parameter_count(), expected);
        }
      }
    }
  }
}

TEST(Network, ForwardMatchesScalarReference) {
  const auto xs = histories(3, 8, 7);
  for (auto kind : kKinds) {
    for (bool bn : {false, true}) {
      for (auto act : kActs) {
        auto cfg = small(kind, bn, act);
        cfg.rnn_activation = act;
        Network<double> net(cfg, kVocab, 9, true);
        perturb_running_stats(net, 2);
        for (const auto& x : xs) {
          const auto got = net.forward(x, Mode::Infer);
          const auto want = oracle::forward(net, x);
          for (int k = 0; k < kVocab; ++k) EXPECT_NEAR(got.probs[k], want[k], 1e-12);
        }
      }
    }
  }
}

TEST(Network, BatchMatchesSingleInInference) {
  const auto xs = histories(4, 12, 9);
  for (auto kind : kKinds) {
    Network<double> net(small(kind, true, Activation::Tanh), kVocab, 3, true);
    perturb_running_stats(net, 4);
    const auto batch = net.forward_batch(spans(xs), Mode::Infer);
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const auto one = net.forward(xs[j], Mode::Infer);
      for (int k = 0; k < kVocab; ++k) EXPECT_NEAR(batch(k, static_cast<int>(j)), one.probs[k], 1e-12);
    }
  }
}

TEST(Network, BackwardKindReadsReversedHistory) {
  const auto xs = histories(5, 6, 8);
  for (auto [fwd, bwd] : {std::pair{RnnKind::LSTM, RnnKind::BackwardLSTM}, std::pair{RnnKind::GRU, RnnKind::BackwardGRU}}) {
    const Network<double> a(small(fwd, false, Activation::ReLU), kVocab, 6, true);
    Network<double> b(small(bwd, false, Activation::ReLU), kVocab, 99, true);
    for (std::size_t t = 0; t < a.tensor_count(); ++t) b.tensor(t) = a.tensor(t);
    auto reversed = xs;
    for (auto& x : reversed) std::reverse(x.begin(), x.end());
    const auto la = a.logits(spans(reversed), Mode::Infer);
    const auto lb = b.logits(spans(xs), Mode::Infer);
    EXPECT_LT((la - lb).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Network, DeterministicInitialization) {
  const auto cfg = small(RnnKind::GRU, true, Activation::ReLU);
  const Network<float> a(cfg, kVocab, 42, true), b(cfg, kVocab, 42, true), c(cfg, kVocab, 43, true);
  bool differs = false;
  for (std::size_t t = 0; t < a.tensor_count(); ++t) {
    EXPECT_EQ(a.tensor(t), b.tensor(t));
    differs |= a.tensor(t) != c.tensor(t);
  }
  EXPECT_TRUE(differs);
}

TEST(Network, InitialisationRanges) {
  const Network<double> net(small(RnnKind::LSTM, true, Activation::ReLU, 2, 16), kVocab, 8, true);
  const double bound_h = 1.0 / std::sqrt(16.0);
  EXPECT_LE(net.tensor(net.find("rnn.w_hidden")).cwiseAbs().maxCoeff(), bound_h);
  EXPECT_LE(net.tensor(net.find("out.w")).cwiseAbs().maxCoeff(), bound_h);
  EXPECT_LE(net.tensor(net.find("rnn.w_input")).cwiseAbs().maxCoeff(), 1.0 / std::sqrt(4.0));
  EXPECT_LE(net.tensor(net.find("embedding")).cwiseAbs().maxCoeff(), 1.0);
  EXPECT_TRUE(net.tensor(net.find("bn.running_var")).isOnes());
  EXPECT_TRUE(net.tensor(net.find("bn.running_mean")).isZero());
}

TEST(Network, OneHotInputIsFrozenIdentity) {
  auto cfg = small(RnnKind::LSTM, false, Activation::ReLU);
  cfg.one_hot = true;
  const Network<double> net(cfg, kVocab, 1, true);
  const auto& e = net.tensor(net.find("embedding"));
  EXPECT_TRUE(e.isIdentity());
  EXPECT_FALSE(net.info(net.find("embedding")).trainable);
}

TEST(Network, DistributionsSumToOne) {
  const auto xs = histories(6, 20, 15);
  const Network<float> net(small(RnnKind::BackwardGRU, true, Activation::Softmax), kVocab, 2, true);
  const auto p = net.forward_batch(spans(xs), Mode::Infer);
  for (int j = 0; j < p.cols(); ++j) {
    EXPECT_NEAR(p.col(j).sum(), 1.0f, 1e-5f);
    EXPECT_GE(p.col(j).minCoeff(), 0.0f);
  }
}

TEST(Network, InitialLossNearUniform) {
  // Fresh weights give near-uniform predictions, so the cross-entropy is close to ln|V|.
  StructureConfig cfg;
  cfg.rnn_hidden = 64;
  cfg.fc_reg = 0;
  const int vocab = 753;
  const Network<float> net(cfg, vocab, 1, true);
  const auto xs = histories(7, 32, 10);
  std::vector<int> ys(xs.size());
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = static_cast<int>(i * 17 % vocab);
  const float l = net.loss(spans(xs), ys, Mode::Infer);
  EXPECT_NEAR(l, std::log(static_cast<float>(vocab)), 0.05f);
}

TEST(Network, RegularizationTerm) {
  auto cfg = small(RnnKind::LSTM, false, Activation::ReLU);
  cfg.fc_reg = 0;
  const auto xs = histories(8, 5, 6);
  const std::vector<int> ys = {1, 2, 3, 4, 5};
  Network<double> base(cfg, kVocab, 3, true);
  const double l0 = base.loss(spans(xs), ys, Mode::Infer);
  cfg.fc_reg = 0.005;
  Network<double> reg(cfg, kVocab, 3, true);
  const double l1 = reg.loss(spans(xs), ys, Mode::Infer);
  double sum = 0;
  for (const char* n : {"fc0.w", "fc1.w", "out.w"}) sum += reg.tensor(reg.find(n)).squaredNorm();
  EXPECT_NEAR(l1 - l0, 0.005 * sum, 1e-12);
  EXPECT_NEAR(reg.regularization_sum(), sum, 1e-12);
  for (const char* n : {"fc0.w", "fc1.w", "out.w"}) reg.tensor(reg.find(n)) *= 2.0;
  EXPECT_NEAR(reg.regularization_sum(), 4 * sum, 1e-10);
}

TEST(Network, LossValidatesInputs) {
  const Network<double> net(small(RnnKind::GRU, false, Activation::ReLU), kVocab, 1, true);
  const std::vector<std::vector<int>> xs = {{1, 2}};
  const std::vector<int> bad_target = {kVocab};
  const std::vector<int> two = {1, 2};
  EXPECT_THROW(net.loss(spans(xs), bad_target, Mode::Infer), Error);
  EXPECT_THROW(net.loss(spans(xs), two, Mode::Infer), Error);
  const std::vector<std::vector<int>> bad_history = {{kVocab}};
  const std::vector<int> one = {1};
  EXPECT_THROW(net.loss(spans(bad_history), one, Mode::Infer), Error);
}

TEST(Network, RejectsConfigsOutsideCandidates) {
  auto cfg = small(RnnKind::GRU, false, Activation::ReLU);
  EXPECT_THROW(Network<float>(cfg, kVocab, 1, false), Error);  // width 6 is not a listed candidate
  cfg.rnn_hidden = 512;
  cfg.num_fc = 4;
  EXPECT_THROW(Network<float>(cfg, kVocab, 1, false), Error);
}

TEST(Gradients, FiniteDifferencesSmallGrid) {
  const auto xs = histories(10, 6, 5);
  const std::vector<int> ys = {0, 3, 5, 7, 9, 10};
  for (auto kind : {RnnKind::LSTM, RnnKind::BackwardGRU}) {
    for (bool bn : {false, true}) {
      for (auto act : {Activation::Tanh, Activation::Softmax}) {
        auto cfg = small(kind, bn, act, 2, 5);
        cfg.fc_reg = 0.002;
        const Network<double> net(cfg, kVocab, 12, true);
        const auto r = oracle::finite_difference(net, spans(xs), ys, 120, 3);
        EXPECT_LT(r.max_error, 1e-4) << to_string(kind) << " bn=" << bn << " " << to_string(act);
      }
    }
  }
}

TEST(Gradients, LibraryCheckAgrees) {
  const auto r = gradient_check(small(RnnKind::GRU, true, Activation::ReLU, 1, 5), 4);
  EXPECT_GE(r.checked, 200u);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(Gradients, FloatCastPreservesWeights) {
  const Network<float> f(small(RnnKind::LSTM, true, Activation::ReLU), kVocab, 5, true);
  const auto d = f.cast<double>();
  for (std::size_t t = 0; t < f.tensor_count(); ++t) EXPECT_EQ(d.tensor(t).cast<float>(), f.tensor(t));
}
