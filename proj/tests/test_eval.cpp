#include <gtest/gtest.h>

#include <numeric>

#include "xqsv/eval.hpp"
#include "xqsv/synthetic.hpp"

using namespace xqsv;

namespace {

/// Membership in the shortest descending prefix whose mass exceeds p,
/// computed from (probability, index) pairs sorted once.
bool oracle_top_p(const std::vector<double>& probs, int y, double p) {
  if (p >= 1) return true;  // rounding may push a partial sum past 1
  std::vector<std::pair<double, int>> v;
  for (std::size_t i = 0; i < probs.size(); ++i) v.emplace_back(-probs[i], static_cast<int>(i));
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  double mass = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    mass -= v[i].first;
    if (mass > p) {
      n = i + 1;
      break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i].second == y) return true;
  }
  return false;
}

bool oracle_top_k(const std::vector<double>& probs, int y, std::size_t k) {
  std::vector<std::pair<double, int>> v;
  for (std::size_t i = 0; i < probs.size(); ++i) v.emplace_back(-probs[i], static_cast<int>(i));
  std::sort(v.begin(), v.end());
  for (std::size_t i = 0; i < k; ++i) {
    if (v[i].second == y) return true;
  }
  return false;
}

std::vector<double> random_distribution(Rng& rng, std::size_t n, bool with_ties) {
  std::vector<double> p(n);
  for (auto& v : p) v = with_ties ? static_cast<double>(uniform_index(rng, 4)) : uniform01(rng);
  p[uniform_index(rng, n)] += 1;
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  return p;
}

StructureConfig small_model() {
  StructureConfig c;
  c.rnn = RnnKind::GRU;
  c.rnn_hidden = 32;
  c.embedding = 16;
  c.num_fc = 1;
  c.fc_activation = Activation::ReLU;
  return c;
}

struct Fixture {
  std::vector<EncodedGame> games;
  DatasetSplit split;
  Network<float> net{small_model(), static_cast<int>(standard_vocabulary().size()), 1, true};
};

const Fixture& trained() {
  static const Fixture f = [] {
    Fixture f;
    const auto weights = preference_weights(3);
    f.games = encode_games(generate_corpus(preference_policy(weights, 0.5), 40, 40, 2, 1500, 1500));
    const auto part = assign_games(f.games.size(), {}, 4);
    f.split = make_split(f.games, part, 5, EloBin::unbounded(), 4);
    TrainOptions opts;
    opts.max_epochs = 8;
    opts.batch_size = 64;
    opts.learning_rate = 3e-3;
    train(f.net, f.split.train, f.split.validation, opts);
    return f;
  }();
  return f;
}

}  // namespace

TEST(TopK, WorkedExample) {
  const std::vector<double> p = {0.1, 0.4, 0.3, 0.2};
  EXPECT_EQ(rank_of(p, 2), 1u);
  EXPECT_FALSE(top_k_correct(p, 2, 1));
  EXPECT_TRUE(top_k_correct(p, 2, 2));
  EXPECT_TRUE(top_k_correct(p, 0, 4));
  EXPECT_THROW(top_k_correct(p, 0, 0), Error);
  EXPECT_THROW(top_k_correct(p, 0, 5), Error);
}

TEST(TopK, TiesGoToLowerIndex) {
  const std::vector<double> p = {0.25, 0.25, 0.25, 0.25};
  EXPECT_TRUE(top_k_correct(p, 0, 1));
  EXPECT_FALSE(top_k_correct(p, 1, 1));
  EXPECT_EQ(argmax_index(p), 0u);
}

TEST(TopP, WorkedExample) {
  const std::vector<double> p = {0.5, 0.3, 0.2};
  EXPECT_TRUE(top_p_correct(p, 0, 0.0));
  EXPECT_FALSE(top_p_correct(p, 1, 0.0));
  EXPECT_TRUE(top_p_correct(p, 1, 0.5));  // 0.5 alone does not exceed 0.5
  EXPECT_FALSE(top_p_correct(p, 2, 0.5));
  EXPECT_TRUE(top_p_correct(p, 2, 0.8));
  EXPECT_TRUE(top_p_correct(p, 2, 1.0));
  EXPECT_THROW(top_p_correct(p, 0, 1.5), Error);
}

TEST(Metrics, AgreeWithOracleAndMonotone) {
  Rng rng = make_rng(8);
  const std::vector<double> ps = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0};
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 30);
    const auto p = random_distribution(rng, n, trial % 2 == 0);
    const int y = static_cast<int>(uniform_index(rng, n));
    bool prev = false;
    for (std::size_t k = 1; k <= n; ++k) {
      const bool hit = top_k_correct(p, y, k);
      EXPECT_EQ(hit, oracle_top_k(p, y, k));
      EXPECT_TRUE(hit || !prev);
      prev = hit;
    }
    EXPECT_TRUE(top_k_correct(p, y, n));
    prev = false;
    for (double q : ps) {
      const bool hit = top_p_correct(p, y, q);
      EXPECT_EQ(hit, oracle_top_p(p, y, q)) << q;
      EXPECT_TRUE(hit || !prev);
      prev = hit;
    }
    EXPECT_EQ(top_p_correct(p, y, 0.0), top_k_correct(p, y, 1));
  }
}

TEST(Filter, RenormalisesOverLegalMoves) {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    PredictionDistribution d;
    d.probs = random_distribution(rng, 20, false);
    std::vector<bool> mask(20);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = uniform01(rng) < 0.3;
    mask[uniform_index(rng, 20)] = true;
    const auto f = filter(d, mask);
    EXPECT_TRUE(f.filtered);
    EXPECT_NEAR(std::accumulate(f.probs.begin(), f.probs.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) EXPECT_EQ(f.probs[i], 0.0);
    }
    EXPECT_TRUE(mask[argmax_index(f.probs)]);
  }
}

TEST(Filter, EdgeCases) {
  PredictionDistribution d;
  d.probs = {1.0, 0.0, 0.0};
  const auto u = filter(d, {false, true, true});
  EXPECT_DOUBLE_EQ(u.probs[1], 0.5);
  EXPECT_DOUBLE_EQ(u.probs[2], 0.5);
  try {
    filter(d, {false, false, false});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoLegalMove);
  }
  EXPECT_THROW(filter(d, {true}), Error);
}

TEST(Sampling, MatchesDistribution) {
  PredictionDistribution d;
  d.probs = {0.05, 0.0, 0.4, 0.15, 0.3, 0.1};
  Rng rng = make_rng(17);
  std::vector<double> counts(d.probs.size(), 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[choose_index(d, PredictPolicy::sample(0), &rng)] += 1;
  double l1 = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) l1 += std::abs(counts[i] / draws - d.probs[i]);
  EXPECT_LT(l1, 0.05);
  EXPECT_EQ(counts[1], 0);
  EXPECT_EQ(choose_index(d, PredictPolicy::argmax()), 2u);
  EXPECT_EQ(choose_index(d, PredictPolicy::sample(5)), choose_index(d, PredictPolicy::sample(5)));
}

TEST(Predict, AlwaysLegal) {
  const auto& f = trained();
  Rng rng = make_rng(3);
  for (const auto& g : std::vector<EncodedGame>(f.games.begin(), f.games.begin() + 5)) {
    GameState s = initial_state();
    for (std::size_t i = 0; i < g.moves.size(); ++i) {
      const std::span<const int> h(g.moves.data(), i);
      for (auto policy : {PredictPolicy::argmax(), PredictPolicy::sample(1)}) {
        const auto t = predict(f.net, h, s, policy, &rng);
        EXPECT_NO_THROW(resolve(t, s));
      }
      s = apply_move(s, resolve(standard_vocabulary().decode(g.moves[i]), s));
    }
  }
  EXPECT_EQ(model_window(std::vector<int>{1, 2, 3, 4, 5, 6, 7}, 5).size(), 5u);
  EXPECT_EQ(model_window(std::vector<int>{1, 2, 3}, std::nullopt).size(), 3u);
}

TEST(Evaluate, FilteredNeverBelowUnfiltered) {
  const auto& f = trained();
  const std::vector<std::size_t> ks = {1, 3, 5, 753};
  const std::vector<double> ps = {0.0, 0.5, 0.9, 1.0};
  const auto a = evaluate(f.net, f.split.test, f.games, ks, ps, true);
  const auto b = evaluate(f.net, f.split.test, f.games, ks, ps, false);
  EXPECT_EQ(a.count, f.split.test.size());
  EXPECT_GE(a.top1, b.top1);
  EXPECT_DOUBLE_EQ(a.top_k.at(1), a.top1);
  EXPECT_DOUBLE_EQ(a.top_k.at(753), 1.0);
  EXPECT_DOUBLE_EQ(a.top_p.at(1.0), 1.0);
  EXPECT_DOUBLE_EQ(a.top_p.at(0.0), a.top1);
  EXPECT_EQ(a.anomalies, 0u);
}

TEST(Evaluate, MatchesPerSampleComputation) {
  const auto& f = trained();
  std::size_t hits = 0;
  for (const auto& s : f.split.test) {
    GameState st = initial_state();
    for (std::uint32_t i = 0; i + 1 < s.ply; ++i) {
      st = apply_move(st, resolve(standard_vocabulary().decode(f.games[s.game].moves[i]), st));
    }
    const auto d = filter(f.net.forward(s.x, Mode::Infer), locally_legal_mask(st));
    hits += argmax_index(d.probs) == static_cast<std::size_t>(s.y);
  }
  const auto rep = evaluate(f.net, f.split.test, f.games, {}, {}, true);
  EXPECT_NEAR(rep.top1, static_cast<double>(hits) / static_cast<double>(f.split.test.size()), 1e-12);
}

TEST(Evaluate, OrderIndependent) {
  const auto& f = trained();
  auto shuffled = f.split.test;
  Rng rng = make_rng(1);
  shuffle(shuffled, rng);
  const std::vector<std::size_t> ks = {2};
  const std::vector<double> ps = {0.5};
  const auto a = evaluate(f.net, f.split.test, f.games, ks, ps, true);
  const auto b = evaluate(f.net, shuffled, f.games, ks, ps, true);
  EXPECT_EQ(a.top1, b.top1);
  EXPECT_EQ(a.top_k, b.top_k);
  EXPECT_EQ(a.top_p, b.top_p);
}

TEST(Evaluate, CrossMatrixShape) {
  const auto& f = trained();
  const Network<float>* models[] = {&f.net, &f.net};
  const std::span<const TrainingSample> sets[] = {f.split.test, f.split.validation, f.split.train};
  const auto m = cross_elo_matrix<float>(models, sets, f.games);
  ASSERT_EQ(m.size(), 2u);
  ASSERT_EQ(m[0].size(), 3u);
  EXPECT_EQ(m[0], m[1]);
  EXPECT_DOUBLE_EQ(m[0][0], evaluate(f.net, f.split.test, f.games, {}, {}, true).top1);
}

TEST(Ablation, ModesRunAndNoFilterIsNotBetter) {
  const auto& f = trained();
  const auto part = assign_games(f.games.size(), {}, 4);
  AblationSetup setup;
  setup.games = f.games;
  setup.assignment = part;
  setup.bin = {1400, 1500};
  setup.config = small_model();
  setup.config.rnn_hidden = 16;
  setup.train.max_epochs = 2;
  setup.train.batch_size = 64;
  setup.ks = {1, 5};
  setup.ps = {0.5};
  setup.any_width = true;
  setup.seed = 5;
  // every game is rated 1500, so the bin (1400,1500] holds them all
  const auto base = ablation_run(AblationMode::Baseline, setup);
  const auto nofilter = ablation_run(AblationMode::NoFilter, setup);
  const auto perfect = ablation_run(AblationMode::PerfectMemory, setup);
  const auto nopart = ablation_run(AblationMode::NoPartition, setup);
  EXPECT_EQ(base.count, nofilter.count);
  EXPECT_GE(base.top1, nofilter.top1);
  EXPECT_TRUE(base.filtered);
  EXPECT_FALSE(nofilter.filtered);
  EXPECT_EQ(perfect.count, base.count);
  EXPECT_EQ(nopart.count, base.count);
  EXPECT_EQ(parse_ablation(to_string(AblationMode::PerfectMemory)), AblationMode::PerfectMemory);
}
