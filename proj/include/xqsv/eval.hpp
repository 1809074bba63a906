#pragma once

// Strict and relaxed accuracy metrics, the cross-bin accuracy matrix and
// ablation runners.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xqsv/dataset.hpp"
#include "xqsv/predict.hpp"
#include "xqsv/train.hpp"

namespace xqsv {

/// Position of `y` in the ranking by descending probability, ties broken
/// toward the lower index.
inline std::size_t rank_of(std::span<const double> probs, int y) {
  const double py = probs[static_cast<std::size_t>(y)];
  std::size_t rank = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] > py || (probs[j] == py && j < static_cast<std::size_t>(y))) ++rank;
  }
  return rank;
}

inline bool top_k_correct(std::span<const double> probs, int y, std::size_t k) {
  if (k < 1 || k > probs.size()) throw Error(ErrorCode::InvalidConfig, "k must lie in 1..|V|");
  if (y < 0 || static_cast<std::size_t>(y) >= probs.size()) throw Error(ErrorCode::IndexOutOfRange, "label");
  return rank_of(probs, y) < k;
}

/// Ranking order used by the top-p prefix.
inline std::vector<std::size_t> ranking(std::span<const double> probs) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  return order;
}

/// True iff y lies in the shortest ranking prefix whose mass exceeds p
/// (the whole vocabulary when no prefix does).
inline bool top_p_correct(std::span<const double> probs, int y, double p) {
  if (p < 0 || p > 1) throw Error(ErrorCode::InvalidConfig, "p must lie in [0,1]");
  if (y < 0 || static_cast<std::size_t>(y) >= probs.size()) throw Error(ErrorCode::IndexOutOfRange, "label");
  if (p >= 1) return true;
  double before = 0;
  for (std::size_t i : ranking(probs)) {
    if (i == static_cast<std::size_t>(y)) return true;
    before += probs[i];
    if (before > p) return false;
  }
  return true;
}

struct EvalReport {
  std::string label;  // bin or ablation mode
  std::size_t count = 0;
  double top1 = 0;
  std::map<std::size_t, double> top_k;
  std::map<double, double> top_p;
  bool filtered = false;
  std::size_t anomalies = 0;  // samples whose position had no legal move
};

/// Streams samples in (game, ply) order, replaying each game once to build
/// the legal-move mask when `use_filter` is set.
template <typename S>
EvalReport evaluate(const Network<S>& net, std::span<const TrainingSample> samples,
                    std::span<const EncodedGame> games, std::span<const std::size_t> ks,
                    std::span<const double> ps, bool use_filter, const std::string& label = "",
                    const MoveVocabulary& vocab = standard_vocabulary()) {
  EvalReport rep;
  rep.label = label;
  rep.filtered = use_filter;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(samples[a].game, samples[a].ply) < std::pair(samples[b].game, samples[b].ply);
  });

  std::size_t top1 = 0;
  std::vector<std::size_t> k_hits(ks.size(), 0), p_hits(ps.size(), 0);
  std::uint32_t cur_game = UINT32_MAX;
  std::uint32_t cur_ply = 0;  // plies applied to `state`
  GameState state = initial_state();
  constexpr std::size_t kChunk = 256;
  std::vector<std::span<const int>> xs;
  for (std::size_t start = 0; start < order.size(); start += kChunk) {
    const std::size_t end = std::min(order.size(), start + kChunk);
    xs.clear();
    for (std::size_t i = start; i < end; ++i) xs.emplace_back(samples[order[i]].x);
    const auto probs = net.forward_batch(xs, Mode::Infer);
    for (std::size_t i = start; i < end; ++i) {
      const TrainingSample& s = samples[order[i]];
      PredictionDistribution dist;
      const auto col = probs.col(static_cast<Eigen::Index>(i - start));
      dist.probs.assign(col.data(), col.data() + col.size());
      if (use_filter) {
        if (s.game >= games.size()) throw Error(ErrorCode::IndexOutOfRange, "sample game outside the corpus");
        const EncodedGame& g = games[s.game];
        if (s.game != cur_game || cur_ply > s.ply - 1) {
          cur_game = s.game;
          cur_ply = 0;
          state = initial_state();
        }
        while (cur_ply < s.ply - 1) {
          state = apply_move(state, resolve(vocab.decode(g.moves[cur_ply]), state));
          ++cur_ply;
        }
        try {
          dist = filter(dist, locally_legal_mask(state, vocab));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NoLegalMove) throw;
          ++rep.anomalies;
          continue;
        }
      }
      ++rep.count;
      top1 += argmax_index(dist.probs) == static_cast<std::size_t>(s.y);
      for (std::size_t k = 0; k < ks.size(); ++k) k_hits[k] += top_k_correct(dist.probs, s.y, ks[k]);
      for (std::size_t p = 0; p < ps.size(); ++p) p_hits[p] += top_p_correct(dist.probs, s.y, ps[p]);
    }
  }
  const double n = rep.count ? static_cast<double>(rep.count) : 1.0;
  rep.top1 = static_cast<double>(top1) / n;
  for (std::size_t k = 0; k < ks.size(); ++k) rep.top_k[ks[k]] = static_cast<double>(k_hits[k]) / n;
  for (std::size_t p = 0; p < ps.size(); ++p) rep.top_p[ps[p]] = static_cast<double>(p_hits[p]) / n;
  return rep;
}

/// Entry (i, j): top-1 accuracy of model i on sample set j.
template <typename S>
std::vector<std::vector<double>> cross_elo_matrix(std::span<const Network<S>* const> models,
                                                  std::span<const std::span<const TrainingSample>> datasets,
                                                  std::span<const EncodedGame> games, bool use_filter = true) {
  std::vector<std::vector<double>> out;
  for (const auto* model : models) {
    std::vector<double> row;
    for (const auto& data : datasets) row.push_back(evaluate(*model, data, games, {}, {}, use_filter).top1);
    out.push_back(std::move(row));
  }
  return out;
}

enum class AblationMode { Baseline, NoPartition, PerfectMemory, NoFilter };

inline std::string_view to_string(AblationMode m) {
  switch (m) {
    case AblationMode::Baseline: return "baseline";
    case AblationMode::NoPartition: return "no_partition";
    case AblationMode::PerfectMemory: return "perfect_memory";
    case AblationMode::NoFilter: return "no_filter";
  }
  return "baseline";
}

inline AblationMode parse_ablation(std::string_view s) {
  for (auto m : {AblationMode::Baseline, AblationMode::NoPartition, AblationMode::PerfectMemory, AblationMode::NoFilter}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown ablation mode '" + std::string(s) + "'");
}

struct AblationSetup {
  std::span<const EncodedGame> games;
  std::span<const std::uint8_t> assignment;  // per-game split, see assign_games
  EloBin bin;
  StructureConfig config;
  TrainOptions train;
  std::vector<std::size_t> ks;
  std::vector<double> ps;
  std::uint64_t seed = 0;
  BinPolicy policy = BinPolicy::PerMover;
  bool any_width = false;  // admit reduced hidden widths
};

/// Trains the variant selected by `mode` from scratch and evaluates it on
/// the bin's test games. Baseline and NoFilter share the same trained model
/// when run with the same setup.
inline EvalReport ablation_run(AblationMode mode, const AblationSetup& s) {
  StructureConfig cfg = s.config;
  if (mode == AblationMode::PerfectMemory) cfg.memory = std::nullopt;
  const EloBin train_bin = mode == AblationMode::NoPartition ? EloBin::unbounded() : s.bin;
  const auto train_split = make_split(s.games, s.assignment, cfg.memory, train_bin, s.seed, s.policy);
  const auto eval_split =
      train_bin == s.bin ? train_split : make_split(s.games, s.assignment, cfg.memory, s.bin, s.seed, s.policy);
  Network<float> net(cfg, static_cast<int>(standard_vocabulary().size()), s.seed, s.any_width);
  train(net, train_split.train, train_split.validation, s.train);
  auto rep = evaluate(net, eval_split.test, s.games, s.ks, s.ps, mode != AblationMode::NoFilter,
                      std::string(to_string(mode)));
  return rep;
}

}  // namespace xqsv
