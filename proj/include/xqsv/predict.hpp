#pragma once

// Locally-illegal-move filter and move selection (argmax or sampling).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "xqsv/movespace.hpp"
#include "xqsv/network.hpp"

namespace xqsv {

/// Zeroes entries outside `mask` and renormalizes; throws NoLegalMove when
/// the mask is empty. When the model put no mass on any legal move the
/// result is uniform over the legal moves.
inline PredictionDistribution filter(const PredictionDistribution& dist, const std::vector<bool>& mask) {
  if (mask.size() != dist.probs.size()) throw Error(ErrorCode::InvalidConfig, "mask size differs from distribution");
  PredictionDistribution out;
  out.filtered = true;
  out.probs.assign(dist.probs.size(), 0.0);
  double total = 0;
  std::size_t legal = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++legal;
    out.probs[i] = dist.probs[i];
    total += dist.probs[i];
  }
  if (legal == 0) throw Error(ErrorCode::NoLegalMove, "no locally legal move");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.probs[i] = total > 0 ? out.probs[i] / total : 1.0 / static_cast<double>(legal);
  }
  return out;
}

/// Lowest index among the maxima.
inline std::size_t argmax_index(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

struct PredictPolicy {
  enum class Kind { Argmax, Sample } kind = Kind::Argmax;
  std::uint64_t seed = 0;

  static PredictPolicy argmax() { return {}; }
  static PredictPolicy sample(std::uint64_t seed) { return {Kind::Sample, seed}; }
};

/// Index chosen from a distribution; sampling draws from `rng` when given,
/// otherwise from a generator seeded with the policy seed.
inline std::size_t choose_index(const PredictionDistribution& dist, const PredictPolicy& policy, Rng* rng = nullptr) {
  if (policy.kind == PredictPolicy::Kind::Argmax) return argmax_index(dist.probs);
  if (rng) return sample_index(dist.probs, *rng);
  Rng local = make_rng(policy.seed, 3);
  return sample_index(dist.probs, local);
}

/// The history the model sees: at most m most recent moves.
inline std::span<const int> model_window(std::span<const int> history, const MemoryCapacity& m) {
  if (!m || history.size() <= static_cast<std::size_t>(*m)) return history;
  return history.subspan(history.size() - static_cast<std::size_t>(*m));
}

/// Filtered inference distribution for a position reached by `history`.
template <typename S>
PredictionDistribution filtered_distribution(const Network<S>& net, std::span<const int> history,
                                             const GameState& state,
                                             const MoveVocabulary& vocab = standard_vocabulary()) {
  const auto dist = net.forward(model_window(history, net.config().memory), Mode::Infer);
  return filter(dist, locally_legal_mask(state, vocab));
}

/// Chooses a move for the side to move in `state`.
template <typename S>
MoveToken predict(const Network<S>& net, std::span<const int> history, const GameState& state,
                  const PredictPolicy& policy, Rng* rng = nullptr,
                  const MoveVocabulary& vocab = standard_vocabulary()) {
  const auto dist = filtered_distribution(net, history, state, vocab);
  return vocab.decode(static_cast<int>(choose_index(dist, policy, rng)));
}

}  // namespace xqsv
