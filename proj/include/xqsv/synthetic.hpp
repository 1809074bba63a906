#pragma once

// Synthetic game corpora from known move policies, for experiments whose
// ground truth is fixed by construction.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xqsv/dataset.hpp"
#include "xqsv/movespace.hpp"
#include "xqsv/notation.hpp"
#include "xqsv/random.hpp"

namespace xqsv {

/// Chooses a vocabulary index among `legal` (sorted, non-empty).
using MovePolicy =
    std::function<int(const GameState& state, std::span<const int> history, const std::vector<int>& legal, Rng& rng)>;

inline MovePolicy uniform_policy() {
  return [](const GameState&, std::span<const int>, const std::vector<int>& legal, Rng& rng) {
    return legal[uniform_index(rng, legal.size())];
  };
}

/// Fixed positive per-token weights drawn from `seed`.
inline std::vector<double> preference_weights(std::uint64_t seed, std::size_t vocab_size = standard_vocabulary().size()) {
  Rng rng = make_rng(seed, 31);
  std::vector<double> w(vocab_size);
  for (auto& v : w) v = uniform(rng, 0.0, 1.0);
  return w;
}

/// With probability `greed` plays the legal move of highest weight,
/// otherwise samples a legal move proportionally to weight^sharpness.
inline MovePolicy preference_policy(std::vector<double> weights, double greed, double sharpness = 1.0) {
  return [weights = std::move(weights), greed, sharpness](const GameState&, std::span<const int>,
                                                          const std::vector<int>& legal, Rng& rng) {
    if (uniform01(rng) < greed) {
      int best = legal.front();
      for (int i : legal) {
        if (weights[i] > weights[best]) best = i;
      }
      return best;
    }
    std::vector<double> w;
    w.reserve(legal.size());
    for (int i : legal) w.push_back(std::pow(weights[i], sharpness));
    return legal[sample_index(w, rng)];
  };
}

/// Plays one game from the initial position until `max_plies` or no legal move.
inline GameRecord play_game(const MovePolicy& policy, Rng& rng, std::size_t max_plies, int red_elo, int black_elo,
                            std::string id, const MoveVocabulary& vocab = standard_vocabulary()) {
  GameRecord rec;
  rec.red_elo = red_elo;
  rec.black_elo = black_elo;
  rec.source_id = std::move(id);
  GameState state = initial_state();
  std::vector<int> history;
  while (history.size() < max_plies) {
    const auto legal = legal_indices(state, vocab);
    if (legal.empty()) break;
    const int choice = policy(state, history, legal, rng);
    const MoveToken& token = vocab.decode(choice);
    state = apply_move(state, resolve(token, state));
    history.push_back(choice);
    rec.moves.push_back(token);
  }
  switch (game_outcome(state)) {
    case Outcome::RedWins: rec.result = GameResult::RedWins; break;
    case Outcome::BlackWins: rec.result = GameResult::BlackWins; break;
    default: rec.result = GameResult::Unknown; break;
  }
  return rec;
}

inline std::vector<GameRecord> generate_corpus(const MovePolicy& policy, std::size_t games, std::size_t max_plies,
                                               std::uint64_t seed, int red_elo, int black_elo,
                                               const std::string& prefix = "g") {
  Rng rng = make_rng(seed, 41);
  std::vector<GameRecord> out;
  out.reserve(games);
  for (std::size_t g = 0; g < games; ++g) {
    out.push_back(play_game(policy, rng, max_plies, red_elo, black_elo, prefix + std::to_string(g)));
  }
  return out;
}

/// A 12-ply cycle returning to the initial position. Each side opens its
/// cycle with a random key move (R1+1 or R9+1) and later takes it back:
/// Red's take-back comes 10 plies after its key, Black's 2 plies after.
/// The remaining plies are a fixed horse shuffle, so only a history window
/// of at least 10 moves predicts Red's take-back.
inline GameRecord key_cycle_game(Rng& rng, std::size_t cycles, int red_elo, int black_elo, std::string id) {
  static const char* kShuffle[] = {"H2+3", "H2+3", "H8+7", "H8+7", "H3-2", "H3-2", "H7-8", "H7-8"};
  GameRecord rec;
  rec.red_elo = red_elo;
  rec.black_elo = black_elo;
  rec.source_id = std::move(id);
  rec.result = GameResult::Unknown;
  for (std::size_t c = 0; c < cycles; ++c) {
    const bool red_left = uniform_index(rng, 2) == 0;
    const bool black_left = uniform_index(rng, 2) == 0;
    rec.moves.push_back(parse_token_text(red_left ? "R1+1" : "R9+1"));
    for (const char* t : kShuffle) rec.moves.push_back(parse_token_text(t));
    rec.moves.push_back(parse_token_text(black_left ? "R1+1" : "R9+1"));
    rec.moves.push_back(parse_token_text(red_left ? "R1-1" : "R9-1"));
    rec.moves.push_back(parse_token_text(black_left ? "R1-1" : "R9-1"));
  }
  return rec;
}

inline std::vector<GameRecord> key_cycle_corpus(std::size_t games, std::size_t cycles, std::uint64_t seed, int elo) {
  Rng rng = make_rng(seed, 43);
  std::vector<GameRecord> out;
  for (std::size_t g = 0; g < games; ++g) out.push_back(key_cycle_game(rng, cycles, elo, elo, "k" + std::to_string(g)));
  return out;
}

inline std::vector<EncodedGame> encode_games(std::span<const GameRecord> records,
                                             const MoveVocabulary& vocab = standard_vocabulary()) {
  std::vector<EncodedGame> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(encode_game(r, vocab));
  return out;
}

}  // namespace xqsv
