#pragma once

// Training corpus construction: Elo bins, history-window samples under a
// memory capacity, and game-disjoint train/validation/test splits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xqsv/movespace.hpp"
#include "xqsv/notation.hpp"
#include "xqsv/random.hpp"

namespace xqsv {

/// Elo interval (lower, upper]. The unbounded bin covers every rating.
struct EloBin {
  int lower = std::numeric_limits<int>::min();
  int upper = std::numeric_limits<int>::max();

  static EloBin unbounded() { return {}; }

  bool is_unbounded() const {
    return lower == std::numeric_limits<int>::min() && upper == std::numeric_limits<int>::max();
  }

  bool contains(int elo) const {
    if (is_unbounded()) return true;
    return elo > lower && elo <= upper;
  }

  std::string to_string() const {
    if (is_unbounded()) return "all";
    return "(" + std::to_string(lower) + "," + std::to_string(upper) + "]";
  }

  /// File-name friendly label, e.g. "1200-1300".
  std::string label() const {
    if (is_unbounded()) return "all";
    return std::to_string(lower) + "-" + std::to_string(upper);
  }

  friend auto operator<=>(const EloBin&, const EloBin&) = default;
};

/// The ten 100-point bins (1000,1100] ... (1900,2000].
inline std::vector<EloBin> standard_bins() {
  std::vector<EloBin> bins;
  for (int lo = 1000; lo < 2000; lo += 100) bins.push_back({lo, lo + 100});
  return bins;
}

/// Parses "all", "lo-hi[,lo-hi...]" or a range plan "lo:hi:step".
inline std::vector<EloBin> parse_bins(std::string_view text) {
  text = detail::trim(text);
  if (text == "all") return {EloBin::unbounded()};
  if (text == "standard") return standard_bins();
  std::vector<EloBin> bins;
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const auto a = text.find(':'), b = text.find(':', a + 1);
    const auto lo = detail::parse_int(text.substr(0, a));
    const auto hi = detail::parse_int(text.substr(a + 1, b - a - 1));
    const auto step = detail::parse_int(text.substr(b + 1));
    if (!lo || !hi || !step || *step <= 0 || *lo >= *hi) throw Error(ErrorCode::InvalidConfig, "bad bin range");
    for (int l = *lo; l < *hi; l += *step) bins.push_back({l, std::min(l + *step, *hi)});
    return bins;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto item = text.substr(pos, end - pos);
    const auto dash = item.find('-', 1);
    const auto lo = dash == std::string_view::npos ? std::nullopt : detail::parse_int(item.substr(0, dash));
    const auto hi = dash == std::string_view::npos ? std::nullopt : detail::parse_int(item.substr(dash + 1));
    if (!lo || !hi || *lo >= *hi) throw Error(ErrorCode::InvalidConfig, "bad bin '" + std::string(item) + "'");
    bins.push_back({*lo, *hi});
    pos = end + 1;
  }
  return bins;
}

/// Memory capacity m; nullopt means unbounded history.
using MemoryCapacity = std::optional<int>;

inline std::string memory_text(MemoryCapacity m) { return m ? std::to_string(*m) : "inf"; }

inline MemoryCapacity parse_memory(std::string_view text) {
  text = detail::trim(text);
  if (text == "inf" || text == "perfect") return std::nullopt;
  const auto v = detail::parse_int(text);
  if (!v || *v < 1) throw Error(ErrorCode::InvalidConfig, "memory must be a positive integer or 'inf'");
  return *v;
}

/// How a game's plies are assigned to a bin.
enum class BinPolicy {
  PerMover,     // each ply goes to the bin of the player who made it
  GameAverage,  // all plies go to the bin of the players' mean Elo
};

/// A game with its moves as vocabulary indices.
struct EncodedGame {
  std::string id;
  int red_elo = 0;
  int black_elo = 0;
  std::vector<int> moves;
};

inline EncodedGame encode_game(const GameRecord& record, const MoveVocabulary& vocab = standard_vocabulary()) {
  EncodedGame g{record.source_id, record.red_elo, record.black_elo, {}};
  g.moves.reserve(record.moves.size());
  for (const auto& t : record.moves) g.moves.push_back(vocab.encode(t));
  return g;
}

/// Ply i (1-based) is Red's move when i is odd.
inline int mover_elo(const EncodedGame& g, std::size_t ply) { return ply % 2 == 1 ? g.red_elo : g.black_elo; }

inline bool ply_in_bin(const EncodedGame& g, std::size_t ply, const EloBin& bin, BinPolicy policy) {
  if (policy == BinPolicy::GameAverage) {
    // floor of the mean, so (a+b)/2 is the rating compared against the bin
    const long long sum = static_cast<long long>(g.red_elo) + g.black_elo;
    const int avg = static_cast<int>(sum >= 0 ? sum / 2 : -((-sum + 1) / 2));
    return bin.contains(avg);
  }
  return bin.contains(mover_elo(g, ply));
}

/// Which of a game's plies are visible to a bin.
struct BinView {
  std::size_t game = 0;
  bool red = false;
  bool black = false;
};

struct Partition {
  std::map<EloBin, std::vector<BinView>> bins;
  std::size_t dropped = 0;  // games matching no bin for either side
};

inline Partition partition_by_elo(std::span<const EncodedGame> games, std::span<const EloBin> bins,
                                  BinPolicy policy = BinPolicy::PerMover) {
  Partition out;
  for (const auto& bin : bins) out.bins[bin];
  for (std::size_t gi = 0; gi < games.size(); ++gi) {
    bool any = false;
    for (const auto& bin : bins) {
      const BinView v{gi, ply_in_bin(games[gi], 1, bin, policy), ply_in_bin(games[gi], 2, bin, policy)};
      if (v.red || v.black) {
        out.bins[bin].push_back(v);
        any = true;
      }
    }
    if (!any) ++out.dropped;
  }
  return out;
}

struct TrainingSample {
  std::vector<int> x;  // up to m preceding moves, oldest first
  int y = 0;           // the move played at ply i
  int mover_elo = 0;
  std::uint32_t game = 0;  // ordinal of the game in its dataset
  std::uint32_t ply = 0;   // i, 1-based

  friend bool operator==(const TrainingSample&, const TrainingSample&) = default;
};

/// One sample per ply i in `bin`: x = M[max(1, i-m) .. i-1], y = M[i].
inline std::vector<TrainingSample> make_samples(const EncodedGame& game, std::uint32_t ordinal, MemoryCapacity m,
                                                const EloBin& bin, BinPolicy policy = BinPolicy::PerMover) {
  if (m && *m < 1) throw Error(ErrorCode::InvalidConfig, "memory capacity must be at least 1");
  std::vector<TrainingSample> out;
  const std::size_t l = game.moves.size();
  for (std::size_t i = 1; i <= l; ++i) {
    if (!ply_in_bin(game, i, bin, policy)) continue;
    const std::size_t first = m ? std::max<std::size_t>(1, i > static_cast<std::size_t>(*m) ? i - *m : 1) : 1;
    TrainingSample s;
    // plies first..i-1 live at vector positions first-1..i-2
    s.x.assign(game.moves.begin() + static_cast<std::ptrdiff_t>(first - 1),
               game.moves.begin() + static_cast<std::ptrdiff_t>(i - 1));
    s.y = game.moves[i - 1];
    s.mover_elo = mover_elo(game, i);
    s.game = ordinal;
    s.ply = static_cast<std::uint32_t>(i);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<TrainingSample> make_samples(std::span<const EncodedGame> games, MemoryCapacity m,
                                                const EloBin& bin, BinPolicy policy = BinPolicy::PerMover) {
  std::vector<TrainingSample> out;
  for (std::size_t gi = 0; gi < games.size(); ++gi) {
    auto s = make_samples(games[gi], static_cast<std::uint32_t>(gi), m, bin, policy);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<TrainingSample> train;
  std::vector<TrainingSample> validation;
  std::vector<TrainingSample> test;
  std::uint64_t seed = 0;
};

/// Game counts per split: train and validation rounded, test takes the rest.
inline std::array<std::size_t, 3> split_game_counts(std::size_t games, const SplitRatios& r) {
  const double sum = r.train + r.validation + r.test;
  if (r.train < 0 || r.validation < 0 || r.test < 0 || std::abs(sum - 1.0) > 1e-6) {
    throw Error(ErrorCode::InvalidConfig, "split ratios must be non-negative and sum to 1");
  }
  const auto train = std::min<std::size_t>(games, static_cast<std::size_t>(std::llround(r.train * games)));
  const auto val =
      std::min<std::size_t>(games - train, static_cast<std::size_t>(std::llround(r.validation * games)));
  return {train, val, games - train - val};
}

/// Deterministic game-disjoint split; samples are shuffled within each part.
inline DatasetSplit build_split(std::vector<TrainingSample> samples, const SplitRatios& ratios, std::uint64_t seed) {
  std::vector<std::uint32_t> games;
  for (const auto& s : samples) games.push_back(s.game);
  std::sort(games.begin(), games.end());
  games.erase(std::unique(games.begin(), games.end()), games.end());

  Rng rng = make_rng(seed, 1);
  shuffle(games, rng);
  const auto counts = split_game_counts(games.size(), ratios);
  std::map<std::uint32_t, int> part;
  for (std::size_t i = 0; i < games.size(); ++i) part[games[i]] = i < counts[0] ? 0 : i < counts[0] + counts[1] ? 1 : 2;

  // Canonical order first so the result does not depend on the input order.
  std::sort(samples.begin(), samples.end(),
            [](const TrainingSample& a, const TrainingSample& b) { return std::pair(a.game, a.ply) < std::pair(b.game, b.ply); });

  DatasetSplit split;
  split.seed = seed;
  for (auto& s : samples) {
    const int p = part[s.game];
    (p == 0 ? split.train : p == 1 ? split.validation : split.test).push_back(std::move(s));
  }
  shuffle(split.train, rng);
  shuffle(split.validation, rng);
  shuffle(split.test, rng);
  return split;
}

/// Split index (0 train, 1 validation, 2 test) for each game ordinal. A
/// single assignment shared by every bin and window keeps ablations and
/// re-windowed search candidates on the same held-out games.
inline std::vector<std::uint8_t> assign_games(std::size_t games, const SplitRatios& ratios, std::uint64_t seed) {
  std::vector<std::uint32_t> order(games);
  for (std::size_t i = 0; i < games; ++i) order[i] = static_cast<std::uint32_t>(i);
  Rng rng = make_rng(seed, 1);
  shuffle(order, rng);
  const auto counts = split_game_counts(games, ratios);
  std::vector<std::uint8_t> part(games, 2);
  for (std::size_t i = 0; i < games; ++i) part[order[i]] = i < counts[0] ? 0 : i < counts[0] + counts[1] ? 1 : 2;
  return part;
}

/// Distributes samples by their game's assignment, then shuffles each part.
inline DatasetSplit split_by_assignment(std::vector<TrainingSample> samples, std::span<const std::uint8_t> part,
                                        std::uint64_t seed) {
  std::sort(samples.begin(), samples.end(),
            [](const TrainingSample& a, const TrainingSample& b) { return std::pair(a.game, a.ply) < std::pair(b.game, b.ply); });
  DatasetSplit split;
  split.seed = seed;
  for (auto& s : samples) {
    if (s.game >= part.size()) throw Error(ErrorCode::IndexOutOfRange, "sample game outside the assignment");
    const auto p = part[s.game];
    (p == 0 ? split.train : p == 1 ? split.validation : split.test).push_back(std::move(s));
  }
  Rng rng = make_rng(seed, 2);
  shuffle(split.train, rng);
  shuffle(split.validation, rng);
  shuffle(split.test, rng);
  return split;
}

/// Windows every game under (m, bin) and splits by the shared assignment.
inline DatasetSplit make_split(std::span<const EncodedGame> games, std::span<const std::uint8_t> part, MemoryCapacity m,
                               const EloBin& bin, std::uint64_t seed, BinPolicy policy = BinPolicy::PerMover) {
  return split_by_assignment(make_samples(games, m, bin, policy), part, seed);
}

struct DatasetStats {
  std::size_t count = 0;
  double mean_history = 0.0;
  std::map<int, std::size_t> label_histogram;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

inline DatasetStats dataset_stats(std::span<const TrainingSample> samples) {
  DatasetStats st;
  double total = 0;
  for (const auto& s : samples) {
    ++st.count;
    total += static_cast<double>(s.x.size());
    ++st.label_histogram[s.y];
  }
  st.mean_history = st.count ? total / static_cast<double>(st.count) : 0.0;
  return st;
}

inline std::map<EloBin, DatasetStats> dataset_stats(const std::map<EloBin, std::vector<TrainingSample>>& per_bin) {
  std::map<EloBin, DatasetStats> out;
  for (const auto& [bin, samples] : per_bin) out[bin] = dataset_stats(samples);
  return out;
}

}  // namespace xqsv
