#pragma once

// Side-relative move tokens (piece, origin file or Front/Rear, operator,
// argument), the fixed vocabulary of all producible tokens, and the mapping
// between tokens and board actions.

#include <algorithm>
#include <compare>
#include <cstdlib>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xqsv/error.hpp"
#include "xqsv/rules.hpp"

namespace xqsv {

enum class Disambiguator : std::uint8_t { None, Front, Rear };
enum class Operator : std::uint8_t { Forward, Backward, Traverse };

/// One move symbol, shared by both sides. `origin_file` is 0 exactly when a
/// Front/Rear disambiguator is present; files count from the mover's right.
struct MoveToken {
  PieceKind kind = PieceKind::General;
  Disambiguator disambiguator = Disambiguator::None;
  int origin_file = 0;
  Operator op = Operator::Forward;
  int argument = 1;

  friend constexpr auto operator<=>(const MoveToken&, const MoveToken&) = default;

  std::string to_string() const {
    std::string s;
    if (disambiguator != Disambiguator::None) {
      s.push_back(disambiguator == Disambiguator::Front ? '+' : '-');
      s.push_back(kind_letter(kind));
    } else {
      s.push_back(kind_letter(kind));
      s.push_back(static_cast<char>('0' + origin_file));
    }
    s.push_back(op == Operator::Forward ? '+' : op == Operator::Backward ? '-' : '=');
    s.push_back(static_cast<char>('0' + argument));
    return s;
  }
};

/// Straight movers count steps on forward/backward moves; the rest name a destination file.
constexpr bool moves_straight(PieceKind kind) {
  return kind == PieceKind::General || kind == PieceKind::Chariot || kind == PieceKind::Cannon ||
         kind == PieceKind::Soldier;
}

namespace detail {

/// Token for a piece moving from `from` to `to`, with the given disambiguation.
inline MoveToken token_for_move(PieceKind kind, Side side, Square from, Square to, Disambiguator dis) {
  MoveToken t;
  t.kind = kind;
  t.disambiguator = dis;
  t.origin_file = dis == Disambiguator::None ? relative_file(side, from.file) : 0;
  const int dr = relative_rank(side, to.rank) - relative_rank(side, from.rank);
  t.op = dr > 0 ? Operator::Forward : dr < 0 ? Operator::Backward : Operator::Traverse;
  if (moves_straight(kind) && t.op != Operator::Traverse) {
    t.argument = dr > 0 ? dr : -dr;
  } else {
    t.argument = relative_file(side, to.file);
  }
  return t;
}

/// Destinations of a lone piece on an otherwise empty board (side-relative, Red frame).
inline std::vector<Square> open_board_targets(PieceKind kind, Square from, Square other) {
  detail::Cells cells{};
  cells.fill(0);
  cells[from.index()] = encode_cell({Side::Red, kind});
  if (other.valid() && other != from) cells[other.index()] = encode_cell({Side::Red, kind});
  std::vector<MoveAction> moves;
  piece_moves(cells, from, moves);
  std::vector<Square> out;
  for (const auto& m : moves) out.push_back(m.to);
  // A cannon may also capture by jumping the paired piece: any enemy-occupied
  // square past exactly one screen.
  if (kind == PieceKind::Cannon && other.valid() && other.file == from.file) {
    const int dir = other.rank > from.rank ? 1 : -1;
    for (int r = other.rank + dir; r >= 1 && r <= Square::kRanks; r += dir) out.push_back({from.file, r});
  }
  return out;
}

}  // namespace detail

/// Ordered token list with its index bijection. Immutable once built.
class MoveVocabulary {
 public:
  explicit MoveVocabulary(std::vector<MoveToken> tokens) : tokens_(std::move(tokens)) {
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<MoveToken>& tokens() const { return tokens_; }

  bool contains(const MoveToken& token) const { return index_.count(token) != 0; }

  int encode(const MoveToken& token) const {
    const auto it = index_.find(token);
    if (it == index_.end()) throw Error(ErrorCode::UnknownToken, token.to_string());
    return it->second;
  }

  const MoveToken& decode(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
      throw Error(ErrorCode::IndexOutOfRange, "token index " + std::to_string(index));
    }
    return tokens_[index];
  }

  /// One token per line; line number (0-based) is the index.
  std::string manifest() const {
    std::string out;
    for (const auto& t : tokens_) {
      out += t.to_string();
      out.push_back('\n');
    }
    return out;
  }

  /// FNV-1a over the manifest text; identifies the vocabulary in checkpoints.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : manifest()) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

 private:
  std::vector<MoveToken> tokens_;
  std::map<MoveToken, int> index_;
};

/// Constructive enumeration: every token some board arrangement can produce,
/// by case analysis over single pieces and same-file pairs of each kind.
inline MoveVocabulary enumerate_vocabulary() {
  std::set<MoveToken> tokens;
  for (PieceKind kind : kAllPieceKinds) {
    const Piece piece{Side::Red, kind};
    for (int i = 0; i < Square::kCount; ++i) {
      const Square from = Square::from_index(i);
      if (!placement_allowed(piece, from)) continue;
      for (Square to : detail::open_board_targets(kind, from, {0, 0})) {
        tokens.insert(detail::token_for_move(kind, Side::Red, from, to, Disambiguator::None));
      }
      if (initial_count(kind) < 2) continue;
      // Pair on the same file: this piece is Front when it is further up.
      for (int rank = 1; rank <= Square::kRanks; ++rank) {
        const Square other{from.file, rank};
        if (other == from || !placement_allowed(piece, other)) continue;
        const auto dis = from.rank > other.rank ? Disambiguator::Front : Disambiguator::Rear;
        for (Square to : detail::open_board_targets(kind, from, other)) {
          if (to == other) continue;
          tokens.insert(detail::token_for_move(kind, Side::Red, from, to, dis));
        }
      }
    }
  }
  return MoveVocabulary({tokens.begin(), tokens.end()});
}

/// Process-wide vocabulary, built on first use.
inline const MoveVocabulary& standard_vocabulary() {
  static const MoveVocabulary vocab = enumerate_vocabulary();
  return vocab;
}

namespace detail {

struct FileGroup {
  std::vector<Square> squares;  // ordered front (nearest the opponent) first
};

inline std::map<int, FileGroup> group_by_file(const GameState& state, Piece piece) {
  std::map<int, FileGroup> files;
  for (const auto& [sq, p] : state.placement()) {
    if (p == piece) files[sq.file].squares.push_back(sq);
  }
  for (auto& [file, group] : files) {
    std::sort(group.squares.begin(), group.squares.end(), [&](Square a, Square b) {
      return relative_rank(piece.side, a.rank) > relative_rank(piece.side, b.rank);
    });
  }
  return files;
}

}  // namespace detail

/// The board action a token denotes for the side to move.
/// Throws Unresolvable, Ambiguous or LocallyIllegal.
inline MoveAction resolve(const MoveToken& token, const GameState& state) {
  const Side side = state.side_to_move();
  const Piece piece{side, token.kind};
  const auto files = detail::group_by_file(state, piece);
  const std::string text = token.to_string();

  Square from{};
  if (token.disambiguator == Disambiguator::None) {
    const int file = relative_file(side, token.origin_file);
    const auto it = files.find(file);
    if (token.origin_file < 1 || token.origin_file > 9 || it == files.end()) {
      throw Error(ErrorCode::Unresolvable, text + ": no such piece on that file");
    }
    if (it->second.squares.size() > 1) throw Error(ErrorCode::Ambiguous, text + ": doubled pieces on file");
    from = it->second.squares.front();
  } else {
    std::vector<const detail::FileGroup*> doubled;
    for (const auto& [file, group] : files) {
      if (group.squares.size() >= 2) doubled.push_back(&group);
    }
    if (doubled.empty()) throw Error(ErrorCode::Unresolvable, text + ": no doubled pieces");
    if (doubled.size() > 1 || doubled.front()->squares.size() > 2) {
      throw Error(ErrorCode::Ambiguous, text + ": front/rear does not single out a piece");
    }
    const auto& sq = doubled.front()->squares;
    from = token.disambiguator == Disambiguator::Front ? sq[0] : sq[1];
  }

  const int fwd = forward_step(side);
  Square to{};
  if (moves_straight(token.kind)) {
    if (token.op == Operator::Traverse) {
      to = {relative_file(side, token.argument), from.rank};
    } else {
      const int sign = token.op == Operator::Forward ? 1 : -1;
      to = {from.file, from.rank + sign * fwd * token.argument};
    }
  } else {
    if (token.op == Operator::Traverse) throw Error(ErrorCode::Unresolvable, text + ": piece cannot traverse");
    const int dest_file = relative_file(side, token.argument);
    const int df = std::abs(dest_file - from.file);
    int dr = 0;
    if (token.kind == PieceKind::Advisor && df == 1) dr = 1;
    if (token.kind == PieceKind::Elephant && df == 2) dr = 2;
    if (token.kind == PieceKind::Horse && (df == 1 || df == 2)) dr = 3 - df;
    if (dr == 0) throw Error(ErrorCode::Unresolvable, text + ": impossible file change");
    const int sign = token.op == Operator::Forward ? 1 : -1;
    to = {dest_file, from.rank + sign * fwd * dr};
  }
  if (!to.valid() || token.argument < 1 || token.argument > 9) {
    throw Error(ErrorCode::Unresolvable, text + ": destination off the board");
  }

  const MoveAction action{from, to};
  std::vector<MoveAction> pseudo;
  detail::piece_moves(state.cells(), from, pseudo);
  if (std::find(pseudo.begin(), pseudo.end(), action) == pseudo.end()) {
    throw Error(ErrorCode::Unresolvable, text + ": blocked or not a legal geometry here");
  }
  if (!is_legal(state, action)) throw Error(ErrorCode::LocallyIllegal, text + ": leaves the General exposed");
  return action;
}

/// Canonical token for a legal action. Throws Unrepresentable for the
/// out-of-vocabulary tandem cases (three on a file, two doubled files).
inline MoveToken tokenize(const MoveAction& action, const GameState& state) {
  const auto piece = state.at(action.from);
  if (!piece || piece->side != state.side_to_move()) {
    throw Error(ErrorCode::IllegalMove, "no piece of the side to move on the origin square");
  }
  const auto files = detail::group_by_file(state, *piece);
  const auto& here = files.at(action.from.file).squares;
  Disambiguator dis = Disambiguator::None;
  if (here.size() == 2) {
    dis = here[0] == action.from ? Disambiguator::Front : Disambiguator::Rear;
  } else if (here.size() > 2) {
    throw Error(ErrorCode::Unrepresentable, "three pieces of one kind on a file");
  }
  const MoveToken token = detail::token_for_move(piece->kind, piece->side, action.from, action.to, dis);
  try {
    if (resolve(token, state) == action) return token;
  } catch (const Error&) {
  }
  throw Error(ErrorCode::Unrepresentable, token.to_string() + " does not single out this move");
}

/// Entry i is true iff token i resolves to a legal move in `state`.
inline std::vector<bool> locally_legal_mask(const GameState& state,
                                            const MoveVocabulary& vocab = standard_vocabulary()) {
  std::vector<bool> mask(vocab.size(), false);
  for (const auto& mv : legal_moves(state)) {
    try {
      mask[vocab.encode(tokenize(mv, state))] = true;
    } catch (const Error&) {
      // unrepresentable tandem moves have no class
    }
  }
  return mask;
}

/// Sorted indices of the locally legal tokens.
inline std::vector<int> legal_indices(const GameState& state, const MoveVocabulary& vocab = standard_vocabulary()) {
  std::vector<int> out;
  for (const auto& mv : legal_moves(state)) {
    try {
      out.push_back(vocab.encode(tokenize(mv, state)));
    } catch (const Error&) {
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// State after playing `moves` from the initial position.
/// Throws IllegalSequenceError naming the first offending move.
inline GameState replay(std::span<const MoveToken> moves) {
  GameState state = initial_state();
  for (std::size_t i = 0; i < moves.size(); ++i) {
    try {
      state = state.with_move_unchecked(resolve(moves[i], state));
    } catch (const Error& e) {
      throw IllegalSequenceError(i, e.what());
    }
  }
  return state;
}

}  // namespace xqsv
