#pragma once

// Xiangqi board state, move rules and legality.
//
// Coordinates: file 1..9 numbered from Red's right-hand side (so a file
// number equals Red's own notation file), rank 1..10 from Red's back rank.
// All move notation is mapped into this frame.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xqsv/error.hpp"

namespace xqsv {

enum class Side : std::uint8_t { Red = 0, Black = 1 };

constexpr Side opponent(Side side) { return side == Side::Red ? Side::Black : Side::Red; }

inline std::string_view to_string(Side side) { return side == Side::Red ? "Red" : "Black"; }

enum class PieceKind : std::uint8_t { General, Advisor, Elephant, Horse, Chariot, Cannon, Soldier };

inline constexpr std::array<PieceKind, 7> kAllPieceKinds = {
    PieceKind::General, PieceKind::Advisor, PieceKind::Elephant, PieceKind::Horse,
    PieceKind::Chariot, PieceKind::Cannon,  PieceKind::Soldier};

constexpr int initial_count(PieceKind kind) {
  switch (kind) {
    case PieceKind::General: return 1;
    case PieceKind::Soldier: return 5;
    default: return 2;
  }
}

/// Red glyph for a kind; Black uses the lowercase form.
constexpr char kind_letter(PieceKind kind) {
  constexpr std::array<char, 7> letters = {'K', 'A', 'E', 'H', 'R', 'C', 'P'};
  return letters[static_cast<int>(kind)];
}

struct Piece {
  Side side;
  PieceKind kind;

  friend constexpr bool operator==(Piece, Piece) = default;

  constexpr char glyph() const {
    const char c = kind_letter(kind);
    return side == Side::Red ? c : static_cast<char>(c - 'A' + 'a');
  }
};

struct Square {
  int file = 1;
  int rank = 1;

  static constexpr int kFiles = 9;
  static constexpr int kRanks = 10;
  static constexpr int kCount = kFiles * kRanks;

  constexpr bool valid() const { return file >= 1 && file <= kFiles && rank >= 1 && rank <= kRanks; }
  constexpr int index() const { return (rank - 1) * kFiles + (file - 1); }
  static constexpr Square from_index(int index) { return {index % kFiles + 1, index / kFiles + 1}; }

  friend constexpr auto operator<=>(const Square&, const Square&) = default;
};

struct MoveAction {
  Square from;
  Square to;

  friend constexpr auto operator<=>(const MoveAction&, const MoveAction&) = default;
};

// Side-relative geometry: relative rank 1 is the mover's back rank and
// relative file 1 is the mover's right-hand file.
constexpr int relative_rank(Side side, int rank) { return side == Side::Red ? rank : 11 - rank; }
constexpr int relative_file(Side side, int file) { return side == Side::Red ? file : 10 - file; }
constexpr int forward_step(Side side) { return side == Side::Red ? 1 : -1; }

constexpr bool in_palace(Side side, Square sq) {
  const int r = relative_rank(side, sq.rank);
  return sq.file >= 4 && sq.file <= 6 && r >= 1 && r <= 3;
}

constexpr bool own_half(Side side, Square sq) { return relative_rank(side, sq.rank) <= 5; }

constexpr bool advisor_point(Side side, Square sq) {
  if (!in_palace(side, sq)) return false;
  const int r = relative_rank(side, sq.rank);
  return (sq.file == 5) == (r == 2);
}

constexpr bool elephant_point(Side side, Square sq) {
  if (!own_half(side, sq)) return false;
  const int r = relative_rank(side, sq.rank);
  if (r == 1 || r == 5) return sq.file == 3 || sq.file == 7;
  if (r == 3) return sq.file == 1 || sq.file == 5 || sq.file == 9;
  return false;
}

constexpr bool soldier_point(Side side, Square sq) {
  const int r = relative_rank(side, sq.rank);
  if (r >= 6) return true;
  return (r == 4 || r == 5) && sq.file % 2 == 1;
}

/// Squares a piece of this kind may ever occupy.
constexpr bool placement_allowed(Piece piece, Square sq) {
  if (!sq.valid()) return false;
  switch (piece.kind) {
    case PieceKind::General: return in_palace(piece.side, sq);
    case PieceKind::Advisor: return advisor_point(piece.side, sq);
    case PieceKind::Elephant: return elephant_point(piece.side, sq);
    case PieceKind::Soldier: return soldier_point(piece.side, sq);
    default: return true;
  }
}

enum class Outcome { Ongoing, RedWins, BlackWins };

inline std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Ongoing: return "Ongoing";
    case Outcome::RedWins: return "RedWins";
    case Outcome::BlackWins: return "BlackWins";
  }
  return "Ongoing";
}

namespace detail {

// 0 = empty, otherwise 1 + kind + 8 * side.
using Cells = std::array<std::uint8_t, Square::kCount>;

constexpr std::uint8_t encode_cell(Piece p) {
  return static_cast<std::uint8_t>(1 + static_cast<int>(p.kind) + 8 * static_cast<int>(p.side));
}
constexpr Piece decode_cell(std::uint8_t c) {
  return {static_cast<Side>((c - 1) / 8), static_cast<PieceKind>((c - 1) % 8)};
}

}  // namespace detail

/// Full position: placement, side to move and ply counter. Immutable value type.
class GameState {
 public:
  using Placement = std::vector<std::pair<Square, Piece>>;

  /// Builds a validated position. Throws InvalidState when an invariant fails.
  static GameState from_placement(const Placement& placement, Side side_to_move, unsigned ply);

  /// Parses the 10-row debug board text (rank 10 first, Red's left first).
  static GameState from_board_text(std::string_view text, Side side_to_move, unsigned ply);

  std::optional<Piece> at(Square sq) const {
    const auto c = cells_[sq.index()];
    if (c == 0) return std::nullopt;
    return detail::decode_cell(c);
  }

  Side side_to_move() const { return side_; }
  unsigned ply() const { return ply_; }

  int piece_count() const {
    return static_cast<int>(std::count_if(cells_.begin(), cells_.end(), [](auto c) { return c != 0; }));
  }

  int count(Piece piece) const {
    return static_cast<int>(std::count(cells_.begin(), cells_.end(), detail::encode_cell(piece)));
  }

  Square general(Side side) const;

  Placement placement() const;

  /// 10 rows of 9 glyphs, rank 10 first, each row from Red's left (file 9) to right (file 1).
  std::string to_board_text() const;

  const detail::Cells& cells() const { return cells_; }

  friend bool operator==(const GameState&, const GameState&) = default;

  /// Moves a piece without any legality check; used by generators and replay.
  GameState with_move_unchecked(MoveAction action) const {
    GameState next = *this;
    next.cells_[action.to.index()] = cells_[action.from.index()];
    next.cells_[action.from.index()] = 0;
    next.side_ = opponent(side_);
    next.ply_ = ply_ + 1;
    return next;
  }

 private:
  GameState() { cells_.fill(0); }

  void validate() const;

  detail::Cells cells_{};
  Side side_ = Side::Red;
  unsigned ply_ = 0;
};

namespace detail {

inline bool generals_face(const Cells& cells) {
  int red = -1, black = -1;
  for (int i = 0; i < Square::kCount; ++i) {
    if (cells[i] == encode_cell({Side::Red, PieceKind::General})) red = i;
    if (cells[i] == encode_cell({Side::Black, PieceKind::General})) black = i;
  }
  if (red < 0 || black < 0) return false;
  const Square a = Square::from_index(red), b = Square::from_index(black);
  if (a.file != b.file) return false;
  for (int r = std::min(a.rank, b.rank) + 1; r < std::max(a.rank, b.rank); ++r) {
    if (cells[Square{a.file, r}.index()] != 0) return false;
  }
  return true;
}

constexpr std::array<std::pair<int, int>, 4> kOrthogonal = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
constexpr std::array<std::pair<int, int>, 4> kDiagonal = {{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

inline bool own_or_empty_target(const Cells& cells, Side side, Square to) {
  const auto c = cells[to.index()];
  return c == 0 || decode_cell(c).side != side;
}

/// Pseudo-legal moves for the piece on `from` (geometry and occupancy only).
inline void piece_moves(const Cells& cells, Square from, std::vector<MoveAction>& out) {
  const Piece piece = decode_cell(cells[from.index()]);
  const Side side = piece.side;
  auto push = [&](Square to) {
    if (to.valid() && own_or_empty_target(cells, side, to)) out.push_back({from, to});
  };
  auto occupied = [&](Square sq) { return cells[sq.index()] != 0; };

  switch (piece.kind) {
    case PieceKind::General:
      for (auto [df, dr] : kOrthogonal) {
        const Square to{from.file + df, from.rank + dr};
        if (in_palace(side, to)) push(to);
      }
      break;
    case PieceKind::Advisor:
      for (auto [df, dr] : kDiagonal) {
        const Square to{from.file + df, from.rank + dr};
        if (in_palace(side, to)) push(to);
      }
      break;
    case PieceKind::Elephant:
      for (auto [df, dr] : kDiagonal) {
        const Square to{from.file + 2 * df, from.rank + 2 * dr};
        const Square eye{from.file + df, from.rank + dr};
        if (to.valid() && own_half(side, to) && !occupied(eye)) push(to);
      }
      break;
    case PieceKind::Horse:
      for (auto [df, dr] : kOrthogonal) {
        const Square leg{from.file + df, from.rank + dr};
        if (!leg.valid() || occupied(leg)) continue;
        // Two destinations fan out from each unblocked leg.
        if (df != 0) {
          push({from.file + 2 * df, from.rank + 1});
          push({from.file + 2 * df, from.rank - 1});
        } else {
          push({from.file + 1, from.rank + 2 * dr});
          push({from.file - 1, from.rank + 2 * dr});
        }
      }
      break;
    case PieceKind::Chariot:
      for (auto [df, dr] : kOrthogonal) {
        for (Square to{from.file + df, from.rank + dr}; to.valid(); to = {to.file + df, to.rank + dr}) {
          push(to);
          if (occupied(to)) break;
        }
      }
      break;
    case PieceKind::Cannon:
      for (auto [df, dr] : kOrthogonal) {
        bool screened = false;
        for (Square to{from.file + df, from.rank + dr}; to.valid(); to = {to.file + df, to.rank + dr}) {
          if (!screened) {
            if (occupied(to)) {
              screened = true;
            } else {
              out.push_back({from, to});
            }
          } else if (occupied(to)) {
            push(to);
            break;
          }
        }
      }
      break;
    case PieceKind::Soldier: {
      push({from.file, from.rank + forward_step(side)});
      if (!own_half(side, from)) {
        push({from.file + 1, from.rank});
        push({from.file - 1, from.rank});
      }
      break;
    }
  }
}

/// True when `side`'s General is attacked or faces the enemy General.
inline bool general_in_danger(const Cells& cells, Side side) {
  const auto own_general = encode_cell({side, PieceKind::General});
  int gi = -1;
  for (int i = 0; i < Square::kCount; ++i) {
    if (cells[i] == own_general) {
      gi = i;
      break;
    }
  }
  if (gi < 0) return true;
  const Square g = Square::from_index(gi);
  const Side enemy = opponent(side);
  auto enemy_is = [&](Square sq, PieceKind kind) {
    return sq.valid() && cells[sq.index()] == encode_cell({enemy, kind});
  };

  // Lines: chariot, cannon, facing general.
  for (auto [df, dr] : kOrthogonal) {
    int screens = 0;
    for (Square sq{g.file + df, g.rank + dr}; sq.valid(); sq = {sq.file + df, sq.rank + dr}) {
      const auto c = cells[sq.index()];
      if (c == 0) continue;
      if (screens == 0) {
        if (enemy_is(sq, PieceKind::Chariot)) return true;
        if (df == 0 && enemy_is(sq, PieceKind::General)) return true;
      } else if (screens == 1) {
        if (enemy_is(sq, PieceKind::Cannon)) return true;
        break;
      }
      ++screens;
    }
  }
  // Horses: the attacking horse's leg is diagonal-adjacent to the General.
  for (auto [df, dr] : kDiagonal) {
    const Square leg{g.file + df, g.rank + dr};
    if (!leg.valid() || cells[leg.index()] != 0) continue;
    if (enemy_is({g.file + 2 * df, g.rank + dr}, PieceKind::Horse)) return true;
    if (enemy_is({g.file + df, g.rank + 2 * dr}, PieceKind::Horse)) return true;
  }
  // Soldiers attack forward and, across the river, sideways.
  if (enemy_is({g.file, g.rank - forward_step(enemy)}, PieceKind::Soldier)) return true;
  for (int df : {-1, 1}) {
    const Square sq{g.file + df, g.rank};
    if (enemy_is(sq, PieceKind::Soldier) && !own_half(enemy, sq)) return true;
  }
  return false;
}

inline void apply_cells(Cells& cells, MoveAction action) {
  cells[action.to.index()] = cells[action.from.index()];
  cells[action.from.index()] = 0;
}

}  // namespace detail

/// Every legal move for the side to move, sorted by (from, to).
inline std::vector<MoveAction> legal_moves(const GameState& state) {
  const auto& cells = state.cells();
  const Side side = state.side_to_move();
  std::vector<MoveAction> pseudo;
  pseudo.reserve(96);
  for (int i = 0; i < Square::kCount; ++i) {
    if (cells[i] != 0 && detail::decode_cell(cells[i]).side == side) {
      detail::piece_moves(cells, Square::from_index(i), pseudo);
    }
  }
  std::vector<MoveAction> legal;
  legal.reserve(pseudo.size());
  for (const auto& mv : pseudo) {
    auto next = cells;
    detail::apply_cells(next, mv);
    if (!detail::general_in_danger(next, side)) legal.push_back(mv);
  }
  std::sort(legal.begin(), legal.end(), [](const MoveAction& a, const MoveAction& b) {
    return std::pair(a.from.index(), a.to.index()) < std::pair(b.from.index(), b.to.index());
  });
  return legal;
}

inline bool is_legal(const GameState& state, MoveAction action) {
  if (!action.from.valid() || !action.to.valid()) return false;
  const auto piece = state.at(action.from);
  if (!piece || piece->side != state.side_to_move()) return false;
  std::vector<MoveAction> moves;
  detail::piece_moves(state.cells(), action.from, moves);
  if (std::find(moves.begin(), moves.end(), action) == moves.end()) return false;
  auto next = state.cells();
  detail::apply_cells(next, action);
  return !detail::general_in_danger(next, state.side_to_move());
}

inline bool in_check(const GameState& state, Side side) {
  return detail::general_in_danger(state.cells(), side);
}

/// Applies a legal move. Throws IllegalMove otherwise; the input is untouched.
inline GameState apply_move(const GameState& state, MoveAction action) {
  if (!is_legal(state, action)) {
    throw Error(ErrorCode::IllegalMove, "move is not legal in this position");
  }
  return state.with_move_unchecked(action);
}

/// The side to move loses when it has no legal move.
inline Outcome game_outcome(const GameState& state) {
  if (!legal_moves(state).empty()) return Outcome::Ongoing;
  return state.side_to_move() == Side::Red ? Outcome::BlackWins : Outcome::RedWins;
}

inline std::uint64_t perft(const GameState& state, unsigned depth) {
  if (depth == 0) return 1;
  const auto moves = legal_moves(state);
  if (depth == 1) return moves.size();
  std::uint64_t total = 0;
  for (const auto& mv : moves) total += perft(state.with_move_unchecked(mv), depth - 1);
  return total;
}

inline GameState initial_state() {
  GameState::Placement p;
  const std::array<PieceKind, 9> back = {PieceKind::Chariot,  PieceKind::Horse,    PieceKind::Elephant,
                                         PieceKind::Advisor,  PieceKind::General,  PieceKind::Advisor,
                                         PieceKind::Elephant, PieceKind::Horse,    PieceKind::Chariot};
  for (Side side : {Side::Red, Side::Black}) {
    auto rank = [&](int rel) { return relative_rank(side, rel); };
    for (int f = 1; f <= 9; ++f) p.push_back({{f, rank(1)}, {side, back[f - 1]}});
    p.push_back({{2, rank(3)}, {side, PieceKind::Cannon}});
    p.push_back({{8, rank(3)}, {side, PieceKind::Cannon}});
    for (int f = 1; f <= 9; f += 2) p.push_back({{f, rank(4)}, {side, PieceKind::Soldier}});
  }
  return GameState::from_placement(p, Side::Red, 0);
}

// ---------------------------------------------------------------------------

inline GameState GameState::from_placement(const Placement& placement, Side side_to_move, unsigned ply) {
  GameState state;
  for (const auto& [sq, piece] : placement) {
    if (!sq.valid()) throw Error(ErrorCode::InvalidState, "square out of bounds");
    if (state.cells_[sq.index()] != 0) throw Error(ErrorCode::InvalidState, "two pieces on one square");
    state.cells_[sq.index()] = detail::encode_cell(piece);
  }
  state.side_ = side_to_move;
  state.ply_ = ply;
  state.validate();
  return state;
}

inline GameState GameState::from_board_text(std::string_view text, Side side_to_move, unsigned ply) {
  Placement placement;
  int row = 0;
  std::size_t pos = 0;
  while (pos <= text.size() && row < Square::kRanks) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    if (line.size() != Square::kFiles) throw Error(ErrorCode::InvalidState, "board row must have 9 glyphs");
    const int rank = Square::kRanks - row;
    for (int col = 0; col < Square::kFiles; ++col) {
      const char g = line[col];
      if (g == '.') continue;
      const Side side = (g >= 'A' && g <= 'Z') ? Side::Red : Side::Black;
      const char upper = side == Side::Red ? g : static_cast<char>(g - 'a' + 'A');
      const auto it = std::find_if(kAllPieceKinds.begin(), kAllPieceKinds.end(),
                                   [&](PieceKind k) { return kind_letter(k) == upper; });
      if (it == kAllPieceKinds.end()) throw Error(ErrorCode::InvalidState, std::string("bad glyph ") + g);
      placement.push_back({{Square::kFiles - col, rank}, {side, *it}});
    }
    ++row;
  }
  if (row != Square::kRanks) throw Error(ErrorCode::InvalidState, "board text must have 10 rows");
  return from_placement(placement, side_to_move, ply);
}

inline Square GameState::general(Side side) const {
  for (int i = 0; i < Square::kCount; ++i) {
    if (cells_[i] == detail::encode_cell({side, PieceKind::General})) return Square::from_index(i);
  }
  throw Error(ErrorCode::InvalidState, "missing General");
}

inline GameState::Placement GameState::placement() const {
  Placement p;
  for (int i = 0; i < Square::kCount; ++i) {
    if (cells_[i] != 0) p.push_back({Square::from_index(i), detail::decode_cell(cells_[i])});
  }
  return p;
}

inline std::string GameState::to_board_text() const {
  std::string out;
  out.reserve(100);
  for (int rank = Square::kRanks; rank >= 1; --rank) {
    for (int file = Square::kFiles; file >= 1; --file) {
      const auto piece = at({file, rank});
      out.push_back(piece ? piece->glyph() : '.');
    }
    out.push_back('\n');
  }
  return out;
}

inline void GameState::validate() const {
  for (Side side : {Side::Red, Side::Black}) {
    for (PieceKind kind : kAllPieceKinds) {
      const int n = count({side, kind});
      if (n > initial_count(kind)) {
        throw Error(ErrorCode::InvalidState, std::string("too many ") + kind_letter(kind));
      }
      if (kind == PieceKind::General && n != 1) {
        throw Error(ErrorCode::InvalidState, "each side needs exactly one General");
      }
    }
  }
  for (int i = 0; i < Square::kCount; ++i) {
    if (cells_[i] == 0) continue;
    const Piece piece = detail::decode_cell(cells_[i]);
    if (!placement_allowed(piece, Square::from_index(i))) {
      throw Error(ErrorCode::InvalidState, std::string(1, piece.glyph()) + " on a forbidden point");
    }
  }
  if (detail::generals_face(cells_)) throw Error(ErrorCode::InvalidState, "Generals face each other");
  if ((side_ == Side::Red) != (ply_ % 2 == 0)) {
    throw Error(ErrorCode::InvalidState, "side to move disagrees with ply parity");
  }
}

}  // namespace xqsv
