#pragma once

// Reference implementations used only by the tests. They share no code with
// the library: a character board, naive square-by-square scans, and a string
// formatter for move notation.

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "xqsv/rules.hpp"

namespace oracle {

// board[file][rank], 1-based; ' ' empty, uppercase Red, lowercase Black.
struct Board {
  std::array<std::array<char, 11>, 10> cell{};
  bool red_to_move = true;

  Board() {
    for (auto& col : cell) col.fill(' ');
  }
  char at(int f, int r) const { return cell[f][r]; }
  char& at(int f, int r) { return cell[f][r]; }
};

using Move = std::tuple<int, int, int, int>;  // from file, from rank, to file, to rank

inline bool on_board(int f, int r) { return f >= 1 && f <= 9 && r >= 1 && r <= 10; }
inline bool is_red(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_black(char c) { return c >= 'a' && c <= 'z'; }
inline bool belongs(char c, bool red) { return red ? is_red(c) : is_black(c); }
inline char upper(char c) { return is_black(c) ? static_cast<char>(c - 'a' + 'A') : c; }

inline bool in_own_palace(int f, int r, bool red) {
  if (f < 4 || f > 6) return false;
  return red ? (r >= 1 && r <= 3) : (r >= 8 && r <= 10);
}

inline bool crossed_river(int r, bool red) { return red ? r >= 6 : r <= 5; }

/// Pseudo-legal moves of the piece at (f, r): geometry and occupancy only.
inline void piece_moves(const Board& b, int f, int r, std::vector<Move>& out) {
  const char c = b.at(f, r);
  const bool red = is_red(c);
  auto target_ok = [&](int tf, int tr) { return on_board(tf, tr) && !belongs(b.at(tf, tr), red); };
  auto add = [&](int tf, int tr) {
    if (target_ok(tf, tr)) out.emplace_back(f, r, tf, tr);
  };
  const int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  switch (upper(c)) {
    case 'K':
      for (auto& d : dirs) {
        if (in_own_palace(f + d[0], r + d[1], red)) add(f + d[0], r + d[1]);
      }
      break;
    case 'A':
      for (int df : {-1, 1}) {
        for (int dr : {-1, 1}) {
          if (in_own_palace(f + df, r + dr, red)) add(f + df, r + dr);
        }
      }
      break;
    case 'E':
      for (int df : {-2, 2}) {
        for (int dr : {-2, 2}) {
          const int tf = f + df, tr = r + dr;
          if (!on_board(tf, tr) || crossed_river(tr, red)) continue;
          if (b.at(f + df / 2, r + dr / 2) != ' ') continue;
          add(tf, tr);
        }
      }
      break;
    case 'H': {
      const int jumps[8][2] = {{1, 2}, {-1, 2}, {1, -2}, {-1, -2}, {2, 1}, {2, -1}, {-2, 1}, {-2, -1}};
      for (auto& j : jumps) {
        const int tf = f + j[0], tr = r + j[1];
        if (!on_board(tf, tr)) continue;
        const int lf = std::abs(j[0]) == 2 ? f + j[0] / 2 : f;
        const int lr = std::abs(j[1]) == 2 ? r + j[1] / 2 : r;
        if (b.at(lf, lr) != ' ') continue;
        add(tf, tr);
      }
      break;
    }
    case 'R':
      for (auto& d : dirs) {
        for (int tf = f + d[0], tr = r + d[1]; on_board(tf, tr); tf += d[0], tr += d[1]) {
          if (b.at(tf, tr) == ' ') {
            add(tf, tr);
            continue;
          }
          add(tf, tr);
          break;
        }
      }
      break;
    case 'C':
      for (auto& d : dirs) {
        int tf = f + d[0], tr = r + d[1];
        for (; on_board(tf, tr) && b.at(tf, tr) == ' '; tf += d[0], tr += d[1]) add(tf, tr);
        if (!on_board(tf, tr)) continue;
        for (tf += d[0], tr += d[1]; on_board(tf, tr); tf += d[0], tr += d[1]) {
          if (b.at(tf, tr) == ' ') continue;
          if (!belongs(b.at(tf, tr), red)) out.emplace_back(f, r, tf, tr);
          break;
        }
      }
      break;
    case 'P': {
      const int fwd = red ? 1 : -1;
      add(f, r + fwd);
      if (crossed_river(r, red)) {
        add(f - 1, r);
        add(f + 1, r);
      }
      break;
    }
    default: break;
  }
}

inline std::vector<Move> pseudo_moves(const Board& b, bool red) {
  std::vector<Move> out;
  for (int f = 1; f <= 9; ++f) {
    for (int r = 1; r <= 10; ++r) {
      if (belongs(b.at(f, r), red)) piece_moves(b, f, r, out);
    }
  }
  return out;
}

inline bool generals_facing(const Board& b) {
  for (int f = 4; f <= 6; ++f) {
    int seen = 0;
    char first = ' ';
    for (int r = 1; r <= 10; ++r) {
      const char c = b.at(f, r);
      if (c == ' ') continue;
      if (seen == 0) {
        first = c;
        seen = 1;
        continue;
      }
      if ((first == 'K' && c == 'k') || (first == 'k' && c == 'K')) return true;
      first = c;
    }
  }
  return false;
}

/// Enemy pseudo-moves reach the general, or the generals face each other.
inline bool attacked(const Board& b, bool red) {
  int gf = 0, gr = 0;
  for (int f = 1; f <= 9; ++f) {
    for (int r = 1; r <= 10; ++r) {
      if (b.at(f, r) == (red ? 'K' : 'k')) {
        gf = f;
        gr = r;
      }
    }
  }
  if (generals_facing(b)) return true;
  for (const auto& [ff, fr, tf, tr] : pseudo_moves(b, !red)) {
    if (tf == gf && tr == gr) return true;
  }
  return false;
}

inline Board apply(const Board& b, const Move& m) {
  Board n = b;
  const auto& [ff, fr, tf, tr] = m;
  n.at(tf, tr) = n.at(ff, fr);
  n.at(ff, fr) = ' ';
  n.red_to_move = !b.red_to_move;
  return n;
}

inline std::vector<Move> legal(const Board& b) {
  std::vector<Move> out;
  for (const auto& m : pseudo_moves(b, b.red_to_move)) {
    if (!attacked(apply(b, m), b.red_to_move)) out.push_back(m);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::uint64_t perft(const Board& b, int depth) {
  if (depth == 0) return 1;
  std::uint64_t n = 0;
  for (const auto& m : legal(b)) n += perft(apply(b, m), depth - 1);
  return n;
}

inline Board from_state(const xqsv::GameState& s) {
  Board b;
  for (const auto& [sq, piece] : s.placement()) b.at(sq.file, sq.rank) = piece.glyph();
  b.red_to_move = s.side_to_move() == xqsv::Side::Red;
  return b;
}

inline std::vector<Move> to_moves(const std::vector<xqsv::MoveAction>& actions) {
  std::vector<Move> out;
  for (const auto& a : actions) out.emplace_back(a.from.file, a.from.rank, a.to.file, a.to.rank);
  std::sort(out.begin(), out.end());
  return out;
}

// ---- notation ---------------------------------------------------------------

/// WXF text for a move on `b`, where `partner_rank` (0 if none) is the rank
/// of a same-kind piece on the origin file.
inline std::string notation(const Board& b, const Move& m, int partner_rank) {
  const auto& [ff, fr, tf, tr] = m;
  const char c = b.at(ff, fr);
  const bool red = is_red(c);
  const char kind = upper(c);
  auto rel_file = [&](int f) { return red ? f : 10 - f; };
  const int ahead = red ? tr - fr : fr - tr;
  std::string s;
  if (partner_rank) {
    const bool front = red ? fr > partner_rank : fr < partner_rank;
    s += front ? '+' : '-';
    s += kind;
  } else {
    s += kind;
    s += static_cast<char>('0' + rel_file(ff));
  }
  const bool straight = kind == 'K' || kind == 'R' || kind == 'C' || kind == 'P';
  if (ahead == 0) {
    s += '=';
    s += static_cast<char>('0' + rel_file(tf));
  } else {
    s += ahead > 0 ? '+' : '-';
    s += static_cast<char>('0' + (straight && ff == tf ? std::abs(ahead) : rel_file(tf)));
  }
  return s;
}

inline bool may_stand(char c, int f, int r) {
  const bool red = is_red(c);
  const int rr = red ? r : 11 - r;  // rank seen from the owner's side
  switch (upper(c)) {
    case 'K': return in_own_palace(f, r, red);
    case 'A': return in_own_palace(f, r, red) && ((f == 5) == (rr == 2));
    case 'E': {
      static const std::set<std::pair<int, int>> points = {{3, 1}, {7, 1}, {1, 3}, {5, 3}, {9, 3}, {3, 5}, {7, 5}};
      return points.count({f, rr}) != 0;
    }
    case 'P': return rr >= 6 || ((rr == 4 || rr == 5) && f % 2 == 1);
    default: return true;
  }
}

/// Every notation string produced by some board: each piece kind of either
/// side, alone or with a same-kind partner on its file, plus an optional
/// enemy chariot anywhere as a capture target. Boards lack generals since
/// only movement geometry matters here.
inline std::set<std::string> brute_force_vocabulary() {
  std::set<std::string> out;
  const std::string kinds = "KAEHRCP";
  for (bool red : {true, false}) {
    for (char k : kinds) {
      const char c = red ? k : static_cast<char>(k - 'A' + 'a');
      const char enemy = red ? 'r' : 'R';
      const int copies = k == 'K' ? 1 : 2;
      for (int f = 1; f <= 9; ++f) {
        for (int r = 1; r <= 10; ++r) {
          if (!may_stand(c, f, r)) continue;
          for (int pr = 0; pr <= (copies == 2 ? 10 : 0); ++pr) {
            if (pr == r || (pr && !may_stand(c, f, pr))) continue;
            for (int e = -1; e < 90; ++e) {
              Board b;
              b.at(f, r) = c;
              if (pr) b.at(f, pr) = c;
              if (e >= 0) {
                const int ef = e % 9 + 1, er = e / 9 + 1;
                if (b.at(ef, er) != ' ') continue;
                b.at(ef, er) = enemy;
              }
              std::vector<Move> moves;
              piece_moves(b, f, r, moves);
              for (const auto& m : moves) out.insert(notation(b, m, pr));
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace oracle
