#pragma once

// Game-record text format and move-text parsing.
//
// A record file is UTF-8 text; games are separated by blank lines. Each game
// starts with header lines (`Id:`, `RedElo:`, `BlackElo:`, `Result:`) followed
// by numbered move pairs such as `1. C2=5 H8+7`. Move text is accepted in
// file/direction form (`C2=5`, `+R+3`) or coordinate form (`h2e2`).

#include <cctype>
#include <charconv>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xqsv/error.hpp"
#include "xqsv/movespace.hpp"
#include "xqsv/rules.hpp"

namespace xqsv {

enum class GameResult { RedWins, BlackWins, Draw, Unknown };

inline std::string_view result_text(GameResult r) {
  switch (r) {
    case GameResult::RedWins: return "1-0";
    case GameResult::BlackWins: return "0-1";
    case GameResult::Draw: return "1/2";
    case GameResult::Unknown: return "?";
  }
  return "?";
}

struct GameRecord {
  int red_elo = 0;
  int black_elo = 0;
  GameResult result = GameResult::Unknown;
  std::vector<MoveToken> moves;
  std::string source_id;

  friend bool operator==(const GameRecord&, const GameRecord&) = default;
};

struct RecordFile {
  std::vector<GameRecord> records;
};

struct Diagnostic {
  std::size_t game = 0;  // 0-based position of the game block in the file
  std::string source_id;
  std::size_t line = 0;  // 1-based
  std::optional<std::size_t> ply;  // 1-based ply of the offending move
  std::string message;
};

struct ParsedRecords {
  RecordFile file;
  std::vector<Diagnostic> diagnostics;
};

namespace detail {

inline std::optional<PieceKind> kind_from_letter(char c) {
  switch (std::toupper(static_cast<unsigned char>(c))) {
    case 'K': case 'G': return PieceKind::General;
    case 'A': return PieceKind::Advisor;
    case 'E': case 'B': return PieceKind::Elephant;
    case 'H': case 'N': return PieceKind::Horse;
    case 'R': return PieceKind::Chariot;
    case 'C': return PieceKind::Cannon;
    case 'P': return PieceKind::Soldier;
    default: return std::nullopt;
  }
}

inline std::optional<Operator> operator_from_char(char c) {
  switch (c) {
    case '+': return Operator::Forward;
    case '-': return Operator::Backward;
    case '=': case '.': return Operator::Traverse;
    default: return std::nullopt;
  }
}

inline bool is_digit19(char c) { return c >= '1' && c <= '9'; }

inline bool looks_like_coordinates(std::string_view t) {
  auto col = [](char c) { return c >= 'a' && c <= 'i'; };
  auto row = [](char c) { return c >= '0' && c <= '9'; };
  if (t.size() == 4) return col(t[0]) && row(t[1]) && col(t[2]) && row(t[3]);
  if (t.size() == 5) return col(t[0]) && row(t[1]) && t[2] == '-' && col(t[3]) && row(t[4]);
  return false;
}

/// Coordinate square: column a..i from Red's left, row 0..9 from Red's back rank.
inline Square coordinate_square(char col, char row) { return {9 - (col - 'a'), row - '0' + 1}; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Syntax-only parse of file/direction text. Throws ParseError with offset.
inline MoveToken parse_token_text(std::string_view text) {
  if (text.size() != 4) throw ParseError(std::min<std::size_t>(text.size(), 4), "move text needs 4 characters");
  MoveToken t;
  std::size_t kind_pos = 0;
  if (text[0] == '+' || text[0] == '-') {
    t.disambiguator = text[0] == '+' ? Disambiguator::Front : Disambiguator::Rear;
    kind_pos = 1;
  }
  const auto kind = detail::kind_from_letter(text[kind_pos]);
  if (!kind) throw ParseError(kind_pos, "unknown piece letter");
  t.kind = *kind;
  if (t.disambiguator == Disambiguator::None) {
    if (!detail::is_digit19(text[1])) throw ParseError(1, "expected origin file 1-9");
    t.origin_file = text[1] - '0';
  }
  const auto op = detail::operator_from_char(text[2]);
  if (!op) throw ParseError(2, "expected one of + - =");
  t.op = *op;
  if (!detail::is_digit19(text[3])) throw ParseError(3, "expected argument 1-9");
  t.argument = text[3] - '0';
  return t;
}

/// Parses move text against `state` and returns its canonical token.
/// Throws ParseError, or Unresolvable/Ambiguous/LocallyIllegal from resolution.
inline MoveToken parse_move_text(std::string_view text, const GameState& state) {
  text = detail::trim(text);
  if (detail::looks_like_coordinates(text)) {
    const std::size_t dst = text.size() == 5 ? 3 : 2;
    const MoveAction action{detail::coordinate_square(text[0], text[1]),
                            detail::coordinate_square(text[dst], text[dst + 1])};
    const auto piece = state.at(action.from);
    if (!piece || piece->side != state.side_to_move()) {
      throw Error(ErrorCode::Unresolvable, std::string(text) + ": no piece of the side to move there");
    }
    std::vector<MoveAction> pseudo;
    detail::piece_moves(state.cells(), action.from, pseudo);
    if (std::find(pseudo.begin(), pseudo.end(), action) == pseudo.end()) {
      throw Error(ErrorCode::Unresolvable, std::string(text) + ": piece cannot move that way");
    }
    if (!is_legal(state, action)) {
      throw Error(ErrorCode::LocallyIllegal, std::string(text) + ": leaves the General exposed");
    }
    return tokenize(action, state);
  }

  const MoveToken token = parse_token_text(text);
  try {
    resolve(token, state);
    return token;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Ambiguous || token.disambiguator != Disambiguator::None) throw;
    // Doubled pieces written with an origin file: accept when exactly one of
    // the two can make the move, and normalise to Front/Rear.
    std::optional<MoveToken> unique;
    int hits = 0;
    for (auto dis : {Disambiguator::Front, Disambiguator::Rear}) {
      MoveToken alt = token;
      alt.disambiguator = dis;
      alt.origin_file = 0;
      try {
        const MoveAction action = resolve(alt, state);
        if (relative_file(state.side_to_move(), action.from.file) == token.origin_file) {
          unique = alt;
          ++hits;
        }
      } catch (const Error&) {
      }
    }
    if (hits == 1) return *unique;
    throw;
  }
}

/// Coordinate text (e.g. "h2e2") for an action.
inline std::string coordinate_text(const MoveAction& action) {
  auto sq = [](Square s) {
    return std::string{static_cast<char>('a' + (9 - s.file)), static_cast<char>('0' + s.rank - 1)};
  };
  return sq(action.from) + sq(action.to);
}

namespace detail {

inline bool valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= bytes.size() && extra > 0) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(bytes[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

inline std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  int value = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

inline std::optional<GameResult> parse_result(std::string_view s) {
  s = trim(s);
  if (s == "1-0") return GameResult::RedWins;
  if (s == "0-1") return GameResult::BlackWins;
  if (s == "1/2" || s == "1/2-1/2") return GameResult::Draw;
  if (s == "?" || s == "*") return GameResult::Unknown;
  return std::nullopt;
}

inline bool is_move_number(std::string_view w) {
  if (w.size() < 2 || w.back() != '.') return false;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(w[i]))) return false;
  }
  return true;
}

struct Line {
  std::string_view text;
  std::size_t number;
};

/// Parses one game block; returns nullopt and fills `diag` when the game is rejected.
inline std::optional<GameRecord> parse_block(const std::vector<Line>& lines, std::size_t game, Diagnostic& diag) {
  GameRecord record;
  diag.game = game;
  std::size_t i = 0;
  auto fail = [&](std::size_t line, std::string msg) {
    diag.line = line;
    diag.message = std::move(msg);
    return std::nullopt;
  };
  for (; i < lines.size(); ++i) {
    const auto text = lines[i].text;
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) break;
    const auto key = trim(text.substr(0, colon));
    if (key.empty() || !std::isalpha(static_cast<unsigned char>(key.front()))) break;
    const auto value = trim(text.substr(colon + 1));
    if (key == "Id") {
      record.source_id = std::string(value);
      diag.source_id = record.source_id;
    } else if (key == "RedElo" || key == "BlackElo") {
      const auto elo = parse_int(value);
      if (!elo) return fail(lines[i].number, "bad Elo value");
      (key == "RedElo" ? record.red_elo : record.black_elo) = *elo;
    } else if (key == "Result") {
      const auto r = parse_result(value);
      if (!r) return fail(lines[i].number, "bad Result value");
      record.result = *r;
    }
    // unknown header keys are ignored
  }

  GameState state = initial_state();
  for (; i < lines.size(); ++i) {
    std::string_view rest = lines[i].text;
    while (true) {
      rest = trim(rest);
      if (rest.empty()) break;
      const auto sp = rest.find_first_of(" \t");
      std::string_view word = rest.substr(0, sp);
      rest = sp == std::string_view::npos ? std::string_view{} : rest.substr(sp);
      // "12.C2=5" is tolerated as a number glued to a move
      if (const auto dot = word.find('.'); dot != std::string_view::npos && dot + 1 < word.size() &&
                                           is_move_number(word.substr(0, dot + 1))) {
        word = word.substr(dot + 1);
      }
      if (is_move_number(word) || parse_result(word)) continue;
      const std::size_t ply = record.moves.size() + 1;
      try {
        const MoveToken token = parse_move_text(word, state);
        state = state.with_move_unchecked(resolve(token, state));
        record.moves.push_back(token);
      } catch (const Error& e) {
        diag.ply = ply;
        return fail(lines[i].number, "ply " + std::to_string(ply) + " '" + std::string(word) + "': " + e.what());
      }
    }
  }
  return record;
}

}  // namespace detail

/// Tolerant parse: games that fail to parse or replay are dropped and reported.
/// Throws FramingError only when the bytes are not UTF-8 text.
inline ParsedRecords parse_record_file(std::string_view bytes) {
  if (!detail::valid_utf8(bytes)) throw Error(ErrorCode::FramingError, "input is not valid UTF-8");
  if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xEF\xBB\xBF") bytes.remove_prefix(3);

  ParsedRecords out;
  std::vector<detail::Line> block;
  std::size_t game = 0;
  auto flush = [&] {
    if (block.empty()) return;
    Diagnostic diag;
    if (auto rec = detail::parse_block(block, game, diag)) {
      out.file.records.push_back(std::move(*rec));
    } else {
      out.diagnostics.push_back(std::move(diag));
    }
    ++game;
    block.clear();
  };

  std::size_t pos = 0, number = 0;
  while (pos < bytes.size()) {
    auto end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    std::string_view line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++number;
    pos = end + 1;
    if (detail::trim(line).empty()) {
      flush();
    } else {
      block.push_back({line, number});
    }
  }
  flush();
  return out;
}

inline std::string serialize_record(const GameRecord& record) {
  std::string out;
  out += "Id: " + record.source_id + "\n";
  out += "RedElo: " + std::to_string(record.red_elo) + "\n";
  out += "BlackElo: " + std::to_string(record.black_elo) + "\n";
  out += "Result: " + std::string(result_text(record.result)) + "\n";
  for (std::size_t i = 0; i < record.moves.size(); i += 2) {
    out += std::to_string(i / 2 + 1) + ". " + record.moves[i].to_string();
    if (i + 1 < record.moves.size()) out += " " + record.moves[i + 1].to_string();
    out += "\n";
  }
  return out;
}

inline std::string serialize_records(const std::vector<GameRecord>& records) {
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i) out += "\n";
    out += serialize_record(records[i]);
  }
  return out;
}

}  // namespace xqsv
