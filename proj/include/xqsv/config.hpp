#pragma once

// Structure variables: the ten discrete controls that fully determine a
// network, with their candidate values and canonical text form.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "xqsv/dataset.hpp"
#include "xqsv/error.hpp"

namespace xqsv {

enum class RnnKind { LSTM, GRU, BackwardLSTM, BackwardGRU };
enum class Activation { ReLU, Softmax, Linear, Tanh };

inline std::string_view to_string(RnnKind k) {
  switch (k) {
    case RnnKind::LSTM: return "LSTM";
    case RnnKind::GRU: return "GRU";
    case RnnKind::BackwardLSTM: return "BackwardLSTM";
    case RnnKind::BackwardGRU: return "BackwardGRU";
  }
  return "LSTM";
}

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "ReLU";
    case Activation::Softmax: return "Softmax";
    case Activation::Linear: return "Linear";
    case Activation::Tanh: return "Tanh";
  }
  return "ReLU";
}

constexpr bool is_lstm(RnnKind k) { return k == RnnKind::LSTM || k == RnnKind::BackwardLSTM; }
constexpr bool is_backward(RnnKind k) { return k == RnnKind::BackwardLSTM || k == RnnKind::BackwardGRU; }

enum class StructureVariable {
  Memory,
  Rnn,
  RnnDropout,
  RnnHidden,
  RnnActivation,
  BatchNorm,
  FcDropout,
  NumFc,
  FcReg,
  FcActivation,
};

inline constexpr std::array<StructureVariable, 10> kAllStructureVariables = {
    StructureVariable::Memory,        StructureVariable::Rnn,       StructureVariable::RnnDropout,
    StructureVariable::RnnHidden,     StructureVariable::RnnActivation, StructureVariable::BatchNorm,
    StructureVariable::FcDropout,     StructureVariable::NumFc,     StructureVariable::FcReg,
    StructureVariable::FcActivation};

inline std::string_view sv_name(StructureVariable sv) {
  switch (sv) {
    case StructureVariable::Memory: return "m";
    case StructureVariable::Rnn: return "rnn";
    case StructureVariable::RnnDropout: return "rnn_dropout";
    case StructureVariable::RnnHidden: return "rnn_hidden";
    case StructureVariable::RnnActivation: return "rnn_activation";
    case StructureVariable::BatchNorm: return "batch_norm";
    case StructureVariable::FcDropout: return "fc_dropout";
    case StructureVariable::NumFc: return "num_fc";
    case StructureVariable::FcReg: return "fc_reg";
    case StructureVariable::FcActivation: return "fc_activation";
  }
  return "";
}

inline StructureVariable parse_sv(std::string_view name) {
  for (auto sv : kAllStructureVariables) {
    if (sv_name(sv) == name) return sv;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown structure variable '" + std::string(name) + "'");
}

/// Candidate values in canonical text, defaults first where the table lists them.
inline std::vector<std::string> sv_candidates(StructureVariable sv) {
  switch (sv) {
    case StructureVariable::Memory: return {"5", "10", "15", "20"};
    case StructureVariable::Rnn: return {"LSTM", "GRU", "BackwardLSTM", "BackwardGRU"};
    case StructureVariable::RnnDropout: return {"0", "0.05", "0.1", "0.2"};
    case StructureVariable::RnnHidden: return {"512", "1024", "2048"};
    case StructureVariable::RnnActivation: return {"ReLU", "Softmax", "Linear", "Tanh"};
    case StructureVariable::BatchNorm: return {"yes", "no"};
    case StructureVariable::FcDropout: return {"0", "0.05", "0.1", "0.2"};
    case StructureVariable::NumFc: return {"0", "1", "2", "3", "5"};
    case StructureVariable::FcReg: return {"0", "0.001", "0.002", "0.005"};
    case StructureVariable::FcActivation: return {"ReLU", "Softmax", "Linear", "Tanh"};
  }
  return {};
}

namespace detail {

inline std::string number_text(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace detail

/// One assignment of all structure variables, plus the input encoding.
struct StructureConfig {
  MemoryCapacity memory = 5;
  RnnKind rnn = RnnKind::LSTM;
  double rnn_dropout = 0.05;
  int rnn_hidden = 512;
  Activation rnn_activation = Activation::ReLU;
  bool batch_norm = true;
  double fc_dropout = 0.05;
  int num_fc = 2;
  double fc_reg = 0.001;
  Activation fc_activation = Activation::Softmax;

  int embedding = 128;   // input embedding width E
  bool one_hot = false;  // frozen identity embedding of width |V|+1 instead

  friend bool operator==(const StructureConfig&, const StructureConfig&) = default;

  std::string get(StructureVariable sv) const {
    switch (sv) {
      case StructureVariable::Memory: return memory_text(memory);
      case StructureVariable::Rnn: return std::string(to_string(rnn));
      case StructureVariable::RnnDropout: return detail::number_text(rnn_dropout);
      case StructureVariable::RnnHidden: return std::to_string(rnn_hidden);
      case StructureVariable::RnnActivation: return std::string(to_string(rnn_activation));
      case StructureVariable::BatchNorm: return batch_norm ? "yes" : "no";
      case StructureVariable::FcDropout: return detail::number_text(fc_dropout);
      case StructureVariable::NumFc: return std::to_string(num_fc);
      case StructureVariable::FcReg: return detail::number_text(fc_reg);
      case StructureVariable::FcActivation: return std::string(to_string(fc_activation));
    }
    return "";
  }

  /// Sets one variable from text; throws InvalidConfig on unparsable values.
  void set(StructureVariable sv, std::string_view value) {
    value = detail::trim(value);
    auto bad = [&] {
      return Error(ErrorCode::InvalidConfig, std::string(sv_name(sv)) + ": bad value '" + std::string(value) + "'");
    };
    auto activation = [&]() {
      for (auto a : {Activation::ReLU, Activation::Softmax, Activation::Linear, Activation::Tanh}) {
        if (to_string(a) == value) return a;
      }
      throw bad();
    };
    switch (sv) {
      case StructureVariable::Memory: memory = parse_memory(value); break;
      case StructureVariable::Rnn: {
        bool found = false;
        for (auto k : {RnnKind::LSTM, RnnKind::GRU, RnnKind::BackwardLSTM, RnnKind::BackwardGRU}) {
          if (to_string(k) == value) {
            rnn = k;
            found = true;
          }
        }
        if (!found) throw bad();
        break;
      }
      case StructureVariable::RnnDropout:
      case StructureVariable::FcDropout:
      case StructureVariable::FcReg: {
        const auto v = detail::parse_double(value);
        if (!v) throw bad();
        (sv == StructureVariable::RnnDropout ? rnn_dropout : sv == StructureVariable::FcDropout ? fc_dropout : fc_reg) = *v;
        break;
      }
      case StructureVariable::RnnHidden:
      case StructureVariable::NumFc: {
        const auto v = detail::parse_int(value);
        if (!v) throw bad();
        (sv == StructureVariable::RnnHidden ? rnn_hidden : num_fc) = *v;
        break;
      }
      case StructureVariable::RnnActivation: rnn_activation = activation(); break;
      case StructureVariable::FcActivation: fc_activation = activation(); break;
      case StructureVariable::BatchNorm:
        if (value == "yes") {
          batch_norm = true;
        } else if (value == "no") {
          batch_norm = false;
        } else {
          throw bad();
        }
        break;
    }
  }

  /// Throws InvalidConfig naming every field outside its candidate set.
  /// `any_width` admits arbitrary positive hidden widths (reduced test models).
  void validate(bool any_width = false) const {
    std::vector<std::string> offending;
    for (auto sv : kAllStructureVariables) {
      const auto cands = sv_candidates(sv);
      const bool listed = std::find(cands.begin(), cands.end(), get(sv)) != cands.end();
      if (listed) continue;
      if (sv == StructureVariable::Memory && !memory) continue;  // unbounded-memory ablation
      if (sv == StructureVariable::RnnHidden && any_width && rnn_hidden > 0) continue;
      offending.push_back(std::string(sv_name(sv)) + "=" + get(sv));
    }
    if (embedding < 1) offending.push_back("embedding=" + std::to_string(embedding));
    if (!offending.empty()) {
      std::string msg = "invalid structure:";
      for (const auto& o : offending) msg += " " + o;
      throw Error(ErrorCode::InvalidConfig, msg);
    }
  }

  /// `key = value` lines in table order, then the input encoding.
  std::string to_text() const {
    std::string out;
    for (auto sv : kAllStructureVariables) out += std::string(sv_name(sv)) + " = " + get(sv) + "\n";
    out += "embedding = " + std::to_string(embedding) + "\n";
    out += std::string("input = ") + (one_hot ? "one_hot" : "embedding") + "\n";
    return out;
  }

  /// Compact one-line summary used in logs and descriptors.
  std::string summary() const {
    std::string out;
    for (auto sv : kAllStructureVariables) {
      if (!out.empty()) out += " ";
      out += std::string(sv_name(sv)) + "=" + get(sv);
    }
    return out;
  }

  /// Parses `key = value` lines; missing keys keep their defaults.
  static StructureConfig parse(std::string_view text) {
    StructureConfig cfg;
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      auto line = detail::trim(text.substr(pos, end - pos));
      pos = end + 1;
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw Error(ErrorCode::InvalidConfig, "expected key = value");
      const auto key = detail::trim(line.substr(0, eq));
      const auto value = detail::trim(line.substr(eq + 1));
      if (key == "embedding") {
        const auto v = detail::parse_int(value);
        if (!v) throw Error(ErrorCode::InvalidConfig, "bad embedding width");
        cfg.embedding = *v;
      } else if (key == "input") {
        if (value != "one_hot" && value != "embedding") throw Error(ErrorCode::InvalidConfig, "bad input encoding");
        cfg.one_hot = value == "one_hot";
      } else {
        cfg.set(parse_sv(key), value);
      }
    }
    return cfg;
  }
};

}  // namespace xqsv
