#pragma once

// Five-phase coordinate search: each phase grid-searches a pair of structure
// variables with the others held at earlier winners or defaults, selecting by
// validation top-1 accuracy.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xqsv/config.hpp"
#include "xqsv/dataset.hpp"
#include "xqsv/train.hpp"

namespace xqsv {

using SvPair = std::pair<StructureVariable, StructureVariable>;

inline std::vector<SvPair> default_phases() {
  using SV = StructureVariable;
  return {{SV::Memory, SV::Rnn},
          {SV::RnnDropout, SV::RnnHidden},
          {SV::RnnActivation, SV::BatchNorm},
          {SV::FcDropout, SV::NumFc},
          {SV::FcReg, SV::FcActivation}};
}

struct SearchPlan {
  std::vector<SvPair> phases = default_phases();
  std::map<StructureVariable, std::vector<std::string>> candidates;  // overrides of the full candidate sets
  StructureConfig base;       // defaults the search starts from
  bool reduced_width = false; // admit hidden widths outside the candidate table
  int budget = 5;             // epochs per candidate
  std::optional<int> full_budget;  // retrain the winner for this many epochs
  TrainOptions train;
  std::uint64_t seed = 0;

  std::vector<std::string> candidates_for(StructureVariable sv) const {
    const auto it = candidates.find(sv);
    return it != candidates.end() ? it->second : sv_candidates(sv);
  }

  /// Throws InvalidConfig unless the phases cover all ten variables once.
  void validate() const {
    std::set<StructureVariable> seen;
    for (const auto& [a, b] : phases) {
      if (a == b || !seen.insert(a).second || !seen.insert(b).second) {
        throw Error(ErrorCode::InvalidConfig, "search phases must cover each structure variable exactly once");
      }
    }
    if (seen.size() != kAllStructureVariables.size()) {
      throw Error(ErrorCode::InvalidConfig, "search phases must cover all ten structure variables");
    }
    for (const auto& [sv, values] : candidates) {
      if (values.empty()) throw Error(ErrorCode::InvalidConfig, std::string(sv_name(sv)) + ": no candidates");
      for (const auto& v : values) {
        StructureConfig probe = base;
        probe.set(sv, v);
        probe.validate(reduced_width);
      }
    }
    if (budget < 1) throw Error(ErrorCode::InvalidConfig, "budget must be at least one epoch");
    base.validate(reduced_width);
  }

  /// JSON form: {"phases": [["m","rnn"], ...], "candidates": {"m": ["5","10"]},
  /// "base": {"rnn_hidden": "16", "embedding": "8"}, "reduced_width": true,
  /// "budget": 3, "full_budget": 20, "seed": 1, "batch_size": 256,
  /// "learning_rate": 0.001, "patience": 10}
  static SearchPlan from_json(const nlohmann::json& j) {
    SearchPlan plan;
    if (j.contains("phases")) {
      plan.phases.clear();
      for (const auto& p : j.at("phases")) {
        plan.phases.emplace_back(parse_sv(p.at(0).get<std::string>()), parse_sv(p.at(1).get<std::string>()));
      }
    }
    if (j.contains("reduced_width")) plan.reduced_width = j.at("reduced_width").get<bool>();
    if (j.contains("base")) {
      std::string text;
      for (const auto& [k, v] : j.at("base").items()) text += k + " = " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
      plan.base = StructureConfig::parse(text);
    }
    if (j.contains("candidates")) {
      for (const auto& [k, v] : j.at("candidates").items()) {
        std::vector<std::string> values;
        for (const auto& x : v) values.push_back(x.is_string() ? x.get<std::string>() : x.dump());
        plan.candidates[parse_sv(k)] = values;
      }
    }
    plan.budget = j.value("budget", plan.budget);
    if (j.contains("full_budget")) plan.full_budget = j.at("full_budget").get<int>();
    plan.seed = j.value("seed", plan.seed);
    plan.train.batch_size = j.value("batch_size", plan.train.batch_size);
    plan.train.learning_rate = j.value("learning_rate", plan.train.learning_rate);
    plan.train.patience = j.value("patience", plan.train.patience);
    plan.validate();
    return plan;
  }
};

/// Order of increasing complexity within one variable's candidates.
inline double simplicity(StructureVariable sv, const std::string& value) {
  using SV = StructureVariable;
  switch (sv) {
    case SV::Memory: return value == "inf" ? 1e9 : std::stod(value);
    case SV::Rnn: {
      static const std::map<std::string, double> order = {
          {"GRU", 0}, {"LSTM", 1}, {"BackwardGRU", 2}, {"BackwardLSTM", 3}};
      return order.at(value);
    }
    case SV::RnnActivation:
    case SV::FcActivation: {
      static const std::map<std::string, double> order = {{"Linear", 0}, {"ReLU", 1}, {"Tanh", 2}, {"Softmax", 3}};
      return order.at(value);
    }
    case SV::BatchNorm: return value == "yes" ? 1 : 0;
    default: return std::stod(value);
  }
}

struct CandidateResult {
  int phase = 0;  // 1-based
  std::size_t index = 0;
  std::string value_a, value_b;
  StructureConfig config;
  std::optional<double> validation_accuracy;  // empty when training failed
  int epochs = 0;
  double seconds = 0;
  std::string failure;
};

struct PhaseResult {
  SvPair variables;
  std::size_t candidates = 0;
  std::size_t winner = 0;  // index into the candidate list of this phase
  double accuracy = 0;
};

struct SearchLog {
  std::string bin;
  std::vector<CandidateResult> candidates;
  std::vector<PhaseResult> phases;
  StructureConfig best;
  double best_accuracy = 0;
  std::optional<double> retrained_accuracy;

  /// Line-delimited records: one per candidate, one per phase, one final.
  /// Wall times are omitted when `with_times` is false so logs can be diffed.
  std::string to_jsonl(bool with_times = true) const {
    std::string out;
    for (const auto& c : candidates) {
      nlohmann::json j = {{"type", "candidate"},
                          {"phase", c.phase},
                          {"index", c.index},
                          {"values", {c.value_a, c.value_b}},
                          {"config", c.config.summary()},
                          {"epochs", c.epochs}};
      j["validation_accuracy"] = c.validation_accuracy ? nlohmann::json(*c.validation_accuracy) : nlohmann::json();
      if (!c.failure.empty()) j["failure"] = c.failure;
      if (with_times) j["seconds"] = c.seconds;
      out += j.dump() + "\n";
    }
    for (std::size_t p = 0; p < phases.size(); ++p) {
      const auto& ph = phases[p];
      out += nlohmann::json({{"type", "phase"},
                             {"phase", p + 1},
                             {"variables", {sv_name(ph.variables.first), sv_name(ph.variables.second)}},
                             {"candidates", ph.candidates},
                             {"winner", ph.winner},
                             {"accuracy", ph.accuracy}})
                 .dump() +
             "\n";
    }
    nlohmann::json fin = {{"type", "final"}, {"bin", bin}, {"config", best.to_text()}, {"accuracy", best_accuracy}};
    if (retrained_accuracy) fin["retrained_accuracy"] = *retrained_accuracy;
    out += fin.dump() + "\n";
    return out;
  }
};

/// Runs the phases over one bin. `progress` (optional) sees each finished candidate.
inline SearchLog run_search(const SearchPlan& plan, std::span<const EncodedGame> games,
                            std::span<const std::uint8_t> assignment, const EloBin& bin,
                            BinPolicy policy = BinPolicy::PerMover,
                            const std::function<void(const CandidateResult&)>& progress = {}) {
  plan.validate();
  const int vocab = static_cast<int>(standard_vocabulary().size());
  std::map<std::string, DatasetSplit> windows;  // keyed by memory text
  auto split_for = [&](const MemoryCapacity& m) -> const DatasetSplit& {
    const auto key = memory_text(m);
    auto it = windows.find(key);
    if (it == windows.end()) it = windows.emplace(key, make_split(games, assignment, m, bin, plan.seed, policy)).first;
    return it->second;
  };
  if (split_for(plan.base.memory).train.empty()) throw Error(ErrorCode::InvalidConfig, "bin has no training samples");

  SearchLog log;
  log.bin = bin.label();
  StructureConfig incumbent = plan.base;
  for (std::size_t p = 0; p < plan.phases.size(); ++p) {
    const auto [sa, sb] = plan.phases[p];
    const auto ca = plan.candidates_for(sa);
    const auto cb = plan.candidates_for(sb);
    const std::string def_a = plan.base.get(sa), def_b = plan.base.get(sb);
    const std::size_t first = log.candidates.size();
    for (const auto& va : ca) {
      for (const auto& vb : cb) {
        CandidateResult r;
        r.phase = static_cast<int>(p + 1);
        r.index = log.candidates.size() - first;
        r.value_a = va;
        r.value_b = vb;
        r.config = incumbent;
        r.config.set(sa, va);
        r.config.set(sb, vb);
        const auto start = std::chrono::steady_clock::now();
        try {
          const auto& split = split_for(r.config.memory);
          Network<float> net(r.config, vocab, plan.seed, plan.reduced_width);
          TrainOptions opts = plan.train;
          opts.max_epochs = plan.budget;
          opts.seed = plan.seed;
          const auto res = train(net, split.train, split.validation, opts);
          r.epochs = static_cast<int>(res.history.size());
          r.validation_accuracy = res.best_validation_accuracy.value_or(top1_accuracy(net, split.validation));
        } catch (const Error& e) {
          r.failure = std::string(to_string(e.code())) + ": " + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (progress) progress(r);
        log.candidates.push_back(std::move(r));
      }
    }

    // Highest accuracy; ties toward more default values, then simpler ones.
    std::optional<std::size_t> win;
    auto key = [&](const CandidateResult& c) {
      const int defaults = (c.value_a == def_a) + (c.value_b == def_b);
      return std::tuple(-*c.validation_accuracy, -defaults, simplicity(sa, c.value_a), simplicity(sb, c.value_b));
    };
    for (std::size_t i = first; i < log.candidates.size(); ++i) {
      const auto& c = log.candidates[i];
      if (!c.validation_accuracy) continue;
      if (!win || key(c) < key(log.candidates[*win])) win = i;
    }
    if (!win) throw Error(ErrorCode::DivergenceDetected, "every candidate of phase " + std::to_string(p + 1) + " failed");
    const auto& w = log.candidates[*win];
    incumbent = w.config;
    log.phases.push_back({plan.phases[p], log.candidates.size() - first, *win - first, *w.validation_accuracy});
  }
  log.best = incumbent;
  log.best_accuracy = log.phases.back().accuracy;

  if (plan.full_budget) {
    const auto& split = split_for(incumbent.memory);
    Network<float> net(incumbent, vocab, plan.seed, plan.reduced_width);
    TrainOptions opts = plan.train;
    opts.max_epochs = *plan.full_budget;
    opts.seed = plan.seed;
    const auto res = train(net, split.train, split.validation, opts);
    log.retrained_accuracy = res.best_validation_accuracy.value_or(0.0);
  }
  return log;
}

/// Table with one row per searched bin: range, accuracy and all ten variables.
inline std::string search_report(std::span<const SearchLog> logs) {
  std::ostringstream os;
  os << "Elo Range | Acc. | m | RNN | RNN dropout | RNN hidden | RNN act. | BN | FC dropout | # FC | FC reg. | FC act.\n";
  for (const auto& log : logs) {
    char acc[32];
    std::snprintf(acc, sizeof acc, "%.2f", 100.0 * log.best_accuracy);
    os << log.bin << " | " << acc;
    for (auto sv : kAllStructureVariables) os << " | " << log.best.get(sv);
    os << "\n";
  }
  std::size_t failed = 0;
  for (const auto& log : logs) {
    for (const auto& c : log.candidates) failed += !c.failure.empty();
  }
  if (failed) os << "(" << failed << " failed candidates excluded)\n";
  return os.str();
}

}  // namespace xqsv
