#pragma once

// Play and analysis service: a model registry over a checkpoint directory,
// in-memory game sessions with optional append-log persistence, and the
// JSON views the HTTP layer returns.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "xqsv/checkpoint.hpp"
#include "xqsv/eval.hpp"
#include "xqsv/notation.hpp"
#include "xqsv/predict.hpp"

namespace xqsv {

using nlohmann::json;

/// An error whose JSON body carries extra detail (e.g. the legal moves).
class ServiceError : public Error {
 public:
  ServiceError(ErrorCode code, const std::string& message, json detail = json::object())
      : Error(code, message), detail_(std::move(detail)) {}
  const json& detail() const { return detail_; }

 private:
  json detail_;
};

struct ModelDescriptor {
  std::string id;
  EloBin bin;
  std::string config;
  std::optional<double> accuracy;
  bool loadable = true;
  std::string reason;
};

inline json to_json(const ModelDescriptor& d) {
  json j = {{"id", d.id}, {"loadable", d.loadable}};
  if (d.loadable) {
    j["elo_range"] = d.bin.label();
    j["config"] = d.config;
    j["accuracy"] = d.accuracy ? json(*d.accuracy) : json();
  } else {
    j["reason"] = d.reason;
  }
  return j;
}

/// Checkpoints by id; the id of a file model is its name without ".ckpt".
class ModelRegistry {
 public:
  ModelRegistry() = default;

  explicit ModelRegistry(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) return;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".ckpt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto id = f.stem().string();
      try {
        add(id, load_checkpoint(read_file(f.string())));
      } catch (const Error& e) {
        broken_[id] = std::string(to_string(e.code())) + ": " + e.what();
      }
    }
  }

  void add(const std::string& id, LoadedModel model) {
    models_.insert_or_assign(id, std::make_shared<const LoadedModel>(std::move(model)));
  }

  std::shared_ptr<const LoadedModel> get(const std::string& id) const {
    const auto it = models_.find(id);
    if (it == models_.end()) throw ServiceError(ErrorCode::UnknownModel, "unknown model '" + id + "'");
    return it->second;
  }

  std::vector<ModelDescriptor> list() const {
    std::map<std::string, ModelDescriptor> all;
    for (const auto& [id, m] : models_) {
      all[id] = {id, m->meta.bin, m->net.config().summary(), m->meta.accuracy, true, ""};
    }
    for (const auto& [id, reason] : broken_) all[id] = {id, {}, "", std::nullopt, false, reason};
    std::vector<ModelDescriptor> out;
    for (auto& [id, d] : all) out.push_back(std::move(d));
    return out;
  }

 private:
  std::map<std::string, std::shared_ptr<const LoadedModel>> models_;
  std::map<std::string, std::string> broken_;
};

enum class SessionStatus { Ongoing, HumanWins, ModelWins };

inline std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Ongoing: return "Ongoing";
    case SessionStatus::HumanWins: return "HumanWins";
    case SessionStatus::ModelWins: return "ModelWins";
  }
  return "Ongoing";
}

struct Session {
  std::string id;
  std::string model_id;
  Side human_side = Side::Red;
  PredictPolicy policy;
  std::vector<MoveToken> history;
  std::vector<std::string> coords;  // the same moves as coordinate text
  std::vector<int> indices;
  GameState state = initial_state();
  SessionStatus status = SessionStatus::Ongoing;
  std::mutex mutex;
};

inline json legal_move_list(const GameState& state) {
  json out = json::array();
  for (const auto& mv : legal_moves(state)) {
    try {
      out.push_back({{"move", tokenize(mv, state).to_string()}, {"coord", coordinate_text(mv)}});
    } catch (const Error&) {
    }
  }
  return out;
}

inline json top_entries(const PredictionDistribution& dist, std::size_t limit,
                        const MoveVocabulary& vocab = standard_vocabulary()) {
  json out = json::array();
  for (std::size_t i : ranking(dist.probs)) {
    if (out.size() >= limit || dist.probs[i] <= 0) break;
    out.push_back({{"move", vocab.decode(static_cast<int>(i)).to_string()}, {"prob", dist.probs[i]}});
  }
  return out;
}

class Service {
 public:
  explicit Service(ModelRegistry registry, std::optional<std::filesystem::path> persist_dir = std::nullopt)
      : registry_(std::move(registry)), persist_(std::move(persist_dir)) {
    if (persist_) restore();
  }

  json list_models() const {
    json out = json::array();
    for (const auto& d : registry_.list()) out.push_back(to_json(d));
    return out;
  }

  json new_session(const std::string& model_id, Side human_side, PredictPolicy policy) {
    const auto model = registry_.get(model_id);
    auto s = std::make_shared<Session>();
    s->model_id = model_id;
    s->human_side = human_side;
    s->policy = policy;
    {
      std::lock_guard lock(mutex_);
      std::ostringstream id;
      id << "s" << std::hex << ++counter_;
      s->id = id.str();
      sessions_[s->id] = s;
    }
    std::lock_guard lock(s->mutex);
    log_event(*s, {{"event", "create"},
                   {"model_id", model_id},
                   {"human_side", to_string(human_side)},
                   {"policy", policy.kind == PredictPolicy::Kind::Sample ? "sample" : "argmax"},
                   {"seed", policy.seed}});
    if (human_side == Side::Black) model_reply(*s, *model);
    return view(*s);
  }

  json get_session(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return view(*s);
  }

  /// Applies the human move and, if the game continues, the model's reply.
  /// A failed call leaves the session unchanged.
  json play(const std::string& id, const std::string& move_text, bool show_distribution = false) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (s->status != SessionStatus::Ongoing) throw ServiceError(ErrorCode::SessionFinished, "the game is over");
    if (s->state.side_to_move() != s->human_side) throw ServiceError(ErrorCode::NotYourTurn, "waiting for the model");
    const auto model = registry_.get(s->model_id);
    MoveToken token;
    try {
      token = parse_move_text(move_text, s->state);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ServiceError(ErrorCode::IllegalMove, std::string("illegal move '") + move_text + "': " + e.what(),
                         {{"legal_moves", legal_move_list(s->state)}});
    }
    append(*s, token);
    log_event(*s, {{"event", "move"}, {"move", token.to_string()}});
    json out;
    if (s->status == SessionStatus::Ongoing) {
      const auto dist = model_reply(*s, *model);
      out = view(*s);
      out["reply"] = s->history.back().to_string();
      out["reply_coord"] = s->coords.back();
      if (show_distribution) out["distribution"] = top_entries(dist, 10);
    } else {
      out = view(*s);
    }
    return out;
  }

  /// Filtered distribution after `history` and the metric flags of `actual`.
  json analyze(const std::string& model_id, const std::vector<std::string>& history,
               const std::optional<std::string>& actual, const std::vector<std::size_t>& ks,
               const std::vector<double>& ps) const {
    const auto model = registry_.get(model_id);
    GameState state = initial_state();
    std::vector<int> indices;
    for (std::size_t i = 0; i < history.size(); ++i) {
      try {
        const auto token = parse_move_text(history[i], state);
        state = apply_move(state, resolve(token, state));
        indices.push_back(standard_vocabulary().encode(token));
      } catch (const Error& e) {
        throw ServiceError(ErrorCode::IllegalSequence, e.what(), {{"index", i}});
      }
    }
    const auto dist = filtered_distribution(model->net, indices, state);
    json out = {{"distribution", top_entries(dist, dist.probs.size())}, {"side_to_move", to_string(state.side_to_move())}};
    if (actual) {
      int y = 0;
      try {
        y = standard_vocabulary().encode(parse_move_text(*actual, state));
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw ServiceError(ErrorCode::IllegalMove, e.what(), {{"legal_moves", legal_move_list(state)}});
      }
      json tk = json::object(), tp = json::object();
      for (auto k : ks) tk[std::to_string(k)] = top_k_correct(dist.probs, y, k);
      for (auto p : ps) tp[detail::number_text(p)] = top_p_correct(dist.probs, y, p);
      out["actual"] = standard_vocabulary().decode(y).to_string();
      out["rank"] = rank_of(dist.probs, y) + 1;
      out["top_k"] = tk;
      out["top_p"] = tp;
    }
    return out;
  }

 private:
  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(ErrorCode::UnknownSession, "unknown session '" + id + "'");
    return it->second;
  }

  static void append(Session& s, const MoveToken& token) {
    const auto action = resolve(token, s.state);
    s.coords.push_back(coordinate_text(action));
    s.state = apply_move(s.state, action);
    s.history.push_back(token);
    s.indices.push_back(standard_vocabulary().encode(token));
    switch (game_outcome(s.state)) {
      case Outcome::Ongoing: s.status = SessionStatus::Ongoing; break;
      case Outcome::RedWins:
        s.status = s.human_side == Side::Red ? SessionStatus::HumanWins : SessionStatus::ModelWins;
        break;
      case Outcome::BlackWins:
        s.status = s.human_side == Side::Black ? SessionStatus::HumanWins : SessionStatus::ModelWins;
        break;
    }
  }

  /// Sampling draws from a stream keyed by (seed, ply) so a session replays identically.
  PredictionDistribution model_reply(Session& s, const LoadedModel& model) {
    const auto dist = filtered_distribution(model.net, s.indices, s.state);
    Rng rng = make_rng(s.policy.seed, 1000 + s.history.size());
    const auto choice = static_cast<int>(choose_index(dist, s.policy, &rng));
    const auto& token = standard_vocabulary().decode(choice);
    if (!is_legal(s.state, resolve(token, s.state))) {
      throw Error(ErrorCode::InvalidState, "model reply is not locally legal");
    }
    append(s, token);
    log_event(s, {{"event", "move"}, {"move", token.to_string()}});
    return dist;
  }

  static json view(const Session& s) {
    json hist = json::array();
    for (const auto& t : s.history) hist.push_back(t.to_string());
    json out = {{"session_id", s.id},
                {"model_id", s.model_id},
                {"human_side", to_string(s.human_side)},
                {"policy", s.policy.kind == PredictPolicy::Kind::Sample ? "sample" : "argmax"},
                {"seed", s.policy.seed},
                {"history", hist},
                {"history_coords", s.coords},
                {"status", to_string(s.status)},
                {"side_to_move", to_string(s.state.side_to_move())},
                {"board", s.state.to_board_text()}};
    out["legal_moves"] = s.status == SessionStatus::Ongoing ? legal_move_list(s.state) : json::array();
    return out;
  }

  void log_event(const Session& s, const json& event) {
    if (!persist_ || replaying_) return;
    std::filesystem::create_directories(*persist_);
    std::ofstream f(*persist_ / (s.id + ".jsonl"), std::ios::app);
    f << event.dump() << "\n";
    if (!f) throw Error(ErrorCode::IoError, "cannot append session log for " + s.id);
  }

  void restore() {
    if (!std::filesystem::is_directory(*persist_)) return;
    replaying_ = true;
    for (const auto& e : std::filesystem::directory_iterator(*persist_)) {
      if (e.path().extension() != ".jsonl") continue;
      std::ifstream f(e.path());
      auto s = std::make_shared<Session>();
      s->id = e.path().stem().string();
      std::string line;
      bool ok = true;
      while (ok && std::getline(f, line)) {
        if (line.empty()) continue;
        try {
          const auto ev = json::parse(line);
          if (ev.at("event") == "create") {
            s->model_id = ev.at("model_id").get<std::string>();
            s->human_side = ev.at("human_side") == "Black" ? Side::Black : Side::Red;
            s->policy = ev.at("policy") == "sample" ? PredictPolicy::sample(ev.at("seed").get<std::uint64_t>())
                                                    : PredictPolicy{PredictPolicy::Kind::Argmax,
                                                                    ev.at("seed").get<std::uint64_t>()};
          } else {
            append(*s, parse_move_text(ev.at("move").get<std::string>(), s->state));
          }
        } catch (const std::exception&) {
          ok = false;
        }
      }
      if (!ok) continue;
      sessions_[s->id] = s;
      if (s->id.size() > 1 && s->id[0] == 's') {
        counter_ = std::max<std::uint64_t>(counter_, std::stoull(s->id.substr(1), nullptr, 16));
      }
    }
    replaying_ = false;
  }

  ModelRegistry registry_;
  std::optional<std::filesystem::path> persist_;
  bool replaying_ = false;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

}  // namespace xqsv
