#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "xqsv/service.hpp"
#include "xqsv/http.hpp"

using namespace xqsv;
using json = nlohmann::json;

namespace {

namespace fs = std::filesystem;

StructureConfig small() {
  StructureConfig c;
  c.rnn = RnnKind::GRU;
  c.rnn_hidden = 16;
  c.embedding = 8;
  c.fc_activation = Activation::ReLU;
  return c;
}

fs::path model_dir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "xqsv_service_models";
    fs::remove_all(d);
    fs::create_directories(d);
    const Network<float> net(small(), static_cast<int>(standard_vocabulary().size()), 5, true);
    write_file((d / "m1.ckpt").string(), save_checkpoint(net, {{1400, 1500}, 0.3}));
    write_file((d / "bad.ckpt").string(), "XQSVCKPT garbage");
    return d;
  }();
  return dir;
}

/// Plays the recorded history from the initial position and checks every move is legal.
bool history_is_legal(const json& history) {
  GameState s = initial_state();
  for (const auto& m : history) {
    try {
      s = apply_move(s, resolve(parse_move_text(m.get<std::string>(), s), s));
    } catch (const Error&) {
      return false;
    }
  }
  return true;
}

class Http : public ::testing::Test {
 protected:
  void SetUp() override {
    service_ = std::make_unique<Service>(ModelRegistry(model_dir()));
    install_routes(server_, *service_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  std::pair<int, json> post(const std::string& path, const std::string& body) {
    const auto r = client_->Post(path, body, "application/json");
    if (!r) return {0, json()};
    return {r->status, json::parse(r->body)};
  }
  std::pair<int, json> get(const std::string& path) {
    const auto r = client_->Get(path);
    if (!r) return {0, json()};
    return {r->status, json::parse(r->body)};
  }

  std::unique_ptr<Service> service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST_F(Http, ListModels) {
  const auto [status, body] = get("/models");
  EXPECT_EQ(status, 200);
  ASSERT_EQ(body.size(), 2u);
  EXPECT_EQ(body[0]["id"], "bad");
  EXPECT_FALSE(body[0]["loadable"].get<bool>());
  EXPECT_FALSE(body[0]["reason"].get<std::string>().empty());
  EXPECT_EQ(body[1]["id"], "m1");
  EXPECT_EQ(body[1]["elo_range"], "1400-1500");
  EXPECT_DOUBLE_EQ(body[1]["accuracy"].get<double>(), 0.3);
}

TEST_F(Http, PlayAGameOfMoves) {
  auto [status, s] = post("/sessions", R"({"model_id": "m1"})");
  ASSERT_EQ(status, 201);
  EXPECT_EQ(s["legal_moves"].size(), 44u);
  EXPECT_EQ(s["side_to_move"], "Red");
  const std::string id = s["session_id"];
  auto [st1, r1] = post("/sessions/" + id + "/moves", R"({"move": "C2=5"})");
  ASSERT_EQ(st1, 200) << r1.dump();
  ASSERT_EQ(r1["history"].size(), 2u);
  EXPECT_EQ(r1["history"][0], "C2=5");
  EXPECT_EQ(r1["history_coords"][0], "h2e2");
  EXPECT_EQ(r1["reply"], r1["history"][1]);
  EXPECT_EQ(r1["side_to_move"], "Red");
  auto [st2, r2] = post("/sessions/" + id + "/moves", R"({"move": "b0c2", "show_distribution": true})");
  ASSERT_EQ(st2, 200) << r2.dump();
  EXPECT_EQ(r2["history"][2], "H8+7");
  ASSERT_FALSE(r2["distribution"].empty());
  EXPECT_LE(r2["distribution"].size(), 10u);
  double mass = 0;
  for (const auto& e : r2["distribution"]) mass += e["prob"].get<double>();
  EXPECT_LE(mass, 1.0 + 1e-9);
  EXPECT_TRUE(history_is_legal(r2["history"]));
  const auto [st3, g] = get("/sessions/" + id);
  EXPECT_EQ(st3, 200);
  EXPECT_EQ(g["history"], r2["history"]);
}

TEST_F(Http, IllegalMoveLeavesSessionUnchanged) {
  const auto [status, s] = post("/sessions", R"({"model_id": "m1"})");
  ASSERT_EQ(status, 201);
  const std::string id = s["session_id"];
  const auto before = get("/sessions/" + id).second;
  const auto [st, err] = post("/sessions/" + id + "/moves", R"({"move": "R1+5"})");
  EXPECT_EQ(st, 400);
  EXPECT_EQ(err["code"], "IllegalMove");
  EXPECT_EQ(err["detail"]["legal_moves"].size(), 44u);
  EXPECT_EQ(get("/sessions/" + id).second, before);
  const auto [st2, err2] = post("/sessions/" + id + "/moves", R"({"move": "Z9**"})");
  EXPECT_EQ(st2, 400);
  EXPECT_EQ(err2["code"], "ParseError");
  EXPECT_EQ(err2["detail"]["offset"], 0);
  EXPECT_EQ(get("/sessions/" + id).second, before);
}

TEST_F(Http, ErrorStatuses) {
  EXPECT_EQ(get("/sessions/nope").first, 404);
  EXPECT_EQ(post("/sessions/nope/moves", R"({"move": "C2=5"})").first, 404);
  const auto [st, body] = post("/sessions", R"({"model_id": "missing"})");
  EXPECT_EQ(st, 404);
  EXPECT_EQ(body["code"], "UnknownModel");
  EXPECT_EQ(post("/sessions", R"({"model_id": )").first, 400);
  EXPECT_EQ(post("/sessions", R"({"model_id": "m1", "human_side": "Green"})").first, 400);
  EXPECT_EQ(post("/sessions", R"({})").first, 400);
  EXPECT_EQ(http_status(ErrorCode::NotYourTurn), 409);
  EXPECT_EQ(http_status(ErrorCode::SessionFinished), 409);
  EXPECT_EQ(http_status(ErrorCode::IoError), 500);
}

TEST_F(Http, HumanBlackGetsOpeningReply) {
  const auto [status, s] = post("/sessions", R"({"model_id": "m1", "human_side": "Black", "policy": "sample", "seed": 3})");
  ASSERT_EQ(status, 201);
  ASSERT_EQ(s["history"].size(), 1u);
  EXPECT_EQ(s["side_to_move"], "Black");
  EXPECT_EQ(s["policy"], "sample");
  EXPECT_TRUE(history_is_legal(s["history"]));
}

TEST_F(Http, Analyze) {
  const auto [status, a] =
      post("/analyze", R"({"model_id": "m1", "history": ["C2=5"], "actual": "H8+7", "ks": [1, 5, 753], "ps": [0, 1]})");
  ASSERT_EQ(status, 200) << a.dump();
  EXPECT_EQ(a["side_to_move"], "Black");
  EXPECT_EQ(a["actual"], "H8+7");
  const auto rank = a["rank"].get<std::size_t>();
  EXPECT_GE(rank, 1u);
  EXPECT_EQ(a["top_k"]["1"].get<bool>(), rank == 1);
  EXPECT_TRUE(a["top_k"]["753"].get<bool>());
  EXPECT_TRUE(a["top_p"]["1"].get<bool>());
  EXPECT_EQ(a["top_p"]["0"].get<bool>(), rank == 1);
  double mass = 0;
  GameState s = apply_move(initial_state(), {{2, 3}, {5, 3}});
  for (const auto& e : a["distribution"]) {
    mass += e["prob"].get<double>();
    EXPECT_NO_THROW(resolve(parse_token_text(e["move"].get<std::string>()), s));
  }
  EXPECT_NEAR(mass, 1.0, 1e-6);
  const auto [st2, err] = post("/analyze", R"({"model_id": "m1", "history": ["C2=5", "C2=5", "R1+5"]})");
  EXPECT_EQ(st2, 400);
  EXPECT_EQ(err["code"], "IllegalSequence");
  EXPECT_EQ(err["detail"]["index"], 2);
}

TEST(Service, SamplingIsReproducible) {
  Service a{ModelRegistry(model_dir())}, b{ModelRegistry(model_dir())};
  const auto sa = a.new_session("m1", Side::Red, PredictPolicy::sample(42));
  const auto sb = b.new_session("m1", Side::Red, PredictPolicy::sample(42));
  json ra, rb;
  for (const char* m : {"C2=5", "H2+3"}) {
    ra = a.play(sa["session_id"], m);
    rb = b.play(sb["session_id"], m);
  }
  EXPECT_EQ(ra["history"], rb["history"]);
}

TEST(Service, PersistenceRestoresSessions) {
  const auto dir = fs::temp_directory_path() / "xqsv_service_sessions";
  fs::remove_all(dir);
  json before;
  std::string id;
  {
    Service s{ModelRegistry(model_dir()), dir};
    id = s.new_session("m1", Side::Black, PredictPolicy::sample(9))["session_id"];
    const auto legal = s.get_session(id)["legal_moves"];
    before = s.play(id, legal[0]["move"].get<std::string>());
    before.erase("reply");
    before.erase("reply_coord");
  }
  Service restored{ModelRegistry(model_dir()), dir};
  EXPECT_EQ(restored.get_session(id), before);
  const auto fresh = restored.new_session("m1", Side::Red, PredictPolicy::argmax());
  EXPECT_NE(fresh["session_id"], id);
  fs::remove_all(dir);
}
