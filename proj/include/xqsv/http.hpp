#pragma once

// HTTP + JSON front end for Service:
//   GET  /models
//   POST /sessions            {model_id, human_side, policy, seed?}
//   POST /sessions/{id}/moves {move, show_distribution?}
//   GET  /sessions/{id}
//   POST /analyze             {model_id, history, actual?, ks?, ps?}
// Errors are returned as {code, message, detail}.

#include <optional>
#include <string>

#include "xqsv/service.hpp"
#include "httplib.h"
#include "json.hpp"

namespace xqsv {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownModel:
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::NotYourTurn:
    case ErrorCode::SessionFinished: return 409;
    case ErrorCode::IllegalMove:
    case ErrorCode::IllegalSequence:
    case ErrorCode::ParseError:
    case ErrorCode::InvalidConfig:
    case ErrorCode::Unresolvable:
    case ErrorCode::Ambiguous:
    case ErrorCode::LocallyIllegal:
    case ErrorCode::UnknownToken: return 400;
    default: return 500;
  }
}

inline json error_body(ErrorCode code, const std::string& message, json detail = json::object()) {
  return {{"code", to_string(code)}, {"message", message}, {"detail", std::move(detail)}};
}

/// Registers the API routes on `server`; `static_dir` (optional) is served at "/".
inline void install_routes(httplib::Server& server, Service& service,
                           const std::optional<std::string>& static_dir = std::nullopt) {
  auto reply = [](httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto guarded = [reply](auto fn) {
    return [fn, reply](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const ServiceError& e) {
        reply(res, error_body(e.code(), e.what(), e.detail()), http_status(e.code()));
      } catch (const ParseError& e) {
        reply(res, error_body(e.code(), e.what(), {{"offset", e.offset()}}), 400);
      } catch (const Error& e) {
        reply(res, error_body(e.code(), e.what()), http_status(e.code()));
      } catch (const json::exception& e) {
        reply(res, error_body(ErrorCode::ParseError, std::string("bad request body: ") + e.what()), 400);
      }
    };
  };
  auto body_of = [](const httplib::Request& req) {
    const auto j = json::parse(req.body.empty() ? "{}" : req.body);
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "request body must be a JSON object");
    return j;
  };

  server.Get("/models", guarded([&service, reply](const httplib::Request&, httplib::Response& res) {
               reply(res, service.list_models());
             }));

  server.Post("/sessions", guarded([&service, reply, body_of](const httplib::Request& req, httplib::Response& res) {
                const auto j = body_of(req);
                const auto side = j.value("human_side", std::string("Red"));
                if (side != "Red" && side != "Black") throw Error(ErrorCode::InvalidConfig, "human_side must be Red or Black");
                const auto policy = j.value("policy", std::string("argmax"));
                if (policy != "argmax" && policy != "sample") throw Error(ErrorCode::InvalidConfig, "policy must be argmax or sample");
                const auto seed = j.value("seed", std::uint64_t{0});
                const PredictPolicy p = policy == "sample" ? PredictPolicy::sample(seed)
                                                           : PredictPolicy{PredictPolicy::Kind::Argmax, seed};
                reply(res,
                      service.new_session(j.at("model_id").get<std::string>(),
                                          side == "Black" ? Side::Black : Side::Red, p),
                      201);
              }));

  server.Post(R"(/sessions/([^/]+)/moves)",
              guarded([&service, reply, body_of](const httplib::Request& req, httplib::Response& res) {
                const auto j = body_of(req);
                reply(res, service.play(req.matches[1], j.at("move").get<std::string>(),
                                        j.value("show_distribution", false)));
              }));

  server.Get(R"(/sessions/([^/]+))", guarded([&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.get_session(req.matches[1]));
             }));

  server.Post("/analyze", guarded([&service, reply, body_of](const httplib::Request& req, httplib::Response& res) {
                const auto j = body_of(req);
                std::optional<std::string> actual;
                if (j.contains("actual") && !j.at("actual").is_null()) actual = j.at("actual").get<std::string>();
                const auto ks = j.value("ks", std::vector<std::size_t>{1, 3, 5});
                const auto ps = j.value("ps", std::vector<double>{0.0, 0.5, 0.9});
                reply(res, service.analyze(j.at("model_id").get<std::string>(),
                                           j.value("history", std::vector<std::string>{}), actual, ks, ps));
              }));

  if (static_dir) server.set_mount_point("/", *static_dir);
}

}  // namespace xqsv
