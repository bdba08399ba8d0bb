#pragma once

// Command API routing, independent of any network library:
//
//   POST /sessions                    body: session config    -> 201
//   GET  /sessions                                            -> 200
//   GET  /sessions/{id}                                       -> 200
//   POST /sessions/{id}/events        body: {"event": verb, ...}
//   GET  /stats?player=NAME                                   -> 200
//   GET  /devices                                             -> 200
//   POST /devices/{id}/calibrate      body: {"channel", "fidelity"}
//   POST /devices/{id}/kill           body: {} or {"engaged": bool}
//
// Failures return {"error": <code>, "message": ...}. A rejected event is 409
// with error "InvalidEvent" and the phase it arrived in.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "thea/error.hpp"
#include "thea/session_config.hpp"
#include "thea/session_service.hpp"

namespace thea::api {

struct Response {
  int status = 200;
  nlohmann::json body;
};

inline int status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownDevice:
      return 404;
    case ErrorCode::DeviceInUse:
    case ErrorCode::DevicesNotCalibrated:
    case ErrorCode::KillSwitchEngaged:
    case ErrorCode::SessionClosed:
    case ErrorCode::Busy:
      return 409;
    case ErrorCode::LogFormat:
      return 500;
    default:
      return 400;
  }
}

inline Response error(int status, std::string_view code, std::string_view message) {
  return {status, {{"error", std::string(code)}, {"message", std::string(message)}}};
}

// Decodes %XX and '+' in a query value.
inline std::string url_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out.push_back(' ');
    } else if (s[i] == '%' && i + 2 < s.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

struct Target {
  std::vector<std::string> path;
  std::vector<std::pair<std::string, std::string>> query;

  std::optional<std::string> param(std::string_view key) const {
    for (const auto& [k, v] : query)
      if (k == key) return v;
    return std::nullopt;
  }
};

inline Target parse_target(std::string_view target) {
  Target t;
  const auto q = target.find('?');
  std::string_view path = target.substr(0, q);
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const auto j = path.find('/', i);
    const auto seg = path.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i);
    if (!seg.empty()) t.path.push_back(url_decode(seg));
    if (j == std::string_view::npos) break;
    i = j;
  }
  if (q != std::string_view::npos) {
    std::string_view rest = target.substr(q + 1);
    while (!rest.empty()) {
      const auto amp = rest.find('&');
      const auto pair = rest.substr(0, amp);
      const auto eq = pair.find('=');
      if (eq == std::string_view::npos)
        t.query.emplace_back(url_decode(pair), "");
      else
        t.query.emplace_back(url_decode(pair.substr(0, eq)), url_decode(pair.substr(eq + 1)));
      if (amp == std::string_view::npos) break;
      rest = rest.substr(amp + 1);
    }
  }
  return t;
}

class Router {
 public:
  explicit Router(SessionService& service) : service_(service) {}

  Response handle(std::string_view method, std::string_view target, std::string_view body) {
    try {
      return route(method, parse_target(target), body);
    } catch (const Error& e) {
      return error(status_for(e.code()), to_string(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
      return error(400, "BadRequest", e.what());
    } catch (const std::invalid_argument& e) {
      return error(400, "BadRequest", e.what());
    } catch (const std::out_of_range& e) {
      return error(400, "BadRequest", e.what());
    }
  }

 private:
  static nlohmann::json parse_body(std::string_view body) {
    if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) return nlohmann::json::object();
    auto j = nlohmann::json::parse(body);
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "request body must be a JSON object");
    return j;
  }

  Response route(std::string_view method, const Target& t, std::string_view body) {
    const auto& p = t.path;
    const bool get = method == "GET";
    const bool post = method == "POST";

    if (p.size() == 1 && p[0] == "sessions") {
      if (post) {
        const auto j = parse_body(body);
        std::optional<std::string> id;
        if (j.contains("session_id")) id = j.at("session_id").get<std::string>();
        const auto sid = service_.create_session(session_config_from_json(j), id);
        return {201, {{"session_id", sid}, {"session", service_.snapshot(sid)}}};
      }
      if (get) return {200, service_.list_sessions()};
    }
    if (p.size() == 2 && p[0] == "sessions" && get) return {200, service_.snapshot(p[1])};
    if (p.size() == 3 && p[0] == "sessions" && p[2] == "events" && post)
      return dispatch(p[1], parse_body(body));

    if (p.size() == 1 && p[0] == "stats" && get) {
      const auto player = t.param("player");
      if (!player || player->empty()) return error(400, "BadRequest", "player is required");
      return {200, to_json(service_.stats(*player))};
    }

    if (p.size() == 1 && p[0] == "devices" && get) return {200, service_.devices()};
    if (p.size() == 2 && p[0] == "devices" && get) return {200, service_.device(p[1])};
    if (p.size() == 3 && p[0] == "devices" && post) {
      const auto j = parse_body(body);
      if (p[2] == "calibrate")
        return {200, service_.calibrate(p[1], j.at("channel").get<int>(), j.at("fidelity").get<double>())};
      if (p[2] == "kill") {
        std::optional<bool> engage;
        if (j.contains("engaged")) engage = j.at("engaged").get<bool>();
        return {200, service_.toggle_kill(p[1], engage)};
      }
    }
    return error(404, "NotFound", "no route for " + std::string(method));
  }

  Response dispatch(const std::string& id, const nlohmann::json& j) {
    const auto verb = j.at("event").get<std::string>();
    std::vector<std::string> args;
    if (j.contains("hand")) args.push_back(j.at("hand").get<std::string>());
    if (verb == "calibrate") {
      args.push_back(std::to_string(j.at("channel").get<int>()));
      args.push_back(j.at("fidelity").dump());
    }
    const auto r = service_.dispatch(id, verb, args);
    if (r.rejected)
      return {409,
              {{"error", "InvalidEvent"},
               {"phase", control::describe(r.rejected->phase)},
               {"event", r.rejected->event},
               {"session", r.snapshot}}};
    return {200, {{"accepted", true}, {"session", r.snapshot}}};
  }

  SessionService& service_;
};

}  // namespace thea::api
