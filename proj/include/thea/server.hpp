#pragma once

// HTTP + WebSocket front end for SessionService (Boost.Beast, blocking I/O,
// one thread per connection). The command API is served by api::Router; a
// WebSocket upgrade on /sessions/{id}/stream[?from=SEQ] subscribes to that
// session's log records, one JSON record per text message. The stream is
// one-way: commands never travel on it.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "thea/api.hpp"
#include "thea/session_service.hpp"

namespace thea {

class Server {
 public:
  // Port 0 picks a free port; see port().
  Server(SessionService& service, unsigned short port, const std::string& address = "127.0.0.1")
      : service_(service), router_(service), acceptor_(ioc_) {
    namespace net = boost::asio;
    const net::ip::tcp::endpoint ep(net::ip::make_address(address), port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  // tick_ms > 0 also runs a ticker that advances sessions to the clock.
  void start(int tick_ms = 5) {
    accept_next();
    accept_thread_ = std::thread([this] { ioc_.run(); });
    if (tick_ms > 0)
      ticker_ = std::thread([this, tick_ms] {
        while (!stopping_) {
          service_.pump();
          std::this_thread::sleep_for(std::chrono::milliseconds(tick_ms));
        }
      });
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    ioc_.stop();
    if (accept_thread_.joinable()) accept_thread_.join();
    if (ticker_.joinable()) ticker_.join();
    std::vector<std::shared_ptr<Conn>> conns;
    {
      std::lock_guard lock(mu_);
      conns.swap(conns_);
    }
    for (auto& c : conns) {
      boost::system::error_code ec;
      c->socket.shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
    }
    for (auto& c : conns)
      if (c->thread.joinable()) c->thread.join();
  }

 private:
  using tcp = boost::asio::ip::tcp;
  using Request = boost::beast::http::request<boost::beast::http::string_body>;
  using HttpResponse = boost::beast::http::response<boost::beast::http::string_body>;

  struct Conn {
    explicit Conn(tcp::socket s) : socket(std::move(s)) {}
    tcp::socket socket;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void accept_next() {
    acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
      if (ec || stopping_) return;
      auto c = std::make_shared<Conn>(std::move(socket));
      {
        std::lock_guard lock(mu_);
        reap();
        conns_.push_back(c);
        c->thread = std::thread([this, c] {
          serve(*c);
          c->done = true;
        });
      }
      accept_next();
    });
  }

  // Joins connection threads that have finished. Caller holds mu_.
  void reap() {
    std::erase_if(conns_, [](const std::shared_ptr<Conn>& c) {
      if (!c->done) return false;
      c->thread.join();
      return true;
    });
  }

  static void set_common(HttpResponse& res) {
    namespace http = boost::beast::http;
    res.set(http::field::server, "thea");
    res.set(http::field::access_control_allow_origin, "*");
    res.set(http::field::access_control_allow_headers, "Content-Type");
    res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
  }

  HttpResponse respond(const Request& req) {
    namespace http = boost::beast::http;
    HttpResponse res;
    res.version(req.version());
    res.keep_alive(req.keep_alive());
    set_common(res);
    if (req.method() == http::verb::options) {
      res.result(http::status::no_content);
      res.prepare_payload();
      return res;
    }
    const auto r = router_.handle(std::string(req.method_string()), std::string(req.target()), req.body());
    res.result(static_cast<http::status>(r.status));
    res.set(http::field::content_type, "application/json");
    res.body() = r.body.dump();
    res.prepare_payload();
    return res;
  }

  void serve(Conn& c) {
    namespace http = boost::beast::http;
    namespace websocket = boost::beast::websocket;
    boost::beast::flat_buffer buffer;
    for (;;) {
      Request req;
      boost::system::error_code ec;
      http::read(c.socket, buffer, req, ec);
      if (ec) break;
      if (websocket::is_upgrade(req)) {
        stream(c, std::move(req));
        break;
      }
      auto res = respond(req);
      http::write(c.socket, res, ec);
      if (ec || !req.keep_alive()) break;
    }
    boost::system::error_code ec;
    c.socket.shutdown(tcp::socket::shutdown_both, ec);
  }

  void stream(Conn& c, Request req) {
    namespace http = boost::beast::http;
    namespace websocket = boost::beast::websocket;
    const auto target = api::parse_target(std::string(req.target()));
    const auto& p = target.path;
    std::uint64_t from = 1;
    if (auto f = target.param("from")) {
      try {
        from = std::stoull(*f);
      } catch (const std::exception&) {
        reject(c, req, 400, "BadRequest", "from must be a record sequence number");
        return;
      }
    }
    if (p.size() != 3 || p[0] != "sessions" || p[2] != "stream") {
      reject(c, req, 404, "NotFound", "no stream at this path");
      return;
    }
    const std::string id = p[1];

    struct Queue {
      std::mutex mu;
      std::condition_variable cv;
      std::deque<std::string> lines;
    };
    auto q = std::make_shared<Queue>();
    std::uint64_t token = 0;
    try {
      // Subscribing before the handshake keeps the replay and the live tail
      // in one unbroken sequence.
      token = service_.subscribe(id, from, [q](const SessionLogRecord& r) {
        std::lock_guard lock(q->mu);
        q->lines.push_back(to_json(r).dump());
        q->cv.notify_one();
      });
    } catch (const Error& e) {
      reject(c, req, api::status_for(e.code()), to_string(e.code()), e.what());
      return;
    }

    websocket::stream<tcp::socket&> ws(c.socket);
    boost::system::error_code ec;
    ws.accept(req, ec);
    auto idle_since = std::chrono::steady_clock::now();
    while (!ec && !stopping_) {
      std::deque<std::string> batch;
      {
        std::unique_lock lock(q->mu);
        q->cv.wait_for(lock, std::chrono::milliseconds(50), [&] { return !q->lines.empty(); });
        batch.swap(q->lines);
      }
      for (const auto& line : batch) {
        ws.text(true);
        ws.write(boost::asio::buffer(line), ec);
        if (ec) break;
      }
      // Incoming frames are only control traffic (pong, close); read them so
      // a client close is answered. Anything else is dropped.
      while (!ec && c.socket.available() > 0) {
        boost::beast::flat_buffer in;
        ws.read(in, ec);
      }
      if (ec) break;
      const auto now = std::chrono::steady_clock::now();
      if (!batch.empty()) {
        idle_since = now;
      } else if (now - idle_since > std::chrono::seconds(1)) {
        // A ping is the only way a write-only stream notices a gone client.
        ws.ping({}, ec);
        idle_since = now;
      }
    }
    service_.unsubscribe(id, token);
    if (!ec && ws.is_open()) ws.close(websocket::close_code::going_away, ec);
  }

  void reject(Conn& c, const Request& req, int status, std::string_view code, std::string_view msg) {
    namespace http = boost::beast::http;
    HttpResponse res;
    res.version(req.version());
    set_common(res);
    res.result(static_cast<http::status>(status));
    res.set(http::field::content_type, "application/json");
    res.body() = api::error(status, code, msg).body.dump();
    res.prepare_payload();
    boost::system::error_code ec;
    http::write(c.socket, res, ec);
  }

  SessionService& service_;
  api::Router router_;
  boost::asio::io_context ioc_;
  tcp::acceptor acceptor_;
  std::thread accept_thread_;
  std::thread ticker_;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<std::shared_ptr<Conn>> conns_;
};

}  // namespace thea
