#pragma once

// Live play over WebSocket: one human client at a time, server-clock ticks.
//
// Frames are JSON text messages with a "kind" field:
//   client -> server  hello {}
//                     start {seed?, duration_s?, tick_hz?, session_id?}
//                     tick_in {t, x}
//   server -> client  hello {avatar, role, tick_hz, duration_s}
//                     tick_out {t, x_self_echo, x_avatar, v_avatar, live_cv, flags}
//                     end {trial_id, incomplete, metrics}
//                     error {code, message}

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "mirror/session/session.hpp"

namespace mirror {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

using AvatarFactory = std::function<std::unique_ptr<Player>(std::uint64_t seed)>;

struct ServiceOptions {
  std::string bind_addr = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::filesystem::path web_root;
  std::filesystem::path out_dir = ".";
  double duration_s = 60.0;
  double tick_hz = 10.0;
  double stale_after_s = 1.0;
  std::uint64_t seed = 0;
  std::string avatar_id = "avatar";
  PlayerKind avatar_kind = PlayerKind::virtual_trainer;
  Role avatar_role = Role::leader;
  AvatarFactory avatar;
};

inline nlohmann::json error_frame(const std::string& code, const std::string& message) {
  return {{"kind", "error"}, {"code", code}, {"message", message}};
}

inline std::string mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

// Maps a request target onto web_root; empty when the target escapes it.
inline std::optional<std::filesystem::path> static_path(const std::filesystem::path& root, std::string_view target) {
  if (root.empty()) return std::nullopt;
  std::string t(target.substr(0, target.find_first_of("?#")));
  if (t.empty() || t.front() != '/') return std::nullopt;
  if (t.back() == '/') t += "index.html";
  const std::filesystem::path rel = std::filesystem::path(t.substr(1)).lexically_normal();
  if (rel.empty() || rel.is_absolute() || *rel.begin() == "..") return std::nullopt;
  return root / rel;
}

class GameService;

namespace detail {

class LiveSession : public std::enable_shared_from_this<LiveSession> {
 public:
  LiveSession(GameService& svc, websocket::stream<beast::tcp_stream> ws);
  void run(http::request<http::string_body> req);

 private:
  enum class Phase { hello, start, running, closed };

  void read();
  void on_frame(const std::string& text);
  void begin(const nlohmann::json& j);
  void schedule_tick();
  void on_tick();
  void finish(bool incomplete);
  void abort(const std::string& code, const std::string& message);
  void send(const nlohmann::json& j);
  void flush();
  void close();

  GameService& svc_;
  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buf_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool close_after_flush_ = false;
  Phase phase_ = Phase::hello;
  std::shared_ptr<LiveInbox> inbox_ = std::make_shared<LiveInbox>();
  std::unique_ptr<SessionStepper> stepper_;
  net::steady_timer timer_;
  std::chrono::steady_clock::time_point t0_{};
  double last_t_in_ = -std::numeric_limits<double>::infinity();
};

}  // namespace detail

class GameService {
 public:
  explicit GameService(ServiceOptions opt) : opt_(std::move(opt)), acceptor_(ioc_) {
    if (!opt_.avatar) throw Error(ErrorKind::config_schema, "no avatar factory");
    if (!(opt_.tick_hz > 0.0) || !(opt_.duration_s > 0.0))
      throw Error(ErrorKind::config_schema, "tick_hz and duration_s must be positive");
  }
  ~GameService() { stop(); }

  // Binds and starts serving on a background thread.
  void start() {
    const tcp::endpoint ep(net::ip::make_address(opt_.bind_addr), opt_.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    accept();
    thread_ = std::thread([this] { ioc_.run(); });
  }

  void stop() {
    ioc_.stop();
    if (thread_.joinable()) thread_.join();
  }

  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }
  const ServiceOptions& options() const { return opt_; }
  net::io_context& context() { return ioc_; }

  // Claims the single session slot; false if a session is running.
  bool try_claim() {
    bool expected = false;
    return busy_.compare_exchange_strong(expected, true);
  }
  void release() { busy_.store(false); }
  std::uint64_t next_session_number() { return sessions_++; }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket sock) {
      if (!ec) handle(std::move(sock));
      if (acceptor_.is_open()) accept();
    });
  }

  struct Conn {
    beast::tcp_stream stream;
    beast::flat_buffer buf;
    http::request<http::string_body> req;
  };

  void handle(tcp::socket sock) {
    auto c = std::make_shared<Conn>(Conn{beast::tcp_stream(std::move(sock)), {}, {}});
    c->stream.expires_after(std::chrono::seconds(30));
    http::async_read(c->stream, c->buf, c->req, [this, c](beast::error_code ec, std::size_t) {
      if (ec) return;
      c->stream.expires_never();
      if (websocket::is_upgrade(c->req)) {
        websocket::stream<beast::tcp_stream> ws(std::move(c->stream));
        if (c->req.target() != "/session") {
          auto w = std::make_shared<websocket::stream<beast::tcp_stream>>(std::move(ws));
          w->async_accept(c->req, [w](beast::error_code e) {
            if (!e) w->async_close(websocket::close_code::policy_error, [w](beast::error_code) {});
          });
          return;
        }
        std::make_shared<detail::LiveSession>(*this, std::move(ws))->run(std::move(c->req));
        return;
      }
      serve_file(c);
    });
  }

  void serve_file(const std::shared_ptr<Conn>& c) {
    const auto& req = c->req;
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req.version());
    res->keep_alive(false);
    const auto path = static_path(opt_.web_root, std::string_view(req.target().data(), req.target().size()));
    std::ifstream in;
    if (path && std::filesystem::is_regular_file(*path)) in.open(*path, std::ios::binary);
    if (req.method() != http::verb::get && req.method() != http::verb::head) {
      res->result(http::status::method_not_allowed);
    } else if (!in.is_open()) {
      res->result(http::status::not_found);
      res->set(http::field::content_type, "text/plain");
      res->body() = "not found\n";
    } else {
      std::ostringstream ss;
      ss << in.rdbuf();
      res->result(http::status::ok);
      res->set(http::field::content_type, mime_type(*path));
      if (req.method() == http::verb::get) res->body() = ss.str();
    }
    res->prepare_payload();
    http::async_write(c->stream, *res, [res, c](beast::error_code, std::size_t) {
      beast::error_code ignored;
      c->stream.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  ServiceOptions opt_;
  net::io_context ioc_{1};
  tcp::acceptor acceptor_;
  std::thread thread_;
  std::atomic<bool> busy_{false};
  std::atomic<std::uint64_t> sessions_{0};
};

namespace detail {

inline LiveSession::LiveSession(GameService& svc, websocket::stream<beast::tcp_stream> ws)
    : svc_(svc), ws_(std::move(ws)), timer_(ws_.get_executor()) {}

inline void LiveSession::run(http::request<http::string_body> req) {
  ws_.text(true);
  ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    if (!self->svc_.try_claim()) {
      self->phase_ = Phase::closed;
      self->send(error_frame("busy", "another session is in progress"));
      self->close();
      return;
    }
    self->read();
  });
}

inline void LiveSession::read() {
  ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->inbox_->disconnect();
      if (self->phase_ == Phase::running) {
        self->finish(true);
      } else if (self->phase_ != Phase::closed) {
        self->phase_ = Phase::closed;
        self->svc_.release();
      }
      return;
    }
    const std::string text = beast::buffers_to_string(self->buf_.data());
    self->buf_.consume(self->buf_.size());
    self->on_frame(text);
    if (self->phase_ != Phase::closed) self->read();
  });
}

inline void LiveSession::on_frame(const std::string& text) {
  if (phase_ == Phase::closed) return;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return abort("malformed", "frame is not valid JSON");
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    return abort("malformed", "frame needs a string 'kind'");
  const std::string kind = j["kind"];
  const auto& o = svc_.options();
  switch (phase_) {
    case Phase::hello:
      if (kind != "hello") return abort("protocol", "expected hello");
      phase_ = Phase::start;
      send({{"kind", "hello"},
            {"avatar", o.avatar_id},
            {"role", to_string(o.avatar_role)},
            {"tick_hz", o.tick_hz},
            {"duration_s", o.duration_s}});
      return;
    case Phase::start:
      if (kind != "start") return abort("protocol", "expected start");
      return begin(j);
    case Phase::running: {
      if (kind != "tick_in") return abort("protocol", "expected tick_in");
      if (!j.contains("t") || !j["t"].is_number() || !j.contains("x") || !j["x"].is_number())
        return abort("malformed", "tick_in needs numeric t and x");
      const double t = j["t"], x = j["x"];
      if (!std::isfinite(t) || !std::isfinite(x)) return abort("malformed", "tick_in values must be finite");
      if (t < last_t_in_) return abort("malformed", "tick_in t went backwards");
      last_t_in_ = t;
      inbox_->post(x, t);
      return;
    }
    case Phase::closed:
      return;
  }
}

inline void LiveSession::begin(const nlohmann::json& j) {
  const auto& o = svc_.options();
  SessionConfig cfg;
  cfg.mode = SessionMode::LF;
  cfg.duration_s = o.duration_s;
  cfg.tick_hz = o.tick_hz;
  cfg.seed = o.seed;
  cfg.session_id = "live" + std::to_string(svc_.next_session_number());
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "kind") continue;
      if (k == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (k == "duration_s") cfg.duration_s = v.get<double>();
      else if (k == "tick_hz") cfg.tick_hz = v.get<double>();
      else if (k == "session_id") cfg.session_id = v.get<std::string>();
      else return abort("malformed", "unknown start field '" + k + "'");
    }
    const Role human_role = o.avatar_role == Role::leader ? Role::follower : Role::leader;
    cfg.players = {PlayerHandle{PlayerKind::live_human, human_role, "human"},
                   PlayerHandle{o.avatar_kind, o.avatar_role, o.avatar_id}};
    std::vector<std::unique_ptr<Player>> players;
    players.push_back(std::make_unique<LivePlayer>(inbox_, cfg.tick_hz, o.stale_after_s));
    players.push_back(o.avatar(derive_seed(cfg.seed, 1)));
    stepper_ = std::make_unique<SessionStepper>(cfg, std::move(players));
  } catch (const std::exception& e) {
    return abort("malformed", e.what());
  }
  phase_ = Phase::running;
  t0_ = std::chrono::steady_clock::now();
  on_tick();
}

inline void LiveSession::schedule_tick() {
  const auto k = static_cast<double>(stepper_->tick());
  const auto due = t0_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                             std::chrono::duration<double>(k / stepper_->config().tick_hz));
  timer_.expires_at(due);
  timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
    if (!ec) self->on_tick();
  });
}

inline void LiveSession::on_tick() {
  if (phase_ != Phase::running) return;
  if (inbox_->disconnected()) return finish(true);
  const auto states = stepper_->step();
  const auto& rec = stepper_->record();
  const std::size_t k = rec.t.size() - 1;
  const double cv = trailing_cv(rec.players[0].x, rec.players[1].x, k, rec.config.tick_hz);
  send({{"kind", "tick_out"},
        {"t", rec.t[k]},
        {"x_self_echo", states[0].x},
        {"x_avatar", states[1].x},
        {"v_avatar", states[1].v},
        {"live_cv", cv},
        {"flags", rec.flags[k]}});
  if (stepper_->done()) return finish(false);
  schedule_tick();
}

inline void LiveSession::finish(bool incomplete) {
  if (phase_ != Phase::running) return;
  phase_ = Phase::closed;
  timer_.cancel();
  TrialRecord rec = stepper_->finish(incomplete);
  nlohmann::json end{{"kind", "end"}, {"trial_id", rec.file_name()}, {"incomplete", rec.incomplete}};
  end["metrics"] = rec.metrics ? to_json(*rec.metrics) : nlohmann::json(nullptr);
  try {
    std::filesystem::create_directories(svc_.options().out_dir);
    save_trial_record((svc_.options().out_dir / rec.file_name()).string(), rec);
  } catch (const std::exception& e) {
    end["persist_error"] = e.what();
  }
  svc_.release();
  if (!inbox_->disconnected()) {
    send(end);
    close();
  }
}

inline void LiveSession::abort(const std::string& code, const std::string& message) {
  send(error_frame(code, message));
  if (phase_ == Phase::running) {
    inbox_->disconnect();
    timer_.cancel();
    TrialRecord rec = stepper_->finish(true);
    try {
      std::filesystem::create_directories(svc_.options().out_dir);
      save_trial_record((svc_.options().out_dir / rec.file_name()).string(), rec);
    } catch (const std::exception&) {
    }
  }
  if (phase_ != Phase::closed) svc_.release();
  phase_ = Phase::closed;
  close();
}

inline void LiveSession::send(const nlohmann::json& j) {
  outbox_.push_back(j.dump());
  if (!writing_) flush();
}

inline void LiveSession::flush() {
  if (outbox_.empty()) {
    writing_ = false;
    if (close_after_flush_) {
      close_after_flush_ = false;
      ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }
    return;
  }
  writing_ = true;
  ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    self->outbox_.pop_front();
    if (ec) {
      self->outbox_.clear();
      self->writing_ = false;
      return;
    }
    self->flush();
  });
}

inline void LiveSession::close() {
  close_after_flush_ = true;
  if (!writing_) flush();
}

}  // namespace detail

}  // namespace mirror
