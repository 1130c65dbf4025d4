#include <catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "mirror/service/game_service.hpp"

using namespace mirror;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ServiceOptions options(const fs::path& out, double duration_s = 1.0) {
  ServiceOptions o;
  o.port = 0;
  o.out_dir = out;
  o.web_root = out / "www";
  o.duration_s = duration_s;
  o.avatar_id = "metronome";
  o.avatar_kind = PlayerKind::scripted;
  o.avatar_role = Role::leader;
  o.avatar = [](std::uint64_t) {
    return std::make_unique<SumOfSinesPlayer>(std::vector<SineComponent>{{0.5, 0.3, 0.0}});
  };
  return o;
}

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    tcp::resolver r(ioc_);
    net::connect(ws_.next_layer(), r.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/session");
    ws_.text(true);
  }

  void send(const nlohmann::json& j) { send_raw(j.dump()); }
  void send_raw(const std::string& s) { ws_.write(net::buffer(s)); }

  // Null once the server has closed the connection.
  nlohmann::json recv() {
    beast::flat_buffer buf;
    beast::error_code ec;
    ws_.read(buf, ec);
    if (ec) return nullptr;
    return nlohmann::json::parse(beast::buffers_to_string(buf.data()));
  }

  void close() {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

std::pair<int, std::string> http_get(unsigned short port, const std::string& target) {
  net::io_context ioc;
  tcp::socket sock(ioc);
  tcp::resolver r(ioc);
  net::connect(sock, r.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(sock, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(sock, buf, res);
  return {static_cast<int>(res.result_int()), res.body()};
}

fs::path wait_for_record(const fs::path& dir) {
  for (int i = 0; i < 200; ++i) {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".json") return e.path();
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return {};
}

}  // namespace

TEST_CASE("a short live session streams every tick and persists the record") {
  TempDir dir("mirror_svc_full");
  GameService svc(options(dir.path));
  svc.start();
  Client c(svc.port());
  c.send({{"kind", "hello"}});
  const auto hello = c.recv();
  REQUIRE(hello["kind"] == "hello");
  REQUIRE(hello["avatar"] == "metronome");
  REQUIRE(hello["role"] == "leader");
  REQUIRE(hello["tick_hz"] == 10.0);

  c.send({{"kind", "start"}, {"seed", 5}, {"session_id", "t1"}});
  std::vector<nlohmann::json> ticks;
  nlohmann::json end;
  const auto t0 = std::chrono::steady_clock::now();
  for (;;) {
    const auto f = c.recv();
    REQUIRE_FALSE(f.is_null());
    if (f["kind"] == "end") {
      end = f;
      break;
    }
    REQUIRE(f["kind"] == "tick_out");
    ticks.push_back(f);
    const double t = f["t"];
    c.send({{"kind", "tick_in"}, {"t", t}, {"x", 0.5 + 0.2 * std::sin(2.0 * t)}});
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(ticks.size() == 11);
  REQUIRE((elapsed > 0.9 && elapsed < 1.5));
  for (std::size_t k = 0; k < ticks.size(); ++k) REQUIRE(ticks[k]["t"].get<double>() == k / 10.0);
  REQUIRE(end["incomplete"] == false);
  REQUIRE(end["trial_id"] == "t1_human_metronome.trial.json");

  const auto rec = load_trial_record((dir.path / "t1_human_metronome.trial.json").string());
  REQUIRE(rec.t.size() == 11);
  REQUIRE(rec.players[0].handle.kind == PlayerKind::live_human);
  REQUIRE(rec.players[0].handle.role == Role::follower);
  for (std::size_t k = 0; k < ticks.size(); ++k) {
    REQUIRE(ticks[k]["x_avatar"].get<double>() == rec.players[1].x[k]);
    REQUIRE(ticks[k]["x_self_echo"].get<double>() == rec.players[0].x[k]);
    REQUIRE(ticks[k]["live_cv"].get<double>() == trailing_cv(rec.players[0].x, rec.players[1].x, k, 10.0));
  }
  c.close();
}

TEST_CASE("a second client is refused while a session is open") {
  TempDir dir("mirror_svc_busy");
  GameService svc(options(dir.path));
  svc.start();
  Client a(svc.port());
  a.send({{"kind", "hello"}});
  REQUIRE(a.recv()["kind"] == "hello");
  Client b(svc.port());
  const auto f = b.recv();
  REQUIRE(f["kind"] == "error");
  REQUIRE(f["code"] == "busy");
  REQUIRE(b.recv().is_null());
  a.close();

  // The slot frees up once the first client leaves.
  for (int i = 0; i < 100; ++i) {
    Client c(svc.port());
    c.send({{"kind", "hello"}});
    if (c.recv()["kind"] == "hello") {
      SUCCEED();
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  FAIL("service never became free");
}

TEST_CASE("malformed frames get an error frame") {
  TempDir dir("mirror_svc_bad");
  GameService svc(options(dir.path));
  svc.start();
  {
    Client c(svc.port());
    c.send_raw("{not json");
    const auto f = c.recv();
    REQUIRE(f["kind"] == "error");
    REQUIRE(f["code"] == "malformed");
  }
  {
    Client c(svc.port());
    c.send({{"kind", "tick_in"}, {"t", 0}, {"x", 0.5}});
    REQUIRE(c.recv()["code"] == "protocol");
  }
  {
    Client c(svc.port());
    c.send({{"kind", "hello"}});
    c.recv();
    c.send({{"kind", "start"}, {"colour", "red"}});
    REQUIRE(c.recv()["code"] == "malformed");
  }
}

TEST_CASE("bad input mid-session ends it as incomplete") {
  TempDir dir("mirror_svc_abort");
  GameService svc(options(dir.path, 5.0));
  svc.start();
  Client c(svc.port());
  c.send({{"kind", "hello"}});
  c.recv();
  c.send({{"kind", "start"}, {"session_id", "ab"}});
  REQUIRE(c.recv()["kind"] == "tick_out");
  c.send({{"kind", "tick_in"}, {"t", 1.0}, {"x", 0.4}});
  c.send({{"kind", "tick_in"}, {"t", 0.5}, {"x", 0.4}});
  nlohmann::json f;
  do f = c.recv();
  while (!f.is_null() && f["kind"] == "tick_out");
  REQUIRE(f["kind"] == "error");
  REQUIRE(f["code"] == "malformed");
  const auto path = wait_for_record(dir.path);
  REQUIRE_FALSE(path.empty());
  const auto rec = load_trial_record(path.string());
  REQUIRE(rec.incomplete);
  REQUIRE(rec.t.size() < 51);
}

TEST_CASE("a disconnect persists an incomplete record") {
  TempDir dir("mirror_svc_drop");
  GameService svc(options(dir.path, 5.0));
  svc.start();
  {
    Client c(svc.port());
    c.send({{"kind", "hello"}});
    c.recv();
    c.send({{"kind", "start"}, {"session_id", "drop"}});
    for (int i = 0; i < 3; ++i) REQUIRE(c.recv()["kind"] == "tick_out");
    c.close();
  }
  const auto path = wait_for_record(dir.path);
  REQUIRE_FALSE(path.empty());
  const auto rec = load_trial_record(path.string());
  REQUIRE(rec.incomplete);
  REQUIRE(rec.t.size() >= 3);
  REQUIRE(rec.t.size() < 51);
}

TEST_CASE("static files are served from the web root") {
  TempDir dir("mirror_svc_static");
  fs::create_directories(dir.path / "www");
  std::ofstream(dir.path / "www" / "index.html") << "<html>mirror</html>";
  std::ofstream(dir.path / "secret.txt") << "nope";
  GameService svc(options(dir.path));
  svc.start();
  const auto [code, body] = http_get(svc.port(), "/");
  REQUIRE(code == 200);
  REQUIRE(body == "<html>mirror</html>");
  REQUIRE(http_get(svc.port(), "/index.html").first == 200);
  REQUIRE(http_get(svc.port(), "/missing.js").first == 404);
  REQUIRE(http_get(svc.port(), "/../secret.txt").first == 404);
  REQUIRE(mime_type("a/b.js") == "application/javascript");
}
