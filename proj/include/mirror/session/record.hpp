#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirror/error.hpp"
#include "mirror/metrics/phase.hpp"
#include "mirror/metrics/segments.hpp"
#include "mirror/metrics/stats.hpp"
#include "mirror/metrics/velocity_pdf.hpp"
#include "mirror/session/players.hpp"
#include "mirror/signal/trajectory.hpp"

namespace mirror {

enum class SessionMode { LF, SC };

inline const char* to_string(SessionMode m) { return m == SessionMode::LF ? "LF" : "SC"; }

inline SessionMode parse_session_mode(const std::string& s) {
  if (s == "LF") return SessionMode::LF;
  if (s == "SC") return SessionMode::SC;
  throw Error(ErrorKind::config_schema, "unknown session mode '" + s + "' (expected LF or SC)");
}

struct SessionConfig {
  SessionMode mode = SessionMode::LF;
  double duration_s = 60.0;
  double tick_hz = 10.0;
  double analysis_rate_hz = 100.0;
  std::vector<PlayerHandle> players;
  std::uint64_t seed = 0;
  std::string session_id = "session";

  std::size_t n_ticks() const { return static_cast<std::size_t>(std::llround(duration_s * tick_hz)) + 1; }

  void validate() const {
    if (!(duration_s > 0.0)) throw Error(ErrorKind::config_schema, "duration_s must be positive");
    if (!(tick_hz > 0.0)) throw Error(ErrorKind::config_schema, "tick_hz must be positive");
    if (!(tick_hz <= analysis_rate_hz)) throw Error(ErrorKind::config_schema, "tick_hz must not exceed analysis_rate_hz");
    const std::size_t want = mode == SessionMode::SC ? 1 : 2;
    if (players.size() != want)
      throw Error(ErrorKind::config_schema, std::string(to_string(mode)) + " sessions need " + std::to_string(want) +
                                                " player(s)");
    if (mode == SessionMode::LF && players[0].role == players[1].role)
      throw Error(ErrorKind::config_schema, "LF sessions need one leader and one follower");
  }
};

// Post-hoc session statistics. Partner-dependent fields are NaN in solo
// sessions (and when a phase is undefined).
struct SessionMetrics {
  double emd = std::numeric_limits<double>::quiet_NaN();
  double cv = std::numeric_limits<double>::quiet_NaN();
  double rms = std::numeric_limits<double>::quiet_NaN();
  double dphi_mean = std::numeric_limits<double>::quiet_NaN();
  double dphi_std = std::numeric_limits<double>::quiet_NaN();
  int n_segments = 0;
};

struct PlayerTrack {
  PlayerHandle handle;
  std::vector<double> x;
  std::vector<double> v;

  Trajectory trajectory(double tick_hz) const { return Trajectory{x, tick_hz, 0.0}; }
};

struct TrialRecord {
  SessionConfig config;
  std::vector<double> t;
  std::vector<PlayerTrack> players;
  std::vector<std::uint8_t> flags;  // per tick, OR of TickFlag bits
  bool incomplete = false;
  std::optional<SessionMetrics> metrics;

  std::string file_name() const {
    std::string name = config.session_id;
    for (const auto& p : players) name += "_" + p.handle.id;
    return name + ".trial.json";
  }
};

// Metrics of a leader/follower pair sampled at `tick_hz`, computed after
// cubic upsampling to the analysis rate. dPhi = Phi_leader - Phi_follower.
inline SessionMetrics pair_metrics(const Trajectory& leader, const Trajectory& follower, double analysis_rate_hz,
                                   const PdfGrid& grid = {}) {
  SessionMetrics m;
  const Trajectory a = resample(leader, analysis_rate_hz);
  const Trajectory b = resample(follower, analysis_rate_hz);
  m.rms = rmse(a, b);
  m.emd = emd(velocity_pdf(a, grid), velocity_pdf(b, grid));
  m.n_segments = static_cast<int>(segment_stats(a).size() + segment_stats(b).size());
  try {
    const auto rp = relative_phase(a, b);
    m.cv = circular_variance(rp);
    m.dphi_mean = rp.mean;
    m.dphi_std = rp.stddev;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::undefined_phase) throw;
  }
  return m;
}

inline std::size_t leader_index(const TrialRecord& r) {
  if (r.players.size() == 2 && r.players[1].handle.role == Role::leader && r.players[0].handle.role != Role::leader)
    return 1;
  return 0;
}

inline SessionMetrics compute_session_metrics(const TrialRecord& r) {
  const double tick = r.config.tick_hz;
  if (r.players.size() == 1) {
    SessionMetrics m;
    const Trajectory a = resample(r.players[0].trajectory(tick), r.config.analysis_rate_hz);
    m.n_segments = static_cast<int>(segment_stats(a).size());
    return m;
  }
  const std::size_t li = leader_index(r);
  return pair_metrics(r.players[li].trajectory(tick), r.players[1 - li].trajectory(tick), r.config.analysis_rate_hz);
}

// CV over the trailing window ending at tick k, from tick-rate samples. Used
// both live and when re-checking a persisted record; 0 when undefined.
inline double trailing_cv(std::span<const double> a, std::span<const double> b, std::size_t k, double tick_hz,
                          double window_s = 10.0) {
  const auto w = static_cast<std::size_t>(std::llround(window_s * tick_hz));
  const std::size_t end = k + 1;
  const std::size_t begin = end > w ? end - w : 0;
  if (end - begin < 8) return 0.0;
  const Trajectory ta{std::vector<double>(a.begin() + static_cast<std::ptrdiff_t>(begin), a.begin() + static_cast<std::ptrdiff_t>(end)), tick_hz, 0.0};
  const Trajectory tb{std::vector<double>(b.begin() + static_cast<std::ptrdiff_t>(begin), b.begin() + static_cast<std::ptrdiff_t>(end)), tick_hz, 0.0};
  try {
    return circular_variance(relative_phase(ta, tb));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::undefined_phase) throw;
    return 0.0;
  }
}

// ---- JSON persistence ----

namespace detail {

inline nlohmann::json num_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline double num_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const SessionMetrics& m) {
  return {{"emd", detail::num_or_null(m.emd)},
          {"cv", detail::num_or_null(m.cv)},
          {"rms", detail::num_or_null(m.rms)},
          {"dphi_mean", detail::num_or_null(m.dphi_mean)},
          {"dphi_std", detail::num_or_null(m.dphi_std)},
          {"n_segments", m.n_segments}};
}

inline SessionMetrics session_metrics_from_json(const nlohmann::json& j) {
  SessionMetrics m;
  m.emd = detail::num_or_nan(j.at("emd"));
  m.cv = detail::num_or_nan(j.at("cv"));
  m.rms = detail::num_or_nan(j.at("rms"));
  m.dphi_mean = detail::num_or_nan(j.at("dphi_mean"));
  m.dphi_std = detail::num_or_nan(j.at("dphi_std"));
  m.n_segments = j.at("n_segments").get<int>();
  return m;
}

inline nlohmann::json to_json(const TrialRecord& r) {
  nlohmann::json j;
  j["session_id"] = r.config.session_id;
  j["mode"] = to_string(r.config.mode);
  j["duration_s"] = r.config.duration_s;
  j["tick_hz"] = r.config.tick_hz;
  j["analysis_rate_hz"] = r.config.analysis_rate_hz;
  j["seed"] = r.config.seed;
  auto players = nlohmann::json::array();
  for (const auto& p : r.players)
    players.push_back({{"id", p.handle.id}, {"kind", to_string(p.handle.kind)}, {"role", to_string(p.handle.role)}});
  j["players"] = std::move(players);
  j["incomplete"] = r.incomplete;
  auto columns = nlohmann::json::array({"t"});
  for (const auto& p : r.players) {
    columns.push_back("x_" + p.handle.id);
    columns.push_back("v_" + p.handle.id);
  }
  columns.push_back("flags");
  j["columns"] = std::move(columns);
  auto rows = nlohmann::json::array();
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    auto row = nlohmann::json::array({r.t[k]});
    for (const auto& p : r.players) {
      row.push_back(p.x[k]);
      row.push_back(p.v[k]);
    }
    row.push_back(k < r.flags.size() ? r.flags[k] : 0);
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  j["metrics"] = r.metrics ? to_json(*r.metrics) : nlohmann::json(nullptr);
  return j;
}

// Structural checks shared by simulated and live records.
inline void validate_record(const TrialRecord& r) {
  const std::size_t n = r.t.size();
  if (r.players.empty() || r.players.size() > 2) throw Error(ErrorKind::shape, "record must hold 1 or 2 players");
  for (const auto& p : r.players)
    if (p.x.size() != n || p.v.size() != n) throw Error(ErrorKind::shape, "player track length differs from timestamps");
  if (r.flags.size() != n) throw Error(ErrorKind::shape, "flags length differs from timestamps");
  if (!r.incomplete && n != r.config.n_ticks())
    throw Error(ErrorKind::shape, "record has " + std::to_string(n) + " samples, expected " +
                                      std::to_string(r.config.n_ticks()));
  for (std::size_t k = 0; k < n; ++k) {
    const double expect = static_cast<double>(k) / r.config.tick_hz;
    if (std::abs(r.t[k] - expect) > 1e-9) throw Error(ErrorKind::shape, "timestamps are not on the tick grid");
    for (const auto& p : r.players)
      if (!(p.x[k] >= 0.0 && p.x[k] <= 1.0)) throw Error(ErrorKind::range, "position outside [0,1]");
  }
}

inline TrialRecord trial_record_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"session_id", "mode",   "duration_s", "tick_hz", "analysis_rate_hz", "seed",
                                           "players",    "incomplete", "columns", "rows",    "metrics"};
  try {
    for (const auto& [key, _] : j.items())
      if (!known.count(key)) throw Error(ErrorKind::config_schema, "unknown trial record key '" + key + "'");
    TrialRecord r;
    r.config.session_id = j.at("session_id").get<std::string>();
    r.config.mode = parse_session_mode(j.at("mode").get<std::string>());
    r.config.duration_s = j.at("duration_s").get<double>();
    r.config.tick_hz = j.at("tick_hz").get<double>();
    r.config.analysis_rate_hz = j.at("analysis_rate_hz").get<double>();
    r.config.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& p : j.at("players")) {
      PlayerHandle h{parse_player_kind(p.at("kind").get<std::string>()), parse_role(p.at("role").get<std::string>()),
                     p.at("id").get<std::string>()};
      r.config.players.push_back(h);
      r.players.push_back(PlayerTrack{h, {}, {}});
    }
    r.incomplete = j.at("incomplete").get<bool>();
    const std::size_t width = 2 + 2 * r.players.size();
    if (j.at("columns").size() != width) throw Error(ErrorKind::shape, "column count does not match players");
    for (const auto& row : j.at("rows")) {
      if (row.size() != width) throw Error(ErrorKind::shape, "row width does not match columns");
      r.t.push_back(row[0].get<double>());
      for (std::size_t i = 0; i < r.players.size(); ++i) {
        r.players[i].x.push_back(row[1 + 2 * i].get<double>());
        r.players[i].v.push_back(row[2 + 2 * i].get<double>());
      }
      r.flags.push_back(row[width - 1].get<std::uint8_t>());
    }
    if (!j.at("metrics").is_null()) r.metrics = session_metrics_from_json(j.at("metrics"));
    validate_record(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, std::string("malformed trial record: ") + e.what());
  }
}

inline void save_trial_record(const std::string& path, const TrialRecord& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path);
  os << to_json(r).dump() << '\n';
}

inline TrialRecord load_trial_record(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot read " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, path + ": " + e.what());
  }
  return trial_record_from_json(j);
}

}  // namespace mirror
