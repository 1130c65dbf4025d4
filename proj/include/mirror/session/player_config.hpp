#pragma once

// JSON descriptions of players and sessions, as read by the command-line
// tools. Relative paths resolve against the directory of the config file.
//
// player: {"id", "kind": scripted|vt|cp, "role": leader|follower,
//          "start_pos"?,
//          scripted: "sines": [{"freq_hz","amp","phase"}], "centre"? | "playback": csv
//          vt:       "preset"?: leader|follower, "config"?: {...} | path, "ims_model"?: path
//          cp:       "qtable": path}
// session: {"mode"?, "duration_s"?, "tick_hz"?, "analysis_rate_hz"?,
//           "session_id"?, "repeat"?, "players": [...]}

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>

#include <json.hpp>

#include "mirror/cyber/qtable_io.hpp"
#include "mirror/cyber/training.hpp"
#include "mirror/session/players.hpp"
#include "mirror/session/record.hpp"

namespace mirror {

namespace fs = std::filesystem;

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot read " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config_schema, path + ": " + e.what());
  }
}

inline void require_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::config_schema, where + " must be a JSON object");
  for (const auto& [k, _] : j.items())
    if (!known.count(k)) throw Error(ErrorKind::config_schema, "unknown " + where + " key '" + k + "'");
}

template <class T>
T json_get(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::config_schema, where + ": key '" + key + "' missing or of the wrong type");
  }
}

template <class T>
T json_get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? json_get<T>(j, key, where) : fallback;
}

inline std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

// Shares loaded model files between players.
struct ModelCache {
  std::map<std::string, std::shared_ptr<const MarkovChainModel>> ims;
  std::map<std::string, std::shared_ptr<const LoadedAgent>> agents;

  std::shared_ptr<const MarkovChainModel> markov(const std::string& path) {
    auto& slot = ims[path];
    if (!slot) slot = std::make_shared<const MarkovChainModel>(load_markov_model(path));
    return slot;
  }
  std::shared_ptr<const LoadedAgent> agent(const std::string& path) {
    auto& slot = agents[path];
    if (!slot) slot = std::make_shared<const LoadedAgent>(load_qtable(path));
    return slot;
  }
};

inline PlayerHandle player_handle_from_json(const nlohmann::json& j, SessionMode mode) {
  const std::string where = "player";
  PlayerHandle h;
  h.id = json_get<std::string>(j, "id", where);
  if (h.id.empty()) throw Error(ErrorKind::config_schema, "player id must not be empty");
  h.kind = parse_player_kind(json_get<std::string>(j, "kind", where));
  if (mode == SessionMode::LF || j.contains("role")) h.role = parse_role(json_get<std::string>(j, "role", where));
  return h;
}

inline VtSpec vt_spec_from_json(const nlohmann::json& j, const fs::path& base, ModelCache& cache, Role role) {
  require_keys(j, {"id", "kind", "role", "start_pos", "preset", "config", "ims_model"}, "vt player");
  VtSpec s;
  s.id = json_get<std::string>(j, "id", "vt player");
  const std::string preset = json_get_or<std::string>(j, "preset", role == Role::leader ? "leader" : "follower", "vt player");
  if (preset == "leader")
    s.config = vt_leader_config();
  else if (preset == "follower")
    s.config = vt_follower_config();
  else
    throw Error(ErrorKind::config_schema, "unknown VT preset '" + preset + "'");
  if (j.contains("config")) {
    const auto& c = j["config"];
    s.config = c.is_string() ? vt_config_from_json(read_json_file(resolve(base, c.get<std::string>())), s.config)
                             : vt_config_from_json(c, s.config);
  }
  if (j.contains("ims_model")) s.config.ims_model_path = json_get<std::string>(j, "ims_model", "vt player");
  if (!s.config.ims_model_path.empty()) {
    s.config.ims_model_path = resolve(base, s.config.ims_model_path);
    s.ims = cache.markov(s.config.ims_model_path);
  }
  return s;
}

// Adds a factory for one player description to `reg`.
inline PlayerHandle add_player(PlayerRegistry& reg, const nlohmann::json& j, SessionMode mode, double tick_hz,
                               const fs::path& base, ModelCache& cache) {
  const PlayerHandle h = player_handle_from_json(j, mode);
  const double start = json_get_or<double>(j, "start_pos", 0.5, "player");
  switch (h.kind) {
    case PlayerKind::scripted: {
      require_keys(j, {"id", "kind", "role", "start_pos", "sines", "centre", "playback"}, "scripted player");
      if (j.contains("playback")) {
        const auto tr = std::make_shared<const Trajectory>(load_trajectory_csv(resolve(base, j["playback"].get<std::string>())));
        reg.add(h.id, [tr, tick_hz](const PlayerHandle&, std::uint64_t) {
          return std::make_unique<PlaybackPlayer>(*tr, tick_hz);
        });
      } else {
        std::vector<SineComponent> comps;
        for (const auto& c : json_get<nlohmann::json>(j, "sines", "scripted player")) {
          require_keys(c, {"freq_hz", "amp", "phase"}, "sine");
          comps.push_back({json_get<double>(c, "freq_hz", "sine"), json_get<double>(c, "amp", "sine"),
                           json_get_or<double>(c, "phase", 0.0, "sine")});
        }
        const double centre = json_get_or<double>(j, "centre", 0.5, "scripted player");
        reg.add(h.id, [comps, centre](const PlayerHandle&, std::uint64_t) {
          return std::make_unique<SumOfSinesPlayer>(comps, centre);
        });
      }
      break;
    }
    case PlayerKind::virtual_trainer: {
      const VtSpec spec = vt_spec_from_json(j, base, cache, h.role);
      if (std::abs(spec.config.tick_hz - tick_hz) > 1e-12)
        throw Error(ErrorKind::config_schema, "VT '" + h.id + "' tick_hz differs from the session tick");
      reg.add(h.id, [spec, start](const PlayerHandle&, std::uint64_t seed) {
        return std::make_unique<VtPlayer>(spec.make(seed, start));
      });
      break;
    }
    case PlayerKind::cyber_player: {
      require_keys(j, {"id", "kind", "role", "start_pos", "qtable"}, "cp player");
      const auto agent = cache.agent(resolve(base, json_get<std::string>(j, "qtable", "cp player")));
      if (std::abs(agent->config.tick_hz - tick_hz) > 1e-12)
        throw Error(ErrorKind::config_schema, "CP '" + h.id + "' tick_hz differs from the session tick");
      const auto table = std::shared_ptr<const QTable>(agent, &agent->table);
      reg.add(h.id, [agent, table, start](const PlayerHandle&, std::uint64_t) {
        return std::make_unique<CpPlayer>(CyberPlayer(agent->config, table, start));
      });
      break;
    }
    case PlayerKind::live_human:
      throw Error(ErrorKind::config_schema, "live players are only available through the serve command");
  }
  return h;
}

struct PlayConfig {
  SessionConfig session;  // seed filled in by the caller
  PlayerRegistry registry;
  int repeat = 1;
};

inline PlayConfig play_config_from_json(const nlohmann::json& j, const fs::path& base, ModelCache& cache) {
  require_keys(j, {"mode", "duration_s", "tick_hz", "analysis_rate_hz", "session_id", "repeat", "players"}, "session");
  PlayConfig pc;
  auto& s = pc.session;
  s.mode = parse_session_mode(json_get_or<std::string>(j, "mode", "LF", "session"));
  s.duration_s = json_get_or<double>(j, "duration_s", s.duration_s, "session");
  s.tick_hz = json_get_or<double>(j, "tick_hz", s.tick_hz, "session");
  s.analysis_rate_hz = json_get_or<double>(j, "analysis_rate_hz", s.analysis_rate_hz, "session");
  s.session_id = json_get_or<std::string>(j, "session_id", s.session_id, "session");
  pc.repeat = json_get_or<int>(j, "repeat", 1, "session");
  if (pc.repeat < 0) throw Error(ErrorKind::config_schema, "repeat must be >= 0");
  const auto players = json_get<nlohmann::json>(j, "players", "session");
  if (!players.is_array()) throw Error(ErrorKind::config_schema, "players must be an array");
  for (const auto& p : players) s.players.push_back(add_player(pc.registry, p, s.mode, s.tick_hz, base, cache));
  if (s.players.size() == 2 && s.players[0].id == s.players[1].id)
    throw Error(ErrorKind::config_schema, "player ids must be distinct");
  s.validate();
  return pc;
}

inline PlayConfig load_play_config(const std::string& path, ModelCache& cache) {
  return play_config_from_json(read_json_file(path), fs::absolute(path).parent_path(), cache);
}

// ---- Cyber-player training config ----
// {"agent": {...}, "target": vt player, "partners": [vt players],
//  "n_trials"?, "trial_s"?, "role"?, "max_attempts"?}

struct CpTrainingConfig {
  AgentConfig agent;
  VtSpec target;
  std::vector<VtSpec> partners;
  TrainingOptions options;
};

inline CpTrainingConfig cp_training_config_from_json(const nlohmann::json& j, const fs::path& base, ModelCache& cache) {
  require_keys(j, {"agent", "target", "partners", "n_trials", "trial_s", "role", "max_attempts"}, "train-cp");
  CpTrainingConfig c;
  auto& o = c.options;
  o.n_trials = json_get_or<int>(j, "n_trials", o.n_trials, "train-cp");
  o.trial_s = json_get_or<double>(j, "trial_s", o.trial_s, "train-cp");
  o.role = parse_role(json_get_or<std::string>(j, "role", "follower", "train-cp"));
  o.max_attempts = json_get_or<int>(j, "max_attempts", o.max_attempts, "train-cp");
  if (o.n_trials < 1) throw Error(ErrorKind::config_schema, "n_trials must be >= 1");
  const nlohmann::json agent = j.contains("agent") ? j["agent"] : nlohmann::json::object();
  c.agent = agent_config_from_json(agent);
  if (!agent.contains("eps_decay")) c.agent.eps_decay = planned_eps_decay(o.n_trials, o.trial_s, c.agent.tick_hz);
  const Role partner_role = o.role == Role::follower ? Role::leader : Role::follower;
  c.target = vt_spec_from_json(json_get<nlohmann::json>(j, "target", "train-cp"), base, cache, o.role);
  const auto partners = json_get<nlohmann::json>(j, "partners", "train-cp");
  if (!partners.is_array() || partners.empty()) throw Error(ErrorKind::config_schema, "partners must be a non-empty array");
  for (const auto& p : partners) c.partners.push_back(vt_spec_from_json(p, base, cache, partner_role));
  return c;
}

}  // namespace mirror
