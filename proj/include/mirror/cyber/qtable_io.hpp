#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "mirror/cyber/q_learning.hpp"
#include "mirror/cyber/training.hpp"

namespace mirror {

// Binary Q-table: 32-byte little-endian header followed by the values as raw
// float64, row-major (state, action). Visit counts follow as uint32 so that
// the evaluation fallback survives a round trip.
//
//   0  char[4]  "MQTB"
//   4  u32      version (1)
//   8  u32      pos_bins
//  12  u32      vel_bins
//  16  u32      action count
//  20  u32      reserved (0)
//  24  f64      v_max
inline constexpr char kQTableMagic[4] = {'M', 'Q', 'T', 'B'};
inline constexpr std::uint32_t kQTableVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary Q-table I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  os.write(b, sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& path) {
  char b[sizeof(T)];
  if (!is.read(b, sizeof(T))) throw Error(ErrorKind::io, path + ": truncated Q-table");
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_qtable(std::ostream& os, const QTable& t, const StateGrid& g) {
  if (t.n_states != g.n_states()) throw Error(ErrorKind::shape, "Q-table does not match grid");
  os.write(kQTableMagic, 4);
  detail::put<std::uint32_t>(os, kQTableVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(g.pos_bins));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(g.vel_bins));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.n_actions));
  detail::put<std::uint32_t>(os, 0);
  detail::put<double>(os, g.v_max);
  os.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(t.visits.data()),
           static_cast<std::streamsize>(t.visits.size() * sizeof(std::uint32_t)));
}

// Reads a table and checks it against `g`.
inline QTable read_qtable(std::istream& is, const StateGrid& g, const std::string& path = "<stream>") {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kQTableMagic, 4) != 0)
    throw Error(ErrorKind::io, path + ": not a Q-table file");
  if (detail::get<std::uint32_t>(is, path) != kQTableVersion) throw Error(ErrorKind::io, path + ": unsupported version");
  const auto pb = detail::get<std::uint32_t>(is, path);
  const auto vb = detail::get<std::uint32_t>(is, path);
  const auto na = detail::get<std::uint32_t>(is, path);
  detail::get<std::uint32_t>(is, path);
  const auto vmax = detail::get<double>(is, path);
  if (static_cast<int>(pb) != g.pos_bins || static_cast<int>(vb) != g.vel_bins || vmax != g.v_max ||
      na != static_cast<std::uint32_t>(ActionSet::kCount))
    throw Error(ErrorKind::shape, path + ": Q-table header does not match the agent config");
  QTable t(g.n_states(), ActionSet::kCount);
  if (!is.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double))) ||
      !is.read(reinterpret_cast<char*>(t.visits.data()),
               static_cast<std::streamsize>(t.visits.size() * sizeof(std::uint32_t))))
    throw Error(ErrorKind::io, path + ": truncated Q-table");
  for (double v : t.values)
    if (!std::isfinite(v)) throw Error(ErrorKind::numeric_blowup, path + ": non-finite Q value");
  return t;
}

// ---- AgentConfig sidecar ----

inline nlohmann::json to_json(const AgentConfig& c) {
  nlohmann::json j;
  j["pos_bins"] = c.grid.pos_bins;
  j["vel_bins"] = c.grid.vel_bins;
  j["v_max"] = c.grid.v_max;
  j["accels"] = c.actions.accels;
  j["learn_rate"] = c.learn_rate;
  j["discount"] = c.discount;
  j["eps0"] = c.eps0;
  j["eps_decay"] = c.eps_decay;
  j["eta_u"] = c.eta_u;
  j["rng_seed"] = c.rng_seed;
  j["tick_hz"] = c.tick_hz;
  return j;
}

// Missing keys keep their defaults; unknown keys are rejected. `a_max` is
// accepted as a shorthand for a uniform action set.
inline AgentConfig agent_config_from_json(const nlohmann::json& j, AgentConfig c = {}) {
  if (!j.is_object()) throw Error(ErrorKind::config_schema, "agent config must be a JSON object");
  static const char* known[] = {"pos_bins", "vel_bins", "v_max",  "accels",  "a_max",  "learn_rate",
                                "discount", "eps0",     "eps_decay", "eta_u", "rng_seed", "tick_hz"};
  for (const auto& [k, v] : j.items())
    if (std::find(std::begin(known), std::end(known), k) == std::end(known))
      throw Error(ErrorKind::config_schema, "unknown agent config key '" + k + "'");
  try {
    if (j.contains("pos_bins")) c.grid.pos_bins = j.at("pos_bins").get<int>();
    if (j.contains("vel_bins")) c.grid.vel_bins = j.at("vel_bins").get<int>();
    if (j.contains("v_max")) c.grid.v_max = j.at("v_max").get<double>();
    if (j.contains("a_max")) c.actions = ActionSet::uniform(j.at("a_max").get<double>());
    if (j.contains("accels")) c.actions.accels = j.at("accels").get<std::array<double, ActionSet::kCount>>();
    if (j.contains("learn_rate")) c.learn_rate = j.at("learn_rate").get<double>();
    if (j.contains("discount")) c.discount = j.at("discount").get<double>();
    if (j.contains("eps0")) c.eps0 = j.at("eps0").get<double>();
    if (j.contains("eps_decay")) c.eps_decay = j.at("eps_decay").get<double>();
    if (j.contains("eta_u")) c.eta_u = j.at("eta_u").get<double>();
    if (j.contains("rng_seed")) c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    if (j.contains("tick_hz")) c.tick_hz = j.at("tick_hz").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config_schema, std::string("agent config: ") + e.what());
  }
  c.validate();
  return c;
}

inline std::string sidecar_path(const std::string& qtable_path) { return qtable_path + ".json"; }

inline void save_qtable(const std::string& path, const QTable& t, const AgentConfig& cfg) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::io, "cannot write " + path);
    write_qtable(os, t, cfg.grid);
  }
  std::ofstream js(sidecar_path(path));
  if (!js) throw Error(ErrorKind::io, "cannot write " + sidecar_path(path));
  js << to_json(cfg).dump(2) << '\n';
}

struct LoadedAgent {
  AgentConfig config;
  QTable table;
};

inline LoadedAgent load_qtable(const std::string& path) {
  std::ifstream js(sidecar_path(path));
  if (!js) throw Error(ErrorKind::io, "cannot read " + sidecar_path(path));
  nlohmann::json j;
  try {
    js >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config_schema, sidecar_path(path) + ": " + e.what());
  }
  LoadedAgent out{agent_config_from_json(j), {}};
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot read " + path);
  out.table = read_qtable(is, out.config.grid, path);
  return out;
}

// ---- Training checkpoints: Q-table file plus a JSON progress file ----

inline void save_training_checkpoint(const std::string& dir_prefix, const TrainingState& st, const AgentConfig& cfg) {
  save_qtable(dir_prefix + ".qtb", st.table, cfg);
  nlohmann::json j;
  j["tick"] = st.tick;
  j["next_trial"] = st.next_trial;
  j["restarts"] = st.restarts;
  auto& rows = j["log"] = nlohmann::json::array();
  for (const auto& r : st.log) rows.push_back({r.trial, r.mean_reward, r.epsilon, r.cv, r.rms});
  std::ofstream os(dir_prefix + ".progress.json");
  if (!os) throw Error(ErrorKind::io, "cannot write " + dir_prefix + ".progress.json");
  os << j.dump() << '\n';
}

inline TrainingState load_training_checkpoint(const std::string& dir_prefix, const AgentConfig& cfg) {
  TrainingState st;
  auto agent = load_qtable(dir_prefix + ".qtb");
  if (agent.config.grid.n_states() != cfg.grid.n_states()) throw Error(ErrorKind::shape, "checkpoint grid mismatch");
  st.table = std::move(agent.table);
  std::ifstream is(dir_prefix + ".progress.json");
  if (!is) throw Error(ErrorKind::io, "cannot read " + dir_prefix + ".progress.json");
  nlohmann::json j;
  is >> j;
  st.tick = j.at("tick").get<std::uint64_t>();
  st.next_trial = j.at("next_trial").get<int>();
  st.restarts = j.at("restarts").get<int>();
  auto num = [](const nlohmann::json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
  for (const auto& r : j.at("log")) st.log.push_back({r[0].get<int>(), num(r[1]), num(r[2]), num(r[3]), num(r[4])});
  return st;
}

}  // namespace mirror
