#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirror/error.hpp"
#include "mirror/ims/markov.hpp"
#include "mirror/random.hpp"
#include "mirror/signal/trajectory.hpp"
#include "mirror/trainer/controller.hpp"
#include "mirror/trainer/hkb.hpp"

namespace mirror {

struct VtConfig {
  HkbParams hkb{};
  double theta_p = 0.9;
  double eta = 1e-4;
  double horizon_s = 0.03;
  double u_max = 10.0;
  double tick_hz = 10.0;
  std::string ims_model_path;  // empty: no signature, reference velocity is zero

  int substeps = 3;            // RK4 substeps per horizon
  double refill_chunk_s = 5.0;

  ControlCost cost() const {
    ControlCost c;
    c.hkb = hkb;
    c.theta_p = theta_p;
    c.eta = eta;
    c.horizon_s = horizon_s;
    c.substeps = substeps;
    c.u_max = u_max;
    return c;
  }

  void validate() const {
    if (!(theta_p >= 0.0 && theta_p <= 1.0)) throw Error(ErrorKind::config_schema, "theta_p must be in [0,1]");
    if (!(horizon_s > 0.0)) throw Error(ErrorKind::config_schema, "horizon_s must be positive");
    if (!(u_max > 0.0)) throw Error(ErrorKind::config_schema, "u_max must be positive");
    if (!(eta > 0.0)) throw Error(ErrorKind::config_schema, "eta must be positive");
    if (!(tick_hz > 0.0)) throw Error(ErrorKind::config_schema, "tick_hz must be positive");
    if (!(hkb.omega >= 0.0)) throw Error(ErrorKind::config_schema, "omega must be non-negative");
    if (substeps < 1) throw Error(ErrorKind::config_schema, "substeps must be >= 1");
    if (horizon_s / substeps > kMaxHkbStep)
      throw Error(ErrorKind::config_schema, "horizon_s / substeps exceeds the RK4 step limit");
    if (!(refill_chunk_s > 0.0)) throw Error(ErrorKind::config_schema, "refill_chunk_s must be positive");
  }
};

// Parameter sets tuned for leading and following.
inline VtConfig vt_leader_config() {
  VtConfig c;
  c.theta_p = 0.1;
  c.hkb.omega = 0.8;
  return c;
}

inline VtConfig vt_follower_config() {
  VtConfig c;
  c.theta_p = 0.9;
  c.hkb.omega = 0.1;
  return c;
}

inline nlohmann::json to_json(const VtConfig& c) {
  return {{"alpha", c.hkb.alpha},   {"beta", c.hkb.beta},     {"gamma", c.hkb.gamma},
          {"omega", c.hkb.omega},   {"theta_p", c.theta_p},   {"eta", c.eta},
          {"horizon_s", c.horizon_s}, {"u_max", c.u_max},     {"tick_hz", c.tick_hz},
          {"ims_model_path", c.ims_model_path}};
}

// Unknown keys are schema errors; missing keys keep `base` values.
inline VtConfig vt_config_from_json(const nlohmann::json& j, VtConfig base = vt_follower_config()) {
  static const std::set<std::string> known{"alpha", "beta",  "gamma",   "omega", "theta_p",
                                           "eta",   "horizon_s", "u_max", "tick_hz", "ims_model_path"};
  if (!j.is_object()) throw Error(ErrorKind::config_schema, "VT config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw Error(ErrorKind::config_schema, "unknown VT config key '" + key + "'");
  auto num = [&](const char* key, double& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw Error(ErrorKind::config_schema, std::string("key '") + key + "' must be a number");
    dst = j[key].get<double>();
  };
  num("alpha", base.hkb.alpha);
  num("beta", base.hkb.beta);
  num("gamma", base.hkb.gamma);
  num("omega", base.hkb.omega);
  num("theta_p", base.theta_p);
  num("eta", base.eta);
  num("horizon_s", base.horizon_s);
  num("u_max", base.u_max);
  num("tick_hz", base.tick_hz);
  if (j.contains("ims_model_path")) {
    if (!j["ims_model_path"].is_string())
      throw Error(ErrorKind::config_schema, "key 'ims_model_path' must be a string");
    base.ims_model_path = j["ims_model_path"].get<std::string>();
  }
  base.validate();
  return base;
}

inline VtConfig load_vt_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot read " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config_schema, path + ": " + e.what());
  }
  return vt_config_from_json(j);
}

struct PlayerState {
  double x = 0.5;
  double v = 0.0;
};

// Model-based player: HKB body driven by the receding-horizon controller, with
// the reference velocity streamed from an embedded IMS generator. Positions
// exchanged with the outside are play-area coordinates in [0,1]; the
// oscillator itself runs centred on 0.5.
class VirtualTrainer {
 public:
  static constexpr double kCentre = 0.5;

  VirtualTrainer(VtConfig cfg, std::shared_ptr<const MarkovChainModel> ims, std::uint64_t seed,
                 double start_pos = 0.5)
      : cfg_(std::move(cfg)), cost_(cfg_.cost()), ims_(std::move(ims)), seed_(seed) {
    cfg_.validate();
    reset(start_pos);
  }

  void reset(double start_pos) {
    state_ = HkbState{std::clamp(start_pos, 0.0, 1.0) - kCentre, 0.0};
    buffer_.clear();
    cursor_ = 0;
    chunks_ = 0;
    time_ = 0.0;
  }

  const VtConfig& config() const { return cfg_; }
  PlayerState state() const { return {state_.x + kCentre, state_.v}; }
  const std::vector<double>& incidents() const { return incidents_; }
  int substeps_per_tick() const {
    return std::max(1, static_cast<int>(std::lround(1.0 / (cfg_.tick_hz * cost_.substep_dt()))));
  }

  // Advance one tick. The partner position is held constant over the horizon.
  PlayerState tick(double partner_pos, double t) {
    const int n = substeps_per_tick();
    const double dt = 1.0 / (cfg_.tick_hz * n);
    const double target = partner_pos - kCentre;
    const auto need = static_cast<std::size_t>(cost_.substeps) + 1;
    for (int k = 0; k < n; ++k) {
      ensure_buffer(need);
      const std::span<const double> ref(buffer_.data() + cursor_, need);
      try {
        const double u = choose_control(state_, cost_, target, ref);
        state_ = hkb_step(state_, cost_.hkb, u, dt);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::numeric_blowup) throw;
        incidents_.push_back(t);
        state_ = HkbState{std::clamp(partner_pos, 0.0, 1.0) - kCentre, 0.0};
      }
      ++cursor_;
      if (state_.x < -kCentre) {
        state_.x = -kCentre;
        state_.v = 0.0;
      } else if (state_.x > kCentre) {
        state_.x = kCentre;
        state_.v = 0.0;
      }
    }
    time_ = t;
    return state();
  }

 private:
  void ensure_buffer(std::size_t need) {
    if (buffer_.size() - cursor_ >= need) return;
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(cursor_));
    cursor_ = 0;
    const double rate = 1.0 / cost_.substep_dt();
    while (buffer_.size() < need) {
      if (!ims_) {
        buffer_.resize(buffer_.size() + static_cast<std::size_t>(std::lround(cfg_.refill_chunk_s * rate)), 0.0);
        continue;
      }
      const double window_s = ims_->frame_spec.window_len / ims_->rate_hz;
      Trajectory chunk =
          synthesize(*ims_, std::max(cfg_.refill_chunk_s, window_s), derive_seed(seed_, chunks_++));
      if (std::abs(chunk.rate_hz - rate) > 1e-9) chunk = resample(chunk, rate);
      const auto vel = velocity(chunk);
      buffer_.insert(buffer_.end(), vel.begin(), vel.end());
    }
  }

  VtConfig cfg_;
  ControlCost cost_;
  std::shared_ptr<const MarkovChainModel> ims_;
  std::uint64_t seed_;
  HkbState state_{};
  std::vector<double> buffer_;
  std::size_t cursor_ = 0;
  std::uint64_t chunks_ = 0;
  double time_ = 0.0;
  std::vector<double> incidents_;
};

}  // namespace mirror
