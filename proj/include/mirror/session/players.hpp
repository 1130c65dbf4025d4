#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mirror/cyber/cyber_player.hpp"
#include "mirror/error.hpp"
#include "mirror/signal/trajectory.hpp"
#include "mirror/trainer/virtual_trainer.hpp"

namespace mirror {

enum class PlayerKind { scripted, virtual_trainer, cyber_player, live_human };
enum class Role { leader, follower };

inline const char* to_string(PlayerKind k) {
  switch (k) {
    case PlayerKind::scripted: return "scripted";
    case PlayerKind::virtual_trainer: return "virtual_trainer";
    case PlayerKind::cyber_player: return "cyber_player";
    case PlayerKind::live_human: return "live_human";
  }
  return "?";
}

inline const char* to_string(Role r) { return r == Role::leader ? "leader" : "follower"; }

inline PlayerKind parse_player_kind(const std::string& s) {
  if (s == "scripted") return PlayerKind::scripted;
  if (s == "virtual_trainer" || s == "vt") return PlayerKind::virtual_trainer;
  if (s == "cyber_player" || s == "cp") return PlayerKind::cyber_player;
  if (s == "live_human") return PlayerKind::live_human;
  throw Error(ErrorKind::config_schema, "unknown player kind '" + s + "'");
}

inline Role parse_role(const std::string& s) {
  if (s == "leader") return Role::leader;
  if (s == "follower") return Role::follower;
  throw Error(ErrorKind::config_schema, "unknown role '" + s + "'");
}

struct PlayerHandle {
  PlayerKind kind = PlayerKind::scripted;
  Role role = Role::leader;
  std::string id;
};

// What a player sees of its partner: the partner's state at the previous tick.
struct Observation {
  double x = 0.5;
  double v = 0.0;
};

enum TickFlag : std::uint8_t {
  kFlagNone = 0,
  kFlagStale = 1,    // live input missing for longer than the stale limit
  kFlagClamped = 2,  // live input outside [0,1] was clamped
  kFlagMissed = 4,   // no new live input since the previous tick
};

class Player {
 public:
  virtual ~Player() = default;
  // State at tick 0.
  virtual PlayerState initial() = 0;
  // State at the next tick given the partner's state at the current one.
  virtual PlayerState step(const Observation& partner, double t) = 0;
  virtual std::uint8_t last_flags() const { return kFlagNone; }
  virtual bool disconnected() const { return false; }
};

// ---- Scripted players ----

struct SineComponent {
  double freq_hz = 0.25;
  double amp = 0.3;
  double phase = 0.0;
};

// x(t) = centre + sum_i a_i sin(2 pi f_i t + phi_i)
class SumOfSinesPlayer final : public Player {
 public:
  explicit SumOfSinesPlayer(std::vector<SineComponent> comps, double centre = 0.5)
      : comps_(std::move(comps)), centre_(centre) {}

  PlayerState initial() override { return at(0.0); }
  PlayerState step(const Observation&, double t) override { return at(t); }

  PlayerState at(double t) const {
    PlayerState s{centre_, 0.0};
    for (const auto& c : comps_) {
      const double w = 2.0 * std::numbers::pi * c.freq_hz;
      s.x += c.amp * std::sin(w * t + c.phase);
      s.v += c.amp * w * std::cos(w * t + c.phase);
    }
    return s;
  }

 private:
  std::vector<SineComponent> comps_;
  double centre_;
};

// Replays a recorded trajectory (resampled to the tick rate); holds the last
// sample once the recording runs out.
class PlaybackPlayer final : public Player {
 public:
  PlaybackPlayer(const Trajectory& tr, double tick_hz) {
    Trajectory at = std::abs(tr.rate_hz - tick_hz) < 1e-12 || tr.size() < 2 ? tr : resample(tr, tick_hz);
    if (at.empty()) throw Error(ErrorKind::degenerate_input, "empty playback trajectory");
    x_ = at.samples;
    v_ = at.size() >= 2 ? velocity(at) : std::vector<double>(1, 0.0);
    for (double& x : x_) x = std::clamp(x, 0.0, 1.0);
  }

  PlayerState initial() override { return at(0); }
  PlayerState step(const Observation&, double) override { return at(++k_); }

 private:
  PlayerState at(std::size_t k) const {
    if (k >= x_.size()) return {x_.back(), 0.0};
    return {x_[k], v_[k]};
  }

  std::vector<double> x_, v_;
  std::size_t k_ = 0;
};

class VtPlayer final : public Player {
 public:
  explicit VtPlayer(VirtualTrainer vt) : vt_(std::move(vt)) {}
  PlayerState initial() override { return vt_.state(); }
  PlayerState step(const Observation& partner, double t) override { return vt_.tick(partner.x, t); }
  const VirtualTrainer& trainer() const { return vt_; }

 private:
  VirtualTrainer vt_;
};

class CpPlayer final : public Player {
 public:
  explicit CpPlayer(CyberPlayer cp) : cp_(std::move(cp)) {}
  PlayerState initial() override { return cp_.state(); }
  PlayerState step(const Observation& partner, double t) override { return cp_.tick(partner.x, partner.v, t); }

 private:
  CyberPlayer cp_;
};

// ---- Live human input ----

// Last-value-wins mailbox between a network reader and the session ticker.
class LiveInbox {
 public:
  using Clock = std::chrono::steady_clock;

  void post(double x, double t) {
    std::lock_guard lock(mu_);
    x_ = x;
    t_ = t;
    received_ = Clock::now();
    ++seq_;
  }

  void disconnect() { disconnected_.store(true); }
  bool disconnected() const { return disconnected_.load(); }

  struct Snapshot {
    std::optional<double> x;
    double t = 0.0;
    std::uint64_t seq = 0;
    Clock::time_point received{};
  };

  Snapshot latest() const {
    std::lock_guard lock(mu_);
    return {x_, t_, seq_, received_};
  }

 private:
  mutable std::mutex mu_;
  std::optional<double> x_;
  double t_ = 0.0;
  std::uint64_t seq_ = 0;
  Clock::time_point received_{};
  std::atomic<bool> disconnected_{false};
};

class LivePlayer final : public Player {
 public:
  LivePlayer(std::shared_ptr<LiveInbox> inbox, double tick_hz, double stale_after_s = 1.0)
      : inbox_(std::move(inbox)), tick_hz_(tick_hz), stale_after_(stale_after_s) {}

  PlayerState initial() override { return sample(); }
  PlayerState step(const Observation&, double) override { return sample(); }
  std::uint8_t last_flags() const override { return flags_; }
  bool disconnected() const override { return inbox_->disconnected(); }

 private:
  PlayerState sample() {
    const auto snap = inbox_->latest();
    flags_ = kFlagNone;
    const auto now = LiveInbox::Clock::now();
    if (snap.seq == last_seq_) {
      flags_ |= kFlagMissed;
      const auto since = snap.seq == 0 ? now - start_ : now - snap.received;
      if (std::chrono::duration<double>(since).count() > stale_after_) flags_ |= kFlagStale;
    }
    last_seq_ = snap.seq;
    double x = snap.x.value_or(prev_.x);
    if (x < 0.0 || x > 1.0 || !std::isfinite(x)) {
      flags_ |= kFlagClamped;
      x = std::isfinite(x) ? std::clamp(x, 0.0, 1.0) : prev_.x;
    }
    PlayerState s{x, have_prev_ ? (x - prev_.x) * tick_hz_ : 0.0};
    prev_ = s;
    have_prev_ = true;
    return s;
  }

  std::shared_ptr<LiveInbox> inbox_;
  double tick_hz_;
  double stale_after_;
  LiveInbox::Clock::time_point start_ = LiveInbox::Clock::now();
  std::uint64_t last_seq_ = 0;
  PlayerState prev_{0.5, 0.0};
  bool have_prev_ = false;
  std::uint8_t flags_ = kFlagNone;
};

// Builds the player for a handle; `seed` is derived per player per session.
using PlayerFactory = std::function<std::unique_ptr<Player>(const PlayerHandle&, std::uint64_t seed)>;

struct PlayerRegistry {
  std::map<std::string, PlayerFactory> factories;

  void add(const std::string& id, PlayerFactory f) { factories[id] = std::move(f); }

  std::unique_ptr<Player> make(const PlayerHandle& h, std::uint64_t seed) const {
    auto it = factories.find(h.id);
    if (it == factories.end()) throw Error(ErrorKind::config_schema, "no player registered with id '" + h.id + "'");
    return it->second(h, seed);
  }
};

}  // namespace mirror
