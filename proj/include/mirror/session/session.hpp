#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mirror/error.hpp"
#include "mirror/metrics/stats.hpp"
#include "mirror/metrics/velocity_pdf.hpp"
#include "mirror/random.hpp"
#include "mirror/session/players.hpp"
#include "mirror/session/record.hpp"

namespace mirror {

// Advances a session one tick at a time. Updates are simultaneous: every
// player receives its partner's state from the previous tick. In a solo
// session the player observes its own previous state.
class SessionStepper {
 public:
  SessionStepper(SessionConfig cfg, std::vector<std::unique_ptr<Player>> players)
      : cfg_(std::move(cfg)), players_(std::move(players)) {
    cfg_.validate();
    if (players_.size() != cfg_.players.size()) throw Error(ErrorKind::shape, "player count does not match config");
    rec_.config = cfg_;
    for (const auto& h : cfg_.players) rec_.players.push_back(PlayerTrack{h, {}, {}});
    const std::size_t n = cfg_.n_ticks();
    rec_.t.reserve(n);
    for (auto& p : rec_.players) {
      p.x.reserve(n);
      p.v.reserve(n);
    }
  }

  const SessionConfig& config() const { return cfg_; }
  std::size_t tick() const { return rec_.t.size(); }
  bool done() const { return rec_.t.size() >= cfg_.n_ticks(); }
  const TrialRecord& record() const { return rec_; }
  Player& player(std::size_t i) { return *players_[i]; }

  // Produces tick `tick()`; returns the per-player states just recorded.
  std::vector<PlayerState> step() {
    if (done()) throw Error(ErrorKind::invariant, "session already complete");
    const std::size_t k = rec_.t.size();
    const double t = static_cast<double>(k) / cfg_.tick_hz;
    std::vector<PlayerState> next(players_.size());
    std::uint8_t flags = kFlagNone;
    for (std::size_t i = 0; i < players_.size(); ++i) {
      if (k == 0) {
        next[i] = players_[i]->initial();
      } else {
        const std::size_t src = players_.size() == 2 ? 1 - i : i;
        const Observation obs{rec_.players[src].x.back(), rec_.players[src].v.back()};
        next[i] = players_[i]->step(obs, t);
      }
      next[i].x = std::clamp(next[i].x, 0.0, 1.0);
      flags |= players_[i]->last_flags();
    }
    rec_.t.push_back(t);
    for (std::size_t i = 0; i < players_.size(); ++i) {
      rec_.players[i].x.push_back(next[i].x);
      rec_.players[i].v.push_back(next[i].v);
    }
    rec_.flags.push_back(flags);
    return next;
  }

  bool any_disconnected() const {
    return std::any_of(players_.begin(), players_.end(), [](const auto& p) { return p->disconnected(); });
  }

  // Closes the record; metrics are computed when at least two ticks exist.
  TrialRecord finish(bool incomplete = false) {
    rec_.incomplete = incomplete || !done();
    if (rec_.t.size() >= 4) rec_.metrics = compute_session_metrics(rec_);
    return rec_;
  }

 private:
  SessionConfig cfg_;
  std::vector<std::unique_ptr<Player>> players_;
  TrialRecord rec_;
};

inline std::vector<std::unique_ptr<Player>> make_players(const SessionConfig& cfg, const PlayerRegistry& registry) {
  std::vector<std::unique_ptr<Player>> out;
  for (std::size_t i = 0; i < cfg.players.size(); ++i)
    out.push_back(registry.make(cfg.players[i], derive_seed(cfg.seed, i)));
  return out;
}

inline TrialRecord run_session(const SessionConfig& cfg, const PlayerRegistry& registry) {
  SessionStepper stepper(cfg, make_players(cfg, registry));
  while (!stepper.done()) {
    if (stepper.any_disconnected()) return stepper.finish(true);
    stepper.step();
  }
  return stepper.finish();
}

// ---- Batches and aggregate tables ----

struct AggregateRow {
  std::string player;   // the evaluated player (second in the session config)
  std::string partner;
  Role role = Role::follower;
  int n = 0;
  double emd = 0.0;     // between pooled velocity PDFs of player and partner
  MeanSd cv;
  MeanSd rms;
};

struct BatchResult {
  std::vector<TrialRecord> records;
  std::vector<std::pair<std::size_t, std::string>> failures;  // (config index, message)
  std::vector<AggregateRow> table;
};

inline std::vector<AggregateRow> aggregate(std::span<const TrialRecord> records) {
  struct Acc {
    AggregateRow row;
    std::vector<double> cv, rms;
    std::vector<Trajectory> mine, theirs;
  };
  std::vector<Acc> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    if (r.players.size() != 2 || !r.metrics) continue;
    const auto& me = r.players[1];
    const auto& other = r.players[0];
    const std::string key = me.handle.id + "|" + other.handle.id + "|" + to_string(me.handle.role);
    auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) {
      groups.push_back({});
      groups.back().row.player = me.handle.id;
      groups.back().row.partner = other.handle.id;
      groups.back().row.role = me.handle.role;
    }
    auto& g = groups[it->second];
    if (std::isfinite(r.metrics->cv)) g.cv.push_back(r.metrics->cv);
    if (std::isfinite(r.metrics->rms)) g.rms.push_back(r.metrics->rms);
    g.mine.push_back(resample(me.trajectory(r.config.tick_hz), r.config.analysis_rate_hz));
    g.theirs.push_back(resample(other.trajectory(r.config.tick_hz), r.config.analysis_rate_hz));
    ++g.row.n;
  }
  std::vector<AggregateRow> out;
  for (auto& g : groups) {
    g.row.cv = mean_sd(g.cv);
    g.row.rms = mean_sd(g.rms);
    g.row.emd = emd(velocity_pdf(std::span<const Trajectory>(g.mine)), velocity_pdf(std::span<const Trajectory>(g.theirs)));
    out.push_back(g.row);
  }
  return out;
}

inline void write_aggregate_csv(std::ostream& os, std::span<const AggregateRow> rows) {
  os << "player,partner,role,n,emd,cv_mean,cv_sd,rms_mean,rms_sd\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.player.c_str(), r.partner.c_str(),
                  to_string(r.role), r.n, r.emd, r.cv.mean, r.cv.sd, r.rms.mean, r.rms.sd);
    os << buf;
  }
}

// Runs sessions sequentially (jobs <= 1) or on a small thread pool. Each
// session builds its own players, so both paths give identical records.
inline BatchResult run_batch(std::span<const SessionConfig> cfgs, const PlayerRegistry& registry, int jobs = 1) {
  for (const auto& c : cfgs)
    for (const auto& p : c.players)
      if (jobs > 1 && p.kind == PlayerKind::live_human)
        throw Error(ErrorKind::config_schema, "live players cannot run in a parallel batch");
  std::vector<std::optional<TrialRecord>> slots(cfgs.size());
  std::vector<std::string> errors(cfgs.size());
  auto run_one = [&](std::size_t i) {
    try {
      slots[i] = run_session(cfgs[i], registry);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cfgs.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cfgs.size(); i = next++) run_one(i);
      });
    for (auto& th : pool) th.join();
  }
  BatchResult out;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    if (slots[i])
      out.records.push_back(std::move(*slots[i]));
    else
      out.failures.emplace_back(i, errors[i]);
  }
  out.table = aggregate(out.records);
  return out;
}

// n copies of a template with per-session seeds and ids.
inline std::vector<SessionConfig> replicate(const SessionConfig& tmpl, int n) {
  std::vector<SessionConfig> out;
  for (int i = 0; i < n; ++i) {
    SessionConfig c = tmpl;
    c.seed = derive_seed(tmpl.seed, i);
    c.session_id = tmpl.session_id + "-" + std::to_string(i);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace mirror
