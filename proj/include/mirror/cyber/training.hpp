#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mirror/cyber/cyber_player.hpp"
#include "mirror/ims/markov.hpp"
#include "mirror/metrics/stats.hpp"
#include "mirror/session/players.hpp"
#include "mirror/session/record.hpp"

namespace mirror {

// A virtual trainer recipe: config plus its (optional) signature model.
struct VtSpec {
  std::string id;
  VtConfig config;
  std::shared_ptr<const MarkovChainModel> ims;

  VirtualTrainer make(std::uint64_t seed, double start_pos) const { return VirtualTrainer(config, ims, seed, start_pos); }
};

struct TrainingOptions {
  int n_trials = 2000;
  double trial_s = 60.0;
  Role role = Role::follower;  // role of the target (and so of the CP)
  std::uint64_t seed = 0;
  int max_attempts = 5;
  double analysis_rate_hz = 100.0;
};

struct TrainingLogRow {
  int trial = 0;
  double mean_reward = 0.0;
  double epsilon = 0.0;
  double cv = 0.0;   // CP against the partner; NaN if undefined
  double rms = 0.0;
};

// Everything needed to continue an interrupted run with identical results.
struct TrainingState {
  QTable table;
  std::uint64_t tick = 0;
  int next_trial = 0;
  std::vector<TrainingLogRow> log;
  int restarts = 0;
};

// Exploration decay of one third of the planned number of updates.
inline double planned_eps_decay(int n_trials, double trial_s, double tick_hz) {
  return std::max(1.0, static_cast<double>(n_trials) * std::llround(trial_s * tick_hz) / 3.0);
}

inline void write_training_log_csv(std::ostream& os, std::span<const TrainingLogRow> rows) {
  os << "trial,mean_reward,epsilon,cv,rms\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.trial, r.mean_reward, r.epsilon, r.cv, r.rms);
    os << buf;
  }
}

// Least-squares slope of mean reward against trial index over rows whose
// trial is at least `from_trial`.
inline double reward_trend_slope(std::span<const TrainingLogRow> rows, int from_trial) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    if (r.trial < from_trial) continue;
    const double x = r.trial, y = r.mean_reward;
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den == 0.0) throw Error(ErrorKind::insufficient_data, "need at least two log rows for a trend");
  return (n * sxy - sx * sy) / den;
}

namespace detail {

struct TrialOutcome {
  bool blown_up = false;
  TrainingLogRow row;
};

// One shadowed session. The target plays the partner; the CP sees its own
// state and the partner's previous state, and is rewarded against the
// target's state at the same tick.
inline TrialOutcome run_training_trial(const AgentConfig& cfg, const VtSpec& target, const VtSpec& partner,
                                       const TrainingOptions& opt, int trial, int attempt, QTable& table,
                                       std::uint64_t& tick) {
  const std::uint64_t ts = derive_seed(opt.seed, static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(attempt));
  Rng start_rng(derive_seed(ts, 0));
  const double start_t = 0.2 + 0.6 * uniform01(start_rng);
  const double start_p = 0.2 + 0.6 * uniform01(start_rng);
  VirtualTrainer vt_t = target.make(derive_seed(ts, 1), start_t);
  VirtualTrainer vt_p = partner.make(derive_seed(ts, 2), start_p);
  Rng explore(derive_seed(ts, 3));

  const ExplorationSchedule sched{cfg.eps0, cfg.eps_decay};
  const LearningRule rule{cfg.learn_rate, cfg.discount};
  const RewardSpec rspec{1.0, 0.1, cfg.eta_u};
  const double dt = 1.0 / cfg.tick_hz;
  const auto n_ticks = static_cast<std::size_t>(std::llround(opt.trial_s * cfg.tick_hz)) + 1;

  PlayerState pt = vt_t.state(), pp = vt_p.state(), cp{start_t, 0.0};
  std::vector<double> xp{pp.x}, xc{cp.x};
  double reward_sum = 0.0;
  for (std::size_t k = 1; k < n_ticks; ++k) {
    const double t = static_cast<double>(k) * dt;
    const std::size_t s = discretize(cp.x, cp.v, pp.x, pp.v, cfg.grid);
    const auto choice = select_action(table, s, tick, sched, explore);
    const double u = cfg.actions.accels[static_cast<std::size_t>(choice.action)];
    const PlayerState nt = vt_t.tick(pp.x, t);
    const PlayerState np = vt_p.tick(pt.x, t);
    if (!vt_t.incidents().empty() || !vt_p.incidents().empty()) return {true, {}};
    const PlayerState nc = cp_kinematics(cp, u, dt);
    const double r = reward(nc.x, nc.v, nt.x, nt.v, u, rspec);
    q_update(table, s, choice.action, r, discretize(nc.x, nc.v, np.x, np.v, cfg.grid), rule);
    reward_sum += r;
    ++tick;
    pt = nt;
    pp = np;
    cp = nc;
    xp.push_back(pp.x);
    xc.push_back(cp.x);
  }

  TrialOutcome out;
  out.row.trial = trial;
  out.row.mean_reward = reward_sum / static_cast<double>(n_ticks - 1);
  out.row.epsilon = sched.epsilon(tick);
  const Trajectory tp{xp, cfg.tick_hz, 0.0}, tc{xc, cfg.tick_hz, 0.0};
  const SessionMetrics m = opt.role == Role::follower ? pair_metrics(tp, tc, opt.analysis_rate_hz)
                                                     : pair_metrics(tc, tp, opt.analysis_rate_hz);
  out.row.cv = m.cv;
  out.row.rms = m.rms;
  return out;
}

}  // namespace detail

using TrainingCheckpoint = std::function<void(const TrainingState&)>;

// Runs trials `state.next_trial .. n_trials-1`, cycling through the partners.
// A trial in which either trainer blows up is rolled back and rerun with a
// fresh attempt seed. `checkpoint` (optional) is called after every
// `checkpoint_every` trials and at the end.
inline TrainingState train_cp(const AgentConfig& cfg, const VtSpec& target, std::span<const VtSpec> partners,
                              const TrainingOptions& opt, TrainingState state = {},
                              const TrainingCheckpoint& checkpoint = {}, int checkpoint_every = 0) {
  cfg.validate();
  if (opt.n_trials < 1) throw Error(ErrorKind::range, "n_trials must be >= 1");
  if (partners.empty()) throw Error(ErrorKind::degenerate_input, "at least one partner required");
  if (!(opt.trial_s > 0.0)) throw Error(ErrorKind::range, "trial_s must be positive");
  if (state.table.values.empty()) state.table = cfg.make_table();
  if (state.table.n_states != cfg.grid.n_states() || state.table.n_actions != ActionSet::kCount)
    throw Error(ErrorKind::shape, "resumed Q-table does not match the agent grid");

  for (int trial = state.next_trial; trial < opt.n_trials; ++trial) {
    const VtSpec& partner = partners[static_cast<std::size_t>(trial) % partners.size()];
    for (int attempt = 0;; ++attempt) {
      if (attempt >= opt.max_attempts)
        throw Error(ErrorKind::numeric_blowup, "trial " + std::to_string(trial) + " kept blowing up");
      QTable saved = state.table;
      const std::uint64_t saved_tick = state.tick;
      auto out = detail::run_training_trial(cfg, target, partner, opt, trial, attempt, state.table, state.tick);
      if (!out.blown_up) {
        state.log.push_back(out.row);
        break;
      }
      state.table = std::move(saved);
      state.tick = saved_tick;
      ++state.restarts;
    }
    state.next_trial = trial + 1;
    if (checkpoint && checkpoint_every > 0 && state.next_trial % checkpoint_every == 0) checkpoint(state);
  }
  if (checkpoint) checkpoint(state);
  return state;
}

}  // namespace mirror
