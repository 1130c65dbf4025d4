#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mirror/error.hpp"
#include "mirror/random.hpp"

namespace mirror {

// Uniform binning of (x, v, x_p, v_p). Positions span [0,1]; velocities span
// [-v_max, v_max]. Out-of-range values land in the edge bins.
struct StateGrid {
  int pos_bins = 15;
  int vel_bins = 15;
  double v_max = 1.5;

  std::size_t n_states() const {
    const auto p = static_cast<std::size_t>(pos_bins), v = static_cast<std::size_t>(vel_bins);
    return p * v * p * v;
  }

  void validate() const {
    if (pos_bins < 2) throw Error(ErrorKind::config_schema, "pos_bins must be >= 2");
    if (vel_bins < 2 || vel_bins % 2 == 0) throw Error(ErrorKind::config_schema, "vel_bins must be odd and >= 3");
    if (!(v_max > 0.0)) throw Error(ErrorKind::config_schema, "v_max must be positive");
  }

  int pos_bin(double x) const {
    const double b = std::floor(x * pos_bins);
    return static_cast<int>(std::clamp(b, 0.0, static_cast<double>(pos_bins - 1)));
  }
  int vel_bin(double v) const {
    const double b = std::floor((v + v_max) / (2.0 * v_max) * vel_bins);
    return static_cast<int>(std::clamp(b, 0.0, static_cast<double>(vel_bins - 1)));
  }
};

struct CellIndex {
  int x, v, xp, vp;
};

inline std::size_t compose(const CellIndex& c, const StateGrid& g) {
  return ((static_cast<std::size_t>(c.x) * g.vel_bins + c.v) * g.pos_bins + c.xp) * g.vel_bins + c.vp;
}

inline CellIndex decompose(std::size_t s, const StateGrid& g) {
  CellIndex c{};
  c.vp = static_cast<int>(s % g.vel_bins);
  s /= g.vel_bins;
  c.xp = static_cast<int>(s % g.pos_bins);
  s /= g.pos_bins;
  c.v = static_cast<int>(s % g.vel_bins);
  c.x = static_cast<int>(s / g.vel_bins);
  return c;
}

inline std::size_t discretize(double x, double v, double x_p, double v_p, const StateGrid& g) {
  return compose({g.pos_bin(x), g.vel_bin(v), g.pos_bin(x_p), g.vel_bin(v_p)}, g);
}

// Nine accelerations, symmetric about zero and ascending.
struct ActionSet {
  static constexpr int kCount = 9;
  std::array<double, kCount> accels{};

  static ActionSet uniform(double a_max) {
    ActionSet s;
    for (int i = 0; i < kCount; ++i) s.accels[static_cast<std::size_t>(i)] = a_max * (i - 4) / 4.0;
    s.accels[4] = 0.0;
    return s;
  }

  double a_max() const { return accels.back(); }

  void validate() const {
    if (accels[4] != 0.0) throw Error(ErrorKind::config_schema, "middle action must be zero");
    for (int i = 0; i < kCount; ++i) {
      if (accels[static_cast<std::size_t>(i)] != -accels[static_cast<std::size_t>(8 - i)])
        throw Error(ErrorKind::config_schema, "action set must be symmetric about zero");
      if (i > 0 && !(accels[static_cast<std::size_t>(i)] > accels[static_cast<std::size_t>(i - 1)]))
        throw Error(ErrorKind::config_schema, "action set must be ascending");
    }
  }
};

// Dense (state, action) table of values and visit counts.
struct QTable {
  std::size_t n_states = 0;
  int n_actions = 0;
  std::vector<double> values;
  std::vector<std::uint32_t> visits;

  QTable() = default;
  QTable(std::size_t states, int actions)
      : n_states(states),
        n_actions(actions),
        values(states * static_cast<std::size_t>(actions), 0.0),
        visits(states * static_cast<std::size_t>(actions), 0) {}

  std::size_t at(std::size_t s, int a) const { return s * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a); }
  double q(std::size_t s, int a) const { return values[at(s, a)]; }
  double& q(std::size_t s, int a) { return values[at(s, a)]; }

  double max_q(std::size_t s) const {
    const double* row = values.data() + at(s, 0);
    return *std::max_element(row, row + n_actions);
  }

  // Lowest index wins ties.
  int greedy(std::size_t s) const {
    const double* row = values.data() + at(s, 0);
    return static_cast<int>(std::max_element(row, row + n_actions) - row);
  }

  bool visited(std::size_t s) const {
    const auto* row = visits.data() + at(s, 0);
    return std::any_of(row, row + n_actions, [](std::uint32_t c) { return c > 0; });
  }
};

struct AgentConfig {
  StateGrid grid{};
  ActionSet actions = ActionSet::uniform(10.0);
  double learn_rate = 0.1;
  double discount = 0.9;
  double eps0 = 1.0;
  double eps_decay = 1.0;  // ticks; callers usually set a third of the planned total
  double eta_u = 1e-4;
  std::uint64_t rng_seed = 0;
  double tick_hz = 10.0;

  void validate() const {
    grid.validate();
    actions.validate();
    if (!(learn_rate > 0.0 && learn_rate <= 1.0)) throw Error(ErrorKind::config_schema, "learn_rate must be in (0,1]");
    if (!(discount >= 0.0 && discount < 1.0)) throw Error(ErrorKind::config_schema, "discount must be in [0,1)");
    if (!(eps0 >= 0.0 && eps0 <= 1.0)) throw Error(ErrorKind::config_schema, "eps0 must be in [0,1]");
    if (!(eps_decay > 0.0)) throw Error(ErrorKind::config_schema, "eps_decay must be positive");
    if (!(eta_u > 0.0)) throw Error(ErrorKind::config_schema, "eta_u must be positive");
    if (!(tick_hz > 0.0)) throw Error(ErrorKind::config_schema, "tick_hz must be positive");
  }

  QTable make_table() const { return QTable(grid.n_states(), ActionSet::kCount); }
};

// Imitation reward: weights 1 on position error, 0.1 on velocity error and
// eta on control effort. Never positive.
struct RewardSpec {
  double pos_weight = 1.0;
  double vel_weight = 0.1;
  double eta_u = 1e-4;
};

inline double reward(double x, double v, double x_t, double v_t, double u, const RewardSpec& spec) {
  const double ex = x - x_t, ev = v - v_t;
  return -spec.pos_weight * ex * ex - spec.vel_weight * ev * ev - spec.eta_u * u * u;
}

struct LearningRule {
  double learn_rate = 0.1;
  double discount = 0.9;
};

// q(s,a) += alpha [r + gamma max_a' q(s',a') - q(s,a)]; returns the new value.
inline double q_update(QTable& table, std::size_t s, int a, double r, std::size_t s_next, const LearningRule& rule) {
  double& q = table.q(s, a);
  q += rule.learn_rate * (r + rule.discount * table.max_q(s_next) - q);
  ++table.visits[table.at(s, a)];
  return q;
}

inline double q_update(QTable& table, std::size_t s, int a, double r, std::size_t s_next, const AgentConfig& cfg) {
  return q_update(table, s, a, r, s_next, LearningRule{cfg.learn_rate, cfg.discount});
}

struct ExplorationSchedule {
  double eps0 = 1.0;
  double decay = 1.0;

  double epsilon(std::uint64_t k) const { return eps0 * std::exp(-static_cast<double>(k) / decay); }
};

struct ActionChoice {
  int action = 0;
  bool explored = false;
};

// Epsilon-greedy with eps(k) = eps0 exp(-k / decay).
inline ActionChoice select_action(const QTable& table, std::size_t s, std::uint64_t k, const ExplorationSchedule& sched,
                                  Rng& rng) {
  const double eps = sched.epsilon(k);
  if (eps > 0.0 && uniform01(rng) < eps)
    return {static_cast<int>(uniform_index(rng, static_cast<std::size_t>(table.n_actions))), true};
  return {table.greedy(s), false};
}

inline ActionChoice select_action(const QTable& table, std::size_t s, std::uint64_t k, const AgentConfig& cfg, Rng& rng) {
  return select_action(table, s, k, ExplorationSchedule{cfg.eps0, cfg.eps_decay}, rng);
}

}  // namespace mirror
