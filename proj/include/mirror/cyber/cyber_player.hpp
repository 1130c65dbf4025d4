#pragma once

#include <cstdlib>
#include <memory>
#include <unordered_map>

#include "mirror/cyber/q_learning.hpp"
#include "mirror/trainer/virtual_trainer.hpp"

namespace mirror {

// Semi-implicit Euler body driven directly by the chosen acceleration, with
// inelastic walls at 0 and 1.
inline PlayerState cp_kinematics(PlayerState s, double accel, double dt) {
  s.v += accel * dt;
  s.x += s.v * dt;
  if (s.x < 0.0) {
    s.x = 0.0;
    s.v = 0.0;
  } else if (s.x > 1.0) {
    s.x = 1.0;
    s.v = 0.0;
  }
  return s;
}

// Greedy action at `s`; states never visited during training borrow the
// greedy action of the Manhattan-nearest visited cell (zero action if none).
class GreedyPolicy {
 public:
  GreedyPolicy(const AgentConfig& cfg, std::shared_ptr<const QTable> table)
      : grid_(cfg.grid), table_(std::move(table)) {
    if (!table_) throw Error(ErrorKind::degenerate_input, "no Q-table");
    if (table_->n_states != grid_.n_states() || table_->n_actions != ActionSet::kCount)
      throw Error(ErrorKind::shape, "Q-table shape does not match the agent grid");
  }

  int action(std::size_t s) {
    if (table_->visited(s)) return visited_greedy(s);
    if (auto it = fallback_.find(s); it != fallback_.end()) return it->second;
    const int a = nearest_visited_action(s);
    fallback_.emplace(s, a);
    return a;
  }

  const QTable& table() const { return *table_; }

 private:
  // Argmax over the actions actually tried in `s` (lowest index on ties);
  // untried entries still hold their initial value, not an estimate.
  int visited_greedy(std::size_t s) const {
    int best = -1;
    for (int a = 0; a < table_->n_actions; ++a) {
      if (table_->visits[table_->at(s, a)] == 0) continue;
      if (best < 0 || table_->q(s, a) > table_->q(s, best)) best = a;
    }
    return best;
  }

  int nearest_visited_action(std::size_t s) const {
    const CellIndex c = decompose(s, grid_);
    const int dims[4] = {grid_.pos_bins, grid_.vel_bins, grid_.pos_bins, grid_.vel_bins};
    const int base[4] = {c.x, c.v, c.xp, c.vp};
    const int max_r = 2 * (grid_.pos_bins + grid_.vel_bins);
    for (int r = 1; r <= max_r; ++r) {
      // Offsets with |d0|+|d1|+|d2|+|d3| == r in lexicographic order.
      for (int d0 = -r; d0 <= r; ++d0) {
        const int r1 = r - std::abs(d0);
        for (int d1 = -r1; d1 <= r1; ++d1) {
          const int r2 = r1 - std::abs(d1);
          for (int d2 = -r2; d2 <= r2; ++d2) {
            const int r3 = r2 - std::abs(d2);
            for (int d3 : {-r3, r3}) {
              const int idx[4] = {base[0] + d0, base[1] + d1, base[2] + d2, base[3] + d3};
              bool inside = true;
              for (int i = 0; i < 4; ++i) inside = inside && idx[i] >= 0 && idx[i] < dims[i];
              if (inside) {
                const std::size_t cand = compose({idx[0], idx[1], idx[2], idx[3]}, grid_);
                if (table_->visited(cand)) return visited_greedy(cand);
              }
              if (r3 == 0) break;
            }
          }
        }
      }
    }
    return ActionSet::kCount / 2;
  }

  StateGrid grid_;
  std::shared_ptr<const QTable> table_;
  std::unordered_map<std::size_t, int> fallback_;
};

// Trained cyber player in evaluation mode.
class CyberPlayer {
 public:
  CyberPlayer(AgentConfig cfg, std::shared_ptr<const QTable> table, double start_pos = 0.5)
      : cfg_(std::move(cfg)), policy_(cfg_, std::move(table)) {
    reset(start_pos);
  }

  void reset(double start_pos) { state_ = {std::clamp(start_pos, 0.0, 1.0), 0.0}; }
  PlayerState state() const { return state_; }
  const AgentConfig& config() const { return cfg_; }

  PlayerState tick(double partner_pos, double partner_vel, double /*t*/) {
    const std::size_t s = discretize(state_.x, state_.v, partner_pos, partner_vel, cfg_.grid);
    const int a = policy_.action(s);
    state_ = cp_kinematics(state_, cfg_.actions.accels[static_cast<std::size_t>(a)], 1.0 / cfg_.tick_hz);
    return state_;
  }

 private:
  AgentConfig cfg_;
  GreedyPolicy policy_;
  PlayerState state_{};
};

}  // namespace mirror
