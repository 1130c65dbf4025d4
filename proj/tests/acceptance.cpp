// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failures.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <Eigen/Dense>

#include "mirror/cyber/qtable_io.hpp"
#include "mirror/cyber/training.hpp"
#include "mirror/ims/markov.hpp"
#include "mirror/metrics/phase.hpp"
#include "mirror/metrics/similarity.hpp"
#include "mirror/metrics/stats.hpp"
#include "mirror/session/session.hpp"
#include "support/synthetic_players.hpp"

using namespace mirror;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
constexpr double kPi = std::numbers::pi;

namespace {

struct Result {
  bool ok = false;
  std::string detail;
};

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 ----

Result stft_round_trip() {
  const auto t0 = Clock::now();
  const FrameSpec spec;
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto n = static_cast<std::size_t>(3 * spec.window_len + u(gen) * 3000);
    std::vector<double> x(n, 0.5);
    for (int c = 0; c < 5; ++c) {
      const double f = 0.05 + 2.0 * u(gen), a = 0.1 * u(gen), ph = 2.0 * kPi * u(gen);
      for (std::size_t k = 0; k < n; ++k) x[k] += a * std::sin(2.0 * kPi * f * k / 100.0 + ph);
    }
    const auto y = istft_ola(stft(x, spec), spec, 100.0);
    for (std::size_t k = spec.window_len; k + spec.window_len < y.size(); ++k)
      worst = std::max(worst, std::abs(y.samples[k] - x[k]));
  }
  const double s = since(t0);
  return {worst < 1e-6 && s < 5.0, fmt("max interior error %.2e over 100 signals, %.2f s", worst, s)};
}

// ---- 2 ----

Result ims_fidelity() {
  const auto t0 = Clock::now();
  const auto player = testing::panel_player(1);
  const auto trials = testing::solo_corpus(player, 30, 30.0, 100.0, 101);
  const auto ref = velocity_pdf(std::span<const Trajectory>(trials));
  // Corpus-to-corpus EMD: the resolution limit of the comparison.
  const auto other = testing::solo_corpus(player, 30, 30.0, 100.0, 901);
  const double floor = emd(ref, velocity_pdf(std::span<const Trajectory>(other)));

  // Mean over codebook seeds and independent batches of 30 synthetic trials.
  const int n_codebooks = 6, n_batches = 5;
  std::vector<double> means;
  std::string per_level;
  double first_single = 0.0;
  for (int levels : {32, 64, 128, 256}) {
    double acc = 0.0;
    for (int c = 0; c < n_codebooks; ++c) {
      const auto m = train_ims(trials, FrameSpec{}, levels, derive_seed(7, static_cast<std::uint64_t>(c)));
      for (int b = 0; b < n_batches; ++b) {
        std::vector<Trajectory> syn;
        for (int i = 0; i < 30; ++i)
          syn.push_back(synthesize(m, 30.0, derive_seed(11, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(b * 30 + i))));
        const double d = emd(ref, velocity_pdf(std::span<const Trajectory>(syn)));
        if (levels == 256 && c == 0 && b == 0) first_single = d;
        acc += d;
      }
    }
    means.push_back(acc / (n_codebooks * n_batches));
    per_level += fmt("%d:%.5f ", levels, means.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < means.size(); ++i) monotone = monotone && means[i] <= means[i - 1];
  const double s = since(t0);
  const bool ok = means.back() < 0.03 && first_single < 0.03 && monotone && s < 120.0;
  return {ok, fmt("mean EMD %s(single 256-level run %.5f, corpus floor %.5f), %s, %.1f s", per_level.c_str(),
                  first_single, floor, monotone ? "non-increasing" : "NOT monotone", s)};
}

// ---- 3 ----

Result markov_consistency() {
  const double p[3][3] = {{0.5, 0.3, 0.2}, {0.1, 0.8, 0.1}, {0.3, 0.3, 0.4}};
  std::mt19937_64 gen(99);
  std::vector<std::discrete_distribution<int>> rows;
  for (const auto& r : p) rows.emplace_back(std::begin(r), std::end(r));
  SymbolSequence seq{0};
  while (seq.size() < 100000) seq.push_back(rows[static_cast<std::size_t>(seq.back())](gen));
  const auto a = estimate_transitions(std::span<const SymbolSequence>(&seq, 1), 3);
  double worst_p = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) worst_p = std::max(worst_p, std::abs(a(i, j) - p[i][j]));

  // Stationary vector: left null space of P - I.
  Eigen::Matrix3d pm;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) pm(i, j) = p[i][j];
  Eigen::EigenSolver<Eigen::Matrix3d> es(pm.transpose());
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(es.eigenvalues()(i) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0)) best = i;
  Eigen::Vector3d pi = es.eigenvectors().col(best).real();
  pi /= pi.sum();

  Rng rng(5);
  const auto walk = sample_symbols(a, 0, 100000, rng);
  std::array<double, 3> freq{};
  for (int s : walk) freq[static_cast<std::size_t>(s)] += 1.0 / static_cast<double>(walk.size());
  double worst_f = 0.0;
  for (int i = 0; i < 3; ++i) worst_f = std::max(worst_f, std::abs(freq[static_cast<std::size_t>(i)] - pi(i)));
  return {worst_p <= 0.02 && worst_f <= 0.02,
          fmt("max transition error %.4f, max frequency error %.4f", worst_p, worst_f)};
}

// ---- 4 ----

Result controller_optimality() {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ControlCost c;
  double worst_u = 0.0;
  for (int i = 0; i < 100; ++i) {
    const HkbState s{u(gen) - 0.5, 2.0 * u(gen) - 1.0};
    const double rp = u(gen) - 0.5;
    std::vector<double> sigma(static_cast<std::size_t>(c.substeps + 1));
    for (auto& v : sigma) v = 2.0 * u(gen) - 1.0;
    c.theta_p = u(gen);
    const double got = choose_control(s, c, rp, sigma);
    double best = -c.u_max, best_j = INFINITY;
    for (int k = 0; k < 100000; ++k) {
      const double g = -c.u_max + 2.0 * c.u_max * k / 99999.0;
      const double j = cost_J(g, s, c, rp, sigma);
      if (j < best_j) {
        best_j = j;
        best = g;
      }
    }
    worst_u = std::max(worst_u, std::abs(got - best));
  }
  double worst_x = 0.0;
  const HkbParams hp;
  for (int i = 0; i < 100; ++i) {
    const HkbState s{u(gen) - 0.5, 2.0 * u(gen) - 1.0};
    const double uu = 20.0 * u(gen) - 10.0, dt = 0.01;
    const auto one = hkb_step(s, hp, uu, dt);
    HkbState fine = s;
    for (int k = 0; k < 100; ++k) fine = hkb_step(fine, hp, uu, dt / 100.0);
    worst_x = std::max({worst_x, std::abs(one.x - fine.x), std::abs(one.v - fine.v)});
  }
  return {worst_u <= 2e-3 * c.u_max && worst_x <= 1e-6,
          fmt("max |u - grid u| %.2e (limit %.2e), max RK4 step error %.2e", worst_u, 2e-3 * c.u_max, worst_x)};
}

// ---- 5 ----

Result vt_closed_loop() {
  const auto t0 = Clock::now();
  SessionConfig cfg;
  cfg.duration_s = 60.0;
  cfg.seed = 3;
  cfg.players = {{PlayerKind::scripted, Role::leader, "sine"}, {PlayerKind::virtual_trainer, Role::follower, "vt"}};
  PlayerRegistry reg;
  reg.add("sine", [](const PlayerHandle&, std::uint64_t) {
    return std::make_unique<SumOfSinesPlayer>(std::vector<SineComponent>{{0.25, 0.3, 0.0}});
  });
  reg.add("vt", [](const PlayerHandle&, std::uint64_t seed) {
    return std::make_unique<VtPlayer>(VirtualTrainer(vt_follower_config(), nullptr, seed, 0.5));
  });
  const auto r = run_session(cfg, reg);
  const Trajectory lead = resample(r.players[0].trajectory(10.0), 100.0);
  const Trajectory vt = resample(r.players[1].trajectory(10.0), 100.0);
  const auto rp = relative_phase(lead, vt);
  const double cv = circular_variance(rp), rms = rmse(lead, vt);

  // A leader VT with a motor signature against a follower VT partner.
  const auto corpus = testing::solo_corpus(testing::panel_player(1), 30, 30.0, 10.0, 1);
  const auto ims = std::make_shared<const MarkovChainModel>(train_ims(corpus, FrameSpec{}, 64, 7));
  SessionConfig lc = cfg;
  lc.players = {{PlayerKind::virtual_trainer, Role::leader, "vt-lead"},
                {PlayerKind::virtual_trainer, Role::follower, "partner"}};
  PlayerRegistry lr;
  lr.add("vt-lead", [ims](const PlayerHandle&, std::uint64_t seed) {
    return std::make_unique<VtPlayer>(VirtualTrainer(vt_leader_config(), ims, seed, 0.5));
  });
  lr.add("partner", [](const PlayerHandle&, std::uint64_t seed) {
    return std::make_unique<VtPlayer>(VirtualTrainer(vt_follower_config(), nullptr, seed, 0.5));
  });
  const auto l = run_session(lc, lr);
  const Trajectory lv = resample(l.players[0].trajectory(10.0), 100.0);
  const Trajectory lp = resample(l.players[1].trajectory(10.0), 100.0);
  const double lead_dphi = relative_phase(lp, lv).mean;

  const double s = since(t0);
  const bool ok = cv >= 0.85 && rms <= 0.15 && rp.mean > 0.0 && lead_dphi < 0.0 && s < 30.0;
  return {ok, fmt("follower: CV %.3f RMSE %.3f dPhi(sine, VT) %+.3f rad; leader: dPhi(partner, VT) %+.3f rad; %.1f s",
                  cv, rms, rp.mean, lead_dphi, s)};
}

// ---- 6 ----

struct Mdp {
  std::string name;
  int ns, na;
  std::function<int(int, int)> next;
  std::function<double(int, int)> reward;
};

std::vector<Mdp> oracle_mdps() {
  std::vector<Mdp> out;
  // 4x4 grid, goal in the far corner, per-action costs break ties.
  out.push_back({"grid 16x4", 16, 4,
                 [](int s, int a) {
                   if (s == 15) return 0;
                   int r = s / 4, c = s % 4;
                   if (a == 0) r = std::max(r - 1, 0);
                   if (a == 1) r = std::min(r + 1, 3);
                   if (a == 2) c = std::max(c - 1, 0);
                   if (a == 3) c = std::min(c + 1, 3);
                   return r * 4 + c;
                 },
                 [](int s, int a) { return (s == 15 ? 1.0 : 0.0) - 0.01 * a; }});
  // Chain with a small reward at the left end and a large one at the right.
  out.push_back({"chain 10x2", 10, 2, [](int s, int a) { return std::clamp(s + (a == 1 ? 1 : -1), 0, 9); },
                 [](int s, int a) { return (s == 0 && a == 0) ? 0.2 : (s == 9 && a == 1) ? 1.0 : 0.0; }});
  // Random deterministic MDP with non-positive rewards.
  std::mt19937_64 gen(31);
  auto tn = std::make_shared<std::vector<int>>(12 * 9);
  auto tr = std::make_shared<std::vector<double>>(12 * 9);
  std::uniform_int_distribution<int> pick(0, 11);
  std::uniform_real_distribution<double> rew(-1.0, 0.0);
  for (int i = 0; i < 12 * 9; ++i) {
    (*tn)[static_cast<std::size_t>(i)] = pick(gen);
    (*tr)[static_cast<std::size_t>(i)] = rew(gen);
  }
  out.push_back({"random 12x9", 12, 9, [tn](int s, int a) { return (*tn)[static_cast<std::size_t>(s * 9 + a)]; },
                 [tr](int s, int a) { return (*tr)[static_cast<std::size_t>(s * 9 + a)]; }});
  return out;
}

Result q_learning_oracle() {
  const auto t0 = Clock::now();
  const AgentConfig defaults;
  const LearningRule rule{defaults.learn_rate, defaults.discount};
  bool ok = true;
  std::string detail;
  for (const auto& m : oracle_mdps()) {
    const auto n = static_cast<std::size_t>(m.ns * m.na);
    std::vector<double> q(n, 0.0);
    for (int it = 0; it < 20000; ++it) {
      std::vector<double> nq(n);
      for (int s = 0; s < m.ns; ++s)
        for (int a = 0; a < m.na; ++a) {
          const int s2 = m.next(s, a);
          nq[static_cast<std::size_t>(s * m.na + a)] =
              m.reward(s, a) + rule.discount * *std::max_element(q.begin() + s2 * m.na, q.begin() + (s2 + 1) * m.na);
        }
      q.swap(nq);
    }

    QTable t(static_cast<std::size_t>(m.ns), m.na);
    Rng rng(derive_seed(77, m.ns, m.na));
    const ExplorationSchedule always{1.0, INFINITY};
    int s = 0;
    for (int k = 0; k < 100000; ++k) {
      const int a = select_action(t, static_cast<std::size_t>(s), static_cast<std::uint64_t>(k), always, rng).action;
      const int s2 = m.next(s, a);
      q_update(t, static_cast<std::size_t>(s), a, m.reward(s, a), static_cast<std::size_t>(s2), rule);
      // Occasional restarts keep every state visited.
      s = uniform01(rng) < 0.05 ? static_cast<int>(uniform_index(rng, static_cast<std::size_t>(m.ns))) : s2;
    }
    double worst = 0.0;
    int policy_mismatch = 0;
    for (int st = 0; st < m.ns; ++st) {
      const auto row = q.begin() + st * m.na;
      const int opt = static_cast<int>(std::max_element(row, row + m.na) - row);
      if (t.greedy(static_cast<std::size_t>(st)) != opt) ++policy_mismatch;
      for (int a = 0; a < m.na; ++a)
        worst = std::max(worst, std::abs(t.q(static_cast<std::size_t>(st), a) - q[static_cast<std::size_t>(st * m.na + a)]));
    }
    ok = ok && policy_mismatch == 0 && worst <= 1e-3;
    detail += fmt("%s: %d policy mismatches, max |q - q*| %.1e; ", m.name.c_str(), policy_mismatch, worst);
  }
  const double s = since(t0);
  return {ok && s < 60.0, detail + fmt("%.1f s", s)};
}

// ---- 7 ----

Result cp_generalization() {
  const auto t0 = Clock::now();
  std::vector<VtSpec> vts;
  for (int i = 1; i <= 6; ++i) {
    const auto corpus = testing::solo_corpus(testing::panel_player(i), 30, 30.0, 10.0, static_cast<std::uint64_t>(i));
    const auto m = std::make_shared<const MarkovChainModel>(train_ims(corpus, FrameSpec{}, 64, 7));
    vts.push_back({"VT" + std::to_string(i), i == 5 ? vt_follower_config() : vt_leader_config(), m});
  }
  TrainingOptions opt;
  opt.n_trials = 2000;
  opt.trial_s = 60.0;
  opt.seed = 42;
  AgentConfig cfg;
  cfg.learn_rate = 0.3;
  cfg.eps_decay = planned_eps_decay(opt.n_trials, opt.trial_s, cfg.tick_hz);
  const std::vector<VtSpec> partners(vts.begin(), vts.begin() + 4);
  const auto st = train_cp(cfg, vts[4], partners, opt);
  const double slope = reward_trend_slope(st.log, opt.n_trials / 10);
  const double train_s = since(t0);

  const auto table = std::make_shared<const QTable>(st.table);
  PlayerRegistry reg;
  reg.add("VT6", [&](const PlayerHandle&, std::uint64_t s) { return std::make_unique<VtPlayer>(vts[5].make(s, 0.5)); });
  reg.add("VT5", [&](const PlayerHandle&, std::uint64_t s) { return std::make_unique<VtPlayer>(vts[4].make(s, 0.5)); });
  reg.add("CP", [&](const PlayerHandle&, std::uint64_t) {
    return std::make_unique<CpPlayer>(CyberPlayer(cfg, table, 0.5));
  });
  const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::array<AggregateRow, 2> rows;
  for (int w = 0; w < 2; ++w) {
    SessionConfig sc;
    sc.seed = 9;
    sc.session_id = "eval";
    sc.players = {{PlayerKind::virtual_trainer, Role::leader, "VT6"},
                  {w == 0 ? PlayerKind::virtual_trainer : PlayerKind::cyber_player, Role::follower, w == 0 ? "VT5" : "CP"}};
    const auto b = run_batch(replicate(sc, 20), reg, jobs);
    if (!b.failures.empty() || b.table.size() != 1) return {false, "evaluation sessions failed: " + b.failures.front().second};
    rows[static_cast<std::size_t>(w)] = b.table[0];
  }
  const double dcv = std::abs(rows[1].cv.mean - rows[0].cv.mean), drms = std::abs(rows[1].rms.mean - rows[0].rms.mean);
  const double s = since(t0);
  const bool ok = dcv <= 0.10 && drms <= 0.05 && slope >= 0.0 && s < 7200.0;
  return {ok, fmt("vs held-out VT6: VT5 CV %.3f+-%.3f RMS %.3f+-%.3f, CP CV %.3f+-%.3f RMS %.3f+-%.3f "
                  "(|dCV| %.3f, |dRMS| %.3f); reward slope %.2e; restarts %d; train %.0f s, total %.0f s",
                  rows[0].cv.mean, rows[0].cv.sd, rows[0].rms.mean, rows[0].rms.sd, rows[1].cv.mean, rows[1].cv.sd,
                  rows[1].rms.mean, rows[1].rms.sd, dcv, drms, slope, st.restarts, train_s, s)};
}

// ---- 8 ----

Result metric_anchors() {
  std::vector<std::string> bad;
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd(0.1, 0.4);
  std::vector<double> vel(5000);
  for (auto& v : vel) v = nd(gen);
  const auto pdf = velocity_pdf_from_samples(vel);
  if (emd(pdf, pdf) != 0.0) bad.push_back("emd(p,p)");

  const std::vector<double> constant(1000, 0.4);
  std::vector<double> grid(1000);
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = -kPi + 2.0 * kPi * static_cast<double>(k) / 1000.0;
  const double cv1 = circular_variance(constant), cv0 = circular_variance(grid);
  if (std::abs(cv1 - 1.0) > 1e-12) bad.push_back("CV constant");
  if (!(cv0 < 1e-3)) bad.push_back("CV uniform");

  Ellipse a, b;
  a.scale = b.scale = 1.0;
  b.centre = {1.0, 0.0};
  const double lens = 2.0 * std::acos(0.5) - 0.5 * std::sqrt(3.0);
  const double overlap_err = std::abs(ellipse_overlap(a, b) - lens / (2.0 * kPi - lens));
  if (overlap_err > 1e-3) bad.push_back("lens overlap");

  // Reference from a 40-digit regularized incomplete beta evaluation.
  const std::vector<double> x{0.91, 0.87, 0.95, 0.78, 0.88, 0.92, 0.85, 0.90, 0.83, 0.94};
  const std::vector<double> y{0.86, 0.84, 0.90, 0.80, 0.81, 0.89, 0.79, 0.88, 0.80, 0.87};
  const auto tt = paired_t_test(x, y);
  const double t_err = std::max(std::abs(tt.t - 4.523481337208295466), std::abs(tt.p - 0.0014395875956587006974));
  if (t_err > 1e-9) bad.push_back("t-test");

  Eigen::MatrixXd d(3, 3);
  d << 0, 3, 4, 3, 0, 5, 4, 5, 0;
  const auto pts = classical_mds(d);
  double mds_err = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      mds_err = std::max(mds_err, std::abs(std::hypot(pts[static_cast<std::size_t>(i)][0] - pts[static_cast<std::size_t>(j)][0],
                                                      pts[static_cast<std::size_t>(i)][1] - pts[static_cast<std::size_t>(j)][1]) -
                                           d(i, j)));
  if (mds_err > 1e-6) bad.push_back("MDS");

  std::string which;
  for (const auto& s : bad) which += " " + s;
  return {bad.empty(), fmt("CV %.3g / %.2e, lens error %.1e, t-test error %.1e, MDS error %.1e%s%s", cv1, cv0, overlap_err,
                           t_err, mds_err, bad.empty() ? "" : "; failed:", which.c_str())};
}

// ---- 9 ----

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MIRROR_CLI) + " " + args + " >> '" + log.string() + "' 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result determinism() {
  const fs::path work = fs::temp_directory_path() / "mirror_acceptance";
  fs::remove_all(work);
  fs::create_directories(work / "corpus");
  const fs::path log = work / "cli.log";
  const auto corpus = testing::solo_corpus(testing::panel_player(3), 10, 30.0, 100.0, 3);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    save_trajectory_csv((work / "corpus" / ("t" + std::to_string(i) + ".csv")).string(), corpus[i]);
  const fs::path configs = fs::path(MIRROR_CLI).parent_path().parent_path().parent_path() / "configs";
  const std::string q = "'";

  std::vector<std::string> bad;
  auto twice = [&](const std::string& name, const std::function<std::string(const std::string&)>& args,
                   const std::vector<std::string>& outputs) {
    for (const char* run : {"a", "b"})
      if (run_cli(args(run), log) != 0) {
        bad.push_back(name + " exit status");
        return;
      }
    for (const auto& o : outputs) {
      const auto pa = work / ("a" + o), pb = work / ("b" + o);
      if (!fs::exists(pa) || slurp(pa) != slurp(pb)) bad.push_back(name + " " + o);
    }
  };
  twice("train-ims",
        [&](const std::string& r) {
          return "train-ims --trials " + q + (work / "corpus").string() + q + " --levels 64 --seed 4 --out " + q +
                 (work / (r + "_ims.json")).string() + q;
        },
        {"_ims.json"});
  twice("synthesize",
        [&](const std::string& r) {
          return "synthesize --model " + q + (work / "a_ims.json").string() + q + " --duration-s 30 --n 3 --seed 8 --out-dir " +
                 q + (work / (r + "_syn")).string() + q;
        },
        {"_syn/synth_0000.csv", "_syn/synth_0002.csv"});
  twice("play",
        [&](const std::string& r) {
          return "play --config " + q + (configs / "play_sine_follower.json").string() + q + " --seed 5 --out-dir " + q +
                 (work / (r + "_play")).string() + q;
        },
        {"_play/sine-vs-vt_sine_vt.trial.json"});
  twice("train-cp",
        [&](const std::string& r) {
          return "train-cp --config " + q + (configs / "train_cp.json").string() + q + " --trials 5 --seed 6 --out " + q +
                 (work / (r + "_cp.qtb")).string() + q;
        },
        {"_cp.qtb", "_cp.qtb.json", "_cp.qtb.log.csv"});

  // Round trips.
  double worst = 0.0;
  const auto model = load_markov_model((work / "a_ims.json").string());
  save_markov_model((work / "rt_ims.json").string(), model);
  const auto model2 = load_markov_model((work / "rt_ims.json").string());
  for (std::size_t i = 0; i < model.transition.p.size(); ++i)
    worst = std::max(worst, std::abs(model.transition.p[i] - model2.transition.p[i]));
  for (std::size_t s = 0; s < model.codebook.prototypes.size(); ++s)
    for (std::size_t k = 0; k < model.codebook.dim(); ++k)
      worst = std::max(worst, std::abs(model.codebook.prototypes[s][k] - model2.codebook.prototypes[s][k]));

  const auto rec = load_trial_record((work / "a_play" / "sine-vs-vt_sine_vt.trial.json").string());
  save_trial_record((work / "rt.trial.json").string(), rec);
  const auto rec2 = load_trial_record((work / "rt.trial.json").string());
  for (std::size_t p = 0; p < rec.players.size(); ++p)
    for (std::size_t k = 0; k < rec.t.size(); ++k)
      worst = std::max({worst, std::abs(rec.players[p].x[k] - rec2.players[p].x[k]),
                        std::abs(rec.players[p].v[k] - rec2.players[p].v[k])});

  const auto agent = load_qtable((work / "a_cp.qtb").string());
  save_qtable((work / "rt.qtb").string(), agent.table, agent.config);
  const auto agent2 = load_qtable((work / "rt.qtb").string());
  for (std::size_t i = 0; i < agent.table.values.size(); ++i)
    worst = std::max(worst, std::abs(agent.table.values[i] - agent2.table.values[i]));
  if (agent.table.visits != agent2.table.visits) bad.push_back("q-table visits");

  const auto syn = load_trajectory_csv((work / "a_syn" / "synth_0000.csv").string());
  save_trajectory_csv((work / "rt.csv").string(), syn);
  const auto syn2 = load_trajectory_csv((work / "rt.csv").string());
  for (std::size_t k = 0; k < syn.size(); ++k) worst = std::max(worst, std::abs(syn.samples[k] - syn2.samples[k]));

  if (worst > 1e-12) bad.push_back("round trip");
  std::string which;
  for (const auto& s : bad) which += " " + s;
  if (bad.empty()) fs::remove_all(work);
  return {bad.empty(), fmt("4 commands byte-identical across reruns; max round-trip error %.1e%s%s", worst,
                           bad.empty() ? "" : "; failed:", which.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Result()>>> criteria{
      {"STFT/OLA round trip", stft_round_trip},
      {"IMS velocity-PDF fidelity", ims_fidelity},
      {"Markov-chain consistency", markov_consistency},
      {"controller optimality and RK4 accuracy", controller_optimality},
      {"VT closed loop", vt_closed_loop},
      {"Q-learning oracle", q_learning_oracle},
      {"CP generalization to a held-out partner", cp_generalization},
      {"metric anchors", metric_anchors},
      {"determinism and persistence", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Result r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failures += r.ok ? 0 : 1;
    std::printf("%s %zu %s: %s\n", r.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, r.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
