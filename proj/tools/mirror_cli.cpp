// mirror: command-line entry points for the mirror-game toolkit.

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mirror/cyber/qtable_io.hpp"
#include "mirror/cyber/training.hpp"
#include "mirror/ims/markov.hpp"
#include "mirror/metrics/report.hpp"
#include "mirror/metrics/similarity.hpp"
#include "mirror/service/game_service.hpp"
#include "mirror/session/player_config.hpp"
#include "mirror/session/session.hpp"

namespace fs = std::filesystem;
using namespace mirror;

namespace {

constexpr const char* kVersion = "0.1.0";

class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv) : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["argv"] = std::vector<std::string>(argv, argv + argc);
    j_["version"] = kVersion;
    j_["configs"] = nlohmann::json::array();
    j_["outputs"] = nlohmann::json::array();
  }
  void config(const std::string& p) { j_["configs"].push_back(p); }
  void output(const std::string& p) { j_["outputs"].push_back(p); }
  void seed(std::uint64_t s) { j_["seed"] = s; }
  nlohmann::json& extra() { return j_; }

  void write(const std::string& path) {
    j_["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::io, "cannot write " + path);
    os << j_.dump(2) << '\n';
  }

 private:
  nlohmann::json j_;
  std::chrono::steady_clock::time_point start_;
};

std::vector<fs::path> files_with_suffix(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::io, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ensure_dir(const fs::path& p) {
  if (!p.empty()) fs::create_directories(p);
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_dir(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path.string());
  os << text;
}

// ---- train-ims ----

struct TrainImsArgs {
  std::string trials_dir, out;
  int levels = 256, window = 60, hop = 15;
  double rate = 100.0;
  std::uint64_t seed = 0;
};

int cmd_train_ims(const TrainImsArgs& a, Manifest& mf) {
  const auto files = files_with_suffix(a.trials_dir, ".csv");
  if (files.empty()) throw Error(ErrorKind::io, "no trial CSV files in " + a.trials_dir);
  std::vector<Trajectory> trials;
  for (const auto& f : files) trials.push_back(load_trajectory_csv(f.string()));
  FrameSpec spec;
  spec.window_len = a.window;
  spec.hop = a.hop;
  ImsTrainingOptions opt;
  opt.analysis_rate_hz = a.rate;
  ImsTrainingReport rep;
  const auto model = train_ims(trials, spec, a.levels, a.seed, opt, &rep);
  ensure_dir(fs::path(a.out).parent_path());
  save_markov_model(a.out, model);
  std::printf("trials %zu  features %zu  distortion %.6g  states used %d of %d\n", trials.size(), rep.n_features,
              rep.distortion, rep.effective_states, a.levels);
  mf.config(a.trials_dir);
  mf.seed(a.seed);
  mf.output(a.out);
  mf.extra()["distortion"] = rep.distortion;
  mf.extra()["effective_states"] = rep.effective_states;
  mf.write(a.out + ".manifest.json");
  return 0;
}

// ---- synthesize ----

struct SynthArgs {
  std::string model, out_dir, reference_dir;
  double duration_s = 30.0;
  int n = 30;
  std::uint64_t seed = 0;
};

int cmd_synthesize(const SynthArgs& a, Manifest& mf) {
  const auto model = load_markov_model(a.model);
  ensure_dir(a.out_dir);
  std::vector<Trajectory> out;
  for (int i = 0; i < a.n; ++i) {
    auto tr = synthesize(model, a.duration_s, derive_seed(a.seed, static_cast<std::uint64_t>(i)));
    char name[64];
    std::snprintf(name, sizeof name, "synth_%04d.csv", i);
    const auto path = (fs::path(a.out_dir) / name).string();
    save_trajectory_csv(path, tr);
    mf.output(path);
    out.push_back(std::move(tr));
  }
  if (!a.reference_dir.empty() && !out.empty()) {
    std::vector<Trajectory> ref;
    for (const auto& f : files_with_suffix(a.reference_dir, ".csv")) {
      const auto tr = load_trajectory_csv(f.string());
      ref.push_back(std::abs(tr.rate_hz - model.rate_hz) < 1e-12 ? tr : resample(tr, model.rate_hz));
    }
    if (ref.empty()) throw Error(ErrorKind::io, "no reference CSV files in " + a.reference_dir);
    const double d = emd(velocity_pdf(std::span<const Trajectory>(ref)), velocity_pdf(std::span<const Trajectory>(out)));
    std::printf("emd(reference, synthetic) %.6f\n", d);
    mf.extra()["emd_reference"] = d;
  }
  std::printf("wrote %d trajectories to %s\n", a.n, a.out_dir.c_str());
  mf.config(a.model);
  mf.seed(a.seed);
  mf.write((fs::path(a.out_dir) / "synthesize.manifest.json").string());
  return 0;
}

// ---- play ----

struct PlayArgs {
  std::string config, out_dir = ".";
  std::uint64_t seed = 0;
  int jobs = 1;
};

void print_metrics(const TrialRecord& r) {
  if (!r.metrics) {
    std::printf("%s: no metrics\n", r.config.session_id.c_str());
    return;
  }
  const auto& m = *r.metrics;
  std::printf("%s: emd %.4f  cv %.4f  rms %.4f  dphi %.4f +- %.4f  segments %d%s\n", r.config.session_id.c_str(), m.emd,
              m.cv, m.rms, m.dphi_mean, m.dphi_std, m.n_segments, r.incomplete ? "  (incomplete)" : "");
}

int cmd_play(const PlayArgs& a, Manifest& mf) {
  ModelCache cache;
  auto pc = load_play_config(a.config, cache);
  pc.session.seed = a.seed;
  ensure_dir(a.out_dir);
  std::vector<SessionConfig> cfgs;
  if (pc.repeat == 1)
    cfgs.push_back(pc.session);
  else
    cfgs = replicate(pc.session, pc.repeat);
  const auto batch = run_batch(cfgs, pc.registry, a.jobs);
  for (const auto& r : batch.records) {
    const auto path = (fs::path(a.out_dir) / r.file_name()).string();
    save_trial_record(path, r);
    mf.output(path);
    print_metrics(r);
  }
  for (const auto& [i, msg] : batch.failures) std::fprintf(stderr, "session %zu failed: %s\n", i, msg.c_str());
  if (cfgs.size() > 1) {
    std::ostringstream csv;
    write_aggregate_csv(csv, batch.table);
    const auto path = (fs::path(a.out_dir) / (pc.session.session_id + ".table.csv")).string();
    write_text(path, csv.str());
    mf.output(path);
  }
  mf.config(a.config);
  mf.seed(a.seed);
  mf.extra()["failures"] = batch.failures.size();
  mf.write((fs::path(a.out_dir) / (pc.session.session_id + ".manifest.json")).string());
  if (!batch.failures.empty()) throw Error(ErrorKind::numeric_blowup, std::to_string(batch.failures.size()) + " session(s) failed");
  return 0;
}

// ---- train-cp ----

struct TrainCpArgs {
  std::string config, out, checkpoint;
  int checkpoint_every = 100;
  bool resume = false;
  int trials = 0;
  std::uint64_t seed = 0;
  int jobs = 1;
};

int cmd_train_cp(const TrainCpArgs& a, Manifest& mf) {
  ModelCache cache;
  const auto base = fs::absolute(a.config).parent_path();
  auto j = read_json_file(a.config);
  if (a.trials > 0) j["n_trials"] = a.trials;
  auto c = cp_training_config_from_json(j, base, cache);
  c.options.seed = a.seed;
  c.agent.rng_seed = a.seed;
  if (c.options.n_trials >= 24000)
    std::fprintf(stderr, "warning: %d trials at %.0f s each is a very long run (many hours on one core)\n",
                 c.options.n_trials, c.options.trial_s);
  TrainingState st;
  if (a.resume) {
    if (a.checkpoint.empty()) throw Error(ErrorKind::config_schema, "--resume needs --checkpoint");
    st = load_training_checkpoint(a.checkpoint, c.agent);
    std::printf("resuming at trial %d\n", st.next_trial);
  }
  TrainingCheckpoint cb;
  if (!a.checkpoint.empty()) {
    ensure_dir(fs::path(a.checkpoint).parent_path());
    cb = [&](const TrainingState& s) { save_training_checkpoint(a.checkpoint, s, c.agent); };
  }
  st = train_cp(c.agent, c.target, c.partners, c.options, std::move(st), cb, a.checkpoint_every);
  ensure_dir(fs::path(a.out).parent_path());
  save_qtable(a.out, st.table, c.agent);
  std::ostringstream log;
  write_training_log_csv(log, st.log);
  const auto log_path = a.out + ".log.csv";
  write_text(log_path, log.str());
  const auto& last = st.log.back();
  std::printf("trials %d  restarts %d  final mean reward %.5f  epsilon %.4f\n", c.options.n_trials, st.restarts,
              last.mean_reward, last.epsilon);
  if (st.log.size() >= 20) {
    const double slope = reward_trend_slope(st.log, c.options.n_trials / 10);
    std::printf("reward trend slope after 10%%: %.3g\n", slope);
    mf.extra()["reward_slope"] = slope;
  }
  mf.config(a.config);
  mf.seed(a.seed);
  mf.output(a.out);
  mf.output(sidecar_path(a.out));
  mf.output(log_path);
  mf.write(a.out + ".manifest.json");
  return 0;
}

// ---- evaluate ----

struct EvalArgs {
  std::vector<std::string> records;
  std::string config, out_table, svg, report;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
};

int cmd_evaluate(const EvalArgs& a, Manifest& mf) {
  std::vector<TrialRecord> recs;
  if (!a.config.empty()) {
    if (!a.seed_given) throw Error(ErrorKind::config_schema, "--seed is required with --config");
    ModelCache cache;
    auto pc = load_play_config(a.config, cache);
    pc.session.seed = a.seed;
    const auto batch = run_batch(replicate(pc.session, std::max(pc.repeat, 1)), pc.registry, a.jobs);
    for (const auto& [i, msg] : batch.failures) std::fprintf(stderr, "session %zu failed: %s\n", i, msg.c_str());
    recs = batch.records;
    mf.config(a.config);
    mf.seed(a.seed);
  }
  for (const auto& p : a.records) {
    if (fs::is_directory(p)) {
      for (const auto& f : files_with_suffix(p, ".trial.json")) recs.push_back(load_trial_record(f.string()));
    } else {
      recs.push_back(load_trial_record(p));
    }
    mf.config(p);
  }
  if (recs.empty()) throw Error(ErrorKind::insufficient_data, "no trial records to evaluate");

  const auto table = aggregate(recs);
  std::ostringstream csv;
  write_aggregate_csv(csv, table);
  if (a.out_table.empty())
    std::cout << csv.str();
  else {
    write_text(a.out_table, csv.str());
    mf.output(a.out_table);
  }

  if (!a.report.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& r : recs) arr.push_back(session_report(r));
    write_text(a.report, arr.dump(2) + "\n");
    mf.output(a.report);
  }

  if (!a.svg.empty()) {
    std::vector<VelocityPdf> pdfs;
    std::vector<std::string> labels;
    for (const auto& r : recs)
      for (const auto& p : r.players) {
        pdfs.push_back(velocity_pdf(resample(p.trajectory(r.config.tick_hz), r.config.analysis_rate_hz)));
        labels.push_back(p.handle.id);
      }
    const auto map = similarity_space(pdfs, labels);
    std::ostringstream svg;
    write_similarity_svg(svg, map);
    write_text(a.svg, svg.str());
    mf.output(a.svg);
    const auto& e = map.ellipses;
    for (auto i = e.begin(); i != e.end(); ++i)
      for (auto k = std::next(i); k != e.end(); ++k) {
        try {
          std::printf("overlap %s/%s %.3f\n", i->first.c_str(), k->first.c_str(), ellipse_overlap(i->second, k->second));
        } catch (const Error&) {
          std::printf("overlap %s/%s undefined (degenerate region)\n", i->first.c_str(), k->first.c_str());
        }
      }
  }
  const fs::path anchor = !a.out_table.empty() ? fs::path(a.out_table) : !a.svg.empty() ? fs::path(a.svg) : fs::path();
  if (!anchor.empty()) mf.write(anchor.string() + ".manifest.json");
  return 0;
}

// ---- serve ----

struct ServeArgs {
  std::string bind = "127.0.0.1:8080", avatar = "vt", role = "leader", ims_model, vt_config, qtable, out_dir = "live",
              web_root;
  double duration_s = 60.0, tick_hz = 10.0;
  std::uint64_t seed = 0;
};

int cmd_serve(const ServeArgs& a) {
  ServiceOptions o;
  const auto colon = a.bind.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorKind::config_schema, "--bind expects HOST:PORT");
  o.bind_addr = a.bind.substr(0, colon);
  try {
    o.port = static_cast<unsigned short>(std::stoi(a.bind.substr(colon + 1)));
  } catch (const std::exception&) {
    throw Error(ErrorKind::config_schema, "--bind port is not a number");
  }
  o.web_root = a.web_root;
  o.out_dir = a.out_dir;
  o.duration_s = a.duration_s;
  o.tick_hz = a.tick_hz;
  o.seed = a.seed;
  o.avatar_role = parse_role(a.role);
  if (a.avatar == "vt") {
    VtConfig cfg = o.avatar_role == Role::leader ? vt_leader_config() : vt_follower_config();
    if (!a.vt_config.empty()) cfg = vt_config_from_json(read_json_file(a.vt_config), cfg);
    cfg.tick_hz = a.tick_hz;
    std::shared_ptr<const MarkovChainModel> ims;
    if (!a.ims_model.empty()) ims = std::make_shared<const MarkovChainModel>(load_markov_model(a.ims_model));
    o.avatar_kind = PlayerKind::virtual_trainer;
    o.avatar_id = "VT";
    o.avatar = [cfg, ims](std::uint64_t seed) { return std::make_unique<VtPlayer>(VirtualTrainer(cfg, ims, seed)); };
  } else if (a.avatar == "cp") {
    if (a.qtable.empty()) throw Error(ErrorKind::config_schema, "--avatar cp needs --qtable");
    auto agent = std::make_shared<const LoadedAgent>(load_qtable(a.qtable));
    if (std::abs(agent->config.tick_hz - a.tick_hz) > 1e-12)
      throw Error(ErrorKind::config_schema, "Q-table tick_hz differs from --tick-hz");
    const auto table = std::shared_ptr<const QTable>(agent, &agent->table);
    o.avatar_kind = PlayerKind::cyber_player;
    o.avatar_id = "CP";
    o.avatar = [agent, table](std::uint64_t) { return std::make_unique<CpPlayer>(CyberPlayer(agent->config, table)); };
  } else {
    throw Error(ErrorKind::config_schema, "--avatar must be vt or cp");
  }
  GameService svc(o);
  svc.start();
  std::printf("serving on %s:%u (websocket /session)\n", o.bind_addr.c_str(), svc.port());
  std::fflush(stdout);
  net::io_context sig_ctx;
  net::signal_set signals(sig_ctx, SIGINT, SIGTERM);
  signals.async_wait([&](beast::error_code, int) { svc.stop(); });
  std::thread sig_thread([&] { sig_ctx.run(); });
  svc.wait();
  sig_ctx.stop();
  sig_thread.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mirror-game toolkit: motor signatures, virtual trainers, cyber players and session metrics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrainImsArgs ti;
  auto* c_ti = app.add_subcommand("train-ims", "Train a Markov-chain motor-signature model from solo trial CSVs");
  c_ti->add_option("--trials", ti.trials_dir, "Directory of trial CSV files (t,x)")->required();
  c_ti->add_option("--out", ti.out, "Output model JSON")->required();
  c_ti->add_option("--levels", ti.levels, "Codebook size")->capture_default_str();
  c_ti->add_option("--window", ti.window, "STFT window length in samples (Hamming)")->capture_default_str();
  c_ti->add_option("--hop", ti.hop, "STFT hop in samples")->capture_default_str();
  c_ti->add_option("--analysis-rate-hz", ti.rate, "Resampling rate before analysis")->capture_default_str();
  c_ti->add_option("--seed", ti.seed, "Codebook initialisation seed")->required();

  SynthArgs sy;
  auto* c_sy = app.add_subcommand("synthesize", "Generate trajectories from a motor-signature model");
  c_sy->add_option("--model", sy.model, "Model JSON")->required();
  c_sy->add_option("--duration-s", sy.duration_s, "Length of each trajectory")->capture_default_str();
  c_sy->add_option("--n", sy.n, "Number of trajectories")->capture_default_str();
  c_sy->add_option("--out-dir", sy.out_dir, "Output directory")->required();
  c_sy->add_option("--reference", sy.reference_dir, "Directory of source trials; prints the EMD against them");
  c_sy->add_option("--seed", sy.seed, "Random walk seed")->required();

  PlayArgs pl;
  auto* c_pl = app.add_subcommand("play", "Run a simulated session (or a repeated batch) from a JSON config");
  c_pl->add_option("--config", pl.config, "Session config JSON")->required();
  c_pl->add_option("--out-dir", pl.out_dir, "Where trial records go")->capture_default_str();
  c_pl->add_option("--seed", pl.seed, "Session seed")->required();
  c_pl->add_option("--jobs", pl.jobs, "Parallel sessions for repeated batches")->capture_default_str();

  TrainCpArgs tc;
  auto* c_tc = app.add_subcommand("train-cp", "Train a cyber player by shadowing a virtual trainer");
  c_tc->add_option("--config", tc.config, "Training config JSON")->required();
  c_tc->add_option("--out", tc.out, "Output Q-table (a .json sidecar and .log.csv are written next to it)")->required();
  c_tc->add_option("--trials", tc.trials, "Override n_trials from the config (defaults: 2000 trials of 60 s, alpha 0.1, "
                                          "gamma 0.9, eps0 1, eps decay a third of all updates, actions +-10)");
  c_tc->add_option("--checkpoint", tc.checkpoint, "Checkpoint path prefix");
  c_tc->add_option("--checkpoint-every", tc.checkpoint_every, "Trials between checkpoints")->capture_default_str();
  c_tc->add_flag("--resume", tc.resume, "Continue from --checkpoint");
  c_tc->add_option("--seed", tc.seed, "Training seed")->required();
  c_tc->add_option("--jobs", tc.jobs, "Accepted for symmetry; training itself is sequential")->capture_default_str();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Aggregate trial records into a table and similarity-space plot");
  c_ev->add_option("--records", ev.records, "Trial record files or directories");
  c_ev->add_option("--config", ev.config, "Session config to run as a batch instead of (or as well as) records");
  c_ev->add_option("--out-table", ev.out_table, "Aggregate CSV (stdout if omitted)");
  c_ev->add_option("--svg", ev.svg, "Similarity-space SVG");
  c_ev->add_option("--report", ev.report, "Per-session metrics JSON");
  auto* ev_seed = c_ev->add_option("--seed", ev.seed, "Batch seed (required with --config)");
  c_ev->add_option("--jobs", ev.jobs, "Parallel sessions")->capture_default_str();

  ServeArgs sv;
  auto* c_sv = app.add_subcommand("serve", "Live play against an avatar over WebSocket (/session)");
  c_sv->add_option("--bind", sv.bind, "HOST:PORT")->capture_default_str();
  c_sv->add_option("--avatar", sv.avatar, "vt or cp")->capture_default_str();
  c_sv->add_option("--role", sv.role, "Avatar role: leader or follower")->capture_default_str();
  c_sv->add_option("--ims-model", sv.ims_model, "Motor-signature model for a VT avatar");
  c_sv->add_option("--vt-config", sv.vt_config, "VT parameter overrides (defaults: leader theta_p 0.1 omega 0.8; "
                                                "follower theta_p 0.9 omega 0.1; alpha 1 beta 2 gamma -1; eta 1e-4; "
                                                "horizon 0.03 s)");
  c_sv->add_option("--qtable", sv.qtable, "Q-table for a CP avatar");
  c_sv->add_option("--duration-s", sv.duration_s, "Session length")->capture_default_str();
  c_sv->add_option("--tick-hz", sv.tick_hz, "Tick rate")->capture_default_str();
  c_sv->add_option("--out-dir", sv.out_dir, "Where live trial records go")->capture_default_str();
  c_sv->add_option("--web-root", sv.web_root, "Static files served over HTTP");
  c_sv->add_option("--seed", sv.seed, "Avatar seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (c_ti->parsed()) {
      Manifest mf("train-ims", argc, argv);
      return cmd_train_ims(ti, mf);
    }
    if (c_sy->parsed()) {
      Manifest mf("synthesize", argc, argv);
      return cmd_synthesize(sy, mf);
    }
    if (c_pl->parsed()) {
      Manifest mf("play", argc, argv);
      return cmd_play(pl, mf);
    }
    if (c_tc->parsed()) {
      Manifest mf("train-cp", argc, argv);
      return cmd_train_cp(tc, mf);
    }
    if (c_ev->parsed()) {
      ev.seed_given = ev_seed->count() > 0;
      Manifest mf("evaluate", argc, argv);
      return cmd_evaluate(ev, mf);
    }
    if (c_sv->parsed()) return cmd_serve(sv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
