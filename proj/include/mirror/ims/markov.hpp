#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirror/error.hpp"
#include "mirror/ims/codebook.hpp"
#include "mirror/random.hpp"
#include "mirror/signal/stft.hpp"
#include "mirror/signal/trajectory.hpp"

namespace mirror {

// Dense row-major square matrix of transition probabilities.
struct TransitionMatrix {
  int n = 0;
  std::vector<double> p;

  TransitionMatrix() = default;
  explicit TransitionMatrix(int n_states)
      : n(n_states), p(static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_states), 0.0) {}

  double& operator()(int i, int j) { return p[static_cast<std::size_t>(i) * n + j]; }
  double operator()(int i, int j) const { return p[static_cast<std::size_t>(i) * n + j]; }
  std::span<const double> row(int i) const {
    return {p.data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(n)};
  }
};

inline void check_row_stochastic(const TransitionMatrix& a, double tol = 1e-9) {
  for (int i = 0; i < a.n; ++i) {
    double s = 0.0;
    for (double v : a.row(i)) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw Error(ErrorKind::invariant, "negative or non-finite transition probability");
      s += v;
    }
    if (std::abs(s - 1.0) > tol)
      throw Error(ErrorKind::invariant, "transition row " + std::to_string(i) + " sums to " +
                                            std::to_string(s));
  }
}

struct MarkovChainModel {
  Codebook codebook;
  TransitionMatrix transition;
  int initial_state = 0;
  FrameSpec frame_spec;
  double rate_hz = 100.0;

  int n_levels() const { return codebook.n_levels(); }
};

// Maximum-likelihood bigram estimate. States with no observed successor get a
// self-loop so the chain never dead-ends.
inline TransitionMatrix estimate_transitions(std::span<const SymbolSequence> seqs, int n_levels) {
  if (n_levels < 1) throw Error(ErrorKind::degenerate_input, "n_levels must be positive");
  TransitionMatrix a(n_levels);
  std::vector<double> out_count(static_cast<std::size_t>(n_levels), 0.0);
  std::size_t bigrams = 0;
  for (const auto& s : seqs) {
    for (int sym : s)
      if (sym < 0 || sym >= n_levels) throw Error(ErrorKind::range, "symbol outside [0, n_levels)");
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
      a(s[k], s[k + 1]) += 1.0;
      out_count[static_cast<std::size_t>(s[k])] += 1.0;
      ++bigrams;
    }
  }
  if (bigrams == 0) throw Error(ErrorKind::insufficient_data, "no symbol transitions observed");
  for (int i = 0; i < n_levels; ++i) {
    const double c = out_count[static_cast<std::size_t>(i)];
    if (c == 0.0) {
      a(i, i) = 1.0;
      continue;
    }
    for (int j = 0; j < n_levels; ++j) a(i, j) /= c;
  }
  return a;
}

// Draw a successor of `state` by inverse-CDF sampling of its row.
inline int sample_successor(const TransitionMatrix& a, int state, Rng& rng) {
  const auto row = a.row(state);
  const double u = uniform01(rng);
  double run = 0.0;
  int last_nonzero = -1;
  for (int j = 0; j < a.n; ++j) {
    const double pj = row[static_cast<std::size_t>(j)];
    if (pj <= 0.0) continue;
    last_nonzero = j;
    run += pj;
    if (u < run) return j;
  }
  if (last_nonzero < 0)
    throw Error(ErrorKind::invariant, "state " + std::to_string(state) + " has no successor");
  return last_nonzero;
}

// Random walk of `count` symbols starting (and including) `start`.
inline SymbolSequence sample_symbols(const TransitionMatrix& a, int start, std::size_t count, Rng& rng) {
  SymbolSequence seq;
  seq.reserve(count);
  if (count == 0) return seq;
  int s = start;
  seq.push_back(s);
  while (seq.size() < count) {
    s = sample_successor(a, s, rng);
    seq.push_back(s);
  }
  return seq;
}

// Stationary distribution by power iteration from the uniform vector.
inline std::vector<double> stationary_distribution(const TransitionMatrix& a, int max_iter = 100000,
                                                   double tol = 1e-13) {
  const auto n = static_cast<std::size_t>(a.n);
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
  for (int it = 0; it < max_iter; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) next[j] += pi[i] * a.p[i * n + j];
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(next[i] - pi[i]));
    pi.swap(next);
    if (diff < tol) break;
  }
  return pi;
}

struct ImsTrainingOptions {
  double analysis_rate_hz = 100.0;
  LloydOptions lloyd{};
};

struct ImsTrainingReport {
  double distortion = 0.0;
  int effective_states = 0;  // states observed in the quantized training data
  std::size_t n_features = 0;
};

inline MarkovChainModel train_ims(std::span<const Trajectory> trials, const FrameSpec& spec, int n_levels,
                                  std::uint64_t seed, const ImsTrainingOptions& opt = {},
                                  ImsTrainingReport* report = nullptr) {
  spec.validate();
  if (trials.empty()) throw Error(ErrorKind::insufficient_data, "no training trials");
  std::vector<std::vector<FeatureVector>> per_trial;
  std::vector<FeatureVector> pooled;
  for (const auto& tr : trials) {
    const Trajectory at_rate =
        std::abs(tr.rate_hz - opt.analysis_rate_hz) < 1e-12 ? tr : resample(tr, opt.analysis_rate_hz);
    auto frames = stft(at_rate, spec);
    pooled.insert(pooled.end(), frames.begin(), frames.end());
    per_trial.push_back(std::move(frames));
  }

  MarkovChainModel m;
  m.codebook = build_codebook(pooled, n_levels, seed, opt.lloyd);
  m.frame_spec = spec;
  m.rate_hz = opt.analysis_rate_hz;

  std::vector<SymbolSequence> seqs;
  std::vector<std::size_t> freq(static_cast<std::size_t>(n_levels), 0);
  for (const auto& frames : per_trial) {
    seqs.push_back(quantize(frames, m.codebook));
    for (int s : seqs.back()) ++freq[static_cast<std::size_t>(s)];
  }
  m.transition = estimate_transitions(seqs, n_levels);
  m.initial_state = static_cast<int>(std::max_element(freq.begin(), freq.end()) - freq.begin());

  if (report) {
    report->distortion = distortion(pooled, m.codebook);
    report->effective_states =
        static_cast<int>(std::count_if(freq.begin(), freq.end(), [](std::size_t c) { return c > 0; }));
    report->n_features = pooled.size();
  }
  return m;
}

// Random walk -> dequantize -> overlap-add, then mean-centred on 0.5 and
// clipped to the play area.
inline Trajectory synthesize(const MarkovChainModel& m, double duration_s, std::uint64_t rng_seed) {
  const double window_s = m.frame_spec.window_len / m.rate_hz;
  if (!(duration_s >= window_s - 1e-12))
    throw Error(ErrorKind::degenerate_input, "duration shorter than one window");
  const auto len = static_cast<std::size_t>(std::llround(duration_s * m.rate_hz));
  const auto wl = static_cast<std::size_t>(m.frame_spec.window_len);
  const auto hop = static_cast<std::size_t>(m.frame_spec.hop);
  const std::size_t n_frames = len <= wl ? 1 : (len - wl + hop - 1) / hop + 1;

  Rng rng(rng_seed);
  const auto symbols = sample_symbols(m.transition, m.initial_state, n_frames, rng);
  const auto frames = dequantize(symbols, m.codebook);
  Trajectory out = istft_ola(frames, m.frame_spec, m.rate_hz);
  out.samples.resize(len);

  double mean = 0.0;
  for (double x : out.samples) mean += x;
  mean /= static_cast<double>(len);
  for (double& x : out.samples) x = std::clamp(x - mean + 0.5, 0.0, 1.0);
  return out;
}

// ---- JSON persistence ----

inline nlohmann::json to_json(const MarkovChainModel& m) {
  nlohmann::json j;
  j["n_levels"] = m.n_levels();
  j["window_len"] = m.frame_spec.window_len;
  j["hop"] = m.frame_spec.hop;
  j["rate_hz"] = m.rate_hz;
  j["initial_state"] = m.initial_state;
  auto protos = nlohmann::json::array();
  for (const auto& p : m.codebook.prototypes) {
    auto row = nlohmann::json::array();
    for (const auto& c : p) row.push_back({c.real(), c.imag()});
    protos.push_back(std::move(row));
  }
  j["prototypes"] = std::move(protos);
  j["transition"] = m.transition.p;
  return j;
}

inline MarkovChainModel markov_model_from_json(const nlohmann::json& j) {
  try {
    MarkovChainModel m;
    const int n = j.at("n_levels").get<int>();
    m.frame_spec.window_len = j.at("window_len").get<int>();
    m.frame_spec.hop = j.at("hop").get<int>();
    m.frame_spec.validate();
    m.rate_hz = j.at("rate_hz").get<double>();
    m.initial_state = j.at("initial_state").get<int>();
    const auto& protos = j.at("prototypes");
    if (static_cast<int>(protos.size()) != n) throw Error(ErrorKind::shape, "prototype count != n_levels");
    const auto bins = static_cast<std::size_t>(m.frame_spec.n_bins());
    for (const auto& row : protos) {
      if (row.size() != bins) throw Error(ErrorKind::shape, "prototype length does not match window");
      FeatureVector f;
      f.reserve(bins);
      for (const auto& c : row) f.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
      m.codebook.prototypes.push_back(std::move(f));
    }
    m.transition = TransitionMatrix(n);
    m.transition.p = j.at("transition").get<std::vector<double>>();
    if (m.transition.p.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
      throw Error(ErrorKind::shape, "transition matrix is not n_levels x n_levels");
    check_row_stochastic(m.transition);
    if (m.initial_state < 0 || m.initial_state >= n) throw Error(ErrorKind::range, "initial_state out of range");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, std::string("malformed IMS model: ") + e.what());
  }
}

inline void save_markov_model(const std::string& path, const MarkovChainModel& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path);
  os << to_json(m).dump() << '\n';
}

inline MarkovChainModel load_markov_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot read " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, path + ": " + e.what());
  }
  return markov_model_from_json(j);
}

}  // namespace mirror
