#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "mirror/error.hpp"
#include "mirror/signal/fft.hpp"
#include "mirror/signal/trajectory.hpp"

namespace mirror {

enum class WindowKind { hamming };

struct FrameSpec {
  int window_len = 60;
  int hop = 15;
  WindowKind window_kind = WindowKind::hamming;

  int n_bins() const { return window_len / 2 + 1; }

  void validate() const {
    if (window_len < 2) throw Error(ErrorKind::degenerate_input, "window_len must be >= 2");
    if (hop < 1 || hop > window_len)
      throw Error(ErrorKind::degenerate_input, "hop must be in [1, window_len]");
  }
};

// One-sided DFT coefficients of one windowed frame.
using FeatureVector = std::vector<std::complex<double>>;

// Symmetric Hamming window, w[k] = 0.54 - 0.46 cos(2 pi k / (n - 1)).
inline std::vector<double> hamming_window(int n) {
  if (n < 2) throw Error(ErrorKind::degenerate_input, "window length must be >= 2");
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    w[static_cast<std::size_t>(k)] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * k / (n - 1));
  return w;
}

inline std::vector<double> make_window(const FrameSpec& spec) {
  switch (spec.window_kind) {
    case WindowKind::hamming: return hamming_window(spec.window_len);
  }
  return hamming_window(spec.window_len);
}

inline std::size_t frame_count(std::size_t len, const FrameSpec& spec) {
  const auto w = static_cast<std::size_t>(spec.window_len);
  if (len < w) return 0;
  return (len - w) / static_cast<std::size_t>(spec.hop) + 1;
}

// Frames that would run past the end of the signal are dropped.
inline std::vector<FeatureVector> stft(std::span<const double> x, const FrameSpec& spec) {
  spec.validate();
  if (x.size() < static_cast<std::size_t>(spec.window_len))
    throw Error(ErrorKind::degenerate_input, "signal shorter than one window");
  const auto w = make_window(spec);
  const std::size_t n_frames = frame_count(x.size(), spec);
  std::vector<FeatureVector> frames;
  frames.reserve(n_frames);
  std::vector<double> buf(w.size());
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t off = f * static_cast<std::size_t>(spec.hop);
    for (std::size_t k = 0; k < w.size(); ++k) buf[k] = w[k] * x[off + k];
    frames.push_back(fft::rfft(buf));
  }
  return frames;
}

inline std::vector<FeatureVector> stft(const Trajectory& tr, const FrameSpec& spec) {
  return stft(std::span<const double>(tr.samples), spec);
}

// Overlap-add resynthesis. Each inverse-transformed frame is accumulated and
// the result divided by the accumulated window, so any hop reconstructs.
inline Trajectory istft_ola(std::span<const FeatureVector> frames, const FrameSpec& spec,
                            double rate_hz) {
  spec.validate();
  detail::require_rate(rate_hz);
  if (frames.empty()) throw Error(ErrorKind::shape, "no frames to resynthesize");
  const auto bins = static_cast<std::size_t>(spec.n_bins());
  for (const auto& fr : frames)
    if (fr.size() != bins) throw Error(ErrorKind::shape, "frame length does not match frame spec");

  const auto w = make_window(spec);
  const auto wl = static_cast<std::size_t>(spec.window_len);
  const auto hop = static_cast<std::size_t>(spec.hop);
  const std::size_t len = (frames.size() - 1) * hop + wl;
  std::vector<double> acc(len, 0.0), wsum(len, 0.0);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto seg = fft::irfft(frames[f], spec.window_len);
    const std::size_t off = f * hop;
    for (std::size_t k = 0; k < wl; ++k) {
      acc[off + k] += seg[k];
      wsum[off + k] += w[k];
    }
  }
  for (std::size_t i = 0; i < len; ++i) acc[i] /= wsum[i];
  return Trajectory{std::move(acc), rate_hz, 0.0};
}

}  // namespace mirror
