#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

#include "mirror/random.hpp"
#include "mirror/signal/fft.hpp"
#include "mirror/signal/stft.hpp"
#include "mirror/signal/trajectory.hpp"

using namespace mirror;
using Catch::Approx;

namespace {

std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k)
    for (std::size_t t = 0; t < n; ++t)
      out[k] += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
  return out;
}

std::vector<double> smooth_signal(Rng& rng, std::size_t n) {
  std::vector<double> x(n, 0.5);
  for (int c = 0; c < 4; ++c) {
    const double f = 0.1 + 0.9 * uniform01(rng), a = 0.1 * uniform01(rng), ph = 6.28 * uniform01(rng);
    for (std::size_t k = 0; k < n; ++k) x[k] += a * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(k) / 100.0 + ph);
  }
  return x;
}

}  // namespace

TEST_CASE("rfft matches a direct DFT") {
  Rng rng(3);
  for (int n : {8, 60, 61, 97}) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = uniform01(rng) - 0.5;
    const auto got = fft::rfft(x);
    const auto want = naive_dft(x);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) REQUIRE(std::abs(got[k] - want[k]) < 1e-10);
    const auto back = fft::irfft(got, n);
    for (std::size_t k = 0; k < x.size(); ++k) REQUIRE(back[k] == Approx(x[k]).margin(1e-12));
  }
}

TEST_CASE("complex fft round trip") {
  Rng rng(5);
  std::vector<std::complex<double>> x(50);
  for (auto& v : x) v = {uniform01(rng), uniform01(rng)};
  const auto back = fft::ifft(fft::fft(x));
  for (std::size_t k = 0; k < x.size(); ++k) REQUIRE(std::abs(back[k] - x[k]) < 1e-12);
}

TEST_CASE("hamming window") {
  const auto w = hamming_window(60);
  REQUIRE(w.front() == Approx(0.08));
  REQUIRE(w.back() == Approx(0.08));
  for (std::size_t k = 0; k < 30; ++k) REQUIRE(w[k] == Approx(w[59 - k]).margin(1e-15));
  REQUIRE_THROWS_AS(hamming_window(1), Error);
}

TEST_CASE("stft frame count drops the partial tail") {
  const FrameSpec spec;
  REQUIRE(frame_count(60, spec) == 1);
  REQUIRE(frame_count(74, spec) == 1);
  REQUIRE(frame_count(75, spec) == 2);
  REQUIRE(frame_count(3000, spec) == 197);
  std::vector<double> x(59, 0.0);
  REQUIRE_THROWS_AS(stft(x, spec), Error);
}

TEST_CASE("stft of a constant has energy only at DC") {
  std::vector<double> x(120, 1.0);
  const auto frames = stft(x, FrameSpec{});
  const auto w = hamming_window(60);
  double sum = 0.0;
  for (double v : w) sum += v;
  for (const auto& f : frames) {
    REQUIRE(f[0].real() == Approx(sum));
  }
}

TEST_CASE("overlap-add reconstructs exactly") {
  Rng rng(11);
  for (int hop : {15, 20, 30, 60}) {
    FrameSpec spec;
    spec.hop = hop;
    const auto x = smooth_signal(rng, 60 + 40 * static_cast<std::size_t>(hop));
    const auto y = istft_ola(stft(x, spec), spec, 100.0);
    REQUIRE(y.size() <= x.size());
    for (std::size_t k = 0; k < y.size(); ++k) REQUIRE(std::abs(y.samples[k] - x[k]) < 1e-9);
  }
}

TEST_CASE("istft rejects mismatched frames") {
  std::vector<FeatureVector> frames{FeatureVector(10)};
  REQUIRE_THROWS_AS(istft_ola(frames, FrameSpec{}, 100.0), Error);
}

TEST_CASE("resample keeps node values and reproduces a cubic-free line exactly") {
  Trajectory tr{{0.0, 0.1, 0.2, 0.3, 0.4}, 10.0, 0.0};
  const auto up = resample(tr, 100.0);
  REQUIRE(up.size() == 41);
  for (std::size_t k = 0; k < up.size(); ++k) REQUIRE(up.samples[k] == Approx(k * 0.01).margin(1e-12));
  for (std::size_t k = 0; k < tr.size(); ++k) REQUIRE(up.samples[10 * k] == Approx(tr.samples[k]).margin(1e-15));
}

TEST_CASE("resample of a slow sine is accurate between nodes") {
  Trajectory tr{{}, 10.0, 0.0};
  for (int k = 0; k <= 600; ++k) tr.samples.push_back(0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * 0.25 * k / 10.0));
  const auto up = resample(tr, 100.0);
  REQUIRE(up.size() == 6001);
  double worst = 0.0;
  for (std::size_t k = 500; k < 5500; ++k)
    worst = std::max(worst, std::abs(up.samples[k] - (0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * 0.25 * k / 100.0))));
  REQUIRE(worst < 1e-4);
}

TEST_CASE("resample needs two samples") {
  Trajectory tr{{0.5}, 10.0, 0.0};
  REQUIRE_THROWS_AS(resample(tr, 100.0), Error);
}

TEST_CASE("velocity uses central differences") {
  Trajectory tr{{0.0, 1.0, 4.0, 9.0}, 1.0, 0.0};
  const auto v = velocity(tr);
  REQUIRE(v == std::vector<double>{1.0, 2.0, 4.0, 5.0});
}

TEST_CASE("trajectory csv round trip") {
  Rng rng(2);
  Trajectory tr{smooth_signal(rng, 300), 100.0, 0.0};
  std::stringstream ss;
  write_trajectory_csv(ss, tr);
  const auto back = read_trajectory_csv(ss);
  REQUIRE(back.rate_hz == Approx(100.0));
  REQUIRE(back.size() == tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) REQUIRE(back.samples[k] == tr.samples[k]);
}

TEST_CASE("trajectory csv rejects junk") {
  std::stringstream ss("t,x\n0,0.5\nfoo,bar\n");
  REQUIRE_THROWS_AS(read_trajectory_csv(ss), Error);
}

TEST_CASE("derive_seed separates tags") {
  REQUIRE(derive_seed(1, 0) != derive_seed(1, 1));
  REQUIRE(derive_seed(1, 0, 1) != derive_seed(1, 1, 0));
  REQUIRE(derive_seed(7, 3) == derive_seed(7, 3));
}

TEST_CASE("uniform_index stays in range and covers it") {
  Rng rng(9);
  std::vector<int> seen(9, 0);
  for (int i = 0; i < 9000; ++i) ++seen[uniform_index(rng, 9)];
  for (int c : seen) REQUIRE(c > 800);
}
