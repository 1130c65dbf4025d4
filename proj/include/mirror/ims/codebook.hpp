#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mirror/error.hpp"
#include "mirror/random.hpp"
#include "mirror/signal/stft.hpp"

namespace mirror {

using SymbolSequence = std::vector<int>;

// Vector-quantizer codebook. Distances are Euclidean over the stacked
// (re, im) coordinates of the feature vectors.
struct Codebook {
  std::vector<FeatureVector> prototypes;

  int n_levels() const { return static_cast<int>(prototypes.size()); }
  std::size_t dim() const { return prototypes.empty() ? 0 : prototypes.front().size(); }
};

struct LloydOptions {
  int max_iterations = 500;
  double rel_tolerance = 1e-6;
};

namespace detail {

// Row-major real matrix of stacked (re, im) features.
struct FlatFeatures {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double* row(std::size_t i) { return data.data() + i * cols; }
};

inline FlatFeatures flatten(std::span<const FeatureVector> fs) {
  FlatFeatures out;
  out.rows = fs.size();
  out.cols = fs.empty() ? 0 : 2 * fs.front().size();
  out.data.resize(out.rows * out.cols);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (2 * fs[i].size() != out.cols) throw Error(ErrorKind::shape, "feature lengths differ");
    double* r = out.row(i);
    for (std::size_t j = 0; j < fs[i].size(); ++j) {
      r[2 * j] = fs[i][j].real();
      r[2 * j + 1] = fs[i][j].imag();
    }
  }
  return out;
}

inline FeatureVector unflatten(const double* r, std::size_t cols) {
  FeatureVector f(cols / 2);
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = {r[2 * j], r[2 * j + 1]};
  return f;
}

inline double sq_dist(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Partial-distance search; exact, ties go to the lowest index.
inline std::size_t nearest(const double* f, const FlatFeatures& protos, double* best_d = nullptr) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  const std::size_t n = protos.cols;
  for (std::size_t p = 0; p < protos.rows; ++p) {
    const double* c = protos.row(p);
    double s = 0.0;
    std::size_t i = 0;
    for (; i < n; ++i) {
      const double d = f[i] - c[i];
      s += d * d;
      if (s > bd) break;
    }
    if (i == n && s < bd) {
      bd = s;
      best = p;
    }
  }
  if (best_d) *best_d = bd;
  return best;
}

}  // namespace detail

// Mean squared quantization error of `features` under `cb`.
inline double distortion(std::span<const FeatureVector> features, const Codebook& cb) {
  if (features.empty()) return 0.0;
  const auto fl = detail::flatten(features);
  const auto pr = detail::flatten(cb.prototypes);
  if (fl.cols != pr.cols) throw Error(ErrorKind::shape, "feature/prototype dimension mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < fl.rows; ++i) {
    double d = 0.0;
    detail::nearest(fl.row(i), pr, &d);
    total += d;
  }
  return total / static_cast<double>(fl.rows);
}

// Lloyd's algorithm with k-means++ seeding. Empty cells are re-seeded with the
// feature farthest from its current centroid. When the data hold fewer
// distinct vectors than levels, duplicate prototypes are unavoidable; the
// lowest-index tie-break in quantize() then leaves the copies unused.
inline Codebook build_codebook(std::span<const FeatureVector> features, int n_levels,
                               std::uint64_t seed, const LloydOptions& opt = {}) {
  if (n_levels < 2) throw Error(ErrorKind::degenerate_input, "n_levels must be >= 2");
  if (features.size() < static_cast<std::size_t>(n_levels))
    throw Error(ErrorKind::insufficient_data, "fewer features (" + std::to_string(features.size()) +
                                                  ") than codebook levels (" +
                                                  std::to_string(n_levels) + ")");
  const auto X = detail::flatten(features);
  const std::size_t n = X.rows, d = X.cols, k = static_cast<std::size_t>(n_levels);
  Rng rng(seed);

  detail::FlatFeatures C;
  C.rows = k;
  C.cols = d;
  C.data.resize(k * d);

  // k-means++ seeding.
  std::vector<double> dmin(n, std::numeric_limits<double>::infinity());
  std::size_t pick = uniform_index(rng, n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(X.row(pick), d, C.row(c));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dmin[i] = std::min(dmin[i], detail::sq_dist(X.row(i), C.row(c), d));
      total += dmin[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      pick = uniform_index(rng, n);
      continue;
    }
    const double target = uniform01(rng) * total;
    double run = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      run += dmin[i];
      if (run > target && dmin[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }

  std::vector<std::size_t> assign(n);
  std::vector<double> dist(n);
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iterations; ++it) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = detail::nearest(X.row(i), C, &dist[i]);
      total += dist[i];
    }
    const double D = total / static_cast<double>(n);
    const bool converged = D == 0.0 || (std::isfinite(prev) && (prev - D) <= opt.rel_tolerance * prev);
    if (converged && it > 0) break;
    prev = D;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      double* s = sums.data() + assign[i] * d;
      const double* x = X.row(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += x[j];
      ++counts[assign[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      double* cr = C.row(c);
      if (counts[c] > 0) {
        const double inv = 1.0 / static_cast<double>(counts[c]);
        for (std::size_t j = 0; j < d; ++j) cr[j] = sums[c * d + j] * inv;
        continue;
      }
      // Split rule: move the empty centroid onto the worst-served feature.
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && dist[i] > fd) {
          fd = dist[i];
          far = i;
        }
      taken[far] = true;
      dist[far] = 0.0;
      std::copy_n(X.row(far), d, cr);
    }
  }

  Codebook cb;
  cb.prototypes.reserve(k);
  for (std::size_t c = 0; c < k; ++c) cb.prototypes.push_back(detail::unflatten(C.row(c), d));
  return cb;
}

inline SymbolSequence quantize(std::span<const FeatureVector> features, const Codebook& cb) {
  if (cb.prototypes.empty()) throw Error(ErrorKind::shape, "empty codebook");
  for (const auto& f : features)
    if (f.size() != cb.dim()) throw Error(ErrorKind::shape, "feature/prototype dimension mismatch");
  if (features.empty()) return {};
  const auto X = detail::flatten(features);
  const auto C = detail::flatten(cb.prototypes);
  SymbolSequence out(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) out[i] = static_cast<int>(detail::nearest(X.row(i), C));
  return out;
}

inline std::vector<FeatureVector> dequantize(std::span<const int> symbols, const Codebook& cb) {
  std::vector<FeatureVector> out;
  out.reserve(symbols.size());
  for (int s : symbols) {
    if (s < 0 || s >= cb.n_levels())
      throw Error(ErrorKind::range, "symbol " + std::to_string(s) + " outside codebook");
    out.push_back(cb.prototypes[static_cast<std::size_t>(s)]);
  }
  return out;
}

}  // namespace mirror
