#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace mirror::fft {

// Thin FFTW wrapper. Plans are created once per (kind, size) under a lock
// (FFTW's planner is not thread-safe) and executed with the new-array API,
// which is.
namespace detail {

enum class PlanKind { r2c, c2r, c2c_forward, c2c_backward };

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(PlanKind kind, int n) {
    std::lock_guard lock(mu_);
    auto key = std::make_pair(static_cast<int>(kind), n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::vector<double> rbuf(static_cast<std::size_t>(n));
    std::vector<fftw_complex> cbuf(static_cast<std::size_t>(n));
    std::vector<fftw_complex> cbuf2(static_cast<std::size_t>(n));
    fftw_plan p = nullptr;
    switch (kind) {
      case PlanKind::r2c: p = fftw_plan_dft_r2c_1d(n, rbuf.data(), cbuf.data(), flags); break;
      case PlanKind::c2r: p = fftw_plan_dft_c2r_1d(n, cbuf.data(), rbuf.data(), flags); break;
      case PlanKind::c2c_forward:
        p = fftw_plan_dft_1d(n, cbuf.data(), cbuf2.data(), FFTW_FORWARD, flags);
        break;
      case PlanKind::c2c_backward:
        p = fftw_plan_dft_1d(n, cbuf.data(), cbuf2.data(), FFTW_BACKWARD, flags);
        break;
    }
    plans_.emplace(key, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }

  std::mutex mu_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

inline fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace detail

// One-sided forward DFT, unnormalized: X[k] = sum_n x[n] e^{-2 pi i k n / N}.
inline std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
  auto plan = detail::PlanCache::instance().get(detail::PlanKind::r2c, n);
  fftw_execute_dft_r2c(plan, in.data(), detail::as_fftw(out.data()));
  return out;
}

// Inverse of rfft for a length-n real signal (normalized by 1/n).
inline std::vector<double> irfft(std::span<const std::complex<double>> X, int n) {
  std::vector<std::complex<double>> in(X.begin(), X.end());
  std::vector<double> out(static_cast<std::size_t>(n));
  auto plan = detail::PlanCache::instance().get(detail::PlanKind::c2r, n);
  fftw_execute_dft_c2r(plan, detail::as_fftw(in.data()), out.data());
  const double scale = 1.0 / n;
  for (auto& v : out) v *= scale;
  return out;
}

inline std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> in(x.begin(), x.end()), out(x.size());
  auto plan = detail::PlanCache::instance().get(detail::PlanKind::c2c_forward, n);
  fftw_execute_dft(plan, detail::as_fftw(in.data()), detail::as_fftw(out.data()));
  return out;
}

// Normalized inverse complex DFT.
inline std::vector<std::complex<double>> ifft(std::span<const std::complex<double>> X) {
  const int n = static_cast<int>(X.size());
  std::vector<std::complex<double>> in(X.begin(), X.end()), out(X.size());
  auto plan = detail::PlanCache::instance().get(detail::PlanKind::c2c_backward, n);
  fftw_execute_dft(plan, detail::as_fftw(in.data()), detail::as_fftw(out.data()));
  const double scale = 1.0 / n;
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace mirror::fft
