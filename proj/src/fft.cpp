// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "frcrn/fft.h"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace frcrn {

namespace {

struct PlanPair {
  fftw_plan fwd;
  fftw_plan inv;
};

// FFTW planning is not thread-safe; execution via the new-array interface is.
std::mutex g_plan_mutex;
std::map<int, PlanPair>& plan_cache() {
  static std::map<int, PlanPair> cache;
  return cache;
}

PlanPair get_plans(int n) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto& cache = plan_cache();
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> real_buf(n);
  std::vector<fftw_complex> cplx_buf(n / 2 + 1);
  PlanPair p;
  p.fwd = fftw_plan_dft_r2c_1d(n, real_buf.data(), cplx_buf.data(),
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.inv = fftw_plan_dft_c2r_1d(n, cplx_buf.data(), real_buf.data(),
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (p.fwd == nullptr || p.inv == nullptr)
    throw std::runtime_error("fftw plan creation failed for n=" +
                             std::to_string(n));
  cache.emplace(n, p);
  return p;
}

}  // namespace

Rfft::Rfft(int n) : n_(n) {
  if (n < 2) throw std::invalid_argument("fft size must be >= 2");
  PlanPair p = get_plans(n);
  plan_fwd_ = p.fwd;
  plan_inv_ = p.inv;
}

void Rfft::forward(std::span<const double> in,
                   std::span<std::complex<double>> out) const {
  if (static_cast<int>(in.size()) != n_ ||
      static_cast<int>(out.size()) != bins())
    throw std::invalid_argument("rfft buffer size mismatch");
  std::vector<double> scratch(in.begin(), in.end());
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_fwd_), scratch.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void Rfft::inverse(std::span<const std::complex<double>> in,
                   std::span<double> out) const {
  if (static_cast<int>(in.size()) != bins() ||
      static_cast<int>(out.size()) != n_)
    throw std::invalid_argument("irfft buffer size mismatch");
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  scratch.front() = {scratch.front().real(), 0.0};
  if (n_ % 2 == 0) scratch.back() = {scratch.back().real(), 0.0};
  fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_inv_),
                       reinterpret_cast<fftw_complex*>(scratch.data()),
                       out.data());
  const double inv_n = 1.0 / n_;
  for (auto& x : out) x *= inv_n;
}

}  // namespace frcrn
