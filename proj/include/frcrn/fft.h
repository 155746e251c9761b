// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <span>
#include <vector>

namespace frcrn {

// One-sided real FFT of a fixed size, FFTW-backed. forward() is the plain
// unnormalized DFT; inverse() divides by n. Instances are cheap to copy
// (plans are shared per size) and safe to use from several threads.
class Rfft {
 public:
  explicit Rfft(int n);

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  // in: n reals -> out: n/2+1 complex bins.
  void forward(std::span<const double> in,
               std::span<std::complex<double>> out) const;
  // in: n/2+1 bins -> out: n reals. Imag parts of DC and Nyquist are
  // ignored (the spectrum is treated as one-sided of a real signal).
  void inverse(std::span<const std::complex<double>> in,
               std::span<double> out) const;

 private:
  int n_;
  void* plan_fwd_;  // fftw_plan, shared per size
  void* plan_inv_;
};

}  // namespace frcrn
