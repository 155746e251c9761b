// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "frcrn/stft.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "frcrn/fft.h"

namespace frcrn {

namespace {
constexpr double kDenomFloor = 1e-8;
}

std::vector<double> StftConfig::window_values() const {
  std::vector<double> w(win_samples);
  switch (window) {
    case WindowKind::kHannPeriodic:
      for (int k = 0; k < win_samples; ++k)
        w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / win_samples);
      break;
    case WindowKind::kRect:
      std::fill(w.begin(), w.end(), 1.0);
      break;
  }
  return w;
}

void StftConfig::validate() const {
  if (hop_samples <= 0 || win_samples <= 0 || fft_size <= 0)
    throw ConfigError("stft sizes must be positive");
  if (!(hop_samples <= win_samples && win_samples <= fft_size))
    throw ConfigError("stft config must satisfy hop <= win <= fft, got hop=" +
                      std::to_string(hop_samples) + " win=" +
                      std::to_string(win_samples) + " fft=" +
                      std::to_string(fft_size));
  // Steady-state squared-window overlap-add; a gap means synthesis would
  // divide by ~0 somewhere in the interior.
  std::vector<double> w = window_values();
  for (int p = 0; p < hop_samples; ++p) {
    double d = 0.0;
    for (int k = p; k < win_samples; k += hop_samples) d += w[k] * w[k];
    if (d < kDenomFloor)
      throw ConfigError(
          "window does not satisfy the overlap-add condition at this hop");
  }
}

int StftConfig::frame_count(int64_t n_samples) const {
  if (n_samples < win_samples)
    throw DataError("audio too short for one stft window (" +
                    std::to_string(n_samples) + " < " +
                    std::to_string(win_samples) + " samples)");
  return static_cast<int>((n_samples - win_samples) / hop_samples) + 1;
}

StftConfig StftConfig::wideband() { return StftConfig{320, 160, 640}; }
StftConfig StftConfig::fullband() { return StftConfig{960, 480, 1920}; }

ComplexSpectrogram stft(const AudioBuffer& audio, const StftConfig& cfg) {
  cfg.validate();
  audio.check_finite();
  const int T = cfg.frame_count(static_cast<int64_t>(audio.samples.size()));
  const int F = cfg.bins();
  const std::vector<double> w = cfg.window_values();
  Rfft fft(cfg.fft_size);

  ComplexSpectrogram spec;
  spec.frames = T;
  spec.bins = F;
  spec.config = cfg;
  spec.sample_rate = audio.sample_rate;
  spec.re.assign(static_cast<size_t>(T) * F, 0.0);
  spec.im.assign(static_cast<size_t>(T) * F, 0.0);

  std::vector<double> frame(cfg.fft_size, 0.0);
  std::vector<std::complex<double>> out(F);
  for (int t = 0; t < T; ++t) {
    const double* x = audio.samples.data() + static_cast<size_t>(t) * cfg.hop_samples;
    for (int k = 0; k < cfg.win_samples; ++k) frame[k] = x[k] * w[k];
    // tail of `frame` stays zero: window zero-padded to fft_size
    fft.forward(frame, out);
    for (int f = 0; f < F; ++f) {
      spec.re_at(t, f) = out[f].real();
      spec.im_at(t, f) = out[f].imag();
    }
  }
  return spec;
}

namespace {

// Shared synthesis core: windowed overlap-add plus the squared-window
// denominator, so batch, streaming and the differentiable op all agree.
struct OlaSynth {
  static int64_t out_len(const StftConfig& cfg, int frames) {
    return static_cast<int64_t>(frames - 1) * cfg.hop_samples +
           cfg.win_samples;
  }

  static void denominator(const StftConfig& cfg, int frames,
                          std::vector<double>& den) {
    const std::vector<double> w = cfg.window_values();
    den.assign(out_len(cfg, frames), 0.0);
    for (int t = 0; t < frames; ++t) {
      double* d = den.data() + static_cast<size_t>(t) * cfg.hop_samples;
      for (int k = 0; k < cfg.win_samples; ++k) d[k] += w[k] * w[k];
    }
  }
};

void synthesize(const StftConfig& cfg, int frames, const double* re,
                const double* im, std::vector<double>& out) {
  cfg.validate();
  const int F = cfg.bins();
  const std::vector<double> w = cfg.window_values();
  Rfft fft(cfg.fft_size);
  const int64_t n = OlaSynth::out_len(cfg, frames);
  std::vector<double> num(n, 0.0);
  std::vector<double> den;
  OlaSynth::denominator(cfg, frames, den);

  std::vector<std::complex<double>> bins(F);
  std::vector<double> time(cfg.fft_size);
  for (int t = 0; t < frames; ++t) {
    for (int f = 0; f < F; ++f)
      bins[f] = {re[static_cast<size_t>(t) * F + f],
                 im[static_cast<size_t>(t) * F + f]};
    fft.inverse(bins, time);
    double* dst = num.data() + static_cast<size_t>(t) * cfg.hop_samples;
    for (int k = 0; k < cfg.win_samples; ++k) dst[k] += w[k] * time[k];
  }
  out.resize(n);
  for (int64_t i = 0; i < n; ++i)
    out[i] = den[i] >= kDenomFloor ? num[i] / den[i] : 0.0;
}

}  // namespace

AudioBuffer istft(const ComplexSpectrogram& spec) {
  if (spec.bins != spec.config.bins())
    throw ShapeError("spectrogram bins do not match its config");
  AudioBuffer out;
  out.sample_rate = spec.sample_rate;
  synthesize(spec.config, spec.frames, spec.re.data(), spec.im.data(),
             out.samples);
  return out;
}

void istft_interior(const StftConfig& cfg, int64_t out_len, int64_t* lo,
                    int64_t* hi) {
  int64_t edge = cfg.win_samples - cfg.hop_samples;
  *lo = edge;
  *hi = out_len - edge;
}

CTensor spec_to_ctensor(const ComplexSpectrogram& spec) {
  Shape s{1, spec.frames, spec.bins};
  return CTensor(Tensor::from_data(s, spec.re),
                 Tensor::from_data(s, spec.im));
}

ComplexSpectrogram ctensor_to_spec(const CTensor& x, const StftConfig& cfg,
                                   int sample_rate) {
  Shape s = x.shape();
  int T, F;
  if (s.size() == 3 && s[0] == 1) {
    T = static_cast<int>(s[1]);
    F = static_cast<int>(s[2]);
  } else if (s.size() == 2) {
    T = static_cast<int>(s[0]);
    F = static_cast<int>(s[1]);
  } else {
    throw ShapeError("expected [T,F] or [1,T,F] map, got " + shape_str(s));
  }
  if (F != cfg.bins())
    throw ShapeError("map has " + std::to_string(F) + " bins, config expects " +
                     std::to_string(cfg.bins()));
  ComplexSpectrogram spec;
  spec.frames = T;
  spec.bins = F;
  spec.config = cfg;
  spec.sample_rate = sample_rate;
  spec.re.assign(x.re.data().begin(), x.re.data().end());
  spec.im.assign(x.im.data().begin(), x.im.data().end());
  return spec;
}

Tensor istft_op(const CTensor& tf, const StftConfig& cfg) {
  if (tf.re.ndim() != 2)
    throw ShapeError("istft_op expects a [T,F] map, got " +
                     shape_str(tf.shape()));
  const int T = static_cast<int>(tf.dim(0));
  const int F = static_cast<int>(tf.dim(1));
  if (F != cfg.bins())
    throw ShapeError("istft_op: map bins " + std::to_string(F) +
                     " vs config bins " + std::to_string(cfg.bins()));
  std::vector<double> out;
  synthesize(cfg, T, tf.re.data().data(), tf.im.data().data(), out);
  const int64_t n = static_cast<int64_t>(out.size());

  return detail::make_op(
      {n}, std::move(out), {tf.re, tf.im},
      [cfg, T, F](detail::Node& self, detail::BackwardCtx& ctx) {
        auto gre = ctx.grad(self.parents[0].get());
        auto gim = ctx.grad(self.parents[1].get());
        if (gre.empty() && gim.empty()) return;
        const auto& g = self.grad;
        const std::vector<double> w = cfg.window_values();
        std::vector<double> den;
        OlaSynth::denominator(cfg, T, den);
        Rfft fft(cfg.fft_size);
        const int nfft = cfg.fft_size;
        std::vector<double> r(nfft);
        std::vector<std::complex<double>> G(cfg.bins());
        for (int t = 0; t < T; ++t) {
          std::fill(r.begin(), r.end(), 0.0);
          const int64_t base = static_cast<int64_t>(t) * cfg.hop_samples;
          for (int k = 0; k < cfg.win_samples; ++k) {
            double d = den[base + k];
            if (d >= kDenomFloor) r[k] = w[k] * g[base + k] / d;
          }
          fft.forward(r, G);
          for (int f = 0; f < F; ++f) {
            // adjoint of the one-sided inverse DFT
            double cr = (f == 0 || 2 * f == nfft) ? 1.0 : 2.0;
            double ci = (f == 0 || 2 * f == nfft) ? 0.0 : 2.0;
            if (!gre.empty())
              gre[static_cast<size_t>(t) * F + f] += cr / nfft * G[f].real();
            if (!gim.empty())
              gim[static_cast<size_t>(t) * F + f] += ci / nfft * G[f].imag();
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Band splitting
// ---------------------------------------------------------------------------

int BandSplit::channel_bins() const {
  int m = 0;
  for (const auto& r : ranges) m = std::max(m, r.length());
  return m;
}

void BandSplit::validate(int bins) const {
  if (ranges.empty()) throw ConfigError("band split has no ranges");
  int prev_begin = -1, prev_end = 0;
  for (const auto& r : ranges) {
    if (r.begin < 0 || r.end > bins || r.begin >= r.end)
      throw ConfigError("band range [" + std::to_string(r.begin) + "," +
                        std::to_string(r.end) + ") invalid for " +
                        std::to_string(bins) + " bins");
    if (r.begin <= prev_begin)
      throw ConfigError("band ranges must be sorted and strictly advancing");
    if (r.begin > prev_end)
      throw ConfigError("band ranges leave bins [" + std::to_string(prev_end) +
                        "," + std::to_string(r.begin) + ") uncovered");
    prev_begin = r.begin;
    prev_end = std::max(prev_end, r.end);
  }
  if (prev_end != bins)
    throw ConfigError("band ranges do not cover the top bins");
}

BandSplit BandSplit::single(int bins) { return BandSplit{{{0, bins}}}; }

BandSplit BandSplit::thirds_one_bin_overlap(int bins) {
  if ((bins + 2) % 3 != 0)
    throw ConfigError("bins=" + std::to_string(bins) +
                      " cannot form three equal one-bin-overlap bands");
  int len = (bins + 2) / 3;
  return BandSplit{{{0, len}, {len - 1, 2 * len - 1}, {2 * len - 2, bins}}};
}

CTensor split_bands(const CTensor& x, const BandSplit& split) {
  if (x.re.ndim() != 3 || x.dim(0) != 1)
    throw ShapeError("split_bands expects [1,T,F], got " +
                     shape_str(x.shape()));
  const int bins = static_cast<int>(x.dim(2));
  split.validate(bins);
  const int cb = split.channel_bins();
  std::vector<CTensor> chans;
  chans.reserve(split.ranges.size());
  for (const auto& r : split.ranges) {
    CTensor c = cslice(x, 2, r.begin, r.length());
    if (r.length() < cb) c = cpad(c, 2, 0, cb - r.length());
    chans.push_back(std::move(c));
  }
  return cconcat(chans, 0);
}

CTensor merge_bands(const CTensor& x, const BandSplit& split, int bins) {
  split.validate(bins);
  if (x.re.ndim() != 3 ||
      x.dim(0) != static_cast<int64_t>(split.ranges.size()) ||
      x.dim(2) != split.channel_bins())
    throw ShapeError("merge_bands: map " + shape_str(x.shape()) +
                     " does not match the band split");
  const int64_t T = x.dim(1);
  std::vector<double> coverage(bins, 0.0);
  for (const auto& r : split.ranges)
    for (int f = r.begin; f < r.end; ++f) coverage[f] += 1.0;
  std::vector<double> inv(bins);
  for (int f = 0; f < bins; ++f) inv[f] = 1.0 / coverage[f];

  CTensor acc = CTensor::zeros({1, T, bins});
  for (size_t c = 0; c < split.ranges.size(); ++c) {
    const auto& r = split.ranges[c];
    CTensor ch = cslice(x, 0, static_cast<int64_t>(c), 1);
    ch = cslice(ch, 2, 0, r.length());  // drop equalization padding
    ch = cpad(ch, 2, r.begin, bins - r.end);
    acc = cadd(acc, ch);
  }
  Tensor covinv = Tensor::from_data({bins}, inv);
  return CTensor(mul(acc.re, covinv), mul(acc.im, covinv));
}

}  // namespace frcrn
