// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "frcrn/tensor.h"
#include "frcrn/wav.h"

namespace frcrn {

enum class WindowKind { kHannPeriodic, kRect };

struct StftConfig {
  int win_samples = 320;
  int hop_samples = 160;
  int fft_size = 640;
  WindowKind window = WindowKind::kHannPeriodic;

  int bins() const { return fft_size / 2 + 1; }
  std::vector<double> window_values() const;
  // hop <= win <= fft plus a numeric check that the squared-window
  // overlap-add stays bounded away from zero in steady state.
  void validate() const;
  // floor((n - win)/hop) + 1; throws if the signal is shorter than a window.
  int frame_count(int64_t n_samples) const;

  // 20 ms window / 10 ms shift at 16 kHz, 640-point zero-padded FFT.
  static StftConfig wideband();
  // Same times at 48 kHz, 1920-point FFT.
  static StftConfig fullband();

  bool operator==(const StftConfig&) const = default;
};

// Complex T x F grid; frame t covers samples [t*hop, t*hop + win).
struct ComplexSpectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<double> re, im;  // row-major T x F
  StftConfig config;
  int sample_rate = 16000;

  double& re_at(int t, int f) { return re[static_cast<size_t>(t) * bins + f]; }
  double& im_at(int t, int f) { return im[static_cast<size_t>(t) * bins + f]; }
  double re_at(int t, int f) const {
    return re[static_cast<size_t>(t) * bins + f];
  }
  double im_at(int t, int f) const {
    return im[static_cast<size_t>(t) * bins + f];
  }
};

ComplexSpectrogram stft(const AudioBuffer& audio, const StftConfig& cfg);

// Overlap-add synthesis with squared-window normalization. Output length is
// (T-1)*hop + win; the first and last (win - hop) samples have partial
// window coverage and are not exactly reconstructible.
AudioBuffer istft(const ComplexSpectrogram& spec);

// Sample range [lo, hi) over which istft(stft(x)) reproduces x.
void istft_interior(const StftConfig& cfg, int64_t out_len, int64_t* lo,
                    int64_t* hi);

// ---- tensor bridges ----

// Spectrogram values as a [1, T, F] complex feature map (constant leaves).
CTensor spec_to_ctensor(const ComplexSpectrogram& spec);
ComplexSpectrogram ctensor_to_spec(const CTensor& x, const StftConfig& cfg,
                                   int sample_rate);

// Differentiable ISTFT: [T, F] complex -> time signal of (T-1)*hop + win
// samples. Forward matches istft(); backward is the exact adjoint (one
// forward FFT per frame).
Tensor istft_op(const CTensor& tf, const StftConfig& cfg);

// ---- fullband band splitting ----

struct BandSplit {
  struct Range {
    int begin = 0;
    int end = 0;  // half-open
    int length() const { return end - begin; }
  };
  std::vector<Range> ranges;

  int channels() const { return static_cast<int>(ranges.size()); }
  // All channels are equalized to the longest range; shorter bands are
  // zero-padded at their upper edge and merge drops the padding.
  int channel_bins() const;
  void validate(int bins) const;

  static BandSplit single(int bins);
  // Three equal bands with one-bin overlaps (bins must be 3k+... any count
  // representable as 3L-2 for integral L; e.g. 961 -> 3 x 321).
  static BandSplit thirds_one_bin_overlap(int bins);

  bool operator==(const BandSplit&) const = default;
};

// [1, T, F] -> [C, T, channel_bins]; channel c carries bins
// [ranges[c].begin, ranges[c].end), upper-edge zero padding where needed.
CTensor split_bands(const CTensor& x, const BandSplit& split);

// Inverse of split_bands; bins claimed by more than one range are averaged.
CTensor merge_bands(const CTensor& x, const BandSplit& split, int bins);

}  // namespace frcrn
