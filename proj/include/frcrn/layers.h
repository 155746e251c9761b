// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "frcrn/param_store.h"
#include "frcrn/tensor.h"

namespace frcrn {

// ---------------------------------------------------------------------------
// Low-level differentiable ops on [C, T, F] feature maps.
// ---------------------------------------------------------------------------

// Real 2D convolution, stride 1 in time. pad_time left-pads kt-1 zero frames
// (causal); without it the first kt-1 input frames act as context and the
// output is that much shorter.
Tensor conv2d_real_op(const Tensor& x, const Tensor& w, const Tensor& b,
                      int stride_f, bool pad_time);

// Complex 2D convolution per U_r = Vr*Wr - Vi*Wi, U_i = Vr*Wi + Vi*Wr,
// fused over shared im2col buffers.
CTensor complex_conv2d_op(const CTensor& x, const Tensor& wr, const Tensor& wi,
                          const Tensor& br, const Tensor& bi, int stride_f,
                          bool pad_time);

// Complex frequency-transposed convolution: frequency axis upsampled by
// stride_f (transposed filtering), time axis an ordinary causal conv. The
// raw (F_in-1)*stride_f + kf columns are cropped or zero-padded at the top
// edge to exactly target_f.
CTensor complex_deconv_freq_op(const CTensor& x, const Tensor& wr,
                               const Tensor& wi, const Tensor& br,
                               const Tensor& bi, int stride_f, int target_f,
                               bool pad_time);

// FSMN memory block: out[b,i] = p[b,i+lc] + sum_{tau=0..NL} a_tau (.) p[b,i+lc-tau]
//                             + sum_{kappa=1..NR} c_kappa (.) p[b,i+lc+kappa],
// out-of-range p treated as zero. left_context lc > 0 lets streaming prepend
// history rows without changing the math.
Tensor fsmn_memory_op(const Tensor& p, const Tensor& taps_back,
                      const Tensor& taps_ahead, int left_context = 0);

// LeakyReLU applied independently to the real and imaginary planes.
CTensor split_leaky_relu(const CTensor& x, double slope = 0.01);

// ---------------------------------------------------------------------------
// Streaming contexts (time-axis state; frequency never carries state).
// ---------------------------------------------------------------------------

struct ConvTimeCtx {
  CTensor frames;  // last kt-1 input frames, zero-initialized
};

struct RealConvTimeCtx {
  Tensor frames;
};

struct FsmnTimeCtx {
  Tensor p_hist;  // [B, NL, D] most recent projections, zero-initialized
};

struct CfsmnTimeCtx {
  FsmnTimeCtx rr, ri, ir, ii;
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

struct ComplexConv2d {
  int in_ch = 0, out_ch = 0, kt = 2, kf = 5, stride_f = 2;
  Tensor wr, wi, br, bi;

  ComplexConv2d() = default;
  ComplexConv2d(ParameterStore& store, const std::string& prefix, int in_ch,
                int out_ch, int kt, int kf, int stride_f, std::mt19937_64& rng,
                bool with_bias = true);

  // ctx == nullptr: batch mode with causal zero padding.
  CTensor forward(const CTensor& x, ConvTimeCtx* ctx = nullptr) const;
  ConvTimeCtx make_ctx(int freq_bins) const;
  int out_bins(int in_bins) const;
};

struct ComplexDeconvFreq {
  int in_ch = 0, out_ch = 0, kt = 2, kf = 5, stride_f = 2;
  Tensor wr, wi, br, bi;

  ComplexDeconvFreq() = default;
  ComplexDeconvFreq(ParameterStore& store, const std::string& prefix,
                    int in_ch, int out_ch, int kt, int kf, int stride_f,
                    std::mt19937_64& rng);

  CTensor forward(const CTensor& x, int target_f,
                  ConvTimeCtx* ctx = nullptr) const;
  ConvTimeCtx make_ctx(int freq_bins) const;
};

// Per-batch statistics a train-mode forward reports; the trainer folds them
// into the running estimates (see apply_batch_stats).
struct BnBatchStats {
  std::vector<double> mean_r, mean_i, cov_rr, cov_ri, cov_ii;
};

struct ComplexBatchNorm {
  int channels = 0;
  double eps = 1e-5;
  double momentum = 0.1;
  Tensor gamma_rr, gamma_ri, gamma_ir, gamma_ii, beta_r, beta_i;
  // running estimates; buffers, not trainable
  Tensor run_mean_r, run_mean_i, run_cov_rr, run_cov_ri, run_cov_ii;

  ComplexBatchNorm() = default;
  ComplexBatchNorm(ParameterStore& store, const std::string& prefix,
                   int channels);

  // training=true normalizes by this map's own statistics and, when given,
  // reports them; running estimates are only changed by apply_batch_stats.
  CTensor forward(const CTensor& x, bool training,
                  BnBatchStats* stats = nullptr) const;
  void apply_batch_stats(const BnBatchStats& stats);
};

// Feedforward sequential memory cell over [B, L, D] sequences: a hidden
// affine + ReLU, a projection back to D, learnable memory taps over the
// sequence axis, and a residual. Projection dim equals input dim.
struct FsmnCell {
  int dim = 0, hidden = 0, n_back = 20, n_ahead = 0;
  bool linear_activation = false;  // test hook: identity instead of ReLU
  Tensor w1, b1, w2, b2, taps_back, taps_ahead;

  FsmnCell() = default;
  FsmnCell(ParameterStore& store, const std::string& prefix, int dim,
           int hidden, int n_back, int n_ahead, std::mt19937_64& rng);

  Tensor forward(const Tensor& s, FsmnTimeCtx* ctx = nullptr) const;
  FsmnTimeCtx make_ctx(int64_t batch) const;
};

// Complex FSMN: out = Fr(Sr) - Fi(Si) + j(Fr(Si) + Fi(Sr)).
struct Cfsmn {
  FsmnCell real_cell, imag_cell;

  Cfsmn() = default;
  Cfsmn(ParameterStore& store, const std::string& prefix, int dim, int hidden,
        int n_back, int n_ahead, std::mt19937_64& rng);

  CTensor forward(const CTensor& s, CfsmnTimeCtx* ctx = nullptr) const;
  CfsmnTimeCtx make_ctx(int64_t batch) const;
};

// Skip-pathway attention: a per-(channel, frame) gate from
// frequency-pooled magnitudes through a bottleneck MLP, then a per-position
// gate from channel-pooled statistics through a causal 2x5 conv. Both gates
// are sigmoids, so output magnitude never exceeds the input.
struct CcbamLite {
  int channels = 0, bottleneck = 0;
  Tensor w1, b1, w2, b2;  // channel MLP
  Tensor sw, sb;          // spatial conv [1,2,kt,kf]

  CcbamLite() = default;
  CcbamLite(ParameterStore& store, const std::string& prefix, int channels,
            std::mt19937_64& rng);

  CTensor forward(const CTensor& x, RealConvTimeCtx* ctx = nullptr) const;
  RealConvTimeCtx make_ctx(int freq_bins) const;
  // Saturates gate biases so the block becomes an exact identity.
  void force_identity();
};

// floor((f - kf)/stride) + 1
int conv_out_bins(int in_bins, int kf, int stride_f);

}  // namespace frcrn
