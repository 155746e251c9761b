// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <map>
#include <string>
#include <vector>

#include "frcrn/layers.h"
#include "frcrn/stft.h"

namespace frcrn {

struct ModelConfig {
  int num_blocks = 6;
  int channels = 128;  // feature maps per CR block and CFSMN cell width
  int in_channels = 1;
  int conv_kt = 2, conv_kf = 5, conv_sf = 2;
  int fsmn_back = 20, fsmn_ahead = 0;
  double leaky_slope = 0.01;
  bool attention = true;   // CCBAM-lite on skip pathways
  bool cred_fsmn = true;   // frequency CFSMN inside CR blocks
  bool recurrent = true;   // two stacked time CFSMN layers at the bottleneck
  StftConfig stft;
  BandSplit bands = BandSplit::single(321);
  int sample_rate = 16000;

  void validate() const;
  int input_bins() const { return bands.channel_bins(); }
  // Frequency dims after each encoder block, starting from input_bins().
  std::vector<int> encoder_chain() const;
  int bottleneck_dim() const;  // H = F'' x C'
  int latency_samples() const {
    return stft.win_samples + stft.hop_samples;
  }
  double latency_ms() const {
    return 1000.0 * latency_samples() / sample_rate;
  }

  static ModelConfig wideband_full();
  static ModelConfig wideband_lite();
  static ModelConfig fullband();
  static ModelConfig toy(int channels, int num_blocks,
                         StftConfig stft = StftConfig{64, 32, 72});

  bool operator==(const ModelConfig&) const = default;
};

// Complex CRED encoder/decoder with frequency recurrence, a two-layer time
// CFSMN bottleneck, attention-gated skips, and a tanh-bounded complex ratio
// mask head.
class FrcrnModel {
 public:
  struct StreamState {
    std::vector<ConvTimeCtx> enc_conv, dec_conv;
    std::vector<RealConvTimeCtx> skip;
    std::vector<CfsmnTimeCtx> rec;
  };

  struct Output {
    CTensor mask;      // [Cin, T, Fch], parts in [-1, 1]
    CTensor enhanced;  // mask (.) x, band domain
  };

  FrcrnModel(const ModelConfig& cfg, ParameterStore& store,
             uint64_t init_seed = 0x12345678ULL);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& store() { return *store_; }
  const ParameterStore& store() const { return *store_; }

  bool training() const { return training_; }
  void set_training(bool t) { training_ = t; }

  // x_bands: [Cin, T, Fch]. In training mode normalization uses this map's
  // own statistics and reports them through bn_stats (running estimates are
  // updated only via apply_bn_stats).
  Output forward(const CTensor& x_bands, bool training = false,
                 std::vector<BnBatchStats>* bn_stats = nullptr) const;

  // Single-frame eval forward against persistent per-layer state.
  Output forward_frame(const CTensor& x_frame, StreamState* state) const;
  StreamState make_stream_state() const;

  void apply_bn_stats(const std::vector<BnBatchStats>& stats);
  int bn_layer_count() const;

  // Whole-utterance eval: stft -> bands -> mask -> merge -> istft.
  AudioBuffer enhance(const AudioBuffer& audio) const;

  int64_t param_count() const { return store_->trainable_scalars(); }
  // Trainable scalars grouped by top-level section (enc/dec/rec/skip/head).
  std::map<std::string, int64_t> param_breakdown() const;

  // Saturates the mask head so the estimate is exactly 1+0j everywhere.
  void force_identity_mask();

 private:
  CTensor freq_cfsmn(const Cfsmn& f, const CTensor& v) const;
  Output forward_impl(const CTensor& x_bands, bool training,
                      std::vector<BnBatchStats>* bn_stats,
                      StreamState* state) const;

  ModelConfig cfg_;
  ParameterStore* store_;
  std::vector<ComplexConv2d> enc_convs_;
  std::vector<ComplexBatchNorm> enc_bns_;
  std::vector<Cfsmn> enc_fsmns_;
  std::vector<ComplexDeconvFreq> dec_deconvs_;
  std::vector<ComplexBatchNorm> dec_bns_;
  std::vector<Cfsmn> dec_fsmns_;
  std::vector<Cfsmn> rec_layers_;
  std::vector<CcbamLite> skips_;
  ComplexConv2d head_;
  bool training_ = false;
};

// Frame-synchronous enhancement around FrcrnModel::forward_frame. Output
// sample n depends only on input samples < n + latency (win + hop); agrees
// with the whole-utterance forward in eval mode.
class StreamingEnhancer {
 public:
  explicit StreamingEnhancer(const FrcrnModel& model);

  int latency_samples() const { return model_.config().latency_samples(); }

  void push(std::span<const double> samples);
  // Newly finalized samples (hop-sized blocks as frames complete).
  std::vector<double> pull();
  // End of stream: the remaining overlap-add tail.
  std::vector<double> flush();

 private:
  void process_one_frame();

  const FrcrnModel& model_;
  FrcrnModel::StreamState state_;
  std::vector<double> window_;
  std::vector<double> in_buf_;
  std::vector<double> ola_num_, ola_den_;
  std::vector<double> ready_;
};

// Convenience wrapper: stream an entire buffer and flush.
AudioBuffer streaming_enhance(const FrcrnModel& model,
                              const AudioBuffer& audio);

}  // namespace frcrn
