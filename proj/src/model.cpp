// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "frcrn/model.h"

#include <algorithm>
#include <cmath>

#include "frcrn/fft.h"

namespace frcrn {

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  stft.validate();
  bands.validate(stft.bins());
  if (static_cast<int>(bands.ranges.size()) != in_channels)
    throw ConfigError("band split has " +
                      std::to_string(bands.ranges.size()) +
                      " ranges but in_channels=" +
                      std::to_string(in_channels));
  if (num_blocks < 1) throw ConfigError("need at least one CR block");
  if (channels < 1) throw ConfigError("channels must be positive");
  if (conv_kt < 1 || conv_kf < 1 || conv_sf < 1)
    throw ConfigError("conv kernel/stride must be positive");
  if (fsmn_back < 0 || fsmn_ahead < 0)
    throw ConfigError("fsmn orders must be non-negative");
  encoder_chain();  // throws when the frequency axis collapses
}

std::vector<int> ModelConfig::encoder_chain() const {
  std::vector<int> chain{input_bins()};
  for (int i = 0; i < num_blocks; ++i) {
    int f = chain.back();
    if (f < conv_kf)
      throw ConfigError("encoder block " + std::to_string(i) + " sees " +
                        std::to_string(f) + " bins < kernel " +
                        std::to_string(conv_kf));
    chain.push_back(conv_out_bins(f, conv_kf, conv_sf));
  }
  return chain;
}

int ModelConfig::bottleneck_dim() const {
  return encoder_chain().back() * channels;
}

ModelConfig ModelConfig::wideband_full() {
  ModelConfig c;
  c.stft = StftConfig::wideband();
  c.bands = BandSplit::single(c.stft.bins());
  c.sample_rate = 16000;
  return c;
}

ModelConfig ModelConfig::wideband_lite() {
  ModelConfig c = wideband_full();
  c.channels = 64;
  return c;
}

ModelConfig ModelConfig::fullband() {
  ModelConfig c;
  c.stft = StftConfig::fullband();
  c.in_channels = 3;
  c.bands = BandSplit::thirds_one_bin_overlap(c.stft.bins());
  c.sample_rate = 48000;
  return c;
}

ModelConfig ModelConfig::toy(int channels, int num_blocks, StftConfig stft) {
  ModelConfig c;
  c.channels = channels;
  c.num_blocks = num_blocks;
  c.stft = stft;
  c.bands = BandSplit::single(stft.bins());
  return c;
}

// ---------------------------------------------------------------------------
// FrcrnModel
// ---------------------------------------------------------------------------

FrcrnModel::FrcrnModel(const ModelConfig& cfg, ParameterStore& store,
                       uint64_t init_seed)
    : cfg_(cfg), store_(&store) {
  cfg_.validate();
  std::mt19937_64 rng(init_seed);
  const int C = cfg_.channels;

  for (int i = 0; i < cfg_.num_blocks; ++i) {
    const std::string p = "enc." + std::to_string(i);
    int in_ch = i == 0 ? cfg_.in_channels : C;
    enc_convs_.emplace_back(store, p + ".conv", in_ch, C, cfg_.conv_kt,
                            cfg_.conv_kf, cfg_.conv_sf, rng);
    enc_bns_.emplace_back(store, p + ".bn", C);
    enc_fsmns_.emplace_back(store, p + ".fsmn", C, C, cfg_.fsmn_back,
                            cfg_.fsmn_ahead, rng);
  }

  const int H = cfg_.bottleneck_dim();
  for (int i = 0; i < 2; ++i)
    rec_layers_.emplace_back(store, "rec." + std::to_string(i), H, H,
                             cfg_.fsmn_back, cfg_.fsmn_ahead, rng);

  for (int i = 0; i < cfg_.num_blocks; ++i) {
    const std::string p = "dec." + std::to_string(i);
    dec_deconvs_.emplace_back(store, p + ".deconv", 2 * C, C, cfg_.conv_kt,
                              cfg_.conv_kf, cfg_.conv_sf, rng);
    dec_bns_.emplace_back(store, p + ".bn", C);
    dec_fsmns_.emplace_back(store, p + ".fsmn", C, C, cfg_.fsmn_back,
                            cfg_.fsmn_ahead, rng);
  }

  for (int i = 0; i < cfg_.num_blocks; ++i)
    skips_.emplace_back(store, "skip." + std::to_string(i), C, rng);

  head_ = ComplexConv2d(store, "head", C, cfg_.in_channels, 1, 1, 1, rng);
}

CTensor FrcrnModel::freq_cfsmn(const Cfsmn& f, const CTensor& v) const {
  // [C,T,F] -> per-frame frequency sequences [T, F, C]
  const int64_t C = v.dim(0), T = v.dim(1), F = v.dim(2);
  CTensor s = cpermute(v, {1, 2, 0});
  CTensor y = f.forward(s);
  (void)C;
  (void)T;
  (void)F;
  return cpermute(y, {2, 0, 1});
}

FrcrnModel::Output FrcrnModel::forward_impl(
    const CTensor& x_bands, bool training,
    std::vector<BnBatchStats>* bn_stats, StreamState* state) const {
  if (x_bands.re.ndim() != 3 || x_bands.dim(0) != cfg_.in_channels)
    throw ShapeError("model input must be [" +
                     std::to_string(cfg_.in_channels) + ",T,F], got " +
                     shape_str(x_bands.shape()));
  if (training && state != nullptr)
    throw ConfigError("streaming forward is eval-only");
  if (bn_stats != nullptr) bn_stats->assign(bn_layer_count(), BnBatchStats{});

  CTensor v = x_bands;
  std::vector<CTensor> skips;
  std::vector<int> ledger;  // input F of each encoder block
  skips.reserve(cfg_.num_blocks);

  for (int i = 0; i < cfg_.num_blocks; ++i) {
    ledger.push_back(static_cast<int>(v.dim(2)));
    v = enc_convs_[i].forward(v, state ? &state->enc_conv[i] : nullptr);
    v = enc_bns_[i].forward(v, training,
                            bn_stats ? &(*bn_stats)[i] : nullptr);
    v = split_leaky_relu(v, cfg_.leaky_slope);
    if (cfg_.cred_fsmn) v = freq_cfsmn(enc_fsmns_[i], v);
    skips.push_back(v);
  }

  if (cfg_.recurrent) {
    const int64_t C = v.dim(0), T = v.dim(1), F2 = v.dim(2);
    CTensor q = creshape(cpermute(v, {1, 2, 0}), {1, T, F2 * C});
    for (size_t i = 0; i < rec_layers_.size(); ++i)
      q = rec_layers_[i].forward(q, state ? &state->rec[i] : nullptr);
    v = cpermute(creshape(q, {T, F2, C}), {2, 0, 1});
  }

  for (int i = 0; i < cfg_.num_blocks; ++i) {
    const int si = cfg_.num_blocks - 1 - i;
    CTensor skip = skips[si];
    if (cfg_.attention)
      skip = skips_[i].forward(skip, state ? &state->skip[i] : nullptr);
    CTensor u = cconcat({v, skip}, 0);
    v = dec_deconvs_[i].forward(u, ledger[si],
                                state ? &state->dec_conv[i] : nullptr);
    v = dec_bns_[i].forward(
        v, training, bn_stats ? &(*bn_stats)[cfg_.num_blocks + i] : nullptr);
    v = split_leaky_relu(v, cfg_.leaky_slope);
    if (cfg_.cred_fsmn) v = freq_cfsmn(dec_fsmns_[i], v);
  }

  CTensor pre = head_.forward(v);
  CTensor mask(tanh_op(pre.re), tanh_op(pre.im));
  CTensor enhanced = cmul(mask, x_bands);
  return Output{std::move(mask), std::move(enhanced)};
}

FrcrnModel::Output FrcrnModel::forward(
    const CTensor& x_bands, bool training,
    std::vector<BnBatchStats>* bn_stats) const {
  return forward_impl(x_bands, training, bn_stats, nullptr);
}

FrcrnModel::Output FrcrnModel::forward_frame(const CTensor& x_frame,
                                             StreamState* state) const {
  return forward_impl(x_frame, false, nullptr, state);
}

FrcrnModel::StreamState FrcrnModel::make_stream_state() const {
  StreamState s;
  std::vector<int> chain = cfg_.encoder_chain();
  for (int i = 0; i < cfg_.num_blocks; ++i) {
    s.enc_conv.push_back(enc_convs_[i].make_ctx(chain[i]));
    s.dec_conv.push_back(
        dec_deconvs_[i].make_ctx(chain[cfg_.num_blocks - i]));
    s.skip.push_back(skips_[i].make_ctx(chain[cfg_.num_blocks - i]));
  }
  for (const auto& r : rec_layers_) s.rec.push_back(r.make_ctx(1));
  return s;
}

int FrcrnModel::bn_layer_count() const { return 2 * cfg_.num_blocks; }

void FrcrnModel::apply_bn_stats(const std::vector<BnBatchStats>& stats) {
  if (static_cast<int>(stats.size()) != bn_layer_count())
    throw ShapeError("bn stats count mismatch");
  for (int i = 0; i < cfg_.num_blocks; ++i) {
    if (!stats[i].mean_r.empty()) enc_bns_[i].apply_batch_stats(stats[i]);
    const auto& ds = stats[cfg_.num_blocks + i];
    if (!ds.mean_r.empty()) dec_bns_[i].apply_batch_stats(ds);
  }
}

AudioBuffer FrcrnModel::enhance(const AudioBuffer& audio) const {
  ComplexSpectrogram X = stft(audio, cfg_.stft);
  CTensor x = spec_to_ctensor(X);
  CTensor xb = split_bands(x, cfg_.bands);
  Output out = forward(xb, false);
  CTensor y = merge_bands(out.enhanced, cfg_.bands, cfg_.stft.bins());
  ComplexSpectrogram Y = ctensor_to_spec(y, cfg_.stft, audio.sample_rate);
  AudioBuffer rec = istft(Y);
  rec.samples.resize(audio.samples.size(),
                     0.0);  // istft covers (T-1)*hop + win
  rec.sample_rate = audio.sample_rate;
  return rec;
}

std::map<std::string, int64_t> FrcrnModel::param_breakdown() const {
  std::map<std::string, int64_t> out;
  for (const auto& [name, e] : store_->entries()) {
    if (!e.trainable) continue;
    out[name.substr(0, name.find('.'))] += e.tensor.numel();
  }
  return out;
}

void FrcrnModel::force_identity_mask() {
  for (Tensor* t : {&head_.wr, &head_.wi, &head_.bi})
    for (auto& v : t->mutable_data()) v = 0.0;
  // tanh(25) rounds to 1.0 in double precision
  for (auto& v : head_.br.mutable_data()) v = 25.0;
}

// ---------------------------------------------------------------------------
// StreamingEnhancer
// ---------------------------------------------------------------------------

StreamingEnhancer::StreamingEnhancer(const FrcrnModel& model)
    : model_(model), state_(model.make_stream_state()) {
  if (model.training())
    throw ConfigError("streaming enhancement requires eval mode");
  if (model.config().fsmn_ahead != 0)
    throw ConfigError("streaming requires a zero lookahead order");
  const StftConfig& cfg = model.config().stft;
  cfg.validate();
  window_ = cfg.window_values();
  ola_num_.assign(cfg.win_samples, 0.0);
  ola_den_.assign(cfg.win_samples, 0.0);
}

void StreamingEnhancer::push(std::span<const double> samples) {
  in_buf_.insert(in_buf_.end(), samples.begin(), samples.end());
}

void StreamingEnhancer::process_one_frame() {
  const ModelConfig& mc = model_.config();
  const StftConfig& cfg = mc.stft;
  const int F = cfg.bins();

  // analyze one window
  Rfft fft(cfg.fft_size);
  std::vector<double> frame(cfg.fft_size, 0.0);
  for (int k = 0; k < cfg.win_samples; ++k)
    frame[k] = in_buf_[k] * window_[k];
  std::vector<std::complex<double>> bins(F);
  fft.forward(frame, bins);

  std::vector<double> re(F), im(F);
  for (int f = 0; f < F; ++f) {
    re[f] = bins[f].real();
    im[f] = bins[f].imag();
  }
  CTensor x(Tensor::from_data({1, 1, F}, std::move(re)),
            Tensor::from_data({1, 1, F}, std::move(im)));
  CTensor xb = split_bands(x, mc.bands);
  FrcrnModel::Output out = model_.forward_frame(xb, &state_);
  CTensor y = merge_bands(out.enhanced, mc.bands, F);

  for (int f = 0; f < F; ++f)
    bins[f] = {y.re.data()[f], y.im.data()[f]};
  std::vector<double> time(cfg.fft_size);
  fft.inverse(bins, time);

  for (int k = 0; k < cfg.win_samples; ++k) {
    ola_num_[k] += window_[k] * time[k];
    ola_den_[k] += window_[k] * window_[k];
  }
  // frames after this one start hop samples later, so the first hop is final
  for (int k = 0; k < cfg.hop_samples; ++k)
    ready_.push_back(ola_den_[k] >= 1e-8 ? ola_num_[k] / ola_den_[k] : 0.0);
  const int keep = cfg.win_samples - cfg.hop_samples;
  std::copy(ola_num_.begin() + cfg.hop_samples, ola_num_.end(),
            ola_num_.begin());
  std::copy(ola_den_.begin() + cfg.hop_samples, ola_den_.end(),
            ola_den_.begin());
  std::fill(ola_num_.begin() + keep, ola_num_.end(), 0.0);
  std::fill(ola_den_.begin() + keep, ola_den_.end(), 0.0);

  in_buf_.erase(in_buf_.begin(), in_buf_.begin() + cfg.hop_samples);
}

std::vector<double> StreamingEnhancer::pull() {
  const StftConfig& cfg = model_.config().stft;
  while (static_cast<int64_t>(in_buf_.size()) >= cfg.win_samples)
    process_one_frame();
  std::vector<double> out;
  out.swap(ready_);
  return out;
}

std::vector<double> StreamingEnhancer::flush() {
  std::vector<double> out = pull();
  const StftConfig& cfg = model_.config().stft;
  const int keep = cfg.win_samples - cfg.hop_samples;
  for (int k = 0; k < keep; ++k)
    out.push_back(ola_den_[k] >= 1e-8 ? ola_num_[k] / ola_den_[k] : 0.0);
  ola_num_.assign(cfg.win_samples, 0.0);
  ola_den_.assign(cfg.win_samples, 0.0);
  return out;
}

AudioBuffer streaming_enhance(const FrcrnModel& model,
                              const AudioBuffer& audio) {
  StreamingEnhancer s(model);
  s.push(audio.samples);
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples = s.pull();
  auto tail = s.flush();
  out.samples.insert(out.samples.end(), tail.begin(), tail.end());
  return out;
}

}  // namespace frcrn
