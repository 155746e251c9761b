// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "frcrn/grad_check.h"
#include "frcrn/model.h"
#include "frcrn/objective.h"

using namespace frcrn;

namespace {

AudioBuffer noise(int64_t n, uint64_t seed, int sr = 16000, double amp = 0.4) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-amp, amp);
  AudioBuffer a;
  a.sample_rate = sr;
  a.samples.resize(n);
  for (auto& s : a.samples) s = d(rng);
  return a;
}

CTensor rand_map(Shape s, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor re = Tensor::randn(s, rng);
  Tensor im = Tensor::randn(std::move(s), rng);
  return CTensor(std::move(re), std::move(im));
}

}  // namespace

TEST_CASE("cr block produces the expected shape at full width") {
  ParameterStore store;
  std::mt19937_64 rng(1);
  ComplexConv2d conv(store, "conv", 1, 128, 2, 5, 2, rng);
  ComplexBatchNorm bn(store, "bn", 128);
  Cfsmn fsmn(store, "fsmn", 128, 128, 20, 0, rng);

  CTensor x = rand_map({1, 10, 321}, 2);
  CTensor v = conv.forward(x);
  v = bn.forward(v, false);
  v = split_leaky_relu(v, 0.01);
  v = cpermute(fsmn.forward(cpermute(v, {1, 2, 0})), {2, 0, 1});
  CHECK(v.shape() == Shape{128, 10, 159});
}

TEST_CASE("model config validation catches bad setups") {
  ModelConfig c = ModelConfig::toy(4, 2);
  c.validate();
  c.num_blocks = 12;  // frequency axis collapses below the kernel
  CHECK_THROWS_AS(c.validate(), ConfigError);

  ModelConfig f = ModelConfig::fullband();
  f.validate();
  CHECK(f.input_bins() == 321);
  f.in_channels = 2;
  CHECK_THROWS_AS(f.validate(), ConfigError);
}

TEST_CASE("encoder chain and bottleneck dims for the paper configs") {
  ModelConfig full = ModelConfig::wideband_full();
  CHECK(full.encoder_chain() ==
        std::vector<int>{321, 159, 78, 37, 17, 7, 2});
  CHECK(full.bottleneck_dim() == 256);
  CHECK(full.latency_samples() == 480);
  CHECK(full.latency_ms() == doctest::Approx(30.0));

  ModelConfig fb = ModelConfig::fullband();
  CHECK(fb.encoder_chain() == std::vector<int>{321, 159, 78, 37, 17, 7, 2});
  CHECK(fb.latency_ms() == doctest::Approx(30.0));
}

TEST_CASE("forward output shapes equal the input shapes") {
  ParameterStore store;
  ModelConfig cfg = ModelConfig::toy(8, 6, StftConfig::wideband());
  FrcrnModel model(cfg, store, 3);
  auto a = noise(16000, 4);
  auto X = stft(a, cfg.stft);
  CHECK(X.frames == 99);
  CHECK(X.bins == 321);
  CTensor xb = split_bands(spec_to_ctensor(X), cfg.bands);
  auto out = model.forward(xb);
  CHECK(out.mask.shape() == Shape{1, 99, 321});
  CHECK(out.enhanced.shape() == Shape{1, 99, 321});
}

TEST_CASE("mask parts always stay within [-1, 1]") {
  ParameterStore store;
  FrcrnModel model(ModelConfig::toy(8, 2), store, 5);
  for (uint64_t trial = 0; trial < 25; ++trial) {
    CTensor x = rand_map({1, 4, 37}, 100 + trial);
    for (auto& v : x.re.mutable_data()) v *= 10.0;
    auto out = model.forward(x);
    for (double v : out.mask.re.data()) CHECK(std::abs(v) <= 1.0);
    for (double v : out.mask.im.data()) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("zero input spectrogram yields exactly zero output") {
  ParameterStore store;
  FrcrnModel model(ModelConfig::toy(8, 2), store, 6);
  CTensor x = CTensor::zeros({1, 5, 37});
  auto out = model.forward(x);
  for (double v : out.enhanced.re.data()) CHECK(v == 0.0);
  for (double v : out.enhanced.im.data()) CHECK(v == 0.0);
}

TEST_CASE("saturated head gives the identity mask and enhanced == input") {
  ParameterStore store;
  FrcrnModel model(ModelConfig::toy(8, 2), store, 7);
  model.force_identity_mask();
  CTensor x = rand_map({1, 6, 37}, 8);
  auto out = model.forward(x);
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK(out.mask.re.data()[i] == 1.0);
    CHECK(out.mask.im.data()[i] == 0.0);
    CHECK(out.enhanced.re.data()[i] == x.re.data()[i]);
    CHECK(out.enhanced.im.data()[i] == x.im.data()[i]);
  }
}

TEST_CASE("decoder restores the encoder input width for random F") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> fdist(64, 200);
  for (int trial = 0; trial < 6; ++trial) {
    const int F = fdist(rng);
    ModelConfig cfg;
    cfg.channels = 8;
    cfg.num_blocks = 4;
    cfg.fsmn_back = 3;
    int fft = 2 * (F - 1);
    cfg.stft = StftConfig{fft, fft, fft, WindowKind::kRect};
    cfg.bands = BandSplit::single(F);
    ParameterStore store;
    FrcrnModel model(cfg, store, 10 + trial);
    CTensor x = rand_map({1, 3, F}, 20 + trial);
    auto out = model.forward(x);
    CHECK(out.mask.dim(2) == F);
  }
}

TEST_CASE("all four ablation variants run forward and backward") {
  struct Variant {
    bool cred_fsmn, attention, recurrent;
  };
  for (auto v : {Variant{true, true, true}, Variant{false, true, true},
                 Variant{true, false, true}, Variant{true, true, false}}) {
    CAPTURE(v.cred_fsmn);
    CAPTURE(v.attention);
    CAPTURE(v.recurrent);
    ModelConfig cfg = ModelConfig::toy(6, 2);
    cfg.cred_fsmn = v.cred_fsmn;
    cfg.attention = v.attention;
    cfg.recurrent = v.recurrent;
    ParameterStore store;
    FrcrnModel model(cfg, store, 11);

    auto y = noise(64 + 3 * 32, 30);
    auto x = noise(64 + 3 * 32, 31);
    for (size_t i = 0; i < x.samples.size(); ++i)
      x.samples[i] += y.samples[i];
    auto X = stft(x, cfg.stft);
    auto M = cirm_target(X, stft(y, cfg.stft));
    Tensor ref =
        Tensor::from_data({static_cast<int64_t>(y.samples.size())}, y.samples);
    CTensor xb = spec_to_ctensor(X);

    Tape tape;
    Tape::Scope scope(tape);
    auto out = model.forward(xb, true);
    Tensor est = slice(
        istft_op(creshape(out.enhanced, {X.frames, X.bins}), cfg.stft), 0, 0,
        ref.numel());
    Tensor loss = joint_loss_op(ref, est, spec_to_ctensor(M), out.mask, 1.0);
    CHECK(std::isfinite(loss.item()));
    tape.backward(loss);
    int64_t with_grad = 0;
    for (auto& [name, t] : store.trainable())
      if (!t.grad().empty()) ++with_grad;
    CHECK(with_grad > 0);
    // every parameter that exists for this variant sits on the loss path
    for (auto& [name, t] : store.trainable()) {
      if (t.numel() == 0) continue;  // lookahead taps with N_R = 0
      bool used = true;
      if (!v.recurrent && name.starts_with("rec.")) used = false;
      if (!v.attention && name.starts_with("skip.")) used = false;
      if (!v.cred_fsmn &&
          (name.find(".fsmn.") != std::string::npos))
        used = false;
      if (used) {
        CAPTURE(name);
        CHECK(!t.grad().empty());
      }
    }
  }
}

TEST_CASE("end-to-end causality on a toy model") {
  ParameterStore store;
  ModelConfig cfg = ModelConfig::toy(6, 3, StftConfig::wideband());
  cfg.fsmn_back = 5;
  FrcrnModel model(cfg, store, 12);
  std::mt19937_64 rng(13);
  const int T = 12;
  CTensor a = rand_map({1, T, 321}, 14);
  auto base = model.forward(a);
  for (int trial = 0; trial < 4; ++trial) {
    std::uniform_int_distribution<int> pick(2, T - 2);
    int cut = pick(rng);
    CTensor b(a.re.clone(), a.im.clone());
    for (int t = cut + 1; t < T; ++t)
      for (int f = 0; f < 321; ++f) {
        b.re.mutable_data()[static_cast<size_t>(t) * 321 + f] =
            std::uniform_real_distribution<double>(-2, 2)(rng);
        b.im.mutable_data()[static_cast<size_t>(t) * 321 + f] =
            std::uniform_real_distribution<double>(-2, 2)(rng);
      }
    auto pert = model.forward(b);
    double m = 0.0;
    for (int t = 0; t <= cut; ++t)
      for (int f = 0; f < 321; ++f) {
        size_t i = static_cast<size_t>(t) * 321 + f;
        m = std::max(m, std::abs(base.enhanced.re.data()[i] -
                                 pert.enhanced.re.data()[i]));
        m = std::max(m, std::abs(base.enhanced.im.data()[i] -
                                 pert.enhanced.im.data()[i]));
      }
    CHECK(m < 1e-10);
  }
}

TEST_CASE("streaming equals batch enhancement on a toy model") {
  ParameterStore store;
  ModelConfig cfg = ModelConfig::toy(6, 3, StftConfig::wideband());
  FrcrnModel model(cfg, store, 15);
  auto a = noise(6400, 16);

  AudioBuffer batch = model.enhance(a);
  AudioBuffer streamed = streaming_enhance(model, a);

  // batch enhance pads the tail beyond (T-1)*hop+win with zeros
  int64_t n = static_cast<int64_t>(streamed.samples.size());
  REQUIRE(n <= static_cast<int64_t>(batch.samples.size()));
  double m = 0.0;
  for (int64_t i = 0; i < n; ++i)
    m = std::max(m, std::abs(batch.samples[i] - streamed.samples[i]));
  CHECK(m < 1e-10);
}

TEST_CASE("streaming pushed in odd chunks matches one-shot pushes") {
  ParameterStore store;
  ModelConfig cfg = ModelConfig::toy(4, 2, StftConfig{64, 32, 72});
  FrcrnModel model(cfg, store, 17);
  auto a = noise(64 + 32 * 9, 18);

  AudioBuffer once = streaming_enhance(model, a);

  StreamingEnhancer s(model);
  std::vector<double> out;
  size_t pos = 0;
  std::mt19937_64 rng(19);
  while (pos < a.samples.size()) {
    size_t chunk = std::min<size_t>(
        std::uniform_int_distribution<size_t>(1, 100)(rng),
        a.samples.size() - pos);
    s.push(std::span<const double>(a.samples.data() + pos, chunk));
    auto part = s.pull();
    out.insert(out.end(), part.begin(), part.end());
    pos += chunk;
  }
  auto tail = s.flush();
  out.insert(out.end(), tail.begin(), tail.end());

  REQUIRE(out.size() == once.samples.size());
  for (size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == doctest::Approx(once.samples[i]).epsilon(1e-12));
}

TEST_CASE("appending garbage never changes already-emitted samples") {
  ParameterStore store;
  ModelConfig cfg = ModelConfig::toy(4, 2, StftConfig{64, 32, 72});
  FrcrnModel model(cfg, store, 20);
  auto a = noise(64 + 32 * 6, 21);

  StreamingEnhancer s1(model);
  s1.push(a.samples);
  auto got1 = s1.pull();

  auto extended = a.samples;
  auto garbage = noise(500, 22, 16000, 1.0);
  extended.insert(extended.end(), garbage.samples.begin(),
                  garbage.samples.end());
  StreamingEnhancer s2(model);
  s2.push(extended);
  auto got2 = s2.pull();

  REQUIRE(got2.size() >= got1.size());
  for (size_t i = 0; i < got1.size(); ++i) CHECK(got1[i] == got2[i]);
}

TEST_CASE("streaming refuses a model in training mode") {
  ParameterStore store;
  FrcrnModel model(ModelConfig::toy(4, 2), store, 23);
  model.set_training(true);
  CHECK_THROWS_AS(StreamingEnhancer{model}, ConfigError);
}

TEST_CASE("parameter counts for the paper configurations") {
  {
    ParameterStore store;
    FrcrnModel model(ModelConfig::wideband_full(), store, 24);
    double m = static_cast<double>(model.param_count()) / 1e6;
    MESSAGE("wideband full: ", m, "M parameters");
    CHECK(m > 6.9 * 0.8);
    CHECK(m < 6.9 * 1.2);
  }
  {
    ParameterStore store;
    FrcrnModel model(ModelConfig::wideband_lite(), store, 25);
    double m = static_cast<double>(model.param_count()) / 1e6;
    MESSAGE("wideband lite: ", m, "M parameters");
    CHECK(m > 2.1 * 0.8);
    CHECK(m < 2.1 * 1.2);
  }
}

TEST_CASE("parameter breakdown covers all sections") {
  ParameterStore store;
  FrcrnModel model(ModelConfig::toy(6, 2), store, 26);
  auto parts = model.param_breakdown();
  for (const char* key : {"enc", "dec", "rec", "skip", "head"})
    CHECK(parts.count(key) == 1);
  int64_t total = 0;
  for (auto& [k, v] : parts) total += v;
  CHECK(total == model.param_count());
}

TEST_CASE("fullband three-band model round trips shapes") {
  ParameterStore store;
  ModelConfig cfg = ModelConfig::fullband();
  cfg.channels = 6;  // keep the test light; the band plumbing is the point
  FrcrnModel model(cfg, store, 27);
  auto a = noise(48000 / 2, 28, 48000);
  auto X = stft(a, cfg.stft);
  CTensor xb = split_bands(spec_to_ctensor(X), cfg.bands);
  CHECK(xb.shape() == Shape{3, X.frames, 321});
  auto out = model.forward(xb);
  CHECK(out.mask.shape() == Shape{3, X.frames, 321});
  CTensor merged = merge_bands(out.enhanced, cfg.bands, X.bins);
  CHECK(merged.shape() == Shape{1, X.frames, 961});
  AudioBuffer enhanced = model.enhance(a);
  CHECK(enhanced.samples.size() == a.samples.size());
}
