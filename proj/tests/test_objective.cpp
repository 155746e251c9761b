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

ComplexSpectrogram const_spec(int T, int F, double re, double im) {
  ComplexSpectrogram s;
  s.frames = T;
  s.bins = F;
  s.re.assign(static_cast<size_t>(T) * F, re);
  s.im.assign(static_cast<size_t>(T) * F, im);
  return s;
}

AudioBuffer noise(int64_t n, uint64_t seed, double amp = 0.4) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-amp, amp);
  AudioBuffer a;
  a.samples.resize(n);
  for (auto& s : a.samples) s = d(rng);
  return a;
}

}  // namespace

TEST_CASE("cirm of unit real mixture is the plain ratio") {
  auto X = const_spec(2, 3, 1.0, 0.0);
  auto Y = const_spec(2, 3, 0.5, 0.5);
  auto M = cirm_target(X, Y);
  CHECK(M.re[0] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(M.im[0] == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("cirm of identical spectrograms is one") {
  auto X = const_spec(3, 4, 0.7, -0.3);
  auto M = cirm_target(X, X);
  for (size_t i = 0; i < M.re.size(); ++i) {
    CHECK(M.re[i] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(M.im[i] == doctest::Approx(0.0).epsilon(1e-6));
  }
}

TEST_CASE("cirm clamps large ratios to [-1,1]") {
  auto X = const_spec(1, 1, 0.1, 0.0);
  auto Y = const_spec(1, 1, 1.0, 0.0);
  auto raw = cirm_target(X, Y, 1e-8, false);
  CHECK(raw.re[0] == doctest::Approx(10.0).epsilon(1e-4));
  auto clamped = cirm_target(X, Y, 1e-8, true);
  CHECK(clamped.re[0] == 1.0);
}

TEST_CASE("cirm shape mismatch is an error") {
  auto X = const_spec(2, 3, 1, 0);
  auto Y = const_spec(2, 4, 1, 0);
  CHECK_THROWS_AS(cirm_target(X, Y), ShapeError);
}

TEST_CASE("si-snr of a perfect estimate clips at the maximum") {
  auto y = noise(4000, 1);
  double v = si_snr_db(y.samples, y.samples);
  CHECK(v >= 100.0);
  // scaling the estimate does not change the projection
  auto y2 = y;
  for (auto& s : y2.samples) s *= 2.0;
  CHECK(si_snr_db(y.samples, y2.samples) == doctest::Approx(v));
}

TEST_CASE("si-snr hand example: orthogonal residual of equal energy") {
  std::vector<double> y{1.0, 0.0}, yh{1.0, 1.0};
  CHECK(si_snr_db(y, yh) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("si-snr rejects a zero-energy reference") {
  std::vector<double> z(10, 0.0), e(10, 0.5);
  CHECK_THROWS_AS(si_snr_db(z, e), NumericError);
}

TEST_CASE("si-snr is invariant to estimate scaling") {
  auto y = noise(16000, 2, 1.0);
  // the literal property: estimates proportional to the reference all clip
  // at the eps-bounded maximum, so the value is constant to 1e-9 dB
  double base = si_snr_db(y.samples, y.samples);
  for (double alpha : {0.5, 2.0, 100.0}) {
    auto scaled = y.samples;
    for (auto& s : scaled) s *= alpha;
    CHECK(std::abs(si_snr_db(y.samples, scaled) - base) < 1e-9);
  }
  // noisy estimates: invariance up to the eps regularizer in the denominator
  auto yh = noise(16000, 3);
  for (size_t i = 0; i < yh.samples.size(); ++i)
    yh.samples[i] = y.samples[i] + 0.3 * yh.samples[i];
  double nbase = si_snr_db(y.samples, yh.samples);
  for (double alpha : {0.5, 3.0, 1e3}) {
    auto scaled = yh.samples;
    for (auto& s : scaled) s *= alpha;
    CHECK(std::abs(si_snr_db(y.samples, scaled) - nbase) < 1e-6);
  }
}

TEST_CASE("tensor si-snr agrees with the scalar route") {
  auto y = noise(1500, 4);
  auto yh = noise(1500, 5);
  for (size_t i = 0; i < yh.samples.size(); ++i)
    yh.samples[i] = y.samples[i] + 0.5 * yh.samples[i];
  Tensor ref = Tensor::from_data({1500}, y.samples);
  Tensor est = Tensor::from_data({1500}, yh.samples);
  CHECK(si_snr_db_op(ref, est).item() ==
        doctest::Approx(si_snr_db(y.samples, yh.samples)).epsilon(1e-12));
}

TEST_CASE("mask mse examples and brute-force oracle") {
  std::mt19937_64 rng(6);
  const int T = 4, F = 5;
  CTensor m(Tensor::randn({T, F}, rng), Tensor::randn({T, F}, rng));

  CHECK(mask_mse_op(m, m).item() == 0.0);

  // constant real offset delta: raw sum is delta^2 * T * F
  const double delta = 0.25;
  CTensor shifted(add_scalar(m.re, delta), m.im);
  CHECK(mask_mse_op(m, shifted, false).item() ==
        doctest::Approx(delta * delta * T * F).epsilon(1e-12));
  CHECK(mask_mse_op(m, shifted, true).item() ==
        doctest::Approx(delta * delta).epsilon(1e-12));

  CTensor est(Tensor::randn({T, F}, rng), Tensor::randn({T, F}, rng));
  double want = 0.0;
  for (int64_t i = 0; i < m.numel(); ++i) {
    double dr = est.re.data()[i] - m.re.data()[i];
    double di = est.im.data()[i] - m.im.data()[i];
    want += dr * dr + di * di;
  }
  CHECK(mask_mse_op(m, est, false).item() ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("joint loss at the optimum is the clipped maximum si-snr") {
  auto y = noise(2000, 7);
  Tensor ref = Tensor::from_data({2000}, y.samples);
  std::mt19937_64 rng(8);
  CTensor m(Tensor::randn({3, 7}, rng), Tensor::randn({3, 7}, rng));
  Tensor loss = joint_loss_op(ref, ref, m, m, 1.0);
  CHECK(loss.item() == doctest::Approx(-100.0));

  // lambda = 0 drops the mask term entirely
  CTensor other(Tensor::randn({3, 7}, rng), Tensor::randn({3, 7}, rng));
  Tensor l0 = joint_loss_op(ref, ref, m, other, 0.0);
  CHECK(l0.item() == doctest::Approx(-100.0));
}

TEST_CASE("unclamped cirm applied to X inverts to the clean signal") {
  StftConfig cfg = StftConfig::wideband();
  auto y = noise(8000, 9, 0.4);
  auto z = noise(8000, 10, 0.2);
  auto x = y;
  for (size_t i = 0; i < x.samples.size(); ++i) x.samples[i] += z.samples[i];
  auto X = stft(x, cfg);
  auto Y = stft(y, cfg);
  auto M = cirm_target(X, Y, 1e-30, false);

  CTensor xm = spec_to_ctensor(X);
  CTensor mm = spec_to_ctensor(M);
  CTensor yh = cmul(mm, xm);
  auto rec = istft(ctensor_to_spec(yh, cfg, 16000));

  int64_t lo, hi;
  istft_interior(cfg, static_cast<int64_t>(rec.samples.size()), &lo, &hi);
  double peak = 0.0, err = 0.0;
  for (int64_t i = lo; i < hi; ++i) {
    peak = std::max(peak, std::abs(y.samples[i]));
    err = std::max(err, std::abs(rec.samples[i] - y.samples[i]));
  }
  CHECK(err / peak < 1e-6);
}

TEST_CASE("joint loss through a one-block model passes gradient checks") {
  StftConfig cfg{64, 32, 72};
  ParameterStore store;
  FrcrnModel model(ModelConfig::toy(4, 1, cfg), store, 42);

  auto y = noise(cfg.win_samples + 3 * cfg.hop_samples, 11, 0.4);
  auto z = noise(y.samples.size(), 12, 0.25);
  auto x = y;
  for (size_t i = 0; i < x.samples.size(); ++i) x.samples[i] += z.samples[i];
  auto X = stft(x, cfg);
  auto Y = stft(y, cfg);
  auto M = cirm_target(X, Y);

  Tensor ref = Tensor::from_data({static_cast<int64_t>(y.samples.size())},
                                 y.samples);
  CTensor xb = spec_to_ctensor(X);
  CTensor mt = spec_to_ctensor(M);

  auto loss_fn = [&] {
    auto out = model.forward(xb, true);
    CTensor yh = creshape(out.enhanced, {X.frames, X.bins});
    Tensor est = istft_op(yh, cfg);
    Tensor est_cut = slice(est, 0, 0, ref.numel());
    return joint_loss_op(ref, est_cut, mt, out.mask, 1.0);
  };

  std::vector<Tensor> params;
  for (auto& [name, t] : store.trainable()) params.push_back(t);
  GradCheckOptions opts;
  opts.step = 1e-5;
  opts.tol = 1e-4;
  opts.max_checks_per_tensor = 6;
  auto rep = grad_check(loss_fn, params, opts);
  CHECK_MESSAGE(rep.pass, rep.detail);
  CHECK(rep.checked > 100);
}

TEST_CASE("a small gradient step decreases the joint loss") {
  StftConfig cfg{64, 32, 72};
  ParameterStore store;
  FrcrnModel model(ModelConfig::toy(4, 2, cfg), store, 43);

  auto y = noise(cfg.win_samples + 5 * cfg.hop_samples, 13, 0.4);
  auto z = noise(y.samples.size(), 14, 0.3);
  auto x = y;
  for (size_t i = 0; i < x.samples.size(); ++i) x.samples[i] += z.samples[i];
  auto X = stft(x, cfg);
  auto M = cirm_target(X, stft(y, cfg));
  Tensor ref = Tensor::from_data({static_cast<int64_t>(y.samples.size())},
                                 y.samples);
  CTensor xb = spec_to_ctensor(X);
  CTensor mt = spec_to_ctensor(M);

  auto compute_loss = [&](bool with_tape, Tape* tape) {
    auto out = model.forward(xb, true);
    CTensor yh = creshape(out.enhanced, {X.frames, X.bins});
    Tensor est = slice(istft_op(yh, cfg), 0, 0, ref.numel());
    Tensor loss = joint_loss_op(ref, est, mt, out.mask, 1.0);
    if (with_tape) tape->backward(loss);
    return loss.item();
  };

  for (uint64_t trial = 0; trial < 3; ++trial) {
    store.zero_grads();
    Tape tape;
    double before;
    {
      Tape::Scope scope(tape);
      before = compute_loss(true, &tape);
    }
    const double lr = 1e-4;
    for (auto& [name, t] : store.trainable()) {
      auto g = t.grad();
      if (g.empty()) continue;
      auto d = t.mutable_data();
      for (size_t i = 0; i < d.size(); ++i) d[i] -= lr * g[i];
    }
    double after = compute_loss(false, nullptr);
    CHECK(after < before);
  }
}
