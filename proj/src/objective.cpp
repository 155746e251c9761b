// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "frcrn/objective.h"

#include <algorithm>
#include <cmath>

namespace frcrn {

namespace {
constexpr double kLog10 = 2.302585092994045684;
}

double si_snr_db(std::span<const double> ref, std::span<const double> est,
                 double eps, double clip_db) {
  if (ref.size() != est.size())
    throw ShapeError("si_snr: length mismatch " + std::to_string(ref.size()) +
                     " vs " + std::to_string(est.size()));
  double ref_en = 0.0, dot = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    ref_en += ref[i] * ref[i];
    dot += est[i] * ref[i];
  }
  if (ref_en <= 0.0) throw NumericError("si_snr: zero-energy reference");
  const double alpha = dot / ref_en;
  double target_en = 0.0, noise_en = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    double t = alpha * ref[i];
    double e = est[i] - t;
    target_en += t * t;
    noise_en += e * e;
  }
  double v = 10.0 * std::log10((target_en + 1e-30) / (noise_en + eps));
  return std::clamp(v, -clip_db, clip_db);
}

Tensor si_snr_db_op(const Tensor& ref, const Tensor& est, double eps,
                    double clip_db) {
  if (ref.numel() != est.numel())
    throw ShapeError("si_snr: length mismatch");
  double ref_en = 0.0;
  for (double r : ref.data()) ref_en += r * r;
  if (ref_en <= 0.0) throw NumericError("si_snr: zero-energy reference");

  Tensor dot = sum_all(mul(est, ref));
  Tensor alpha = mul_scalar(dot, 1.0 / ref_en);
  Tensor y_target = mul(ref, alpha);  // [N] x [1] broadcast
  Tensor e_noise = sub(est, y_target);
  Tensor num = add_scalar(sum_all(mul(y_target, y_target)), 1e-30);
  Tensor den = add_scalar(sum_all(mul(e_noise, e_noise)), eps);
  Tensor v = mul_scalar(log_op(div(num, den)), 10.0 / kLog10);
  return clamp(v, -clip_db, clip_db);
}

ComplexSpectrogram cirm_target(const ComplexSpectrogram& X,
                               const ComplexSpectrogram& Y, double eps,
                               bool clamp_parts) {
  if (X.frames != Y.frames || X.bins != Y.bins)
    throw ShapeError("cirm_target: spectrogram shape mismatch");
  ComplexSpectrogram M;
  M.frames = X.frames;
  M.bins = X.bins;
  M.config = X.config;
  M.sample_rate = X.sample_rate;
  const size_t n = X.re.size();
  M.re.resize(n);
  M.im.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const double xr = X.re[i], xi = X.im[i];
    const double yr = Y.re[i], yi = Y.im[i];
    const double den = xr * xr + xi * xi + eps;
    double mr = (yr * xr + yi * xi) / den;
    double mi = (yi * xr - yr * xi) / den;
    if (clamp_parts) {
      mr = std::clamp(mr, -1.0, 1.0);
      mi = std::clamp(mi, -1.0, 1.0);
    }
    M.re[i] = mr;
    M.im[i] = mi;
  }
  return M;
}

Tensor mask_mse_op(const CTensor& target, const CTensor& estimate,
                   bool normalized) {
  if (target.shape() != estimate.shape())
    throw ShapeError("mask_mse: shape mismatch " + shape_str(target.shape()) +
                     " vs " + shape_str(estimate.shape()));
  Tensor dr = sub(estimate.re, target.re);
  Tensor di = sub(estimate.im, target.im);
  Tensor s = sum_all(add(mul(dr, dr), mul(di, di)));
  if (normalized)
    s = mul_scalar(s, 1.0 / static_cast<double>(target.numel()));
  return s;
}

Tensor joint_loss_op(const Tensor& ref_audio, const Tensor& est_audio,
                     const CTensor& mask_target, const CTensor& mask_estimate,
                     double lambda) {
  Tensor si = si_snr_db_op(ref_audio, est_audio);
  Tensor loss = neg(si);
  if (lambda != 0.0)
    loss = add(loss,
               mul_scalar(mask_mse_op(mask_target, mask_estimate), lambda));
  return loss;
}

}  // namespace frcrn
