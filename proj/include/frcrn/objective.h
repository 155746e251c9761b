// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>

#include "frcrn/stft.h"
#include "frcrn/tensor.h"

namespace frcrn {

inline constexpr double kLossEps = 1e-8;
inline constexpr double kSiSnrClipDb = 100.0;

// Scale-invariant SNR in dB: project the estimate onto the reference and
// compare energies; no mean removal. Clipped to +-clip_db.
double si_snr_db(std::span<const double> ref, std::span<const double> est,
                 double eps = kLossEps, double clip_db = kSiSnrClipDb);

// Differentiable SI-SNR; ref is a constant.
Tensor si_snr_db_op(const Tensor& ref, const Tensor& est,
                    double eps = kLossEps, double clip_db = kSiSnrClipDb);

// Complex ideal ratio mask M = Y / X (eps-regularized):
//   M_r = (Yr Xr + Yi Xi) / (|X|^2 + eps)
//   M_i = (Yi Xr - Yr Xi) / (|X|^2 + eps)
// clamp bounds both parts to [-1, 1].
ComplexSpectrogram cirm_target(const ComplexSpectrogram& X,
                               const ComplexSpectrogram& Y,
                               double eps = kLossEps, bool clamp = true);

// Sum over positions of squared real and imaginary errors; normalized
// divides by the element count for batch comparability.
Tensor mask_mse_op(const CTensor& target, const CTensor& estimate,
                   bool normalized = true);

// -SI-SNR(y, y_hat) + lambda * mask_mse(M, M_hat). Minimizing this maximizes
// SI-SNR while pulling the mask toward the cIRM target.
Tensor joint_loss_op(const Tensor& ref_audio, const Tensor& est_audio,
                     const CTensor& mask_target, const CTensor& mask_estimate,
                     double lambda = 1.0);

}  // namespace frcrn
