// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "frcrn/layers.h"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace frcrn {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

// Complex kernels: Rayleigh magnitude with sigma = 1/sqrt(fan_in), uniform
// phase, following the complex-network convention.
void rayleigh_complex_fill(std::vector<double>& wr, std::vector<double>& wi,
                           int64_t fan_in, std::mt19937_64& rng) {
  const double sigma = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> phase(-std::numbers::pi,
                                               std::numbers::pi);
  for (size_t i = 0; i < wr.size(); ++i) {
    double mag = sigma * std::sqrt(-2.0 * std::log(1.0 - u01(rng)));
    double th = phase(rng);
    wr[i] = mag * std::cos(th);
    wi[i] = mag * std::sin(th);
  }
}

Tensor affine_init(Shape shape, int64_t fan_in, std::mt19937_64& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::uniform(std::move(shape), rng, -bound, bound);
}

// col layout: row (c*kt + dt)*kf + df, one column per output bin.
// ti(t, dt) = t + dt - P with P = kt-1 when pad_time, else t + dt.
void build_col(const double* x, int C, int Tin, int F, int t_out, int kt,
               int kf, int sf, int Fo, bool pad_time, double* col) {
  const int P = pad_time ? kt - 1 : 0;
  for (int c = 0; c < C; ++c) {
    for (int dt = 0; dt < kt; ++dt) {
      const int ti = t_out + dt - P;
      double* dst = col + (static_cast<size_t>(c) * kt + dt) * kf * Fo;
      if (ti < 0 || ti >= Tin) {
        std::fill(dst, dst + static_cast<size_t>(kf) * Fo, 0.0);
        continue;
      }
      const double* src = x + (static_cast<size_t>(c) * Tin + ti) * F;
      for (int df = 0; df < kf; ++df) {
        double* d = dst + static_cast<size_t>(df) * Fo;
        const double* s = src + df;
        for (int fo = 0; fo < Fo; ++fo) d[fo] = s[static_cast<size_t>(fo) * sf];
      }
    }
  }
}

// Adjoint of build_col: scatter-add col-shaped grads back into the input.
void scatter_col(double* gx, int C, int Tin, int F, int t_out, int kt, int kf,
                 int sf, int Fo, bool pad_time, const double* col) {
  const int P = pad_time ? kt - 1 : 0;
  for (int c = 0; c < C; ++c) {
    for (int dt = 0; dt < kt; ++dt) {
      const int ti = t_out + dt - P;
      if (ti < 0 || ti >= Tin) continue;
      const double* src = col + (static_cast<size_t>(c) * kt + dt) * kf * Fo;
      double* dst = gx + (static_cast<size_t>(c) * Tin + ti) * F;
      for (int df = 0; df < kf; ++df) {
        const double* s = src + static_cast<size_t>(df) * Fo;
        double* d = dst + df;
        for (int fo = 0; fo < Fo; ++fo) d[static_cast<size_t>(fo) * sf] += s[fo];
      }
    }
  }
}

struct ConvDims {
  int C, Tin, F, O, kt, kf, sf, To, Fo;
  bool pad_time;
};

ConvDims conv_dims(const Shape& xs, const Shape& ws, int sf, bool pad_time) {
  if (xs.size() != 3) throw ShapeError("conv input must be [C,T,F]");
  if (ws.size() != 4) throw ShapeError("conv weight must be [O,C,kt,kf]");
  ConvDims d;
  d.C = static_cast<int>(xs[0]);
  d.Tin = static_cast<int>(xs[1]);
  d.F = static_cast<int>(xs[2]);
  d.O = static_cast<int>(ws[0]);
  d.kt = static_cast<int>(ws[2]);
  d.kf = static_cast<int>(ws[3]);
  d.sf = sf;
  d.pad_time = pad_time;
  if (ws[1] != xs[0])
    throw ShapeError("conv channels: input has " + std::to_string(d.C) +
                     ", weight expects " + std::to_string(ws[1]));
  if (d.F < d.kf)
    throw ShapeError("conv: " + std::to_string(d.F) +
                     " frequency bins < kernel " + std::to_string(d.kf));
  d.Fo = conv_out_bins(d.F, d.kf, d.sf);
  d.To = pad_time ? d.Tin : d.Tin - (d.kt - 1);
  if (d.To < 1) throw ShapeError("conv: not enough frames for the kernel");
  return d;
}

}  // namespace

int conv_out_bins(int in_bins, int kf, int stride_f) {
  return (in_bins - kf) / stride_f + 1;
}

// ---------------------------------------------------------------------------
// conv2d (real and complex)
// ---------------------------------------------------------------------------

Tensor conv2d_real_op(const Tensor& x, const Tensor& w, const Tensor& b,
                      int stride_f, bool pad_time) {
  ConvDims d = conv_dims(x.shape(), w.shape(), stride_f, pad_time);
  if (b.numel() != d.O) throw ShapeError("conv bias size mismatch");
  const int K = d.C * d.kt * d.kf;

  std::vector<double> out(static_cast<size_t>(d.O) * d.To * d.Fo);
  std::vector<double> col(static_cast<size_t>(K) * d.Fo);
  std::vector<double> tmp(static_cast<size_t>(d.O) * d.Fo);
  CMap W(w.data().data(), d.O, K);
  for (int t = 0; t < d.To; ++t) {
    build_col(x.data().data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf, d.Fo,
              d.pad_time, col.data());
    MMap(tmp.data(), d.O, d.Fo).noalias() = W * CMap(col.data(), K, d.Fo);
    for (int o = 0; o < d.O; ++o) {
      const double bo = b.data()[o];
      double* dst = out.data() + (static_cast<size_t>(o) * d.To + t) * d.Fo;
      const double* src = tmp.data() + static_cast<size_t>(o) * d.Fo;
      for (int f = 0; f < d.Fo; ++f) dst[f] = src[f] + bo;
    }
  }

  return detail::make_op(
      {d.O, d.To, d.Fo}, std::move(out), {x, w, b},
      [d, K](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* px = self.parents[0].get();
        detail::Node* pw = self.parents[1].get();
        detail::Node* pb = self.parents[2].get();
        auto gx = ctx.grad(px);
        auto gw = ctx.grad(pw);
        auto gb = ctx.grad(pb);
        const auto& g = self.grad;
        std::vector<double> col(static_cast<size_t>(K) * d.Fo);
        std::vector<double> gtmp(static_cast<size_t>(d.O) * d.Fo);
        std::vector<double> gcol(static_cast<size_t>(K) * d.Fo);
        CMap W(pw->data.data(), d.O, K);
        for (int t = 0; t < d.To; ++t) {
          for (int o = 0; o < d.O; ++o)
            std::copy_n(g.data() + (static_cast<size_t>(o) * d.To + t) * d.Fo,
                        d.Fo, gtmp.data() + static_cast<size_t>(o) * d.Fo);
          CMap G(gtmp.data(), d.O, d.Fo);
          if (!gw.empty() || !gx.empty())
            build_col(px->data.data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf,
                      d.Fo, d.pad_time, col.data());
          if (!gw.empty())
            MMap(gw.data(), d.O, K).noalias() +=
                G * CMap(col.data(), K, d.Fo).transpose();
          if (!gx.empty()) {
            MMap(gcol.data(), K, d.Fo).noalias() = W.transpose() * G;
            scatter_col(gx.data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf, d.Fo,
                        d.pad_time, gcol.data());
          }
          if (!gb.empty())
            for (int o = 0; o < d.O; ++o)
              gb[o] += G.row(o).sum();
        }
      });
}

CTensor complex_conv2d_op(const CTensor& x, const Tensor& wr, const Tensor& wi,
                          const Tensor& br, const Tensor& bi, int stride_f,
                          bool pad_time) {
  if (wr.shape() != wi.shape())
    throw ShapeError("complex conv kernel planes differ");
  ConvDims d = conv_dims(x.shape(), wr.shape(), stride_f, pad_time);
  if (br.numel() != d.O || bi.numel() != d.O)
    throw ShapeError("complex conv bias size mismatch");
  const int K = d.C * d.kt * d.kf;
  const size_t plane = static_cast<size_t>(d.O) * d.To * d.Fo;

  std::vector<double> our(plane), oui(plane);
  std::vector<double> cr(static_cast<size_t>(K) * d.Fo),
      ci(static_cast<size_t>(K) * d.Fo);
  std::vector<double> tr(static_cast<size_t>(d.O) * d.Fo),
      ti(static_cast<size_t>(d.O) * d.Fo);
  CMap Wr(wr.data().data(), d.O, K);
  CMap Wi(wi.data().data(), d.O, K);
  for (int t = 0; t < d.To; ++t) {
    build_col(x.re.data().data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf, d.Fo,
              d.pad_time, cr.data());
    build_col(x.im.data().data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf, d.Fo,
              d.pad_time, ci.data());
    CMap Cr(cr.data(), K, d.Fo), Ci(ci.data(), K, d.Fo);
    MMap Tr(tr.data(), d.O, d.Fo), Ti(ti.data(), d.O, d.Fo);
    Tr.noalias() = Wr * Cr;
    Tr.noalias() -= Wi * Ci;
    Ti.noalias() = Wr * Ci;
    Ti.noalias() += Wi * Cr;
    for (int o = 0; o < d.O; ++o) {
      const double bro = br.data()[o], bio = bi.data()[o];
      const size_t base = (static_cast<size_t>(o) * d.To + t) * d.Fo;
      for (int f = 0; f < d.Fo; ++f) {
        our[base + f] = tr[static_cast<size_t>(o) * d.Fo + f] + bro;
        oui[base + f] = ti[static_cast<size_t>(o) * d.Fo + f] + bio;
      }
    }
  }

  // One shared backward: the imaginary output node does the work and the
  // real output node forwards its grad through a joint closure would need
  // cross-references; instead keep two nodes but give each the full rule for
  // its own plane (each plane's grad contributes independently).
  auto backward_plane = [d, K](bool imag_plane) {
    return [d, K, imag_plane](detail::Node& self, detail::BackwardCtx& ctx) {
      detail::Node* pxr = self.parents[0].get();
      detail::Node* pxi = self.parents[1].get();
      detail::Node* pwr = self.parents[2].get();
      detail::Node* pwi = self.parents[3].get();
      detail::Node* pbias = self.parents[4].get();
      auto gxr = ctx.grad(pxr);
      auto gxi = ctx.grad(pxi);
      auto gwr = ctx.grad(pwr);
      auto gwi = ctx.grad(pwi);
      auto gbias = ctx.grad(pbias);
      const auto& g = self.grad;
      std::vector<double> cr(static_cast<size_t>(K) * d.Fo),
          ci(static_cast<size_t>(K) * d.Fo);
      std::vector<double> gtmp(static_cast<size_t>(d.O) * d.Fo);
      std::vector<double> gcol(static_cast<size_t>(K) * d.Fo);
      CMap Wr(pwr->data.data(), d.O, K);
      CMap Wi(pwi->data.data(), d.O, K);
      for (int t = 0; t < d.To; ++t) {
        for (int o = 0; o < d.O; ++o)
          std::copy_n(g.data() + (static_cast<size_t>(o) * d.To + t) * d.Fo,
                      d.Fo, gtmp.data() + static_cast<size_t>(o) * d.Fo);
        CMap G(gtmp.data(), d.O, d.Fo);
        build_col(pxr->data.data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf, d.Fo,
                  d.pad_time, cr.data());
        build_col(pxi->data.data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf, d.Fo,
                  d.pad_time, ci.data());
        CMap Cr(cr.data(), K, d.Fo), Ci(ci.data(), K, d.Fo);
        if (!imag_plane) {
          // Ur = Wr*Cr - Wi*Ci + br
          if (!gwr.empty())
            MMap(gwr.data(), d.O, K).noalias() += G * Cr.transpose();
          if (!gwi.empty())
            MMap(gwi.data(), d.O, K).noalias() -= G * Ci.transpose();
          if (!gxr.empty()) {
            MMap(gcol.data(), K, d.Fo).noalias() = Wr.transpose() * G;
            scatter_col(gxr.data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf, d.Fo,
                        d.pad_time, gcol.data());
          }
          if (!gxi.empty()) {
            MMap(gcol.data(), K, d.Fo).noalias() = -(Wi.transpose() * G);
            scatter_col(gxi.data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf, d.Fo,
                        d.pad_time, gcol.data());
          }
        } else {
          // Ui = Wr*Ci + Wi*Cr + bi
          if (!gwr.empty())
            MMap(gwr.data(), d.O, K).noalias() += G * Ci.transpose();
          if (!gwi.empty())
            MMap(gwi.data(), d.O, K).noalias() += G * Cr.transpose();
          if (!gxi.empty()) {
            MMap(gcol.data(), K, d.Fo).noalias() = Wr.transpose() * G;
            scatter_col(gxi.data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf, d.Fo,
                        d.pad_time, gcol.data());
          }
          if (!gxr.empty()) {
            MMap(gcol.data(), K, d.Fo).noalias() = Wi.transpose() * G;
            scatter_col(gxr.data(), d.C, d.Tin, d.F, t, d.kt, d.kf, d.sf, d.Fo,
                        d.pad_time, gcol.data());
          }
        }
        if (!gbias.empty())
          for (int o = 0; o < d.O; ++o) gbias[o] += G.row(o).sum();
      }
    };
  };

  Shape oshape{d.O, d.To, d.Fo};
  Tensor out_r = detail::make_op(oshape, std::move(our),
                                 {x.re, x.im, wr, wi, br},
                                 backward_plane(false));
  Tensor out_i = detail::make_op(oshape, std::move(oui),
                                 {x.re, x.im, wr, wi, bi},
                                 backward_plane(true));
  return CTensor(std::move(out_r), std::move(out_i));
}

// ---------------------------------------------------------------------------
// complex frequency-transposed conv
// ---------------------------------------------------------------------------

namespace {

struct DeconvDims {
  int C, Tin, F, O, kt, kf, sf, To, Fraw, Ftgt;
  bool pad_time;
};

DeconvDims deconv_dims(const Shape& xs, const Shape& ws, int sf, int target_f,
                       bool pad_time) {
  if (xs.size() != 3) throw ShapeError("deconv input must be [C,T,F]");
  if (ws.size() != 4) throw ShapeError("deconv weight must be [O,C,kt,kf]");
  DeconvDims d;
  d.C = static_cast<int>(xs[0]);
  d.Tin = static_cast<int>(xs[1]);
  d.F = static_cast<int>(xs[2]);
  d.O = static_cast<int>(ws[0]);
  d.kt = static_cast<int>(ws[2]);
  d.kf = static_cast<int>(ws[3]);
  d.sf = sf;
  d.pad_time = pad_time;
  d.Ftgt = target_f;
  if (ws[1] != xs[0]) throw ShapeError("deconv channel mismatch");
  d.Fraw = (d.F - 1) * sf + d.kf;
  if (std::abs(d.Fraw - target_f) > d.kf)
    throw ShapeError("deconv raw width " + std::to_string(d.Fraw) +
                     " too far from target " + std::to_string(target_f));
  d.To = pad_time ? d.Tin : d.Tin - (d.kt - 1);
  if (d.To < 1) throw ShapeError("deconv: not enough frames for the kernel");
  return d;
}

// Gathered [O, C] kernel slices per (dt, df).
std::vector<std::vector<double>> gather_kernel(const double* w,
                                               const DeconvDims& d) {
  std::vector<std::vector<double>> sub(static_cast<size_t>(d.kt) * d.kf);
  for (int dt = 0; dt < d.kt; ++dt)
    for (int df = 0; df < d.kf; ++df) {
      auto& m = sub[static_cast<size_t>(dt) * d.kf + df];
      m.resize(static_cast<size_t>(d.O) * d.C);
      for (int o = 0; o < d.O; ++o)
        for (int c = 0; c < d.C; ++c)
          m[static_cast<size_t>(o) * d.C + c] =
              w[((static_cast<size_t>(o) * d.C + c) * d.kt + dt) * d.kf + df];
    }
  return sub;
}

}  // namespace

CTensor complex_deconv_freq_op(const CTensor& x, const Tensor& wr,
                               const Tensor& wi, const Tensor& br,
                               const Tensor& bi, int stride_f, int target_f,
                               bool pad_time) {
  DeconvDims d = deconv_dims(x.shape(), wr.shape(), stride_f, target_f,
                             pad_time);
  if (br.numel() != d.O || bi.numel() != d.O)
    throw ShapeError("deconv bias size mismatch");
  const size_t plane = static_cast<size_t>(d.O) * d.To * d.Ftgt;

  auto subs_r = gather_kernel(wr.data().data(), d);
  auto subs_i = gather_kernel(wi.data().data(), d);

  using StrideT = Eigen::Stride<Eigen::Dynamic, 1>;
  using SMap = Eigen::Map<const RowMat, 0, StrideT>;

  std::vector<double> our(plane), oui(plane);
  std::vector<double> rawr(static_cast<size_t>(d.O) * d.Fraw),
      rawi(static_cast<size_t>(d.O) * d.Fraw);
  std::vector<double> mr(static_cast<size_t>(d.O) * d.F),
      mi(static_cast<size_t>(d.O) * d.F);
  const int P = pad_time ? d.kt - 1 : 0;
  const int64_t xstride = static_cast<int64_t>(d.Tin) * d.F;

  for (int t = 0; t < d.To; ++t) {
    std::fill(rawr.begin(), rawr.end(), 0.0);
    std::fill(rawi.begin(), rawi.end(), 0.0);
    for (int dt = 0; dt < d.kt; ++dt) {
      const int ti = t + dt - P;
      if (ti < 0 || ti >= d.Tin) continue;
      SMap Xr(x.re.data().data() + static_cast<size_t>(ti) * d.F, d.C, d.F,
              StrideT(xstride, 1));
      SMap Xi(x.im.data().data() + static_cast<size_t>(ti) * d.F, d.C, d.F,
              StrideT(xstride, 1));
      for (int df = 0; df < d.kf; ++df) {
        CMap Wr(subs_r[static_cast<size_t>(dt) * d.kf + df].data(), d.O, d.C);
        CMap Wi(subs_i[static_cast<size_t>(dt) * d.kf + df].data(), d.O, d.C);
        MMap Mr(mr.data(), d.O, d.F), Mi(mi.data(), d.O, d.F);
        Mr.noalias() = Wr * Xr;
        Mr.noalias() -= Wi * Xi;
        Mi.noalias() = Wr * Xi;
        Mi.noalias() += Wi * Xr;
        for (int o = 0; o < d.O; ++o) {
          double* rr = rawr.data() + static_cast<size_t>(o) * d.Fraw + df;
          double* ri = rawi.data() + static_cast<size_t>(o) * d.Fraw + df;
          const double* sr = mr.data() + static_cast<size_t>(o) * d.F;
          const double* si = mi.data() + static_cast<size_t>(o) * d.F;
          for (int g = 0; g < d.F; ++g) {
            rr[static_cast<size_t>(g) * d.sf] += sr[g];
            ri[static_cast<size_t>(g) * d.sf] += si[g];
          }
        }
      }
    }
    const int keep = std::min(d.Fraw, d.Ftgt);
    for (int o = 0; o < d.O; ++o) {
      const double bro = br.data()[o], bio = bi.data()[o];
      double* dr = our.data() + (static_cast<size_t>(o) * d.To + t) * d.Ftgt;
      double* di = oui.data() + (static_cast<size_t>(o) * d.To + t) * d.Ftgt;
      for (int f = 0; f < keep; ++f) {
        dr[f] = rawr[static_cast<size_t>(o) * d.Fraw + f] + bro;
        di[f] = rawi[static_cast<size_t>(o) * d.Fraw + f] + bio;
      }
      for (int f = keep; f < d.Ftgt; ++f) {
        dr[f] = bro;  // zero-padded top edge still carries the bias
        di[f] = bio;
      }
    }
  }

  auto backward_plane = [d](bool imag_plane) {
    return [d, imag_plane](detail::Node& self, detail::BackwardCtx& ctx) {
      detail::Node* pxr = self.parents[0].get();
      detail::Node* pxi = self.parents[1].get();
      detail::Node* pwr = self.parents[2].get();
      detail::Node* pwi = self.parents[3].get();
      detail::Node* pbias = self.parents[4].get();
      auto gxr = ctx.grad(pxr);
      auto gxi = ctx.grad(pxi);
      auto gwr = ctx.grad(pwr);
      auto gwi = ctx.grad(pwi);
      auto gbias = ctx.grad(pbias);
      const auto& g = self.grad;
      auto subs_r = gather_kernel(pwr->data.data(), d);
      auto subs_i = gather_kernel(pwi->data.data(), d);
      std::vector<std::vector<double>> gsub_r, gsub_i;
      if (!gwr.empty() || !gwi.empty()) {
        gsub_r.assign(static_cast<size_t>(d.kt) * d.kf,
                      std::vector<double>(static_cast<size_t>(d.O) * d.C, 0.0));
        gsub_i = gsub_r;
      }
      using StrideT = Eigen::Stride<Eigen::Dynamic, 1>;
      using SMap = Eigen::Map<const RowMat, 0, StrideT>;
      using SMapMut = Eigen::Map<RowMat, 0, StrideT>;
      const int P = d.pad_time ? d.kt - 1 : 0;
      const int64_t xstride = static_cast<int64_t>(d.Tin) * d.F;
      const int keep = std::min(d.Fraw, d.Ftgt);
      std::vector<double> gr(static_cast<size_t>(d.O) * d.F),
          gtmp(static_cast<size_t>(d.O) * d.F);
      for (int t = 0; t < d.To; ++t) {
        for (int dt = 0; dt < d.kt; ++dt) {
          const int ti = t + dt - P;
          if (ti < 0 || ti >= d.Tin) continue;
          for (int df = 0; df < d.kf; ++df) {
            // gather grad columns g*sf + df that survived the crop
            for (int o = 0; o < d.O; ++o) {
              const double* src =
                  g.data() + (static_cast<size_t>(o) * d.To + t) * d.Ftgt;
              double* dst = gr.data() + static_cast<size_t>(o) * d.F;
              for (int gg = 0; gg < d.F; ++gg) {
                int col = gg * d.sf + df;
                dst[gg] = col < keep ? src[col] : 0.0;
              }
            }
            CMap G(gr.data(), d.O, d.F);
            SMap Xr(pxr->data.data() + static_cast<size_t>(ti) * d.F, d.C, d.F,
                    StrideT(xstride, 1));
            SMap Xi(pxi->data.data() + static_cast<size_t>(ti) * d.F, d.C, d.F,
                    StrideT(xstride, 1));
            const size_t si = static_cast<size_t>(dt) * d.kf + df;
            CMap Wr(subs_r[si].data(), d.O, d.C);
            CMap Wi(subs_i[si].data(), d.O, d.C);
            if (!imag_plane) {
              // raw_r += Wr*Xr - Wi*Xi
              if (!gwr.empty())
                MMap(gsub_r[si].data(), d.O, d.C).noalias() +=
                    G * Xr.transpose();
              if (!gwi.empty())
                MMap(gsub_i[si].data(), d.O, d.C).noalias() -=
                    G * Xi.transpose();
              if (!gxr.empty())
                SMapMut(gxr.data() + static_cast<size_t>(ti) * d.F, d.C, d.F,
                        StrideT(xstride, 1))
                    .noalias() += Wr.transpose() * G;
              if (!gxi.empty())
                SMapMut(gxi.data() + static_cast<size_t>(ti) * d.F, d.C, d.F,
                        StrideT(xstride, 1))
                    .noalias() -= Wi.transpose() * G;
            } else {
              // raw_i += Wr*Xi + Wi*Xr
              if (!gwr.empty())
                MMap(gsub_r[si].data(), d.O, d.C).noalias() +=
                    G * Xi.transpose();
              if (!gwi.empty())
                MMap(gsub_i[si].data(), d.O, d.C).noalias() +=
                    G * Xr.transpose();
              if (!gxi.empty())
                SMapMut(gxi.data() + static_cast<size_t>(ti) * d.F, d.C, d.F,
                        StrideT(xstride, 1))
                    .noalias() += Wr.transpose() * G;
              if (!gxr.empty())
                SMapMut(gxr.data() + static_cast<size_t>(ti) * d.F, d.C, d.F,
                        StrideT(xstride, 1))
                    .noalias() += Wi.transpose() * G;
            }
          }
        }
        if (!gbias.empty())
          for (int o = 0; o < d.O; ++o) {
            const double* src =
                g.data() + (static_cast<size_t>(o) * d.To + t) * d.Ftgt;
            double s = 0.0;
            for (int f = 0; f < d.Ftgt; ++f) s += src[f];
            gbias[o] += s;
          }
      }
      // scatter kernel-slice grads back into [O,C,kt,kf]
      auto scatter_w = [&](std::span<double> gw,
                           const std::vector<std::vector<double>>& gs) {
        if (gw.empty()) return;
        for (int dt = 0; dt < d.kt; ++dt)
          for (int df = 0; df < d.kf; ++df) {
            const auto& m = gs[static_cast<size_t>(dt) * d.kf + df];
            for (int o = 0; o < d.O; ++o)
              for (int c = 0; c < d.C; ++c)
                gw[((static_cast<size_t>(o) * d.C + c) * d.kt + dt) * d.kf +
                   df] += m[static_cast<size_t>(o) * d.C + c];
          }
      };
      scatter_w(gwr, gsub_r);
      scatter_w(gwi, gsub_i);
    };
  };

  Shape oshape{d.O, d.To, d.Ftgt};
  Tensor out_r = detail::make_op(oshape, std::move(our),
                                 {x.re, x.im, wr, wi, br},
                                 backward_plane(false));
  Tensor out_i = detail::make_op(oshape, std::move(oui),
                                 {x.re, x.im, wr, wi, bi},
                                 backward_plane(true));
  return CTensor(std::move(out_r), std::move(out_i));
}

// ---------------------------------------------------------------------------
// FSMN memory op
// ---------------------------------------------------------------------------

Tensor fsmn_memory_op(const Tensor& p, const Tensor& taps_back,
                      const Tensor& taps_ahead, int left_context) {
  if (p.ndim() != 3) throw ShapeError("fsmn memory expects [B,L,D]");
  const int64_t B = p.dim(0), L = p.dim(1), D = p.dim(2);
  if (taps_back.ndim() != 2 || taps_back.dim(1) != D)
    throw ShapeError("look-back taps must be [NL+1,D] with matching D");
  if (taps_ahead.ndim() != 2 ||
      (taps_ahead.dim(0) > 0 && taps_ahead.dim(1) != D))
    throw ShapeError("lookahead taps must be [NR,D] with matching D");
  const int64_t nb = taps_back.dim(0);  // NL + 1
  const int64_t na = taps_ahead.dim(0);
  const int64_t Lo = L - left_context;
  if (Lo < 1) throw ShapeError("fsmn memory: left context exceeds sequence");

  std::vector<double> out(static_cast<size_t>(B) * Lo * D);
  const double* pd = p.data().data();
  const double* ab = taps_back.data().data();
  const double* ca = taps_ahead.data().data();
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t i = 0; i < Lo; ++i) {
      const int64_t ip = i + left_context;
      double* o = out.data() + (static_cast<size_t>(b) * Lo + i) * D;
      const double* pc = pd + (static_cast<size_t>(b) * L + ip) * D;
      for (int64_t x = 0; x < D; ++x) o[x] = pc[x];
      for (int64_t tau = 0; tau < nb; ++tau) {
        const int64_t j = ip - tau;
        if (j < 0) break;
        const double* ps = pd + (static_cast<size_t>(b) * L + j) * D;
        const double* a = ab + static_cast<size_t>(tau) * D;
        for (int64_t x = 0; x < D; ++x) o[x] += a[x] * ps[x];
      }
      for (int64_t k = 1; k <= na; ++k) {
        const int64_t j = ip + k;
        if (j >= L) break;
        const double* ps = pd + (static_cast<size_t>(b) * L + j) * D;
        const double* c = ca + static_cast<size_t>(k - 1) * D;
        for (int64_t x = 0; x < D; ++x) o[x] += c[x] * ps[x];
      }
    }
  }

  return detail::make_op(
      {B, Lo, D}, std::move(out), {p, taps_back, taps_ahead},
      [B, L, D, nb, na, Lo, left_context](detail::Node& self,
                                          detail::BackwardCtx& ctx) {
        detail::Node* pp = self.parents[0].get();
        detail::Node* pa = self.parents[1].get();
        detail::Node* pc = self.parents[2].get();
        auto gp = ctx.grad(pp);
        auto ga = ctx.grad(pa);
        auto gc = ctx.grad(pc);
        const auto& g = self.grad;
        const double* pd = pp->data.data();
        const double* ab = pa->data.data();
        const double* ca = pc->data.data();
        for (int64_t b = 0; b < B; ++b) {
          for (int64_t i = 0; i < Lo; ++i) {
            const int64_t ip = i + left_context;
            const double* go = g.data() + (static_cast<size_t>(b) * Lo + i) * D;
            if (!gp.empty()) {
              double* gcur = gp.data() + (static_cast<size_t>(b) * L + ip) * D;
              for (int64_t x = 0; x < D; ++x) gcur[x] += go[x];
            }
            for (int64_t tau = 0; tau < nb; ++tau) {
              const int64_t j = ip - tau;
              if (j < 0) break;
              const double* a = ab + static_cast<size_t>(tau) * D;
              const double* ps = pd + (static_cast<size_t>(b) * L + j) * D;
              if (!gp.empty()) {
                double* gj = gp.data() + (static_cast<size_t>(b) * L + j) * D;
                for (int64_t x = 0; x < D; ++x) gj[x] += a[x] * go[x];
              }
              if (!ga.empty()) {
                double* gax = ga.data() + static_cast<size_t>(tau) * D;
                for (int64_t x = 0; x < D; ++x) gax[x] += ps[x] * go[x];
              }
            }
            for (int64_t k = 1; k <= na; ++k) {
              const int64_t j = ip + k;
              if (j >= L) break;
              const double* c = ca + static_cast<size_t>(k - 1) * D;
              const double* ps = pd + (static_cast<size_t>(b) * L + j) * D;
              if (!gp.empty()) {
                double* gj = gp.data() + (static_cast<size_t>(b) * L + j) * D;
                for (int64_t x = 0; x < D; ++x) gj[x] += c[x] * go[x];
              }
              if (!gc.empty()) {
                double* gcx = gc.data() + static_cast<size_t>(k - 1) * D;
                for (int64_t x = 0; x < D; ++x) gcx[x] += ps[x] * go[x];
              }
            }
          }
        }
      });
}

CTensor split_leaky_relu(const CTensor& x, double slope) {
  return CTensor(leaky_relu(x.re, slope), leaky_relu(x.im, slope));
}

// ---------------------------------------------------------------------------
// ComplexConv2d / ComplexDeconvFreq layers
// ---------------------------------------------------------------------------

ComplexConv2d::ComplexConv2d(ParameterStore& store, const std::string& prefix,
                             int in_ch_, int out_ch_, int kt_, int kf_,
                             int stride_f_, std::mt19937_64& rng,
                             bool with_bias)
    : in_ch(in_ch_), out_ch(out_ch_), kt(kt_), kf(kf_), stride_f(stride_f_) {
  const int64_t n = static_cast<int64_t>(out_ch) * in_ch * kt * kf;
  std::vector<double> vr(n), vi(n);
  rayleigh_complex_fill(vr, vi, static_cast<int64_t>(in_ch) * kt * kf, rng);
  Shape ws{out_ch, in_ch, kt, kf};
  wr = store.obtain(prefix + ".wr", Tensor::from_data(ws, std::move(vr)));
  wi = store.obtain(prefix + ".wi", Tensor::from_data(ws, std::move(vi)));
  if (with_bias) {
    br = store.obtain(prefix + ".br", Tensor::zeros({out_ch}));
    bi = store.obtain(prefix + ".bi", Tensor::zeros({out_ch}));
  } else {
    br = Tensor::zeros({out_ch});
    bi = Tensor::zeros({out_ch});
  }
}

CTensor ComplexConv2d::forward(const CTensor& x, ConvTimeCtx* ctx) const {
  if (ctx == nullptr)
    return complex_conv2d_op(x, wr, wi, br, bi, stride_f, true);
  CTensor xin = cconcat({ctx->frames, x}, 1);
  CTensor y = complex_conv2d_op(xin, wr, wi, br, bi, stride_f, false);
  const int64_t keep = kt - 1;
  ctx->frames = cslice(xin, 1, xin.dim(1) - keep, keep);
  return y;
}

ConvTimeCtx ComplexConv2d::make_ctx(int freq_bins) const {
  return ConvTimeCtx{CTensor::zeros({in_ch, kt - 1, freq_bins})};
}

int ComplexConv2d::out_bins(int in_bins) const {
  return conv_out_bins(in_bins, kf, stride_f);
}

ComplexDeconvFreq::ComplexDeconvFreq(ParameterStore& store,
                                     const std::string& prefix, int in_ch_,
                                     int out_ch_, int kt_, int kf_,
                                     int stride_f_, std::mt19937_64& rng)
    : in_ch(in_ch_), out_ch(out_ch_), kt(kt_), kf(kf_), stride_f(stride_f_) {
  const int64_t n = static_cast<int64_t>(out_ch) * in_ch * kt * kf;
  std::vector<double> vr(n), vi(n);
  rayleigh_complex_fill(vr, vi, static_cast<int64_t>(in_ch) * kt * kf, rng);
  Shape ws{out_ch, in_ch, kt, kf};
  wr = store.obtain(prefix + ".wr", Tensor::from_data(ws, std::move(vr)));
  wi = store.obtain(prefix + ".wi", Tensor::from_data(ws, std::move(vi)));
  br = store.obtain(prefix + ".br", Tensor::zeros({out_ch}));
  bi = store.obtain(prefix + ".bi", Tensor::zeros({out_ch}));
}

CTensor ComplexDeconvFreq::forward(const CTensor& x, int target_f,
                                   ConvTimeCtx* ctx) const {
  if (ctx == nullptr)
    return complex_deconv_freq_op(x, wr, wi, br, bi, stride_f, target_f, true);
  CTensor xin = cconcat({ctx->frames, x}, 1);
  CTensor y =
      complex_deconv_freq_op(xin, wr, wi, br, bi, stride_f, target_f, false);
  const int64_t keep = kt - 1;
  ctx->frames = cslice(xin, 1, xin.dim(1) - keep, keep);
  return y;
}

ConvTimeCtx ComplexDeconvFreq::make_ctx(int freq_bins) const {
  return ConvTimeCtx{CTensor::zeros({in_ch, kt - 1, freq_bins})};
}

// ---------------------------------------------------------------------------
// ComplexBatchNorm
// ---------------------------------------------------------------------------

ComplexBatchNorm::ComplexBatchNorm(ParameterStore& store,
                                   const std::string& prefix, int channels_)
    : channels(channels_) {
  const double s = 1.0 / std::sqrt(2.0);
  gamma_rr = store.obtain(prefix + ".gamma_rr", Tensor::full({channels}, s));
  gamma_ri = store.obtain(prefix + ".gamma_ri", Tensor::zeros({channels}));
  gamma_ir = store.obtain(prefix + ".gamma_ir", Tensor::zeros({channels}));
  gamma_ii = store.obtain(prefix + ".gamma_ii", Tensor::full({channels}, s));
  beta_r = store.obtain(prefix + ".beta_r", Tensor::zeros({channels}));
  beta_i = store.obtain(prefix + ".beta_i", Tensor::zeros({channels}));
  run_mean_r =
      store.obtain(prefix + ".run_mean_r", Tensor::zeros({channels}), false);
  run_mean_i =
      store.obtain(prefix + ".run_mean_i", Tensor::zeros({channels}), false);
  run_cov_rr = store.obtain(prefix + ".run_cov_rr",
                            Tensor::full({channels}, 0.5), false);
  run_cov_ri =
      store.obtain(prefix + ".run_cov_ri", Tensor::zeros({channels}), false);
  run_cov_ii = store.obtain(prefix + ".run_cov_ii",
                            Tensor::full({channels}, 0.5), false);
}

CTensor ComplexBatchNorm::forward(const CTensor& x, bool training,
                                  BnBatchStats* stats) const {
  if (x.re.ndim() != 3 || x.dim(0) != channels)
    throw ShapeError("batchnorm expects [C,T,F] with C=" +
                     std::to_string(channels));
  auto reshape_c = [&](const Tensor& t) { return reshape(t, {channels, 1, 1}); };

  Tensor xr = x.re, xi = x.im;
  Tensor cr, ci;       // centered planes
  Tensor wrr, wri, wii;  // inverse-sqrt whitening entries per channel

  if (training) {
    Tensor mu_r = mean(xr, {1, 2}, true);
    Tensor mu_i = mean(xi, {1, 2}, true);
    cr = sub(xr, mu_r);
    ci = sub(xi, mu_i);
    Tensor vrr = add_scalar(mean(mul(cr, cr), {1, 2}, true), eps);
    Tensor vii = add_scalar(mean(mul(ci, ci), {1, 2}, true), eps);
    Tensor vri = mean(mul(cr, ci), {1, 2}, true);
    for (const Tensor* t : {&mu_r, &mu_i, &vrr, &vii, &vri})
      for (double v : t->data())
        if (!std::isfinite(v))
          throw NumericError("batchnorm statistics are not finite");
    if (stats != nullptr) {
      auto grab = [&](const Tensor& t, std::vector<double>& dst,
                      double unbias = 0.0) {
        dst.assign(t.data().begin(), t.data().end());
        for (auto& v : dst) v -= unbias;
      };
      grab(mu_r, stats->mean_r);
      grab(mu_i, stats->mean_i);
      grab(vrr, stats->cov_rr, eps);
      grab(vri, stats->cov_ri);
      grab(vii, stats->cov_ii, eps);
    }
    // closed-form inverse square root of the per-channel 2x2 covariance
    Tensor s = sqrt_op(sub(mul(vrr, vii), mul(vri, vri)));
    Tensor tr = sqrt_op(add(add(vrr, vii), mul_scalar(s, 2.0)));
    Tensor denom = mul(s, tr);
    wrr = div(add(vii, s), denom);
    wii = div(add(vrr, s), denom);
    wri = neg(div(vri, denom));
  } else {
    // running statistics are constants here; whiten with plain arithmetic
    std::vector<double> wrr_v(channels), wri_v(channels), wii_v(channels);
    for (int c = 0; c < channels; ++c) {
      double a = run_cov_rr.data()[c] + eps;
      double bb = run_cov_ri.data()[c];
      double cc = run_cov_ii.data()[c] + eps;
      double s = std::sqrt(a * cc - bb * bb);
      double tr = std::sqrt(a + cc + 2.0 * s);
      double denom = s * tr;
      wrr_v[c] = (cc + s) / denom;
      wii_v[c] = (a + s) / denom;
      wri_v[c] = -bb / denom;
    }
    cr = sub(xr, reshape_c(run_mean_r));
    ci = sub(xi, reshape_c(run_mean_i));
    wrr = reshape_c(Tensor::from_data({channels}, std::move(wrr_v)));
    wri = reshape_c(Tensor::from_data({channels}, std::move(wri_v)));
    wii = reshape_c(Tensor::from_data({channels}, std::move(wii_v)));
  }

  Tensor yr = add(mul(wrr, cr), mul(wri, ci));
  Tensor yi = add(mul(wri, cr), mul(wii, ci));
  Tensor out_r = add(add(mul(reshape_c(gamma_rr), yr),
                         mul(reshape_c(gamma_ri), yi)),
                     reshape_c(beta_r));
  Tensor out_i = add(add(mul(reshape_c(gamma_ir), yr),
                         mul(reshape_c(gamma_ii), yi)),
                     reshape_c(beta_i));
  return CTensor(std::move(out_r), std::move(out_i));
}

void ComplexBatchNorm::apply_batch_stats(const BnBatchStats& stats) {
  auto fold = [&](Tensor& run, const std::vector<double>& batch) {
    auto d = run.mutable_data();
    for (int c = 0; c < channels; ++c)
      d[c] = (1.0 - momentum) * d[c] + momentum * batch[c];
  };
  fold(run_mean_r, stats.mean_r);
  fold(run_mean_i, stats.mean_i);
  fold(run_cov_rr, stats.cov_rr);
  fold(run_cov_ri, stats.cov_ri);
  fold(run_cov_ii, stats.cov_ii);
}

// ---------------------------------------------------------------------------
// FSMN
// ---------------------------------------------------------------------------

FsmnCell::FsmnCell(ParameterStore& store, const std::string& prefix, int dim_,
                   int hidden_, int n_back_, int n_ahead_,
                   std::mt19937_64& rng)
    : dim(dim_), hidden(hidden_), n_back(n_back_), n_ahead(n_ahead_) {
  w1 = store.obtain(prefix + ".w1", affine_init({dim, hidden}, dim, rng));
  b1 = store.obtain(prefix + ".b1", Tensor::zeros({hidden}));
  w2 = store.obtain(prefix + ".w2", affine_init({hidden, dim}, hidden, rng));
  b2 = store.obtain(prefix + ".b2", Tensor::zeros({dim}));
  taps_back =
      store.obtain(prefix + ".taps_back", Tensor::zeros({n_back + 1, dim}));
  taps_ahead =
      store.obtain(prefix + ".taps_ahead", Tensor::zeros({n_ahead, dim}));
}

Tensor FsmnCell::forward(const Tensor& s, FsmnTimeCtx* ctx) const {
  if (s.ndim() != 3 || s.dim(2) != dim)
    throw ShapeError("fsmn expects [B,L,D] with D=" + std::to_string(dim) +
                     ", got " + shape_str(s.shape()));
  const int64_t B = s.dim(0), L = s.dim(1);
  Tensor flat = reshape(s, {B * L, dim});
  Tensor h = add(matmul(flat, w1), b1);
  h = linear_activation ? h : relu(h);
  Tensor p = reshape(add(matmul(h, w2), b2), {B, L, dim});

  Tensor mem;
  if (ctx == nullptr) {
    mem = fsmn_memory_op(p, taps_back, taps_ahead, 0);
  } else {
    if (n_ahead != 0)
      throw ConfigError("streaming fsmn requires a zero lookahead order");
    Tensor p_ext = concat({ctx->p_hist, p}, 1);
    mem = fsmn_memory_op(p_ext, taps_back, taps_ahead, n_back);
    ctx->p_hist = slice(p_ext, 1, p_ext.dim(1) - n_back, n_back);
  }
  return add(s, mem);
}

FsmnTimeCtx FsmnCell::make_ctx(int64_t batch) const {
  return FsmnTimeCtx{Tensor::zeros({batch, n_back, dim})};
}

Cfsmn::Cfsmn(ParameterStore& store, const std::string& prefix, int dim,
             int hidden, int n_back, int n_ahead, std::mt19937_64& rng)
    : real_cell(store, prefix + ".re", dim, hidden, n_back, n_ahead, rng),
      imag_cell(store, prefix + ".im", dim, hidden, n_back, n_ahead, rng) {}

CTensor Cfsmn::forward(const CTensor& s, CfsmnTimeCtx* ctx) const {
  FsmnTimeCtx* rr = ctx ? &ctx->rr : nullptr;
  FsmnTimeCtx* ri = ctx ? &ctx->ri : nullptr;
  FsmnTimeCtx* ir = ctx ? &ctx->ir : nullptr;
  FsmnTimeCtx* ii = ctx ? &ctx->ii : nullptr;
  Tensor fr_sr = real_cell.forward(s.re, rr);
  Tensor fi_si = imag_cell.forward(s.im, ii);
  Tensor fr_si = real_cell.forward(s.im, ri);
  Tensor fi_sr = imag_cell.forward(s.re, ir);
  return CTensor(sub(fr_sr, fi_si), add(fr_si, fi_sr));
}

CfsmnTimeCtx Cfsmn::make_ctx(int64_t batch) const {
  return CfsmnTimeCtx{real_cell.make_ctx(batch), real_cell.make_ctx(batch),
                      imag_cell.make_ctx(batch), imag_cell.make_ctx(batch)};
}

// ---------------------------------------------------------------------------
// CCBAM-lite
// ---------------------------------------------------------------------------

CcbamLite::CcbamLite(ParameterStore& store, const std::string& prefix,
                     int channels_, std::mt19937_64& rng)
    : channels(channels_), bottleneck(std::max(channels_ / 4, 2)) {
  w1 = store.obtain(prefix + ".w1",
                    affine_init({channels, bottleneck}, channels, rng));
  b1 = store.obtain(prefix + ".b1", Tensor::zeros({bottleneck}));
  w2 = store.obtain(prefix + ".w2",
                    affine_init({bottleneck, channels}, bottleneck, rng));
  b2 = store.obtain(prefix + ".b2", Tensor::zeros({channels}));
  std::vector<double> sv(static_cast<size_t>(2) * 2 * 5);
  {
    double bound = 1.0 / std::sqrt(20.0);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : sv) v = dist(rng);
  }
  sw = store.obtain(prefix + ".sw", Tensor::from_data({1, 2, 2, 5}, sv));
  sb = store.obtain(prefix + ".sb", Tensor::zeros({1}));
}

CTensor CcbamLite::forward(const CTensor& x, RealConvTimeCtx* ctx) const {
  if (x.re.ndim() != 3 || x.dim(0) != channels)
    throw ShapeError("attention block expects [C,T,F] with C=" +
                     std::to_string(channels));
  const int64_t T = x.dim(1), F = x.dim(2);
  Tensor mag = magnitude(x, 1e-12);

  // channel gate: frequency-pooled magnitudes through the bottleneck MLP
  Tensor avg_cf = mean(mag, {2}, false);        // [C,T]
  Tensor max_cf = reduce_max(mag, 2, false);    // [C,T]
  auto mlp = [&](const Tensor& feat_ct) {
    Tensor ft = permute(feat_ct, {1, 0});  // [T,C]
    Tensor hg = relu(add(matmul(ft, w1), b1));
    return add(matmul(hg, w2), b2);  // [T,C]
  };
  Tensor gate_tc = sigmoid(add(mlp(avg_cf), mlp(max_cf)));
  Tensor gate = reshape(permute(gate_tc, {1, 0}), {channels, T, 1});
  Tensor gr = mul(x.re, gate);
  Tensor gi = mul(x.im, gate);

  // spatial gate: channel-pooled statistics through a causal 2x5 conv
  Tensor mg = mul(mag, gate);  // gate >= 0, so this is the gated magnitude
  Tensor savg = reshape(mean(mg, {0}, false), {1, T, F});
  Tensor smax = reshape(reduce_max(mg, 0, false), {1, T, F});
  Tensor pool = concat({savg, smax}, 0);  // [2,T,F]
  pool = pad(pool, 2, 2, 2);              // keep F under the 5-wide kernel
  Tensor sg;
  if (ctx == nullptr) {
    sg = conv2d_real_op(pool, sw, sb, 1, true);
  } else {
    Tensor pin = concat({ctx->frames, pool}, 1);
    sg = conv2d_real_op(pin, sw, sb, 1, false);
    ctx->frames = slice(pin, 1, pin.dim(1) - 1, 1);
  }
  sg = sigmoid(sg);  // [1,T,F]
  return CTensor(mul(gr, sg), mul(gi, sg));
}

RealConvTimeCtx CcbamLite::make_ctx(int freq_bins) const {
  return RealConvTimeCtx{Tensor::zeros({2, 1, freq_bins + 4})};
}

void CcbamLite::force_identity() {
  auto zero = [](Tensor& t) {
    for (auto& v : t.mutable_data()) v = 0.0;
  };
  zero(w1);
  zero(w2);
  zero(sw);
  for (auto& v : b2.mutable_data()) v = 50.0;
  for (auto& v : sb.mutable_data()) v = 50.0;
}

}  // namespace frcrn
