// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "frcrn/tensor.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace frcrn {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace detail {

std::span<double> Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return {grad};
}

std::span<double> BackwardCtx::grad(Node* n) {
  if (!n->requires_grad) return {};
  if (leaf_sink_ != nullptr && n->is_leaf) {
    auto& v = (*leaf_sink_)[n];
    if (v.empty()) v.assign(n->data.size(), 0.0);
    return {v};
  }
  return n->ensure_grad();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

static detail::NodePtr new_node(Shape shape, std::vector<double> data,
                                bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  int64_t n = shape_numel(shape);
  return wrap(new_node(std::move(shape), std::vector<double>(n, 0.0),
                       requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  int64_t n = shape_numel(shape);
  return wrap(new_node(std::move(shape), std::vector<double>(n, value),
                       requires_grad));
}

Tensor Tensor::ones(Shape shape, bool requires_grad) {
  return full(std::move(shape), 1.0, requires_grad);
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  return wrap(new_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev) {
  int64_t n = shape_numel(shape);
  std::vector<double> d(n);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& x : d) x = dist(rng);
  return wrap(new_node(std::move(shape), std::move(d), false));
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, double lo,
                       double hi) {
  int64_t n = shape_numel(shape);
  std::vector<double> d(n);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& x : d) x = dist(rng);
  return wrap(new_node(std::move(shape), std::move(d), false));
}

int64_t Tensor::dim(int axis) const {
  if (axis < 0) axis += ndim();
  if (axis < 0 || axis >= ndim())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape()));
  return n_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return n_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  if (static_cast<int>(idx.size()) != ndim())
    throw ShapeError("index rank mismatch");
  int64_t off = 0, stride = 1;
  auto it = idx.end();
  for (int d = ndim() - 1; d >= 0; --d) {
    --it;
    off += *it * stride;
    stride *= n_->shape[d];
  }
  return n_->data[off];
}

Tensor& Tensor::set_requires_grad(bool v) {
  n_->requires_grad = v;
  return *this;
}

std::span<const double> Tensor::grad() const { return {n_->grad}; }

void Tensor::zero_grad() {
  std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return wrap(new_node(n_->shape, n_->data, n_->requires_grad));
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& t) : prev_(g_active_tape) { g_active_tape = &t; }
Tape::Scope::~Scope() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& scalar_out, LeafGradMap* leaf_sink) {
  if (scalar_out.numel() != 1)
    throw ShapeError("backward() needs a scalar output, got " +
                     shape_str(scalar_out.shape()));
  if (!scalar_out.requires_grad()) return;
  detail::BackwardCtx ctx(leaf_sink);
  auto seed = ctx.grad(scalar_out.node());
  if (!seed.empty()) seed[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    detail::Node& n = **it;
    if (!n.backward) continue;
    if (n.grad.empty()) continue;  // not on any path to the output
    n.backward(n, ctx);
    n.grad.clear();
    n.grad.shrink_to_fit();
  }
}

namespace detail {

Tensor make_op(Shape shape, std::vector<double> data,
               const std::vector<Tensor>& inputs, BackwardFn fn) {
  auto n = new_node(std::move(shape), std::move(data), false);
  Tape* tape = Tape::active();
  if (tape != nullptr) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      n->requires_grad = true;
      n->is_leaf = false;
      n->parents.reserve(inputs.size());
      for (const auto& in : inputs) n->parents.push_back(in.node_ptr());
      n->backward = std::move(fn);
      tape->record(n);
    }
  }
  return Tensor::wrap(std::move(n));
}

Tensor make_op(Shape shape, std::vector<double> data,
               std::initializer_list<Tensor> inputs, BackwardFn fn) {
  return make_op(std::move(shape), std::move(data),
                 std::vector<Tensor>(inputs), std::move(fn));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Broadcasting machinery
// ---------------------------------------------------------------------------

namespace {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  size_t nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (size_t i = 0; i < nd; ++i) {
    int64_t av = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
    int64_t bv = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
    if (av == bv)
      out[i] = av;
    else if (av == 1)
      out[i] = bv;
    else if (bv == 1)
      out[i] = av;
    else
      throw ShapeError("shapes " + shape_str(a) + " and " + shape_str(b) +
                       " are not broadcastable");
  }
  return out;
}

// Row-major strides of `in` right-aligned against `out`; 0 where broadcast.
std::vector<int64_t> bcast_strides(const Shape& in, const Shape& out) {
  std::vector<int64_t> st(out.size(), 0);
  int64_t acc = 1;
  for (int i = static_cast<int>(in.size()) - 1; i >= 0; --i) {
    size_t oi = out.size() - in.size() + i;
    st[oi] = (in[i] == 1 && out[oi] != 1) ? 0 : acc;
    acc *= in[i];
  }
  return st;
}

// Calls f(out_idx, a_idx, b_idx) for every element of the broadcast shape.
template <class F>
void for_each_bcast(const Shape& osh, const Shape& ash, const Shape& bsh,
                    F&& f) {
  int nd = static_cast<int>(osh.size());
  int64_t total = shape_numel(osh);
  if (nd == 0) {
    if (total == 1) f(0, 0, 0);
    return;
  }
  std::vector<int64_t> astr = bcast_strides(ash, osh);
  std::vector<int64_t> bstr = bcast_strides(bsh, osh);
  std::vector<int64_t> idx(nd, 0);
  int64_t ai = 0, bi = 0;
  for (int64_t oi = 0; oi < total; ++oi) {
    f(oi, ai, bi);
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[d];
      ai += astr[d];
      bi += bstr[d];
      if (idx[d] < osh[d]) break;
      ai -= astr[d] * osh[d];
      bi -= bstr[d] * osh[d];
      idx[d] = 0;
    }
  }
}

// Generic broadcast binary op. DaF/DbF: (gout, aval, bval) -> grad contrib.
template <class FwdF, class DaF, class DbF>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, FwdF fwd, DaF da,
                          DbF db) {
  Shape osh = broadcast_shape(a.shape(), b.shape());
  int64_t total = shape_numel(osh);
  std::vector<double> out(total);
  auto ad = a.data();
  auto bd = b.data();
  if (a.shape() == b.shape()) {
    for (int64_t i = 0; i < total; ++i) out[i] = fwd(ad[i], bd[i]);
  } else {
    for_each_bcast(osh, a.shape(), b.shape(),
                   [&](int64_t oi, int64_t ai, int64_t bi) {
                     out[oi] = fwd(ad[ai], bd[bi]);
                   });
  }
  return detail::make_op(
      osh, std::move(out), {a, b},
      [da, db](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* pa = self.parents[0].get();
        detail::Node* pb = self.parents[1].get();
        auto ga = ctx.grad(pa);
        auto gb = ctx.grad(pb);
        const auto& g = self.grad;
        const auto& adata = pa->data;
        const auto& bdata = pb->data;
        if (pa->shape == pb->shape) {
          int64_t n = static_cast<int64_t>(g.size());
          if (!ga.empty())
            for (int64_t i = 0; i < n; ++i) ga[i] += da(g[i], adata[i], bdata[i]);
          if (!gb.empty())
            for (int64_t i = 0; i < n; ++i) gb[i] += db(g[i], adata[i], bdata[i]);
        } else {
          for_each_bcast(self.shape, pa->shape, pb->shape,
                         [&](int64_t oi, int64_t ai, int64_t bi) {
                           if (!ga.empty())
                             ga[ai] += da(g[oi], adata[ai], bdata[bi]);
                           if (!gb.empty())
                             gb[bi] += db(g[oi], adata[ai], bdata[bi]);
                         });
        }
      });
}

// Unary op; BwdF: (gout, x, y) -> dx contribution.
template <class FwdF, class BwdF>
Tensor unary_elementwise(const Tensor& a, FwdF fwd, BwdF bwd) {
  int64_t n = a.numel();
  std::vector<double> out(n);
  auto ad = a.data();
  for (int64_t i = 0; i < n; ++i) out[i] = fwd(ad[i]);
  return detail::make_op(
      a.shape(), std::move(out), {a},
      [bwd](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* pa = self.parents[0].get();
        auto ga = ctx.grad(pa);
        if (ga.empty()) return;
        const auto& g = self.grad;
        const auto& x = pa->data;
        const auto& y = self.data;
        int64_t n2 = static_cast<int64_t>(g.size());
        for (int64_t i = 0; i < n2; ++i) ga[i] += bwd(g[i], x[i], y[i]);
      });
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, [](double x, double y) { return x / y; },
      [](double g, double, double y) { return g / y; },
      [](double g, double x, double y) { return -g * x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_elementwise(
      a, [s](double x) { return x + s; },
      [](double g, double, double) { return g; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_elementwise(
      a, [s](double x) { return x * s; },
      [s](double g, double, double) { return g * s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor tanh_op(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::tanh(x); },
      [](double g, double, double y) { return g * (1.0 - y * y); });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double g, double, double y) { return g * y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_elementwise(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double g, double x, double) { return x > 0.0 ? g : slope * g; });
}

Tensor exp_op(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::exp(x); },
      [](double g, double, double y) { return g * y; });
}

Tensor log_op(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::log(x); },
      [](double g, double x, double) { return g / x; });
}

Tensor sqrt_op(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::sqrt(x); },
      [](double g, double, double y) { return 0.5 * g / y; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary_elementwise(
      a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double g, double x, double) {
        return (x >= lo && x <= hi) ? g : 0.0;
      });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace {

std::vector<int> normalize_axes(const std::vector<int>& axes, int nd) {
  std::vector<int> out;
  out.reserve(axes.size());
  for (int ax : axes) {
    if (ax < 0) ax += nd;
    if (ax < 0 || ax >= nd) throw ShapeError("reduce axis out of range");
    out.push_back(ax);
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end())
    throw ShapeError("duplicate reduce axis");
  return out;
}

}  // namespace

Tensor sum(const Tensor& a, const std::vector<int>& axes, bool keepdim) {
  int nd = a.ndim();
  std::vector<int> ax = normalize_axes(axes, nd);
  std::vector<bool> reduced(nd, false);
  for (int d : ax) reduced[d] = true;

  Shape osh;
  for (int d = 0; d < nd; ++d) {
    if (reduced[d]) {
      if (keepdim) osh.push_back(1);
    } else {
      osh.push_back(a.shape()[d]);
    }
  }
  if (osh.empty()) osh.push_back(1);

  // Stride of each input dim in the output index space (0 when reduced).
  std::vector<int64_t> ostr(nd, 0);
  {
    int64_t acc = 1;
    for (int d = nd - 1; d >= 0; --d) {
      if (!reduced[d]) {
        ostr[d] = acc;
        acc *= a.shape()[d];
      }
    }
  }

  int64_t onum = shape_numel(osh);
  std::vector<double> out(onum, 0.0);
  auto ad = a.data();
  const Shape& ish = a.shape();
  std::vector<int64_t> idx(nd, 0);
  int64_t oi = 0;
  int64_t total = a.numel();
  for (int64_t ii = 0; ii < total; ++ii) {
    out[oi] += ad[ii];
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[d];
      oi += ostr[d];
      if (idx[d] < ish[d]) break;
      oi -= ostr[d] * ish[d];
      idx[d] = 0;
    }
  }

  return detail::make_op(
      osh, std::move(out), {a},
      [ostr](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* pa = self.parents[0].get();
        auto ga = ctx.grad(pa);
        if (ga.empty()) return;
        const auto& g = self.grad;
        const Shape& ish = pa->shape;
        int nd2 = static_cast<int>(ish.size());
        std::vector<int64_t> idx2(nd2, 0);
        int64_t oi2 = 0;
        int64_t total2 = pa->numel();
        for (int64_t ii = 0; ii < total2; ++ii) {
          ga[ii] += g[oi2];
          for (int d = nd2 - 1; d >= 0; --d) {
            ++idx2[d];
            oi2 += ostr[d];
            if (idx2[d] < ish[d]) break;
            oi2 -= ostr[d] * ish[d];
            idx2[d] = 0;
          }
        }
      });
}

Tensor sum_all(const Tensor& a) {
  std::vector<int> axes(a.ndim());
  std::iota(axes.begin(), axes.end(), 0);
  return sum(a, axes, false);
}

Tensor mean(const Tensor& a, const std::vector<int>& axes, bool keepdim) {
  std::vector<int> ax = normalize_axes(axes, a.ndim());
  int64_t n = 1;
  for (int d : ax) n *= a.shape()[d];
  return mul_scalar(sum(a, axes, keepdim), 1.0 / static_cast<double>(n));
}

Tensor reduce_max(const Tensor& a, int axis, bool keepdim) {
  int nd = a.ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw ShapeError("reduce axis out of range");
  int64_t outer = 1, mid = a.shape()[axis], inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.shape()[d];
  for (int d = axis + 1; d < nd; ++d) inner *= a.shape()[d];

  Shape osh;
  for (int d = 0; d < nd; ++d) {
    if (d == axis) {
      if (keepdim) osh.push_back(1);
    } else {
      osh.push_back(a.shape()[d]);
    }
  }
  if (osh.empty()) osh.push_back(1);

  std::vector<double> out(outer * inner);
  std::vector<int64_t> arg(outer * inner);
  auto ad = a.data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      double best = ad[o * mid * inner + i];
      int64_t bj = 0;
      for (int64_t j = 1; j < mid; ++j) {
        double v = ad[(o * mid + j) * inner + i];
        if (v > best) {
          best = v;
          bj = j;
        }
      }
      out[o * inner + i] = best;
      arg[o * inner + i] = bj;
    }
  }

  return detail::make_op(
      osh, std::move(out), {a},
      [arg, outer, mid, inner](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* pa = self.parents[0].get();
        auto ga = ctx.grad(pa);
        if (ga.empty()) return;
        const auto& g = self.grad;
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t i = 0; i < inner; ++i) {
            int64_t k = o * inner + i;
            ga[(o * mid + arg[k]) * inner + i] += g[k];
          }
      });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape new_shape) {
  if (shape_numel(new_shape) != a.numel())
    throw ShapeError("reshape " + shape_str(a.shape()) + " -> " +
                     shape_str(new_shape) + " changes element count");
  std::vector<double> out(a.data().begin(), a.data().end());
  return detail::make_op(
      std::move(new_shape), std::move(out), {a},
      [](detail::Node& self, detail::BackwardCtx& ctx) {
        auto ga = ctx.grad(self.parents[0].get());
        if (ga.empty()) return;
        const auto& g = self.grad;
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      });
}

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
  int nd = a.ndim();
  if (static_cast<int>(perm.size()) != nd)
    throw ShapeError("permute rank mismatch");
  std::vector<bool> seen(nd, false);
  Shape osh(nd);
  for (int d = 0; d < nd; ++d) {
    int p = perm[d];
    if (p < 0 || p >= nd || seen[p]) throw ShapeError("invalid permutation");
    seen[p] = true;
    osh[d] = a.shape()[p];
  }
  // out index strides mapped back to input offsets
  std::vector<int64_t> istr(nd);
  {
    int64_t acc = 1;
    for (int d = nd - 1; d >= 0; --d) {
      istr[d] = acc;
      acc *= a.shape()[d];
    }
  }
  std::vector<int64_t> map_str(nd);
  for (int d = 0; d < nd; ++d) map_str[d] = istr[perm[d]];

  int64_t total = a.numel();
  std::vector<double> out(total);
  auto ad = a.data();
  std::vector<int64_t> idx(nd, 0);
  int64_t ii = 0;
  for (int64_t oi = 0; oi < total; ++oi) {
    out[oi] = ad[ii];
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[d];
      ii += map_str[d];
      if (idx[d] < osh[d]) break;
      ii -= map_str[d] * osh[d];
      idx[d] = 0;
    }
  }

  Shape osh_copy = osh;
  return detail::make_op(
      std::move(osh_copy), std::move(out), {a},
      [map_str, osh](detail::Node& self, detail::BackwardCtx& ctx) {
        auto ga = ctx.grad(self.parents[0].get());
        if (ga.empty()) return;
        const auto& g = self.grad;
        int nd2 = static_cast<int>(osh.size());
        std::vector<int64_t> idx2(nd2, 0);
        int64_t ii2 = 0;
        for (size_t oi = 0; oi < g.size(); ++oi) {
          ga[ii2] += g[oi];
          for (int d = nd2 - 1; d >= 0; --d) {
            ++idx2[d];
            ii2 += map_str[d];
            if (idx2[d] < osh[d]) break;
            ii2 -= map_str[d] * osh[d];
            idx2[d] = 0;
          }
        }
      });
}

namespace {
// Decompose shape around `axis` as [outer, n, inner].
void axis_split(const Shape& s, int axis, int64_t* outer, int64_t* n,
                int64_t* inner) {
  *outer = 1;
  *inner = 1;
  for (int d = 0; d < axis; ++d) *outer *= s[d];
  *n = s[axis];
  for (size_t d = axis + 1; d < s.size(); ++d) *inner *= s[d];
}
}  // namespace

Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len) {
  int nd = a.ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw ShapeError("slice axis out of range");
  if (start < 0 || len < 0 || start + len > a.shape()[axis])
    throw ShapeError("slice [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of bounds for axis " +
                     std::to_string(axis) + " of " + shape_str(a.shape()));
  int64_t outer, n, inner;
  axis_split(a.shape(), axis, &outer, &n, &inner);
  Shape osh = a.shape();
  osh[axis] = len;
  std::vector<double> out(outer * len * inner);
  auto ad = a.data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy_n(ad.data() + (o * n + start) * inner, len * inner,
                out.data() + o * len * inner);
  return detail::make_op(
      std::move(osh), std::move(out), {a},
      [axis, start, len](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* pa = self.parents[0].get();
        auto ga = ctx.grad(pa);
        if (ga.empty()) return;
        const auto& g = self.grad;
        int64_t outer2, n2, inner2;
        axis_split(pa->shape, axis, &outer2, &n2, &inner2);
        for (int64_t o = 0; o < outer2; ++o) {
          double* dst = ga.data() + (o * n2 + start) * inner2;
          const double* src = g.data() + o * len * inner2;
          for (int64_t k = 0; k < len * inner2; ++k) dst[k] += src[k];
        }
      });
}

Tensor pad(const Tensor& a, int axis, int64_t lo, int64_t hi, double value) {
  int nd = a.ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw ShapeError("pad axis out of range");
  if (lo < 0 || hi < 0) throw ShapeError("negative padding");
  int64_t outer, n, inner;
  axis_split(a.shape(), axis, &outer, &n, &inner);
  Shape osh = a.shape();
  osh[axis] = n + lo + hi;
  std::vector<double> out(outer * (n + lo + hi) * inner, value);
  auto ad = a.data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy_n(ad.data() + o * n * inner, n * inner,
                out.data() + (o * (n + lo + hi) + lo) * inner);
  return detail::make_op(
      std::move(osh), std::move(out), {a},
      [axis, lo](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* pa = self.parents[0].get();
        auto ga = ctx.grad(pa);
        if (ga.empty()) return;
        const auto& g = self.grad;
        int64_t outer2, n2, inner2;
        axis_split(pa->shape, axis, &outer2, &n2, &inner2);
        int64_t on = self.shape[axis];
        for (int64_t o = 0; o < outer2; ++o) {
          double* dst = ga.data() + o * n2 * inner2;
          const double* src = g.data() + (o * on + lo) * inner2;
          for (int64_t k = 0; k < n2 * inner2; ++k) dst[k] += src[k];
        }
      });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  int nd = parts[0].ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw ShapeError("concat axis out of range");
  Shape osh = parts[0].shape();
  int64_t total_axis = 0;
  for (const auto& p : parts) {
    if (p.ndim() != nd) throw ShapeError("concat rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != axis && p.shape()[d] != osh[d])
        throw ShapeError("concat shape mismatch: " + shape_str(p.shape()) +
                         " vs " + shape_str(osh));
    total_axis += p.shape()[axis];
  }
  osh[axis] = total_axis;

  int64_t outer, n, inner;
  axis_split(osh, axis, &outer, &n, &inner);
  std::vector<double> out(shape_numel(osh));
  std::vector<int64_t> sizes;
  sizes.reserve(parts.size());
  for (const auto& p : parts) sizes.push_back(p.shape()[axis]);
  int64_t off = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    auto pd = parts[pi].data();
    int64_t pn = sizes[pi];
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(pd.data() + o * pn * inner, pn * inner,
                  out.data() + (o * n + off) * inner);
    off += pn;
  }

  return detail::make_op(
      std::move(osh), std::move(out), parts,
      [axis, sizes](detail::Node& self, detail::BackwardCtx& ctx) {
        const auto& g = self.grad;
        int64_t outer2, n2, inner2;
        axis_split(self.shape, axis, &outer2, &n2, &inner2);
        int64_t off2 = 0;
        for (size_t pi = 0; pi < self.parents.size(); ++pi) {
          detail::Node* p = self.parents[pi].get();
          int64_t pn = sizes[pi];
          auto gp = ctx.grad(p);
          if (!gp.empty()) {
            for (int64_t o = 0; o < outer2; ++o) {
              const double* src = g.data() + (o * n2 + off2) * inner2;
              double* dst = gp.data() + o * pn * inner2;
              for (int64_t k = 0; k < pn * inner2; ++k) dst[k] += src[k];
            }
          }
          off2 += pn;
        }
      });
}

// ---------------------------------------------------------------------------
// Matmul
// ---------------------------------------------------------------------------

namespace {
using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw ShapeError("matmul expects rank-2 tensors, got " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  int64_t m = a.shape()[0], k = a.shape()[1];
  int64_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw ShapeError("matmul inner dim mismatch: " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  std::vector<double> out(m * n);
  MMap(out.data(), m, n).noalias() =
      CMap(a.data().data(), m, k) * CMap(b.data().data(), k, n);
  return detail::make_op(
      {m, n}, std::move(out), {a, b},
      [m, k, n](detail::Node& self, detail::BackwardCtx& ctx) {
        detail::Node* pa = self.parents[0].get();
        detail::Node* pb = self.parents[1].get();
        CMap g(self.grad.data(), m, n);
        auto ga = ctx.grad(pa);
        if (!ga.empty())
          MMap(ga.data(), m, k).noalias() +=
              g * CMap(pb->data.data(), k, n).transpose();
        auto gb = ctx.grad(pb);
        if (!gb.empty())
          MMap(gb.data(), k, n).noalias() +=
              CMap(pa->data.data(), m, k).transpose() * g;
      });
}

// ---------------------------------------------------------------------------
// Complex tensors
// ---------------------------------------------------------------------------

CTensor::CTensor(Tensor r, Tensor i) : re(std::move(r)), im(std::move(i)) {
  if (re.shape() != im.shape())
    throw ShapeError("complex tensor planes differ: " + shape_str(re.shape()) +
                     " vs " + shape_str(im.shape()));
}

CTensor CTensor::zeros(Shape shape) {
  Tensor re = Tensor::zeros(shape);
  Tensor im = Tensor::zeros(std::move(shape));
  return CTensor(std::move(re), std::move(im));
}

CTensor cadd(const CTensor& a, const CTensor& b) {
  return CTensor(add(a.re, b.re), add(a.im, b.im));
}

CTensor csub(const CTensor& a, const CTensor& b) {
  return CTensor(sub(a.re, b.re), sub(a.im, b.im));
}

CTensor cmul(const CTensor& a, const CTensor& b) {
  return CTensor(sub(mul(a.re, b.re), mul(a.im, b.im)),
                 add(mul(a.re, b.im), mul(a.im, b.re)));
}

Tensor magnitude(const CTensor& a, double eps) {
  Tensor sq = add(mul(a.re, a.re), mul(a.im, a.im));
  if (eps != 0.0) sq = add_scalar(sq, eps);
  return sqrt_op(sq);
}

CTensor creshape(const CTensor& a, Shape s) {
  Tensor re = reshape(a.re, s);
  Tensor im = reshape(a.im, std::move(s));
  return CTensor(std::move(re), std::move(im));
}

CTensor cpermute(const CTensor& a, const std::vector<int>& perm) {
  return CTensor(permute(a.re, perm), permute(a.im, perm));
}

CTensor cslice(const CTensor& a, int axis, int64_t start, int64_t len) {
  return CTensor(slice(a.re, axis, start, len), slice(a.im, axis, start, len));
}

CTensor cpad(const CTensor& a, int axis, int64_t lo, int64_t hi) {
  return CTensor(pad(a.re, axis, lo, hi), pad(a.im, axis, lo, hi));
}

CTensor cconcat(const std::vector<CTensor>& parts, int axis) {
  std::vector<Tensor> res, ims;
  res.reserve(parts.size());
  ims.reserve(parts.size());
  for (const auto& p : parts) {
    res.push_back(p.re);
    ims.push_back(p.im);
  }
  return CTensor(concat(res, axis), concat(ims, axis));
}

}  // namespace frcrn
