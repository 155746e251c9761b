// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "frcrn/common.h"

namespace frcrn {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Grad routing during backward. Intermediate grads always live in the node;
// leaf grads can be redirected into an external map so several tapes can run
// over shared parameters and the caller sums the maps explicitly.
class BackwardCtx {
 public:
  using LeafGradMap = std::unordered_map<Node*, std::vector<double>>;

  explicit BackwardCtx(LeafGradMap* leaf_sink) : leaf_sink_(leaf_sink) {}

  // Buffer to accumulate into, or empty span if this node needs no grad.
  std::span<double> grad(Node* n);

 private:
  LeafGradMap* leaf_sink_;
};

using BackwardFn = std::function<void(Node&, BackwardCtx&)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<double> grad;  // allocated on first accumulation
  std::vector<NodePtr> parents;
  BackwardFn backward;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  std::span<double> ensure_grad();
};

}  // namespace detail

// Dense real tensor, double precision, row-major. Value-semantic handle to a
// shared node; data is immutable after construction except through
// mutable_data() (parameter updates, finite-difference probes).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0);
  static Tensor uniform(Shape shape, std::mt19937_64& rng, double lo,
                        double hi);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int ndim() const { return static_cast<int>(n_->shape.size()); }
  int64_t dim(int axis) const;
  int64_t numel() const { return n_->numel(); }

  std::span<const double> data() const { return {n_->data}; }
  std::span<double> mutable_data() { return {n_->data}; }
  double item() const;
  double at(std::initializer_list<int64_t> idx) const;

  bool requires_grad() const { return n_->requires_grad; }
  Tensor& set_requires_grad(bool v);

  // Accumulated gradient (empty until a backward pass reaches this tensor).
  std::span<const double> grad() const;
  void zero_grad();

  detail::Node* node() const { return n_.get(); }
  // Deep copy of values; fresh node, no graph history.
  Tensor clone() const;

  static Tensor wrap(detail::NodePtr n) {
    Tensor t;
    t.n_ = std::move(n);
    return t;
  }
  detail::NodePtr node_ptr() const { return n_; }

 private:
  detail::NodePtr n_;
};

// Records executed ops so a scalar output can be differentiated by replaying
// them in reverse. Activate with Tape::Scope; one active tape per thread.
class Tape {
 public:
  using LeafGradMap = detail::BackwardCtx::LeafGradMap;

  class Scope {
   public:
    explicit Scope(Tape& t);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  static Tape* active();

  void record(detail::NodePtr n) { ops_.push_back(std::move(n)); }
  size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  // Seeds d(out)/d(out) = 1 and replays recorded ops in reverse execution
  // order. Leaf grads accumulate into node.grad, or into leaf_sink when
  // given (node.grad then stays untouched).
  void backward(const Tensor& scalar_out, LeafGradMap* leaf_sink = nullptr);

 private:
  std::vector<detail::NodePtr> ops_;
};

namespace detail {
// Builds the result node for an op. When a tape is active and any input
// requires grad, the node is wired into the graph and recorded; otherwise it
// is a free-standing constant (eval mode keeps no history, so intermediates
// are released as references drop).
Tensor make_op(Shape shape, std::vector<double> data,
               std::initializer_list<Tensor> inputs, BackwardFn fn);
Tensor make_op(Shape shape, std::vector<double> data,
               const std::vector<Tensor>& inputs, BackwardFn fn);
}  // namespace detail

// ---- elementwise (leading-axis / size-1 broadcasting only) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor sqrt_op(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// ---- reductions ----
Tensor sum(const Tensor& a, const std::vector<int>& axes, bool keepdim = false);
Tensor sum_all(const Tensor& a);  // -> shape {1}
Tensor mean(const Tensor& a, const std::vector<int>& axes,
            bool keepdim = false);
Tensor reduce_max(const Tensor& a, int axis, bool keepdim = false);

// ---- shape ops ----
Tensor reshape(const Tensor& a, Shape new_shape);
Tensor permute(const Tensor& a, const std::vector<int>& perm);
Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len);
Tensor pad(const Tensor& a, int axis, int64_t lo, int64_t hi,
           double value = 0.0);
Tensor concat(const std::vector<Tensor>& parts, int axis);

// ---- linear algebra ----
// a: [M,K] x b: [K,N] -> [M,N]; Eigen GEMM under the hood.
Tensor matmul(const Tensor& a, const Tensor& b);

// Complex tensor as a pair of equal-shape real planes. Every complex op is a
// composition of real ops, so backward rules come for free and the
// four-real-op expansion is the literal implementation.
struct CTensor {
  Tensor re, im;

  CTensor() = default;
  CTensor(Tensor r, Tensor i);

  bool defined() const { return re.defined(); }
  const Shape& shape() const { return re.shape(); }
  int64_t dim(int axis) const { return re.dim(axis); }
  int64_t numel() const { return re.numel(); }

  static CTensor zeros(Shape shape);
};

CTensor cadd(const CTensor& a, const CTensor& b);
CTensor csub(const CTensor& a, const CTensor& b);
// (a_r b_r - a_i b_i) + j(a_r b_i + a_i b_r)
CTensor cmul(const CTensor& a, const CTensor& b);
Tensor magnitude(const CTensor& a, double eps = 0.0);
CTensor creshape(const CTensor& a, Shape s);
CTensor cpermute(const CTensor& a, const std::vector<int>& perm);
CTensor cslice(const CTensor& a, int axis, int64_t start, int64_t len);
CTensor cpad(const CTensor& a, int axis, int64_t lo, int64_t hi);
CTensor cconcat(const std::vector<CTensor>& parts, int axis);

}  // namespace frcrn
