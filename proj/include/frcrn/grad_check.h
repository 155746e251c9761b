// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "frcrn/tensor.h"

namespace frcrn {

struct GradCheckOptions {
  double step = 1e-5;          // central-difference step, in [1e-7, 1e-4]
  double tol = 1e-4;           // relative-error threshold
  double denom_floor = 1e-3;   // floor on |grad| in the relative-error denom
  int64_t max_checks_per_tensor = -1;  // -1: every element
  uint64_t sample_seed = 0x5eedULL;    // element subsampling when limited
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  int64_t checked = 0;
  int64_t failed = 0;
  std::string detail;  // worst element, or diagnostic on non-finite values
};

// Compares tape gradients of the scalar f() against central finite
// differences for every (or a sampled subset of) element of each
// requires_grad input. f must read the inputs by handle so in-place nudges
// are observed.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& inputs,
                           const GradCheckOptions& opts = {});

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& inputs, double step,
                           double tol);

}  // namespace frcrn
