// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "frcrn/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace frcrn {

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& inputs,
                           const GradCheckOptions& opts) {
  if (opts.step < 1e-7 || opts.step > 1e-4)
    throw ConfigError("grad_check step must lie in [1e-7, 1e-4]");

  GradCheckReport rep;

  // Analytic pass.
  Tape tape;
  std::vector<std::vector<double>> analytic(inputs.size());
  {
    Tape::Scope scope(tape);
    Tensor y = f();
    double y0 = y.item();
    if (!std::isfinite(y0)) {
      rep.detail = "non-finite function value " + std::to_string(y0);
      return rep;
    }
    Tape::LeafGradMap grads;
    tape.backward(y, &grads);
    for (size_t t = 0; t < inputs.size(); ++t) {
      auto it = grads.find(inputs[t].node());
      if (it != grads.end())
        analytic[t] = it->second;
      else
        analytic[t].assign(inputs[t].numel(), 0.0);
    }
  }

  std::mt19937_64 rng(opts.sample_seed);
  bool ok = true;
  for (size_t t = 0; t < inputs.size(); ++t) {
    Tensor in = inputs[t];
    if (!in.requires_grad()) continue;
    int64_t n = in.numel();
    std::vector<int64_t> elems(n);
    std::iota(elems.begin(), elems.end(), 0);
    if (opts.max_checks_per_tensor >= 0 && n > opts.max_checks_per_tensor) {
      std::shuffle(elems.begin(), elems.end(), rng);
      elems.resize(opts.max_checks_per_tensor);
    }
    auto data = in.mutable_data();
    for (int64_t e : elems) {
      double saved = data[e];
      data[e] = saved + opts.step;
      double fp = f().item();
      data[e] = saved - opts.step;
      double fm = f().item();
      data[e] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        rep.detail = "non-finite function value during finite differencing";
        rep.pass = false;
        return rep;
      }
      double fd = (fp - fm) / (2.0 * opts.step);
      double an = analytic[t][e];
      double abs_err = std::abs(fd - an);
      double denom =
          std::max({std::abs(fd), std::abs(an), opts.denom_floor});
      double rel = abs_err / denom;
      ++rep.checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        std::ostringstream os;
        os << "worst: input " << t << " elem " << e << " analytic " << an
           << " fd " << fd;
        rep.detail = os.str();
      }
      rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
      if (rel > opts.tol) {
        ++rep.failed;
        ok = false;
      }
    }
  }
  rep.pass = ok;
  return rep;
}

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& inputs, double step,
                           double tol) {
  GradCheckOptions opts;
  opts.step = step;
  opts.tol = tol;
  return grad_check(f, inputs, opts);
}

}  // namespace frcrn
