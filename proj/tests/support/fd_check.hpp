#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "leap/rng.hpp"
#include "leap/tensor.hpp"

// Central finite-difference oracle. Independent of the tape: it only
// re-evaluates the supplied scalar function with perturbed inputs.
namespace leap::testing {

struct FdMismatch {
  long index = -1;
  real analytic = 0, numeric = 0;
};

// Returns the worst mismatch between analytic gradient and central
// differences; ok() when every component agrees within rel_tol (with an
// absolute floor for near-zero gradients).
struct FdResult {
  bool ok = true;
  FdMismatch worst;
  real worst_err = 0;
};

inline FdResult fd_compare(Tensor& x, const std::function<real()>& eval,
                           const Tensor& analytic, real step = 1e-5,
                           real rel_tol = 1e-6, real abs_floor = 1e-8) {
  FdResult r;
  for (long i = 0; i < x.numel(); ++i) {
    const real orig = x.v[i];
    x.v[i] = orig + step;
    const real fp = eval();
    x.v[i] = orig - step;
    const real fm = eval();
    x.v[i] = orig;
    const real fd = (fp - fm) / (2 * step);
    const real an = analytic.empty() ? 0.0 : analytic.v[i];
    const real err = std::abs(an - fd);
    const real tol = rel_tol * std::max(std::abs(an), std::abs(fd));
    const bool pass = err <= std::max(tol, abs_floor);
    if (!pass && err > r.worst_err) {
      r.ok = false;
      r.worst_err = err;
      r.worst = {i, an, fd};
    }
  }
  return r;
}

inline std::string describe(const FdResult& r) {
  if (r.ok) return "ok";
  return "index " + std::to_string(r.worst.index) + ": analytic " +
         std::to_string(r.worst.analytic) + " vs fd " + std::to_string(r.worst.numeric);
}

inline Tensor random_tensor(const std::vector<int>& shape, Rng& rng, real lo = -1.0,
                            real hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (real& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace leap::testing
