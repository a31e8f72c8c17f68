#include <algorithm>
#include <cmath>
#include <cstring>

#include "leap/kernels.hpp"

namespace leap::kern::serial {

void gemm_nn(bool accum, int m, int n, int k, const real* a, const real* b, real* c) {
  for (int i = 0; i < m; ++i) {
    real* ci = c + static_cast<long>(i) * n;
    if (!accum) std::memset(ci, 0, sizeof(real) * n);
    const real* ai = a + static_cast<long>(i) * k;
    for (int l = 0; l < k; ++l) {
      const real av = ai[l];
      const real* bl = b + static_cast<long>(l) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

void gemm_nt(bool accum, int m, int n, int k, const real* a, const real* b, real* c) {
  for (int i = 0; i < m; ++i) {
    const real* ai = a + static_cast<long>(i) * k;
    real* ci = c + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) {
      const real* bj = b + static_cast<long>(j) * k;
      real s = 0;
      for (int l = 0; l < k; ++l) s += ai[l] * bj[l];
      ci[j] = accum ? ci[j] + s : s;
    }
  }
}

void gemm_tn(bool accum, int m, int n, int k, const real* a, const real* b, real* c) {
  // a stored [k x m]; per output row i the l-loop runs ascending, matching
  // the parallel lane accumulation order exactly.
  for (int i = 0; i < m; ++i) {
    real* ci = c + static_cast<long>(i) * n;
    if (!accum) std::memset(ci, 0, sizeof(real) * n);
    for (int l = 0; l < k; ++l) {
      const real av = a[static_cast<long>(l) * m + i];
      const real* bl = b + static_cast<long>(l) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

void conv1d_fwd(int t_len, int d, int w, int f, const real* x, const real* wts, real* out) {
  for (int t = 0; t < t_len; ++t) {
    real* ot = out + static_cast<long>(t) * f;
    std::memset(ot, 0, sizeof(real) * f);
    const int wmax = std::min(w, t_len - t);
    for (int o = 0; o < wmax; ++o) {
      const real* xr = x + static_cast<long>(t + o) * d;
      const real* wr = wts + static_cast<long>(o) * d * f;
      for (int j = 0; j < d; ++j) {
        const real xv = xr[j];
        const real* wrow = wr + static_cast<long>(j) * f;
        for (int q = 0; q < f; ++q) ot[q] += xv * wrow[q];
      }
    }
  }
}

void conv1d_bwd_x(int t_len, int d, int w, int f, const real* g, const real* wts, real* dx) {
  // dx[r] gathers from output rows r-o, o < w; gather form keeps the
  // accumulation order fixed per element.
  for (int r = 0; r < t_len; ++r) {
    real* dxr = dx + static_cast<long>(r) * d;
    for (int o = 0; o < w; ++o) {
      const int t = r - o;
      if (t < 0 || t >= t_len) continue;
      const real* gt = g + static_cast<long>(t) * f;
      const real* wr = wts + static_cast<long>(o) * d * f;
      for (int j = 0; j < d; ++j) {
        const real* wrow = wr + static_cast<long>(j) * f;
        real s = 0;
        for (int q = 0; q < f; ++q) s += gt[q] * wrow[q];
        dxr[j] += s;
      }
    }
  }
}

void conv1d_bwd_w(int t_len, int d, int w, int f, const real* x, const real* g, real* dw) {
  for (int o = 0; o < w; ++o) {
    for (int j = 0; j < d; ++j) {
      real* dwr = dw + (static_cast<long>(o) * d + j) * f;
      for (int t = 0; t + o < t_len; ++t) {
        const real xv = x[static_cast<long>(t + o) * d + j];
        const real* gt = g + static_cast<long>(t) * f;
        for (int q = 0; q < f; ++q) dwr[q] += xv * gt[q];
      }
    }
  }
}

void softmax_rows(int rows, int cols, const real* x, real* out) {
  for (int i = 0; i < rows; ++i) {
    const real* xi = x + static_cast<long>(i) * cols;
    real* oi = out + static_cast<long>(i) * cols;
    real mx = xi[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
    real z = 0;
    for (int j = 0; j < cols; ++j) {
      oi[j] = std::exp(xi[j] - mx);
      z += oi[j];
    }
    const real inv = 1.0 / z;
    for (int j = 0; j < cols; ++j) oi[j] *= inv;
  }
}

void map_activation(int kind, long n, const real* x, real* out) {
  switch (kind) {
    case 0:
      for (long i = 0; i < n; ++i) out[i] = x[i] > 0 ? x[i] : 0;
      break;
    case 1:
      for (long i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
      break;
    default:
      for (long i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
      break;
  }
}

}  // namespace leap::kern::serial
