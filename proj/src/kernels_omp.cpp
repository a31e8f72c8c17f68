#include <algorithm>
#include <cmath>
#include <cstring>

#include "leap/kernels.hpp"

namespace leap::kern::par {

// Every loop below partitions by output row (or output filter row), so each
// element is accumulated by exactly one thread in the same order as the
// serial lane. Outputs are bit-identical for any thread count.

void gemm_nn(bool accum, int m, int n, int k, const real* a, const real* b, real* c) {
#pragma omp parallel for schedule(static)
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
#pragma omp parallel for schedule(static)
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
#pragma omp parallel for schedule(static)
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
#pragma omp parallel for schedule(static)
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
#pragma omp parallel for schedule(static)
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
  const int rows = w * d;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int o = r / d, j = r % d;
    real* dwr = dw + static_cast<long>(r) * f;
    for (int t = 0; t + o < t_len; ++t) {
      const real xv = x[static_cast<long>(t + o) * d + j];
      const real* gt = g + static_cast<long>(t) * f;
      for (int q = 0; q < f; ++q) dwr[q] += xv * gt[q];
    }
  }
}

void softmax_rows(int rows, int cols, const real* x, real* out) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    serial::softmax_rows(1, cols, x + static_cast<long>(i) * cols,
                         out + static_cast<long>(i) * cols);
}

void map_activation(int kind, long n, const real* x, real* out) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) serial::map_activation(kind, 1, x + i, out + i);
}

}  // namespace leap::kern::par
