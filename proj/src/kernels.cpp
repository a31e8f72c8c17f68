#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "leap/kernels.hpp"

namespace leap::kern {

namespace {
std::atomic<int> g_threads{1};

// Work below these sizes is not worth a parallel region.
constexpr long kGemmGrain = 16 * 1024;   // flops-ish
constexpr long kMapGrain = 64 * 1024;    // elements
}  // namespace

void set_threads(int n) {
  if (n < 1) n = 1;
  g_threads.store(n, std::memory_order_relaxed);
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int threads() { return g_threads.load(std::memory_order_relaxed); }

static bool use_par(long work) {
#ifdef _OPENMP
  if (threads() <= 1 || work < kGemmGrain) return false;
  return omp_get_level() == 0;  // no nesting inside doc-parallel regions
#else
  (void)work;
  return false;
#endif
}

void gemm_nn(bool accum, int m, int n, int k, const real* a, const real* b, real* c) {
  if (use_par(static_cast<long>(m) * n * k))
    par::gemm_nn(accum, m, n, k, a, b, c);
  else
    serial::gemm_nn(accum, m, n, k, a, b, c);
}

void gemm_nt(bool accum, int m, int n, int k, const real* a, const real* b, real* c) {
  if (use_par(static_cast<long>(m) * n * k))
    par::gemm_nt(accum, m, n, k, a, b, c);
  else
    serial::gemm_nt(accum, m, n, k, a, b, c);
}

void gemm_tn(bool accum, int m, int n, int k, const real* a, const real* b, real* c) {
  if (use_par(static_cast<long>(m) * n * k))
    par::gemm_tn(accum, m, n, k, a, b, c);
  else
    serial::gemm_tn(accum, m, n, k, a, b, c);
}

void conv1d_fwd(int t_len, int d, int w, int f, const real* x, const real* wts, real* out) {
  if (use_par(static_cast<long>(t_len) * d * w * f))
    par::conv1d_fwd(t_len, d, w, f, x, wts, out);
  else
    serial::conv1d_fwd(t_len, d, w, f, x, wts, out);
}

void conv1d_bwd_x(int t_len, int d, int w, int f, const real* g, const real* wts, real* dx) {
  if (use_par(static_cast<long>(t_len) * d * w * f))
    par::conv1d_bwd_x(t_len, d, w, f, g, wts, dx);
  else
    serial::conv1d_bwd_x(t_len, d, w, f, g, wts, dx);
}

void conv1d_bwd_w(int t_len, int d, int w, int f, const real* x, const real* g, real* dw) {
  if (use_par(static_cast<long>(t_len) * d * w * f))
    par::conv1d_bwd_w(t_len, d, w, f, x, g, dw);
  else
    serial::conv1d_bwd_w(t_len, d, w, f, x, g, dw);
}

void softmax_rows(int rows, int cols, const real* x, real* out) {
  if (use_par(static_cast<long>(rows) * cols) && rows > 1)
    par::softmax_rows(rows, cols, x, out);
  else
    serial::softmax_rows(rows, cols, x, out);
}

void map_activation(int kind, long n, const real* x, real* out) {
  if (threads() > 1 && n >= kMapGrain)
    par::map_activation(kind, n, x, out);
  else
    serial::map_activation(kind, n, x, out);
}

}  // namespace leap::kern
