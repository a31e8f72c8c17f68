#pragma once

#include "leap/tensor.hpp"

namespace leap::kern {

// Global worker-thread count. 1 selects the serial lane; >1 selects the
// OpenMP lane. Both lanes partition work by output element, so results are
// bit-identical across thread counts.
void set_threads(int n);
int threads();

namespace serial {
void gemm_nn(bool accum, int m, int n, int k, const real* a, const real* b, real* c);
void gemm_nt(bool accum, int m, int n, int k, const real* a, const real* b, real* c);
void gemm_tn(bool accum, int m, int n, int k, const real* a, const real* b, real* c);
void conv1d_fwd(int t_len, int d, int w, int f, const real* x, const real* wts, real* out);
void conv1d_bwd_x(int t_len, int d, int w, int f, const real* g, const real* wts, real* dx);
void conv1d_bwd_w(int t_len, int d, int w, int f, const real* x, const real* g, real* dw);
void softmax_rows(int rows, int cols, const real* x, real* out);
void map_activation(int kind, long n, const real* x, real* out);
}  // namespace serial

namespace par {
void gemm_nn(bool accum, int m, int n, int k, const real* a, const real* b, real* c);
void gemm_nt(bool accum, int m, int n, int k, const real* a, const real* b, real* c);
void gemm_tn(bool accum, int m, int n, int k, const real* a, const real* b, real* c);
void conv1d_fwd(int t_len, int d, int w, int f, const real* x, const real* wts, real* out);
void conv1d_bwd_x(int t_len, int d, int w, int f, const real* g, const real* wts, real* dx);
void conv1d_bwd_w(int t_len, int d, int w, int f, const real* x, const real* g, real* dw);
void softmax_rows(int rows, int cols, const real* x, real* out);
void map_activation(int kind, long n, const real* x, real* out);
}  // namespace par

// Dispatching entry points used by the tape and the inference path.
// c [m x n] (=|+=) a [m x k] * b [k x n]
void gemm_nn(bool accum, int m, int n, int k, const real* a, const real* b, real* c);
// c [m x n] += a [m x k] * b^T, b stored [n x k]
void gemm_nt(bool accum, int m, int n, int k, const real* a, const real* b, real* c);
// c [m x n] += a^T * b, a stored [k x m], b [k x n]
void gemm_tn(bool accum, int m, int n, int k, const real* a, const real* b, real* c);

// 1-d convolution over a [t_len x d] sequence with window w and f filters,
// zero-padded past the end so every position yields an output row.
// wts is [w*d x f] row-major (window offset o, channel j -> row o*d+j).
void conv1d_fwd(int t_len, int d, int w, int f, const real* x, const real* wts, real* out);
void conv1d_bwd_x(int t_len, int d, int w, int f, const real* g, const real* wts, real* dx);
void conv1d_bwd_w(int t_len, int d, int w, int f, const real* x, const real* g, real* dw);

// Row-wise softmax with max subtraction.
void softmax_rows(int rows, int cols, const real* x, real* out);

// kind: 0=relu 1=sigmoid 2=tanh
void map_activation(int kind, long n, const real* x, real* out);

}  // namespace leap::kern
