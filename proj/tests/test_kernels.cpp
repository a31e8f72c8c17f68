#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "leap/kernels.hpp"
#include "leap/rng.hpp"
#include "support/fd_check.hpp"

using namespace leap;
using leap::testing::random_tensor;

namespace {

// Naive reference, deliberately different loop order from the kernels.
void naive_gemm(int m, int n, int k, const real* a, const real* b, real* c) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      real s = 0;
      for (int l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
      c[i * n + j] = s;
    }
}

}  // namespace

TEST_CASE("serial gemm matches naive triple loop") {
  Rng rng(5);
  for (auto [m, n, k] : std::vector<std::array<int, 3>>{{{3, 4, 5}}, {{1, 7, 2}}, {{8, 8, 8}}}) {
    Tensor a = random_tensor({m, k}, rng);
    Tensor b = random_tensor({k, n}, rng);
    std::vector<real> want(m * n), got(m * n);
    naive_gemm(m, n, k, a.data(), b.data(), want.data());
    kern::serial::gemm_nn(false, m, n, k, a.data(), b.data(), got.data());
    for (int i = 0; i < m * n; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("parallel lane is bit-identical to the serial lane") {
  Rng rng(9);
  kern::set_threads(2);
  const int m = 37, n = 53, k = 41;
  Tensor a = random_tensor({m, k}, rng);
  Tensor b = random_tensor({k, n}, rng);
  Tensor bt = random_tensor({n, k}, rng);
  Tensor at = random_tensor({k, m}, rng);

  std::vector<real> s1(m * n, 0.5), p1(m * n, 0.5);
  kern::serial::gemm_nn(true, m, n, k, a.data(), b.data(), s1.data());
  kern::par::gemm_nn(true, m, n, k, a.data(), b.data(), p1.data());
  CHECK(s1 == p1);

  std::vector<real> s2(m * n, 0.25), p2(m * n, 0.25);
  kern::serial::gemm_nt(true, m, n, k, a.data(), bt.data(), s2.data());
  kern::par::gemm_nt(true, m, n, k, a.data(), bt.data(), p2.data());
  CHECK(s2 == p2);

  std::vector<real> s3(m * n, -1.0), p3(m * n, -1.0);
  kern::serial::gemm_tn(true, m, n, k, at.data(), b.data(), s3.data());
  kern::par::gemm_tn(true, m, n, k, at.data(), b.data(), p3.data());
  CHECK(s3 == p3);

  const int T = 33, d = 12, w = 5, f = 7;
  Tensor x = random_tensor({T, d}, rng);
  Tensor wt = random_tensor({w, d, f}, rng);
  std::vector<real> cs(T * f), cp(T * f);
  kern::serial::conv1d_fwd(T, d, w, f, x.data(), wt.data(), cs.data());
  kern::par::conv1d_fwd(T, d, w, f, x.data(), wt.data(), cp.data());
  CHECK(cs == cp);

  Tensor g = random_tensor({T, f}, rng);
  std::vector<real> dxs(T * d, 0.0), dxp(T * d, 0.0);
  kern::serial::conv1d_bwd_x(T, d, w, f, g.data(), wt.data(), dxs.data());
  kern::par::conv1d_bwd_x(T, d, w, f, g.data(), wt.data(), dxp.data());
  CHECK(dxs == dxp);

  std::vector<real> dws(w * d * f, 0.0), dwp(w * d * f, 0.0);
  kern::serial::conv1d_bwd_w(T, d, w, f, x.data(), g.data(), dws.data());
  kern::par::conv1d_bwd_w(T, d, w, f, x.data(), g.data(), dwp.data());
  CHECK(dws == dwp);

  std::vector<real> sm_s(T * f), sm_p(T * f);
  kern::serial::softmax_rows(T, f, g.data(), sm_s.data());
  kern::par::softmax_rows(T, f, g.data(), sm_p.data());
  CHECK(sm_s == sm_p);
  kern::set_threads(1);
}

TEST_CASE("gemm backward identities hold numerically") {
  // dA = G B^T and dB = A^T G reproduce finite differences of sum(A B).
  Rng rng(21);
  const int m = 4, n = 3, k = 5;
  Tensor a = random_tensor({m, k}, rng);
  Tensor b = random_tensor({k, n}, rng);
  auto eval = [&]() {
    std::vector<real> c(m * n);
    kern::serial::gemm_nn(false, m, n, k, a.data(), b.data(), c.data());
    real s = 0;
    for (real v : c) s += v;
    return s;
  };
  std::vector<real> ones(m * n, 1.0);
  Tensor da = Tensor::zeros({m, k});
  kern::serial::gemm_nt(true, m, k, n, ones.data(), b.data(), da.data());
  auto ra = leap::testing::fd_compare(a, eval, da);
  CHECK(ra.ok);
  Tensor db = Tensor::zeros({k, n});
  kern::serial::gemm_tn(true, k, n, m, a.data(), ones.data(), db.data());
  auto rb = leap::testing::fd_compare(b, eval, db);
  CHECK(rb.ok);
}
