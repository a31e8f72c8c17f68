// Serial vs OpenMP kernel comparison at production dimensions.
#include <chrono>
#include <cstdio>
#include <vector>

#include "leap/kernels.hpp"
#include "leap/rng.hpp"

using namespace leap;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Tensor randn(std::initializer_list<int> shape, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  for (real& v : t.v) v = rng.uniform(-1, 1);
  return t;
}

template <typename F>
double time_best(F&& fn, int reps) {
  double best = 1e100;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_s();
    fn();
    best = std::min(best, now_s() - t0);
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  int threads = argc > 1 ? std::atoi(argv[1]) : 2;
  Rng rng(42);

  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial_ms", "omp_ms", "speedup");

  {
    const int m = 512, n = 512, k = 512;
    Tensor a = randn({m, k}, rng), b = randn({k, n}, rng), c = Tensor::zeros({m, n});
    const double ts = time_best(
        [&] { kern::serial::gemm_nn(false, m, n, k, a.data(), b.data(), c.data()); }, 3);
    kern::set_threads(threads);
    const double tp = time_best(
        [&] { kern::par::gemm_nn(false, m, n, k, a.data(), b.data(), c.data()); }, 3);
    std::printf("%-28s %10.2f %10.2f %7.2fx\n", "gemm_nn 512^3", ts * 1e3, tp * 1e3, ts / tp);
  }
  {
    // main-cell update at production size: [1200 x 600] x [600]
    const int out = 1200, in = 600;
    Tensor w = randn({out, in}, rng), x = randn({in}, rng), y = Tensor::zeros({out});
    auto loop = [&](auto&& gemm) {
      for (int i = 0; i < 400; ++i) gemm(false, out, 1, in, w.data(), x.data(), y.data());
    };
    const double ts = time_best([&] { loop(kern::serial::gemm_nn); }, 3);
    const double tp = time_best([&] { loop(kern::par::gemm_nn); }, 3);
    std::printf("%-28s %10.2f %10.2f %7.2fx\n", "matvec 1200x600 x400", ts * 1e3, tp * 1e3,
                ts / tp);
  }
  {
    // lookahead conv at production size: T=400, d=300, widths 3/4/5, 60 filters
    const int T = 400, d = 300, f = 60;
    Tensor x = randn({T, d}, rng);
    Tensor w3 = randn({3, d, f}, rng), w4 = randn({4, d, f}, rng), w5 = randn({5, d, f}, rng);
    Tensor o = Tensor::zeros({T, f});
    auto all = [&](auto&& conv) {
      conv(T, d, 3, f, x.data(), w3.data(), o.data());
      conv(T, d, 4, f, x.data(), w4.data(), o.data());
      conv(T, d, 5, f, x.data(), w5.data(), o.data());
    };
    const double ts = time_best([&] { all(kern::serial::conv1d_fwd); }, 3);
    const double tp = time_best([&] { all(kern::par::conv1d_fwd); }, 3);
    std::printf("%-28s %10.2f %10.2f %7.2fx\n", "conv1d 400x300 w3+4+5", ts * 1e3, tp * 1e3,
                ts / tp);
  }
  {
    const int rows = 4096, cols = 256;
    Tensor x = randn({rows, cols}, rng), o = Tensor::zeros({rows, cols});
    const double ts =
        time_best([&] { kern::serial::softmax_rows(rows, cols, x.data(), o.data()); }, 3);
    const double tp =
        time_best([&] { kern::par::softmax_rows(rows, cols, x.data(), o.data()); }, 3);
    std::printf("%-28s %10.2f %10.2f %7.2fx\n", "softmax 4096x256", ts * 1e3, tp * 1e3,
                ts / tp);
  }
  return 0;
}
