#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace leap {

using real = double;

// Dense row-major numeric array, rank 1..3. Scalars are rank-1 tensors of
// size 1; there is no broadcasting.
struct Tensor {
  std::vector<real> v;
  std::array<int, 3> dim{0, 0, 0};
  int rank = 0;

  Tensor() = default;

  static Tensor zeros(std::initializer_list<int> shape) {
    Tensor t;
    t.reshape(std::vector<int>(shape));
    return t;
  }

  static Tensor zeros(const std::vector<int>& shape) {
    Tensor t;
    t.reshape(shape);
    return t;
  }

  static Tensor scalar(real x) {
    Tensor t = zeros({1});
    t.v[0] = x;
    return t;
  }

  static Tensor vec(std::initializer_list<real> xs) {
    Tensor t = zeros({static_cast<int>(xs.size())});
    t.v.assign(xs);
    return t;
  }

  static Tensor mat(int r, int c, std::initializer_list<real> xs) {
    Tensor t = zeros({r, c});
    if (static_cast<long>(xs.size()) != t.numel())
      throw std::invalid_argument("Tensor::mat: element count mismatch");
    t.v.assign(xs);
    return t;
  }

  void reshape(const std::vector<int>& shape) {
    if (shape.size() < 1 || shape.size() > 3)
      throw std::invalid_argument("Tensor rank must be 1..3");
    rank = static_cast<int>(shape.size());
    dim = {1, 1, 1};
    int i = 0;
    long n = 1;
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("Tensor dims must be positive");
      dim[i++] = d;
      n *= d;
    }
    v.assign(n, 0.0);
  }

  bool empty() const { return rank == 0; }
  long numel() const { return static_cast<long>(v.size()); }
  int rows() const { return dim[0]; }
  int cols() const { return dim[1]; }

  real item() const {
    if (numel() != 1) throw std::logic_error("item() on non-scalar " + shape_str());
    return v[0];
  }

  real& at(int i) { return v[i]; }
  real at(int i) const { return v[i]; }
  real& at(int i, int j) { return v[static_cast<long>(i) * dim[1] + j]; }
  real at(int i, int j) const { return v[static_cast<long>(i) * dim[1] + j]; }

  real* data() { return v.data(); }
  const real* data() const { return v.data(); }

  bool same_shape(const Tensor& o) const { return rank == o.rank && dim == o.dim; }

  std::string shape_str() const {
    std::string s = "[";
    for (int i = 0; i < rank; ++i) s += (i ? "x" : "") + std::to_string(dim[i]);
    return s + "]";
  }

  bool all_finite() const {
    for (real x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void fill(real x) { std::fill(v.begin(), v.end(), x); }
};

}  // namespace leap
