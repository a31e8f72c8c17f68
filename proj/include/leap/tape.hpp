#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "leap/rng.hpp"
#include "leap/tensor.hpp"

namespace leap {

using ValueId = int32_t;

enum class Act : int { relu = 0, sigmoid = 1, tanh = 2 };

// Floor applied to probabilities before any log.
constexpr real kProbFloor = 1e-12;

enum class Op : uint8_t {
  leaf,          // external parameter tensor
  constant,      // owned value, gradient discarded
  matmul,        // [m x k] * [k x n]
  matvec,        // [m x k] * [k]
  add,           // same shape
  mul,           // same shape, elementwise
  scale,         // x * a
  affine,        // a*x + b elementwise
  add_rowvec,    // [m x n] + [n] broadcast over rows
  activation,    // relu | sigmoid | tanh
  softmax_rows,  // stabilized, last dim
  concat,        // along axis, aux inputs
  stack_rows,    // rank-1 parts -> [parts x n]
  slice,         // rank-1 [b, e)
  row,           // matrix row -> rank-1
  cross_entropy, // mean over rows of -log p[label]
  gumbel,        // gumbel-softmax sample, noise fixed in aux
  embed,         // table [V x d], ids -> [n x d]
  conv1d,        // x [T x d], filters [w, d, F] -> [T x F]
  scale_by,      // x * s, s a scalar tensor (grads to both)
  sum_all,       // -> scalar
};

struct Node {
  Op op;
  std::array<ValueId, 3> in{-1, -1, -1};
  std::vector<ValueId> in_list;  // concat / stack_rows
  Tensor val;
  Tensor grad;                   // empty until touched by backward
  const Tensor* ext = nullptr;   // leaf storage
  real a = 0, b = 0;             // scale / affine coefficients, gumbel tau
  int i0 = 0, i1 = 0;            // slice bounds, conv width, concat axis
  std::vector<int32_t> idx;      // embed ids, cross-entropy labels
  Tensor aux;                    // gumbel noise
};

// Reverse-mode computation tape. Records each executed op; backward walks
// the record in reverse (reverse topological order by construction) and
// accumulates gradients. A tape is a single-threaded object; kernels it
// calls may use worker threads internally.
class Tape {
 public:
  ValueId leaf(const Tensor* t);
  ValueId constant(Tensor t);

  ValueId matmul(ValueId a, ValueId b);
  ValueId matvec(ValueId w, ValueId x);
  ValueId add(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);
  ValueId scale(ValueId x, real a);
  ValueId affine(ValueId x, real a, real b);
  ValueId add_rowvec(ValueId m, ValueId v);
  ValueId activation(ValueId x, Act kind);
  ValueId softmax(ValueId x);
  ValueId concat(const std::vector<ValueId>& parts, int axis);
  ValueId stack_rows(const std::vector<ValueId>& rows);
  ValueId slice(ValueId x, int begin, int end);
  ValueId row(ValueId m, int r);
  ValueId cross_entropy(ValueId probs, std::vector<int32_t> labels);
  ValueId gumbel_softmax(ValueId pi, real tau, Tensor noise);
  ValueId embed(ValueId table, std::vector<int32_t> ids);
  ValueId conv1d(ValueId x, ValueId filters);
  ValueId scale_by(ValueId x, ValueId scalar);
  ValueId sum(ValueId x);

  // References are invalidated by the next recorded op; copy the tensor to
  // keep it across further graph construction.
  const Tensor& val(ValueId id) const { return nodes_[id].ext ? *nodes_[id].ext : nodes_[id].val; }
  // Zero-size tensor when the value was unreachable from the loss.
  const Tensor& grad(ValueId id) const { return nodes_[id].grad; }

  void backward(ValueId loss);
  void backward(const std::vector<std::pair<ValueId, real>>& seeds);

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  ValueId push(Node n);
  Tensor& grad_buf(ValueId id);
  void check_finite_inputs(const Tensor& t) const;

  std::vector<Node> nodes_;
};

// Draws k iid Gumbel(0,1) values: -log(-log u), u ~ U(0,1).
Tensor sample_gumbel(Rng& rng, int k);

// Convenience sampler matching gumbel-softmax semantics without a tape.
Tensor gumbel_softmax_sample(const Tensor& pi, real tau, Rng& rng);

}  // namespace leap
