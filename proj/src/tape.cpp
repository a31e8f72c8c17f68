#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "leap/kernels.hpp"
#include "leap/tape.hpp"

namespace leap {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// concat geometry: [outer, axis_len, inner]
struct AxisView {
  long outer, axis, inner;
};

AxisView axis_view(const Tensor& t, int axis) {
  AxisView v{1, t.dim[axis], 1};
  for (int i = 0; i < axis; ++i) v.outer *= t.dim[i];
  for (int i = axis + 1; i < t.rank; ++i) v.inner *= t.dim[i];
  return v;
}

}  // namespace

ValueId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<ValueId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(ValueId id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Tensor& v = n.ext ? *n.ext : n.val;
    n.grad.rank = v.rank;
    n.grad.dim = v.dim;
    n.grad.v.assign(v.v.size(), 0.0);
  }
  return n.grad;
}

ValueId Tape::leaf(const Tensor* t) {
  Node n;
  n.op = Op::leaf;
  n.ext = t;
  return push(std::move(n));
}

ValueId Tape::constant(Tensor t) {
  Node n;
  n.op = Op::constant;
  n.val = std::move(t);
  return push(std::move(n));
}

ValueId Tape::matmul(ValueId a, ValueId b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require(ta.rank == 2 && tb.rank == 2 && ta.cols() == tb.rows(),
          "matmul: incompatible shapes " + ta.shape_str() + " and " + tb.shape_str());
  Node n;
  n.op = Op::matmul;
  n.in = {a, b, -1};
  n.val = Tensor::zeros({ta.rows(), tb.cols()});
  kern::gemm_nn(false, ta.rows(), tb.cols(), ta.cols(), ta.data(), tb.data(), n.val.data());
  return push(std::move(n));
}

ValueId Tape::matvec(ValueId w, ValueId x) {
  const Tensor& tw = val(w);
  const Tensor& tx = val(x);
  require(tw.rank == 2 && tx.rank == 1 && tw.cols() == tx.dim[0],
          "matvec: incompatible shapes " + tw.shape_str() + " and " + tx.shape_str());
  Node n;
  n.op = Op::matvec;
  n.in = {w, x, -1};
  n.val = Tensor::zeros({tw.rows()});
  kern::gemm_nn(false, tw.rows(), 1, tw.cols(), tw.data(), tx.data(), n.val.data());
  return push(std::move(n));
}

ValueId Tape::add(ValueId a, ValueId b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require(ta.same_shape(tb), "add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Node n;
  n.op = Op::add;
  n.in = {a, b, -1};
  n.val = ta;
  for (long i = 0; i < tb.numel(); ++i) n.val.v[i] += tb.v[i];
  return push(std::move(n));
}

ValueId Tape::mul(ValueId a, ValueId b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  require(ta.same_shape(tb), "mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Node n;
  n.op = Op::mul;
  n.in = {a, b, -1};
  n.val = ta;
  for (long i = 0; i < tb.numel(); ++i) n.val.v[i] *= tb.v[i];
  return push(std::move(n));
}

ValueId Tape::scale(ValueId x, real a) {
  Node n;
  n.op = Op::scale;
  n.in = {x, -1, -1};
  n.a = a;
  n.val = val(x);
  for (real& v : n.val.v) v *= a;
  return push(std::move(n));
}

ValueId Tape::affine(ValueId x, real a, real b) {
  Node n;
  n.op = Op::affine;
  n.in = {x, -1, -1};
  n.a = a;
  n.b = b;
  n.val = val(x);
  for (real& v : n.val.v) v = a * v + b;
  return push(std::move(n));
}

ValueId Tape::add_rowvec(ValueId m, ValueId v) {
  const Tensor& tm = val(m);
  const Tensor& tv = val(v);
  require(tm.rank == 2 && tv.rank == 1 && tm.cols() == tv.dim[0],
          "add_rowvec: shape mismatch " + tm.shape_str() + " vs " + tv.shape_str());
  Node n;
  n.op = Op::add_rowvec;
  n.in = {m, v, -1};
  n.val = tm;
  for (int i = 0; i < tm.rows(); ++i)
    for (int j = 0; j < tm.cols(); ++j) n.val.at(i, j) += tv.at(j);
  return push(std::move(n));
}

ValueId Tape::activation(ValueId x, Act kind) {
  Node n;
  n.op = Op::activation;
  n.in = {x, -1, -1};
  n.i0 = static_cast<int>(kind);
  const Tensor& tx = val(x);
  n.val.rank = tx.rank;
  n.val.dim = tx.dim;
  n.val.v.resize(tx.v.size());
  kern::map_activation(n.i0, tx.numel(), tx.data(), n.val.data());
  return push(std::move(n));
}

ValueId Tape::softmax(ValueId x) {
  const Tensor& tx = val(x);
  require(tx.rank >= 1, "softmax: empty input");
  Node n;
  n.op = Op::softmax_rows;
  n.in = {x, -1, -1};
  n.val.rank = tx.rank;
  n.val.dim = tx.dim;
  n.val.v.resize(tx.v.size());
  const int cols = tx.dim[tx.rank - 1];
  const int rows = static_cast<int>(tx.numel() / cols);
  kern::softmax_rows(rows, cols, tx.data(), n.val.data());
  return push(std::move(n));
}

ValueId Tape::concat(const std::vector<ValueId>& parts, int axis) {
  require(!parts.empty(), "concat: no parts");
  const Tensor& t0 = val(parts[0]);
  require(axis >= 0 && axis < t0.rank,
          "concat: axis " + std::to_string(axis) + " out of range for " + t0.shape_str());
  long axis_total = 0;
  for (ValueId p : parts) {
    const Tensor& tp = val(p);
    require(tp.rank == t0.rank, "concat: rank mismatch " + tp.shape_str() + " vs " + t0.shape_str());
    for (int i = 0; i < t0.rank; ++i)
      require(i == axis || tp.dim[i] == t0.dim[i],
              "concat: shape mismatch " + tp.shape_str() + " vs " + t0.shape_str());
    axis_total += tp.dim[axis];
  }
  Node n;
  n.op = Op::concat;
  n.in_list = parts;
  n.i0 = axis;
  std::array<int, 3> od = t0.dim;
  od[axis] = static_cast<int>(axis_total);
  n.val.rank = t0.rank;
  n.val.dim = od;
  n.val.v.resize(t0.numel() / t0.dim[axis] * axis_total);
  const AxisView vo = axis_view(n.val, axis);
  long off = 0;
  for (ValueId p : parts) {
    const Tensor& tp = val(p);
    const AxisView vp = axis_view(tp, axis);
    for (long o = 0; o < vp.outer; ++o)
      std::memcpy(n.val.data() + (o * vo.axis + off) * vo.inner,
                  tp.data() + o * vp.axis * vp.inner, sizeof(real) * vp.axis * vp.inner);
    off += vp.axis;
  }
  return push(std::move(n));
}

ValueId Tape::stack_rows(const std::vector<ValueId>& rows) {
  require(!rows.empty(), "stack_rows: no rows");
  const Tensor& t0 = val(rows[0]);
  require(t0.rank == 1, "stack_rows: parts must be rank-1");
  Node n;
  n.op = Op::stack_rows;
  n.in_list = rows;
  n.val = Tensor::zeros({static_cast<int>(rows.size()), t0.dim[0]});
  for (size_t r = 0; r < rows.size(); ++r) {
    const Tensor& tr = val(rows[r]);
    require(tr.same_shape(t0), "stack_rows: shape mismatch " + tr.shape_str() + " vs " + t0.shape_str());
    std::memcpy(n.val.data() + r * t0.dim[0], tr.data(), sizeof(real) * t0.dim[0]);
  }
  return push(std::move(n));
}

ValueId Tape::slice(ValueId x, int begin, int end) {
  const Tensor& tx = val(x);
  require(tx.rank == 1 && begin >= 0 && end <= tx.dim[0] && begin < end,
          "slice: bad range [" + std::to_string(begin) + "," + std::to_string(end) + ") for " +
              tx.shape_str());
  Node n;
  n.op = Op::slice;
  n.in = {x, -1, -1};
  n.i0 = begin;
  n.i1 = end;
  n.val = Tensor::zeros({end - begin});
  std::memcpy(n.val.data(), tx.data() + begin, sizeof(real) * (end - begin));
  return push(std::move(n));
}

ValueId Tape::row(ValueId m, int r) {
  const Tensor& tm = val(m);
  require(tm.rank == 2 && r >= 0 && r < tm.rows(),
          "row: index " + std::to_string(r) + " out of range for " + tm.shape_str());
  Node n;
  n.op = Op::row;
  n.in = {m, -1, -1};
  n.i0 = r;
  n.val = Tensor::zeros({tm.cols()});
  std::memcpy(n.val.data(), tm.data() + static_cast<long>(r) * tm.cols(),
              sizeof(real) * tm.cols());
  return push(std::move(n));
}

ValueId Tape::cross_entropy(ValueId probs, std::vector<int32_t> labels) {
  const Tensor& tp = val(probs);
  require(tp.rank == 2, "cross_entropy: probs must be rank-2, got " + tp.shape_str());
  require(static_cast<int>(labels.size()) == tp.rows(),
          "cross_entropy: label count " + std::to_string(labels.size()) + " vs " + tp.shape_str());
  const int k = tp.cols();
  for (int b = 0; b < tp.rows(); ++b) {
    require(labels[b] >= 0 && labels[b] < k,
            "cross_entropy: label " + std::to_string(labels[b]) + " out of range [0," +
                std::to_string(k) + ")");
    real s = 0;
    for (int j = 0; j < k; ++j) s += tp.at(b, j);
    require(std::abs(s - 1.0) < 1e-4, "cross_entropy: row " + std::to_string(b) +
                                          " does not sum to 1 (sum=" + std::to_string(s) + ")");
  }
  Node n;
  n.op = Op::cross_entropy;
  n.in = {probs, -1, -1};
  n.idx = std::move(labels);
  real loss = 0;
  for (int b = 0; b < tp.rows(); ++b)
    loss -= std::log(std::max(tp.at(b, n.idx[b]), kProbFloor));
  n.val = Tensor::scalar(loss / tp.rows());
  return push(std::move(n));
}

ValueId Tape::gumbel_softmax(ValueId pi, real tau, Tensor noise) {
  const Tensor& tp = val(pi);
  require(tau > 0, "gumbel_softmax: tau must be positive, got " + std::to_string(tau));
  require(tp.rank == 1 && noise.same_shape(tp),
          "gumbel_softmax: noise shape " + noise.shape_str() + " vs pi " + tp.shape_str());
  Node n;
  n.op = Op::gumbel;
  n.in = {pi, -1, -1};
  n.a = tau;
  n.aux = std::move(noise);
  const int k = tp.dim[0];
  Tensor z = Tensor::zeros({k});
  for (int i = 0; i < k; ++i)
    z.v[i] = (std::log(std::max(tp.v[i], kProbFloor)) + n.aux.v[i]) / tau;
  n.val = Tensor::zeros({k});
  kern::softmax_rows(1, k, z.data(), n.val.data());
  return push(std::move(n));
}

ValueId Tape::embed(ValueId table, std::vector<int32_t> ids) {
  const Tensor& tt = val(table);
  require(tt.rank == 2, "embed: table must be rank-2, got " + tt.shape_str());
  for (int32_t id : ids)
    require(id >= 0 && id < tt.rows(),
            "embed: id " + std::to_string(id) + " out of range for " + tt.shape_str());
  Node n;
  n.op = Op::embed;
  n.in = {table, -1, -1};
  const int d = tt.cols();
  n.val = Tensor::zeros({static_cast<int>(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i)
    std::memcpy(n.val.data() + i * d, tt.data() + static_cast<long>(ids[i]) * d,
                sizeof(real) * d);
  n.idx = std::move(ids);
  return push(std::move(n));
}

ValueId Tape::conv1d(ValueId x, ValueId filters) {
  const Tensor& tx = val(x);
  const Tensor& tf = val(filters);
  require(tx.rank == 2 && tf.rank == 3 && tf.dim[1] == tx.cols(),
          "conv1d: incompatible shapes " + tx.shape_str() + " and " + tf.shape_str());
  const int w = tf.dim[0], d = tf.dim[1], f = tf.dim[2];
  Node n;
  n.op = Op::conv1d;
  n.in = {x, filters, -1};
  n.i0 = w;
  n.val = Tensor::zeros({tx.rows(), f});
  kern::conv1d_fwd(tx.rows(), d, w, f, tx.data(), tf.data(), n.val.data());
  return push(std::move(n));
}

ValueId Tape::scale_by(ValueId x, ValueId scalar) {
  const Tensor& ts = val(scalar);
  require(ts.numel() == 1, "scale_by: scalar operand has shape " + ts.shape_str());
  Node n;
  n.op = Op::scale_by;
  n.in = {x, scalar, -1};
  n.val = val(x);
  const real s = ts.v[0];
  for (real& v : n.val.v) v *= s;
  return push(std::move(n));
}

ValueId Tape::sum(ValueId x) {
  Node n;
  n.op = Op::sum_all;
  n.in = {x, -1, -1};
  real s = 0;
  for (real v : val(x).v) s += v;
  n.val = Tensor::scalar(s);
  return push(std::move(n));
}

void Tape::backward(ValueId loss) { backward({{loss, 1.0}}); }

void Tape::backward(const std::vector<std::pair<ValueId, real>>& seeds) {
  for (Node& n : nodes_) n.grad = Tensor{};
  for (const auto& [id, w] : seeds) {
    require(id >= 0 && id < static_cast<ValueId>(nodes_.size()), "backward: bad seed id");
    require(val(id).numel() == 1,
            "backward: loss must be scalar, got " + val(id).shape_str());
    grad_buf(id).v[0] += w;
  }

  // nodes_ is not resized during backward, so references stay valid.
  for (ValueId id = static_cast<ValueId>(nodes_.size()) - 1; id >= 0; --id) {
    if (nodes_[id].grad.empty()) continue;
    const Node& n = nodes_[id];
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::leaf:
      case Op::constant:
        break;
      case Op::matmul: {
        const Tensor& a = val(n.in[0]);
        const Tensor& b = val(n.in[1]);
        kern::gemm_nt(true, a.rows(), a.cols(), b.cols(), g.data(), b.data(),
                      grad_buf(n.in[0]).data());
        kern::gemm_tn(true, b.rows(), b.cols(), a.rows(), a.data(), g.data(),
                      grad_buf(n.in[1]).data());
        break;
      }
      case Op::matvec: {
        const Tensor& w = val(n.in[0]);
        const Tensor& x = val(n.in[1]);
        kern::gemm_nn(true, w.rows(), w.cols(), 1, g.data(), x.data(),
                      grad_buf(n.in[0]).data());
        kern::gemm_tn(true, w.cols(), 1, w.rows(), w.data(), g.data(),
                      grad_buf(n.in[1]).data());
        break;
      }
      case Op::add: {
        Tensor& ga = grad_buf(n.in[0]);
        Tensor& gb = grad_buf(n.in[1]);
        for (long i = 0; i < g.numel(); ++i) {
          ga.v[i] += g.v[i];
          gb.v[i] += g.v[i];
        }
        break;
      }
      case Op::mul: {
        const Tensor& a = val(n.in[0]);
        const Tensor& b = val(n.in[1]);
        Tensor& ga = grad_buf(n.in[0]);
        Tensor& gb = grad_buf(n.in[1]);
        for (long i = 0; i < g.numel(); ++i) {
          ga.v[i] += g.v[i] * b.v[i];
          gb.v[i] += g.v[i] * a.v[i];
        }
        break;
      }
      case Op::scale:
      case Op::affine: {
        Tensor& gx = grad_buf(n.in[0]);
        for (long i = 0; i < g.numel(); ++i) gx.v[i] += n.a * g.v[i];
        break;
      }
      case Op::add_rowvec: {
        Tensor& gm = grad_buf(n.in[0]);
        Tensor& gv = grad_buf(n.in[1]);
        const int r = n.val.rows(), c = n.val.cols();
        for (long i = 0; i < g.numel(); ++i) gm.v[i] += g.v[i];
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gv.v[j] += g.v[static_cast<long>(i) * c + j];
        break;
      }
      case Op::activation: {
        const Tensor& x = val(n.in[0]);
        const Tensor& y = n.val;
        Tensor& gx = grad_buf(n.in[0]);
        switch (n.i0) {
          case 0:
            for (long i = 0; i < g.numel(); ++i) gx.v[i] += x.v[i] > 0 ? g.v[i] : 0;
            break;
          case 1:
            for (long i = 0; i < g.numel(); ++i) gx.v[i] += g.v[i] * y.v[i] * (1 - y.v[i]);
            break;
          default:
            for (long i = 0; i < g.numel(); ++i) gx.v[i] += g.v[i] * (1 - y.v[i] * y.v[i]);
            break;
        }
        break;
      }
      case Op::softmax_rows: {
        const Tensor& y = n.val;
        Tensor& gx = grad_buf(n.in[0]);
        const int cols = y.dim[y.rank - 1];
        const int rows = static_cast<int>(y.numel() / cols);
        for (int i = 0; i < rows; ++i) {
          const real* yi = y.data() + static_cast<long>(i) * cols;
          const real* gi = g.data() + static_cast<long>(i) * cols;
          real dot = 0;
          for (int j = 0; j < cols; ++j) dot += gi[j] * yi[j];
          real* go = gx.data() + static_cast<long>(i) * cols;
          for (int j = 0; j < cols; ++j) go[j] += yi[j] * (gi[j] - dot);
        }
        break;
      }
      case Op::concat: {
        const int axis = n.i0;
        const AxisView vo = axis_view(n.val, axis);
        long off = 0;
        for (ValueId p : n.in_list) {
          const Tensor& tp = val(p);
          const AxisView vp = axis_view(tp, axis);
          Tensor& gp = grad_buf(p);
          for (long o = 0; o < vp.outer; ++o) {
            const real* src = g.data() + (o * vo.axis + off) * vo.inner;
            real* dst = gp.data() + o * vp.axis * vp.inner;
            for (long i = 0; i < vp.axis * vp.inner; ++i) dst[i] += src[i];
          }
          off += vp.axis;
        }
        break;
      }
      case Op::stack_rows: {
        const int c = n.val.cols();
        for (size_t r = 0; r < n.in_list.size(); ++r) {
          Tensor& gp = grad_buf(n.in_list[r]);
          const real* src = g.data() + r * c;
          for (int j = 0; j < c; ++j) gp.v[j] += src[j];
        }
        break;
      }
      case Op::slice: {
        Tensor& gx = grad_buf(n.in[0]);
        for (int i = n.i0; i < n.i1; ++i) gx.v[i] += g.v[i - n.i0];
        break;
      }
      case Op::row: {
        Tensor& gm = grad_buf(n.in[0]);
        const int c = n.val.dim[0];
        real* dst = gm.data() + static_cast<long>(n.i0) * c;
        for (int j = 0; j < c; ++j) dst[j] += g.v[j];
        break;
      }
      case Op::cross_entropy: {
        const Tensor& p = val(n.in[0]);
        Tensor& gp = grad_buf(n.in[0]);
        const real gs = g.v[0] / p.rows();
        for (int b = 0; b < p.rows(); ++b) {
          const real pv = p.at(b, n.idx[b]);
          if (pv >= kProbFloor)
            gp.v[static_cast<long>(b) * p.cols() + n.idx[b]] -= gs / pv;
        }
        break;
      }
      case Op::gumbel: {
        const Tensor& pi = val(n.in[0]);
        const Tensor& y = n.val;
        Tensor& gp = grad_buf(n.in[0]);
        const int k = y.dim[0];
        real dot = 0;
        for (int j = 0; j < k; ++j) dot += g.v[j] * y.v[j];
        for (int j = 0; j < k; ++j) {
          const real dz = y.v[j] * (g.v[j] - dot);
          if (pi.v[j] >= kProbFloor) gp.v[j] += dz / (n.a * pi.v[j]);
        }
        break;
      }
      case Op::embed: {
        const Tensor& t = val(n.in[0]);
        Tensor& gt = grad_buf(n.in[0]);
        const int d = t.cols();
        for (size_t i = 0; i < n.idx.size(); ++i) {
          real* dst = gt.data() + static_cast<long>(n.idx[i]) * d;
          const real* src = g.data() + i * d;
          for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
        break;
      }
      case Op::conv1d: {
        const Tensor& x = val(n.in[0]);
        const Tensor& tf = val(n.in[1]);
        const int w = tf.dim[0], d = tf.dim[1], f = tf.dim[2];
        kern::conv1d_bwd_x(x.rows(), d, w, f, g.data(), tf.data(), grad_buf(n.in[0]).data());
        kern::conv1d_bwd_w(x.rows(), d, w, f, x.data(), g.data(), grad_buf(n.in[1]).data());
        break;
      }
      case Op::scale_by: {
        const Tensor& x = val(n.in[0]);
        const real s = val(n.in[1]).v[0];
        Tensor& gx = grad_buf(n.in[0]);
        Tensor& gs = grad_buf(n.in[1]);
        real dot = 0;
        for (long i = 0; i < g.numel(); ++i) {
          gx.v[i] += s * g.v[i];
          dot += g.v[i] * x.v[i];
        }
        gs.v[0] += dot;
        break;
      }
      case Op::sum_all: {
        Tensor& gx = grad_buf(n.in[0]);
        for (real& v : gx.v) v += g.v[0];
        break;
      }
    }
  }
}

Tensor sample_gumbel(Rng& rng, int k) {
  Tensor t = Tensor::zeros({k});
  for (int i = 0; i < k; ++i) t.v[i] = rng.gumbel();
  return t;
}

Tensor gumbel_softmax_sample(const Tensor& pi, real tau, Rng& rng) {
  if (tau <= 0)
    throw std::invalid_argument("gumbel_softmax_sample: tau must be positive");
  Tensor noise = sample_gumbel(rng, pi.dim[0]);
  Tensor z = Tensor::zeros({pi.dim[0]});
  for (int i = 0; i < pi.dim[0]; ++i)
    z.v[i] = (std::log(std::max(pi.v[i], kProbFloor)) + noise.v[i]) / tau;
  Tensor y = Tensor::zeros({pi.dim[0]});
  kern::softmax_rows(1, pi.dim[0], z.data(), y.data());
  return y;
}

}  // namespace leap
