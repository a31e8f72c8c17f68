#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "leap/tape.hpp"
#include "support/fd_check.hpp"

using namespace leap;
using leap::testing::fd_compare;
using leap::testing::describe;
using leap::testing::random_tensor;

namespace {

// Runs fd_compare for a scalar function of one input tensor built on a
// fresh tape each evaluation.
void check_grad(Tensor& x, const std::function<ValueId(Tape&, ValueId)>& build,
                real step = 1e-5, real rel_tol = 1e-6, real abs_floor = 1e-8) {
  auto eval = [&]() {
    Tape t;
    ValueId xi = t.leaf(&x);
    return t.val(build(t, xi)).item();
  };
  Tape t;
  ValueId xi = t.leaf(&x);
  ValueId loss = build(t, xi);
  t.backward(loss);
  auto r = fd_compare(x, eval, t.grad(xi), step, rel_tol, abs_floor);
  INFO(describe(r));
  CHECK(r.ok);
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
  Rng rng(7);
  Tensor a = random_tensor({3, 3}, rng);
  Tensor id = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) id.at(i, i) = 1.0;
  Tape t;
  ValueId p = t.matmul(t.constant(id), t.leaf(&a));
  for (long i = 0; i < a.numel(); ++i) CHECK(t.val(p).v[i] == doctest::Approx(a.v[i]));

  Tensor m = Tensor::mat(2, 2, {1, 2, 3, 4});
  Tensor ones = Tensor::mat(2, 1, {1, 1});
  Tape t2;
  ValueId q = t2.matmul(t2.constant(m), t2.constant(ones));
  CHECK(t2.val(q).at(0, 0) == doctest::Approx(3));
  CHECK(t2.val(q).at(1, 0) == doctest::Approx(7));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape t;
  ValueId a = t.constant(Tensor::zeros({2, 3}));
  ValueId b = t.constant(Tensor::zeros({4, 2}));
  try {
    t.matmul(a, b);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient vs finite differences, both operands") {
  Rng rng(11);
  Tensor a = random_tensor({4, 5}, rng);
  Tensor b = random_tensor({5, 3}, rng);
  auto eval = [&]() {
    Tape t;
    return t.val(t.sum(t.matmul(t.leaf(&a), t.leaf(&b)))).item();
  };
  Tape t;
  ValueId ai = t.leaf(&a), bi = t.leaf(&b);
  t.backward(t.sum(t.matmul(ai, bi)));
  auto ra = fd_compare(a, eval, t.grad(ai));
  INFO("a: " << describe(ra));
  CHECK(ra.ok);
  auto rb = fd_compare(b, eval, t.grad(bi));
  INFO("b: " << describe(rb));
  CHECK(rb.ok);
}

TEST_CASE("activations: values") {
  Tape t;
  ValueId x = t.constant(Tensor::vec({0.0, -3.2, 3.2}));
  const Tensor& sig = t.val(t.activation(x, Act::sigmoid));
  CHECK(sig.v[0] == doctest::Approx(0.5));
  const Tensor& rl = t.val(t.activation(x, Act::relu));
  CHECK(rl.v[1] == 0.0);
  CHECK(rl.v[2] == doctest::Approx(3.2));
}

TEST_CASE("tanh gradient at 0.7 within 1e-8 of finite differences") {
  Tensor x = Tensor::vec({0.7});
  auto eval = [&]() {
    Tape t;
    return t.val(t.sum(t.activation(t.leaf(&x), Act::tanh))).item();
  };
  Tape t;
  ValueId xi = t.leaf(&x);
  t.backward(t.sum(t.activation(xi, Act::tanh)));
  const real fd = [&] {
    const real h = 1e-6;
    x.v[0] = 0.7 + h;
    real fp = eval();
    x.v[0] = 0.7 - h;
    real fm = eval();
    x.v[0] = 0.7;
    return (fp - fm) / (2 * h);
  }();
  CHECK(std::abs(t.grad(xi).v[0] - fd) < 1e-8);
}

TEST_CASE("activation gradients on random shapes") {
  Rng rng(13);
  for (Act kind : {Act::sigmoid, Act::tanh, Act::relu}) {
    for (auto shape : std::vector<std::vector<int>>{{7}, {3, 4}, {2, 3, 2}}) {
      Tensor x = random_tensor(shape, rng);
      // keep relu inputs away from the kink
      for (real& v : x.v)
        if (std::abs(v) < 1e-3) v += 0.01;
      check_grad(x, [&](Tape& t, ValueId xi) { return t.sum(t.activation(xi, kind)); });
    }
  }
}

TEST_CASE("softmax values: uniform, stability, hand arithmetic") {
  Tape t;
  const Tensor& y0 = t.val(t.softmax(t.constant(Tensor::vec({0.0, 0.0}))));
  CHECK(y0.v[0] == doctest::Approx(0.5));
  const Tensor& y1 = t.val(t.softmax(t.constant(Tensor::vec({1000.0, 1000.0}))));
  CHECK(y1.v[0] == doctest::Approx(0.5));
  CHECK(y1.all_finite());
  const Tensor& y2 =
      t.val(t.softmax(t.constant(Tensor::vec({std::log(1.0), std::log(3.0)}))));
  CHECK(y2.v[0] == doctest::Approx(0.25));
  CHECK(y2.v[1] == doctest::Approx(0.75));
}

TEST_CASE("softmax stays normalized and finite up to magnitude 1e4") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({4, 6}, rng, -1e4, 1e4);
    Tape t;
    const Tensor& y = t.val(t.softmax(t.constant(x)));
    REQUIRE(y.all_finite());
    for (int i = 0; i < 4; ++i) {
      real s = 0;
      for (int j = 0; j < 6; ++j) {
        CHECK(y.at(i, j) >= 0.0);
        CHECK(y.at(i, j) <= 1.0);
        s += y.at(i, j);
      }
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
  // entries stay strictly inside (0,1) when the row spread is small enough
  // for binary64 (large magnitudes are fine; only the spread matters)
  for (int trial = 0; trial < 20; ++trial) {
    const real center = rng.uniform(-1e4, 1e4);
    Tensor x = Tensor::zeros({6});
    for (real& v : x.v) v = center + rng.uniform(-15, 15);
    Tape t;
    const Tensor& y = t.val(t.softmax(t.constant(x)));
    for (int j = 0; j < 6; ++j) {
      CHECK(y.v[j] > 0.0);
      CHECK(y.v[j] < 1.0);
    }
  }
}

TEST_CASE("softmax gradient on random shapes") {
  Rng rng(19);
  for (auto shape : std::vector<std::vector<int>>{{5}, {2, 4}, {3, 2}}) {
    Tensor x = random_tensor(shape, rng, -2, 2);
    Tensor w = random_tensor(shape, rng);  // random projection -> scalar
    check_grad(x, [&](Tape& t, ValueId xi) {
      return t.sum(t.mul(t.softmax(xi), t.constant(w)));
    });
  }
}

TEST_CASE("concat: triple of dims 300/300/200 gives 800, single part identity") {
  Tape t;
  ValueId a = t.constant(Tensor::zeros({300}));
  ValueId b = t.constant(Tensor::zeros({300}));
  ValueId c = t.constant(Tensor::zeros({200}));
  CHECK(t.val(t.concat({a, b, c}, 0)).dim[0] == 800);

  Rng rng(3);
  Tensor x = random_tensor({7}, rng);
  ValueId one = t.concat({t.constant(x)}, 0);
  for (int i = 0; i < 7; ++i) CHECK(t.val(one).v[i] == x.v[i]);
}

TEST_CASE("concat errors: bad axis, incompatible shapes") {
  Tape t;
  ValueId a = t.constant(Tensor::zeros({2, 3}));
  ValueId b = t.constant(Tensor::zeros({3, 3}));
  CHECK_THROWS_AS(t.concat({a, b}, 2), std::invalid_argument);
  CHECK_THROWS_AS(t.concat({a, b}, 1), std::invalid_argument);
  CHECK_NOTHROW(t.concat({a, b}, 0));
}

TEST_CASE("concat gradient routing on random 3-part concat") {
  Rng rng(23);
  Tensor p0 = random_tensor({4}, rng), p1 = random_tensor({2}, rng),
         p2 = random_tensor({5}, rng);
  Tensor w = random_tensor({11}, rng);
  auto eval = [&]() {
    Tape t;
    ValueId cat = t.concat({t.leaf(&p0), t.leaf(&p1), t.leaf(&p2)}, 0);
    return t.val(t.sum(t.mul(cat, t.constant(w)))).item();
  };
  Tape t;
  ValueId i0 = t.leaf(&p0), i1 = t.leaf(&p1), i2 = t.leaf(&p2);
  t.backward(t.sum(t.mul(t.concat({i0, i1, i2}, 0), t.constant(w))));
  for (auto [tensor, id] : {std::pair{&p0, i0}, {&p1, i1}, {&p2, i2}}) {
    auto r = fd_compare(*tensor, eval, t.grad(id));
    INFO(describe(r));
    CHECK(r.ok);
  }
}

TEST_CASE("2-d concat along columns routes gradients") {
  Rng rng(29);
  Tensor a = random_tensor({3, 2}, rng), b = random_tensor({3, 4}, rng);
  Tensor w = random_tensor({3, 6}, rng);
  auto eval = [&]() {
    Tape t;
    ValueId cat = t.concat({t.leaf(&a), t.leaf(&b)}, 1);
    return t.val(t.sum(t.mul(cat, t.constant(w)))).item();
  };
  Tape t;
  ValueId ai = t.leaf(&a), bi = t.leaf(&b);
  t.backward(t.sum(t.mul(t.concat({ai, bi}, 1), t.constant(w))));
  CHECK(fd_compare(a, eval, t.grad(ai)).ok);
  CHECK(fd_compare(b, eval, t.grad(bi)).ok);
}

TEST_CASE("cross entropy: perfect prediction, uniform case, label range") {
  Tape t;
  Tensor perfect = Tensor::mat(1, 3, {0, 1, 0});
  CHECK(t.val(t.cross_entropy(t.constant(perfect), {1})).item() ==
        doctest::Approx(0.0).epsilon(1e-9));
  Tensor uniform = Tensor::mat(2, 4, {0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25});
  CHECK(t.val(t.cross_entropy(t.constant(uniform), {0, 3})).item() ==
        doctest::Approx(std::log(4.0)));
  CHECK_THROWS_AS(t.cross_entropy(t.constant(uniform), {0, 4}), std::invalid_argument);
}

TEST_CASE("cross entropy through softmax gradient equals probs minus onehot") {
  Rng rng(31);
  Tensor logits = random_tensor({3, 5}, rng, -2, 2);
  std::vector<int32_t> labels{2, 0, 4};
  Tape t;
  ValueId li = t.leaf(&logits);
  ValueId probs = t.softmax(li);
  t.backward(t.cross_entropy(probs, labels));
  const Tensor& p = t.val(probs);
  const Tensor& g = t.grad(li);
  for (int b = 0; b < 3; ++b)
    for (int j = 0; j < 5; ++j) {
      const real expect = (p.at(b, j) - (labels[b] == j ? 1.0 : 0.0)) / 3.0;
      CHECK(std::abs(g.at(b, j) - expect) < 1e-8);
    }
}

TEST_CASE("gumbel softmax: argmax one-hot limit with fixed noise") {
  Tensor pi = Tensor::vec({0.5, 0.5});
  Tensor noise = Tensor::vec({0.3, 0.1});
  Tape t;
  const Tensor& y = t.val(t.gumbel_softmax(t.constant(pi), 1e-6, noise));
  CHECK(y.v[0] == doctest::Approx(1.0));
  CHECK(y.v[1] == doctest::Approx(0.0));
}

TEST_CASE("gumbel softmax: samples sum to 1, tau<=0 rejected") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + rng.uniform_int(4);
    Tensor logits = random_tensor({k}, rng, -3, 3);
    Tape t;
    ValueId pi = t.softmax(t.constant(logits));
    const real tau = 0.05 + rng.uniform(0.0, 2.0);
    const Tensor& y = t.val(t.gumbel_softmax(pi, tau, sample_gumbel(rng, k)));
    real s = 0;
    for (real v : y.v) s += v;
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
  Tape t;
  ValueId pi = t.constant(Tensor::vec({0.5, 0.5}));
  CHECK_THROWS_AS(t.gumbel_softmax(pi, 0.0, Tensor::vec({0, 0})), std::invalid_argument);
}

TEST_CASE("gumbel softmax sampling is bit-reproducible for a fixed seed") {
  Tensor pi = Tensor::vec({0.7, 0.3});
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    Tensor ya = gumbel_softmax_sample(pi, 0.1, a);
    Tensor yb = gumbel_softmax_sample(pi, 0.1, b);
    CHECK(ya.v[0] == yb.v[0]);
    CHECK(ya.v[1] == yb.v[1]);
  }
}

TEST_CASE("gumbel softmax: argmax frequencies match pi (gumbel-max property)") {
  Tensor pi = Tensor::vec({0.7, 0.3});
  Rng rng(12345);
  int first = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    Tensor y = gumbel_softmax_sample(pi, 0.1, rng);
    if (y.v[0] > y.v[1]) ++first;
  }
  const double freq = static_cast<double>(first) / n;
  CHECK(std::abs(freq - 0.7) < 0.01);
}

TEST_CASE("gumbel softmax gradient flows through pi (noise constant)") {
  Rng rng(41);
  Tensor logits = random_tensor({3}, rng, -1, 1);
  Tensor noise = sample_gumbel(rng, 3);
  Tensor w = random_tensor({3}, rng);
  check_grad(logits, [&](Tape& t, ValueId xi) {
    ValueId pi = t.softmax(xi);
    ValueId y = t.gumbel_softmax(pi, 0.7, noise);
    return t.sum(t.mul(y, t.constant(w)));
  });
}

TEST_CASE("backward: sum gives ones, disconnected gives zero, scalar check") {
  Rng rng(43);
  Tensor p = random_tensor({4, 3}, rng);
  Tape t;
  ValueId pi = t.leaf(&p);
  t.backward(t.sum(pi));
  for (real v : t.grad(pi).v) CHECK(v == 1.0);

  Tape t2;
  ValueId qi = t2.leaf(&p);
  ValueId zero_loss = t2.scale(t2.sum(qi), 0.0);
  t2.backward(zero_loss);
  for (real v : t2.grad(qi).v) CHECK(v == 0.0);

  Tape t3;
  ValueId mi = t3.leaf(&p);
  CHECK_THROWS_AS(t3.backward(mi), std::invalid_argument);
}

TEST_CASE("unreachable parameters keep empty (zero) gradients") {
  Rng rng(47);
  Tensor used = random_tensor({3}, rng);
  Tensor unused = random_tensor({3}, rng);
  Tape t;
  ValueId ui = t.leaf(&used);
  ValueId vi = t.leaf(&unused);
  t.backward(t.sum(ui));
  CHECK(t.grad(vi).empty());
  CHECK_FALSE(t.grad(ui).empty());
}

TEST_CASE("replaying backward on the same tape yields identical gradients") {
  Rng rng(53);
  Tensor a = random_tensor({4, 4}, rng);
  Tensor b = random_tensor({4, 4}, rng);
  Tape t;
  ValueId ai = t.leaf(&a), bi = t.leaf(&b);
  ValueId loss = t.sum(t.activation(t.matmul(ai, bi), Act::tanh));
  t.backward(loss);
  Tensor g1 = t.grad(ai);
  t.backward(loss);
  Tensor g2 = t.grad(ai);
  REQUIRE(g1.numel() == g2.numel());
  for (long i = 0; i < g1.numel(); ++i) CHECK(g1.v[i] == g2.v[i]);
}

TEST_CASE("per-op gradients vs finite differences on 3 random shapes each") {
  Rng rng(61);
  // add / mul / scale / affine / scale_by / add_rowvec / slice / row /
  // stack_rows / embed / matvec
  for (int trial = 0; trial < 3; ++trial) {
    const int n = 3 + trial, m = 2 + trial;
    {
      Tensor x = random_tensor({m, n}, rng);
      Tensor o = random_tensor({m, n}, rng);
      check_grad(x, [&](Tape& t, ValueId xi) {
        return t.sum(t.mul(t.add(xi, t.constant(o)), t.constant(o)));
      });
      check_grad(x, [&](Tape& t, ValueId xi) { return t.sum(t.scale(xi, 1.7)); });
      check_grad(x, [&](Tape& t, ValueId xi) { return t.sum(t.affine(xi, -2.0, 0.3)); });
    }
    {
      Tensor x = random_tensor({n}, rng);
      Tensor s = random_tensor({1}, rng);
      check_grad(x, [&](Tape& t, ValueId xi) {
        return t.sum(t.scale_by(xi, t.leaf(&s)));
      });
      check_grad(s, [&](Tape& t, ValueId si) {
        return t.sum(t.scale_by(t.leaf(&x), si));
      });
      check_grad(x, [&](Tape& t, ValueId xi) { return t.sum(t.slice(xi, 1, n)); });
    }
    {
      Tensor m2 = random_tensor({m, n}, rng);
      Tensor v = random_tensor({n}, rng);
      Tensor w = random_tensor({m, n}, rng);
      check_grad(m2, [&](Tape& t, ValueId mi) {
        return t.sum(t.mul(t.add_rowvec(mi, t.leaf(&v)), t.constant(w)));
      });
      check_grad(v, [&](Tape& t, ValueId vi) {
        return t.sum(t.mul(t.add_rowvec(t.leaf(&m2), vi), t.constant(w)));
      });
      check_grad(m2, [&](Tape& t, ValueId mi) { return t.sum(t.row(mi, 1)); });
    }
    {
      Tensor w = random_tensor({m, n}, rng);
      Tensor x = random_tensor({n}, rng);
      check_grad(w, [&](Tape& t, ValueId wi) { return t.sum(t.matvec(wi, t.leaf(&x))); });
      check_grad(x, [&](Tape& t, ValueId xi) { return t.sum(t.matvec(t.leaf(&w), xi)); });
    }
    {
      Tensor r0 = random_tensor({n}, rng), r1 = random_tensor({n}, rng);
      Tensor w = random_tensor({2, n}, rng);
      check_grad(r0, [&](Tape& t, ValueId ri) {
        return t.sum(t.mul(t.stack_rows({ri, t.leaf(&r1)}), t.constant(w)));
      });
    }
    {
      Tensor table = random_tensor({6, n}, rng);
      std::vector<int32_t> ids{1, 3, 3, 0};  // repeated id exercises accumulation
      Tensor w = random_tensor({4, n}, rng);
      check_grad(table, [&](Tape& t, ValueId ti) {
        return t.sum(t.mul(t.embed(ti, ids), t.constant(w)));
      });
    }
  }
}

TEST_CASE("conv1d: gradient vs finite differences, zero padding at the end") {
  Rng rng(67);
  for (auto [T, d, w, f] : std::vector<std::array<int, 4>>{
           {{6, 4, 3, 2}}, {{2, 3, 5, 2}}, {{9, 2, 4, 3}}}) {
    Tensor x = random_tensor({T, d}, rng);
    Tensor filt = random_tensor({w, d, f}, rng);
    Tensor proj = random_tensor({T, f}, rng);
    auto eval = [&]() {
      Tape t;
      return t.val(t.sum(t.mul(t.conv1d(t.leaf(&x), t.leaf(&filt)), t.constant(proj))))
          .item();
    };
    Tape t;
    ValueId xi = t.leaf(&x), fi = t.leaf(&filt);
    t.backward(t.sum(t.mul(t.conv1d(xi, fi), t.constant(proj))));
    auto rx = fd_compare(x, eval, t.grad(xi));
    INFO("x: " << describe(rx));
    CHECK(rx.ok);
    auto rf = fd_compare(filt, eval, t.grad(fi));
    INFO("filters: " << describe(rf));
    CHECK(rf.ok);
  }
}

TEST_CASE("values remain finite after forward ops on finite inputs") {
  Rng rng(71);
  Tensor x = random_tensor({5, 5}, rng, -50, 50);
  Tape t;
  ValueId xi = t.constant(x);
  CHECK(t.val(t.softmax(xi)).all_finite());
  CHECK(t.val(t.activation(xi, Act::tanh)).all_finite());
  CHECK(t.val(t.matmul(xi, xi)).all_finite());
}
