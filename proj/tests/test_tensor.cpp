#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "hagnn/rng.hpp"
#include "hagnn/tensor.hpp"

using namespace hagnn;

namespace {

struct LeafSpec {
  int64_t rows, cols;
};

/// Finite-difference gradient check: `build` maps tape-registered leaves
/// to a scalar loss. Central differences with h = 1e-5; relative error
/// must stay below 1e-4 (absolute near zero).
void check_gradients(const std::vector<LeafSpec>& specs,
                     const std::function<Tensor(Tape&, std::vector<Tensor>&)>& build,
                     uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<std::vector<double>> base;
  for (const auto& s : specs) {
    std::vector<double> v(static_cast<size_t>(s.rows * s.cols));
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    base.push_back(std::move(v));
  }
  auto eval = [&](const std::vector<std::vector<double>>& vals) {
    Tape tape;
    std::vector<Tensor> leaves;
    for (size_t i = 0; i < specs.size(); ++i)
      leaves.push_back(tape.leaf(specs[i].rows, specs[i].cols, vals[i]));
    Tensor loss = build(tape, leaves);
    return std::pair{(*loss.val)[0], std::move(leaves)};
  };

  // Analytic gradients.
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    std::vector<Tensor> leaves;
    for (size_t i = 0; i < specs.size(); ++i)
      leaves.push_back(tape.leaf(specs[i].rows, specs[i].cols, base[i]));
    Tensor loss = build(tape, leaves);
    tape.backward(loss);
    for (const auto& l : leaves) analytic.push_back(*l.grad);
  }

  const double h = 1e-5;
  for (size_t i = 0; i < specs.size(); ++i) {
    for (size_t j = 0; j < base[i].size(); ++j) {
      auto plus = base, minus = base;
      plus[i][j] += h;
      minus[i][j] -= h;
      double numeric = (eval(plus).first - eval(minus).first) / (2.0 * h);
      double a = analytic[i][j];
      double denom = std::max({std::abs(numeric), std::abs(a), 1e-3});
      CHECK(std::abs(numeric - a) / denom < 1e-4);
    }
  }
}

}  // namespace

TEST_CASE("matmul forward matches a naive triple loop") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    int64_t m = 1 + rng.uniform_int(6), k = 1 + rng.uniform_int(6), n = 1 + rng.uniform_int(6);
    std::vector<double> av(static_cast<size_t>(m * k)), bv(static_cast<size_t>(k * n));
    for (double& x : av) x = rng.uniform(-2.0, 2.0);
    for (double& x : bv) x = rng.uniform(-2.0, 2.0);
    Tensor a = Tensor::constant(m, k, av);
    Tensor b = Tensor::constant(k, n, bv);
    Tensor c = ops::matmul(a, b);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        double expect = 0.0;
        for (int64_t kk = 0; kk < k; ++kk) expect += a.v(i, kk) * b.v(kk, j);
        CHECK(std::abs(c.v(i, j) - expect) < 1e-12);
      }
  }
  CHECK_THROWS_AS(ops::matmul(Tensor::constant(2, 3, std::vector<double>(6)),
                              Tensor::constant(2, 3, std::vector<double>(6))),
                  std::invalid_argument);
}

TEST_CASE("elementwise forward values") {
  Tensor x = Tensor::constant(1, 4, {-1.0, 0.0, 0.5, 2.0});
  Tensor s = ops::sigmoid(x);
  CHECK(s.v(0, 1) == doctest::Approx(0.5));
  Tensor lr = ops::leaky_relu(x, 0.1);
  CHECK(lr.v(0, 0) == doctest::Approx(-0.1));
  CHECK(lr.v(0, 3) == doctest::Approx(2.0));
  Tensor e = ops::elu(x);
  CHECK(e.v(0, 0) == doctest::Approx(std::expm1(-1.0)));
  CHECK(e.v(0, 3) == doctest::Approx(2.0));
}

TEST_CASE("sigmoid derivative at zero is 0.25") {
  Tape tape;
  Tensor x = tape.leaf(1, 1, {0.0});
  Tensor loss = ops::sum_all(ops::sigmoid(x));
  tape.backward(loss);
  CHECK((*x.grad)[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax_rows rows sum to one and match direct computation") {
  Tensor x = Tensor::constant(2, 3, {1.0, 2.0, 3.0, 0.0, 0.0, 0.0});
  Tensor p = ops::softmax_rows(x);
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(p.v(0, 0) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
  CHECK(p.v(0, 2) == doctest::Approx(std::exp(3.0) / z).epsilon(1e-12));
  CHECK(p.v(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  for (int64_t i = 0; i < 2; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < 3; ++j) s += p.v(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("segment_softmax on segments [0,0,1]") {
  Tensor x = Tensor::constant(3, 1, {1.0, 1.0, 5.0});
  Tensor p = ops::segment_softmax(x, {0, 0, 1});
  CHECK(p.v(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.v(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.v(2, 0) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(ops::segment_softmax(x, {1, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(ops::segment_softmax(Tensor::constant(1, 2, {1.0, 2.0}), {0}),
                  std::invalid_argument);
}

TEST_CASE("segment_weighted_sum forward") {
  Tensor msgs = Tensor::constant(3, 2, {1.0, 0.0, 0.0, 1.0, 2.0, 2.0});
  Tensor w = Tensor::constant(3, 1, {0.5, 0.5, 2.0});
  Tensor out = ops::segment_weighted_sum(msgs, w, {0, 0, 2}, 3);
  CHECK(out.v(0, 0) == doctest::Approx(0.5));
  CHECK(out.v(0, 1) == doctest::Approx(0.5));
  CHECK(out.v(1, 0) == doctest::Approx(0.0));  // empty segment stays zero
  CHECK(out.v(2, 0) == doctest::Approx(4.0));
}

TEST_CASE("concat and gather_rows forward") {
  Tensor a = Tensor::constant(2, 2, {1, 2, 3, 4});
  Tensor b = Tensor::constant(1, 2, {5, 6});
  Tensor v = ops::concat({a, b}, 0);
  CHECK(v.rows == 3);
  CHECK(v.v(2, 1) == 6);
  Tensor c = Tensor::constant(2, 1, {7, 8});
  Tensor hcat = ops::concat({a, c}, 1);
  CHECK(hcat.cols == 3);
  CHECK(hcat.v(1, 2) == 8);
  Tensor g = ops::gather_rows(v, {2, 0, 0});
  CHECK(g.v(0, 0) == 5);
  CHECK(g.v(1, 0) == 1);
  CHECK_THROWS_AS(ops::gather_rows(v, {3}), std::out_of_range);
}

TEST_CASE("row_merge selects rows by mask") {
  Tensor a = Tensor::constant(2, 2, {1, 1, 1, 1});
  Tensor b = Tensor::constant(2, 2, {9, 9, 9, 9});
  Tensor m = ops::row_merge(a, b, {1, 0});
  CHECK(m.v(0, 0) == 1);
  CHECK(m.v(1, 0) == 9);
}

TEST_CASE("losses: hand-computed values") {
  // Uniform logits over 4 classes -> NLL = ln 4.
  Tensor logits = Tensor::constant(2, 4, std::vector<double>(8, 0.3));
  Tensor labels = Tensor::constant(2, 4, {1, 0, 0, 0, 0, 0, 1, 0});
  Tensor l = ops::masked_softmax_xent(logits, labels, {0, 1});
  CHECK((*l.val)[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // All-zero logits, C columns -> BCE = C * ln 2 per row.
  Tensor zl = Tensor::constant(1, 3, {0, 0, 0});
  Tensor zt = Tensor::constant(1, 3, {1, 0, 1});
  Tensor bce = ops::masked_sigmoid_bce(zl, zt, {0});
  CHECK((*bce.val)[0] == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(ops::masked_softmax_xent(logits, labels, {}), std::invalid_argument);
}

TEST_CASE("tape refuses non-scalar loss and double backward") {
  Tape tape;
  Tensor x = tape.leaf(2, 1, {1.0, 2.0});
  Tensor y = ops::scale(x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
  Tensor s = ops::sum_all(y);
  tape.backward(s);
  CHECK_THROWS_AS(tape.backward(s), std::logic_error);
  CHECK((*x.grad)[0] == doctest::Approx(2.0));
}

TEST_CASE("gradient check: matmul/add/mul chain") {
  check_gradients({{3, 4}, {4, 2}, {3, 2}}, [](Tape&, std::vector<Tensor>& v) {
    return ops::sum_all(ops::mul(ops::matmul(v[0], v[1]), v[2]));
  });
}

TEST_CASE("gradient check: activations") {
  check_gradients({{4, 3}}, [](Tape&, std::vector<Tensor>& v) {
    return ops::mean_all(ops::elu(ops::leaky_relu(ops::sigmoid(v[0]), 0.05)));
  });
}

TEST_CASE("gradient check: softmax, transpose and exp/log") {
  check_gradients({{3, 4}}, [](Tape&, std::vector<Tensor>& v) {
    Tensor p = ops::softmax_rows(v[0]);
    return ops::sum_all(ops::mul(p, ops::transpose(ops::transpose(p))));
  });
  check_gradients({{2, 3}}, [](Tape&, std::vector<Tensor>& v) {
    return ops::sum_all(ops::log(ops::add(ops::exp(v[0]), ops::exp(v[0]))));
  });
}

TEST_CASE("gradient check: segment ops, gather and concat") {
  std::vector<int64_t> seg = {0, 0, 1, 3, 3, 3};
  check_gradients({{6, 1}, {6, 2}}, [seg](Tape&, std::vector<Tensor>& v) {
    Tensor w = ops::segment_softmax(v[0], seg);
    Tensor out = ops::segment_weighted_sum(v[1], w, seg, 4);
    Tensor picked = ops::gather_rows(out, {0, 3, 3});
    return ops::sum_all(ops::mul(picked, picked));
  });
  check_gradients({{2, 2}, {3, 2}}, [](Tape&, std::vector<Tensor>& v) {
    Tensor c = ops::concat({v[0], v[1]}, 0);
    return ops::mean_all(ops::mul(c, c));
  });
}

TEST_CASE("gradient check: row_merge and sum_axis") {
  std::vector<uint8_t> mask = {1, 0, 1};
  check_gradients({{3, 2}, {3, 2}}, [mask](Tape&, std::vector<Tensor>& v) {
    Tensor m = ops::row_merge(v[0], v[1], mask);
    return ops::sum_all(ops::mul(ops::sum_axis(m, 1), ops::sum_axis(m, 1)));
  });
}

TEST_CASE("gradient check: fused losses") {
  Tensor labels = Tensor::constant(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  check_gradients({{3, 3}}, [&labels](Tape&, std::vector<Tensor>& v) {
    return ops::masked_softmax_xent(v[0], labels, {0, 2});
  });
  Tensor targets = Tensor::constant(3, 2, {1, 0, 0, 1, 1, 1});
  check_gradients({{3, 2}}, [&targets](Tape&, std::vector<Tensor>& v) {
    return ops::masked_sigmoid_bce(v[0], targets, {0, 1, 2});
  });
}
