// Matrix kernels, RNG determinism, and finite-difference checks for every
// autodiff primitive.

#include <catch2/catch_amalgamated.hpp>

#include "magtkd/autodiff.hpp"
#include "magtkd/matrix.hpp"
#include "magtkd/rng.hpp"
#include "test_support.hpp"

using namespace magtkd;
using test::finite_difference_error;
using test::random_matrix;

namespace {

// Independent triple-loop matmul oracle, deliberately naive.
Matrix matmul_oracle(const Matrix& a, const Matrix& b, bool ta, bool tb) {
  const int m = ta ? a.cols() : a.rows();
  const int k = ta ? a.rows() : a.cols();
  const int n = tb ? b.rows() : b.cols();
  Matrix out(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        const double av = ta ? a(p, i) : a(i, p);
        const double bv = tb ? b(j, p) : b(p, j);
        acc += av * bv;
      }
      out(i, j) = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("rng is deterministic and bounded") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const auto k = r.uniform_int(-3, 5);
    REQUIRE(k >= -3);
    REQUIRE(k <= 5);
  }

  Rng s1(9), s2(9);
  std::vector<int> v1{1, 2, 3, 4, 5, 6}, v2 = v1;
  s1.shuffle(v1);
  s2.shuffle(v2);
  REQUIRE(v1 == v2);
}

TEST_CASE("derive_seed separates streams") {
  REQUIRE(derive_seed(1, "a") != derive_seed(1, "b"));
  REQUIRE(derive_seed(1, "a") != derive_seed(2, "a"));
  REQUIRE(derive_seed(1, "a") == derive_seed(1, "a"));
}

TEST_CASE("matmul matches the oracle for all transpose combinations") {
  Rng rng(3);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      const Matrix a = ta ? random_matrix(rng, 5, 4) : random_matrix(rng, 4, 5);
      const Matrix b = tb ? random_matrix(rng, 6, 5) : random_matrix(rng, 5, 6);
      const Matrix got = matmul(a, b, ta, tb);
      const Matrix want = matmul_oracle(a, b, ta, tb);
      REQUIRE(max_abs_diff(got, want) < 1e-12);
    }
  REQUIRE_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), InputError);
}

TEST_CASE("row_softmax rows sum to one") {
  Rng rng(11);
  const Matrix a = random_matrix(rng, 4, 6, 3.0);
  for (double tau : {0.5, 1.0, 2.0}) {
    const Matrix s = row_softmax(a, tau);
    for (int i = 0; i < s.rows(); ++i) {
      double sum = 0.0;
      for (int j = 0; j < s.cols(); ++j) {
        sum += s(i, j);
        REQUIRE(s(i, j) >= 0.0);
      }
      REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("gather, slice and concat kernels") {
  const Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  const Matrix g = gather_rows(a, {2, 0, 2});
  REQUIRE(g(0, 0) == 7.0);
  REQUIRE(g(1, 1) == 2.0);
  REQUIRE(g(2, 2) == 9.0);
  REQUIRE_THROWS_AS(gather_rows(a, {3}), InputError);

  const Matrix s = slice_cols(a, 1, 2);
  REQUIRE(s.cols() == 2);
  REQUIRE(s(0, 0) == 2.0);

  const Matrix cc = concat_cols({a, s});
  REQUIRE(cc.cols() == 5);
  REQUIRE(cc(1, 3) == 5.0);

  const Matrix cr = concat_rows({a, g});
  REQUIRE(cr.rows() == 6);
  REQUIRE(cr(3, 0) == 7.0);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  const Matrix a = Matrix::from_rows({{1, 3, 3}, {2, 2, 2}});
  REQUIRE(argmax_row(a, 0) == 1);
  REQUIRE(argmax_row(a, 1) == 0);
}

TEST_CASE("finite differences validate every autodiff primitive") {
  Rng rng(17);
  const double tol = 1e-6;

  SECTION("elementwise binary and scaling ops") {
    const Matrix a = random_matrix(rng, 3, 4);
    const Matrix b = random_matrix(rng, 3, 4);
    Matrix bpos = b;
    for (int i = 0; i < bpos.rows(); ++i)
      for (int j = 0; j < bpos.cols(); ++j) bpos(i, j) = 1.0 + std::abs(bpos(i, j));

    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  return sum_all(t, add(t, v[0], v[1]));
                },
                {a, b}) < tol);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  return sum_all(t, sub(t, v[0], v[1]));
                },
                {a, b}) < tol);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  return sum_all(t, hadamard(t, v[0], v[1]));
                },
                {a, b}) < tol);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  return sum_all(t, div_elem(t, v[0], v[1]));
                },
                {a, bpos}) < tol);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  return sum_all(t, scale(t, v[0], -2.5));
                },
                {a}) < tol);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  return sum_all(t, add_scalar_mul(t, v[0], mean_all(t, v[1]), -1.0));
                },
                {a, b}) < tol);
  }

  SECTION("matmul in all transpose combinations") {
    for (bool ta : {false, true})
      for (bool tb : {false, true}) {
        const Matrix a = ta ? random_matrix(rng, 4, 3) : random_matrix(rng, 3, 4);
        const Matrix b = tb ? random_matrix(rng, 5, 4) : random_matrix(rng, 4, 5);
        REQUIRE(finite_difference_error(
                    [ta, tb](Tape& t, const std::vector<Var>& v) {
                      return sum_all(t, matmul(t, v[0], v[1], ta, tb));
                    },
                    {a, b}) < tol);
      }
  }

  SECTION("structure ops") {
    const Matrix a = random_matrix(rng, 4, 3);
    const Matrix b = random_matrix(rng, 2, 3);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  return sum_all(t, hadamard(t, transpose(t, v[0]), transpose(t, v[0])));
                },
                {a}) < tol);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  Var g = gather_rows(t, v[0], {1, 1, 3});
                  return sum_all(t, hadamard(t, g, g));
                },
                {a}) < tol);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  Var s = slice_cols(t, v[0], 1, 2);
                  return sum_all(t, hadamard(t, s, s));
                },
                {a}) < tol);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  Var c = concat_cols(t, {v[0], v[0]});
                  return sum_all(t, hadamard(t, c, c));
                },
                {a}) < tol);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  Var c = concat_rows(t, {v[0], v[1]});
                  return sum_all(t, hadamard(t, c, c));
                },
                {a, b}) < tol);
    const Matrix rv = random_matrix(rng, 1, 3);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  Var y = add_rowvec(t, v[0], v[1]);
                  return sum_all(t, hadamard(t, y, y));
                },
                {a, rv}) < tol);
  }

  SECTION("nonlinearities and reductions") {
    const Matrix a = random_matrix(rng, 3, 5);
    Matrix pos = a;
    for (int i = 0; i < pos.rows(); ++i)
      for (int j = 0; j < pos.cols(); ++j) pos(i, j) = 0.2 + std::abs(pos(i, j));

    for (auto op : {+0, 1, 2, 3, 4, 5, 6}) {
      REQUIRE(finite_difference_error(
                  [op](Tape& t, const std::vector<Var>& v) {
                    Var y;
                    switch (op) {
                      case 0: y = sigmoid(t, v[0]); break;
                      case 1: y = tanh_op(t, v[0]); break;
                      case 2: y = relu(t, v[0]); break;
                      case 3: y = row_softmax(t, v[0], 2.0); break;
                      case 4: y = guarded_log(t, v[0]); break;
                      case 5: y = sqrt_op(t, v[0]); break;
                      default: y = clamp(t, v[0], -0.8, 0.8); break;
                    }
                    return sum_all(t, hadamard(t, y, y));
                  },
                  {(op == 4 || op == 5) ? pos : a}) < tol);
    }
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) { return mean_all(t, v[0]); },
                {a}) < tol);
  }

  SECTION("layer norm and cross entropy") {
    const Matrix x = random_matrix(rng, 4, 6);
    const Matrix gain = random_matrix(rng, 1, 6, 0.5);
    const Matrix bias = random_matrix(rng, 1, 6, 0.5);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  Var y = layer_norm_rows(t, v[0], v[1], v[2]);
                  return sum_all(t, hadamard(t, y, y));
                },
                {x, gain, bias}) < tol);

    const Matrix logits = random_matrix(rng, 5, 4);
    REQUIRE(finite_difference_error(
                [](Tape& t, const std::vector<Var>& v) {
                  return cross_entropy_mean(t, v[0], {0, 3, 1, 2, 3});
                },
                {logits}) < tol);
  }
}

TEST_CASE("gradients accumulate across shared uses") {
  // f(x) = sum(x*x) via two paths sharing the same leaf.
  Tape t;
  const Matrix x = Matrix::from_rows({{1.0, -2.0}, {3.0, 0.5}});
  Var v = t.leaf(x);
  Var y = add(t, hadamard(t, v, v), hadamard(t, v, v));
  Var loss = sum_all(t, y);
  t.backward(loss);
  const Matrix& g = t.grad(v);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) REQUIRE(g(i, j) == Catch::Approx(4.0 * x(i, j)));
}

TEST_CASE("constants do not accumulate gradient") {
  Tape t;
  Var c = t.constant(Matrix(2, 2, 3.0));
  Var v = t.leaf(Matrix(2, 2, 1.0));
  Var loss = sum_all(t, hadamard(t, c, v));
  t.backward(loss);
  REQUIRE(t.grad(c).empty());
  REQUIRE(!t.grad(v).empty());
}
