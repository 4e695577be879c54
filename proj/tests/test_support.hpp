#pragma once
// Shared helpers for the test suites: finite-difference gradient checking and
// small matrix utilities. The reference implementations here stay independent
// of the library code paths they are used to check.

#include <cmath>
#include <functional>
#include <vector>

#include "magtkd/autodiff.hpp"
#include "magtkd/matrix.hpp"
#include "magtkd/rng.hpp"

namespace magtkd::test {

inline Matrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Matrix m(rows, cols);
  m.fill_normal(rng, scale);
  return m;
}

// Mixed absolute/relative error: relative above 1, absolute below.
inline double grad_error(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (int i = 0; i < analytic.rows(); ++i)
    for (int j = 0; j < analytic.cols(); ++j) {
      const double a = analytic(i, j);
      const double f = numeric(i, j);
      const double denom = std::max({1.0, std::abs(a), std::abs(f)});
      worst = std::max(worst, std::abs(a - f) / denom);
    }
  return worst;
}

// Builds a scalar loss from leaves placed on a fresh tape, compares the
// analytic gradient of every input against central finite differences, and
// returns the worst mixed error over all inputs and entries.
inline double finite_difference_error(
    const std::function<Var(Tape&, const std::vector<Var>&)>& build,
    std::vector<Matrix> inputs, double h = 1e-5) {
  // Analytic pass.
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& m : inputs) vars.push_back(tape.leaf(m));
  Var loss = build(tape, vars);
  tape.backward(loss);
  std::vector<Matrix> analytic;
  analytic.reserve(inputs.size());
  for (Var v : vars) analytic.push_back(tape.grad_or_zero(v));

  const auto eval = [&](const std::vector<Matrix>& ins) {
    Tape t2;
    std::vector<Var> vs;
    vs.reserve(ins.size());
    for (const auto& m : ins) vs.push_back(t2.leaf(m));
    return t2.val(build(t2, vs))(0, 0);
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Matrix numeric(inputs[k].rows(), inputs[k].cols());
    for (int i = 0; i < inputs[k].rows(); ++i)
      for (int j = 0; j < inputs[k].cols(); ++j) {
        const double saved = inputs[k](i, j);
        inputs[k](i, j) = saved + h;
        const double up = eval(inputs);
        inputs[k](i, j) = saved - h;
        const double down = eval(inputs);
        inputs[k](i, j) = saved;
        numeric(i, j) = (up - down) / (2.0 * h);
      }
    worst = std::max(worst, grad_error(analytic[k], numeric));
  }
  return worst;
}

}  // namespace magtkd::test
