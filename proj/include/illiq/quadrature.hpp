#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "illiq/errors.hpp"

namespace illiq::quad {

struct Tolerance {
  double abs = 1e-10;
  double rel = 0.0;
  std::size_t max_intervals = 2000;
};

struct Estimate {
  double value = 0.0;
  double error = 0.0;
  std::size_t intervals = 0;
};

namespace detail {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
using Gauss = boost::math::quadrature::gauss<double, 10>;

struct Piece {
  double a, b, value, error;
  bool operator<(const Piece& o) const { return error < o.error; }
};

template <class F>
Piece kronrod_piece(F& f, double a, double b) {
  const auto& x = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = Gauss::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  // G10 nodes sit at the odd Kronrod indices; index 0 (x = 0) is Kronrod-only.
  double fc = f(mid);
  double k = fc * wk[0];
  double g = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double fp = f(mid + half * x[i]);
    const double fm = f(mid - half * x[i]);
    k += (fp + fm) * wk[i];
    if (i % 2 == 1) g += (fp + fm) * wg[i / 2];
  }
  k *= half;
  g *= half;
  return {a, b, k, std::abs(k - g)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (10/21) on [a, b].
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below max(tol.abs, tol.rel * |I|). Throws NumericalError with
/// the final error estimate when the interval budget runs out.
template <class F>
Estimate integrate(F&& f, double a, double b, const Tolerance& tol = {}) {
  if (a == b) return {};
  std::priority_queue<detail::Piece> heap;
  auto first = detail::kronrod_piece(f, a, b);
  double value = first.value;
  double error = first.error;
  heap.push(first);
  while (error > std::max(tol.abs, tol.rel * std::abs(value))) {
    if (heap.size() >= tol.max_intervals) {
      // Accumulated rounding can keep the estimate from reaching an over-tight target.
      if (error <= 64.0 * std::max(tol.abs, tol.rel * std::abs(value))) break;
      throw NumericalError("adaptive quadrature did not converge (estimate " +
                               std::to_string(error) + ")",
                           error);
    }
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;  // interval at machine resolution
    auto left = detail::kronrod_piece(f, worst.a, mid);
    auto right = detail::kronrod_piece(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed the drift of the running updates.
  double v = 0.0, e = 0.0;
  const std::size_t n = heap.size();
  while (!heap.empty()) {
    v += heap.top().value;
    e += heap.top().error;
    heap.pop();
  }
  return {v, e, n};
}

/// Integral over [a, inf) of an integrand that decays at least like 1/u^2.
double integrate_to_infinity(const std::function<double(double)>& f, double a,
                             double tol = 1e-12);

/// Gauss-Legendre rule of order n on [-1, 1] (nodes ascending).
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Rule gauss_legendre(std::size_t n);

}  // namespace illiq::quad
