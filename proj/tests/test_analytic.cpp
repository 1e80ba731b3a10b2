#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "illiq/analytic.hpp"
#include "illiq/errors.hpp"

using namespace illiq;

namespace {

MarketParams market(double sigma, double T, double ell = 1.0) {
  MarketParams p;
  p.sigma = sigma;
  p.T = T;
  p.ell = ell;
  return p;
}

template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

double phi_n(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); }

// E[f(S_T)] for a lognormal S_T started at s, by Simpson in the normal variable.
template <class F>
double lognormal_expectation(F f, double s, double tau, double sigma, int n = 4000) {
  return simpson(
      [&](double z) { return phi_n(z) * f(s * std::exp(-0.5 * sigma * sigma * tau + sigma * std::sqrt(tau) * z)); },
      -12, 12, n);
}

// Direct v1 of a call: int_t^T E[S_u^2 sigma^2 Gamma(u,S_u)^2 / (4 ell)] du with
// T - u = tau w^2, straight from the Feynman-Kac form. The inner expectation is
// taken in x = log(S_u / K) over a window around the product of the two Gaussians.
double v1_direct(double s, double K, const MarketParams& p) {
  const double sigma = p.sigma_const(), tau = p.T, ell = p.ell_const();
  const double x0 = std::log(s / K);
  auto outer = [&](double w) {
    if (w == 0.0) return 0.0;
    const double rem = tau * w * w, elapsed = tau - rem;
    const double vr = sigma * std::sqrt(rem);
    auto gamma_term = [&](double x) {
      const double d1 = x / vr + 0.5 * vr;
      return phi_n(d1) * phi_n(d1) / rem / (4 * ell);
    };
    if (elapsed <= 1e-14) return 2 * tau * w * gamma_term(x0);
    const double m = x0 - 0.5 * sigma * sigma * elapsed, a = sigma * std::sqrt(elapsed);
    const double c = -0.5 * vr * vr, b = vr / std::sqrt(2.0);
    const double sd = 1 / std::sqrt(1 / (a * a) + 1 / (b * b));
    const double mid = sd * sd * (m / (a * a) + c / (b * b));
    const double e = simpson([&](double x) { return phi_n((x - m) / a) / a * gamma_term(x); }, mid - 14 * sd,
                             mid + 14 * sd, 400);
    return 2 * tau * w * e;
  };
  return simpson(outer, 0, 1, 2000);
}

// Tensor-Simpson evaluation of the triple-integral form with the library's kernels.
double v1_alpha_brute(double s, double K, double alpha, const MarketParams& p, bool digital) {
  const double tau = p.T, sigma = p.sigma_const();
  const double pref = 1 / (8 * p.ell_const() * std::numbers::pi * (digital ? alpha * alpha : 1.0));
  auto outer = [&](double w) {
    w = std::clamp(w, 1e-12, 1 - 1e-12);
    const double v = tau * w * w;
    auto fx = [&](double x) {
      auto fy = [&](double y) {
        KernelArgs a{tau, v, s, K, x, y, alpha};
        return bump_phi(y) * (digital ? h_hat_kernel(a, sigma) : h_kernel(a, sigma));
      };
      return bump_phi(x) * simpson(fy, -1, 1, 80);
    };
    // dv / sqrt(v (2 tau - v)) = 2 dw / sqrt(2 - w^2)
    return 2 / std::sqrt(2 - w * w) * simpson(fx, -1, 1, 80);
  };
  return pref * simpson(outer, 0, 1, 60);
}

}  // namespace

TEST_CASE("d functions") {
  const auto d = d_functions(15, 15, 10, 0.5);
  CHECK(d.d1 == doctest::Approx(0.5 * 0.5 * std::sqrt(10.0)));
  CHECK(d.d1 == doctest::Approx(0.7906).epsilon(1e-4));
  CHECK(d.d0 == doctest::Approx(-d.d1));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.05, 3);
  for (int k = 0; k < 100; ++k) {
    const double s = 10 * U(rng), K = 10 * U(rng), t = U(rng), sig = U(rng);
    const auto e = d_functions(s, K, t, sig);
    CHECK(e.d1 - e.d0 == doctest::Approx(sig * std::sqrt(t)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(d_functions(15, 15, 0, 0.5), DomainError);
}

TEST_CASE("delta kernel") {
  const double sig = 0.5, tau = 2;
  CHECK(delta_kernel({tau, tau / 2, 15, 15}, sig) == doctest::Approx(0.0));
  CHECK(delta_kernel({tau, 0, 15, 15}, sig) == doctest::Approx(-0.5 * sig * tau / std::sqrt(2 * tau)));
  const double L = std::log(17.0 / 15.0);
  CHECK(delta_kernel({tau, tau, 17, 15}, sig) ==
        doctest::Approx(L / (sig * std::sqrt(tau)) + 0.5 * sig * std::sqrt(tau)));
  CHECK_THROWS_AS(delta_kernel({tau, 2 * tau, 15, 15}, sig), DomainError);
}

TEST_CASE("h kernels") {
  const double sig = 0.4;
  KernelArgs a{1.0, 0.3, 14, 15, 0.2, -0.6, 0.0};
  const double d = delta_kernel(a, sig);
  CHECK(h_kernel(a, sig) == doctest::Approx(std::exp(-d * d)));
  a.alpha = 0.5;
  a.y = a.x;
  const double lx = std::log(1 + a.alpha * a.x / a.k);
  const double w = 2 * a.tau - a.v;
  CHECK(h_kernel(a, sig) ==
        doctest::Approx(std::exp(-d * d + 2 * d * lx / (sig * std::sqrt(w)) - lx * lx / (sig * sig * w))));
  a.y = 0.7;
  auto at = [&](double x, double y) {
    KernelArgs b = a;
    b.x = x;
    b.y = y;
    return h_kernel(b, sig);
  };
  const double unrolled = at(a.x - 1, a.y - 1) - at(a.x - 1, a.y - 2) - at(a.x - 2, a.y - 1) + at(a.x - 2, a.y - 2);
  CHECK(h_hat_kernel(a, sig) == doctest::Approx(unrolled));
  a.alpha = 20;
  a.x = -0.9;
  CHECK_THROWS_AS(h_kernel(a, sig), DomainError);
}

TEST_CASE("closed-form prices") {
  CHECK(bs_price(Call{15}, 0, 15, market(0.5, 10)) == doctest::Approx(8.56).epsilon(0.01 / 8.56));
  CHECK(bs_price(Digital{25}, 0, 25, market(0.5, 10)) == doctest::Approx(0.21).epsilon(0.005 / 0.21));
  for (double s : {5.0, 15.0, 30.0}) {
    CHECK(bs_price(Call{15}, 10, s, market(0.5, 10)) == eval_payoff(Call{15}, s));
    CHECK(bs_price(Digital{15}, 10, s, market(0.5, 10)) == eval_payoff(Digital{15}, s));
  }
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.1, 2);
  for (int k = 0; k < 100; ++k) {
    const double s = 20 * U(rng), K = 20 * U(rng);
    const auto p = market(U(rng) / 2, 5 * U(rng));
    const double t = 0.5 * U(rng) * p.T / 2;
    CHECK(bs_price(Call{K}, t, s, p) - bs_price(Put{K}, t, s, p) == doctest::Approx(s - K).epsilon(1e-10));
  }
  // Closed forms against the lognormal expectation of the payoff.
  const auto p = market(0.3, 2);
  for (const Payoff& g : {Payoff(Call{12}), Payoff(Put{12}), Payoff(CallSpread{10, 13, 0.5})})
    CHECK(bs_price(g, 0.5, 11, p) == doctest::Approx(lognormal_expectation(g, 11, 1.5, 0.3, 20000)).epsilon(1e-7));
  MarketParams q = p;
  q.sigma = Coefficient([](double, double) { return 0.3; });
  CHECK_THROWS_AS(bs_price(Call{12}, 0, 11, q), UnsupportedRegime);
  CHECK_THROWS_AS(bs_price(SampledCustom{{1, 2}, {0, 1}}, 0, 11, p), UnsupportedRegime);
}

TEST_CASE("gamma against second differences") {
  for (double tau : {0.1, 1.0, 10.0}) {
    const auto p = market(0.5, tau);
    for (double s = 7.5; s <= 30; s += 1.5) {
      const double h = 1e-3 * s;
      auto price = [&](double x) { return bs_price(Call{15}, 0, x, p); };
      const double fd = (price(s + h) - 2 * price(s) + price(s - h)) / (h * h);
      CHECK(bs_gamma_call(0, s, 15, p) == doctest::Approx(fd).epsilon(1e-5));
      auto dig = [&](double x) { return bs_price(Digital{15}, 0, x, p); };
      const double fd_dig = (dig(s + h) - 2 * dig(s) + dig(s - h)) / (h * h);
      CHECK(bs_gamma(Digital{15}, 0, s, p) == doctest::Approx(fd_dig).epsilon(1e-4).scale(1e-6));
    }
  }
  const auto p = market(0.5, 10);
  CHECK(bs_gamma_call(0, 15, 15, p) ==
        doctest::Approx(std::exp(-0.3125) / (15 * 0.5 * std::sqrt(20 * std::numbers::pi))));
  CHECK_THROWS_AS(bs_gamma_call(10, 15, 15, p), DomainError);
}

TEST_CASE("regularized Black-Scholes price and gamma") {
  const auto p = market(0.5, 1);
  const double K = 15, alpha = 0.5;
  for (double s : {12.0, 15.0, 17.0}) {
    const double direct = lognormal_expectation(
        [&](double x) { return mollify(MollifiedPayoff{Call{K}, alpha}, x); }, s, 1, 0.5, 1200);
    CHECK(v_bs_alpha(0, s, K, alpha, p, RegularizedKind::call) == doctest::Approx(direct).epsilon(1e-6));
    const double dig = lognormal_expectation(
        [&](double x) { return mollify(MollifiedPayoff{Digital{K}, alpha, SmoothingMode::digital_presmooth}, x); }, s,
        1, 0.5, 12000);
    CHECK(v_bs_alpha(0, s, K, alpha, p, RegularizedKind::digital) == doctest::Approx(dig).epsilon(1e-6));
    const double h = 1e-3 * s;
    for (auto kind : {RegularizedKind::call, RegularizedKind::digital}) {
      auto f = [&](double x) { return v_bs_alpha(0, x, K, alpha, p, kind); };
      const double fd = (f(s + h) - 2 * f(s) + f(s - h)) / (h * h);
      CHECK(v_bs_alpha_gamma(0, s, K, alpha, p, kind) == doctest::Approx(fd).epsilon(1e-4));
    }
  }
  // Smoothing vanishes as alpha -> 0 at second order for the call.
  const double g0 = bs_gamma_call(0, 15, 15, p);
  const double e1 = v_bs_alpha_gamma(0, 15, 15, 0.2, p, RegularizedKind::call) - g0;
  const double e2 = v_bs_alpha_gamma(0, 15, 15, 0.1, p, RegularizedKind::call) - g0;
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(std::abs(v_bs_alpha_gamma(0, 15 * std::exp(8 * 0.5 * 0.3), 15, 0.2, market(0.5, 0.09),
                                  RegularizedKind::digital)) < 1e-8);
  CHECK_THROWS_AS(v_bs_alpha(0, 15, 15, 0, p, RegularizedKind::call), DomainError);
}

TEST_CASE("first-order call term against the Feynman-Kac integral") {
  const auto p = market(0.5, 1);
  for (double s : {10.0, 15.0, 21.0})
    CHECK(v1_exact_call(0, s, 15, p) == doctest::Approx(v1_direct(s, 15, p)).epsilon(2e-4));
  CHECK(v1_exact_call(1, 15, 15, p) == 0.0);
  const double a = v1_exact_call(0, 15, 15, p);
  CHECK(v1_exact_call(0, 15, 15, market(0.5, 1, 2.0)) == a / 2);
  CHECK(a == doctest::Approx(0.0614366106).epsilon(1e-8));
  // At the strike the term tends to 1/(16 ell) as t -> T.
  CHECK(v1_exact_call(0.999999, 15, 15, p) == doctest::Approx(0.0625).epsilon(1e-3));
  CHECK(v1_exact_call(0, 0.5, 15, p) < 1e-8);
  CHECK(v1_exact_call(0, 500, 15, p) < 1e-8);
  for (double s = 1; s < 60; s += 2.3) CHECK(v1_exact_call(0, s, 15, p) >= 0.0);
}

TEST_CASE("triple integrals against tensor Simpson") {
  const auto p = market(0.5, 1);
  const double call = v1_alpha(0, 15, 15, 1.0, p, RegularizedKind::call);
  CHECK(call == doctest::Approx(v1_alpha_brute(15, 15, 1.0, p, false)).epsilon(1e-4));
  const double dig = v1_alpha(0, 24, 25, 1.0, p, RegularizedKind::digital);
  CHECK(dig == doctest::Approx(v1_alpha_brute(24, 25, 1.0, p, true)).epsilon(1e-4));
  CHECK(v1_alpha(1, 15, 15, 0.1, p, RegularizedKind::call) == 0.0);
}

TEST_CASE("small-alpha expansion of the call") {
  const auto p = market(0.5, 1);
  const auto c = expansion_coeffs_call(0, 15, 15, p);
  CHECK(c.v1_alpha1 < 0.0);
  CHECK(c.bs_alpha2 > 0.0);
  const double bs = bs_price(Call{15}, 0, 15, p);
  for (double alpha : {0.1, 0.05})
    CHECK((v_bs_alpha(0, 15, 15, alpha, p, RegularizedKind::call) - bs) / (alpha * alpha) ==
          doctest::Approx(c.bs_alpha2).epsilon(0.05));
  const double v1 = v1_exact_call(0, 15, 15, p);
  const double alpha = 0.05;
  CHECK((v1_alpha(0, 15, 15, alpha, p, RegularizedKind::call) - v1) / alpha ==
        doctest::Approx(c.v1_alpha1).epsilon(0.05));
  // tau -> 4 tau at the money: the coefficient carries 1/sqrt(tau) and the d0 Gaussian.
  const auto c4 = expansion_coeffs_call(0, 15, 15, market(0.5, 4));
  const double d0 = -0.25, d0_4 = -0.5;
  CHECK(c.bs_alpha2 / c4.bs_alpha2 == doctest::Approx(2 * std::exp(-0.5 * (d0 * d0 - d0_4 * d0_4))));
}

TEST_CASE("small-alpha expansion of the digital") {
  const auto p = market(0.5, 1);
  const auto c = expansion_coeffs_digital(0, 25, 25, p);
  CHECK(c.v1_alpha_inv > 0.0);
  const double bs = bs_price(Digital{25}, 0, 25, p);
  const double alpha = 0.02;
  CHECK((v_bs_alpha(0, 25, 25, alpha, p, RegularizedKind::digital) - bs) / alpha ==
        doctest::Approx(c.bs_alpha1).epsilon(0.05));
  const double a1 = 0.05 * v1_alpha(0, 25, 25, 0.05, p, RegularizedKind::digital);
  const double a2 = 0.025 * v1_alpha(0, 25, 25, 0.025, p, RegularizedKind::digital);
  CHECK(2 * a2 - a1 == doctest::Approx(c.v1_alpha_inv).epsilon(0.01));
}

TEST_CASE("theorem parameter windows") {
  const TheoremParams good{0.55, 0.75, 0.25, 1.0};
  CHECK_NOTHROW(check_theorem_window(good, RegularizedKind::call));
  CHECK(2 - good.a * (good.nu + 2 * good.beta) == doctest::Approx(1.0375));
  CHECK_THROWS_AS(check_theorem_window({0.45, 0.75, 0.25, 1}, RegularizedKind::call), PreconditionError);
  CHECK_THROWS_AS(check_theorem_window({0.6, 0.75, 0.25, 1}, RegularizedKind::call), PreconditionError);
  CHECK_THROWS_AS(check_theorem_window({0.55, 0.4, 0.25, 1}, RegularizedKind::call), PreconditionError);
  CHECK_THROWS_AS(check_theorem_window({0.55, 1.0, 0.5, 1}, RegularizedKind::call), PreconditionError);
  const double a = digital_theorem_a(0.75, 0.25);
  CHECK_NOTHROW(check_theorem_window({a, 0.75, 0.25, 1}, RegularizedKind::digital));
  CHECK_THROWS_AS(check_theorem_window({a + 0.01, 0.75, 0.25, 1}, RegularizedKind::digital), PreconditionError);
  try {
    check_theorem_window({0.6, 0.75, 0.25, 1}, RegularizedKind::call);
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("1/(2 beta + nu)") != std::string::npos);
  }
}

TEST_CASE("theorem bound") {
  auto p = market(0.5, 1);
  const TheoremParams tp{0.55, 0.75, 0.25, 2.0};
  p.epsilon = 0.0;
  CHECK(theorem_upper_bound(0, 15, 15, p, tp, RegularizedKind::call) == bs_price(Call{15}, 0, 15, p));
  const double bs = bs_price(Call{15}, 0, 15, p);
  double prev = 1e9;
  for (double eps : {0.1, 0.01, 1e-3, 1e-5}) {
    p.epsilon = eps;
    const double b = theorem_upper_bound(0, 15, 15, p, tp, RegularizedKind::call);
    CHECK(b >= bs);
    CHECK(b - bs < prev);
    prev = b - bs;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("gaussian defect integral") {
  const double v = gaussian_defect_integral();
  CHECK(std::abs(v + std::sqrt(std::numbers::pi)) < 1e-6);
  CHECK(std::abs(std::abs(v) - std::sqrt(std::numbers::pi)) < 1e-6);
}

TEST_CASE("regularized gamma bound with a fitted constant") {
  // sup_s s |v_ss| <= c* / (tau^{1-beta} alpha^{2 beta - 1 + d}), d = 0 for the
  // call and 1 for the digital. c* is fitted on the even nodes of a 21 x 21
  // (tau, alpha) grid and must hold on all of them.
  const auto p = market(0.5, 10);
  const double K = 15;
  constexpr int n = 21;
  auto node = [](double lo, double hi, int i) { return lo * std::pow(hi / lo, i / double(n - 1)); };
  for (auto kind : {RegularizedKind::call, RegularizedKind::digital}) {
    const double d = kind == RegularizedKind::digital ? 1.0 : 0.0;
    double sup[n][n];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double tau = node(0.01, 10, i), alpha = node(0.01, 1, j);
        const double half = 4 * 0.5 * std::sqrt(tau) * K + 3 * alpha;
        double best = 0;
        for (int k = 0; k <= 80; ++k) {
          const double s = K - half + 2 * half * k / 80;
          if (s <= 0) continue;
          best = std::max(best, s * std::abs(v_bs_alpha_gamma(p.T - tau, s, K, alpha, p, kind)));
        }
        sup[i][j] = best;
      }
    for (double beta : {0.5, 2.0 / 3.0, 5.0 / 6.0, 1.0}) {
      auto scaled = [&](int i, int j) {
        return sup[i][j] * std::pow(node(0.01, 10, i), 1 - beta) * std::pow(node(0.01, 1, j), 2 * beta - 1 + d);
      };
      double c_star = 0, all = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (i % 2 == 0 && j % 2 == 0) c_star = std::max(c_star, scaled(i, j));
          all = std::max(all, scaled(i, j));
        }
      CHECK(std::isfinite(c_star));
      CHECK(all <= 1.1 * c_star);
    }
  }
}
