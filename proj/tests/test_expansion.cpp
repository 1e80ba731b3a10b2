#include <array>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "illiq/analytic.hpp"
#include "illiq/errors.hpp"
#include "illiq/expansion.hpp"

using namespace illiq;

namespace {

MarketParams market(double sigma, double T, double ell = 1.0, double eps = 0.0) {
  MarketParams p;
  p.sigma = sigma;
  p.T = T;
  p.ell = ell;
  p.epsilon = eps;
  return p;
}

Grid grid_for(const MarketParams& p, double K, std::size_t M, std::size_t N) {
  GridSpec spec;
  spec.M = M;
  spec.N = N;
  return build_grid(spec, p, {K});
}

// Smooth payoff with compact support in [10, 20].
double sin_bump(double s) {
  if (s <= 10 || s >= 20) return 0.0;
  const double x = std::sin(std::numbers::pi * (s - 10) / 10);
  return 5 * x * x * x * x;
}

}  // namespace

TEST_CASE("first source against the closed-form gamma") {
  const auto p = market(0.5, 1);
  const Grid g = grid_for(p, 15, 400, 50);
  const Surface v0 = closed_form_surface(g, Call{15}, p);
  const Surface F1 = source_F_n(1, {v0}, p);
  const std::size_t k = *g.node_of(15);
  for (std::size_t n : {0u, 10u, 25u, 40u}) {
    const double gam = bs_gamma_call(g.t()[n], 15, 15, p);
    CHECK(F1(n, k) == doctest::Approx(225 * 0.25 / 4 * gam * gam).epsilon(1e-3));
    CHECK(F1(n, k) > 0.0);
  }
  for (double x : F1.values()) CHECK(x >= 0.0);

  const Surface F1_half = source_F_n(1, {v0}, market(0.5, 1, 2.0));
  for (std::size_t i = 0; i < F1.values().size(); ++i) CHECK(F1_half.values()[i] == doctest::Approx(F1.values()[i] / 2).epsilon(1e-15).scale(1e-300));
}

TEST_CASE("second source unrolls the convolution sum") {
  const auto p = market(0.5, 1, 1.5);
  const Grid g = grid_for(p, 15, 80, 30);
  const Surface v0 = closed_form_surface(g, Call{15}, p);
  Surface v1 = v_n_recursive(1, terminal_from(Call{15}), p, g).term;
  v1.order = 1;
  const Surface F2 = source_F_n(2, {v0, v1}, p);
  const Surface g0 = surface_gamma(v0), g1 = surface_gamma(v1);
  for (std::size_t n = 0; n < g.N(); ++n)
    for (std::size_t i = 0; i < g.M(); ++i) {
      const double s = g.s()[i];
      const double expected = s * s * 0.25 / (4 * 1.5) * 2 * g0(n, i) * g1(n, i);
      CHECK(F2(n, i) == doctest::Approx(expected).epsilon(1e-12).scale(1e-300));
    }
}

TEST_CASE("surface gamma is exact on quadratics, ends included") {
  const auto p = market(0.5, 1);
  const Grid g = grid_for(p, 15, 50, 4);
  std::vector<double> vals;
  for (std::size_t n = 0; n < g.N(); ++n)
    for (double s : g.s()) vals.push_back((n + 1) * s * s + 2 * s);
  const Surface gam = surface_gamma(Surface(g, vals));
  for (std::size_t n = 0; n < g.N(); ++n)
    for (std::size_t i = 0; i < g.M(); ++i) CHECK(gam(n, i) == doctest::Approx(2.0 * (n + 1)).epsilon(1e-7));
}

TEST_CASE("source dependencies") {
  const auto p = market(0.5, 1);
  const Grid g = grid_for(p, 15, 40, 10);
  const Surface v0 = closed_form_surface(g, Call{15}, p);
  CHECK_THROWS_AS(source_F_n(2, {v0}, p), DependencyError);
  Surface wrong = v0;
  wrong.order = 3;
  CHECK_THROWS_AS(source_F_n(2, {v0, wrong}, p), DependencyError);
  Surface other = closed_form_surface(grid_for(p, 15, 41, 10), Call{15}, p);
  other.order = 1;
  CHECK_THROWS_AS(source_F_n(2, {v0, other}, p), ConfigError);
  RecursionOptions opt;
  CHECK_THROWS_AS(expansion_terms(5, terminal_from(Call{15}), p, g, opt), ConfigError);
  opt.max_order = 5;
  CHECK_NOTHROW(expansion_terms(5, terminal_from(Call{15}), p, g, opt));
  CHECK_THROWS_AS(expansion_terms(0, terminal_from(Call{15}), p, g), DomainError);
}

TEST_CASE("recursion matches the exact first-order term") {
  const auto p = market(0.5, 1);
  const Grid g = grid_for(p, 15, 400, 2000);
  const auto term = v_n_recursive(1, terminal_from(Call{15}), p, g);
  CHECK(term.order == 1);
  CHECK(term.provenance == "pde-recursion");
  const std::size_t k = *g.node_of(15);
  CHECK(term.term(0, k) == doctest::Approx(v1_exact_call(0, 15, 15, p)).epsilon(0.01));
  for (double s : {10.0, 20.0})
    CHECK(term.term.at(0, s) == doctest::Approx(v1_exact_call(0, s, 15, p)).epsilon(0.02));
}

TEST_CASE("terminal rows, sign and homogeneity") {
  const auto p = market(0.4, 1.2);
  const Grid g = grid_for(p, 15, 120, 60);
  for (const Payoff& pay : {Payoff(Call{15}), Payoff(Put{15}), Payoff(CallSpread{15, 18, 1})}) {
    const auto terms = expansion_terms(2, terminal_from(pay), p, g);
    REQUIRE(terms.size() == 2);
    for (const auto& t : terms) {
      for (double x : t.term.row(g.N() - 1)) CHECK(x == 0.0);
    }
    for (double x : terms[0].term.values()) CHECK(x >= 0.0);
    for (double x : terms[0].source.values()) CHECK(x >= 0.0);
    const auto scaled = expansion_terms(2, terminal_from(pay), market(0.4, 1.2, 2.0), g);
    for (std::size_t i = 0; i < g.M() * g.N(); ++i) {
      CHECK(scaled[0].term.values()[i] == doctest::Approx(terms[0].term.values()[i] / 2).epsilon(1e-12).scale(1e-300));
      CHECK(scaled[1].term.values()[i] == doctest::Approx(terms[1].term.values()[i] / 4).epsilon(1e-12).scale(1e-300));
    }
  }
}

TEST_CASE("smooth payoff: bounded terms and second-order consistency") {
  const auto p = market(0.5, 1);
  const Grid g = grid_for(p, 15, 300, 600);
  TerminalData bump{sin_bump, {15}, "sin4 bump", false};
  // sup |(s^2 + 1) v_ss| of both terms; it must not grow under refinement.
  auto bounds = [&](const Grid& grid) {
    const auto t = expansion_terms(2, bump, p, grid);
    std::array<double, 2> b{0, 0};
    for (int o = 0; o < 2; ++o) {
      const Surface gam = surface_gamma(t[o].term);
      for (std::size_t n = 0; n < grid.N(); ++n)
        for (std::size_t i = 0; i < grid.M(); ++i) {
          const double s = grid.s()[i];
          b[o] = std::max(b[o], std::abs((s * s + 1) * gam(n, i)));
        }
    }
    return b;
  };
  const auto coarse = bounds(grid_for(p, 15, 150, 300));
  const auto fine = bounds(g);
  for (int o = 0; o < 2; ++o) {
    CHECK(std::isfinite(fine[o]));
    CHECK(fine[o] == doctest::Approx(coarse[o]).epsilon(0.05));
  }
  const auto terms = expansion_terms(2, bump, p, g);

  const Surface v0 = solve_linear_with_source(g, p, bump);
  const std::size_t k = *g.node_of(15);
  std::vector<double> r;
  for (double eps : {0.1, 0.05, 0.025}) {
    MarketParams q = p;
    q.epsilon = eps;
    const Surface v = solve_nonlinear(g, q, bump);
    r.push_back((v(0, k) - v0(0, k) - eps * terms[0].term(0, k)) / (eps * eps));
  }
  const double v2 = terms[1].term(0, k);
  for (double x : r) CHECK(std::abs(x) < 10 * std::abs(v2) + 1e-3);
  CHECK(r.back() == doctest::Approx(v2).epsilon(0.2));
}

TEST_CASE("first-order ratio at the money") {
  const auto p = market(0.5, 1);
  const Grid g = grid_for(p, 15, 300, 600);
  const auto v1 = v_n_recursive(1, terminal_from(Call{15}), p, g);
  const Surface v0 = solve_linear_with_source(g, p, terminal_from(Call{15}));
  const std::size_t k = *g.node_of(15);
  for (double eps : {0.1, 0.05, 0.025}) {
    MarketParams q = p;
    q.epsilon = eps;
    const double ratio = (solve_nonlinear(g, q, terminal_from(Call{15}))(0, k) - v0(0, k)) / (eps * v1.term(0, k));
    CHECK(ratio == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("Monte-Carlo oracle") {
  const auto p = market(0.5, 1);
  McConfig mc;
  const auto est = v1_mc_oracle(Call{15}, 0, 15, p, mc);
  const double exact = v1_exact_call(0, 15, 15, p);
  CHECK(est.std_error > 0.0);
  CHECK(std::abs(est.estimate - exact) < 3 * est.std_error);
  // Put and call share the gamma.
  const auto put = v1_mc_oracle(Put{15}, 0, 15, p, mc);
  CHECK(put.estimate == est.estimate);

  const auto at_T = v1_mc_oracle(Call{15}, 1.0, 15, p, mc);
  CHECK(at_T.estimate == 0.0);
  CHECK(at_T.std_error == 0.0);

  mc.paths = 5000;
  const auto a = v1_mc_oracle(Call{15}, 0.2, 13, p, mc);
  const auto b = v1_mc_oracle(Call{15}, 0.2, 13, market(0.5, 1, 2.0), mc);
  CHECK(a.estimate / b.estimate == 2.0);
  CHECK(v1_mc_oracle(Call{15}, 0.2, 13, p, mc).estimate == a.estimate);
  CHECK_THROWS_AS(v1_mc_oracle(Digital{15}, 0, 15, p, mc), ConfigError);

  const auto p10 = market(0.5, 10);
  mc.paths = 100000;
  const auto long_dated = v1_mc_oracle(Call{15}, 0, 15, p10, mc);
  CHECK(std::abs(long_dated.estimate - v1_exact_call(0, 15, 15, p10)) < 3 * long_dated.std_error);
}

TEST_CASE("digital divergence probe") {
  const auto p = market(0.5, 1);
  CHECK_THROWS_AS(digital_divergence_probe(0, 25, p, 25, 0.0), DomainError);
  CHECK_THROWS_AS(digital_divergence_probe(0, 25, p, 25, 1.0), DomainError);
  CHECK_THROWS_AS(digital_divergence_probe(0.5, 25, p, 25, 0.6), DomainError);
  const double a = digital_divergence_probe(0, 25, p, 25, 1e-2);
  const double b = digital_divergence_probe(0, 25, p, 25, 2.5e-3);
  const double c = digital_divergence_probe(0, 25, p, 25, 6.25e-4);
  CHECK(b / a == doctest::Approx(2.0).epsilon(0.1));
  CHECK(c / b == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::abs(c / b - 2) < std::abs(b / a - 2));
  for (double s : {15.0, 22.0, 25.0, 28.0, 40.0}) {
    double prev = 0.0;
    for (double eta : {0.5, 0.1, 1e-2, 1e-3, 1e-4}) {
      const double v = digital_divergence_probe(0, s, p, 25, eta);
      CHECK(v > prev);
      prev = v;
    }
  }
  // Three standard deviations out the Gaussian factor dominates.
  const double far = digital_divergence_probe(0, 25 * std::exp(6 * 0.5), p, 25, 1e-2);
  CHECK(far < 1e-3 * a);
  CHECK(digital_divergence_probe(0, 25 * std::exp(-6 * 0.5), p, 25, 1e-2) < 1e-3 * a);
}
