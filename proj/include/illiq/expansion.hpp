#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "illiq/pde.hpp"

namespace illiq {

/// One term v^(n) of the expansion in epsilon with its source F_n.
struct ExpansionTerm {
  int order = 0;
  Surface term;
  Surface source;
  std::string provenance;  ///< "pde-recursion", "quadrature" or "monte-carlo"
};

/// Second derivative of every level of a surface: centered three-point
/// stencil inside, one-sided three-point stencil at both ends.
Surface surface_gamma(const Surface& surface);

/// F_n = s^2 sigma^2/(4 ell) sum_{k=0}^{n-1} v^(k)_ss v^(n-1-k)_ss from the
/// surfaces of orders 0..n-1 (terms[k] must have order k). Throws
/// DependencyError when an order is missing.
Surface source_F_n(int n, const std::vector<Surface>& terms, const MarketParams& params);

struct RecursionOptions {
  SchemeOptions scheme;
  int max_order = 4;
};

/// v^(0..n) marched together: each internal step advances v^(0), then every
/// higher order with its source evaluated from the lower orders at the same
/// step times. Returns orders 1..n (element k-1 is order k).
std::vector<ExpansionTerm> expansion_terms(int n, const TerminalData& terminal, const MarketParams& params,
                                           const Grid& grid, const RecursionOptions& options = {});

/// The order-n term alone.
ExpansionTerm v_n_recursive(int n, const TerminalData& terminal, const MarketParams& params, const Grid& grid,
                            const RecursionOptions& options = {});

struct McConfig {
  std::size_t paths = 100000;
  std::size_t steps = 0;  ///< unused: S_u is sampled exactly
  std::uint64_t seed = 20240601;
  bool antithetic = true;
  std::size_t time_nodes = 48;  ///< Gauss-Legendre nodes of the outer time integral
  std::size_t blocks = 64;      ///< fixed work partition, independent of the thread count
  unsigned threads = 0;         ///< 0: hardware concurrency
};

struct McEstimate {
  double estimate;
  double std_error;
};

/// Monte-Carlo Feynman-Kac estimate of v^(1)(t, s) for a payoff with a
/// closed-form gamma, constant sigma. Rejects the digital, whose v^(1) is infinite.
McEstimate v1_mc_oracle(const Payoff& payoff, double t, double s, const MarketParams& params,
                        const McConfig& mc = {});

/// The digital v^(1) integrals with the upper limit T - eta instead of T.
double digital_divergence_probe(double t, double s, const MarketParams& params, double K, double eta);

}  // namespace illiq
