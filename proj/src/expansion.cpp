#include "illiq/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "illiq/analytic.hpp"
#include "illiq/errors.hpp"
#include "illiq/quadrature.hpp"

namespace illiq {

Surface surface_gamma(const Surface& surface) {
  const auto& g = surface.grid();
  const auto& s = g.s();
  const std::size_t M = g.M(), N = g.N();
  std::vector<double> out(M * N);
  // Second derivative of the parabola through three nodes.
  auto three_point = [](double x0, double x1, double x2, double u0, double u1, double u2) {
    const double d01 = (u1 - u0) / (x1 - x0);
    const double d12 = (u2 - u1) / (x2 - x1);
    return 2.0 * (d12 - d01) / (x2 - x0);
  };
  for (std::size_t n = 0; n < N; ++n) {
    const auto u = surface.row(n);
    double* o = out.data() + n * M;
    for (std::size_t i = 1; i + 1 < M; ++i) o[i] = three_point(s[i - 1], s[i], s[i + 1], u[i - 1], u[i], u[i + 1]);
    o[0] = three_point(s[0], s[1], s[2], u[0], u[1], u[2]);
    o[M - 1] = three_point(s[M - 3], s[M - 2], s[M - 1], u[M - 3], u[M - 2], u[M - 1]);
  }
  Surface r(g, std::move(out));
  r.meta = surface.meta;
  r.meta["quantity"] = "second derivative";
  r.order = surface.order;
  return r;
}

namespace {

double source_factor(const MarketParams& params, double t, double s) {
  const double sigma = params.sigma_at(t, s);
  return s * s * sigma * sigma / (4.0 * params.ell_at(t, s));
}

}  // namespace

Surface source_F_n(int n, const std::vector<Surface>& terms, const MarketParams& params) {
  if (n < 1) throw DomainError("source_F_n: n must be >= 1");
  if (terms.size() < static_cast<std::size_t>(n))
    throw DependencyError("source_F_n: order " + std::to_string(terms.size()) + " is missing");
  for (int k = 0; k < n; ++k) {
    if (terms[k].order != k) throw DependencyError("source_F_n: order " + std::to_string(k) + " is missing");
    if (!terms[k].grid().same_as(terms[0].grid())) throw ConfigError("source_F_n: terms live on different grids");
  }
  std::vector<Surface> gammas;
  gammas.reserve(n);
  for (int k = 0; k < n; ++k) gammas.push_back(surface_gamma(terms[k]));
  const auto& g = terms[0].grid();
  const std::size_t M = g.M(), N = g.N();
  std::vector<double> f(M * N);
  for (std::size_t lvl = 0; lvl < N; ++lvl) {
    for (std::size_t i = 0; i < M; ++i) {
      double sum = 0.0;
      for (int k = 0; k < n; ++k) sum += gammas[k](lvl, i) * gammas[n - 1 - k](lvl, i);
      f[lvl * M + i] = source_factor(params, g.t()[lvl], g.s()[i]) * sum;
    }
  }
  Surface out(g, std::move(f));
  out.order = n;
  out.meta["quantity"] = "source F_" + std::to_string(n);
  return out;
}

std::vector<ExpansionTerm> expansion_terms(int n, const TerminalData& terminal, const MarketParams& params,
                                           const Grid& grid, const RecursionOptions& options) {
  if (n < 1) throw DomainError("expansion order must be >= 1");
  if (n > options.max_order)
    throw ConfigError("expansion order " + std::to_string(n) + " exceeds the configured limit " +
                      std::to_string(options.max_order));
  params.validate();
  Discretization disc(grid, params);
  const std::size_t M = grid.M(), N = grid.N();
  const auto& s = grid.s();
  const std::size_t orders = static_cast<std::size_t>(n) + 1;

  std::vector<std::vector<double>> u(orders, std::vector<double>(M, 0.0));
  u[0] = terminal_values(terminal, grid);
  std::vector<std::vector<double>> gam_old(orders, std::vector<double>(M)), gam_new = gam_old;
  std::vector<std::vector<double>> terms(orders, std::vector<double>(M * N)), sources = terms;
  std::vector<double> factor_old(M), factor_new(M), rate(M);

  auto source_at = [&](const std::vector<std::vector<double>>& gam, const std::vector<double>& factor,
                       std::size_t k, std::size_t i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += gam[j][i] * gam[k - 1 - j][i];
    return factor[i] * sum;
  };

  auto advance = [&](double t_old, double dt, double theta) {
    const double t_new = t_old - dt;
    for (std::size_t i = 0; i < M; ++i) {
      factor_old[i] = source_factor(params, t_old, s[i]);
      factor_new[i] = source_factor(params, t_new, s[i]);
    }
    for (std::size_t k = 0; k < orders; ++k) {
      disc.second_difference(u[k], gam_old[k]);
      if (k == 0) {
        disc.step(u[0], t_old, dt, theta, {});
      } else {
        for (std::size_t i = 0; i < M; ++i)
          rate[i] = theta * source_at(gam_new, factor_new, k, i) +
                    (1.0 - theta) * source_at(gam_old, factor_old, k, i);
        disc.step(u[k], t_old, dt, theta, rate);
      }
      disc.second_difference(u[k], gam_new[k]);
    }
  };
  auto emit = [&](std::size_t level) {
    for (std::size_t i = 0; i < M; ++i) factor_new[i] = source_factor(params, grid.t()[level], s[i]);
    for (std::size_t k = 0; k < orders; ++k) {
      disc.second_difference(u[k], gam_new[k]);
      std::copy(u[k].begin(), u[k].end(), terms[k].begin() + static_cast<std::ptrdiff_t>(level * M));
    }
    for (std::size_t k = 1; k < orders; ++k)
      for (std::size_t i = 0; i < M; ++i) sources[k][level * M + i] = source_at(gam_new, factor_new, k, i);
  };

  // Same step sequence as the single-equation solvers.
  StepSchedule schedule(grid, options.scheme);
  double tau = 0.0;
  emit(N - 1);
  for (std::size_t lvl = 1; lvl < N; ++lvl) {
    const double tau_end = grid.t()[lvl];
    while (tau_end - tau > 1e-13 * grid.T()) {
      const auto plan = schedule.propose(tau, tau_end);
      advance(grid.T() - tau, plan.dt, plan.theta);
      tau = plan.dt == tau_end - tau ? tau_end : tau + plan.dt;
      schedule.accept();
    }
    tau = tau_end;
    emit(N - 1 - lvl);
  }

  std::vector<ExpansionTerm> out;
  for (std::size_t k = 1; k < orders; ++k) {
    Surface term(grid, std::move(terms[k]));
    term.order = static_cast<int>(k);
    term.meta["terminal"] = terminal.description;
    term.meta["quantity"] = "v_" + std::to_string(k);
    Surface src(grid, std::move(sources[k]));
    src.order = static_cast<int>(k);
    src.meta["terminal"] = terminal.description;
    src.meta["quantity"] = "source F_" + std::to_string(k);
    out.push_back({static_cast<int>(k), std::move(term), std::move(src), "pde-recursion"});
  }
  return out;
}

ExpansionTerm v_n_recursive(int n, const TerminalData& terminal, const MarketParams& params, const Grid& grid,
                            const RecursionOptions& options) {
  auto all = expansion_terms(n, terminal, params, grid, options);
  return std::move(all.back());
}

McEstimate v1_mc_oracle(const Payoff& payoff, double t, double s, const MarketParams& params, const McConfig& mc) {
  if (std::holds_alternative<Digital>(payoff.kind()))
    throw ConfigError("the digital first-order term is infinite; use the divergence probe");
  if (mc.paths < 1 || mc.blocks < 1 || mc.time_nodes < 1) throw ConfigError("McConfig counts must be positive");
  if (mc.antithetic && mc.paths < 2) throw ConfigError("antithetic sampling needs at least 2 paths");
  const double sigma = params.sigma_const();
  if (!(s > 0.0)) throw DomainError("v1_mc_oracle: s must be positive");
  const double tau = params.T - t;
  if (tau < 0.0) throw DomainError("t must not exceed T");
  if (tau == 0.0) return {0.0, 0.0};
  const bool const_ell = params.ell.is_constant();

  // T - u = tau w^2 with Gauss-Legendre nodes in w: du = 2 tau w dw absorbs
  // the 1/sqrt(T - u) growth of the inner expectation.
  const auto rule = quad::gauss_legendre(mc.time_nodes);
  const std::size_t K = rule.nodes.size();
  std::vector<double> theta(K), weight(K), drift(K), vol(K), remaining(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double w = 0.5 * (rule.nodes[k] + 1.0);
    remaining[k] = tau * w * w;
    theta[k] = tau - remaining[k];  // u - t
    weight[k] = 0.5 * rule.weights[k] * 2.0 * tau * w;
    drift[k] = -0.5 * sigma * sigma * theta[k];
    vol[k] = sigma * std::sqrt(theta[k]);
  }
  // Path functional: sum over nodes of the weighted S^2 sigma^2/(4 ell) gamma^2
  // (the 1/(4 ell) factor is applied last when ell is constant).
  auto functional = [&](double z) {
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double su = s * std::exp(drift[k] + vol[k] * z);
      const double u = t + theta[k];
      const double g = bs_gamma(payoff, u, su, params);
      double f = su * su * sigma * sigma * g * g;
      if (!const_ell) f /= 4.0 * params.ell_at(u, su);
      acc += weight[k] * f;
    }
    return acc;
  };

  // Independent samples: antithetic pair averages or single paths.
  const std::size_t samples = mc.antithetic ? mc.paths / 2 : mc.paths;
  const std::size_t blocks = std::min(mc.blocks, samples);
  struct Partial {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
  };
  std::vector<Partial> partial(blocks);
  auto run_block = [&](std::size_t b) {
    const std::size_t begin = samples * b / blocks, end = samples * (b + 1) / blocks;
    std::seed_seq seq{static_cast<std::uint32_t>(mc.seed), static_cast<std::uint32_t>(mc.seed >> 32),
                      static_cast<std::uint32_t>(b), 0x9e3779b9u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    Partial p;
    for (std::size_t j = begin; j < end; ++j) {
      const double z = normal(rng);
      const double y = mc.antithetic ? 0.5 * (functional(z) + functional(-z)) : functional(z);
      p.sum += y;
      p.sum_sq += y * y;
      ++p.count;
    }
    partial[b] = p;
  };
  unsigned threads = mc.threads ? mc.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, blocks));
  if (threads <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += threads) run_block(b);
      });
    for (auto& th : pool) th.join();
  }
  // Fixed-order reduction keeps the result independent of the thread count.
  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  for (const auto& p : partial) {
    sum += p.sum;
    sum_sq += p.sum_sq;
    count += p.count;
  }
  const double n = static_cast<double>(count);
  const double mean = sum / n;
  const double var = count > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
  const double scale = const_ell ? 1.0 / (4.0 * params.ell_const()) : 1.0;
  return {scale * mean, scale * std::sqrt(var / n)};
}

double digital_divergence_probe(double t, double s, const MarketParams& params, double K, double eta) {
  const double sigma = params.sigma_const();
  const double ell = params.ell_const();
  const double T = params.T;
  if (!(s > 0.0) || !(K > 0.0)) throw DomainError("divergence probe: s and K must be positive");
  if (!(eta > 0.0 && eta < T - t)) throw DomainError("divergence probe: eta must lie in (0, T - t)");
  const double L = std::log(s / K);
  // u = T - r^2 on r in [sqrt(eta), sqrt(T - t)], du = 2 r dr.
  auto f = [&](double r) {
    const double rem = r * r;
    const double u = T - rem;
    const double A = T + u - 2.0 * t;
    const double e = L / (sigma * std::sqrt(A)) + 0.5 * sigma * (T - 2.0 * u + t) / std::sqrt(A);
    const double g = std::exp(-e * e) / std::pow(A, 1.5);
    return 2.0 * r * g * ((u - t) / (rem * r) + e * e / r);
  };
  const double prefactor = 1.0 / (8.0 * std::numbers::pi * ell * sigma * sigma * K * K);
  const auto est = quad::integrate(f, std::sqrt(eta), std::sqrt(T - t), {0.0, 1e-12, 4000});
  return prefactor * est.value;
}

}  // namespace illiq
