#include "illiq/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "illiq/errors.hpp"
#include "illiq/quadrature.hpp"

namespace illiq {

namespace {

constexpr double kPi = std::numbers::pi;

double time_to_maturity(double t, const MarketParams& params) {
  const double tau = params.T - t;
  if (tau < 0.0) throw DomainError("t must not exceed the maturity T");
  return tau;
}

double call_price(double s, double k, double tau, double sigma) {
  const auto d = d_functions(s, k, tau, sigma);
  return s * normal_cdf(d.d1) - k * normal_cdf(d.d0);
}

double call_gamma(double s, double k, double tau, double sigma) {
  const auto d = d_functions(s, k, tau, sigma);
  return normal_pdf(d.d1) / (s * sigma * std::sqrt(tau));
}

void check_alpha(double K, double alpha, RegularizedKind kind) {
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  const double reach = kind == RegularizedKind::call ? alpha : 3.0 * alpha;
  if (!(K - reach > 0.0)) throw DomainError("alpha too large: shifted strikes must stay positive");
}

// Strike offsets (in units of alpha) and signs of the calls whose mix is the
// regularized payoff: the call itself, or (C(K-2a) - C(K-a))/a.
struct StrikeMix {
  int count;
  double offset[2];
  double weight[2];
};

StrikeMix strike_mix(double alpha, RegularizedKind kind) {
  if (kind == RegularizedKind::call) return {1, {0.0, 0.0}, {1.0, 0.0}};
  return {2, {-2.0, -1.0}, {1.0 / alpha, -1.0 / alpha}};
}

double log_shift(double alpha, double x, double k) {
  const double arg = 1.0 + alpha * x / k;
  if (!(arg > 0.0)) throw DomainError("kernel log argument must be positive");
  return std::log(arg);
}

// h with the two log-shifts already evaluated.
double h_from_logs(double tau, double v, double delta, double sigma, double lx, double ly) {
  const double w = 2.0 * tau - v;
  const double diff = lx - ly;
  const double e = -delta * delta + delta / (sigma * std::sqrt(w)) * (lx + ly) -
                   tau / (2.0 * sigma * sigma * v * w) * diff * diff -
                   lx * ly / (sigma * sigma * w);
  return std::exp(e);
}

}  // namespace

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

DValues d_functions(double s, double k, double t, double sigma) {
  if (!(s > 0.0) || !(k > 0.0)) throw DomainError("d_functions: s and k must be positive");
  if (!(t > 0.0)) throw DomainError("d_functions: t must be positive");
  const double vol = sigma * std::sqrt(t);
  const double d1 = std::log(s / k) / vol + 0.5 * vol;
  return {d1 - vol, d1};
}

double delta_kernel(const KernelArgs& a, double sigma) {
  if (!(a.v >= 0.0 && a.v < 2.0 * a.tau)) throw DomainError("delta_kernel: need 0 <= v < 2 tau");
  if (!(a.s > 0.0) || !(a.k > 0.0)) throw DomainError("delta_kernel: s and k must be positive");
  const double r = std::sqrt(2.0 * a.tau - a.v);
  return std::log(a.s / a.k) / (sigma * r) - 0.5 * sigma * (a.tau - 2.0 * a.v) / r;
}

double h_kernel(const KernelArgs& a, double sigma) {
  if (!(a.v > 0.0 && a.v < a.tau)) throw DomainError("h_kernel: need 0 < v < tau");
  const double delta = delta_kernel(a, sigma);
  return h_from_logs(a.tau, a.v, delta, sigma, log_shift(a.alpha, a.x, a.k), log_shift(a.alpha, a.y, a.k));
}

double h_hat_kernel(const KernelArgs& a, double sigma) {
  double sum = 0.0;
  for (int i = 1; i <= 2; ++i) {
    for (int j = 1; j <= 2; ++j) {
      KernelArgs b = a;
      b.x = a.x - i;
      b.y = a.y - j;
      sum += ((i + j) % 2 == 0 ? 1.0 : -1.0) * h_kernel(b, sigma);
    }
  }
  return sum;
}

double bs_price(const Payoff& p, double t, double s, const MarketParams& params) {
  const double sigma = params.sigma_const();
  const double tau = time_to_maturity(t, params);
  if (s < 0.0) throw DomainError("bs_price: s must be >= 0");
  if (tau == 0.0 || s == 0.0) return p(s);
  struct Visitor {
    double s, tau, sigma;
    double operator()(const Call& c) const { return call_price(s, c.K, tau, sigma); }
    double operator()(const Put& q) const { return call_price(s, q.K, tau, sigma) - s + q.K; }
    double operator()(const Digital& d) const {
      return normal_cdf(d_functions(s, d.K, tau, sigma).d0);
    }
    double operator()(const CallSpread& c) const {
      return c.scale * (call_price(s, c.K1, tau, sigma) - call_price(s, c.K2, tau, sigma));
    }
    double operator()(const SampledCustom&) const {
      throw UnsupportedRegime("no closed-form price for a sampled payoff");
    }
  };
  return std::visit(Visitor{s, tau, sigma}, p.kind());
}

double bs_gamma(const Payoff& p, double t, double s, const MarketParams& params) {
  const double sigma = params.sigma_const();
  const double tau = time_to_maturity(t, params);
  if (!(tau > 0.0)) throw DomainError("bs_gamma: tau must be positive");
  if (!(s > 0.0)) throw DomainError("bs_gamma: s must be positive");
  struct Visitor {
    double s, tau, sigma;
    double operator()(const Call& c) const { return call_gamma(s, c.K, tau, sigma); }
    double operator()(const Put& q) const { return call_gamma(s, q.K, tau, sigma); }
    double operator()(const Digital& d) const {
      const auto dv = d_functions(s, d.K, tau, sigma);
      return -normal_pdf(dv.d0) * dv.d1 / (s * s * sigma * sigma * tau);
    }
    double operator()(const CallSpread& c) const {
      return c.scale * (call_gamma(s, c.K1, tau, sigma) - call_gamma(s, c.K2, tau, sigma));
    }
    double operator()(const SampledCustom&) const {
      throw UnsupportedRegime("no closed-form gamma for a sampled payoff");
    }
  };
  return std::visit(Visitor{s, tau, sigma}, p.kind());
}

double bs_gamma_call(double t, double s, double K, const MarketParams& params) {
  const double sigma = params.sigma_const();
  const double tau = params.T - t;
  if (!(tau > 0.0)) throw DomainError("bs_gamma_call: tau must be positive");
  if (!(s > 0.0)) throw DomainError("bs_gamma_call: s must be positive");
  return call_gamma(s, K, tau, sigma);
}

double v_bs_alpha(double t, double s, double K, double alpha, const MarketParams& params,
                  RegularizedKind kind) {
  const double sigma = params.sigma_const();
  const double tau = time_to_maturity(t, params);
  check_alpha(K, alpha, kind);
  if (tau == 0.0 || s == 0.0) {
    const auto mode = kind == RegularizedKind::call ? SmoothingMode::direct : SmoothingMode::digital_presmooth;
    const Payoff base = kind == RegularizedKind::call ? Payoff(Call{K}) : Payoff(Digital{K});
    return mollify(MollifiedPayoff{base, alpha, mode}, s);
  }
  const auto mix = strike_mix(alpha, kind);
  auto f = [&](double u) {
    double acc = 0.0;
    for (int i = 0; i < mix.count; ++i)
      acc += mix.weight[i] * call_price(s, K + alpha * (u + mix.offset[i]), tau, sigma);
    return bump_phi(u) * acc;
  };
  return quad::integrate(f, -1.0, 1.0, {1e-13, 1e-14, 2000}).value;
}

double v_bs_alpha_gamma(double t, double s, double K, double alpha, const MarketParams& params,
                        RegularizedKind kind) {
  const double sigma = params.sigma_const();
  const double tau = params.T - t;
  if (!(tau > 0.0)) throw DomainError("v_bs_alpha_gamma: tau must be positive");
  if (!(s > 0.0)) throw DomainError("v_bs_alpha_gamma: s must be positive");
  check_alpha(K, alpha, kind);
  const auto mix = strike_mix(alpha, kind);
  auto f = [&](double u) {
    double acc = 0.0;
    for (int i = 0; i < mix.count; ++i)
      acc += mix.weight[i] * call_gamma(s, K + alpha * (u + mix.offset[i]), tau, sigma);
    return bump_phi(u) * acc;
  };
  return quad::integrate(f, -1.0, 1.0, {1e-11, 1e-12, 2000}).value;
}

namespace {

// Fixed composite Gauss-Legendre used for the two inner levels of v1_alpha.
// Deterministic rules keep the inner values smooth in the outer variable, so
// the adaptive outer rule is not driven by nested-tolerance noise.
const quad::Rule& inner_rule() {
  static const quad::Rule r = quad::gauss_legendre(24);
  return r;
}

template <class F>
double panel_sum(F& f, double a, double b) {
  const auto& r = inner_rule();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) acc += r.weights[i] * f(mid + half * r.nodes[i]);
  return half * acc;
}

// int_lo^hi f over panels split at the fixed breakpoints and graded toward hi
// with widths width, 2 width, 4 width, ...
template <class F>
double graded_toward_upper(F& f, double lo, double hi, double width, const std::vector<double>& fixed) {
  std::vector<double> cuts{lo, hi};
  for (double b : fixed)
    if (b > lo && b < hi) cuts.push_back(b);
  for (double d = width; hi - d > lo; d *= 2.0) cuts.push_back(hi - d);
  std::sort(cuts.begin(), cuts.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] > cuts[i]) acc += panel_sum(f, cuts[i], cuts[i + 1]);
  return acc;
}

}  // namespace

double v1_alpha(double t, double s, double K, double alpha, const MarketParams& params,
                RegularizedKind kind, double tol) {
  const double sigma = params.sigma_const();
  const double ell = params.ell_const();
  const double tau = time_to_maturity(t, params);
  if (!(s > 0.0)) throw DomainError("v1_alpha: s must be positive");
  check_alpha(K, alpha, kind);
  if (tau == 0.0) return 0.0;

  const bool digital = kind == RegularizedKind::digital;
  const double prefactor = 1.0 / (8.0 * ell * kPi * (digital ? alpha * alpha : 1.0));
  const double log_sk = std::log(s / K);

  // The signed sum over shifted strikes folds into one weight:
  // sum (-1)^{i+j} phi(x+i) phi(y+j) = Phi(x) Phi(y), Phi(x) = phi(x+2) - phi(x+1) on [-3, 0].
  const double lo = digital ? -3.0 : -1.0;
  const double hi = digital ? 0.0 : 1.0;
  const std::vector<double> fixed = digital ? std::vector<double>{-2.0, -1.0} : std::vector<double>{0.0};
  auto weight = [digital](double x) { return digital ? bump_phi(x + 2.0) - bump_phi(x + 1.0) : bump_phi(x); };

  // v = tau w^2 removes the 1/sqrt(v) endpoint singularity.
  auto over_w = [&](double w) {
    if (w == 0.0) w = 1e-300;
    const double v = tau * w * w;
    const double r = std::sqrt(2.0 * tau - v);
    const double delta = log_sk / (sigma * r) - 0.5 * sigma * (tau - 2.0 * v) / r;
    // Width in x - y of the squared-log-difference factor.
    const double ridge = K / alpha * sigma * std::sqrt(2.0 * v * (2.0 * tau - v) / tau);
    const double width = std::max(ridge, 1e-12);
    // The kernel is symmetric in (x, y): integrate over y < x and double.
    auto over_x = [&](double x) {
      const double px = weight(x);
      if (px == 0.0) return 0.0;
      const double lx = log_shift(alpha, x, K);
      auto over_y = [&](double y) {
        return weight(y) * h_from_logs(tau, v, delta, sigma, lx, log_shift(alpha, y, K));
      };
      return px * graded_toward_upper(over_y, lo, x, width, fixed);
    };
    double inner = 0.0;
    for (double a = lo; a < hi; a += 0.25) inner += panel_sum(over_x, a, a + 0.25);
    return 4.0 / std::sqrt(2.0 - w * w) * inner;
  };
  return prefactor * quad::integrate(over_w, 0.0, 1.0, {tol / prefactor, 0.0, 4000}).value;
}

double v1_exact_call(double t, double s, double K, const MarketParams& params) {
  const double sigma = params.sigma_const();
  const double ell = params.ell_const();
  const double tau = time_to_maturity(t, params);
  if (!(s > 0.0) || !(K > 0.0)) throw DomainError("v1_exact_call: s and K must be positive");
  if (tau == 0.0) return 0.0;
  const double log_sk = std::log(s / K);
  auto f = [&](double w) {
    const double v = tau * w * w;
    const double r = std::sqrt(2.0 * tau - v);
    const double delta = log_sk / (sigma * r) - 0.5 * sigma * (tau - 2.0 * v) / r;
    return 2.0 / std::sqrt(2.0 - w * w) * std::exp(-delta * delta);
  };
  const double prefactor = 1.0 / (8.0 * ell * kPi);
  return prefactor * quad::integrate(f, 0.0, 1.0, {1e-10 / prefactor, 1e-14, 2000}).value;
}

CallExpansionCoeffs expansion_coeffs_call(double t, double s, double K, const MarketParams& params,
                                          const PhiMoments& m) {
  const double sigma = params.sigma_const();
  const double ell = params.ell_const();
  const double tau = params.T - t;
  if (!(tau > 0.0)) throw DomainError("expansion coefficients need tau > 0");
  const double d0 = d_functions(s, K, tau, sigma).d0;
  const double g = std::exp(-0.5 * d0 * d0) / (K * sigma * std::sqrt(2.0 * kPi * tau));
  return {0.5 * g * m.second, -g / (8.0 * ell) * m.abs_diff};
}

DigitalExpansionCoeffs expansion_coeffs_digital(double t, double s, double K,
                                                const MarketParams& params, const PhiMoments& m) {
  const double sigma = params.sigma_const();
  const double ell = params.ell_const();
  const double tau = params.T - t;
  if (!(tau > 0.0)) throw DomainError("expansion coefficients need tau > 0");
  const double d0 = d_functions(s, K, tau, sigma).d0;
  const double g = std::exp(-0.5 * d0 * d0) / (K * sigma * std::sqrt(2.0 * kPi * tau));
  return {1.5 * g, g / (8.0 * ell) * m.digital_kernel};
}

double digital_theorem_a(double beta, double nu) {
  const double gamma = (2.0 * beta + nu - 1.0) / (2.0 * beta + nu + 4.0);
  return 0.4 * (1.0 - gamma);
}

void check_theorem_window(const TheoremParams& p, RegularizedKind kind) {
  auto fail = [](const std::string& what) { throw PreconditionError("theorem window violated: " + what); };
  if (!(p.beta >= 0.5 && p.beta <= 1.0)) fail("1/2 <= beta <= 1");
  if (!(p.nu >= 0.0 && p.nu <= 1.0)) fail("0 <= nu <= 1");
  if (!(p.c_star >= 0.0)) fail("c_star >= 0");
  const double q = 2.0 * p.beta + p.nu;
  if (kind == RegularizedKind::call) {
    if (!(q > 1.0 && q < 2.0)) fail("1 < 2 beta + nu < 2");
    if (!(p.a > 0.5)) fail("a > 1/2");
    if (!(p.a < 1.0 / q)) fail("a < 1/(2 beta + nu)");
  } else {
    const double gamma = (q - 1.0) / (q + 4.0);
    if (!(gamma > 0.0 && gamma < 1.0)) fail("0 < gamma < 1");
    if (!(std::abs(p.a - digital_theorem_a(p.beta, p.nu)) <= 1e-9)) fail("a = (2/5)(1 - gamma)");
  }
}

double theorem_remainder_per_cstar(double t, const MarketParams& params, const TheoremParams& tp,
                                   RegularizedKind kind) {
  const double tau = time_to_maturity(t, params);
  const double eps = params.epsilon;
  if (eps == 0.0) return 0.0;
  const double q = 2.0 * tp.beta + tp.nu;
  const double p1 = kind == RegularizedKind::call ? 2.0 - tp.a * q : 2.0 - 3.0 * tp.a - tp.a * q;
  const double p2 = kind == RegularizedKind::call ? 3.0 - 2.0 * tp.a * (1.0 + tp.nu)
                                                  : 3.0 - 2.0 * tp.a * (3.0 + tp.nu);
  return std::pow(tau, tp.beta + 0.5 * (tp.nu - 1.0)) * std::pow(eps, p1) +
         std::pow(tau, tp.nu) * std::pow(eps, p2);
}

double theorem_upper_bound(double t, double s, double K, const MarketParams& params,
                           const TheoremParams& tp, RegularizedKind kind) {
  check_theorem_window(tp, kind);
  const double eps = params.epsilon;
  if (eps < 0.0) throw DomainError("epsilon must be >= 0");
  if (eps == 0.0) {
    const Payoff p = kind == RegularizedKind::call ? Payoff(Call{K}) : Payoff(Digital{K});
    return bs_price(p, t, s, params);
  }
  const double alpha = std::pow(eps, tp.a);
  double value = v_bs_alpha(t, s, K, alpha, params, kind);
  if (params.T - t > 0.0) value += eps * v1_alpha(t, s, K, alpha, params, kind);
  return value + tp.c_star * theorem_remainder_per_cstar(t, params, tp, kind);
}

double gaussian_defect_integral() {
  auto f = [](double u) { return u == 0.0 ? -1.0 : std::expm1(-u * u) / (u * u); };
  const double head = quad::integrate(f, 0.0, 1.0, {1e-15, 1e-15, 2000}).value;
  const double tail = quad::integrate_to_infinity(f, 1.0, 1e-14);
  return head + tail;
}

}  // namespace illiq
