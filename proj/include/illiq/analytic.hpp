#pragma once

#include "illiq/model.hpp"
#include "illiq/payoff.hpp"

// Closed-form Black-Scholes quantities and the integral representations of
// the regularized call and digital problems. Constant sigma and ell, zero rate.
namespace illiq {

struct DValues {
  double d0;
  double d1;
};

/// d1 = ln(s/k)/(sigma sqrt t) + sigma sqrt t / 2, d0 = d1 - sigma sqrt t.
DValues d_functions(double s, double k, double t, double sigma);

double normal_pdf(double x);
double normal_cdf(double x);

struct KernelArgs {
  double tau;
  double v;
  double s;
  double k;
  double x = 0.0;
  double y = 0.0;
  double alpha = 0.0;
};

double delta_kernel(const KernelArgs& a, double sigma);

/// Three-factor Gaussian kernel of the regularized call.
double h_kernel(const KernelArgs& a, double sigma);
/// Signed sum over the four shifted strikes of the call spread below K:
/// sum_{i,j in {1,2}} (-1)^{i+j} h(x - i, y - j).
double h_hat_kernel(const KernelArgs& a, double sigma);

double bs_price(const Payoff& p, double t, double s, const MarketParams& params);
/// Closed-form gamma; the terminal layer (t = T) is rejected.
double bs_gamma(const Payoff& p, double t, double s, const MarketParams& params);
double bs_gamma_call(double t, double s, double K, const MarketParams& params);

enum class RegularizedKind { call, digital };

/// Price of the mollified payoff (call) or of the mollified call spread g_alpha (digital).
double v_bs_alpha(double t, double s, double K, double alpha, const MarketParams& params,
                  RegularizedKind kind);
double v_bs_alpha_gamma(double t, double s, double K, double alpha, const MarketParams& params,
                        RegularizedKind kind);

/// First-order term of the regularized problem, as a triple integral.
double v1_alpha(double t, double s, double K, double alpha, const MarketParams& params,
                RegularizedKind kind, double tol = 1e-7);

/// First-order term of the call, a single integral in the inner time variable.
double v1_exact_call(double t, double s, double K, const MarketParams& params);

struct CallExpansionCoeffs {
  double bs_alpha2;  ///< coefficient of alpha^2 in v_bs_alpha - v_bs
  double v1_alpha1;  ///< coefficient of alpha in v1_alpha - v1 (negative)
};
CallExpansionCoeffs expansion_coeffs_call(double t, double s, double K, const MarketParams& params,
                                          const PhiMoments& m = phi_moments());

struct DigitalExpansionCoeffs {
  double bs_alpha1;     ///< coefficient of alpha in v_bs_alpha - v_bs
  double v1_alpha_inv;  ///< coefficient of 1/alpha in v1_alpha
};
DigitalExpansionCoeffs expansion_coeffs_digital(double t, double s, double K,
                                                const MarketParams& params,
                                                const PhiMoments& m = phi_moments());

struct TheoremParams {
  double a;
  double beta;
  double nu;
  double c_star;
};

/// The exponent a forced by the digital theorem: (2/5)(1 - gamma).
double digital_theorem_a(double beta, double nu);

/// Throws PreconditionError naming the violated inequality.
void check_theorem_window(const TheoremParams& p, RegularizedKind kind);

/// Super-solution bound on V^eps at (t, s) with alpha = eps^a.
double theorem_upper_bound(double t, double s, double K, const MarketParams& params,
                           const TheoremParams& tp, RegularizedKind kind);

/// Remainder part of the bound (the two c_star terms), per unit c_star.
double theorem_remainder_per_cstar(double t, const MarketParams& params, const TheoremParams& tp,
                                   RegularizedKind kind);

/// int_0^inf (exp(-u^2) - 1)/u^2 du by quadrature.
double gaussian_defect_integral();

}  // namespace illiq
