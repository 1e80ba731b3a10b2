#pragma once

#include <functional>
#include <string_view>
#include <variant>

namespace illiq {

/// A model coefficient that is either a constant or a function of (t, s).
///
/// Closed-form routines ask for `constant()`, which throws UnsupportedRegime
/// for the callable case; the PDE and Monte-Carlo paths evaluate pointwise.
class Coefficient {
 public:
  using Function = std::function<double(double t, double s)>;

  Coefficient(double value) : rep_(value) {}  // NOLINT(google-explicit-constructor)
  explicit Coefficient(Function f) : rep_(std::move(f)) {}

  bool is_constant() const noexcept { return std::holds_alternative<double>(rep_); }

  double operator()(double t, double s) const {
    if (const auto* v = std::get_if<double>(&rep_)) return *v;
    return std::get<Function>(rep_)(t, s);
  }

  /// The constant value; `what` names the coefficient in the error message.
  double constant(std::string_view what) const;

 private:
  std::variant<double, Function> rep_;
};

/// Volatility, liquidity level and illiquidity parameter of the market.
///
/// The effective liquidity function is ell / epsilon, so epsilon = 0 is the
/// perfectly liquid Black-Scholes market.
struct MarketParams {
  Coefficient sigma{0.2};
  Coefficient ell{1.0};
  double epsilon = 0.0;
  double T = 1.0;

  /// Declared upper bound on sigma; checked for constants and at every evaluation point.
  double sigma_max = 10.0;
  /// Declared c > 0 in ell(t,s) >= c s^2. Only consulted when ell is a function.
  double ell_floor = 0.0;

  /// Throws ConfigError when a scalar invariant is broken.
  void validate() const;

  /// sigma(t,s) with the positivity and sigma_max bound checked.
  double sigma_at(double t, double s) const;
  /// ell(t,s) with positivity and, for functions, the c s^2 floor checked.
  double ell_at(double t, double s) const;

  double sigma_const() const { return sigma.constant("sigma"); }
  double ell_const() const { return ell.constant("ell"); }
};

/// First-guess operator -1/2 s^2 sigma^2 gamma - eps s^2 sigma^2 gamma^2 / (4 ell).
double eval_H(const MarketParams& params, double t, double s, double gamma);

/// Elliptic majorant sup_{beta >= 0} H(gamma + beta), in closed form.
///
/// Uses the negative part (x)^- = max(-x, 0). For eps = 0 it returns the
/// linear operator without dividing by eps.
double eval_H_hat(const MarketParams& params, double t, double s, double gamma);

/// Negative part max(-x, 0).
constexpr double negative_part(double x) noexcept { return x < 0.0 ? -x : 0.0; }

}  // namespace illiq
