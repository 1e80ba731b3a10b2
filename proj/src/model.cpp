#include "illiq/model.hpp"

#include <cmath>
#include <string>

#include "illiq/errors.hpp"

namespace illiq {

double Coefficient::constant(std::string_view what) const {
  if (const auto* v = std::get_if<double>(&rep_)) return *v;
  throw UnsupportedRegime(std::string(what) +
                          " is a function of (t,s); closed-form analytics need a constant");
}

void MarketParams::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("maturity T must be positive");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw ConfigError("epsilon must be finite and >= 0");
  if (!(sigma_max > 0.0)) throw ConfigError("sigma_max must be positive");
  if (sigma.is_constant()) {
    const double v = sigma_const();
    if (!(v > 0.0) || v > sigma_max)
      throw ConfigError("sigma must lie in (0, sigma_max]");
  }
  if (ell.is_constant()) {
    if (!(ell_const() > 0.0)) throw ConfigError("ell must be positive");
  } else if (!(ell_floor > 0.0)) {
    throw ConfigError("a state-dependent ell needs a declared floor c > 0 with ell >= c s^2");
  }
}

double MarketParams::sigma_at(double t, double s) const {
  const double v = sigma(t, s);
  if (!(v > 0.0) || v > sigma_max)
    throw DomainError("sigma(t,s) outside (0, sigma_max] at s=" + std::to_string(s));
  return v;
}

double MarketParams::ell_at(double t, double s) const {
  const double v = ell(t, s);
  if (!(v > 0.0)) throw DomainError("ell(t,s) must be positive at s=" + std::to_string(s));
  if (!ell.is_constant() && v < ell_floor * s * s)
    throw DomainError("ell(t,s) below the declared c s^2 floor at s=" + std::to_string(s));
  return v;
}

double eval_H(const MarketParams& params, double t, double s, double gamma) {
  if (!(s > 0.0)) throw DomainError("eval_H: s must be positive");
  const double sig = params.sigma_at(t, s);
  const double a = s * s * sig * sig;
  const double linear = -0.5 * a * gamma;
  if (params.epsilon == 0.0) return linear;
  return linear - params.epsilon / (4.0 * params.ell_at(t, s)) * a * gamma * gamma;
}

double eval_H_hat(const MarketParams& params, double t, double s, double gamma) {
  if (!(s > 0.0)) throw DomainError("eval_H_hat: s must be positive");
  const double sig = params.sigma_at(t, s);
  const double a = s * s * sig * sig;
  if (params.epsilon == 0.0) return -0.5 * a * gamma;
  const double ell = params.ell_at(t, s);
  const double eps = params.epsilon;
  const double shifted = gamma + negative_part(gamma + ell / eps);
  return -0.5 * a * (shifted + eps / (2.0 * ell) * shifted * shifted);
}

}  // namespace illiq
