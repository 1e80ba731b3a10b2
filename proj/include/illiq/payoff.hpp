#pragma once

#include <filesystem>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace illiq {

struct Call {
  double K;
};
struct Put {
  double K;
};
/// Indicator 1{s >= K}; the value at s = K is 1.
struct Digital {
  double K;
};
/// scale * ((s - K1)^+ - (s - K2)^+) with K1 < K2.
struct CallSpread {
  double K1;
  double K2;
  double scale = 1.0;
};
/// Piecewise-linear payoff through (s_i, g_i), flat outside the table.
struct SampledCustom {
  std::vector<double> s;
  std::vector<double> g;
};

/// Terminal payoff g(S_T). All kinds are piecewise linear in s (the digital
/// is piecewise constant), which `mollify` uses to skip smooth regions.
class Payoff {
 public:
  using Kind = std::variant<Call, Put, Digital, CallSpread, SampledCustom>;

  template <class K>
    requires std::is_constructible_v<Kind, K&&>
  Payoff(K&& kind) : kind_(std::forward<K>(kind)) {  // NOLINT(google-explicit-constructor)
    validate();
  }

  const Kind& kind() const noexcept { return kind_; }

  double operator()(double s) const;

  /// Points where g is not differentiable (strikes, table nodes).
  std::vector<double> kinks() const;
  /// Strikes that a grid should carry as exact nodes.
  std::vector<double> strikes() const;
  bool is_convex() const;
  /// Lipschitz constant, infinite for the digital.
  double lipschitz() const;
  bool has_closed_form() const { return !std::holds_alternative<SampledCustom>(kind_); }
  std::string describe() const;

 private:
  /// Throws ConfigError for nonpositive strikes or a malformed table.
  void validate() const;

  Kind kind_;
};

/// eval_payoff: exact terminal value, s >= 0.
double eval_payoff(const Payoff& p, double s);

/// Load a SampledCustom payoff from a two-column CSV `s,value` (header optional).
Payoff load_sampled_payoff(const std::filesystem::path& path);

/// Standard bump C exp(-1/(1-u^2)) on (-1, 1), normalized to unit mass.
double bump_phi(double u);
/// The normalization constant C.
double bump_constant();

/// Moments of the bump that enter the small-alpha expansion coefficients.
struct PhiMoments {
  double second;              ///< int phi(u) u^2 du
  double half_first;          ///< int_0^1 phi(u) u du
  double abs_diff;            ///< int int phi(x) phi(y) |x - y|
  double digital_kernel;      ///< int int phi(x) phi(y) (|x-y-1| + |x-y+1| - 2|x-y|)
};
const PhiMoments& phi_moments();

enum class SmoothingMode {
  direct,             ///< phi_alpha * g
  digital_presmooth,  ///< phi_alpha * g_alpha, g_alpha the call spread below the strike
};

struct MollifiedPayoff {
  Payoff base;
  double alpha;
  SmoothingMode mode = SmoothingMode::direct;

  /// Throws DomainError for alpha <= 0 and ConfigError for a non-digital
  /// base in digital_presmooth mode.
  void validate() const;
  /// The function that is convolved: g itself, or g_alpha in digital mode.
  Payoff smoothed_input() const;
  std::string describe() const;
};

/// Call spread ((s-K+2a)^+ - (s-K+a)^+)/a that dominates 1{s >= K}.
Payoff digital_presmoothing_spread(double K, double alpha);

/// int_{-1}^{1} phi(u) g(s - alpha u) du, absolute tolerance 1e-10.
double mollify(const MollifiedPayoff& mp, double s);

}  // namespace illiq
