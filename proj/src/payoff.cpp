#include "illiq/payoff.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "illiq/errors.hpp"
#include "illiq/quadrature.hpp"

namespace illiq {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double positive(double x) { return x > 0.0 ? x : 0.0; }

double interpolate(const SampledCustom& c, double s) {
  if (s <= c.s.front()) return c.g.front();
  if (s >= c.s.back()) return c.g.back();
  const auto it = std::upper_bound(c.s.begin(), c.s.end(), s);
  const auto j = static_cast<std::size_t>(it - c.s.begin());
  const double w = (s - c.s[j - 1]) / (c.s[j] - c.s[j - 1]);
  return (1.0 - w) * c.g[j - 1] + w * c.g[j];
}

void require_strike(double K, const char* what) {
  if (!(K > 0.0) || !std::isfinite(K)) throw ConfigError(std::string(what) + ": strike must be positive");
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

}  // namespace

void Payoff::validate() const {
  std::visit(overloaded{
                 [](const Call& c) { require_strike(c.K, "call"); },
                 [](const Put& p) { require_strike(p.K, "put"); },
                 [](const Digital& d) { require_strike(d.K, "digital"); },
                 [](const CallSpread& c) {
                   require_strike(c.K1, "call spread");
                   require_strike(c.K2, "call spread");
                   if (!(c.K1 < c.K2)) throw ConfigError("call spread needs K1 < K2");
                   if (!std::isfinite(c.scale)) throw ConfigError("call spread scale must be finite");
                 },
                 [](const SampledCustom& c) {
                   if (c.s.size() < 2 || c.s.size() != c.g.size())
                     throw ConfigError("sampled payoff needs at least two (s, value) pairs");
                   for (std::size_t i = 0; i < c.s.size(); ++i) {
                     if (!std::isfinite(c.s[i]) || !std::isfinite(c.g[i]) || c.s[i] < 0.0)
                       throw ConfigError("sampled payoff has a non-finite or negative entry");
                     if (i > 0 && !(c.s[i] > c.s[i - 1]))
                       throw ConfigError("sampled payoff s column must be strictly increasing");
                   }
                   // Bounded below and sup g/(1+s) finite hold for any finite table
                   // with flat extrapolation; nothing further to check.
                 },
             },
             kind_);
}

double Payoff::operator()(double s) const {
  return std::visit(overloaded{
                        [s](const Call& c) { return positive(s - c.K); },
                        [s](const Put& p) { return positive(p.K - s); },
                        [s](const Digital& d) { return s >= d.K ? 1.0 : 0.0; },
                        [s](const CallSpread& c) {
                          return c.scale * (positive(s - c.K1) - positive(s - c.K2));
                        },
                        [s](const SampledCustom& c) { return interpolate(c, s); },
                    },
                    kind_);
}

std::vector<double> Payoff::kinks() const {
  return std::visit(overloaded{
                        [](const Call& c) { return std::vector<double>{c.K}; },
                        [](const Put& p) { return std::vector<double>{p.K}; },
                        [](const Digital& d) { return std::vector<double>{d.K}; },
                        [](const CallSpread& c) { return std::vector<double>{c.K1, c.K2}; },
                        [](const SampledCustom& c) { return c.s; },
                    },
                    kind_);
}

std::vector<double> Payoff::strikes() const {
  if (std::holds_alternative<SampledCustom>(kind_)) return {};
  return kinks();
}

bool Payoff::is_convex() const {
  return std::visit(overloaded{
                        [](const Call&) { return true; },
                        [](const Put&) { return true; },
                        [](const Digital&) { return false; },
                        [](const CallSpread& c) { return c.scale == 0.0; },
                        [](const SampledCustom& c) {
                          for (std::size_t i = 1; i + 1 < c.s.size(); ++i) {
                            const double left = (c.g[i] - c.g[i - 1]) / (c.s[i] - c.s[i - 1]);
                            const double right = (c.g[i + 1] - c.g[i]) / (c.s[i + 1] - c.s[i]);
                            if (right < left) return false;
                          }
                          // Flat extrapolation adds slope-0 pieces at both ends.
                          const std::size_t n = c.s.size();
                          const double first = (c.g[1] - c.g[0]) / (c.s[1] - c.s[0]);
                          const double last = (c.g[n - 1] - c.g[n - 2]) / (c.s[n - 1] - c.s[n - 2]);
                          return first >= 0.0 && last <= 0.0;
                        },
                    },
                    kind_);
}

double Payoff::lipschitz() const {
  return std::visit(overloaded{
                        [](const Call&) { return 1.0; },
                        [](const Put&) { return 1.0; },
                        [](const Digital&) { return std::numeric_limits<double>::infinity(); },
                        [](const CallSpread& c) { return std::abs(c.scale); },
                        [](const SampledCustom& c) {
                          double L = 0.0;
                          for (std::size_t i = 1; i < c.s.size(); ++i)
                            L = std::max(L, std::abs((c.g[i] - c.g[i - 1]) / (c.s[i] - c.s[i - 1])));
                          return L;
                        },
                    },
                    kind_);
}

std::string Payoff::describe() const {
  return std::visit(overloaded{
                        [](const Call& c) { return "call(K=" + fmt(c.K) + ")"; },
                        [](const Put& p) { return "put(K=" + fmt(p.K) + ")"; },
                        [](const Digital& d) { return "digital(K=" + fmt(d.K) + ")"; },
                        [](const CallSpread& c) {
                          return "call_spread(K1=" + fmt(c.K1) + ",K2=" + fmt(c.K2) +
                                 ",scale=" + fmt(c.scale) + ")";
                        },
                        [](const SampledCustom& c) {
                          return "sampled(" + std::to_string(c.s.size()) + " points)";
                        },
                    },
                    kind_);
}

double eval_payoff(const Payoff& p, double s) {
  if (!(s >= 0.0)) throw DomainError("eval_payoff: s must be >= 0");
  return p(s);
}

Payoff load_sampled_payoff(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open payoff table " + path.string());
  SampledCustom table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("payoff table line " + std::to_string(lineno) + ": expected s,value");
    double s = 0.0, g = 0.0;
    const char* b = line.data();
    const auto r1 = std::from_chars(b, b + comma, s);
    const auto r2 = std::from_chars(b + comma + 1, b + line.size(), g);
    if (r1.ec != std::errc{} || r2.ec != std::errc{}) {
      if (lineno == 1 && table.s.empty()) continue;  // header row
      throw DataError("payoff table line " + std::to_string(lineno) + ": not numeric");
    }
    table.s.push_back(s);
    table.g.push_back(g);
  }
  return Payoff(std::move(table));
}

namespace {

double raw_bump(double u) { return std::abs(u) < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0; }

}  // namespace

double bump_constant() {
  static const double c = [] {
    const quad::Tolerance tol{1e-15, 1e-15, 4000};
    return 1.0 / quad::integrate(raw_bump, -1.0, 1.0, tol).value;
  }();
  return c;
}

double bump_phi(double u) { return bump_constant() * raw_bump(u); }

namespace {

/// int int phi(x) phi(y) k(x - y) dx dy for a kernel piecewise linear in x - y
/// with kinks at the given offsets.
template <class Kernel>
double phi_double_integral(Kernel k, std::initializer_list<double> kink_offsets) {
  const quad::Tolerance tol{1e-13, 1e-13, 4000};
  auto inner = [&](double x) {
    std::vector<double> cuts{-1.0, 1.0};
    for (double d : kink_offsets) {
      const double y = x - d;
      if (y > -1.0 && y < 1.0) cuts.push_back(y);
    }
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      acc += quad::integrate([&](double y) { return bump_phi(y) * k(x - y); }, cuts[i], cuts[i + 1], tol).value;
    return bump_phi(x) * acc;
  };
  return quad::integrate(inner, -1.0, 1.0, tol).value;
}

}  // namespace

const PhiMoments& phi_moments() {
  static const PhiMoments m = [] {
    const quad::Tolerance tol{1e-14, 1e-14, 4000};
    PhiMoments r{};
    r.second = quad::integrate([](double u) { return bump_phi(u) * u * u; }, -1.0, 1.0, tol).value;
    r.half_first = quad::integrate([](double u) { return bump_phi(u) * u; }, 0.0, 1.0, tol).value;
    r.abs_diff = phi_double_integral([](double d) { return std::abs(d); }, {0.0});
    r.digital_kernel = phi_double_integral(
        [](double d) { return std::abs(d - 1.0) + std::abs(d + 1.0) - 2.0 * std::abs(d); },
        {-1.0, 0.0, 1.0});
    return r;
  }();
  return m;
}

Payoff digital_presmoothing_spread(double K, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("digital pre-smoothing needs alpha > 0");
  return Payoff(CallSpread{K - 2.0 * alpha, K - alpha, 1.0 / alpha});
}

void MollifiedPayoff::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("mollify: alpha must be positive");
  if (mode == SmoothingMode::digital_presmooth && !std::holds_alternative<Digital>(base.kind()))
    throw ConfigError("digital pre-smoothing applies to a digital payoff only");
}

Payoff MollifiedPayoff::smoothed_input() const {
  validate();
  if (mode == SmoothingMode::direct) return base;
  return digital_presmoothing_spread(std::get<Digital>(base.kind()).K, alpha);
}

std::string MollifiedPayoff::describe() const {
  return std::string(mode == SmoothingMode::direct ? "mollified" : "mollified_presmoothed") + "(" +
         base.describe() + ",alpha=" + fmt(alpha) + ")";
}

double mollify(const MollifiedPayoff& mp, double s) {
  const Payoff g = mp.smoothed_input();
  const double alpha = mp.alpha;
  // u-locations of the kinks of u -> g(s - alpha u) inside (-1, 1).
  std::vector<double> cuts{-1.0, 1.0};
  for (double k : g.kinks()) {
    const double u = (s - k) / alpha;
    if (u > -1.0 && u < 1.0) cuts.push_back(u);
  }
  // g is affine on the whole support: a symmetric unit-mass kernel reproduces it.
  if (cuts.size() == 2) return g(s);
  std::sort(cuts.begin(), cuts.end());
  const quad::Tolerance tol{1e-10 / static_cast<double>(cuts.size()), 0.0, 4000};
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    acc += quad::integrate([&](double u) { return bump_phi(u) * g(s - alpha * u); }, cuts[i], cuts[i + 1], tol)
               .value;
  return acc;
}

}  // namespace illiq
