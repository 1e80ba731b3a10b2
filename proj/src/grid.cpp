#include "illiq/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "illiq/errors.hpp"

namespace illiq {

Grid::Grid(std::vector<double> s_nodes, double T, std::size_t N) : s_(std::move(s_nodes)) {
  if (s_.size() < 3) throw ConfigError("grid needs at least 3 price nodes");
  if (N < 2) throw ConfigError("grid needs at least 2 time levels");
  if (!(T > 0.0)) throw ConfigError("grid maturity must be positive");
  if (!(s_.front() > 0.0)) throw ConfigError("grid s_min must be positive");
  for (std::size_t i = 1; i < s_.size(); ++i)
    if (!(s_[i] > s_[i - 1])) throw ConfigError("grid price nodes must be strictly increasing");
  t_.resize(N);
  for (std::size_t n = 0; n < N; ++n) t_[n] = T * static_cast<double>(n) / static_cast<double>(N - 1);
  t_.back() = T;
}

std::optional<std::size_t> Grid::node_of(double s) const {
  const auto it = std::lower_bound(s_.begin(), s_.end(), s);
  if (it != s_.end() && *it == s) return static_cast<std::size_t>(it - s_.begin());
  return std::nullopt;
}

std::size_t Grid::level_of(double t) const {
  const double x = t / dt();
  const double r = std::round(std::clamp(x, 0.0, static_cast<double>(N() - 1)));
  return static_cast<std::size_t>(r);
}

bool Grid::same_as(const Grid& other) const { return s_ == other.s_ && t_ == other.t_; }

Grid build_grid(const GridSpec& spec, const MarketParams& params, const std::vector<double>& strikes) {
  if (spec.M < 3 || spec.M > spec.max_M)
    throw ConfigError("grid M must lie in [3, " + std::to_string(spec.max_M) + "]");
  if (spec.N < 2 || spec.N > spec.max_N)
    throw ConfigError("grid N must lie in [2, " + std::to_string(spec.max_N) + "]");
  if (!(spec.concentration >= 0.0)) throw ConfigError("grid concentration must be >= 0");
  if (!(params.T > 0.0)) throw ConfigError("maturity must be positive");

  std::vector<double> ks = strikes;
  std::sort(ks.begin(), ks.end());
  for (double k : ks)
    if (!(k > 0.0)) throw ConfigError("grid strikes must be positive");

  // Truncation must cover four standard deviations of ln S_T around every strike.
  const bool sigma_known = params.sigma.is_constant();
  const double spread = sigma_known ? 4.0 * params.sigma_const() * std::sqrt(params.T) : 0.0;
  if ((!spec.s_min || !spec.s_max) && (ks.empty() || !sigma_known))
    throw ConfigError("grid bounds must be given explicitly without strikes or with a sigma function");
  const double lo = spec.s_min ? *spec.s_min : ks.front() * std::exp(-spread);
  const double hi = spec.s_max ? *spec.s_max : ks.back() * std::exp(spread);
  if (sigma_known && !ks.empty() && hi < ks.back() * std::exp(spread) * (1.0 - 1e-12))
    throw ConfigError("s_max must be at least K e^{4 sigma sqrt(T)}");
  if (!(lo > 0.0) || !(hi > lo)) throw ConfigError("grid bounds must satisfy 0 < s_min < s_max");
  for (double k : ks)
    if (!(k > lo && k < hi)) throw ConfigError("every strike must lie strictly inside the grid bounds");

  // Nodes in x = ln s.
  const double xlo = std::log(lo), xhi = std::log(hi);
  const double xc = ks.empty() ? 0.5 * (xlo + xhi)
                               : 0.5 * (std::log(ks.front()) + std::log(ks.back()));
  const std::size_t M = spec.M;
  std::vector<double> s(M);
  const double c = spec.concentration;
  const double a = c > 0.0 ? std::asinh((xlo - xc) / c) : xlo;
  const double b = c > 0.0 ? std::asinh((xhi - xc) / c) : xhi;
  for (std::size_t i = 0; i < M; ++i) {
    const double xi = a + (b - a) * static_cast<double>(i) / static_cast<double>(M - 1);
    s[i] = std::exp(c > 0.0 ? xc + c * std::sinh(xi) : xi);
  }
  s.front() = lo;
  s.back() = hi;

  // Carry every strike as a node: move the nearest free interior node onto it,
  // or insert it when that node is already taken by another strike.
  std::vector<bool> pinned(M, false);
  pinned.front() = pinned.back() = true;
  for (double k : ks) {
    const auto it = std::lower_bound(s.begin(), s.end(), k);
    std::size_t j = static_cast<std::size_t>(it - s.begin());
    if (j < s.size() && s[j] == k) {
      pinned[j] = true;
      continue;
    }
    if (j > 0 && (j == s.size() || k - s[j - 1] < s[j] - k)) --j;
    if (!pinned[j]) {
      s[j] = k;
      pinned[j] = true;
    } else {
      const auto pos = std::upper_bound(s.begin(), s.end(), k) - s.begin();
      s.insert(s.begin() + pos, k);
      pinned.insert(pinned.begin() + pos, true);
    }
  }
  return Grid(std::move(s), params.T, spec.N);
}

}  // namespace illiq
