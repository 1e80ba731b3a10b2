#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "illiq/model.hpp"

namespace illiq {

/// Requested discretization. Bounds default to K e^{-+4 sigma sqrt(T)} around
/// the extreme strikes.
struct GridSpec {
  std::size_t M = 400;  ///< price nodes
  std::size_t N = 2000;  ///< time levels, including t = 0 and t = T
  /// Log-distance scale of the sinh stretching around the strike; 0 gives a
  /// log-uniform grid.
  double concentration = 0.1;
  std::optional<double> s_min;
  std::optional<double> s_max;
  std::size_t max_M = 200000;
  std::size_t max_N = 2000000;
};

/// Price nodes and uniform time levels of a finite-difference run.
class Grid {
 public:
  Grid(std::vector<double> s_nodes, double T, std::size_t N);

  const std::vector<double>& s() const noexcept { return s_; }
  const std::vector<double>& t() const noexcept { return t_; }
  std::size_t M() const noexcept { return s_.size(); }
  std::size_t N() const noexcept { return t_.size(); }
  double T() const noexcept { return t_.back(); }
  double dt() const noexcept { return t_[1] - t_[0]; }
  double s_min() const noexcept { return s_.front(); }
  double s_max() const noexcept { return s_.back(); }

  /// Index of the node equal to s, if any.
  std::optional<std::size_t> node_of(double s) const;
  /// Index of the time level closest to t.
  std::size_t level_of(double t) const;

  bool same_as(const Grid& other) const;

 private:
  std::vector<double> s_;
  std::vector<double> t_;
};

/// Builds the grid for the given strikes: sinh-stretched in ln s around the
/// strikes' geometric mean, with every strike carried as an exact node.
/// Throws ConfigError for inconsistent bounds or sizes.
Grid build_grid(const GridSpec& spec, const MarketParams& params, const std::vector<double>& strikes);

}  // namespace illiq
