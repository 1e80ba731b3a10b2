#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "illiq/grid.hpp"

namespace illiq {

/// Values on a grid, one row of M spot values per time level (row n is t_n).
class Surface {
 public:
  Surface(Grid grid, std::vector<double> values);

  const Grid& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double operator()(std::size_t level, std::size_t node) const { return values_[level * grid_.M() + node]; }
  std::span<const double> row(std::size_t level) const {
    return {values_.data() + level * grid_.M(), grid_.M()};
  }
  /// Linear interpolation in s on the given level.
  double at(std::size_t level, double s) const;

  /// Free-form descriptors (payoff, scheme, parameters).
  std::map<std::string, std::string> meta;
  double epsilon = 0.0;
  /// Expansion order, 0 for prices and premiums.
  int order = 0;

  bool operator==(const Surface& o) const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Long-format CSV: `# key: value` meta lines, header `t,s,value`, 17 significant digits.
void write_csv(const Surface& surface, const std::filesystem::path& path);
Surface read_csv(const std::filesystem::path& path);

/// Binary layout, little-endian:
///   char[8] "ILQSURF1"; u64 M; u64 N; f64 s_min; f64 s_max; f64 T; f64 epsilon;
///   i64 order; u64 meta_count; meta_count x (u64 len, bytes key, u64 len, bytes value);
///   f64[M] s_nodes; f64[M*N] values (row-major by time level).
void write_binary(const Surface& surface, const std::filesystem::path& path);
Surface read_binary(const std::filesystem::path& path);

/// Formats a double with 17 significant digits.
std::string format_double(double x);

}  // namespace illiq
