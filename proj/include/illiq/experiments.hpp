#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "illiq/analytic.hpp"
#include "illiq/pde.hpp"

namespace illiq {

enum class ExperimentKind { figure, sweep, slope, sandwich };

struct RunConfig {
  ExperimentKind kind = ExperimentKind::figure;
  Payoff payoff = Call{15.0};
  MarketParams params;
  GridSpec grid;
  SchemeOptions scheme;
  Baseline baseline = Baseline::closed_form;
  std::vector<double> eps_list;  ///< strictly positive, sorted decreasing on load
  double point_t = 0.0;          ///< evaluation point of sweeps and slopes
  double point_s = 15.0;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 20240601;
  unsigned jobs = 1;  ///< concurrent solves in a sweep
  // sandwich
  TheoremParams theorem{0.55, 0.75, 0.25, 0.0};
  /// When false, a digital sandwich takes a = (2/5)(1 - gamma) from beta and nu.
  bool theorem_a_set = false;
  bool fit_c_star = true;
  std::size_t check_levels = 20;
  std::size_t check_nodes = 20;
};

/// Reads the JSON document; unknown keys are rejected. Throws ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& c);
/// Payoff from a JSON spec such as {"type": "call", "strike": 15}.
Payoff payoff_from_json(const nlohmann::json& j);

struct FigureSummary {
  double max_premium = 0.0;
  double t_at_max = 0.0;
  double s_at_max = 0.0;
  double min_premium = 0.0;
  double bs_at_money = 0.0;  ///< closed-form price at t = 0, s = strike
  std::size_t steps = 0;
  std::size_t halvings = 0;
  bool first_order_written = false;
};

/// Writes premium.csv, first_order.csv (eps v^(1)) and v1.csv when v^(1) is
/// finite, summary.json and plot.gp into config.out_dir.
FigureSummary run_figure(const RunConfig& config);

struct SweepRow {
  double eps;
  double value;
  double bs;
  double premium;
};

/// One nonlinear solve per eps on a shared grid, evaluated at (t, s). Rows are
/// sorted by increasing eps.
std::vector<SweepRow> sweep_epsilon(const RunConfig& config, double t, double s);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

struct SlopeEstimate {
  double slope;
  double intercept;
  double r_squared;
  double eps_min;
  double eps_max;
  std::size_t points;
};

/// Least-squares fit of log(premium) against log(eps). Needs at least 4 rows
/// and positive premiums, otherwise DataError.
SlopeEstimate estimate_slope(const std::vector<SweepRow>& rows);

struct SandwichReport {
  double c_star = 0.0;
  bool fitted = false;
  std::size_t points = 0;
  std::size_t lower_violations = 0;  ///< V < v_BS beyond tolerance
  std::size_t upper_violations = 0;  ///< V > bound
  double min_upper_margin = 0.0;     ///< min of bound - V
  double median_upper_margin = 0.0;
  double max_upper_margin = 0.0;
  double min_lower_margin = 0.0;  ///< min of V - v_BS
};

/// Checks v_BS <= V <= theorem bound on a check grid of
/// check_levels x check_nodes points, each side allowed the linear scheme's
/// observed error at the point. With fit_c_star, c_star is the smallest value
/// that satisfies the even-indexed points; all points are then verified.
/// Writes sandwich.json.
SandwichReport sandwich_report(const RunConfig& config);

}  // namespace illiq
