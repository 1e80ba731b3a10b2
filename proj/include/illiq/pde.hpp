#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "illiq/grid.hpp"
#include "illiq/model.hpp"
#include "illiq/payoff.hpp"
#include "illiq/surface.hpp"

namespace illiq {

struct SchemeOptions {
  double theta = 0.5;       ///< Crank-Nicolson by default
  int rannacher_steps = 2;  ///< backward-Euler substeps that replace the first step
  /// Steps are graded as dt0 * min(1, tau/tau_g) with tau_g = grading_fraction * T,
  /// starting from dt0^2/tau_g. Zero gives uniform steps.
  double grading_fraction = 0.01;
  double c_stab = 0.5;    ///< explicit-excess step bound factor
  int max_halvings = 40;  ///< hard floor: dt0 / 2^max_halvings
};

/// Terminal data of a run: a payoff or a mollified payoff, sampled on the nodes.
struct TerminalData {
  std::function<double(double)> g;
  std::vector<double> strikes;
  std::string description;
  bool discontinuous = false;
};

TerminalData terminal_from(const Payoff& p);
TerminalData terminal_from(const MollifiedPayoff& mp);

enum class TerminalTreatment {
  raw,    ///< g at the nodes
  smear,  ///< at a jump node, the average of g over the node's dual cell
};

std::vector<double> terminal_values(const TerminalData& terminal, const Grid& grid,
                                    TerminalTreatment treatment = TerminalTreatment::raw);

/// Three-point second difference on the nonuniform grid and the theta step of
/// u_tau = a(t,s) u_ss + rate, tau = T - t. Boundary rows carry u_ss = 0.
class Discretization {
 public:
  Discretization(const Grid& grid, const MarketParams& params);

  const Grid& grid() const noexcept { return grid_; }

  /// gamma_i = (lo_i u_{i-1} - (lo_i + up_i) u_i + up_i u_{i+1}); zero at both ends.
  void second_difference(std::span<const double> u, std::span<double> gamma) const;
  std::vector<double> second_difference(std::span<const double> u) const;

  /// 1/2 s_i^2 sigma(t, s_i)^2.
  double diffusion(double t, std::size_t i) const;
  /// lo_i + up_i, the stencil's diagonal magnitude.
  double stencil_weight(std::size_t i) const { return lo_[i] + up_[i]; }

  /// One step from tau to tau + dt (t_old = T - tau). `rate` (size M, may be
  /// empty) is added as dt * rate.
  void step(std::vector<double>& u, double t_old, double dt, double theta, std::span<const double> rate) const;

 private:
  const Grid& grid_;
  const MarketParams& params_;
  std::vector<double> lo_, up_;
  std::vector<double> a_const_;  ///< diffusion when sigma is constant
  mutable std::vector<double> rhs_, diag_, upper_, lower_, a_old_, a_new_;
};

/// Step-size plan: Rannacher start, then graded Crank-Nicolson steps that land
/// exactly on the output levels.
class StepSchedule {
 public:
  StepSchedule(const Grid& grid, const SchemeOptions& options);

  struct Step {
    double dt;
    double theta;
  };
  /// Proposal for the next step from tau toward the output level tau_end.
  Step propose(double tau, double tau_end) const;
  void accept() { ++taken_; }
  std::size_t taken() const { return taken_; }

 private:
  double dt0_, tau_g_, first_;
  SchemeOptions options_;
  std::size_t taken_ = 0;
};

struct SolveStats {
  std::size_t steps = 0;
  std::size_t halvings = 0;
  double min_dt = 0.0;
};

using SourceFn = std::function<double(double t, double s)>;

/// Solves -u_t - 1/2 s^2 sigma^2 u_ss = source, u(T) = terminal. An empty
/// source means zero.
Surface solve_linear_with_source(const Grid& grid, const MarketParams& params, const TerminalData& terminal,
                                 const SourceFn& source = {}, const SchemeOptions& options = {},
                                 TerminalTreatment treatment = TerminalTreatment::raw);

/// Solves -V_t + H_hat(V_ss) = 0 with the nonlinear excess over the
/// Black-Scholes operator treated explicitly. Throws NumericalError when the
/// step floor is reached, with the offending spot in estimate().
Surface solve_nonlinear(const Grid& grid, const MarketParams& params, const TerminalData& terminal,
                        const SchemeOptions& options = {}, TerminalTreatment treatment = TerminalTreatment::raw,
                        SolveStats* stats = nullptr);

/// Closed-form Black-Scholes prices on the grid; the terminal row is the payoff.
Surface closed_form_surface(const Grid& grid, const Payoff& payoff, const MarketParams& params);

enum class Baseline { closed_form, same_grid };

/// V - baseline pointwise; throws ConfigError on a grid mismatch.
Surface premium_surface(const Surface& nonlinear, const Surface& baseline);

/// V - v_BS, with v_BS from the closed form or from a linear solve on the same grid.
Surface premium_surface(const Surface& nonlinear, const Payoff& payoff, const MarketParams& params,
                        Baseline baseline, const SchemeOptions& options = {});

}  // namespace illiq
