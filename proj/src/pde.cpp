#include "illiq/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "illiq/analytic.hpp"
#include "illiq/errors.hpp"

namespace illiq {

TerminalData terminal_from(const Payoff& p) {
  const bool jump = std::holds_alternative<Digital>(p.kind());
  return {[p](double s) { return p(s); }, p.kinks(), p.describe(), jump};
}

TerminalData terminal_from(const MollifiedPayoff& mp) {
  mp.validate();
  std::vector<double> ks = mp.smoothed_input().kinks();
  return {[mp](double s) { return mollify(mp, s); }, std::move(ks), mp.describe(), false};
}

std::vector<double> terminal_values(const TerminalData& terminal, const Grid& grid, TerminalTreatment treatment) {
  const auto& s = grid.s();
  std::vector<double> u(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) u[i] = terminal.g(s[i]);
  if (treatment == TerminalTreatment::smear && terminal.discontinuous) {
    // Only piecewise-constant jumps are smeared: the dual-cell average of a
    // step at the node is the fraction of the cell above it.
    for (double k : terminal.strikes) {
      const auto j = grid.node_of(k);
      if (!j || *j == 0 || *j + 1 == s.size()) continue;
      const double left = 0.5 * (s[*j - 1] + s[*j]);
      const double right = 0.5 * (s[*j] + s[*j + 1]);
      const double below = terminal.g(0.5 * (left + s[*j]));
      const double above = terminal.g(0.5 * (s[*j] + right));
      u[*j] = (below * (s[*j] - left) + above * (right - s[*j])) / (right - left);
    }
  }
  return u;
}

Discretization::Discretization(const Grid& grid, const MarketParams& params) : grid_(grid), params_(params) {
  const auto& s = grid.s();
  const std::size_t M = s.size();
  lo_.assign(M, 0.0);
  up_.assign(M, 0.0);
  for (std::size_t i = 1; i + 1 < M; ++i) {
    const double hl = s[i] - s[i - 1];
    const double hr = s[i + 1] - s[i];
    lo_[i] = 2.0 / (hl * (hl + hr));
    up_[i] = 2.0 / (hr * (hl + hr));
  }
  if (params.sigma.is_constant()) {
    const double sigma = params.sigma_const();
    if (!(sigma > 0.0) || sigma > params.sigma_max) throw DomainError("sigma outside (0, sigma_max]");
    a_const_.resize(M);
    for (std::size_t i = 0; i < M; ++i) a_const_[i] = 0.5 * s[i] * s[i] * sigma * sigma;
  }
  rhs_.resize(M);
  diag_.resize(M);
  upper_.resize(M);
  lower_.resize(M);
  a_old_.resize(M);
  a_new_.resize(M);
}

void Discretization::second_difference(std::span<const double> u, std::span<double> gamma) const {
  const std::size_t M = lo_.size();
  gamma[0] = 0.0;
  gamma[M - 1] = 0.0;
  for (std::size_t i = 1; i + 1 < M; ++i)
    gamma[i] = lo_[i] * (u[i - 1] - u[i]) + up_[i] * (u[i + 1] - u[i]);
}

std::vector<double> Discretization::second_difference(std::span<const double> u) const {
  std::vector<double> g(u.size());
  second_difference(u, g);
  return g;
}

double Discretization::diffusion(double t, std::size_t i) const {
  if (!a_const_.empty()) return a_const_[i];
  const double s = grid_.s()[i];
  const double sigma = params_.sigma_at(t, s);
  return 0.5 * s * s * sigma * sigma;
}

void Discretization::step(std::vector<double>& u, double t_old, double dt, double theta,
                          std::span<const double> rate) const {
  const std::size_t M = u.size();
  const double t_new = t_old - dt;
  for (std::size_t i = 0; i < M; ++i) {
    a_old_[i] = diffusion(t_old, i);
    a_new_[i] = diffusion(t_new, i);
  }
  // (I - theta dt A_new D2) u_new = (I + (1 - theta) dt A_old D2) u_old + dt rate
  for (std::size_t i = 0; i < M; ++i) {
    const double ex = (1.0 - theta) * dt * a_old_[i];
    const double im = theta * dt * a_new_[i];
    double r = u[i];
    if (i > 0 && i + 1 < M) r += ex * (lo_[i] * (u[i - 1] - u[i]) + up_[i] * (u[i + 1] - u[i]));
    if (!rate.empty()) r += dt * rate[i];
    rhs_[i] = r;
    lower_[i] = -im * lo_[i];
    upper_[i] = -im * up_[i];
    diag_[i] = 1.0 + im * (lo_[i] + up_[i]);
  }
  // Thomas algorithm; the matrix is a diagonally dominant M-matrix.
  for (std::size_t i = 1; i < M; ++i) {
    const double piv = diag_[i - 1];
    if (!(piv > 0.0)) throw NumericalError("tridiagonal solve: nonpositive pivot", grid_.s()[i - 1]);
    const double m = lower_[i] / piv;
    diag_[i] -= m * upper_[i - 1];
    rhs_[i] -= m * rhs_[i - 1];
  }
  if (!(diag_[M - 1] > 0.0)) throw NumericalError("tridiagonal solve: nonpositive pivot", grid_.s()[M - 1]);
  u[M - 1] = rhs_[M - 1] / diag_[M - 1];
  for (std::size_t i = M - 1; i-- > 0;) u[i] = (rhs_[i] - upper_[i] * u[i + 1]) / diag_[i];
}

StepSchedule::StepSchedule(const Grid& grid, const SchemeOptions& options) : options_(options) {
  if (!(options.theta >= 0.5 && options.theta <= 1.0)) throw ConfigError("theta must lie in [1/2, 1]");
  if (options.rannacher_steps < 0) throw ConfigError("rannacher_steps must be >= 0");
  if (!(options.grading_fraction >= 0.0 && options.grading_fraction < 1.0))
    throw ConfigError("grading_fraction must lie in [0, 1)");
  if (!(options.c_stab > 0.0)) throw ConfigError("c_stab must be positive");
  dt0_ = grid.dt();
  tau_g_ = options.grading_fraction * grid.T();
  first_ = tau_g_ > 0.0 ? std::min(dt0_, dt0_ * dt0_ / tau_g_) : dt0_;
}

StepSchedule::Step StepSchedule::propose(double tau, double tau_end) const {
  const auto r = static_cast<std::size_t>(options_.rannacher_steps);
  double dt = 0.0;
  double theta = options_.theta;
  if (taken_ < r) {
    dt = first_ / static_cast<double>(r);
    theta = 1.0;
  } else if (tau_g_ > 0.0) {
    dt = dt0_ * std::min(1.0, std::max(tau, first_) / tau_g_);
  } else {
    dt = dt0_;
  }
  const double remaining = tau_end - tau;
  // Absorb slivers so output levels are hit without tiny trailing steps.
  if (dt >= remaining * (1.0 - 1e-9) || remaining - dt < 1e-3 * dt) dt = remaining;
  return {dt, theta};
}

namespace {

// Marches tau from 0 to T; `advance(t_old, dt, theta)` performs one step and
// returns the step actually taken (<= dt), `emit(level)` stores output level
// t_level after the march reaches it.
template <class Advance, class Emit>
std::size_t march(const Grid& grid, const SchemeOptions& options, Advance&& advance, Emit&& emit) {
  StepSchedule schedule(grid, options);
  const std::size_t N = grid.N();
  const double T = grid.T();
  double tau = 0.0;
  emit(N - 1);
  for (std::size_t k = 1; k < N; ++k) {
    const double tau_end = grid.t()[k];
    while (tau_end - tau > 1e-13 * T) {
      const auto plan = schedule.propose(tau, tau_end);
      const double taken = advance(T - tau, plan.dt, plan.theta);
      tau = (taken == plan.dt && plan.dt == tau_end - tau) ? tau_end : tau + taken;
      schedule.accept();
    }
    tau = tau_end;
    emit(N - 1 - k);
  }
  return schedule.taken();
}

}  // namespace

Surface solve_linear_with_source(const Grid& grid, const MarketParams& params, const TerminalData& terminal,
                                 const SourceFn& source, const SchemeOptions& options,
                                 TerminalTreatment treatment) {
  params.validate();
  Discretization disc(grid, params);
  const std::size_t M = grid.M(), N = grid.N();
  const auto& s = grid.s();
  std::vector<double> u = terminal_values(terminal, grid, treatment);
  std::vector<double> values(M * N);
  std::vector<double> rate(source ? M : 0);
  march(
      grid, options,
      [&](double t_old, double dt, double theta) {
        if (source) {
          const double t_new = t_old - dt;
          for (std::size_t i = 0; i < M; ++i) {
            const double f_new = source(t_new, s[i]);
            const double f_old = theta < 1.0 ? source(t_old, s[i]) : 0.0;
            rate[i] = theta * f_new + (1.0 - theta) * f_old;
            if (!std::isfinite(rate[i])) throw NumericalError("source is not finite", s[i]);
          }
        }
        disc.step(u, t_old, dt, theta, rate);
        return dt;
      },
      [&](std::size_t level) { std::copy(u.begin(), u.end(), values.begin() + static_cast<std::ptrdiff_t>(level * M)); });
  Surface out(grid, std::move(values));
  out.meta["terminal"] = terminal.description;
  out.meta["scheme"] = source ? "theta-linear-with-source" : "theta-linear";
  return out;
}

Surface solve_nonlinear(const Grid& grid, const MarketParams& params, const TerminalData& terminal,
                        const SchemeOptions& options, TerminalTreatment treatment, SolveStats* stats) {
  params.validate();
  const double eps = params.epsilon;
  if (eps < 0.0) throw DomainError("epsilon must be >= 0");
  Discretization disc(grid, params);
  const std::size_t M = grid.M(), N = grid.N();
  const auto& s = grid.s();
  std::vector<double> u = terminal_values(terminal, grid, treatment);
  std::vector<double> values(M * N);
  std::vector<double> gamma(M), rate(eps > 0.0 ? M : 0);
  SolveStats st;
  st.min_dt = std::numeric_limits<double>::infinity();
  const double floor_dt = grid.dt() * std::ldexp(1.0, -options.max_halvings);

  auto advance = [&](double t_old, double dt, double theta) {
    if (eps > 0.0) {
      // Excess of -H_hat over the linear part a*gamma, and the largest
      // growth rate of its explicit treatment.
      disc.second_difference(u, gamma);
      double worst = 0.0;
      std::size_t worst_i = 0;
      for (std::size_t i = 0; i < M; ++i) {
        const double a = disc.diffusion(t_old, i);
        const double ell = params.ell_at(t_old, s[i]);
        const double sigma2 = 2.0 * a / (s[i] * s[i]);
        rate[i] = -eval_H_hat(params, t_old, s[i], gamma[i]) - a * gamma[i];
        if (gamma[i] > -ell / eps) {
          const double slope = eps * s[i] * s[i] * sigma2 * gamma[i] / (2.0 * ell);
          const double growth = std::max(slope, 0.0) * disc.stencil_weight(i);
          if (growth > worst) {
            worst = growth;
            worst_i = i;
          }
        }
      }
      if (worst > 0.0) {
        const double limit = options.c_stab / worst;
        while (dt > limit) {
          dt *= 0.5;
          ++st.halvings;
          if (dt < floor_dt)
            throw NumericalError("nonlinear step reached the floor dt = " + format_double(dt) + " at s = " +
                                     format_double(s[worst_i]),
                                 s[worst_i]);
        }
      }
    }
    disc.step(u, t_old, dt, theta, rate);
    for (std::size_t i = 0; i < M; ++i)
      if (!std::isfinite(u[i])) throw NumericalError("nonlinear solve produced a non-finite value", s[i]);
    st.min_dt = std::min(st.min_dt, dt);
    return dt;
  };
  st.steps = march(grid, options, advance, [&](std::size_t level) {
    std::copy(u.begin(), u.end(), values.begin() + static_cast<std::ptrdiff_t>(level * M));
  });
  if (stats) *stats = st;
  Surface out(grid, std::move(values));
  out.epsilon = eps;
  out.meta["terminal"] = terminal.description;
  out.meta["scheme"] = "theta-implicit-linear/explicit-excess";
  return out;
}

Surface closed_form_surface(const Grid& grid, const Payoff& payoff, const MarketParams& params) {
  const std::size_t M = grid.M(), N = grid.N();
  std::vector<double> values(M * N);
  for (std::size_t n = 0; n < N; ++n) {
    const double t = n + 1 == N ? params.T : grid.t()[n];
    for (std::size_t i = 0; i < M; ++i) values[n * M + i] = bs_price(payoff, t, grid.s()[i], params);
  }
  Surface out(grid, std::move(values));
  out.meta["terminal"] = payoff.describe();
  out.meta["scheme"] = "closed-form";
  return out;
}

Surface premium_surface(const Surface& nonlinear, const Surface& baseline) {
  if (!nonlinear.grid().same_as(baseline.grid())) throw ConfigError("premium_surface: grids differ");
  std::vector<double> v(nonlinear.values().size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = nonlinear.values()[k] - baseline.values()[k];
  Surface out(nonlinear.grid(), std::move(v));
  out.meta = nonlinear.meta;
  out.meta["quantity"] = "premium";
  out.meta["baseline"] = baseline.meta.count("scheme") ? baseline.meta.at("scheme") : "unknown";
  out.epsilon = nonlinear.epsilon;
  return out;
}

Surface premium_surface(const Surface& nonlinear, const Payoff& payoff, const MarketParams& params,
                        Baseline baseline, const SchemeOptions& options) {
  if (baseline == Baseline::closed_form && payoff.has_closed_form() && params.sigma.is_constant())
    return premium_surface(nonlinear, closed_form_surface(nonlinear.grid(), payoff, params));
  MarketParams linear = params;
  linear.epsilon = 0.0;
  return premium_surface(nonlinear, solve_linear_with_source(nonlinear.grid(), linear, terminal_from(payoff), {}, options));
}

}  // namespace illiq
