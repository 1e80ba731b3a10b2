// illiq: command-line harness for the illiquid-market pricing library.
//
// Precedence of settings: flags > --config file > built-in defaults.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 acceptance check failed.

#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "illiq/analytic.hpp"
#include "illiq/errors.hpp"
#include "illiq/expansion.hpp"
#include "illiq/experiments.hpp"

using namespace illiq;

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;
constexpr int kAcceptanceExit = 4;

struct Flags {
  std::string config;
  std::string eps;
  std::string out;
  std::uint64_t seed = 0;
  std::string grid;
  std::string payoff;
  double strike = 0.0;
  double sigma = 0.0;
  double ell = 0.0;
  double T = 0.0;
  double t = 0.0;
  double s = 0.0;
};

struct Bound {
  CLI::Option* seed = nullptr;
  CLI::Option* strike = nullptr;
  CLI::Option* sigma = nullptr;
  CLI::Option* ell = nullptr;
  CLI::Option* T = nullptr;
  CLI::Option* t = nullptr;
  CLI::Option* s = nullptr;
};

Bound add_common(CLI::App* app, Flags& f) {
  Bound b;
  app->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--eps", f.eps, "comma-separated epsilon values");
  app->add_option("--out", f.out, "output directory");
  b.seed = app->add_option("--seed", f.seed, "random seed");
  app->add_option("--grid", f.grid, "grid as MxN (price nodes x time levels)");
  app->add_option("--payoff", f.payoff, "call, put or digital")
      ->check(CLI::IsMember({"call", "put", "digital"}));
  b.strike = app->add_option("--strike,-K", f.strike, "strike");
  b.sigma = app->add_option("--sigma", f.sigma, "volatility");
  b.ell = app->add_option("--ell", f.ell, "liquidity level");
  b.T = app->add_option("--maturity,-T", f.T, "maturity");
  b.t = app->add_option("--time,-t", f.t, "evaluation time");
  b.s = app->add_option("--spot,-s", f.s, "evaluation spot");
  return b;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number in list: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    return {std::stoul(text.substr(0, x)), std::stoul(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw ConfigError("grid must look like 400x2000, got '" + text + "'");
  }
}

RunConfig resolve(const Flags& f, const Bound& b) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  const auto strikes = c.payoff.strikes();
  const double strike = b.strike->count() ? f.strike : strikes.empty() ? 0.0 : strikes.front();
  if (!f.payoff.empty()) {
    if (f.payoff == "call") c.payoff = Call{strike};
    if (f.payoff == "put") c.payoff = Put{strike};
    if (f.payoff == "digital") c.payoff = Digital{strike};
  } else if (b.strike->count()) {
    std::visit(
        [&](auto k) {
          using K = decltype(k);
          if constexpr (requires { k.K; }) {
            k.K = strike;
            c.payoff = K{k};
          } else {
            throw ConfigError("--strike applies to call, put and digital payoffs");
          }
        },
        c.payoff.kind());
  }
  if (b.sigma->count()) c.params.sigma = f.sigma;
  if (b.ell->count()) c.params.ell = f.ell;
  if (b.T->count()) c.params.T = f.T;
  if (b.seed->count()) c.seed = f.seed;
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.grid.empty()) std::tie(c.grid.M, c.grid.N) = parse_grid(f.grid);
  if (!f.eps.empty()) {
    c.eps_list = parse_list(f.eps);
    for (double e : c.eps_list)
      if (!(e >= 0.0)) throw ConfigError("eps values must be >= 0");
    c.params.epsilon = c.eps_list.front();
    std::sort(c.eps_list.begin(), c.eps_list.end(), std::greater<>());
  }
  if (b.t->count()) c.point_t = f.t;
  if (b.s->count())
    c.point_s = f.s;
  else if ((f.config.empty() || b.strike->count()) && !c.payoff.strikes().empty())
    c.point_s = c.payoff.strikes().front();
  c.params.validate();
  return c;
}

void print_row(const char* key, double v) { std::printf("%-14s %s\n", key, format_double(v).c_str()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Option pricing with an illiquidity cost: closed forms, nonlinear PDE, expansions"};
  app.require_subcommand(1);
  Flags f;

  auto* bs = app.add_subcommand("bs", "closed-form Black-Scholes price and gamma");
  const auto b_bs = add_common(bs, f);

  auto* solve = app.add_subcommand("solve", "one nonlinear PDE run; writes value.csv and premium.csv");
  const auto b_solve = add_common(solve, f);

  auto* figure = app.add_subcommand("figure", "premium surface, first-order surface, summary and plot script");
  const auto b_figure = add_common(figure, f);
  std::vector<double> expect_max;
  figure->add_option("--expect-max", expect_max, "acceptance window lo hi for the max premium")->expected(2);

  auto* sweep = app.add_subcommand("sweep", "premium at one point across epsilon values");
  const auto b_sweep = add_common(sweep, f);
  unsigned jobs = 1;
  sweep->add_option("--jobs", jobs, "concurrent solves");

  auto* slope = app.add_subcommand("slope", "log-log slope of the premium against epsilon");
  const auto b_slope = add_common(slope, f);
  std::vector<double> window;
  slope->add_option("--window", window, "acceptance window lo hi for the slope")->expected(2);
  slope->add_option("--jobs", jobs, "concurrent solves");

  auto* sandwich = app.add_subcommand("sandwich", "check v_BS <= V <= theorem bound on a point grid");
  const auto b_sandwich = add_common(sandwich, f);
  double a = 0.55, beta = 0.75, nu = 0.25, c_star = -1.0;
  std::size_t check = 20;
  auto* a_opt = sandwich->add_option("--a", a, "alpha exponent (digital default: (2/5)(1 - gamma))");
  auto* beta_opt = sandwich->add_option("--beta", beta, "beta");
  auto* nu_opt = sandwich->add_option("--nu", nu, "nu");
  auto* c_opt = sandwich->add_option("--c-star", c_star, "fixed c_star (default: fitted)");
  auto* check_opt = sandwich->add_option("--check", check, "check points per axis");

  auto* expand = app.add_subcommand("expand", "expansion terms v^(1..n) and their sources");
  const auto b_expand = add_common(expand, f);
  int order = 1;
  std::size_t paths = 100000;
  expand->add_option("--order,-n", order, "highest order")->check(CLI::PositiveNumber);
  expand->add_option("--paths", paths, "Monte-Carlo paths for the order-1 cross-check (0 skips it)");

  auto* probe = app.add_subcommand("probe-digital", "truncated digital first-order integrals");
  const auto b_probe = add_common(probe, f);
  std::string etas = "1e-2,2.5e-3,6.25e-4";
  probe->add_option("--eta", etas, "comma-separated truncation gaps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (bs->parsed()) {
      const auto c = resolve(f, b_bs);
      print_row("price", bs_price(c.payoff, c.point_t, c.point_s, c.params));
      if (c.point_t < c.params.T) print_row("gamma", bs_gamma(c.payoff, c.point_t, c.point_s, c.params));
      return 0;
    }
    if (solve->parsed()) {
      const auto c = resolve(f, b_solve);
      const Grid grid = build_grid(c.grid, c.params, c.payoff.strikes());
      SolveStats st;
      Surface V = solve_nonlinear(grid, c.params, terminal_from(c.payoff), c.scheme, TerminalTreatment::raw, &st);
      V.epsilon = c.params.epsilon;
      V.meta["payoff"] = c.payoff.describe();
      V.meta["quantity"] = "value";
      std::filesystem::create_directories(c.out_dir);
      write_csv(V, c.out_dir / "value.csv");
      Surface P = premium_surface(V, c.payoff, c.params, c.baseline, c.scheme);
      P.epsilon = c.params.epsilon;
      P.meta["payoff"] = c.payoff.describe();
      P.meta["quantity"] = "premium";
      write_csv(P, c.out_dir / "premium.csv");
      const std::size_t lvl = grid.level_of(c.point_t);
      print_row("value", V.at(lvl, c.point_s));
      print_row("premium", P.at(lvl, c.point_s));
      std::printf("%-14s %zu\n%-14s %zu\n", "steps", st.steps, "halvings", st.halvings);
      return 0;
    }
    if (figure->parsed()) {
      const auto c = resolve(f, b_figure);
      const auto s = run_figure(c);
      print_row("max_premium", s.max_premium);
      print_row("argmax_t", s.t_at_max);
      print_row("argmax_s", s.s_at_max);
      print_row("min_premium", s.min_premium);
      print_row("bs_at_money", s.bs_at_money);
      std::printf("wrote %s\n", c.out_dir.string().c_str());
      if (!expect_max.empty() && !(s.max_premium >= expect_max[0] && s.max_premium <= expect_max[1])) {
        std::fprintf(stderr, "max premium outside [%g, %g]\n", expect_max[0], expect_max[1]);
        return kAcceptanceExit;
      }
      return 0;
    }
    if (sweep->parsed() || slope->parsed()) {
      auto c = resolve(f, sweep->parsed() ? b_sweep : b_slope);
      c.jobs = jobs;
      const auto rows = sweep_epsilon(c, c.point_t, c.point_s);
      std::filesystem::create_directories(c.out_dir);
      write_sweep_csv(rows, c.out_dir / "sweep.csv");
      std::printf("eps,value,bs,premium\n");
      for (const auto& r : rows)
        std::printf("%s,%s,%s,%s\n", format_double(r.eps).c_str(), format_double(r.value).c_str(),
                    format_double(r.bs).c_str(), format_double(r.premium).c_str());
      if (slope->parsed()) {
        const auto est = estimate_slope(rows);
        print_row("slope", est.slope);
        print_row("intercept", est.intercept);
        print_row("r_squared", est.r_squared);
        if (!window.empty() && !(est.slope >= window[0] && est.slope <= window[1])) {
          std::fprintf(stderr, "slope outside [%g, %g]\n", window[0], window[1]);
          return kAcceptanceExit;
        }
      }
      return 0;
    }
    if (sandwich->parsed()) {
      auto c = resolve(f, b_sandwich);
      if (a_opt->count()) {
        c.theorem.a = a;
        c.theorem_a_set = true;
      }
      if (beta_opt->count()) c.theorem.beta = beta;
      if (nu_opt->count()) c.theorem.nu = nu;
      if (c_opt->count()) {
        c.theorem.c_star = c_star;
        c.fit_c_star = false;
      }
      if (check_opt->count()) c.check_levels = c.check_nodes = check;
      const auto r = sandwich_report(c);
      print_row("c_star", r.c_star);
      std::printf("%-14s %zu\n%-14s %zu\n%-14s %zu\n", "points", r.points, "lower_viol", r.lower_violations,
                  "upper_viol", r.upper_violations);
      print_row("min_margin", r.min_upper_margin);
      print_row("median_margin", r.median_upper_margin);
      return r.lower_violations + r.upper_violations == 0 ? 0 : kAcceptanceExit;
    }
    if (expand->parsed()) {
      const auto c = resolve(f, b_expand);
      const Grid grid = build_grid(c.grid, c.params, c.payoff.strikes());
      const auto terms = expansion_terms(order, terminal_from(c.payoff), c.params, grid, {c.scheme, 4});
      std::filesystem::create_directories(c.out_dir);
      const std::size_t lvl = grid.level_of(c.point_t);
      for (const auto& term : terms) {
        const auto k = std::to_string(term.order);
        write_csv(term.term, c.out_dir / ("v" + k + ".csv"));
        write_csv(term.source, c.out_dir / ("F" + k + ".csv"));
        print_row(("v" + k).c_str(), term.term.at(lvl, c.point_s));
      }
      if (paths > 0 && c.payoff.has_closed_form() && std::isfinite(c.payoff.lipschitz())) {
        McConfig mc;
        mc.paths = paths;
        mc.seed = c.seed;
        const auto est = v1_mc_oracle(c.payoff, c.point_t, c.point_s, c.params, mc);
        print_row("v1_mc", est.estimate);
        print_row("v1_mc_stderr", est.std_error);
      }
      return 0;
    }
    if (probe->parsed()) {
      const auto c = resolve(f, b_probe);
      const double K = c.payoff.strikes().front();
      double prev = 0.0;
      std::printf("eta,value,ratio_to_previous\n");
      for (double eta : parse_list(etas)) {
        const double v = digital_divergence_probe(c.point_t, c.point_s, c.params, K, eta);
        std::printf("%s,%s,%s\n", format_double(eta).c_str(), format_double(v).c_str(),
                    prev > 0.0 ? format_double(v / prev).c_str() : "");
        prev = v;
      }
      return 0;
    }
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigExit;
  }
  return 0;
}
