#include "illiq/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>

#include "illiq/errors.hpp"
#include "illiq/expansion.hpp"

namespace illiq {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

ExperimentKind kind_from(const std::string& s) {
  if (s == "figure") return ExperimentKind::figure;
  if (s == "sweep") return ExperimentKind::sweep;
  if (s == "slope") return ExperimentKind::slope;
  if (s == "sandwich") return ExperimentKind::sandwich;
  throw ConfigError("unknown experiment '" + s + "'");
}

const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::figure: return "figure";
    case ExperimentKind::sweep: return "sweep";
    case ExperimentKind::slope: return "slope";
    case ExperimentKind::sandwich: return "sandwich";
  }
  return "figure";
}

json payoff_to_json(const Payoff& p) {
  return std::visit(
      [](const auto& k) -> json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Call>) return {{"type", "call"}, {"strike", k.K}};
        if constexpr (std::is_same_v<K, Put>) return {{"type", "put"}, {"strike", k.K}};
        if constexpr (std::is_same_v<K, Digital>) return {{"type", "digital"}, {"strike", k.K}};
        if constexpr (std::is_same_v<K, CallSpread>)
          return {{"type", "call_spread"}, {"K1", k.K1}, {"K2", k.K2}, {"scale", k.scale}};
        if constexpr (std::is_same_v<K, SampledCustom>) return {{"type", "sampled"}, {"s", k.s}, {"g", k.g}};
      },
      p.kind());
}

double strike_of(const Payoff& p) {
  const auto k = p.strikes();
  if (k.empty()) throw ConfigError("payoff has no strike");
  return k.front();
}

std::string grid_label(const Grid& g) { return std::to_string(g.M()) + "x" + std::to_string(g.N()); }

void tag(Surface& s, const RunConfig& c, const Grid& g, const std::string& quantity) {
  s.epsilon = c.params.epsilon;
  s.meta["quantity"] = quantity;
  s.meta["payoff"] = c.payoff.describe();
  s.meta["grid"] = grid_label(g);
  if (c.params.sigma.is_constant()) s.meta["sigma"] = format_double(c.params.sigma_const());
  if (c.params.ell.is_constant()) s.meta["ell"] = format_double(c.params.ell_const());
  s.meta["T"] = format_double(c.params.T);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
}

std::string gnuplot_script(const std::string& file, const std::string& zlabel, std::size_t M) {
  // The long-format file has no blank lines between levels, so plot dots, not a mesh.
  return "set datafile separator ','\n"
         "set datafile commentschars '#'\n"
         "set key off\n"
         "set xlabel 's'\nset ylabel 't'\nset zlabel '" +
         zlabel +
         "'\n"
         "set ticslevel 0\n"
         "splot '" +
         file + "' every ::1 using 2:1:3 with dots\n" + "# rows per level: " + std::to_string(M) + "\n";
}

}  // namespace

Payoff payoff_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("payoff must be an object");
  const auto type = get_or<std::string>(j, "type", "");
  if (type == "call" || type == "put" || type == "digital") {
    reject_unknown(j, {"type", "strike"}, "payoff");
    if (!j.contains("strike")) throw ConfigError("payoff needs a strike");
    const double K = get_or<double>(j, "strike", 0.0);
    if (type == "call") return Call{K};
    if (type == "put") return Put{K};
    return Digital{K};
  }
  if (type == "call_spread") {
    reject_unknown(j, {"type", "K1", "K2", "scale"}, "payoff");
    return CallSpread{get_or<double>(j, "K1", 0.0), get_or<double>(j, "K2", 0.0), get_or<double>(j, "scale", 1.0)};
  }
  if (type == "sampled") {
    reject_unknown(j, {"type", "s", "g", "path"}, "payoff");
    if (j.contains("path")) return load_sampled_payoff(j.at("path").get<std::string>());
    return SampledCustom{get_or<std::vector<double>>(j, "s", {}), get_or<std::vector<double>>(j, "g", {})};
  }
  throw ConfigError("unknown payoff type '" + type + "'");
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"experiment", "payoff", "market", "grid", "scheme", "baseline", "eps", "point", "out", "seed",
                  "jobs", "theorem", "check"},
                 "config");
  RunConfig c;
  c.kind = kind_from(get_or<std::string>(j, "experiment", "figure"));
  if (j.contains("payoff")) c.payoff = payoff_from_json(j.at("payoff"));
  if (j.contains("market")) {
    const auto& m = j.at("market");
    reject_unknown(m, {"sigma", "ell", "epsilon", "T", "sigma_max"}, "market");
    c.params.sigma = get_or<double>(m, "sigma", 0.2);
    c.params.ell = get_or<double>(m, "ell", 1.0);
    c.params.epsilon = get_or<double>(m, "epsilon", 0.0);
    c.params.T = get_or<double>(m, "T", 1.0);
    c.params.sigma_max = get_or<double>(m, "sigma_max", c.params.sigma_max);
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    reject_unknown(g, {"M", "N", "concentration", "s_min", "s_max"}, "grid");
    c.grid.M = get_or<std::size_t>(g, "M", c.grid.M);
    c.grid.N = get_or<std::size_t>(g, "N", c.grid.N);
    c.grid.concentration = get_or<double>(g, "concentration", c.grid.concentration);
    if (g.contains("s_min")) c.grid.s_min = get_or<double>(g, "s_min", 0.0);
    if (g.contains("s_max")) c.grid.s_max = get_or<double>(g, "s_max", 0.0);
  }
  if (j.contains("scheme")) {
    const auto& s = j.at("scheme");
    reject_unknown(s, {"theta", "rannacher_steps", "grading_fraction", "c_stab"}, "scheme");
    c.scheme.theta = get_or<double>(s, "theta", c.scheme.theta);
    c.scheme.rannacher_steps = get_or<int>(s, "rannacher_steps", c.scheme.rannacher_steps);
    c.scheme.grading_fraction = get_or<double>(s, "grading_fraction", c.scheme.grading_fraction);
    c.scheme.c_stab = get_or<double>(s, "c_stab", c.scheme.c_stab);
  }
  const auto baseline = get_or<std::string>(j, "baseline", "closed_form");
  if (baseline == "closed_form")
    c.baseline = Baseline::closed_form;
  else if (baseline == "same_grid")
    c.baseline = Baseline::same_grid;
  else
    throw ConfigError("baseline must be closed_form or same_grid");
  c.eps_list = get_or<std::vector<double>>(j, "eps", {});
  if (j.contains("point")) {
    const auto& p = j.at("point");
    reject_unknown(p, {"t", "s"}, "point");
    c.point_t = get_or<double>(p, "t", 0.0);
    c.point_s = get_or<double>(p, "s", c.point_s);
  } else if (!c.payoff.strikes().empty()) {
    c.point_s = strike_of(c.payoff);
  }
  c.out_dir = get_or<std::string>(j, "out", "out");
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.jobs = get_or<unsigned>(j, "jobs", 1u);
  if (j.contains("theorem")) {
    const auto& t = j.at("theorem");
    reject_unknown(t, {"a", "beta", "nu", "c_star"}, "theorem");
    c.theorem.a = get_or<double>(t, "a", c.theorem.a);
    c.theorem_a_set = t.contains("a");
    c.theorem.beta = get_or<double>(t, "beta", c.theorem.beta);
    c.theorem.nu = get_or<double>(t, "nu", c.theorem.nu);
    if (t.contains("c_star")) {
      c.theorem.c_star = get_or<double>(t, "c_star", 0.0);
      c.fit_c_star = false;
    }
  }
  if (j.contains("check")) {
    const auto& k = j.at("check");
    reject_unknown(k, {"levels", "nodes"}, "check");
    c.check_levels = get_or<std::size_t>(k, "levels", c.check_levels);
    c.check_nodes = get_or<std::size_t>(k, "nodes", c.check_nodes);
  }
  for (double e : c.eps_list)
    if (!(e > 0.0)) throw ConfigError("eps values must be positive");
  std::sort(c.eps_list.begin(), c.eps_list.end(), std::greater<>());
  if (std::adjacent_find(c.eps_list.begin(), c.eps_list.end()) != c.eps_list.end())
    throw ConfigError("eps values must be distinct");
  c.params.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const RunConfig& c) {
  json j;
  j["experiment"] = kind_name(c.kind);
  j["payoff"] = payoff_to_json(c.payoff);
  j["market"] = {{"sigma", c.params.sigma_const()},
                 {"ell", c.params.ell_const()},
                 {"epsilon", c.params.epsilon},
                 {"T", c.params.T}};
  j["grid"] = {{"M", c.grid.M}, {"N", c.grid.N}, {"concentration", c.grid.concentration}};
  if (c.grid.s_min) j["grid"]["s_min"] = *c.grid.s_min;
  if (c.grid.s_max) j["grid"]["s_max"] = *c.grid.s_max;
  j["baseline"] = c.baseline == Baseline::closed_form ? "closed_form" : "same_grid";
  j["eps"] = c.eps_list;
  j["point"] = {{"t", c.point_t}, {"s", c.point_s}};
  j["out"] = c.out_dir.string();
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["theorem"] = {{"beta", c.theorem.beta}, {"nu", c.theorem.nu}};
  if (c.theorem_a_set) j["theorem"]["a"] = c.theorem.a;
  if (!c.fit_c_star) j["theorem"]["c_star"] = c.theorem.c_star;
  j["check"] = {{"levels", c.check_levels}, {"nodes", c.check_nodes}};
  return j;
}

FigureSummary run_figure(const RunConfig& config) {
  ensure_dir(config.out_dir);
  const auto& params = config.params;
  const Grid grid = build_grid(config.grid, params, config.payoff.strikes());
  const auto terminal = terminal_from(config.payoff);
  SolveStats stats;
  const Surface V = solve_nonlinear(grid, params, terminal, config.scheme, TerminalTreatment::raw, &stats);
  Surface premium = premium_surface(V, config.payoff, params, config.baseline, config.scheme);
  tag(premium, config, grid, "premium");
  premium.meta["baseline"] = config.baseline == Baseline::closed_form ? "closed_form" : "same_grid";
  write_csv(premium, config.out_dir / "premium.csv");

  FigureSummary sum;
  sum.steps = stats.steps;
  sum.halvings = stats.halvings;
  const auto& vals = premium.values();
  const auto best = std::max_element(vals.begin(), vals.end());
  const auto idx = static_cast<std::size_t>(best - vals.begin());
  sum.max_premium = *best;
  sum.t_at_max = grid.t()[idx / grid.M()];
  sum.s_at_max = grid.s()[idx % grid.M()];
  sum.min_premium = *std::min_element(vals.begin(), vals.end());
  if (config.payoff.has_closed_form() && params.sigma.is_constant())
    sum.bs_at_money = bs_price(config.payoff, 0.0, strike_of(config.payoff), params);

  // v^(1) is finite only for Lipschitz payoffs.
  if (std::isfinite(config.payoff.lipschitz())) {
    auto term = v_n_recursive(1, terminal, params, grid, {config.scheme, 4});
    Surface v1 = term.term;
    tag(v1, config, grid, "v1");
    v1.order = 1;
    write_csv(v1, config.out_dir / "v1.csv");
    std::vector<double> scaled(v1.values());
    for (double& x : scaled) x *= params.epsilon;
    Surface first(grid, std::move(scaled));
    tag(first, config, grid, "epsilon * v1");
    first.order = 1;
    write_csv(first, config.out_dir / "first_order.csv");
    sum.first_order_written = true;
    write_text(config.out_dir / "first_order.gp", gnuplot_script("first_order.csv", "eps v1", grid.M()));
  }

  json s;
  s["payoff"] = config.payoff.describe();
  s["epsilon"] = params.epsilon;
  s["grid"] = grid_label(grid);
  s["max_premium"] = sum.max_premium;
  s["argmax"] = {{"t", sum.t_at_max}, {"s", sum.s_at_max}};
  s["min_premium"] = sum.min_premium;
  s["bs_at_money"] = sum.bs_at_money;
  s["steps"] = sum.steps;
  s["halvings"] = sum.halvings;
  s["first_order"] = sum.first_order_written ? "first_order.csv" : "not finite for this payoff";
  write_text(config.out_dir / "summary.json", s.dump(2) + "\n");
  write_text(config.out_dir / "plot.gp", gnuplot_script("premium.csv", "premium", grid.M()));
  return sum;
}

std::vector<SweepRow> sweep_epsilon(const RunConfig& config, double t, double s) {
  if (config.eps_list.size() < 2) throw ConfigError("a sweep needs at least 2 eps values");
  const Grid grid = build_grid(config.grid, config.params, config.payoff.strikes());
  if (s < grid.s_min() || s > grid.s_max()) throw DomainError("sweep point outside the grid");
  const std::size_t level = grid.level_of(t);
  const auto terminal = terminal_from(config.payoff);

  double bs = 0.0;
  if (config.baseline == Baseline::closed_form) {
    bs = bs_price(config.payoff, grid.t()[level], s, config.params);
  } else {
    MarketParams linear = config.params;
    linear.epsilon = 0.0;
    bs = solve_linear_with_source(grid, linear, terminal, {}, config.scheme).at(level, s);
  }

  const std::size_t n = config.eps_list.size();
  std::vector<SweepRow> rows(n);
  auto run = [&](std::size_t k) {
    MarketParams p = config.params;
    p.epsilon = config.eps_list[k];
    const double v = solve_nonlinear(grid, p, terminal, config.scheme).at(level, s);
    rows[k] = {p.epsilon, v, bs, v - bs};
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(config.jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    for (std::size_t k = 0; k < n; ++k) run(k);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = w; k < n; k += jobs) run(k);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.eps < b.eps; });
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::string text = "eps,value,bs,premium\n";
  for (const auto& r : rows)
    text += format_double(r.eps) + ',' + format_double(r.value) + ',' + format_double(r.bs) + ',' +
            format_double(r.premium) + '\n';
  write_text(path, text);
}

SlopeEstimate estimate_slope(const std::vector<SweepRow>& rows) {
  if (rows.size() < 4) throw DataError("a slope needs at least 4 eps points, got " + std::to_string(rows.size()));
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (!(r.eps > 0.0)) throw DataError("nonpositive eps " + format_double(r.eps));
    if (!(r.premium > 0.0))
      throw DataError("nonpositive premium " + format_double(r.premium) + " at eps " + format_double(r.eps));
    x.push_back(std::log(r.eps));
    y.push_back(std::log(r.premium));
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DataError("eps values must not all coincide");
  const double slope = sxy / sxx;
  const double r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                            [](const SweepRow& a, const SweepRow& b) { return a.eps < b.eps; });
  return {slope, my - slope * mx, r2, lo->eps, hi->eps, rows.size()};
}

SandwichReport sandwich_report(const RunConfig& config) {
  const auto kind = std::holds_alternative<Call>(config.payoff.kind())      ? RegularizedKind::call
                    : std::holds_alternative<Digital>(config.payoff.kind()) ? RegularizedKind::digital
                                                                            : throw ConfigError(
                                                                                  "sandwich needs a call or a digital");
  TheoremParams theorem = config.theorem;
  if (kind == RegularizedKind::digital && !config.theorem_a_set) theorem.a = digital_theorem_a(theorem.beta, theorem.nu);
  check_theorem_window(theorem, kind);
  if (config.check_levels < 1 || config.check_nodes < 2) throw ConfigError("check grid too small");
  const auto& params = config.params;
  const double K = strike_of(config.payoff);
  const Grid grid = build_grid(config.grid, params, config.payoff.strikes());
  const auto terminal = terminal_from(config.payoff);
  const Surface V = solve_nonlinear(grid, params, terminal, config.scheme);
  MarketParams liquid = params;
  liquid.epsilon = 0.0;
  const Surface L = solve_linear_with_source(grid, liquid, terminal, {}, config.scheme);

  // Check points: levels spread over [0, T) and nodes over [K/2, 2K].
  std::vector<std::size_t> levels, nodes;
  for (std::size_t k = 0; k < config.check_levels; ++k)
    levels.push_back(k * (grid.N() - 1) / config.check_levels);
  const auto& x = grid.s();
  const auto lo = static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), 0.5 * K) - x.begin());
  const auto hi = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), 2.0 * K) - x.begin()) - 1;
  for (std::size_t k = 0; k < config.check_nodes; ++k) nodes.push_back(lo + k * (hi - lo) / (config.check_nodes - 1));
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  // Both inequalities compare a grid solution with closed forms, so each
  // point is allowed the linear scheme's observed error at that point.
  struct Point {
    double v, bs, bound0, rem, tol;
    bool coarse;
  };
  std::vector<Point> pts;
  TheoremParams zero = theorem;
  zero.c_star = 0.0;
  for (std::size_t a = 0; a < levels.size(); ++a) {
    for (std::size_t b = 0; b < nodes.size(); ++b) {
      const double t = grid.t()[levels[a]];
      const double s = x[nodes[b]];
      const double v = V(levels[a], nodes[b]);
      const double bs = bs_price(config.payoff, t, s, params);
      const double tol = std::abs(L(levels[a], nodes[b]) - bs) + 1e-12 * std::max(1.0, std::abs(v));
      pts.push_back({v, bs, theorem_upper_bound(t, s, K, params, zero, kind),
                     theorem_remainder_per_cstar(t, params, zero, kind), tol, a % 2 == 0 && b % 2 == 0});
    }
  }

  SandwichReport r;
  r.points = pts.size();
  r.c_star = theorem.c_star;
  if (config.fit_c_star) {
    r.fitted = true;
    r.c_star = 0.0;
    for (const auto& p : pts)
      if (p.coarse && p.rem > 0.0) r.c_star = std::max(r.c_star, (p.v - p.tol - p.bound0) / p.rem);
  }
  std::vector<double> upper;
  r.min_lower_margin = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    const double margin = p.bound0 + r.c_star * p.rem - p.v;
    upper.push_back(margin);
    if (margin < -p.tol) ++r.upper_violations;
    r.min_lower_margin = std::min(r.min_lower_margin, p.v - p.bs);
    if (p.v - p.bs < -p.tol) ++r.lower_violations;
  }
  std::sort(upper.begin(), upper.end());
  r.min_upper_margin = upper.front();
  r.max_upper_margin = upper.back();
  r.median_upper_margin = upper[upper.size() / 2];

  ensure_dir(config.out_dir);
  json j;
  j["payoff"] = config.payoff.describe();
  j["epsilon"] = params.epsilon;
  j["theorem"] = {{"a", theorem.a}, {"beta", theorem.beta}, {"nu", theorem.nu}};
  j["c_star"] = r.c_star;
  j["c_star_fitted"] = r.fitted;
  j["fit_points"] = "even-indexed check points";
  j["points"] = r.points;
  j["lower_violations"] = r.lower_violations;
  j["upper_violations"] = r.upper_violations;
  j["upper_margin"] = {{"min", r.min_upper_margin}, {"median", r.median_upper_margin}, {"max", r.max_upper_margin}};
  j["lower_margin_min"] = r.min_lower_margin;
  write_text(config.out_dir / "sandwich.json", j.dump(2) + "\n");
  return r;
}

}  // namespace illiq
