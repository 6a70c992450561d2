#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>

#include "plrg/action.hpp"
#include "plrg/flow.hpp"
#include "plrg/norms.hpp"

using namespace plrg;
using json = nlohmann::ordered_json;

namespace {

constexpr int schema_version = 1;

struct Common {
  int L = 3, n = 1, Nt = 1, Nx = 1;
  std::optional<double> mu, v;
  double d = 1.0;
  std::string mode = "discrete", profile = "sharp", format = "json", out;
  double tol = 1e-10;
  std::uint64_t seed = 1;
};

TimeMode time_mode(const std::string& m) {
  if (m == "discrete") return TimeMode::discrete;
  if (m == "continuum" || m == "continuum-pretend") return TimeMode::continuum;
  throw ConfigError("--mode must be discrete or continuum (got " + m + ")");
}

AveragingProfile averaging_profile(const std::string& p) {
  if (p == "sharp") return {1};
  if (p == "smooth") return {5};
  throw ConfigError("--profile must be sharp or smooth (got " + p + ")");
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json header(const std::string& schema, const Common& c) {
  json j;
  j["schema"] = "plrg." + schema;
  j["schema_version"] = schema_version;
  j["config"] = {{"L", c.L},       {"n", c.n},           {"Nt", c.Nt},         {"Nx", c.Nx},
                 {"d", c.d},       {"mode", c.mode},     {"profile", c.profile}, {"tol", c.tol},
                 {"seed", c.seed}, {"mu", c.mu ? number(*c.mu) : json(nullptr)},
                 {"v", c.v ? number(*c.v) : json(nullptr)}};
  return j;
}

std::string cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

// Flat projection: the "rows" table with a header line, then "# key,value" lines for the summary.
std::string to_csv(const json& doc) {
  std::ostringstream os;
  os << "# schema," << cell(doc["schema"]) << "\n# schema_version," << cell(doc["schema_version"]) << "\n";
  if (doc.contains("rows") && !doc["rows"].empty()) {
    bool first = true;
    for (const auto& [k, v] : doc["rows"][0].items()) {
      os << (first ? "" : ",") << k;
      first = false;
    }
    os << "\n";
    for (const auto& row : doc["rows"]) {
      first = true;
      for (const auto& [k, v] : row.items()) {
        os << (first ? "" : ",") << cell(v);
        first = false;
      }
      os << "\n";
    }
  } else {
    os << "key,value\n";
  }
  if (doc.contains("summary"))
    for (const auto& [k, v] : doc["summary"].items()) {
      if (v.is_array()) {
        os << "# " << k;
        for (const auto& e : v) os << "," << cell(e);
        os << "\n";
      } else {
        os << "# " << k << "," << cell(v) << "\n";
      }
    }
  return os.str();
}

json fit_json(const SmallKFit& f) {
  return {{"mass_re", f.mass.real()}, {"mass_im", f.mass.imag()}, {"ik0_re", f.ik0.real()},
          {"ik0_im", f.ik0.imag()},   {"k0sq_re", f.k0sq.real()}, {"k0sq_im", f.k0sq.imag()},
          {"ksq_re", f.ksq.real()},   {"ksq_im", f.ksq.imag()},   {"residual", f.residual},
          {"window", f.window}};
}

json flatten(const std::string& prefix, const json& obj) {
  json out;
  for (const auto& [k, v] : obj.items()) out[prefix + k] = v;
  return out;
}

// ---- subcommands ----

struct FlowArgs {
  std::optional<int> steps;
  double stop_mu = 0.5, mu_star = 0.0, eps = 0.0, window = 0.1;
};

json cmd_flow(const Common& c, const FlowArgs& a) {
  const double mu0 = c.mu.value_or(1e-5), v0 = c.v.value_or(1e-5);
  if (!(a.stop_mu > 0.0)) throw ConfigError("--stop-mu must be positive");
  FlowOptions o;
  o.stop_mu = a.stop_mu;
  o.eps = a.eps;
  o.mu_star = a.mu_star;
  o.exponent = averaging_profile(c.profile).exponent;
  o.fit_window = a.window;
  o.steps = a.steps;
  const double d = c.d;
  if (!(d > 0.0)) throw ConfigError("--d must be positive");
  o.d_schedule = [d](int) { return d; };
  const FlowTrace tr = run_flow(mu0, v0, c.L, o);
  json doc = header("flow", c);
  doc["rows"] = json::array();
  std::vector<std::string> warnings;
  for (const auto& r : tr.rows) {
    doc["rows"].push_back({{"n", r.params.n},
                           {"mu", r.params.mu},
                           {"mu_quadratic", r.mu_quadratic},
                           {"v", r.params.v},
                           {"d", r.params.d},
                           {"a", number(r.params.a)},
                           {"kappa", r.params.kappa},
                           {"kappa_prime", r.params.kappa_prime},
                           {"radius", number(r.well.radius)},
                           {"depth", number(r.well.depth)},
                           {"classifier", to_string(r.regime)},
                           {"classified_at", r.classified_at}});
    for (const auto& w : r.params.warnings) warnings.push_back("n=" + std::to_string(r.params.n) + ": " + w);
  }
  doc["summary"] = {{"mu0", mu0}, {"v0", v0}, {"n_max", tr.n_max}, {"stop_reason", tr.stop_reason},
                    {"warnings", warnings}};
  return doc;
}

struct SymbolArgs {
  std::string entry = "scalar", grid = "dual";
  double window = 0.1;
  int points = 5;
};

json cmd_symbol(const Common& c, const SymbolArgs& a) {
  const double mu = c.mu.value_or(0.0);
  if (c.n < 0) throw ConfigError("--n must be nonnegative");
  const TorusShape s = make_shape(c.n, c.L, c.Nt, c.Nx);
  if (!(c.d > 0.0)) throw ConfigError("--d must be positive");
  const SymbolParams P{c.n, c.L, mu, c.d, time_mode(c.mode), averaging_profile(c.profile).exponent};
  std::function<cplx(const Momentum&)> sym;
  if (a.entry == "scalar")
    sym = [&](const Momentum& k) { return symbol_one_minus_QSQ(k, P); };
  else if (a.entry == "radial")
    sym = [&](const Momentum& k) { return symbol_one_minus_Qbox(k, P)(0, 0); };
  else if (a.entry == "tangential")
    sym = [&](const Momentum& k) { return symbol_one_minus_Qbox(k, P)(1, 1); };
  else
    throw ConfigError("--entry must be scalar, radial or tangential (got " + a.entry + ")");
  std::vector<Momentum> ks;
  if (a.grid == "dual")
    ks = dual_lattice(s.unit());
  else if (a.grid == "window") {
    if (a.points < 1) throw ConfigError("--points must be positive");
    ks = window_grid(a.window, a.points);
  } else
    throw ConfigError("--grid must be dual or window (got " + a.grid + ")");
  json doc = header("symbol", c);
  doc["rows"] = json::array();
  for (const auto& k : ks) {
    const cplx z = sym(k);
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw NumericalError("symbol is singular at a grid point");
    doc["rows"].push_back({{"k0", k.k0}, {"k1", k.k[0]}, {"k2", k.k[1]}, {"k3", k.k[2]}, {"re", z.real()}, {"im", z.imag()}});
  }
  const RegimeReport rep = classify_parameters(P, a.window);
  json sum = {{"entry", a.entry}, {"classifier", to_string(rep.regime)}, {"radial_mass", rep.radial_mass}};
  sum.update(flatten("scalar_fit_", fit_json(rep.scalar_fit)));
  sum.update(flatten("tangential_fit_", fit_json(rep.tangential_fit)));
  doc["summary"] = sum;
  return doc;
}

struct BackgroundArgs {
  std::string kind = "constant";
  double psi = 0.0, amp = 0.05;
  int max_iter = 100;
};

json cmd_background(const Common& c, const BackgroundArgs& a) {
  const ModelParams p = make_model(c.mu.value_or(0.0), c.v.value_or(1.0), c.d);
  json doc = header("background", c);
  if (a.kind == "constant") {
    if (!std::isfinite(a.psi)) throw ConfigError("--psi must be finite");
    const auto roots = solve_constant(a.psi, p);
    doc["rows"] = json::array();
    for (double r : roots) {
      const double res = (p.v * r * r + 1.0 - p.mu) * r - a.psi;
      doc["rows"].push_back({{"root", r}, {"residual", std::abs(res)}});
    }
    doc["summary"] = {{"kind", "constant"}, {"psi", a.psi}, {"root_count", roots.size()}};
    return doc;
  }
  if (a.kind != "field") throw ConfigError("--kind must be constant or field (got " + a.kind + ")");
  if (!(a.amp >= 0.0)) throw ConfigError("--amp must be nonnegative");
  const TorusShape s = make_shape(c.n, c.L, c.Nt, c.Nx);
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> nd;
  FieldPair psi{Field(s.unit()), Field(s.unit())};
  for (std::size_t i = 0; i < psi.plain.size(); ++i) {
    psi.plain[i] = a.amp * cplx(nd(rng), nd(rng));
    psi.starred[i] = a.amp * cplx(nd(rng), nd(rng));
  }
  SolveOptions o;
  o.tol = c.tol;
  o.max_iter = a.max_iter;
  o.profile = averaging_profile(c.profile);
  const auto sol = solve_nonlinear(psi, p, s, o);
  if (!sol.converged)
    throw NumericalError("background solve did not converge: residual " + std::to_string(std::max(sol.residual, sol.residual_star)));
  doc["summary"] = {{"kind", "field"},          {"amp", a.amp},
                    {"sites_fine", s.fine().size()}, {"converged", sol.converged},
                    {"iterations", sol.iterations},  {"residual", sol.residual},
                    {"residual_star", sol.residual_star}, {"phi_sup", max_abs(sol.phi)},
                    {"phi_star_sup", max_abs(sol.phi_star)}};
  return doc;
}

json cmd_spectrum(const Common& c) {
  const ModelParams p = make_model(c.mu.value_or(0.0), c.v.value_or(1.0), c.d);
  const TorusShape s = make_shape(c.n, c.L, c.Nt, c.Nx);
  const auto rep = dominant_quadratic_spectrum(p, s, averaging_profile(c.profile));
  json doc = header("spectrum", c);
  doc["summary"] = {{"eigenvalue_count", rep.eigenvalue_count},
                    {"min_distance_to_negative_axis", rep.min_distance},
                    {"closest_re", rep.closest.real()},
                    {"closest_im", rep.closest.imag()},
                    {"sqrt_residual", rep.sqrt_residual},
                    {"sqrt_min_real", rep.sqrt_min_real},
                    {"largest_block", rep.largest_block}};
  return doc;
}

struct NormsArgs {
  std::string kernel;
  double m = 0.5;
  bool absolute = false;
  bool mst = false;
};

json cmd_norms(const Common& c, const NormsArgs& a) {
  if (a.kernel.empty()) throw ConfigError("--kernel is required");
  std::ifstream in(a.kernel);
  if (!in) throw ConfigError("cannot open kernel file " + a.kernel);
  if (c.Nt <= 0 || c.Nx <= 0) throw ConfigError("torus extents Nt, Nx must be positive");
  const Grid g{{c.Nt, c.Nx, c.Nx, c.Nx}, 1.0, 1.0};
  const Kernel K = read_kernel(in, g, !a.absolute);
  const TreeMethod tm = a.mst ? TreeMethod::mst_bound : TreeMethod::steiner;
  json doc = header("norms", c);
  doc["summary"] = {{"kernel", std::filesystem::path(a.kernel).filename().string()},
                    {"arity", K.arity},
                    {"entries", K.entries.size()},
                    {"translation_invariant", K.translation_invariant},
                    {"tree", a.mst ? "mst_bound" : "steiner"},
                    {"m", a.m},
                    {"norm", kernel_norm(K, a.m, tm)},
                    {"v0", 2.0 * kernel_norm(K, 2.0 * a.m, tm)}};
  return doc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-spin RG laboratory: flows, symbols, background fields, spectra and kernel norms"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value config file; command-line flags take precedence");
  Common c;
  app.add_option("--L", c.L, "block factor (odd, >= 3)");
  app.add_option("--n", c.n, "scale index");
  app.add_option("--Nt", c.Nt, "unit torus extent in time");
  app.add_option("--Nx", c.Nx, "unit torus extent in space");
  app.add_option("--mu", c.mu, "chemical potential (mu0 for flow)");
  app.add_option("--v", c.v, "coupling (v0 for flow)");
  app.add_option("--d", c.d, "time-derivative coefficient d_n");
  app.add_option("--mode", c.mode, "discrete | continuum");
  app.add_option("--profile", c.profile, "sharp | smooth");
  app.add_option("--tol", c.tol, "solver tolerance");
  app.add_option("--out", c.out, "output path (stdout when omitted)");
  app.add_option("--format", c.format, "json | csv");
  app.add_option("--seed", c.seed, "seed for generated test fields");

  FlowArgs fa;
  auto* flow = app.add_subcommand("flow", "parameter flow with quadratic-level mu renormalization");
  flow->add_option("--steps", fa.steps, "last step to compute");
  flow->add_option("--stop-mu", fa.stop_mu, "stop once the renormalized mu reaches this value");
  flow->add_option("--mu-star", fa.mu_star, "lower edge offset of the admissible window");
  flow->add_option("--eps", fa.eps, "exponent shift in kappa, kappa'");
  flow->add_option("--window", fa.window, "small-k fit window for the classifier");

  SymbolArgs sa;
  auto* symbol = app.add_subcommand("symbol", "symbol table with small-k fit and regime classifier");
  symbol->add_option("--entry", sa.entry, "scalar | radial | tangential");
  symbol->add_option("--grid", sa.grid, "dual (unit dual lattice) | window");
  symbol->add_option("--window", sa.window, "half-width of the momentum window and the fit");
  symbol->add_option("--points", sa.points, "window points per axis");

  BackgroundArgs ba;
  auto* background = app.add_subcommand("background", "background-field solves");
  background->add_option("--kind", ba.kind, "constant | field");
  background->add_option("--psi", ba.psi, "constant external field");
  background->add_option("--amp", ba.amp, "amplitude of the seeded random external field");
  background->add_option("--max-iter", ba.max_iter, "Newton iteration cap");

  auto* spectrum = app.add_subcommand("spectrum", "spectrum of Q*Q + D - mu and its square root");

  NormsArgs na;
  auto* norms = app.add_subcommand("norms", "tree-weighted kernel norm and coupling constant");
  norms->add_option("--kernel", na.kernel, "sparse kernel file");
  norms->add_option("--m", na.m, "decay rate");
  norms->add_flag("--absolute", na.absolute, "entries are absolute, not translation classes");
  norms->add_flag("--mst", na.mst, "minimal spanning tree upper bound instead of exact Steiner lengths");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (c.format != "json" && c.format != "csv") throw ConfigError("--format must be json or csv (got " + c.format + ")");
    json doc;
    if (*flow)
      doc = cmd_flow(c, fa);
    else if (*symbol)
      doc = cmd_symbol(c, sa);
    else if (*background)
      doc = cmd_background(c, ba);
    else if (*spectrum)
      doc = cmd_spectrum(c);
    else
      doc = cmd_norms(c, na);
    const std::string text = c.format == "json" ? doc.dump(2) + "\n" : to_csv(doc);
    if (c.out.empty() || c.out == "-") {
      std::cout << text;
    } else {
      std::ofstream f(c.out, std::ios::binary);
      if (!f) throw ConfigError("cannot write " + c.out);
      f << text;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
