// blt: command-line front end. Every subcommand takes its parameters from
// defaults, then an optional JSON config (--config), then explicit flags.
// Outputs go to --out (created if missing) as CSV and JSON.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "blt/assembler.hpp"
#include "blt/asympt.hpp"
#include "blt/channel.hpp"
#include "blt/charpoly.hpp"
#include "blt/ergodic.hpp"
#include "blt/halfspace.hpp"
#include "blt/steklov.hpp"
#include "json.hpp"
#include "verify.hpp"

using namespace blt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class PType { Int, Real, Str, Bool, Reals, Strs };

struct Param {
  PType type;
  json value;
  std::string help;
};

struct Ctx {
  std::uint64_t seed = 2024;
  int jobs = 1;
  fs::path out = "out";
};

using Params = std::map<std::string, Param>;
using Runner = int (*)(const json&, const Ctx&);

struct Command {
  std::string name;
  std::string help;
  Params params;
  Runner run;
  CLI::App* app = nullptr;
  std::map<std::string, std::string> raw;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> opts;
};

[[noreturn]] void usage(const std::string& msg) { fail("Usage", msg); }

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> r;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) r.push_back(item);
  return r;
}

double to_real(const std::string& key, const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) usage("--" + key + ": '" + s + "' is not a number");
  return v;
}

json from_text(const std::string& key, PType t, const std::string& s) {
  switch (t) {
    case PType::Int: {
      const double v = to_real(key, s);
      if (v != std::floor(v)) usage("--" + key + ": '" + s + "' is not an integer");
      return static_cast<long long>(v);
    }
    case PType::Real:
      return to_real(key, s);
    case PType::Str:
      return s;
    case PType::Reals: {
      json a = json::array();
      for (const auto& x : split(s)) a.push_back(to_real(key, x));
      return a;
    }
    case PType::Strs: {
      json a = json::array();
      for (const auto& x : split(s))
        if (!x.empty()) a.push_back(x);
      return a;
    }
    case PType::Bool:
      break;
  }
  return true;
}

// Config values must have the parameter's type.
void check_type(const std::string& key, PType t, const json& v) {
  bool ok = false;
  switch (t) {
    case PType::Int: ok = v.is_number_integer(); break;
    case PType::Real: ok = v.is_number(); break;
    case PType::Str: ok = v.is_string(); break;
    case PType::Bool: ok = v.is_boolean(); break;
    case PType::Reals:
      ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); });
      break;
    case PType::Strs:
      ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); });
      break;
  }
  if (!ok) usage("config: parameter '" + key + "' has the wrong type");
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2) << '\n'; }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Side side_of(const json& p) { return side_from_string(p.at("side").get<std::string>()); }

std::vector<Side> sides_of(const json& p) {
  const auto s = p.at("side").get<std::string>();
  if (s == "both") return {Side::West, Side::East};
  return {side_from_string(s)};
}

std::vector<double> reals(const json& p, const char* k) { return p.at(k).get<std::vector<double>>(); }

// Smooth random trace on |k| <= kmax, coefficients damped by 1/(1+k^2).
BoundaryTrace smooth_trace(const SpectralGrid& g, int kmax, std::uint64_t seed, double amp) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  BoundaryTrace t = BoundaryTrace::zeros(g.N);
  for (int k = 0; k <= kmax; ++k) {
    const double d = 1.0 + k * k;
    const double a = n(rng) / d, b = n(rng) / d, c = n(rng) / d, e = n(rng) / d;
    for (int j = 0; j < g.N; ++j) {
      const double th = 2 * kPi * k * g.y(j) / g.L;
      t.psi0[j] += amp * (a * std::cos(th) + b * std::sin(th));
      t.psi1[j] += amp * (c * std::cos(th) + e * std::sin(th));
    }
  }
  return t;
}

// ---------------------------------------------------------------- commands

int cmd_roots(const json& p, const Ctx& c) {
  if (!p.at("sweep").get<bool>()) {
    std::ofstream csv(c.out / "roots.csv");
    csv << "side,alpha,xi,k,re,im,class\n";
    std::printf("%-5s %8s %10s %2s %22s %22s  %s\n", "side", "alpha", "xi", "k", "re", "im", "class");
    const double a = p.at("alpha").get<double>(), xi = p.at("xi").get<double>();
    for (Side s : sides_of(p)) {
      const auto r = solve_quartic(quartic_coeffs(s, a, xi));
      for (int k = 0; k < 4; ++k) {
        const cplx z = r.all[k];
        const char* cls = r.zero && std::abs(z - *r.zero) == 0.0 ? "zero" : z.real() > 0 ? "pos" : "neg";
        std::printf("%-5s %8g %10g %2d %22.15g %22.15g  %s\n", to_string(s).c_str(), a, xi, k, z.real(),
                    z.imag(), cls);
        csv << to_string(s) << ',' << num(a) << ',' << num(xi) << ',' << k << ',' << num(z.real()) << ','
            << num(z.imag()) << ',' << cls << '\n';
      }
    }
    return kExitOk;
  }
  SweepSpec sw;
  sw.alpha_min = p.at("alpha_min").get<double>();
  sw.alpha_max = p.at("alpha_max").get<double>();
  sw.xi_min = p.at("xi_min").get<double>();
  sw.xi_max = p.at("xi_max").get<double>();
  sw.n_alpha = p.at("n_alpha").get<int>();
  sw.n_xi = p.at("n_xi").get<int>();
  if (sw.n_alpha < 1 || sw.n_xi < 1 || !(sw.xi_min > 0) || !(sw.xi_max >= sw.xi_min) ||
      !(sw.alpha_max >= sw.alpha_min))
    usage("invalid sweep range");
  int code = kExitOk;
  for (Side s : sides_of(p)) {
    const auto r = certify_simple_offaxis(s, sw);
    write_json(c.out / ("cert_" + to_string(s) + ".json"), r.to_json());
    std::printf("%s: %zu points, max residual %.3e, min gap %.3e, min |Re| %.3e, failures %zu\n",
                to_string(s).c_str(), r.n_points, r.max_residual, r.min_gap, r.min_abs_re, r.failures.size());
    if (!r.ok()) code = kExitCert;
  }
  if (code != kExitOk) std::fprintf(stderr, "CertFailure: see cert_*.json\n");
  return code;
}

int cmd_asympt(const json& p, const Ctx& c) {
  std::ofstream csv(c.out / "asympt_fits.csv");
  csv << "name,regime,side,alpha,slope,claimed,reference_order,r2,pass\n";
  int fails = 0;
  for (double a : reals(p, "alpha")) {
    for (const auto& e : expansion_registry()) {
      const auto f = fit_order(e, a);
      fails += !f.pass;
      csv << e.name << ',' << to_string(e.regime) << ',' << to_string(e.side) << ',' << num(a) << ','
          << num(f.slope) << ',' << num(e.order(a)) << ',' << num(e.reference_order) << ',' << num(f.r2) << ','
          << (f.pass ? "true" : "false") << '\n';
    }
  }
  std::printf("asympt: %d failing fits\n", fails);
  return fails ? kExitSuite : kExitOk;
}

int cmd_halfspace(const json& p, const Ctx& c) {
  const Side s = side_of(p);
  const double a = p.at("alpha").get<double>();
  const auto g = make_grid(p.at("L").get<double>(), p.at("N").get<int>(), p.at("xmax").get<double>(),
                           p.at("nx").get<int>());
  const auto t = smooth_trace(g, p.at("kmax").get<int>(), c.seed, p.at("amp").get<double>());
  const auto f = solve_homogeneous(s, a, t, g);
  double rep = 0;
  for (int j = 0; j < g.N; ++j)
    rep = std::max({rep, std::abs(f(0, j) - t.psi0[j]), std::abs(f.xderiv[0][j] - t.psi1[j])});
  write_field(f, (c.out / "halfspace_field.bin").string());
  std::ofstream csv(c.out / "halfspace_profile.csv");
  csv << "X,sup_abs_psi\n";
  for (int i = 0; i < f.nx(); ++i) {
    double m = 0;
    for (int j = 0; j < g.N; ++j) m = std::max(m, std::abs(f(i, j)));
    csv << num(f.x[i]) << ',' << num(m) << '\n';
  }
  const json rep_j{{"side", to_string(s)},
                   {"alpha", a},
                   {"trace_error", rep},
                   {"pde_residual", pde_residual(s, a, f, nullptr, g)},
                   {"sup", f.sup()}};
  write_json(c.out / "halfspace.json", rep_j);
  std::printf("%s\n", rep_j.dump().c_str());
  return kExitOk;
}

int cmd_nonlinear(const json& p, const Ctx& c) {
  const Side s = side_of(p);
  const double a = p.at("alpha").get<double>();
  const auto g = make_grid(p.at("L").get<double>(), p.at("N").get<int>(), p.at("xmax").get<double>(),
                           p.at("nx").get<int>(), 1.02);
  const auto t = smooth_trace(g, p.at("kmax").get<int>(), c.seed, p.at("amp").get<double>());
  PicardOptions opt;
  opt.tol = p.at("tol").get<double>();
  opt.max_iter = p.at("max_iter").get<int>();
  auto [psi, tr] = picard_solve(s, a, t, g, opt);
  write_json(c.out / "nonlinear.json", {{"side", to_string(s)}, {"alpha", a}, {"trace", tr.to_json()}});
  std::ofstream csv(c.out / "nonlinear_iterations.csv");
  csv << "n,increment,ratio\n";
  for (std::size_t n = 0; n < tr.increments.size(); ++n)
    csv << n + 1 << ',' << num(tr.increments[n]) << ',' << (n < tr.ratios.size() ? num(tr.ratios[n]) : "") << '\n';
  std::printf("nonlinear: %d iterations, residual %.3e, converged %s\n", tr.iterations, tr.residual,
              tr.converged ? "yes" : "no");
  return tr.converged ? kExitOk : kExitSuite;
}

int cmd_steklov(const json& p, const Ctx& c) {
  const double a = p.at("alpha").get<double>();
  const auto xis = logspace(p.at("xi_min").get<double>(), p.at("xi_max").get<double>(), p.at("n_xi").get<int>());
  const auto g = make_grid(p.at("L").get<double>(), p.at("N").get<int>(), 10, 10);
  json reps = json::array();
  bool ok = true;
  for (Side s : sides_of(p)) {
    std::ofstream csv(c.out / ("steklov_symbol_" + to_string(s) + ".csv"));
    write_symbol_csv(csv, s, a, xis);
    const auto r = negativity_check(s, a, p.at("n_random").get<int>(), g, c.seed);
    ok = ok && r.ok();
    reps.push_back(r.to_json());
    std::printf("%s: sign violations %d of %d, max pairing/scale %.3e\n", to_string(s).c_str(), r.violations, r.n,
                r.max_normalized);
  }
  write_json(c.out / "steklov_sign.json", reps);
  return ok ? kExitOk : kExitSuite;
}

int cmd_channel(const json& p, const Ctx& c) {
  const Side s = side_of(p);
  const double a = p.at("alpha").get<double>();
  const int N = p.at("N").get<int>();
  const double L = p.at("L").get<double>(), M = p.at("M").get<double>();
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> nd;
  Jumps jumps = zero_jumps(N);
  for (int q = 0; q < 4; ++q)
    for (int k = 1; k <= p.at("kmax").get<int>(); ++k) {
      const double amp = nd(rng) / k, ph = 2 * kPi * nd(rng);
      for (int j = 0; j < N; ++j) jumps[q][j] += amp * std::cos(2 * kPi * k * j / N + ph);
    }
  const double rough = p.at("rough_amp").get<double>();
  const auto profile = rough == 0.0 ? RoughProfile::flat(p.at("gamma").get<double>(), N, L)
                                    : RoughProfile::random(p.at("gamma").get<double>(), rough, 3, N, L, c.seed);
  profile.validate();
  const double tol = p.at("glue_tol").get<double>();
  GlueReport glue;
  std::ofstream csv(c.out / "channel_profile.csv");
  csv << "X,psi_y0\n";
  json rep{{"side", to_string(s)}, {"alpha", a}, {"flat", profile.is_flat()}};
  if (profile.is_flat()) {
    SpectralGrid grid;
    grid.L = L;
    grid.N = N;
    ChannelLayout lay;
    lay.gamma0 = profile.gamma[0];
    lay.M = M;
    const auto f = solve_channel_flat(s, a, lay, jumps, SteklovRows{}, grid);
    glue = glue_check(s, a, f, grid, tol);
    for (int i = 0; i < f.nx(); ++i) csv << num(f.x[i]) << ',' << num(f(i, 0).real()) << '\n';
  } else {
    const auto sol = solve_channel_rough(s, a, profile, jumps, SteklovRows{}, M, p.at("ns").get<int>());
    glue = glue_check(s, a, sol, tol);
    for (int i = 0; i < sol.ns; ++i) csv << num(sol.X[static_cast<std::size_t>(i) * sol.N]) << ',' << num(sol(i, 0)) << '\n';
    rep["wall_value_max"] = sol.wall_value_max();
    rep["wall_normal_max"] = sol.wall_normal_max();
  }
  rep["glue"] = glue.to_json();
  write_json(c.out / "channel.json", rep);
  std::printf("channel: glue %s, rho mismatch %.3e\n", glue.ok ? "ok" : "FAIL", glue.rho_mismatch);
  return glue.ok ? kExitOk : kExitSuite;
}

int cmd_ergodic(const json& p, const Ctx& c) {
  const auto g = make_grid(p.at("L").get<double>(), p.at("N").get<int>(), 10.0, 10);
  const int seeds = p.at("seeds").get<int>();
  const EpsDomain box{0.0, p.at("box_x").get<double>(), p.at("box_y").get<double>(), 64};
  const auto e = ergodic_ensemble(StationaryProcess::moving_average(0, 1, p.at("width").get<double>(), c.seed),
                                  StationaryProcess::constant(0.0), p.at("alpha").get<double>(), g, reals(p, "X"),
                                  reals(p, "eps"), seeds, c.jobs, box);
  write_json(c.out / "ergodic.json", e.to_json());
  std::ofstream csv(c.out / "ergodic_sup.csv");
  csv << "seed,X,erg_err,j_env,alg_ratio\n";
  for (std::size_t r = 0; r < e.runs.size(); ++r)
    for (std::size_t i = 0; i < e.runs[r].X.size(); ++i)
      csv << c.seed + r << ',' << num(e.runs[r].X[i]) << ',' << num(e.runs[r].erg_err[i]) << ','
          << num(e.runs[r].j_env[i]) << ',' << num(e.runs[r].alg_ratio[i]) << '\n';
  const int need = (9 * seeds + 9) / 10;
  const bool ok = e.monotone_count >= need && e.trend_count >= need && e.alg_bounded && e.j_exponent >= 0.15 &&
                  e.j_exponent <= 0.35;
  std::printf("ergodic: monotone %d/%d, trend %d/%d, J exponent %.3f, alg bounded %s\n", e.monotone_count, seeds,
              e.trend_count, seeds, e.j_exponent, e.alg_bounded ? "yes" : "no");
  return ok ? kExitOk : kExitSuite;
}

int cmd_assemble(const json& p, const Ctx& c) {
  const double eps = p.at("eps").get<double>();
  const auto geom = DomainGeometry::box(0.0, 1.0, 0.0, 1.0, eps);
  const auto scen = p.at("scenario").get<std::string>();
  const double amp = p.at("amp").get<double>(), margin = p.at("margin").get<double>();
  WindForcing f;
  if (scen == "double-gyre")
    f = WindForcing::double_gyre(amp, 0.0, 1.0, 0.0, 1.0, margin);
  else if (scen == "sin-x")
    f = WindForcing::sin_x(amp, 0.0, 1.0, 0.0, 1.0, margin);
  else if (scen == "zero")
    f = WindForcing::zero();
  else
    usage("unknown scenario '" + scen + "'");
  // The western layer must decay inside the basin: its envelope e^{-X/2}
  // at the far coast, X = width / eps, is the layer overlap.
  const double overlap = std::exp(-0.5 * (geom.xe0 - geom.xw0) / eps);
  if (overlap > p.at("layer_tol").get<double>())
    fail("UnderResolved", "eps " + num(eps) + " too large for the basin: layer overlap " + num(overlap));
  AssembleOptions opt;
  opt.order = p.at("order").get<int>();
  opt.t = p.at("t").get<double>();
  const auto app = assemble_app(geom, f, opt);
  int ppl = p.at("points_per_layer").get<int>();
  if (const int nx = p.at("nx").get<int>(); nx > 0)
    ppl = static_cast<int>(std::floor((nx - 1) * eps / (app.x_right() - app.x_left())));
  const auto r = residual_norms(app, ppl, p.at("ny").get<int>());
  const auto smp = sample_app(app, p.at("sample_nx").get<int>(), p.at("sample_ny").get<int>());
  std::ofstream psi(c.out / "assemble_psi.csv");
  psi << "x,y,psi\n";
  for (std::size_t i = 0; i < smp.x.size(); ++i)
    for (std::size_t j = 0; j < smp.y.size(); ++j)
      psi << num(smp.x[i]) << ',' << num(smp.y[j]) << ',' << num(smp.psi[i * smp.y.size() + j]) << '\n';
  std::ofstream res(c.out / "assemble_residual.csv");
  res << "eps,order,l2,hm1,hm2,l2_scaled,hm1_scaled,hm2_scaled,lap_w0_hm2\n";
  res << num(eps) << ',' << opt.order << ',' << num(r.l2) << ',' << num(r.hm1) << ',' << num(r.hm2) << ','
      << num(r.l2_s) << ',' << num(r.hm1_s) << ',' << num(r.hm2_s) << ',' << num(r.lap_w0_hm2) << '\n';
  write_json(c.out / "assemble.json", {{"geometry", geom.to_json()},
                                       {"forcing", f.to_json()},
                                       {"order", opt.order},
                                       {"e_far", app.e_far},
                                       {"boundary_residual", smp.boundary_residual},
                                       {"residual", r.to_json()}});
  std::printf("assemble: eps %g order %d, residual L2 %.4e H-1 %.4e H-2 %.4e, boundary %.3e\n", eps, opt.order, r.l2,
              r.hm1, r.hm2, smp.boundary_residual);
  return kExitOk;
}

int cmd_verify_all(const json& p, const Ctx& c) {
  const auto ids = verify::criteria_for(p.at("only").get<std::vector<std::string>>());
  verify::Options o;
  o.seed = c.seed;
  o.jobs = c.jobs;
  json all = json::array();
  bool ok = true;
  for (int id : ids) {
    const auto r = verify::run_criterion(id, o);
    std::cout << verify::format(r) << std::flush;
    ok = ok && r.pass();
    all.push_back(r.to_json());
  }
  write_json(c.out / "verify_all.json", {{"seed", c.seed}, {"pass", ok}, {"criteria", all}});
  return ok ? kExitOk : kExitSuite;
}

std::vector<Command> commands() {
  const Param side{PType::Str, "west", "west | east"};
  const Param sides{PType::Str, "west", "west | east | both"};
  return {
      {"roots",
       "roots of the characteristic quartic, or the certification sweep",
       {{"side", sides},
        {"alpha", {PType::Real, 0.0, "alpha"}},
        {"xi", {PType::Real, 0.0, "xi"}},
        {"sweep", {PType::Bool, false, "run the certification sweep"}},
        {"alpha_min", {PType::Real, -2.0, "sweep alpha min"}},
        {"alpha_max", {PType::Real, 2.0, "sweep alpha max"}},
        {"xi_min", {PType::Real, 0.01, "sweep |xi| min"}},
        {"xi_max", {PType::Real, 50.0, "sweep |xi| max"}},
        {"n_alpha", {PType::Int, 200, "sweep alpha points"}},
        {"n_xi", {PType::Int, 200, "sweep |xi| points"}}},
       cmd_roots},
      {"asympt",
       "order fits of every registered expansion",
       {{"alpha", {PType::Reals, json::array({0.7, 0.0}), "alpha values, comma separated"}}},
       cmd_asympt},
      {"halfspace",
       "homogeneous half-space solve of a random smooth trace",
       {{"side", side},
        {"alpha", {PType::Real, 0.6, "alpha"}},
        {"L", {PType::Real, 64.0, "period"}},
        {"N", {PType::Int, 128, "Y points"}},
        {"xmax", {PType::Real, 30.0, "X extent"}},
        {"nx", {PType::Int, 200, "X points"}},
        {"kmax", {PType::Int, 6, "trace modes"}},
        {"amp", {PType::Real, 1.0, "trace amplitude"}}},
       cmd_halfspace},
      {"nonlinear",
       "Picard solve of the nonlinear half-space problem",
       {{"side", side},
        {"alpha", {PType::Real, 0.0, "alpha"}},
        {"L", {PType::Real, 32.0, "period"}},
        {"N", {PType::Int, 32, "Y points"}},
        {"xmax", {PType::Real, 20.0, "X extent"}},
        {"nx", {PType::Int, 160, "X points"}},
        {"kmax", {PType::Int, 6, "trace modes"}},
        {"amp", {PType::Real, 1e-3, "trace amplitude"}},
        {"tol", {PType::Real, 1e-10, "fixed-point tolerance"}},
        {"max_iter", {PType::Int, 30, "iteration cap"}}},
       cmd_nonlinear},
      {"steklov",
       "symbol tables and the sign property",
       {{"side", sides},
        {"alpha", {PType::Real, 0.0, "alpha"}},
        {"xi_min", {PType::Real, 0.01, "table |xi| min"}},
        {"xi_max", {PType::Real, 50.0, "table |xi| max"}},
        {"n_xi", {PType::Int, 64, "table points"}},
        {"n_random", {PType::Int, 1000, "random traces for the sign check"}},
        {"L", {PType::Real, 64.0, "period"}},
        {"N", {PType::Int, 128, "Y points"}}},
       cmd_steklov},
      {"channel",
       "channel solve with transparent rows and the glue check",
       {{"side", side},
        {"alpha", {PType::Real, 0.0, "alpha"}},
        {"L", {PType::Real, 16.0, "period"}},
        {"N", {PType::Int, 32, "Y points"}},
        {"M", {PType::Real, 4.0, "channel width"}},
        {"gamma", {PType::Real, 1.0, "mean wall depth"}},
        {"rough_amp", {PType::Real, 0.0, "wall roughness amplitude, 0 = flat"}},
        {"ns", {PType::Int, 80, "s points (rough walls)"}},
        {"glue_tol", {PType::Real, 1e-6, "relative glue tolerance at X = M"}},
        {"kmax", {PType::Int, 5, "jump modes"}}},
       cmd_channel},
      {"ergodic",
       "seed ensemble of eastern ergodic convergence",
       {{"alpha", {PType::Real, 0.0, "alpha"}},
        {"L", {PType::Real, 8192.0, "period"}},
        {"N", {PType::Int, 32768, "Y points"}},
        {"width", {PType::Real, 2.0, "moving-average width"}},
        {"seeds", {PType::Int, 20, "ensemble size"}},
        {"X", {PType::Reals, json::array({1, 4, 16, 64, 256}), "layer distances"}},
        {"eps", {PType::Reals, json::array({0.1, 0.05, 0.025}), "eps values, decreasing"}},
        {"box_x", {PType::Real, 32.0, "rescaled box width"}},
        {"box_y", {PType::Real, 200.0, "rescaled box height"}}},
       cmd_ergodic},
      {"assemble",
       "approximate basin solution and its residual",
       {{"scenario", {PType::Str, "double-gyre", "double-gyre | sin-x | zero"}},
        {"eps", {PType::Real, 0.05, "layer width"}},
        {"order", {PType::Int, 1, "0 or 1"}},
        {"amp", {PType::Real, 1.0, "forcing amplitude"}},
        {"margin", {PType::Real, 0.1, "forcing margin in y"}},
        {"t", {PType::Real, 0.0, "time"}},
        {"points_per_layer", {PType::Int, 16, "residual grid points per layer width"}},
        {"nx", {PType::Int, 0, "residual grid points across the basin, 0 = from points_per_layer"}},
        {"ny", {PType::Int, 128, "residual grid points in y"}},
        {"sample_nx", {PType::Int, 101, "field dump x points"}},
        {"sample_ny", {PType::Int, 101, "field dump y points"}},
        {"layer_tol", {PType::Real, 1e-2, "largest western layer value at the eastern coast"}}},
       cmd_assemble},
      {"verify-all",
       "acceptance criteria 1..12",
       {{"only", {PType::Strs, json::array(), "modules, comma separated"}}},
       cmd_verify_all},
  };
}

// defaults < config < flags
json resolve(Command& cmd, const json* cfg) {
  json p = json::object();
  for (const auto& [k, v] : cmd.params) p[k] = v.value;
  if (cfg && cfg->contains("params")) {
    const auto& cp = cfg->at("params");
    if (!cp.is_object()) usage("config: params must be an object");
    for (auto it = cp.begin(); it != cp.end(); ++it) {
      auto q = cmd.params.find(it.key());
      if (q == cmd.params.end()) usage("config: unknown parameter '" + it.key() + "' for " + cmd.name);
      check_type(it.key(), q->second.type, it.value());
      p[it.key()] = it.value();
    }
  }
  for (const auto& [k, o] : cmd.opts)
    if (o->count() > 0)
      p[k] = cmd.params.at(k).type == PType::Bool ? json(cmd.flags.at(k))
                                                  : from_text(k, cmd.params.at(k).type, cmd.raw.at(k));
  return p;
}

json load_config(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) usage("cannot read config " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    usage(std::string("config: ") + e.what());
  }
  if (!cfg.is_object()) usage("config must be a JSON object");
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    const auto& k = it.key();
    if (k != "command" && k != "params" && k != "seed" && k != "output_dir" && k != "jobs")
      usage("config: unknown key '" + k + "'");
  }
  if (cfg.contains("command") && cfg["command"] != command)
    usage("config is for '" + cfg["command"].dump() + "', not " + command);
  if (cfg.contains("seed") && !cfg["seed"].is_number_unsigned()) usage("config: seed must be a u64");
  if (cfg.contains("output_dir") && !cfg["output_dir"].is_string()) usage("config: output_dir must be a string");
  if (cfg.contains("jobs") && !(cfg["jobs"].is_number_unsigned() && cfg["jobs"].get<int>() >= 1))
    usage("config: jobs must be a positive integer");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boundary-layer toolkit"};
  app.require_subcommand(1);
  std::string config, out;
  std::uint64_t seed = 0;
  int jobs = 0;
  auto* o_seed = app.add_option("--seed", seed, "random seed (BLT_SEED overrides the config, this flag overrides both)");
  app.add_option("--config", config, "JSON config: {command, seed, output_dir, jobs, params}");
  app.add_option("--out", out, "output directory (default out)");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.fallthrough();

  auto cmds = commands();
  for (auto& c : cmds) {
    c.app = app.add_subcommand(c.name, c.help);
    for (auto& [k, prm] : c.params) {
      if (prm.type == PType::Bool) {
        c.flags[k] = false;
        c.opts[k] = c.app->add_flag("--" + k, c.flags[k], prm.help);
      } else {
        c.raw[k];
        c.opts[k] = c.app->add_option("--" + k, c.raw[k], prm.help + " [" + prm.value.dump() + "]");
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return kExitOk;
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    Command* cmd = nullptr;
    for (auto& c : cmds)
      if (c.app->parsed()) cmd = &c;
    json cfg;
    if (!config.empty()) cfg = load_config(config, cmd->name);
    const json p = resolve(*cmd, config.empty() ? nullptr : &cfg);

    Ctx ctx;
    if (cfg.contains("seed")) ctx.seed = cfg["seed"].get<std::uint64_t>();
    if (const char* s = std::getenv("BLT_SEED")) {
      char* end = nullptr;
      ctx.seed = std::strtoull(s, &end, 10);
      if (*s == '\0' || *end != '\0') usage("BLT_SEED is not an unsigned integer");
    }
    if (o_seed->count() > 0) ctx.seed = seed;
    if (cfg.contains("jobs")) ctx.jobs = cfg["jobs"].get<int>();
    if (jobs > 0) ctx.jobs = jobs;
    if (cfg.contains("output_dir")) ctx.out = cfg["output_dir"].get<std::string>();
    if (!out.empty()) ctx.out = out;
    if (cmd->name == "verify-all") verify::criteria_for(p.at("only").get<std::vector<std::string>>());
    fs::create_directories(ctx.out);
    write_json(ctx.out / (cmd->name + "_config.json"),
               {{"command", cmd->name}, {"seed", ctx.seed}, {"params", p}});
    return cmd->run(p, ctx);
  } catch (const Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    if (e.exit_code() == kExitUsage || e.kind() == "Usage") {
      std::fprintf(stderr, "run with --help for usage\n");
      return kExitUsage;
    }
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSuite;
  }
}
