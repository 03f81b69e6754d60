#include "verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "blt/assembler.hpp"
#include "blt/asympt.hpp"
#include "blt/channel.hpp"
#include "blt/charpoly.hpp"
#include "blt/ergodic.hpp"
#include "blt/halfspace.hpp"
#include "blt/steklov.hpp"
#include "oracles.hpp"

namespace blt::verify {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

Line le(std::string label, double v, double tol) { return {std::move(label), v, "<= " + sci(tol), v <= tol}; }
Line ge(std::string label, double v, double tol) { return {std::move(label), v, ">= " + sci(tol), v >= tol}; }
Line gt(std::string label, double v, double tol) { return {std::move(label), v, "> " + sci(tol), v > tol}; }
Line within(std::string label, double v, double lo, double hi) {
  return {std::move(label), v, "in [" + sci(lo) + ", " + sci(hi) + "]", v >= lo && v <= hi};
}
Line flag(std::string label, bool ok, std::string what = "true") {
  return {std::move(label), ok ? 1.0 : 0.0, "== " + what, ok};
}
Line info(std::string label, double v) { return {std::move(label), v, "", true, true}; }
Line runtime(double sec, double limit) {
  Line l = le("runtime [s]", sec, limit);
  l.timing = true;
  return l;
}

const char* side_name(Side s) { return s == Side::West ? "west" : "east"; }

// Smooth random trace confined to |k| <= kmax, coefficients damped by 1/(1+k^2).
BoundaryTrace smooth_trace(const SpectralGrid& g, int kmax, std::uint64_t seed, double amp = 1.0) {
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

Jumps smooth_jumps(int N, std::uint64_t seed, int kmax) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Jumps g = zero_jumps(N);
  for (int q = 0; q < 4; ++q)
    for (int k = 1; k <= kmax; ++k) {
      const double a = nd(rng) / k, p = 2 * kPi * nd(rng);
      for (int j = 0; j < N; ++j) g[q][j] += a * std::cos(2 * kPi * k * j / N + p);
    }
  return g;
}

// ---------------------------------------------------------------- criteria

void c1_roots(Criterion& c, const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  for (Side s : {Side::West, Side::East}) {
    const auto r = certify_simple_offaxis(s, SweepSpec{}, CertThresholds{});
    std::map<std::string, int> count;
    for (const auto& f : r.failures) ++count[f.reason];
    int other = 0;
    for (const auto& [k, v] : count)
      if (k != "residual" && k != "gap" && k != "abs_re") other += v;
    const std::string p = std::string(side_name(s)) + " ";
    c.lines.push_back(le(p + "max scaled residual", r.max_residual, 1e-10));
    c.lines.push_back(gt(p + "min pairwise gap", r.min_gap, 1e-6));
    c.lines.push_back(gt(p + "min |Re root|", r.min_abs_re, 1e-8));
    c.lines.push_back(info(p + "points below the |Re| threshold", count["abs_re"]));
    c.lines.push_back(le(p + "points without a 2/2 split", other, 0));
    c.lines.push_back(info(p + "points swept", static_cast<double>(r.n_points)));
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.lines.push_back(runtime(sec, 30.0));
}

void c2_fixed_points(Criterion& c, const Options&) {
  const auto w = solve_quartic(western_coeffs(0.0, 0.0));
  const double s3 = std::sqrt(3.0);
  const cplx want[4] = {0.0, -1.0, cplx(0.5, s3 / 2), cplx(0.5, -s3 / 2)};
  double err = 0;
  for (cplx z : want) {
    double best = 1e300;
    for (cplx r : w.all) best = std::min(best, std::abs(r - z));
    err = std::max(err, best);
  }
  c.lines.push_back(le("west roots at (0,0) vs {0,-1,(1+-i sqrt3)/2}", err, 1e-12));

  const auto e = solve_quartic(eastern_coeffs(0.0, 0.0));
  const double pos_err = e.pos.size() == 1 ? std::abs(e.pos[0] - 1.0) : 1e300;
  c.lines.push_back(le("east positive root at (0,0) vs 1", pos_err, 1e-12));

  const double ref[4] = {1.0 / 3, 1.0 / 3, 1.0, 1.0 / 3};
  const char* names[4] = {"B1+", "B2+", "B1-", "B2-"};
  double spread[4] = {0, 0, 0, 0};
  std::array<cplx, 4> first{};
  for (double a : {0.0, 1.0, 2.0}) {
    const auto g = green_coefficients(Side::West, a, 1e-3);
    const cplx v[4] = {g.Bp[0], g.Bp[1], g.Bm[0], g.Bm[1]};
    for (int q = 0; q < 4; ++q) {
      char lab[64];
      std::snprintf(lab, sizeof lab, "%s(xi=1e-3, alpha=%g) vs reference %.4f", names[q], a, ref[q]);
      c.lines.push_back(le(lab, std::abs(v[q] - ref[q]), 5e-3));
      if (a == 0.0) first[q] = v[q];
      spread[q] = std::max(spread[q], std::abs(v[q] - first[q]));
    }
  }
  for (int q = 0; q < 4; ++q)
    c.lines.push_back(le(std::string(names[q]) + " spread over alpha in {0,1,2}", spread[q], 5e-3));
  const auto g0 = green_coefficients(Side::West, 0.0, 1e-3);
  c.lines.push_back(info("computed B1+ (alpha=0)", g0.Bp[0].real()));
  c.lines.push_back(info("computed B2+ (alpha=0)", g0.Bp[1].real()));
  c.lines.push_back(info("computed B1- (alpha=0)", g0.Bm[0].real()));
  c.lines.push_back(info("computed B2- (alpha=0)", g0.Bm[1].real()));
}

void c3_orders(Criterion& c, const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto reg = expansion_registry();
  for (double a : {0.7, 0.0}) {
    for (const auto& e : reg) {
      char lab[128];
      try {
        const auto f = fit_order(e, a);
        std::snprintf(lab, sizeof lab, "%s alpha=%g slope %.3f claimed %.3f r2 %.4f", e.name.c_str(), a,
                      f.slope, e.order(a), f.r2);
        c.lines.push_back(le(lab, std::abs(f.slope - e.order(a)), 0.35));
        if (f.r2 < 0.9) c.lines.push_back(ge(e.name + " r2", f.r2, 0.9));
      } catch (const Error& ex) {
        std::snprintf(lab, sizeof lab, "%s alpha=%g fit", e.name.c_str(), a);
        c.lines.push_back(flag(lab, false, std::string("fit ok (") + ex.what() + ")"));
      }
    }
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.lines.push_back(runtime(sec, 60.0));
}

void c4_green_jump(Criterion& c, const Options& o) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> ua(-2.0, 2.0), ul(std::log(0.01), std::log(50.0)), us(0, 1);
  double third = 0, lower = 0;
  for (int n = 0; n < 50; ++n) {
    const double a = ua(rng);
    const double xi = (us(rng) < 0.5 ? -1 : 1) * std::exp(ul(rng));
    for (Side s : {Side::West, Side::East}) {
      const auto r = jump_check(a, xi, s);
      third = std::max(third, r.third_rel_err);
      lower = std::max(lower, r.lower_max);
    }
  }
  c.lines.push_back(le("max rel. error of [d3 G] vs -1/(1+a^2)^2 (50 samples, both sides)", third, 1e-8));
  c.lines.push_back(le("max lower jump [d^k G], k<3", lower, 1e-10));
}

void c5_steklov(Criterion& c, const Options& o) {
  const double xi0 = 1e-4;
  for (double a : {0.0, 1.0, 2.0}) {
    char lab[96];
    const auto W = symbol(Side::West, a, xi0);
    const auto E = symbol(Side::East, a, xi0);
    std::snprintf(lab, sizeof lab, "west m30(xi=1e-4, alpha=%g) + 1/2", a);
    c.lines.push_back(le(lab, std::abs(W(1, 0) + 0.5), 1e-3));
    std::snprintf(lab, sizeof lab, "east n30(xi=1e-4, alpha=%g) - 1/2", a);
    c.lines.push_back(le(lab, std::abs(E(1, 0) - 0.5), 1e-3));
    std::snprintf(lab, sizeof lab, "east n31(xi=1e-4, alpha=%g) + (1+a^2)^{2/3}", a);
    c.lines.push_back(le(lab, std::abs(E(1, 1) + bpow(a, 2.0 / 3.0)), 1e-3));
  }
  const auto g = make_grid(64, 128, 10, 10);
  for (Side s : {Side::West, Side::East})
    for (double a : {0.0, 1.0, -1.0}) {
      const auto r = negativity_check(s, a, 1000, g, o.seed);
      char lab[128];
      std::snprintf(lab, sizeof lab, "%s sign: traces with pairing > 1e-10 scale (alpha=%g)", side_name(s), a);
      c.lines.push_back(le(lab, r.violations, 0));
      std::snprintf(lab, sizeof lab, "%s max pairing/scale (alpha=%g)", side_name(s), a);
      c.lines.push_back(info(lab, r.max_normalized));
    }
}

void c6_halfspace(Criterion& c, const Options& o) {
  const auto g = make_grid(64.0, 256, 14.0, 200, 1.01);
  auto bump = [](double x) { return cplx(std::exp(-(x - 5) * (x - 5)), 0.5 * std::exp(-0.8 * (x - 6) * (x - 6))); };
  std::vector<cplx> f(g.nx());
  for (int i = 0; i < g.nx(); ++i) f[i] = bump(g.xgrid[i]);
  const auto cb = oracle::cheb(90, 0.0, 14.0);
  double worst = 0;
  for (Side s : {Side::West, Side::East})
    for (double a : {0.0, 0.7})
      for (double xi : {0.3, 1.5, -2.0}) {
        const auto mine = green_convolve(s, a, xi, g.xgrid, f, 0)[0];
        const auto ref = oracle::line_solve(s, a, xi, cb, bump);
        double err = 0, sc = 0;
        for (int i = 0; i < g.nx(); ++i) {
          const cplx r = oracle::cheb_interp(cb, ref, g.xgrid[i]);
          err = std::max(err, std::abs(mine[i] - r));
          sc = std::max(sc, std::abs(r));
        }
        worst = std::max(worst, err / sc);
      }
  c.lines.push_back(le("single-mode solve vs collocation ODE oracle (N=256, nx=200), rel.", worst, 1e-6));

  const auto gt = make_grid(64.0, 128, 30.0, 200, 1.02);
  double rep = 0;
  for (Side s : {Side::West, Side::East}) {
    const auto t = smooth_trace(gt, 20, o.seed);
    const auto fld = solve_homogeneous(s, 0.6, t, gt);
    for (int j = 0; j < gt.N; ++j) {
      rep = std::max(rep, std::abs(fld(0, j) - t.psi0[j]) / t.sup());
      rep = std::max(rep, std::abs(fld.xderiv[0][j] - t.psi1[j]) / t.sup());
    }
  }
  c.lines.push_back(le("trace reproduction, rel.", rep, 1e-10));

  std::vector<double> res;
  for (int nx : {100, 200, 400}) {
    const auto gg = make_grid(64.0, 64, 20.0, nx, 1.0);
    BoundaryTrace t = BoundaryTrace::zeros(gg.N);
    for (int j = 0; j < gg.N; ++j) {
      t.psi0[j] = std::cos(2 * kPi * 3 * gg.y(j) / gg.L);
      t.psi1[j] = 0.5 * std::sin(2 * kPi * 2 * gg.y(j) / gg.L + 0.3);
    }
    const auto ff = solve_homogeneous(Side::West, 0.7, t, gg);
    res.push_back(pde_residual(Side::West, 0.7, ff, nullptr, gg, 4, false));
  }
  c.lines.push_back(ge("PDE residual order, nx 100 -> 200", std::log2(res[0] / res[1]), 2.0));
  c.lines.push_back(ge("PDE residual order, nx 200 -> 400", std::log2(res[1] / res[2]), 2.0));
}

void c7_picard(Criterion& c, const Options& o) {
  const auto g = make_grid(32.0, 32, 20.0, 160, 1.02);
  PicardOptions opt;
  opt.tol = 1e-10;
  const auto base = smooth_trace(g, 6, o.seed);
  const std::vector<double> amps{1e-3, 2e-3, 4e-3};
  std::vector<double> dist;
  for (double a : amps) {
    BoundaryTrace t = base;
    for (auto& v : t.psi0) v *= a;
    for (auto& v : t.psi1) v *= a;
    auto [psi, tr] = picard_solve(Side::West, 0.0, t, g, opt);
    if (a == amps.front()) {
      double rmax = 0;
      for (double r : tr.ratios) rmax = std::max(rmax, r);
      c.lines.push_back(le("max Picard ratio at amplitude 1e-3", rmax, 0.2));
      c.lines.push_back(le("iterations at amplitude 1e-3", tr.iterations, 8));
      c.lines.push_back(le("fixed-point residual at amplitude 1e-3", tr.residual, 1e-8));
      c.lines.push_back(flag("converged", tr.converged));
    }
    const auto lin = solve_homogeneous(Side::West, 0.0, t, g);
    double d = 0;
    for (std::size_t q = 0; q < psi.v.size(); ++q) d = std::max(d, std::abs(psi.v[q] - lin.v[q]));
    dist.push_back(d);
  }
  const auto fit = loglog_fit(amps, dist);
  c.lines.push_back(within("slope of |nonlinear - linear| vs amplitude", fit.slope, 1.8, 2.2));
}

void c8_glue(Criterion& c, const Options& o) {
  SpectralGrid grid;
  grid.L = 16;
  grid.N = 32;
  ChannelLayout lay;
  double mis = 0, rho = 0, zero = 0;
  for (Side s : {Side::West, Side::East})
    for (double a : {0.0, 0.7}) {
      const auto g = smooth_jumps(32, o.seed, 5);
      const auto f = solve_channel_flat(s, a, lay, g, SteklovRows{}, grid);
      const auto r = glue_check(s, a, f, grid, 1e-6);
      for (double m : r.mismatch) mis = std::max(mis, m);
      rho = std::max(rho, r.rho_mismatch);
      const auto z = solve_channel_flat(s, a, lay, zero_jumps(32), SteklovRows{}, grid);
      zero = std::max(zero, z.sup());
    }
  c.lines.push_back(le("trace/derivative mismatch at X = M, rel.", mis, 1e-6));
  c.lines.push_back(le("boundary-row mismatch at X = M, rel.", rho, 1e-6));
  c.lines.push_back(le("zero data: solution sup norm", zero, 1e-12));
}

void c9_ergodic(Criterion& c, const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = make_grid(32768.0, 131072, 10.0, 10);
  const EpsDomain box{0.0, 32.0, 800.0, 64};
  const auto e = ergodic_ensemble(StationaryProcess::moving_average(0, 1, 2.0, o.seed),
                                  StationaryProcess::constant(0.0), 0.0, g, {1, 4, 16, 64, 256},
                                  {0.1, 0.05, 0.025}, 20, o.jobs, box);
  c.lines.push_back(ge("seeds with monotone sup|Psi_erg - phibar| over X (of 20)", e.monotone_count, 18));
  c.lines.push_back(within("J-envelope exponent", e.j_exponent, 0.15, 0.35));
  c.lines.push_back(flag("(1+X)^{1/4} Psi_alg bounded", e.alg_bounded));
  c.lines.push_back(ge("seeds with decreasing eps-rescaled L2 (of 20)", e.trend_count, 18));
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.lines.push_back(runtime(sec, 300.0));
}

void c10_assembly(Criterion& c, const Options&) {
  const auto geom = DomainGeometry::box(0.0, 1.0, 0.0, 1.0, 0.1);
  const auto gyre = WindForcing::double_gyre(1.0, 0.0, 1.0, 0.0, 1.0, 0.1);
  const auto t = residual_trend(geom, gyre, {0.1, 0.05, 0.025});
  for (const auto& r : t.runs) {
    char lab[64];
    std::snprintf(lab, sizeof lab, "H^-2 proxy of r, eps=%g", r.eps);
    c.lines.push_back(info(lab, r.hm2));
  }
  c.lines.push_back(flag("H^-2 proxy of r decreasing in eps", t.raw_hm2_decreasing));
  for (const auto& r : t.runs) {
    char lab[64];
    std::snprintf(lab, sizeof lab, "H^-2 proxy of eps^3 r, eps=%g", r.eps);
    c.lines.push_back(info(lab, r.hm2_s));
  }
  c.lines.push_back(info("eps^3 r: L2, H^-1, H^-2 proxies all decreasing", t.all_decreasing ? 1.0 : 0.0));
  c.lines.push_back(within("slope of ||Lap Psi^0_w||_{H^-2} vs eps", t.lap_fit.slope, 0.35, 0.65));
  const auto h = hardy_damping_bound({0.1, 0.05, 0.025});
  double gap = 0;
  for (double s : h.grid_sup) gap = std::max(gap, std::abs(s - std::exp(-1.0)));
  c.lines.push_back(le("Hardy damping sup vs 1/e", gap, 1e-6));
}

void c11_munk(Criterion& c, const Options&) {
  double err = 0;
  for (double a : {0.0, 0.8, -1.3}) {
    const double p0 = 0.7, p1 = -0.3;
    const auto m = munk_reference(a, p0, p1);
    const auto grid = make_grid(32.0, 16, 12.0, 60);
    BoundaryTrace tr{std::vector<double>(16, p0), std::vector<double>(16, p1)};
    const auto F = solve_homogeneous(Side::West, a, tr, grid);
    for (int i = 0; i < F.nx(); ++i)
      for (int k = 0; k <= 3; ++k) {
        const double v = F.layer(k)[static_cast<std::size_t>(i) * 16 + 3].real();
        err = std::max(err, std::abs(v - m.eval(F.x[i], k)));
      }
  }
  c.lines.push_back(le("xi=0 column of the western solver vs Munk profile (derivs 0..3)", err, 1e-10));
  bool refused = false;
  try {
    munk_reference(0.0, 1.0, 0.0, Side::East);
  } catch (const Error& e) {
    refused = e.kind() == "ConstraintViolation";
  }
  c.lines.push_back(flag("east refuses psi0 = 1, psi1 = 0 with one decaying mode", refused));
}

void c12_substitute(Criterion& c, const Options& o) {
  const auto n = norm_equivalence_check({32, 64, 128, 256}, 20, o.seed);
  c.lines.push_back(within("||Lap f|| vs ||D^2 f|| deviation order (compact bumps)", n.fit.slope, 1.65, 2.35));
  c.lines.push_back(le("deviation at n=256", n.max_dev.back(), 1e-3));
  const auto b = norm_equivalence_check({32, 64, 128, 256}, 20, o.seed, true);
  c.lines.push_back(ge("boundary-touching bumps: deviation persists at n=256", b.max_dev.back(), 1e-2));
  struct Case {
    double a;
    cplx p0, p1;
    int k;
  };
  for (const Case& q : {Case{0.0, 1.0, 0.0, 2}, Case{0.0, 0.0, 1.0, 1}, Case{0.8, 1.0, 0.5, 1},
                        Case{-1.3, 0.3, 1.0, 2}}) {
    const auto r = regularity_cancellation_check(q.a, q.p0, q.p1, q.k);
    char lab[128];
    std::snprintf(lab, sizeof lab, "regularity cancellation k=%d alpha=%g: max ratio", q.k, q.a);
    c.lines.push_back({lab, r.max_ratio, "bounded, ok", r.ok});
  }
}

struct Entry {
  const char* title;
  const char* module;
  void (*run)(Criterion&, const Options&);
};

const Entry kTable[kCriteria] = {
    {"root certification", "charpoly", c1_roots},
    {"closed-form fixed points", "charpoly", c2_fixed_points},
    {"asymptotic order fits", "asympt", c3_orders},
    {"Green jump", "halfspace", c4_green_jump},
    {"Steklov fixed values and sign", "steklov", c5_steklov},
    {"half-space oracle equivalence", "halfspace", c6_halfspace},
    {"nonlinear contraction", "halfspace", c7_picard},
    {"channel/half-space glue", "channel", c8_glue},
    {"ergodic convergence", "ergodic", c9_ergodic},
    {"assembly residual", "assembler", c10_assembly},
    {"Munk consistency", "assembler", c11_munk},
    {"substituted: norm equivalence and regularity cancellation", "assembler", c12_substitute},
};

}  // namespace

bool Criterion::pass() const {
  if (!error.empty()) return false;
  for (const auto& l : lines)
    if (!l.info && !l.pass) return false;
  return true;
}

nlohmann::json Criterion::to_json() const {
  nlohmann::json ls = nlohmann::json::array();
  for (const auto& l : lines) {
    nlohmann::json j{{"label", l.label}};
    if (!l.timing) j["value"] = l.value;
    if (l.info)
      j["info"] = true;
    else {
      j["bound"] = l.bound;
      j["pass"] = l.pass;
    }
    ls.push_back(j);
  }
  nlohmann::json j{{"id", id}, {"title", title}, {"module", module}, {"pass", pass()}, {"lines", ls}};
  if (!error.empty()) j["error"] = error;
  return j;
}

std::string criterion_module(int id) {
  if (id < 1 || id > kCriteria) fail("Usage", "criterion id outside 1.." + std::to_string(kCriteria));
  return kTable[id - 1].module;
}

std::vector<int> criteria_for(const std::vector<std::string>& modules) {
  static const std::vector<std::string> known{"charpoly", "asympt", "halfspace", "steklov",
                                              "channel",  "ergodic", "assembler"};
  std::vector<int> ids;
  for (const auto& m : modules)
    if (std::find(known.begin(), known.end(), m) == known.end()) fail("Usage", "unknown module '" + m + "'");
  for (int id = 1; id <= kCriteria; ++id)
    if (modules.empty() || std::find(modules.begin(), modules.end(), kTable[id - 1].module) != modules.end())
      ids.push_back(id);
  return ids;
}

Criterion run_criterion(int id, const Options& opt) {
  Criterion c;
  c.id = id;
  c.title = kTable[id - 1].title;
  c.module = criterion_module(id);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    kTable[id - 1].run(c, opt);
  } catch (const std::exception& e) {
    c.error = e.what();
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

std::string format(const Criterion& c) {
  std::ostringstream os;
  char head[160];
  std::snprintf(head, sizeof head, "criterion %2d: %s  %s (%.1f s)\n", c.id, c.pass() ? "PASS" : "FAIL",
                c.title.c_str(), c.seconds);
  os << head;
  for (const auto& l : c.lines) {
    char buf[256];
    if (l.info)
      std::snprintf(buf, sizeof buf, "    info  %-70s %.6g\n", l.label.c_str(), l.value);
    else
      std::snprintf(buf, sizeof buf, "    %s  %-70s %.6g %s\n", l.pass ? "pass" : "FAIL", l.label.c_str(), l.value,
                    l.bound.c_str());
    os << buf;
  }
  if (!c.error.empty()) os << "    error: " << c.error << '\n';
  return os.str();
}

}  // namespace blt::verify
