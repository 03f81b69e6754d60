#include <cstdio>
#include <random>

#include "blt/halfspace.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace blt;

namespace {

SpectralGrid grid(int N = 64, double L = 64.0, double xmax = 30.0, int nx = 200, double ratio = 1.02) {
  return make_grid(L, N, xmax, nx, ratio);
}

BoundaryTrace trace_cos(const SpectralGrid& g, int m0, double a0, int m1, double a1) {
  BoundaryTrace t = BoundaryTrace::zeros(g.N);
  for (int j = 0; j < g.N; ++j) {
    t.psi0[j] = a0 * std::cos(2 * kPi * m0 * g.y(j) / g.L);
    t.psi1[j] = a1 * std::sin(2 * kPi * m1 * g.y(j) / g.L + 0.3);
  }
  return t;
}

// Smooth random trace confined to |k| <= kmax.
BoundaryTrace random_trace(const SpectralGrid& g, int kmax, std::uint64_t seed, double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  BoundaryTrace t = BoundaryTrace::zeros(g.N);
  for (int k = 0; k <= kmax; ++k) {
    double a = n(rng) / (1 + k * k), b = n(rng) / (1 + k * k), c = n(rng) / (1 + k * k), d = n(rng) / (1 + k * k);
    for (int j = 0; j < g.N; ++j) {
      double th = 2 * kPi * k * g.y(j) / g.L;
      t.psi0[j] += amp * (a * std::cos(th) + b * std::sin(th));
      t.psi1[j] += amp * (c * std::cos(th) + d * std::sin(th));
    }
  }
  return t;
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b, std::size_t n) {
  double m = 0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("constant data excites the zero mode only") {
  for (double alpha : {0.0, 0.8}) {
    auto g = grid();
    BoundaryTrace t = BoundaryTrace::zeros(g.N);
    std::fill(t.psi0.begin(), t.psi0.end(), 2.5);
    auto f = solve_homogeneous(Side::West, alpha, t, g);
    for (int j = 0; j < g.N; ++j) CHECK(std::abs(f(0, j) - 2.5) < 1e-12);
    for (int i = 0; i < f.nx(); ++i)
      for (int j = 1; j < g.N; ++j) CHECK(std::abs(f(i, j) - f(i, 0)) < 1e-12);
    const double rate = 1.0 / (2.0 * bpow(alpha, 2.0 / 3.0));
    CHECK(fit_decay_rate(f, 2.0, 25.0) == doctest::Approx(rate).epsilon(0.05));
  }
}

TEST_CASE("trace reproduction and linearity") {
  auto g = grid(128);
  for (Side s : {Side::West, Side::East}) {
    auto t = random_trace(g, 20, 42);
    auto f = solve_homogeneous(s, 0.6, t, g);
    double e0 = 0, e1 = 0;
    for (int j = 0; j < g.N; ++j) {
      e0 = std::max(e0, std::abs(f(0, j) - t.psi0[j]));
      e1 = std::max(e1, std::abs(f.xderiv[0][j] - t.psi1[j]));
    }
    CHECK(e0 <= 1e-10 * t.sup());
    CHECK(e1 <= 1e-10 * t.sup());
    CHECK(f.max_imag() < 1e-12 * f.sup());

    auto u = random_trace(g, 20, 43);
    BoundaryTrace w = BoundaryTrace::zeros(g.N);
    for (int j = 0; j < g.N; ++j) {
      w.psi0[j] = 2 * t.psi0[j] - 3 * u.psi0[j];
      w.psi1[j] = 2 * t.psi1[j] - 3 * u.psi1[j];
    }
    auto fu = solve_homogeneous(s, 0.6, u, g);
    auto fw = solve_homogeneous(s, 0.6, w, g);
    double d = 0;
    for (std::size_t q = 0; q < fw.v.size(); ++q) d = std::max(d, std::abs(fw.v[q] - 2.0 * f.v[q] + 3.0 * fu.v[q]));
    CHECK(d <= 1e-12 * std::max(1.0, fw.sup()));
  }
}

TEST_CASE("PDE residual of a homogeneous solve") {
  auto g = grid(64, 64.0, 20.0, 200);
  auto t = trace_cos(g, 1, 1.0, 0, 0.0);
  auto f = solve_homogeneous(Side::West, 0.0, t, g);
  CHECK(pde_residual(Side::West, 0.0, f, nullptr, g) <= 1e-6);

  // Pure finite differences on the values converge at order >= 2.
  std::vector<double> res;
  for (int nx : {100, 200, 400}) {
    auto gg = grid(64, 64.0, 20.0, nx, 1.0);
    auto ff = solve_homogeneous(Side::West, 0.7, trace_cos(gg, 3, 1.0, 2, 0.5), gg);
    res.push_back(pde_residual(Side::West, 0.7, ff, nullptr, gg, 4, false));
  }
  CHECK(std::log2(res[0] / res[1]) >= 2.0);
  CHECK(std::log2(res[1] / res[2]) >= 2.0);
}

TEST_CASE("eastern constant data keeps its far-field value") {
  auto g = grid();
  BoundaryTrace t = BoundaryTrace::zeros(g.N);
  std::fill(t.psi0.begin(), t.psi0.end(), 1.0);
  auto f = solve_homogeneous(Side::East, 0.0, t, g);
  CHECK(std::abs(f(f.nx() - 1, 5) - 1.0) < 1e-12);
}

TEST_CASE("Green kernel jumps") {
  auto jc = jump_check(0.7, 3.0);
  CHECK(std::abs(jc.jumps[0]) <= 1e-10);
  CHECK(jc.third_rel_err <= 1e-8);
  CHECK(std::abs(green_kernel(0.7, 3.0, 1e-12) - green_kernel(0.7, 3.0, -1e-12)) <= 1e-10);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ua(-2, 2), ux(-2, 1.5);
  for (int t = 0; t < 50; ++t) {
    const double xi = std::pow(10.0, ux(rng)) * (t % 2 ? 1 : -1);
    for (Side s : {Side::West, Side::East}) {
      auto r = jump_check(ua(rng), xi, s);
      CHECK(r.third_rel_err <= 1e-8);
      CHECK(r.lower_max <= 1e-10);
    }
  }
  // large |xi|: the roots are large but still well separated
  for (double xi : {-35.0, 50.0}) {
    auto r = jump_check(1.0, xi, Side::West);
    CHECK(r.third_rel_err <= 1e-8);
    CHECK(r.lower_max <= 1e-10);
  }
}

TEST_CASE("Green coefficients at low frequency solve the continuity system") {
  for (double alpha : {0.0, 1.0, 2.0}) {
    auto g = green_coefficients(Side::West, alpha, 1e-3);
    CHECK(std::abs(g.Bp[0] + 1.0 / 3) < 5e-3);
    CHECK(std::abs(g.Bp[1] + 1.0 / 3) < 5e-3);
    CHECK(std::abs(g.Bm[0] + 1.0) < 5e-3);
    CHECK(std::abs(g.Bm[1] - 1.0 / 3) < 5e-3);
    // the reference limits (1/3, 1/3, 1, 1/3) violate continuity: 2/3 != 4/3
    CHECK(std::abs((g.Bp[0] + g.Bp[1]) - (g.Bm[0] + g.Bm[1])) < 1e-10);
  }
}

TEST_CASE("single-mode inhomogeneous solve matches the collocation oracle") {
  auto g = grid(256, 64.0, 14.0, 200, 1.01);
  auto bump = [](double x) { return cplx(std::exp(-(x - 5) * (x - 5)), 0.5 * std::exp(-0.8 * (x - 6) * (x - 6))); };
  std::vector<cplx> f(g.nx());
  for (int i = 0; i < g.nx(); ++i) f[i] = bump(g.xgrid[i]);
  auto c = oracle::cheb(90, 0.0, 14.0);
  for (Side s : {Side::West, Side::East}) {
    for (double alpha : {0.0, 0.7}) {
      for (double xi : {0.3, 1.5, -2.0}) {
        auto mine = green_convolve(s, alpha, xi, g.xgrid, f, 0)[0];
        auto ref = oracle::line_solve(s, alpha, xi, c, bump);
        double err = 0, sc = 0;
        for (int i = 0; i < g.nx(); ++i) {
          cplx r = oracle::cheb_interp(c, ref, g.xgrid[i]);
          err = std::max(err, std::abs(mine[i] - r));
          sc = std::max(sc, std::abs(r));
        }
        CHECK(err / sc <= 1e-6);
        CHECK(column_residual(s, alpha, xi, g.xgrid, mine, f) <= 1e-3);
      }
    }
  }
}

TEST_CASE("inhomogeneous field solve") {
  auto g = grid(64, 64.0, 30.0, 200);
  FieldSlice F(g.xgrid, g.N, g.L);
  F.decay_rate = 1.0;
  for (int i = 0; i < g.nx(); ++i)
    for (int j = 0; j < g.N; ++j)
      F(i, j) = std::exp(-1.2 * g.xgrid[i]) * g.xgrid[i] * std::cos(2 * kPi * 2 * g.y(j) / g.L);
  auto P = solve_inhomogeneous(Side::West, 0.5, F, g);
  CHECK(pde_residual(Side::West, 0.5, P, &F, g) <= 1e-5);
  const double dm = delta_min(Side::West, 0.5, g);
  CHECK(fit_decay_rate(P, 10.0, 28.0) >= std::min(1.0, dm) - 0.05);
  CHECK(quadrature_check(Side::West, 0.5, F, g) <= 1e-4);

  FieldSlice Z(g.xgrid, g.N, g.L);
  auto P0 = solve_inhomogeneous(Side::West, 0.5, Z, g);
  CHECK(P0.sup() == 0.0);

  FieldSlice bad = F;
  bad.decay_rate = 0.0;
  CHECK_THROWS_AS(solve_inhomogeneous(Side::West, 0.5, bad, g), Error);
  FieldSlice grow = F;
  for (int i = 0; i < g.nx(); ++i)
    for (int j = 0; j < g.N; ++j) grow(i, j) = std::exp(-0.1 * g.xgrid[i]);
  grow.decay_rate = 1.0;
  CHECK_THROWS_AS(solve_inhomogeneous(Side::West, 0.5, grow, g), Error);

  // too coarse to resolve a sharp source
  auto gc = grid(16, 64.0, 30.0, 12, 1.2);
  FieldSlice S(gc.xgrid, gc.N, gc.L);
  S.decay_rate = 1.0;
  for (int i = 0; i < gc.nx(); ++i)
    for (int j = 0; j < gc.N; ++j) S(i, j) = std::exp(-20 * sqr(gc.xgrid[i] - 2.0));
  CHECK_THROWS_AS(quadrature_check(Side::West, 0.5, S, gc), Error);
}

TEST_CASE("superposition of the Green part and the homogeneous lift") {
  auto g = grid(64, 64.0, 30.0, 200);
  FieldSlice F(g.xgrid, g.N, g.L);
  F.decay_rate = 1.0;
  for (int i = 0; i < g.nx(); ++i)
    for (int j = 0; j < g.N; ++j)
      F(i, j) = std::exp(-1.5 * g.xgrid[i]) * std::sin(2 * kPi * 3 * g.y(j) / g.L);
  auto t = trace_cos(g, 2, 0.7, 1, 0.2);
  auto PF = solve_inhomogeneous(Side::West, 0.3, F, g);
  BoundaryTrace rest = BoundaryTrace::zeros(g.N);
  for (int j = 0; j < g.N; ++j) {
    rest.psi0[j] = t.psi0[j] - PF(0, j).real();
    rest.psi1[j] = t.psi1[j] - PF.xderiv[0][j].real();
  }
  auto H = solve_homogeneous(Side::West, 0.3, rest, g);
  FieldSlice full = PF;
  for (std::size_t q = 0; q < full.v.size(); ++q) full.v[q] += H.v[q];
  for (std::size_t l = 0; l < full.xderiv.size(); ++l)
    for (std::size_t q = 0; q < full.v.size(); ++q) full.xderiv[l][q] += H.xderiv[l][q];
  for (int j = 0; j < g.N; ++j) {
    CHECK(std::abs(full(0, j) - t.psi0[j]) < 1e-10);
    CHECK(std::abs(full.xderiv[0][j] - t.psi1[j]) < 1e-10);
  }
  CHECK(pde_residual(Side::West, 0.3, full, &F, g) <= 1e-5);
}

TEST_CASE("Q_w trivial cases and the divergence form") {
  auto g = grid(32, 32.0, 15.0, 150);
  FieldSlice c(g.xgrid, g.N, g.L);
  for (auto& z : c.v) z = 3.0;
  CHECK(Qw_nonlinearity(c, c, 0.4, g).sup() < 1e-14);

  BoundaryTrace t = BoundaryTrace::zeros(g.N);
  std::fill(t.psi0.begin(), t.psi0.end(), 0.7);
  std::fill(t.psi1.begin(), t.psi1.end(), -0.2);
  auto x_only = solve_homogeneous(Side::West, 0.4, t, g);
  CHECK(Qw_nonlinearity(x_only, x_only, 0.4, g).sup() < 1e-13);

  for (Side s : {Side::West, Side::East}) {
    auto r = solve_homogeneous(s, 0.9, random_trace(g, 8, 5), g);
    auto q1 = Qw_nonlinearity(r, r, 0.9, g);
    auto q2 = Qw_divergence_form(r, 0.9, g);
    double d = 0;
    for (std::size_t q = 0; q < q1.v.size(); ++q) d = std::max(d, std::abs(q1.v[q] - q2.v[q]));
    CHECK(q1.sup() > 1e-3);
    CHECK(d <= 1e-8 * q1.sup());
  }

  BoundaryTrace wide = random_trace(g, 15, 6);
  auto rw = solve_homogeneous(Side::West, 0.9, wide, g);
  CHECK_THROWS_AS(Qw_nonlinearity(rw, rw, 0.9, g), Error);
}

TEST_CASE("Picard iteration") {
  auto g = grid(32, 32.0, 20.0, 160);
  PicardOptions opt;
  opt.tol = 1e-10;
  auto z = picard_solve(Side::West, 0.0, BoundaryTrace::zeros(g.N), g, opt);
  CHECK(z.second.iterations == 1);
  CHECK(z.first.sup() == 0.0);

  auto base = random_trace(g, 6, 17);
  std::vector<double> amps{1e-3, 2e-3, 4e-3}, dist;
  for (double a : amps) {
    BoundaryTrace t = base;
    for (auto& v : t.psi0) v *= a;
    for (auto& v : t.psi1) v *= a;
    auto [psi, tr] = picard_solve(Side::West, 0.0, t, g, opt);
    CHECK(tr.converged);
    CHECK(tr.iterations <= 8);
    for (double r : tr.ratios) CHECK(r <= 0.2);
    auto lin = solve_homogeneous(Side::West, 0.0, t, g);
    double d = 0;
    for (std::size_t q = 0; q < psi.v.size(); ++q) d = std::max(d, std::abs(psi.v[q] - lin.v[q]));
    dist.push_back(d);
  }
  const double slope = std::log(dist[2] / dist[0]) / std::log(amps[2] / amps[0]);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.1));

  BoundaryTrace big = base;
  for (auto& v : big.psi0) v *= 100;
  opt.delta0 = 1.0;
  CHECK_THROWS_AS(picard_solve(Side::West, 0.0, big, g, opt), Error);

  // linearized mode around a small background
  BoundaryTrace bt = base;
  for (auto& v : bt.psi0) v *= 1e-2;
  for (auto& v : bt.psi1) v *= 1e-2;
  auto bg = solve_homogeneous(Side::West, 0.0, bt, g);
  PicardOptions lo = opt;
  lo.mode = PicardMode::Linearized;
  lo.background = &bg;
  auto [lp, ltr] = picard_solve(Side::West, 0.0, bt, g, lo);
  CHECK(ltr.converged);
}

TEST_CASE("kernel decay report") {
  auto g = grid(512, 128.0, 30.0, 50);
  auto w = kernel_decay_report(Side::West, 0.0, g, 2, 0);
  CHECK(w.delta >= 0.4);
  CHECK(w.mass_err < 1e-12);
  auto e = kernel_decay_report(Side::East, 0.0, g, 2, 0);
  CHECK(e.mass_err < 1e-12);
  CHECK(e.moment_err < 1e-3);
  auto e2 = kernel_decay_report(Side::East, 0.5, g, 3, 1);
  CHECK(e2.delta >= bpow(0.5, -2.0 / 3.0) - 0.1);
}

TEST_CASE("regularity cancellations") {
  CHECK(regularity_cancellation_check(0.0, 1.0, 0.0, 2).ok);
  CHECK(regularity_cancellation_check(0.0, 0.0, 1.0, 1).ok);
  CHECK(regularity_cancellation_check(0.8, 1.0, 0.5, 1).ok);
  auto r0 = regularity_cancellation_check(0.0, 1.0, 0.0, 0);
  CHECK(std::isfinite(r0.max_ratio));
}

TEST_CASE("BLT1 dump round trip") {
  auto g = grid(16, 16.0, 5.0, 10);
  auto f = solve_homogeneous(Side::West, 0.2, random_trace(g, 3, 1), g);
  const std::string p = "/tmp/blt_rt_test.bin";
  write_field(f, p);
  auto r = read_field(p);
  CHECK(r.nx() == f.nx());
  CHECK(r.ny == f.ny);
  CHECK(!r.is_complex);
  for (std::size_t q = 0; q < f.v.size(); ++q) CHECK(r.v[q].real() == f.v[q].real());
  f.is_complex = true;
  write_field(f, p);
  auto c = read_field(p);
  CHECK(c.is_complex);
  CHECK(max_abs_diff(c.v, f.v, f.v.size()) == 0.0);
  std::remove(p.c_str());
}
