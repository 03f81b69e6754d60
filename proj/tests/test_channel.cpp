#include <random>

#include "blt/channel.hpp"
#include "blt/steklov.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace blt;

namespace {

std::vector<double> mode_cos(int N, int k, double amp = 1.0, double phase = 0.0) {
  std::vector<double> v(N);
  for (int j = 0; j < N; ++j) v[j] = amp * std::cos(2.0 * kPi * k * j / N + phase);
  return v;
}

double sup_field(const FieldSlice& f) {
  double m = 0;
  for (auto z : f.v) m = std::max(m, std::abs(z));
  return m;
}

// Fourier coefficient k of row i of a layer.
cplx row_hat(const FieldSlice& f, int layer, int i, int k) {
  const auto& l = f.layer(layer);
  std::vector<cplx> r(l.begin() + static_cast<std::ptrdiff_t>(i) * f.ny,
                      l.begin() + static_cast<std::ptrdiff_t>(i + 1) * f.ny);
  return fft_forward(r)[k];
}

Jumps random_jumps(int N, std::uint64_t seed, int kmax) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Jumps g = zero_jumps(N);
  for (int q = 0; q < 4; ++q)
    for (int k = 1; k <= kmax; ++k) {
      const double a = nd(rng) / k, p = 2 * kPi * nd(rng);
      auto m = mode_cos(N, k, a, p);
      for (int j = 0; j < N; ++j) g[q][j] += m[j];
    }
  return g;
}

}  // namespace

TEST_CASE("lift reproduces the jumps from the closed form") {
  const int N = 16;
  const double M = 4;
  Jumps g = zero_jumps(N);
  g[0] = mode_cos(N, 1, 0.7);
  for (int j = 0; j < N; ++j) {
    auto r = lift_jump_at(g, j, M);
    CHECK(std::abs(r[0] - g[0][j]) <= 1e-8);
    for (int k = 1; k < 4; ++k) CHECK(std::abs(r[k]) <= 1e-8);
  }
  Jumps g3 = zero_jumps(N);
  g3[3].assign(N, 1.0);
  auto r = lift_jump_at(g3, 0, M);
  CHECK(std::abs(r[3] - 1.0) <= 1e-8);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(r[k]) <= 1e-8);

  ChannelLayout lay;
  auto f = lift_jumps(g, lay.xs(), 16.0, M);
  for (int j = 0; j < N; ++j) {
    CHECK(f(lay.interface_left(), j) == 0.0);
    CHECK(std::abs(f(lay.interface_right(), j) - g[0][j]) <= 1e-14);
    CHECK(f(lay.n_left + lay.n_right - 1, j) == 0.0);   // cut off before X = M
  }
  auto z = lift_jumps(zero_jumps(N), lay.xs(), 16.0, M);
  CHECK(sup_field(z) == 0.0);
}

TEST_CASE("cutoff is C4 at both ends") {
  const double M = 4;
  for (int d = 1; d <= 4; ++d) {
    CHECK(std::abs(lift_cutoff(1e-9, M, d)) <= 1e-6);
    CHECK(std::abs(lift_cutoff(M / 2 - 1e-9, M, d)) <= 1e-6);
  }
  CHECK(lift_cutoff(0.0, M) == 1.0);
  CHECK(lift_cutoff(M / 2, M) == 0.0);
}

TEST_CASE("flat channel matches the two-piece Chebyshev oracle") {
  const double L = 16;
  const int N = 16;
  SpectralGrid grid;
  grid.L = L;
  grid.N = N;
  ChannelLayout lay;
  lay.gamma0 = 1.0;
  lay.M = 4.0;
  for (Side side : {Side::West, Side::East})
    for (double alpha : {0.0, 0.7, -1.3})
      for (bool coupled : {true, false})
        for (int k : {1, 3}) {
          CAPTURE(to_string(side));
          CAPTURE(alpha);
          CAPTURE(coupled);
          CAPTURE(k);
          Jumps g = zero_jumps(N);
          g[0] = mode_cos(N, k, 1.0);
          g[1] = mode_cos(N, k, -0.4);
          g[3] = mode_cos(N, k, 0.25);
          SteklovRows rows;
          rows.coupled = coupled;
          if (!coupled) rows.rho3 = mode_cos(N, k, 0.3);
          auto f = solve_channel_flat(side, alpha, lay, g, rows, grid);
          const double xi = grid.xi(k);
          Eigen::Matrix2cd S = coupled ? symbol(side, alpha, xi) : Eigen::Matrix2cd::Zero();
          auto cl = oracle::cheb(40, -lay.gamma0, 0.0), cr = oracle::cheb(40, 0.0, lay.M);
          auto [uL, uR] = oracle::channel_solve(side, alpha, xi, cl, cr, {0.5, -0.2, 0.0, 0.125}, 0.0,
                                                coupled ? 0.0 : 0.15, S);
          const auto xs = lay.xs();
          double err = 0, scale = 0;
          for (int i = 0; i < static_cast<int>(xs.size()); ++i) {
            const bool left = i < lay.n_left;
            const cplx ref = oracle::cheb_interp(left ? cl : cr, left ? uL : uR, xs[i]);
            err = std::max(err, std::abs(row_hat(f, 0, i, k) - ref));
            scale = std::max(scale, std::abs(ref));
          }
          CHECK(err / scale <= 1e-8);
        }
}

TEST_CASE("flat channel with a source matches the oracle") {
  const double L = 16;
  const int N = 16, k = 2;
  SpectralGrid grid;
  grid.L = L;
  grid.N = N;
  ChannelLayout lay;
  lay.gamma0 = 1.0;
  lay.M = 4.0;
  lay.n_left = 60;
  lay.n_right = 200;
  const auto xs = lay.xs();
  auto prof = [](double X) { return std::exp(-X * X) * (1.0 + 0.5 * X); };
  for (Side side : {Side::West, Side::East}) {
    FieldSlice F(xs, N, L);
    auto c = mode_cos(N, k);
    for (int i = 0; i < F.nx(); ++i)
      for (int j = 0; j < N; ++j) F(i, j) = prof(xs[i]) * c[j];
    Jumps g = zero_jumps(N);
    g[0] = mode_cos(N, k, 0.3);
    auto f = solve_channel_flat(side, 0.7, lay, g, SteklovRows{}, grid, &F);
    const double xi = grid.xi(k);
    auto cl = oracle::cheb(48, -1.0, 0.0), cr = oracle::cheb(48, 0.0, 4.0);
    auto [uL, uR] = oracle::channel_solve(side, 0.7, xi, cl, cr, {0.15, 0, 0, 0}, 0.0, 0.0,
                                          symbol(side, 0.7, xi),
                                          [&](double X) { return cplx(0.5 * prof(X)); });
    double err = 0, scale = 0;
    for (int i = 0; i < F.nx(); ++i) {
      const bool left = i < lay.n_left;
      const cplx ref = oracle::cheb_interp(left ? cl : cr, left ? uL : uR, xs[i]);
      err = std::max(err, std::abs(row_hat(f, 0, i, k) - ref));
      scale = std::max(scale, std::abs(ref));
    }
    CAPTURE(to_string(side));
    CHECK(err / scale <= 1e-6);
  }
}

TEST_CASE("zero data gives the zero solution") {
  SpectralGrid grid;
  grid.L = 16;
  grid.N = 16;
  ChannelLayout lay;
  for (Side side : {Side::West, Side::East}) {
    auto f = solve_channel_flat(side, 0.7, lay, zero_jumps(16), SteklovRows{}, grid);
    CHECK(sup_field(f) <= 1e-12);
    auto r = solve_channel_rough(side, 0.7, RoughProfile::random(1.0, 0.3, 3, 16, 16, 3), zero_jumps(16),
                                 SteklovRows{}, 4.0, 40);
    double m = 0;
    for (double v : r.v) m = std::max(m, std::abs(v));
    CHECK(m <= 1e-12);
  }
}

TEST_CASE("clamped wall and exact jumps on the flat path") {
  SpectralGrid grid;
  grid.L = 16;
  grid.N = 32;
  ChannelLayout lay;
  auto g = random_jumps(32, 11, 4);
  for (Side side : {Side::West, Side::East}) {
    auto f = solve_channel_flat(side, 0.7, lay, g, SteklovRows{}, grid);
    for (int j = 0; j < grid.N; ++j) {
      CHECK(std::abs(f(0, j)) <= 1e-8);
      CHECK(std::abs(f.xderiv[0][j]) <= 1e-8);
      for (int k = 0; k < 4; ++k) {
        const auto& l = f.layer(k);
        const cplx jump = l[static_cast<std::size_t>(lay.interface_right()) * grid.N + j] -
                          l[static_cast<std::size_t>(lay.interface_left()) * grid.N + j];
        CHECK(std::abs(jump - g[k][j]) <= 1e-8 * (1.0 + std::abs(g[k][j])));
      }
    }
  }
}

TEST_CASE("rough solver: clamped wall, positive Jacobian, refinement against the exact flat path") {
  const double L = 16, M = 4;
  for (Side side : {Side::West, Side::East}) {
    std::vector<double> errs;
    for (int lev = 0; lev < 3; ++lev) {
      const int N = 16 << lev, ns = 40 << lev;
      Jumps g = zero_jumps(N);
      g[0] = mode_cos(N, 1);
      g[2] = mode_cos(N, 1, 0.3, 0.5);
      auto prof = RoughProfile::flat(1.0, N, L);
      auto ex = solve_channel_linear(side, 0.7, prof, g, SteklovRows{}, M, ns);
      auto fd = solve_channel_rough(side, 0.7, prof, g, SteklovRows{}, M, ns);
      double e = 0, s = 0;
      for (std::size_t q = 0; q < ex.v.size(); ++q) {
        e = std::max(e, std::abs(ex.v[q] - fd.v[q]));
        s = std::max(s, std::abs(ex.v[q]));
      }
      errs.push_back(e / s);
      auto rp = RoughProfile::random(1.0, 0.3, 3, N, L, 7);
      auto rr = solve_channel_rough(side, 0.7, rp, g, SteklovRows{}, M, ns);
      CHECK(rr.wall_value_max() <= 1e-8);
      CHECK(rr.wall_normal_max() <= 1e-8);
      CHECK(rr.residual <= 1e-6);
      for (int i = 0; i + 1 < ns; ++i) CHECK(rr.X[(i + 1) * N] > rr.X[i * N]);
    }
    CAPTURE(to_string(side));
    for (int l = 0; l + 1 < 3; ++l) CHECK(std::log2(errs[l] / errs[l + 1]) >= 2.0 - 0.35);
  }
}

TEST_CASE("rough profiles") {
  auto p = RoughProfile::random(1.0, 0.3, 3, 64, 16, 5);
  CHECK_NOTHROW(p.validate());
  CHECK_FALSE(p.is_flat());
  CHECK(p.lipschitz() > 0);
  // discrete Lipschitz bound on the grid
  for (int j = 0; j < 64; ++j) {
    const int jn = (j + 1) % 64;
    CHECK(std::abs(p.gamma[jn] - p.gamma[j]) <= p.lipschitz() * 16.0 / 64 * 1.05);
  }
  auto bad = RoughProfile::flat(-0.1, 8, 16);
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(RoughProfile::flat(1.0, 8, 16).is_flat());
}

TEST_CASE("glue: flat channel and half-space agree at X = M") {
  SpectralGrid grid;
  grid.L = 16;
  grid.N = 32;
  ChannelLayout lay;
  for (Side side : {Side::West, Side::East})
    for (double alpha : {0.0, 0.7}) {
      auto g = random_jumps(32, 21, 5);
      auto f = solve_channel_flat(side, alpha, lay, g, SteklovRows{}, grid);
      auto r = glue_check(side, alpha, f, grid, 1e-6, true);
      for (double m : r.mismatch) CHECK(m <= 1e-6);
      CHECK(r.rho_mismatch <= 1e-6);
      auto z = glue_check(side, alpha, solve_channel_flat(side, alpha, lay, zero_jumps(32), SteklovRows{}, grid),
                          grid);
      for (double m : z.mismatch) CHECK(m == 0.0);
      CHECK(z.rho_mismatch == 0.0);
      // arbitrary data rows are not transparent
      SteklovRows data{std::vector<double>(32, 0.0), mode_cos(32, 2, 0.5), false};
      auto bad = solve_channel_flat(side, alpha, lay, g, data, grid);
      CHECK_THROWS_AS(glue_check(side, alpha, bad, grid, 1e-6, true), Error);
    }
}

TEST_CASE("glue on the rough path refines at second order") {
  const double L = 16, M = 4;
  for (Side side : {Side::West, Side::East}) {
    std::vector<double> rho;
    for (int lev = 0; lev < 3; ++lev) {
      const int N = 16 << lev, ns = 40 << lev;
      Jumps g = zero_jumps(N);
      g[0] = mode_cos(N, 1);
      auto rp = RoughProfile::random(1.0, 0.3, 3, N, L, 7);
      rho.push_back(glue_check(side, 0.7, solve_channel_rough(side, 0.7, rp, g, SteklovRows{}, M, ns)).rho_mismatch);
    }
    CAPTURE(to_string(side));
    for (int l = 0; l + 1 < 3; ++l) CHECK(std::log2(rho[l] / rho[l + 1]) >= 2.0 - 0.35);
  }
}

TEST_CASE("channel estimate constant is stable across random jump sets") {
  SpectralGrid grid;
  grid.L = 16;
  grid.N = 32;
  ChannelLayout lay;
  for (Side side : {Side::West, Side::East}) {
    std::vector<double> C;
    for (int s = 0; s < 10; ++s) {
      auto g = random_jumps(32, 100 + s, 3);
      auto f = solve_channel_flat(side, 0.7, lay, g, SteklovRows{}, grid);
      double den = 0;
      for (const auto& v : g)
        for (double x : v) den = std::max(den, std::abs(x));
      C.push_back(channel_h2_norm(f, grid) / den);
    }
    const auto [lo, hi] = std::minmax_element(C.begin(), C.end());
    CAPTURE(to_string(side));
    CHECK(std::isfinite(*hi));
    CHECK(*hi / *lo <= 4.0);
  }
}

TEST_CASE("truncated energies") {
  ChannelLayout lay;
  // zero field
  {
    SpectralGrid grid;
    grid.L = 32;
    grid.N = 64;
    auto f = solve_channel_flat(Side::West, 0.7, lay, zero_jumps(64), SteklovRows{}, grid);
    for (double e : truncated_energies(f, grid, 10, 16.0)) CHECK(e == 0.0);
  }
  // periodic data: monotone, linear growth, increments independent of L
  std::vector<double> incs;
  for (double L : {32.0, 64.0, 128.0}) {
    SpectralGrid grid;
    grid.L = L;
    grid.N = static_cast<int>(2 * L);
    Jumps g = zero_jumps(grid.N);
    for (int j = 0; j < grid.N; ++j) g[0][j] = std::cos(2 * kPi * grid.y(j) / 8.0) + 0.5;
    auto f = solve_channel_flat(Side::West, 0.7, lay, g, SteklovRows{}, grid);
    const int kmax = 15;
    auto E = truncated_energies(f, grid, kmax, L / 2);
    double inc = 0;
    for (int k = 0; k < kmax; ++k) {
      CHECK(E[k + 1] >= E[k]);
      inc = std::max(inc, E[k + 1] - E[k]);
    }
    for (int k = 1; k <= kmax; ++k) CHECK(E[k] / k <= 2.0 * E[kmax] / kmax + 1e-12);
    incs.push_back(inc);
  }
  const auto [lo, hi] = std::minmax_element(incs.begin(), incs.end());
  CHECK(*hi / *lo <= 1.05);
  // compactly supported data saturate
  {
    SpectralGrid grid;
    grid.L = 64;
    grid.N = 128;
    Jumps g = zero_jumps(grid.N);
    for (int j = 0; j < grid.N; ++j) g[0][j] = std::exp(-sqr(grid.y(j) - 32.0));
    auto f = solve_channel_flat(Side::West, 0.7, lay, g, SteklovRows{}, grid);
    auto E = truncated_energies(f, grid, 30, 32.0);
    CHECK(E[30] - E[20] <= 1e-6 * E[30]);
  }
}

TEST_CASE("nonlinear channel Picard and the amplitude-squared gap") {
  SpectralGrid grid;
  grid.L = 16;
  grid.N = 32;
  ChannelLayout lay;
  std::vector<double> gaps, amps{1e-3, 2e-3, 4e-3};
  for (double a : amps) {
    auto phi = mode_cos(32, 1, a);
    auto rep = solve_channel_nonlinear(Side::West, 0.0, lay, phi, SteklovRows{{}, {}, false}, grid);
    CHECK(rep.trace.converged);
    CHECK(rep.trace.iterations <= 8);
    for (double r : rep.trace.ratios) CHECK(r <= 0.2);
    Jumps g = zero_jumps(32);
    g[0] = phi;
    auto lin = solve_channel_flat(Side::West, 0.0, lay, g, SteklovRows{{}, {}, false}, grid);
    double d = 0;
    for (std::size_t q = 0; q < lin.v.size(); ++q) d = std::max(d, std::abs(lin.v[q] - rep.field.v[q]));
    gaps.push_back(d);
  }
  const double slope = std::log(gaps[2] / gaps[0]) / std::log(amps[2] / amps[0]);
  CHECK(std::abs(slope - 2.0) <= 0.2);
  CHECK_THROWS_AS(solve_channel_nonlinear(Side::West, 0.0, lay, mode_cos(32, 1), SteklovRows{}, grid), Error);
}

TEST_CASE("alternating matcher") {
  auto grid = make_grid(16, 32, 30, 200);
  ChannelLayout lay;
  std::vector<double> phi(32);
  for (int j = 0; j < 32; ++j) phi[j] = 0.01 * std::cos(2 * kPi * j / 32) + 0.005 * std::sin(6 * kPi * j / 32);
  Jumps g = zero_jumps(32);
  g[0] = phi;
  for (Side side : {Side::West, Side::East}) {
    CAPTURE(to_string(side));
    auto m = alternating_match(side, 0.7, lay, phi, grid, false);
    CHECK(m.converged);
    CHECK(m.sweeps <= 3);
    auto ref = solve_channel_flat(side, 0.7, lay, g, SteklovRows{}, grid);
    double d = 0, s = 0;
    for (std::size_t q = 0; q < ref.v.size(); ++q) {
      d = std::max(d, std::abs(ref.v[q] - m.channel.v[q]));
      s = std::max(s, std::abs(ref.v[q]));
    }
    CHECK(d / s <= 1e-10);
    // unpreconditioned relaxation runs away and says so
    auto plain = alternating_match(side, 0.7, lay, phi, grid, false, 0.5, 30, 1e-9, false);
    CHECK(plain.diverged);
    CHECK_FALSE(plain.converged);
  }
  auto nl = alternating_match(Side::West, 0.7, lay, phi, grid, true);
  CHECK(nl.converged);
  for (std::size_t i = 2; i < nl.defects.size(); ++i) CHECK(nl.defects[i] < nl.defects[i - 1]);
  CHECK_THROWS_AS(alternating_match(Side::East, 0.7, lay, phi, grid, true), Error);
}
