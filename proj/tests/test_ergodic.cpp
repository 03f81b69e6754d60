#include <random>

#include "blt/ergodic.hpp"
#include "blt/halfspace.hpp"
#include "doctest.h"

using namespace blt;

namespace {

double sup_diff(const FieldSlice& a, const FieldSlice& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

double sup_field(const FieldSlice& f) {
  double m = 0;
  for (auto z : f.v) m = std::max(m, std::abs(z));
  return m;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / v.size();
}

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += sqr(x - m);
  return s / v.size();
}

// Small grid for the field-level checks; every root is computed.
SpectralGrid small_grid() { return make_grid(256.0, 1024, 40.0, 40); }

// Long torus for the ensembles: L / correlation length = 4096.
SpectralGrid long_grid() { return make_grid(8192.0, 32768, 10.0, 10); }

const std::vector<double> kXs{1, 4, 16, 64, 256};
const std::vector<double> kEps{0.1, 0.05, 0.025};
const EpsDomain kBox{0.0, 32.0, 200.0, 64};

StationaryProcess ma(std::uint64_t seed) { return StationaryProcess::moving_average(0, 1, 2.0, seed); }

}  // namespace

TEST_CASE("sampling: means, reproducibility, moments") {
  auto g = small_grid();
  const int N = g.N;
  const double v = 1.0 / 12;

  auto a = sample(ma(7), g), b = sample(ma(7), g), c = sample(ma(8), g);
  CHECK(a == b);
  CHECK(a != c);
  // The torus average of the moving average is the average of the innovations.
  CHECK(std::abs(mean_of(a) - 0.5) <= 3 * std::sqrt(v / N));
  CHECK(std::abs(mean_of(c) - 0.5) <= 3 * std::sqrt(v / N));
  const double s2 = sqr(ma(0).stddev(g.dy()));
  CHECK(std::abs(var_of(a) / s2 - 1) < 0.15);
  CHECK(std::abs(var_of(c) / s2 - 1) < 0.15);
  CHECK(std::abs(var_of(a) / var_of(c) - 1) < 0.2);

  for (double x : sample(StationaryProcess::constant(0.3), g)) CHECK(x == 0.3);

  auto per = StationaryProcess::periodic(0.2, {1.0, 0.5}, 16.0, 3);
  auto p = sample(per, g);
  CHECK(std::abs(mean_of(p) - 0.2) < 1e-12);
  CHECK(std::abs(std::sqrt(var_of(p)) - per.stddev(g.dy())) < 1e-12);
  CHECK_THROWS_WITH_AS(sample(StationaryProcess::periodic(0, {1.0}, 10.0, 1), g),
                       doctest::Contains("Usage"), Error);

  auto bl = StationaryProcess::iid_bandlimited(-0.1, 0.3, 1.0, 5);
  double vs = 0, ms = 0;
  for (int s = 0; s < 10; ++s) {
    auto f = sample(bl.with_seed(s), g);
    vs += var_of(f) / 10;
    ms += mean_of(f) / 10;
  }
  CHECK(std::abs(ms + 0.1) < 1e-12);
  CHECK(std::abs(std::sqrt(vs) / 0.3 - 1) < 0.05);
}

TEST_CASE("ergodic limit formula") {
  CHECK(ergodic_limit(1, 0, 0) == doctest::Approx(1).epsilon(1e-15));
  CHECK(ergodic_limit(0, 1, 1) == doctest::Approx(std::pow(2.0, 2.0 / 3.0)).epsilon(1e-15));
  CHECK(ergodic_limit(0.3, -0.1, 0) == doctest::Approx(0.2).epsilon(1e-15));
  auto p0 = StationaryProcess::constant(0.25), p1 = StationaryProcess::moving_average(0, 2, 1, 0);
  CHECK(ergodic_limit(p0, p1, 0.5) == doctest::Approx(0.25 + std::pow(1.25, 2.0 / 3.0)).epsilon(1e-15));
}

TEST_CASE("decomposition reconstructs the eastern solve") {
  auto g = small_grid();
  for (double alpha : {0.0, 1.0, -0.6}) {
    BoundaryTrace t{sample(ma(11), g), sample(StationaryProcess::iid_bandlimited(0.1, 0.2, 2.0, 12), g)};
    auto split = decompose_eastern(t, alpha, g);
    auto full = solve_homogeneous(Side::East, alpha, t, g, 0);
    FieldSlice sum = split.exp;
    for (std::size_t i = 0; i < sum.v.size(); ++i) sum.v[i] += split.alg.v[i] + split.erg.v[i];
    CHECK(sup_diff(sum, full) <= 1e-10 * std::max(1.0, sup_field(full)));

    auto rows = eastern_rows_at(t, alpha, g, g.xgrid[7]);
    for (int j = 0; j < g.N; ++j) {
      CHECK(std::abs(rows.erg[j] - split.erg(7, j).real()) < 1e-12);
      CHECK(std::abs(rows.alg[j] - split.alg(7, j).real()) < 1e-12);
    }
  }
}

TEST_CASE("constant data: kernel mass one") {
  auto g = small_grid();
  const int N = g.N;
  for (double alpha : {0.0, 1.0}) {
    BoundaryTrace t{std::vector<double>(N, 0.7), std::vector<double>(N, 0.0)};
    auto s = decompose_eastern(t, alpha, g);
    for (int i = 0; i < g.nx(); ++i)
      for (int j = 0; j < N; ++j) CHECK(std::abs(s.erg(i, j) - 0.7) < 1e-12);
    CHECK(sup_field(s.alg) < 1e-12);
    CHECK(sup_field(s.exp) < 1e-12);

    auto rep = kernel_decay_report(Side::East, alpha, g, 2, 0, 1.0, 20.0);
    CHECK(rep.mass_err < 1e-12);
  }
}

TEST_CASE("psi1-only data: limit b^{2/3} E[psi1]") {
  auto g = small_grid();
  const int N = g.N;
  const double alpha = 1.0, b23 = std::pow(2.0, 2.0 / 3.0);
  BoundaryTrace c{std::vector<double>(N, 0.0), std::vector<double>(N, 1.0)};
  auto s = decompose_eastern(c, alpha, g);
  for (int j = 0; j < N; ++j) CHECK(std::abs(s.erg(g.nx() - 1, j) - b23) < 1e-12);
  CHECK(sup_field(s.alg) < 1e-12);

  // Random psi1: the erg part settles on b^{2/3} times the torus mean.
  auto p1 = sample(StationaryProcess::moving_average(-1, 1, 2.0, 4), g);
  BoundaryTrace t{std::vector<double>(N, 0.0), p1};
  const double target = b23 * mean_of(p1);
  double prev = 1e300;
  for (double X : {1.0, 16.0, 256.0, 4096.0, 65536.0}) {
    auto r = eastern_rows_at(t, alpha, g, X);
    CHECK(std::abs(mean_of(r.erg) - target) < 1e-12);
    double dev = 0;
    for (double v : r.erg) dev = std::max(dev, std::abs(v - target));
    CHECK(dev < prev);
    prev = dev;
  }
}

TEST_CASE("exponential part decays at the fast rate") {
  auto g = make_grid(256.0, 1024, 1200.0, 80, 1.06);
  for (double alpha : {0.0, 1.0}) {
    BoundaryTrace t{sample(ma(21), g), sample(ma(22), g)};
    auto s = decompose_eastern(t, alpha, g);
    const double fast = std::pow(1 + alpha * alpha, -2.0 / 3.0);
    CHECK(fit_decay_rate(s.exp_fast, 2.0, 12.0) >= fast - 0.05);
    // The slow high-pass share decays no slower than Re mu1 at xi0 / 2.
    FieldSlice slow = s.exp;
    for (std::size_t i = 0; i < slow.v.size(); ++i) slow.v[i] -= s.exp_fast.v[i];
    const double floor = decaying_modes(Side::East, alpha, 0.5 * g.chi_cutoff)[0].real();
    CHECK(fit_decay_rate(slow, 100.0, 1000.0) >= 0.9 * floor);
  }
}

TEST_CASE("kernel envelope exponent and L1_uloc") {
  auto g = long_grid();
  for (double alpha : {0.0, 1.0}) {
    std::vector<double> X{256, 1024, 4096}, e;
    for (double x : X) e.push_back(kernel_moment_envelope(alpha, g, x));
    const double p = -loglog_fit(X, e).slope;
    CHECK(p >= 0.15);
    CHECK(p <= 0.35);
    CHECK(std::abs(p - 0.25) < 0.02);
  }
  auto s = small_grid();
  std::vector<double> f(s.N, 0.0);
  f[0] = 1;
  f[1] = -1;
  // Mean zero, two unit spikes in one window of width 1.
  CHECK(l1_uloc_deviation(f, s) == doctest::Approx(2 * s.dy()).epsilon(1e-12));
  CHECK(l1_uloc_deviation(std::vector<double>(s.N, 3.0), s) == 0.0);
}

TEST_CASE("Birkhoff averages converge like R^{-1/2}") {
  auto g = make_grid(2048.0, 8192, 10.0, 10);
  auto r = birkhoff_report(ma(100), g, {8, 16, 32, 64}, 20);
  CHECK(r.fit.slope == doctest::Approx(-0.5).epsilon(0.3));
  CHECK(r.fit.pass);
}

TEST_CASE("convergence report: constant data and focusing data") {
  auto g = small_grid();
  const int N = g.N;
  BoundaryTrace c{std::vector<double>(N, 0.4), std::vector<double>(N, 0.1)};
  const double phibar = ergodic_limit(0.4, 0.1, 0.5);
  auto r = convergence_report(c, phibar, 0.5, g, kXs, true);
  for (double e : r.erg_err) CHECK(e < 1e-13);
  CHECK(r.monotone);
  CHECK(r.j_ok);
  CHECK(r.alg_bounded);

  // The kernel has negative lobes, so sup norms need not shrink: data equal
  // to the sign of K(256, -Y) reach ||K(256)||_1 > 1 at Y = 0 only at X = 256.
  auto gl = make_grid(1024.0, 4096, 10.0, 10);
  const int NL = gl.N;
  std::vector<cplx> h(NL);
  for (int k = 0; k < NL; ++k) {
    if (gl.is_nyquist(k)) continue;
    const double chi = chi_cut(gl.xi(k), gl.chi_cutoff);
    if (chi > 0) h[k] = chi * std::exp(-decaying_modes(Side::East, 0.0, gl.xi(k))[0] * 256.0);
  }
  auto K = fft_backward(h);
  std::vector<double> sgn(NL);
  for (int j = 0; j < NL; ++j) sgn[j] = K[(NL - j) % NL].real() >= 0 ? 1.0 : -1.0;
  BoundaryTrace f{sgn, std::vector<double>(NL, 0.0)};
  g = gl;
  auto bad = convergence_report(f, 0.0, 0.0, g, kXs, false);
  CHECK_FALSE(bad.monotone);
  CHECK_THROWS_WITH_AS(convergence_report(f, 0.0, 0.0, g, kXs, true),
                       doctest::Contains("ConvergenceViolation"), Error);
  CHECK_THROWS_WITH_AS(convergence_report(c, phibar, 0.5, g, {4, 1, 16}),
                       doctest::Contains("Usage"), Error);
}

TEST_CASE("MA ensemble: monotone sup error, bounded algebraic part, eps trend") {
  auto g = long_grid();
  CHECK(g.L / ma(0).correlation_length() >= 50);
  for (double alpha : {0.0, 1.0}) {
    auto e = ergodic_ensemble(ma(1000), StationaryProcess::constant(0.0), alpha, g, kXs, kEps, 20,
                              1, kBox);
    CHECK(e.monotone_count >= 18);
    CHECK(e.trend_count >= 18);
    CHECK(e.alg_bounded);
    CHECK(e.j_exponent >= 0.15);
    CHECK(e.j_exponent <= 0.35);
  }
}

TEST_CASE("ensemble is independent of the worker count") {
  auto g = make_grid(1024.0, 4096, 10.0, 10);
  auto p1 = StationaryProcess::moving_average(-0.5, 0.5, 2.0, 500);
  auto a = ergodic_ensemble(ma(1), p1, 0.7, g, kXs, {0.1, 0.05}, 4, 1, {0, 4, 20, 16});
  auto b = ergodic_ensemble(ma(1), p1, 0.7, g, kXs, {0.1, 0.05}, 4, 3, {0, 4, 20, 16});
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("slow-part variance matches the spectral prediction") {
  // Mean square over Y of Psi_erg - E equals sum_k chi^2 |e^{-mu1 X}|^2 E|psi_hat_k - E delta_k|^2,
  // and for the moving average E|psi_hat_k|^2 = |H_k|^2 v / N.
  auto g = make_grid(2048.0, 8192, 10.0, 10);
  const int N = g.N, w = 8;
  const double v = 1.0 / 12;
  for (double X : {16.0, 256.0}) {
    double pred = 0;
    for (int k = 0; k < N; ++k) {
      if (g.is_nyquist(k)) continue;
      const double xi = g.xi(k), chi = chi_cut(xi, g.chi_cutoff);
      if (chi == 0) continue;
      cplx H = 0;
      for (int i = 0; i < w; ++i) H += std::exp(-I1 * xi * (i * g.dy()));
      H /= double(w);
      const cplx e = std::exp(-decaying_modes(Side::East, 0.0, xi)[0] * X);
      pred += sqr(chi) * std::norm(e) * std::norm(H) * v / N;
    }
    double mc = 0;
    const int ns = 20;
    for (int s = 0; s < ns; ++s) {
      BoundaryTrace t{sample(ma(300 + s), g), std::vector<double>(N, 0.0)};
      for (double y : ergodic_part_at(t, 0.0, g, X)) mc += sqr(y - 0.5) / (double(N) * ns);
    }
    CHECK(mc / pred == doctest::Approx(1.0).epsilon(0.1));
  }
}

TEST_CASE("eps-rescaled L2 trend") {
  auto g = long_grid();
  const int N = g.N;
  BoundaryTrace c{std::vector<double>(N, 0.3), std::vector<double>(N, 0.0)};
  auto t0 = eps_rescaled_check(c, 0.3, 0.0, g, kEps, kBox, true);
  for (double x : t0.l2) CHECK(x < 1e-12);
  CHECK(t0.decreasing);

  // Zero-mean periodic data, slow enough to pass the cutoff: phibar = 0.
  auto per = StationaryProcess::periodic(0.0, {1.0}, 64.0, 9);
  BoundaryTrace p{sample(per, g), std::vector<double>(N, 0.0)};
  auto tp = eps_rescaled_check(p, 0.0, 0.0, g, kEps, kBox, true);
  CHECK(tp.decreasing);

  // A localized bump measured against a wrong positive constant: the cross
  // term grows as eps shrinks.
  std::vector<double> bump(N, 0.0);
  for (int j = 0; j < N; ++j) bump[j] = std::exp(-sqr((g.y(j) - 50.0) / 10.0));
  BoundaryTrace b{bump, std::vector<double>(N, 0.0)};
  CHECK_THROWS_WITH_AS(eps_rescaled_check(b, 0.05, 0.0, g, kEps, {0, 32, 2, 64}, true),
                       doctest::Contains("TrendViolation"), Error);
  CHECK_THROWS_WITH_AS(eps_rescaled_check(c, 0.3, 0.0, g, kEps, {0, 1, 1000, 8}),
                       doctest::Contains("Usage"), Error);
}

TEST_CASE("far-field constant selection") {
  auto g = small_grid();
  const int N = g.N;
  BoundaryTrace one{std::vector<double>(N, 1.0), std::vector<double>(N, 0.0)};
  auto c1 = select_constant(one, ergodic_limit(1, 0, 0), 0.0, g, 1e4, 1e-12);
  CHECK(c1.C == 1.0);
  CHECK(c1.ok);

  auto per = sample(StationaryProcess::periodic(0.0, {1.0}, 8.0, 2), g);
  BoundaryTrace z{per, std::vector<double>(N, 0.0)};
  auto c0 = select_constant(z, 0.0, 0.0, g, 1e4, 1e-12);
  CHECK(c0.C == 0.0);
  CHECK(c0.ok);

  BoundaryTrace p1{std::vector<double>(N, 0.0), std::vector<double>(N, 1.0)};
  auto c2 = select_constant(p1, ergodic_limit(0, 1, 1), 1.0, g, 1e4, 1e-12);
  CHECK(c2.C == doctest::Approx(std::pow(2.0, 2.0 / 3.0)).epsilon(1e-15));
  CHECK(c2.ok);
}
