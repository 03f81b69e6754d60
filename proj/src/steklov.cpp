#include "blt/steklov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "blt/halfspace.hpp"

namespace blt {

Eigen::Matrix2cd symbol(Side side, double alpha, double xi) {
  const double b = 1.0 + alpha * alpha, a = alpha, x2 = xi * xi;
  auto l = decaying_modes(side, alpha, xi);
  const cplx p = l[0] * l[1], s = l[0] + l[1], q = l[0] * l[0] + p + l[1] * l[1];
  const cplx iax = I1 * a * xi;
  Eigen::Matrix2cd M;
  if (side == Side::West) {
    M(0, 0) = -b * (b * p + x2);
    M(0, 1) = -b * (b * s + 2.0 * iax);
    M(1, 0) = -0.5 * (2.0 * b * p * (b * s + 4.0 * iax) + 4.0 * iax * x2 - 1.0);
    M(1, 1) = (5.0 * a * a + 1.0) * x2 - b * (b * q + 4.0 * iax * s);
  } else {
    M(0, 0) = b * (b * p + x2);
    M(0, 1) = b * (b * s - 2.0 * iax);
    M(1, 0) = -0.5 * (2.0 * b * b * p * s + 4.0 * iax * x2 - 1.0);
    M(1, 1) = -(b * b * q + (3.0 * a * a - 1.0) * x2);
  }
  return M;
}

Eigen::Matrix2cd symbol_modal(Side side, double alpha, double xi) {
  const double b = 1.0 + alpha * alpha;
  auto l = decaying_modes(side, alpha, xi);
  Eigen::Matrix2cd R, C;
  for (int j = 0; j < 2; ++j) {
    const cplx lam = l[j];
    const cplx lap = side == Side::West ? lam * lam + std::pow(alpha * lam + I1 * xi, 2)
                                        : lam * lam + std::pow(-alpha * lam + I1 * xi, 2);
    const double sg = side == Side::West ? 1.0 : -1.0;
    R(0, j) = sg * b * lap;
    R(1, j) = (b * lam + 2.0 * I1 * alpha * xi) * lap + 0.5;
    C(0, j) = 1.0;
    C(1, j) = -lam;
  }
  return R * C.inverse();
}

namespace {

std::vector<Eigen::Matrix2cd> symbols_on(Side side, double alpha, const SpectralGrid& g) {
  std::vector<Eigen::Matrix2cd> out(g.N);
  for (int k = 0; k < g.N; ++k) {
    out[k] = symbol(side, alpha, g.xi(k));
    if (g.is_nyquist(k)) out[k] = out[k].real().cast<cplx>();
  }
  return out;
}

double l2(const std::vector<double>& f, double dy) {
  double s = 0;
  for (double v : f) s += v * v;
  return std::sqrt(s * dy);
}

double hs_norm(const std::vector<cplx>& fh, const SpectralGrid& g, double s) {
  double acc = 0;
  for (int k = 0; k < g.N; ++k) acc += std::pow(1.0 + sqr(g.xi(k)), s) * std::norm(fh[k]);
  return std::sqrt(acc * g.L);
}

SteklovOutput apply_with(const std::vector<Eigen::Matrix2cd>& M, const BoundaryTrace& trace,
                         const SpectralGrid& grid) {
  if (trace.size() != grid.N) fail("Usage", "trace length differs from grid N");
  auto h0 = fft_forward(trace.psi0), h1 = fft_forward(trace.psi1);
  std::vector<cplx> r2(grid.N), r3(grid.N);
  for (int k = 0; k < grid.N; ++k) {
    r2[k] = M[k](0, 0) * h0[k] + M[k](0, 1) * h1[k];
    r3[k] = M[k](1, 0) * h0[k] + M[k](1, 1) * h1[k];
  }
  return {real_part(fft_backward(r2)), real_part(fft_backward(r3))};
}

std::pair<double, double> pairing_with(const std::vector<Eigen::Matrix2cd>& M, const BoundaryTrace& trace,
                                       const SpectralGrid& grid) {
  auto r = apply_with(M, trace, grid);
  const double dy = grid.dy();
  double p = 0;
  for (int j = 0; j < grid.N; ++j) p += r.rho3[j] * trace.psi0[j] + r.rho2[j] * trace.psi1[j];
  p *= dy;
  const double sc = l2(r.rho3, dy) * l2(trace.psi0, dy) + l2(r.rho2, dy) * l2(trace.psi1, dy);
  return {p, sc};
}

double ratio_with(const std::vector<Eigen::Matrix2cd>& M, const BoundaryTrace& trace,
                  const SpectralGrid& grid) {
  auto r = apply_with(M, trace, grid);
  const double out = hs_norm(fft_forward(r.rho2), grid, -0.5) + hs_norm(fft_forward(r.rho3), grid, -1.5);
  const double in = hs_norm(fft_forward(trace.psi0), grid, 1.5) + hs_norm(fft_forward(trace.psi1), grid, 0.5);
  return in > 0 ? out / in : 0.0;
}

}  // namespace

SteklovOutput apply(Side side, double alpha, const BoundaryTrace& trace, const SpectralGrid& grid) {
  return apply_with(symbols_on(side, alpha, grid), trace, grid);
}

std::vector<double> apply_A3_tilde(double alpha, const FieldSlice& psi, const FieldSlice& background,
                                   const SpectralGrid& grid) {
  if (psi.xderiv.empty()) fail("Usage", "apply_A3_tilde needs the dX layer of psi");
  BoundaryTrace t;
  for (int j = 0; j < psi.ny; ++j) {
    t.psi0.push_back(psi(0, j).real());
    t.psi1.push_back(psi.xderiv[0][j].real());
  }
  auto lin = apply(psi.side, alpha, t, grid).rho3;
  auto q = boundary_quadratic_term(psi, background, alpha, grid);
  for (int j = 0; j < psi.ny; ++j) lin[j] += q[j].real();
  return lin;
}

std::pair<double, double> sign_pairing(Side side, double alpha, const BoundaryTrace& trace,
                                       const SpectralGrid& grid) {
  return pairing_with(symbols_on(side, alpha, grid), trace, grid);
}

BoundaryTrace random_trace(const SpectralGrid& grid, std::uint64_t seed, double xi_band) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const int N = grid.N;
  std::vector<cplx> h0(N), h1(N);
  for (int k = 0; k <= N / 2 - 1; ++k) {
    const double xi = grid.xi(k);
    if (xi > xi_band) break;
    const double w = 1.0 / (1.0 + xi * xi);
    h0[k] = w * cplx(nd(rng), k == 0 ? 0.0 : nd(rng));
    h1[k] = w * cplx(nd(rng), k == 0 ? 0.0 : nd(rng));
    if (k > 0) {
      h0[N - k] = std::conj(h0[k]);
      h1[N - k] = std::conj(h1[k]);
    }
  }
  return {real_part(fft_backward(h0)), real_part(fft_backward(h1))};
}

nlohmann::json SignReport::to_json() const {
  return {{"side", to_string(side)}, {"alpha", alpha},         {"n", n},
          {"seed", seed},            {"max_normalized", max_normalized},
          {"worst", worst},          {"violations", violations}, {"ok", ok()}};
}

SignReport negativity_check(Side side, double alpha, int n_random, const SpectralGrid& grid,
                            std::uint64_t seed, double xi_band, double tol) {
  SignReport r;
  r.side = side;
  r.alpha = alpha;
  r.n = n_random;
  r.seed = seed;
  r.max_normalized = -std::numeric_limits<double>::infinity();
  // West pairs are <= 0, east pairs are compared with the same sign.
  const auto M = symbols_on(side, alpha, grid);
  for (int i = 0; i < n_random; ++i) {
    auto t = random_trace(grid, seed + static_cast<std::uint64_t>(i), xi_band);
    auto [p, sc] = pairing_with(M, t, grid);
    const double v = sc > 0 ? p / sc : 0.0;
    if (v > r.max_normalized) {
      r.max_normalized = v;
      r.worst = i;
      r.worst_trace = t;
    }
    if (p > tol * sc) ++r.violations;
  }
  return r;
}

void require_sign(const SignReport& r) {
  if (r.ok()) return;
  std::ostringstream os;
  os << to_string(r.side) << " alpha=" << r.alpha << ": " << r.violations << " of " << r.n
     << " samples positive, worst sample " << r.worst << " (seed " << r.seed + r.worst
     << ", pairing/scale " << r.max_normalized << ")";
  fail("SignViolation", os.str());
}

double boundedness_ratio(Side side, double alpha, const BoundaryTrace& trace, const SpectralGrid& grid) {
  return ratio_with(symbols_on(side, alpha, grid), trace, grid);
}

double max_boundedness_ratio(Side side, double alpha, int n_random, const SpectralGrid& grid,
                             std::uint64_t seed, double xi_band) {
  const auto M = symbols_on(side, alpha, grid);
  double m = 0;
  for (int i = 0; i < n_random; ++i)
    m = std::max(m, ratio_with(M, random_trace(grid, seed + i, xi_band), grid));
  return m;
}

GrowthFit derivative_growth(Side side, double alpha, int N, int i, int j, double xlo, double xhi,
                            int n_samples, double h_rel) {
  if (N < 0 || N > 3) fail("Usage", "derivative order must be 0..3");
  if (i < 2 || i > 3 || j < 0 || j > 1) fail("Usage", "entry must be m_{2|3, 0|1}");
  auto m = [&](double xi) { return symbol(side, alpha, xi)(i - 2, j); };
  auto xs = logspace(xlo, xhi, n_samples);
  std::vector<double> t(xs.size()), y(xs.size());
  GrowthFit g;
  for (std::size_t q = 0; q < xs.size(); ++q) {
    const double x = xs[q], h = h_rel * x;
    cplx d;
    switch (N) {
      case 0: d = m(x); break;
      case 1: d = (m(x + h) - m(x - h)) / (2 * h); break;
      case 2: d = (m(x + h) - 2.0 * m(x) + m(x - h)) / (h * h); break;
      default:
        d = (m(x + 2 * h) - 2.0 * m(x + h) + 2.0 * m(x - h) - m(x - 2 * h)) / (2 * h * h * h);
    }
    t[q] = 1.0 + x;
    y[q] = std::abs(d);
    g.C = std::max(g.C, y[q] / std::pow(t[q], 3 - N));
  }
  g.fit = loglog_fit(t, y);
  g.fit.claimed = 3 - N;
  g.fit.pass = g.fit.slope <= g.fit.claimed + 0.35;
  return g;
}

void write_symbol_csv(std::ostream& os, Side side, double alpha, const std::vector<double>& xis) {
  os << "xi,re_m20,im_m20,re_m21,im_m21,re_m30,im_m30,re_m31,im_m31\n";
  os.precision(17);
  for (double xi : xis) {
    auto M = symbol(side, alpha, xi);
    os << xi;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) os << ',' << M(r, c).real() << ',' << M(r, c).imag();
    os << '\n';
  }
}

TailFit kernel_tail_fit(Side side, double alpha, int i, int j, const SpectralGrid& grid,
                        double xi_damp, double ymin) {
  std::vector<cplx> h(grid.N);
  for (int k = 0; k < grid.N; ++k) {
    const double xi = grid.xi(k);
    h[k] = (1.0 - chi_cut(xi, grid.chi_cutoff)) * std::exp(-sqr(xi / xi_damp)) *
           symbol(side, alpha, xi)(i - 2, j);
  }
  auto K = fft_backward(h);
  std::vector<double> ys, ks;
  for (int q = 1; q < grid.N / 4; ++q) {
    const double y = grid.y(q);
    if (y < ymin) continue;
    ys.push_back(y);
    ks.push_back(std::abs(K[q]));
  }
  auto f = loglog_fit(ys, ks);
  return {-f.slope, f.r2};
}

}  // namespace blt
