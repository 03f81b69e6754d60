#include "blt/halfspace.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace blt {

namespace {

double sigma(Side s) { return s == Side::West ? 1.0 : -1.0; }

void sort_by_imag(std::array<cplx, 2>& r) {
  if (r[1].imag() < r[0].imag()) std::swap(r[0], r[1]);
}
void sort_by_abs(std::array<cplx, 2>& r) {
  if (std::abs(r[1]) < std::abs(r[0])) std::swap(r[0], r[1]);
}

}  // namespace

std::array<cplx, 2> decaying_modes(Side side, double alpha, double xi) {
  auto cr = solve_quartic(quartic_coeffs(side, alpha, xi));
  std::array<cplx, 2> r{};
  if (side == Side::West) {
    r = {cr.pos[0], cr.pos[1]};
    sort_by_imag(r);
  } else if (xi == 0.0) {
    r = {cplx(0.0), cr.pos[0]};
  } else {
    r = {cr.pos[0], cr.pos[1]};
    sort_by_abs(r);
  }
  return r;
}

std::array<cplx, 2> growing_modes(Side side, double alpha, double xi) {
  auto cr = solve_quartic(quartic_coeffs(side, alpha, xi));
  std::array<cplx, 2> r{};
  if (side == Side::West) {
    if (xi == 0.0) {
      r = {cplx(0.0), cr.neg[0]};
    } else {
      r = {cr.neg[0], cr.neg[1]};
      sort_by_abs(r);
    }
  } else {
    r = {cr.neg[0], cr.neg[1]};
    sort_by_imag(r);
  }
  return r;
}

std::array<cplx, 2> mode_coefficients(const std::array<cplx, 2>& lam, cplx psi0, cplx psi1) {
  const cplx d = lam[1] - lam[0];
  if (std::abs(d) < 1e-8) {
    std::ostringstream os;
    os << "|lambda1 - lambda2| = " << std::abs(d);
    fail("IllConditioned", os.str());
  }
  const cplx a2 = -(lam[0] * psi0 + psi1) / d;
  return {psi0 - a2, a2};
}

GreenCoeffs green_coefficients(Side side, double alpha, double xi) {
  GreenCoeffs g;
  g.lp = decaying_modes(side, alpha, xi);
  g.lm = growing_modes(side, alpha, xi);
  const double b = 1.0 + alpha * alpha;
  Eigen::Matrix4cd M;
  Eigen::Vector4cd rhs = Eigen::Vector4cd::Zero();
  // Row k is divided by sc^k so the determinant test sees the root
  // separation rather than the size of the roots.
  double sc = 1.0;
  for (int j = 0; j < 2; ++j) sc = std::max({sc, std::abs(g.lp[j]), std::abs(g.lm[j])});
  rhs(3) = -1.0 / (b * b) / (sc * sc * sc);
  for (int k = 0; k < 4; ++k) {
    for (int j = 0; j < 2; ++j) {
      M(k, j) = std::pow(-g.lp[j] / sc, k);
      M(k, 2 + j) = -std::pow(-g.lm[j] / sc, k);
    }
  }
  double colscale = 1.0;
  for (int j = 0; j < 4; ++j) colscale *= M.col(j).norm();
  const double det = std::abs(M.determinant());
  if (det < 1e-12 * colscale) {
    std::ostringstream os;
    os << "Green system determinant " << det << " at alpha=" << alpha << " xi=" << xi;
    fail("IllConditioned", os.str());
  }
  Eigen::Vector4cd B = M.partialPivLu().solve(rhs);
  g.Bp = {B(0), B(1)};
  g.Bm = {B(2), B(3)};
  return g;
}

cplx green_kernel(double alpha, double xi, double Z, int k, Side side) {
  if (Z == 0.0) fail("Usage", "green_kernel needs Z != 0; use jump_check for the limits");
  auto g = green_coefficients(side, alpha, xi);
  cplx s = 0;
  const auto& lam = Z > 0 ? g.lp : g.lm;
  const auto& B = Z > 0 ? g.Bp : g.Bm;
  for (int j = 0; j < 2; ++j) s += B[j] * std::pow(-lam[j], k) * std::exp(-lam[j] * Z);
  return s;
}

JumpReport jump_check(double alpha, double xi, Side side) {
  auto g = green_coefficients(side, alpha, xi);
  JumpReport r;
  double bmax = 0;
  for (int j = 0; j < 2; ++j) bmax = std::max({bmax, std::abs(g.Bp[j]), std::abs(g.Bm[j])});
  for (int k = 0; k < 4; ++k) {
    cplx s = 0;
    for (int j = 0; j < 2; ++j) s += g.Bp[j] * std::pow(-g.lp[j], k) - g.Bm[j] * std::pow(-g.lm[j], k);
    r.jumps[k] = s;
  }
  const double b = 1.0 + alpha * alpha;
  const double target = -1.0 / (b * b);
  r.third_rel_err = std::abs(r.jumps[3] - target) / std::abs(target);
  for (int k = 0; k < 3; ++k) r.lower_max = std::max(r.lower_max, std::abs(r.jumps[k]) / std::max(1.0, bmax));
  return r;
}

namespace {

// Real-operator symmetry at the Nyquist slot: average the +xi and -xi
// solutions so that real data produce real fields.
template <class Solve>
std::vector<std::vector<cplx>> nyquist_average(double xi, Solve&& solve) {
  auto a = solve(xi);
  auto b = solve(-xi);
  for (std::size_t l = 0; l < a.size(); ++l)
    for (std::size_t i = 0; i < a[l].size(); ++i) a[l][i] = 0.5 * (a[l][i] + b[l][i]);
  return a;
}

// cols[k][layer][i] -> physical layers, inverse FFT along Y per X row.
void synthesise(const std::vector<std::vector<std::vector<cplx>>>& cols, FieldSlice& out, int nlayers) {
  const int nx = out.nx(), ny = out.ny;
  out.xderiv.assign(nlayers - 1, std::vector<cplx>(out.v.size()));
  std::vector<cplx> row(ny);
  for (int l = 0; l < nlayers; ++l) {
    auto& dst = l == 0 ? out.v : out.xderiv[l - 1];
    for (int i = 0; i < nx; ++i) {
      for (int k = 0; k < ny; ++k) row[k] = cols[k][l][i];
      auto phys = fft_backward(row);
      std::copy(phys.begin(), phys.end(), dst.begin() + static_cast<std::ptrdiff_t>(i) * ny);
    }
  }
}

}  // namespace

FieldSlice solve_homogeneous_hat(Side side, double alpha, const std::vector<cplx>& psi0h,
                                 const std::vector<cplx>& psi1h, const SpectralGrid& grid,
                                 int nderiv) {
  const int N = grid.N;
  if (static_cast<int>(psi0h.size()) != N || static_cast<int>(psi1h.size()) != N)
    fail("Usage", "trace length differs from grid N");
  FieldSlice out(grid.xgrid, N, grid.L);
  out.side = side;
  out.alpha = alpha;
  const int nl = nderiv + 1;
  const auto& x = grid.xgrid;
  std::vector<std::vector<std::vector<cplx>>> cols(N);
  for (int k = 0; k < N; ++k) {
    auto solve = [&](double xi) {
      std::vector<std::vector<cplx>> c(nl, std::vector<cplx>(x.size()));
      if (psi0h[k] == 0.0 && psi1h[k] == 0.0) return c;
      auto lam = decaying_modes(side, alpha, xi);
      auto A = mode_coefficients(lam, psi0h[k], psi1h[k]);
      for (std::size_t i = 0; i < x.size(); ++i) {
        for (int j = 0; j < 2; ++j) {
          cplx e = A[j] * std::exp(-lam[j] * x[i]);
          for (int l = 0; l < nl; ++l) {
            c[l][i] += e;
            e *= -lam[j];
          }
        }
      }
      return c;
    };
    cols[k] = grid.is_nyquist(k) ? nyquist_average(grid.xi(k), solve) : solve(grid.xi(k));
  }
  synthesise(cols, out, nl);
  return out;
}

FieldSlice solve_homogeneous(Side side, double alpha, const BoundaryTrace& trace,
                             const SpectralGrid& grid, int nderiv) {
  if (!trace.finite()) fail("Usage", "non-finite trace");
  auto out = solve_homogeneous_hat(side, alpha, fft_forward(trace.psi0), fft_forward(trace.psi1),
                                   grid, nderiv);
  out.is_complex = false;
  return out;
}

namespace {

// Local interpolation uses kQ nodes (degree kQ - 1).
constexpr int kQ = 6;

// Phi_m(z) = int_0^1 exp(-z t) t^m dt for m < kQ, Re z >= 0.
std::array<cplx, kQ> phi_moments(cplx z) {
  std::array<cplx, kQ> p{};
  if (std::abs(z) < 4.0) {
    for (int m = 0; m < kQ; ++m) {
      cplx s = 0, term = 1.0;  // (-z)^k / k!
      for (int k = 0; k < 80; ++k) {
        cplx add = term / static_cast<double>(m + k + 1);
        s += add;
        if (std::abs(add) < 1e-18 * std::max(1.0, std::abs(s))) break;
        term *= -z / static_cast<double>(k + 1);
      }
      p[m] = s;
    }
  } else {
    const cplx e = std::exp(-z);
    p[0] = (1.0 - e) / z;
    for (int m = 1; m < kQ; ++m) p[m] = (static_cast<double>(m) * p[m - 1] - e) / z;
  }
  return p;
}

// Monomial coefficients (in t) of the interpolant through kQ samples.
struct LocalMap {
  std::array<std::array<double, kQ>, kQ> inv;  // a_m = sum_r inv[m][r] f_r
};

LocalMap local_map(const std::vector<double>& x, int s, double origin, double h, bool reversed) {
  Eigen::Matrix<double, kQ, kQ> V;
  for (int r = 0; r < kQ; ++r) {
    double t = reversed ? (origin - x[s + r]) / h : (x[s + r] - origin) / h;
    double p = 1.0;
    for (int m = 0; m < kQ; ++m) {
      V(r, m) = p;
      p *= t;
    }
  }
  Eigen::Matrix<double, kQ, kQ> Vi = V.partialPivLu().inverse();
  LocalMap cm;
  for (int m = 0; m < kQ; ++m)
    for (int r = 0; r < kQ; ++r) cm.inv[m][r] = Vi(m, r);
  return cm;
}

}  // namespace

std::vector<std::vector<cplx>> green_convolve(Side side, double alpha, double xi,
                                              const std::vector<double>& x,
                                              const std::vector<cplx>& f, int nderiv) {
  const int n = static_cast<int>(x.size());
  if (n < kQ) fail("Usage", "green_convolve needs at least 6 X nodes");
  std::vector<std::vector<cplx>> out(nderiv + 1, std::vector<cplx>(n));
  bool any = false;
  for (const auto& v : f) any = any || v != 0.0;
  if (!any) return out;
  auto g = green_coefficients(side, alpha, xi);

  std::vector<cplx> af(kQ * (n - 1)), ab(kQ * (n - 1));
  for (int j = 0; j + 1 < n; ++j) {
    const double h = x[j + 1] - x[j];
    const int s = std::clamp(j - (kQ / 2 - 1), 0, n - kQ);
    auto fm = local_map(x, s, x[j + 1], h, true);
    auto bm = local_map(x, s, x[j], h, false);
    for (int m = 0; m < kQ; ++m) {
      cplx a = 0, c = 0;
      for (int r = 0; r < kQ; ++r) {
        a += fm.inv[m][r] * f[s + r];
        c += bm.inv[m][r] * f[s + r];
      }
      af[kQ * j + m] = a;
      ab[kQ * j + m] = c;
    }
  }

  for (int jm = 0; jm < 2; ++jm) {
    // forward sweep, Z > 0 branch
    {
      const cplx lam = g.lp[jm];
      std::vector<cplx> u(n);
      for (int j = 0; j + 1 < n; ++j) {
        const double h = x[j + 1] - x[j];
        auto P = phi_moments(lam * h);
        cplx loc = 0;
        for (int m = 0; m < kQ; ++m) loc += af[kQ * j + m] * P[m];
        u[j + 1] = std::exp(-lam * h) * u[j] + h * loc;
      }
      cplx w = g.Bp[jm];
      for (int l = 0; l <= nderiv; ++l) {
        for (int i = 0; i < n; ++i) out[l][i] += w * u[i];
        w *= -lam;
      }
    }
    // backward sweep, Z < 0 branch
    {
      const cplx lam = g.lm[jm];
      std::vector<cplx> v(n);
      for (int j = n - 2; j >= 0; --j) {
        const double h = x[j + 1] - x[j];
        auto P = phi_moments(-lam * h);
        cplx loc = 0;
        for (int m = 0; m < kQ; ++m) loc += ab[kQ * j + m] * P[m];
        v[j] = std::exp(lam * h) * v[j + 1] + h * loc;
      }
      cplx w = g.Bm[jm];
      for (int l = 0; l <= nderiv; ++l) {
        for (int i = 0; i < n; ++i) out[l][i] += w * v[i];
        w *= -lam;
      }
    }
  }
  return out;
}

namespace {

std::vector<std::vector<cplx>> row_hats(const std::vector<cplx>& layer, int nx, int ny) {
  std::vector<std::vector<cplx>> h(nx);
  for (int i = 0; i < nx; ++i) {
    std::vector<cplx> r(layer.begin() + static_cast<std::ptrdiff_t>(i) * ny,
                        layer.begin() + static_cast<std::ptrdiff_t>(i + 1) * ny);
    h[i] = fft_forward(r);
  }
  return h;
}

}  // namespace

FieldSlice solve_inhomogeneous(Side side, double alpha, const FieldSlice& F, const SpectralGrid& grid,
                               int nderiv) {
  if (F.x != grid.xgrid || F.ny != grid.N) fail("Usage", "source not sampled on the grid");
  check_decay_certificate(F);
  const int nx = grid.nx(), N = grid.N;
  auto hats = row_hats(F.v, nx, N);
  FieldSlice out(grid.xgrid, N, grid.L);
  out.side = side;
  out.alpha = alpha;
  out.is_complex = F.is_complex;
  std::vector<std::vector<std::vector<cplx>>> cols(N);
  std::vector<cplx> col(nx);
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < nx; ++i) col[i] = hats[i][k];
    auto solve = [&](double xi) { return green_convolve(side, alpha, xi, grid.xgrid, col, nderiv); };
    cols[k] = grid.is_nyquist(k) ? nyquist_average(grid.xi(k), solve) : solve(grid.xi(k));
  }
  synthesise(cols, out, nderiv + 1);
  return out;
}

void check_decay_certificate(const FieldSlice& F) {
  const double fs = F.sup();
  if (fs == 0.0) return;
  if (!(F.decay_rate > 0.0)) fail("DecayViolation", "source carries no positive decay certificate");
  const int nx = F.nx();
  double head = 0.0;
  std::vector<double> s(nx);
  for (int i = 0; i < nx; ++i) {
    double m = 0;
    for (int j = 0; j < F.ny; ++j) m = std::max(m, std::abs(F(i, j)));
    s[i] = m * std::exp(F.decay_rate * F.x[i]);
    if (F.x[i] <= 0.5 * F.x.back()) head = std::max(head, s[i]);
  }
  if (s.back() > 10.0 * head) {
    std::ostringstream os;
    os << "e^{" << F.decay_rate << " X}|F| grows to " << s.back() << " (head " << head << ")";
    fail("DecayViolation", os.str());
  }
}

double quadrature_check(Side side, double alpha, const FieldSlice& F, const SpectralGrid& grid,
                        double tol) {
  auto full = solve_inhomogeneous(side, alpha, F, grid, 0);
  SpectralGrid coarse = grid;
  coarse.xgrid.clear();
  std::vector<int> keep;
  for (int i = 0; i < grid.nx(); i += 2) keep.push_back(i);
  if (keep.back() != grid.nx() - 1) keep.push_back(grid.nx() - 1);
  for (int i : keep) coarse.xgrid.push_back(grid.xgrid[i]);
  FieldSlice Fc(coarse.xgrid, F.ny, F.L);
  Fc.decay_rate = F.decay_rate;
  Fc.is_complex = F.is_complex;
  for (std::size_t r = 0; r < keep.size(); ++r)
    for (int j = 0; j < F.ny; ++j) Fc(static_cast<int>(r), j) = F(keep[r], j);
  auto c = solve_inhomogeneous(side, alpha, Fc, coarse, 0);
  double diff = 0, scale = full.sup();
  for (std::size_t r = 0; r < keep.size(); ++r)
    for (int j = 0; j < F.ny; ++j) diff = std::max(diff, std::abs(c(static_cast<int>(r), j) - full(keep[r], j)));
  const double rel = scale > 0 ? diff / scale : 0.0;
  if (rel > tol) {
    std::ostringstream os;
    os << "halving the X grid changes the result by " << rel;
    fail("QuadratureUnderResolved", os.str());
  }
  return rel;
}

namespace {

// X-derivative layer k of f: stored exactly when available, otherwise finite
// differences on the highest stored layer.
std::vector<cplx> x_layer(const FieldSlice& f, int k, int p, bool use_layers) {
  const int have = use_layers ? static_cast<int>(f.xderiv.size()) : 0;
  if (k <= have) return f.layer(k);
  DiffOp D(f.x, k - have, p);
  return D.apply_layer(f.layer(have), f.ny);
}

}  // namespace

double pde_residual(Side side, double alpha, const FieldSlice& psi, const FieldSlice* F,
                    const SpectralGrid& grid, int p, bool use_layers) {
  const int nx = psi.nx(), N = psi.ny;
  std::vector<std::vector<std::vector<cplx>>> H(5);
  for (int k = 0; k <= 4; ++k) H[k] = row_hats(x_layer(psi, k, p, use_layers), nx, N);
  std::vector<std::vector<cplx>> Fh;
  if (F) Fh = row_hats(F->v, nx, N);
  const double b = 1.0 + alpha * alpha, s = transport_sign(side), sg = sigma(side);
  std::vector<cplx> res(static_cast<std::size_t>(nx) * N), tr(res.size()), bi(res.size());
  std::vector<cplx> rrow(N), trow(N), brow(N);
  for (int i = 0; i < nx; ++i) {
    for (int k = 0; k < N; ++k) {
      // The Nyquist column is a symmetrised average and satisfies no single
      // per-mode equation, so it is left out.
      if (grid.is_nyquist(k)) {
        rrow[k] = trow[k] = brow[k] = 0.0;
        continue;
      }
      const double xi = grid.xi(k);
      const cplx beta = -2.0 * I1 * sg * alpha * xi;
      const double x2 = xi * xi;
      brow[k] = b * b * H[4][i][k] + 2.0 * b * beta * H[3][i][k] + (beta * beta - 2.0 * b * x2) * H[2][i][k] -
                2.0 * beta * x2 * H[1][i][k] + x2 * x2 * H[0][i][k];
      trow[k] = s * H[1][i][k];
      rrow[k] = trow[k] - brow[k] - (F ? Fh[i][k] : cplx(0.0));
    }
    auto a = fft_backward(rrow), t = fft_backward(trow), c = fft_backward(brow);
    std::copy(a.begin(), a.end(), res.begin() + static_cast<std::ptrdiff_t>(i) * N);
    std::copy(t.begin(), t.end(), tr.begin() + static_cast<std::ptrdiff_t>(i) * N);
    std::copy(c.begin(), c.end(), bi.begin() + static_cast<std::ptrdiff_t>(i) * N);
  }
  double r = 0, st = 0, sb = 0;
  for (std::size_t q = 0; q < res.size(); ++q) {
    r = std::max(r, std::abs(res[q]));
    st = std::max(st, std::abs(tr[q]));
    sb = std::max(sb, std::abs(bi[q]));
  }
  const double sc = std::max(st, sb);
  return sc > 0 ? r / sc : r;
}

double column_residual(Side side, double alpha, double xi, const std::vector<double>& x,
                       const std::vector<cplx>& u, const std::vector<cplx>& f, int p) {
  std::vector<std::vector<cplx>> D(5);
  D[0] = u;
  for (int k = 1; k <= 4; ++k) D[k] = DiffOp(x, k, p).apply(u);
  const double b = 1.0 + alpha * alpha, s = transport_sign(side);
  const cplx beta = -2.0 * I1 * sigma(side) * alpha * xi;
  const double x2 = xi * xi;
  double r = 0, sc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cplx lap2 = b * b * D[4][i] + 2.0 * b * beta * D[3][i] + (beta * beta - 2.0 * b * x2) * D[2][i] -
                2.0 * beta * x2 * D[1][i] + x2 * x2 * D[0][i];
    cplx t = s * D[1][i];
    r = std::max(r, std::abs(t - lap2 - f[i]));
    sc = std::max({sc, std::abs(t), std::abs(lap2)});
  }
  return sc > 0 ? r / sc : r;
}

Jet make_jet(const FieldSlice& f, const SpectralGrid& grid, int order) {
  Jet j;
  j.order = order;
  j.nx = f.nx();
  j.ny = f.ny;
  j.J.resize(order + 1);
  for (int a = 0; a <= order; ++a) {
    auto base = x_layer(f, a, 4, true);
    j.J[a].resize(order + 1 - a);
    j.J[a][0] = base;
    for (int b = 1; b + a <= order; ++b) j.J[a][b] = dy_layer(base, j.nx, j.ny, grid.L, b);
  }
  return j;
}

namespace {

Jet empty_like(const Jet& a, int order) {
  Jet r;
  r.order = order;
  r.nx = a.nx;
  r.ny = a.ny;
  r.J.resize(order + 1);
  const std::size_t sz = static_cast<std::size_t>(a.nx) * a.ny;
  for (int p = 0; p <= order; ++p) r.J[p].assign(order + 1 - p, std::vector<cplx>(sz));
  return r;
}

void axpy(std::vector<cplx>& y, cplx a, const std::vector<cplx>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// D1 = s dX
Jet d1(const Jet& f, double s) {
  Jet r = empty_like(f, f.order - 1);
  for (int a = 0; a <= r.order; ++a)
    for (int b = 0; a + b <= r.order; ++b) axpy(r.J[a][b], s, f.J[a + 1][b]);
  return r;
}

// D2 = dY - sigma a dX
Jet d2(const Jet& f, double sa) {
  Jet r = empty_like(f, f.order - 1);
  for (int a = 0; a <= r.order; ++a)
    for (int b = 0; a + b <= r.order; ++b) {
      axpy(r.J[a][b], 1.0, f.J[a][b + 1]);
      axpy(r.J[a][b], -sa, f.J[a + 1][b]);
    }
  return r;
}

double binom(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Leibniz rule in both variables.
Jet mul(const Jet& f, const Jet& g) {
  Jet r = empty_like(f, std::min(f.order, g.order));
  const std::size_t sz = static_cast<std::size_t>(f.nx) * f.ny;
  for (int a = 0; a <= r.order; ++a)
    for (int b = 0; a + b <= r.order; ++b) {
      auto& out = r.J[a][b];
      for (int i = 0; i <= a; ++i)
        for (int j = 0; j <= b; ++j) {
          const double c = binom(a, i) * binom(b, j);
          const auto& x = f.J[i][j];
          const auto& y = g.J[a - i][b - j];
          for (std::size_t q = 0; q < sz; ++q) out[q] += c * x[q] * y[q];
        }
    }
  return r;
}

Jet add(const Jet& f, const Jet& g, double cf = 1.0, double cg = 1.0) {
  Jet r = empty_like(f, std::min(f.order, g.order));
  for (int a = 0; a <= r.order; ++a)
    for (int b = 0; a + b <= r.order; ++b) {
      axpy(r.J[a][b], cf, f.J[a][b]);
      axpy(r.J[a][b], cg, g.J[a][b]);
    }
  return r;
}

void require_band_limited(const FieldSlice& f) {
  const double h = high_band_fraction(f.v, f.nx(), f.ny);
  if (h > 1e-10) {
    std::ostringstream os;
    os << "top third of the Y spectrum carries relative weight " << h;
    fail("AliasRisk", os.str());
  }
}

FieldSlice jet_to_field(const Jet& q, const FieldSlice& meta) {
  FieldSlice out = like(meta);
  out.v = dealias_layer(q.J[0][0], q.nx, q.ny);
  return out;
}

}  // namespace

FieldSlice Qw_nonlinearity(const FieldSlice& psi, const FieldSlice& psit, double alpha,
                           const SpectralGrid& grid) {
  require_band_limited(psi);
  require_band_limited(psit);
  const double s = transport_sign(psi.side), sa = sigma(psi.side) * alpha;
  Jet P = make_jet(psi, grid, 3), T = make_jet(psit, grid, 3);
  // u = perp P = (-u1, u2) and v = perp T = (-v1, v2); the minus signs are
  // folded into the coefficients below.
  Jet u1 = d2(P, sa), u2 = d1(P, s);
  Jet v1 = d2(T, sa), v2 = d1(T, s);
  Jet w1 = add(mul(u1, d1(v1, s)), mul(u2, d2(v1, sa)), 1.0, -1.0);
  Jet w2 = add(mul(u1, d1(v2, s)), mul(u2, d2(v2, sa)), -1.0, 1.0);
  // Q = -D2 w1 + D1 w2
  Jet q = add(d2(w1, sa), d1(w2, s), -1.0, 1.0);
  return jet_to_field(q, psi);
}

FieldSlice Qw_divergence_form(const FieldSlice& psi, double alpha, const SpectralGrid& grid) {
  require_band_limited(psi);
  const double s = transport_sign(psi.side), sa = sigma(psi.side) * alpha;
  Jet P = make_jet(psi, grid, 3);
  Jet u1 = d2(P, sa), u2 = d1(P, s);  // perp P = (-u1, u2)
  Jet om = add(d1(d1(P, s), s), d2(d2(P, sa), sa));
  Jet q = add(d1(mul(u1, om), s), d2(mul(u2, om), sa), -1.0, 1.0);
  return jet_to_field(q, psi);
}

void band_limit(FieldSlice& f) {
  f.v = dealias_layer(f.v, f.nx(), f.ny);
  for (auto& l : f.xderiv) l = dealias_layer(l, f.nx(), f.ny);
}

double weighted_h2_norm(const FieldSlice& f, const SpectralGrid& grid, double delta) {
  Jet j = make_jet(f, grid, 2);
  double best = 0;
  for (int i = 0; i < j.nx; ++i) {
    double s = 0;
    for (int a = 0; a <= 2; ++a)
      for (int b = 0; a + b <= 2; ++b)
        for (int q = 0; q < j.ny; ++q) s += std::norm(j.J[a][b][static_cast<std::size_t>(i) * j.ny + q]);
    best = std::max(best, std::exp(delta * f.x[i]) * std::sqrt(s * grid.dy()));
  }
  return best;
}

nlohmann::json IterTrace::to_json() const {
  return {{"increments", increments}, {"ratios", ratios}, {"iterations", iterations},
          {"converged", converged}, {"residual", residual}};
}

double trace_size(const BoundaryTrace& t, double L) {
  const int N = t.size();
  auto h0 = fft_forward(t.psi0), h1 = fft_forward(t.psi1);
  SpectralGrid g;
  g.L = L;
  g.N = N;
  double s0 = 0, s1 = 0;
  for (int k = 0; k < N; ++k) {
    const double w = 1.0 + sqr(g.xi(k));
    s0 += std::pow(w, 1.5) * std::norm(h0[k]);
    s1 += std::pow(w, 0.5) * std::norm(h1[k]);
  }
  return std::sqrt(s0) + std::sqrt(s1);
}

double delta_min(Side side, double alpha, const SpectralGrid& grid) {
  double d = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= grid.N / 2; ++k) {
    auto lam = decaying_modes(side, alpha, grid.xi(k));
    if (side == Side::West) d = std::min({d, lam[0].real(), lam[1].real()});
    else d = std::min(d, lam[1].real());
  }
  return d;
}

namespace {

FieldSlice diff(const FieldSlice& a, const FieldSlice& b) {
  FieldSlice r = a;
  for (std::size_t q = 0; q < r.v.size(); ++q) r.v[q] -= b.v[q];
  for (std::size_t l = 0; l < r.xderiv.size(); ++l)
    for (std::size_t q = 0; q < r.v.size(); ++q) r.xderiv[l][q] -= b.xderiv[l][q];
  return r;
}

FieldSlice sum(const FieldSlice& a, const FieldSlice& b) {
  FieldSlice r = a;
  for (std::size_t q = 0; q < r.v.size(); ++q) r.v[q] += b.v[q];
  for (std::size_t l = 0; l < r.xderiv.size(); ++l)
    for (std::size_t q = 0; q < r.v.size(); ++q) r.xderiv[l][q] += b.xderiv[l][q];
  return r;
}

}  // namespace

std::pair<FieldSlice, IterTrace> picard_solve(Side side, double alpha, const BoundaryTrace& trace,
                                              const SpectralGrid& grid, const PicardOptions& opt) {
  const double size = trace_size(trace, grid.L);
  if (size > opt.delta0) {
    std::ostringstream os;
    os << "data size " << size << " above delta0 = " << opt.delta0;
    fail("SmallnessViolation", os.str());
  }
  if (opt.mode == PicardMode::Linearized && !opt.background)
    fail("Usage", "linearized mode needs a background field");
  const double dmin = delta_min(side, alpha, grid);
  const double delta = 0.5 * dmin;
  auto h0 = fft_forward(trace.psi0), h1 = fft_forward(trace.psi1);
  FieldSlice cur = solve_homogeneous(side, alpha, trace, grid);
  require_band_limited(cur);

  IterTrace tr;
  int bad = 0;
  double prev = -1;
  for (int it = 1; it <= opt.max_iter; ++it) {
    FieldSlice F;
    if (opt.mode == PicardMode::Nonlinear) {
      F = Qw_nonlinearity(cur, cur, alpha, grid);
    } else {
      F = Qw_nonlinearity(*opt.background, cur, alpha, grid);
      auto G = Qw_nonlinearity(cur, *opt.background, alpha, grid);
      for (std::size_t q = 0; q < F.v.size(); ++q) F.v[q] += G.v[q];
    }
    for (auto& z : F.v) z = -z;
    F.decay_rate = opt.mode == PicardMode::Nonlinear ? 2.0 * delta : delta;
    FieldSlice PF = solve_inhomogeneous(side, alpha, F, grid);
    std::vector<cplx> c0(grid.N), c1(grid.N);
    auto pf0 = fft_forward(PF.row(0));
    auto pf1 = fft_forward(std::vector<cplx>(PF.xderiv[0].begin(), PF.xderiv[0].begin() + grid.N));
    for (int k = 0; k < grid.N; ++k) {
      c0[k] = h0[k] - pf0[k];
      c1[k] = h1[k] - pf1[k];
    }
    FieldSlice next = sum(PF, solve_homogeneous_hat(side, alpha, c0, c1, grid));
    next.is_complex = false;
    const double inc = weighted_h2_norm(diff(next, cur), grid, delta);
    const double nrm = weighted_h2_norm(next, grid, delta);
    tr.increments.push_back(inc);
    if (prev > 0) {
      const double r = inc / prev;
      tr.ratios.push_back(r);
      bad = r >= 1.0 ? bad + 1 : 0;
    }
    prev = inc;
    cur = std::move(next);
    tr.iterations = it;
    tr.residual = nrm > 0 ? inc / nrm : inc;
    if (inc == 0.0 || tr.residual <= opt.tol) {
      tr.converged = true;
      return {cur, tr};
    }
    if (bad >= 3) {
      std::ostringstream os;
      os << "ratio >= 1 for 3 consecutive iterates at iteration " << it;
      fail("ContractionFailure", os.str());
    }
  }
  fail("MaxIter", "Picard iteration did not reach tolerance");
}

double fit_decay_rate(const FieldSlice& f, double x0, double x1) {
  const int nx = f.nx();
  std::vector<double> env(nx);
  for (int i = 0; i < nx; ++i) {
    double m = 0;
    for (int j = 0; j < f.ny; ++j) m = std::max(m, std::abs(f(i, j)));
    env[i] = m;
  }
  for (int i = nx - 2; i >= 0; --i) env[i] = std::max(env[i], env[i + 1]);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int i = 0; i < nx; ++i) {
    if (f.x[i] < x0 || f.x[i] > x1 || !(env[i] > 0)) continue;
    const double y = std::log(env[i]);
    sx += f.x[i];
    sy += y;
    sxx += f.x[i] * f.x[i];
    sxy += f.x[i] * y;
    ++n;
  }
  if (n < 2) fail("FitDegenerate", "fewer than two samples in the decay window");
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return -slope;
}

double chi_cut(double xi, double xi0) {
  const double a = std::abs(xi);
  if (a <= 0.5 * xi0) return 1.0;
  if (a >= xi0) return 0.0;
  const double t = (a - 0.5 * xi0) / (0.5 * xi0);
  auto f = [](double s) { return s > 0 ? std::exp(-1.0 / s) : 0.0; };
  return f(1.0 - t) / (f(1.0 - t) + f(t));
}

nlohmann::json DecayReport::to_json() const {
  return {{"side", to_string(side)}, {"alpha", alpha}, {"n", n}, {"C", C}, {"delta", delta},
          {"mass_err", mass_err}, {"moment_err", moment_err}, {"ok", ok}};
}

DecayReport kernel_decay_report(Side side, double alpha, const SpectralGrid& grid, int n, int branch,
                                double zmin, double zmax) {
  if (n < 2 || n > 5) fail("Usage", "n must lie in 2..5");
  DecayReport rep;
  rep.side = side;
  rep.alpha = alpha;
  rep.n = n;
  const int N = grid.N;
  std::vector<std::array<cplx, 2>> lam(N);
  std::vector<double> chi(N);
  for (int k = 0; k < N; ++k) {
    chi[k] = chi_cut(grid.xi(k), grid.chi_cutoff);
    if (chi[k] > 0) lam[k] = decaying_modes(side, alpha, grid.xi(k));
  }
  const bool algebraic = side == Side::East && branch == 0;
  auto zs = linspace(zmin, zmax, 40);
  std::vector<double> env(zs.size());
  std::vector<std::vector<double>> absK(zs.size());
  for (std::size_t iz = 0; iz < zs.size(); ++iz) {
    std::vector<cplx> kh(N), dkh(N);
    for (int k = 0; k < N; ++k) {
      if (chi[k] == 0 || grid.is_nyquist(k)) continue;
      kh[k] = chi[k] * std::exp(-lam[k][branch] * zs[iz]) / grid.L;
      dkh[k] = I1 * grid.xi(k) * kh[k];
    }
    auto K = fft_backward(kh), dK = fft_backward(dkh);
    // Y-moment with the periodic weight (L/2pi) sin(2 pi Y / L), which is Y
    // near the origin; a sawtooth Y would add a boundary term on the torus.
    cplx mass = 0, moment = 0;
    double m = 0;
    absK[iz].resize(N);
    for (int j = 0; j < N; ++j) {
      const double wy = grid.L / (2 * kPi) * std::sin(2 * kPi * grid.y(j) / grid.L);
      mass += K[j] * grid.dy();
      moment += wy * dK[j] * grid.dy();
      absK[iz][j] = std::abs(K[j]);
      m = std::max(m, absK[iz][j]);
    }
    const cplx expect = chi[0] * std::exp(-lam[0][branch] * zs[iz]);
    rep.mass_err = std::max(rep.mass_err, std::abs(mass - expect));
    rep.moment_err = std::max(rep.moment_err, std::abs(moment + mass));
    env[iz] = m;
  }
  for (int i = static_cast<int>(env.size()) - 2; i >= 0; --i) env[i] = std::max(env[i], env[i + 1]);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double y = std::log(env[i]);
    sx += zs[i];
    sy += y;
    sxx += zs[i] * zs[i];
    sxy += zs[i] * y;
  }
  const double nz = static_cast<double>(zs.size());
  rep.delta = algebraic ? 0.0 : -(nz * sxy - sx * sy) / (nz * sxx - sx * sx);
  for (std::size_t iz = 0; iz < zs.size(); ++iz) {
    const double z = zs[iz];
    for (int j = 0; j < N; ++j) {
      const double y = std::abs(j < N / 2 ? grid.y(j) : grid.y(j) - grid.L);
      const double w = algebraic ? (std::pow(z, n / 4.0) + std::pow(y, n)) / std::pow(z, (n - 1) / 4.0)
                                 : std::exp(rep.delta * z) * std::pow(1.0 + y, n);
      rep.C = std::max(rep.C, absK[iz][j] * w);
    }
  }
  rep.ok = std::isfinite(rep.C) && (algebraic || rep.delta > 0);
  if (!rep.ok) {
    std::ostringstream os;
    os << "envelope fit failed: C=" << rep.C << " delta=" << rep.delta;
    fail("EnvelopeViolation", os.str());
  }
  return rep;
}

CancellationReport regularity_cancellation_check(double alpha, cplx psi0h, cplx psi1h, int k,
                                                 double xmin, double xmax, int n, double bound) {
  if (k < 0 || k > 2) fail("Usage", "k must lie in 0..2");
  CancellationReport rep;
  rep.k = k;
  double lo = std::numeric_limits<double>::infinity();
  for (double xi : logspace(xmin, xmax, n)) {
    auto lam = decaying_modes(Side::West, alpha, xi);
    auto A = mode_coefficients(lam, psi0h, psi1h);
    cplx I = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) I += A[i] * std::conj(A[j]) / (lam[i] + std::conj(lam[j]));
    const double num = std::pow(xi, 2 * k) * I.real();
    const double den = std::pow(xi, 2 * k - 1) * std::norm(psi0h) + std::pow(xi, 2 * k - 3) * std::norm(psi1h);
    const double r = num / den;
    rep.xis.push_back(xi);
    rep.ratios.push_back(r);
    rep.max_ratio = std::max(rep.max_ratio, r);
    lo = std::min(lo, r);
  }
  rep.spread = rep.max_ratio / lo;
  rep.ok = rep.max_ratio <= bound && rep.spread <= 10.0;
  if (!rep.ok) {
    std::ostringstream os;
    os << "ratio max " << rep.max_ratio << " spread " << rep.spread;
    fail("CancellationFailure", os.str());
  }
  return rep;
}

}  // namespace blt

namespace blt {

std::vector<cplx> boundary_quadratic_term(const FieldSlice& psi, const FieldSlice& background,
                                          double alpha, const SpectralGrid& grid) {
  const double s = transport_sign(psi.side), sa = sigma(psi.side) * alpha;
  const double b = 1.0 + alpha * alpha;
  Jet P = make_jet(psi, grid, 2), B = make_jet(background, grid, 2);
  // T f = (b D1 - a dY) f; dY is d2 with no shear.
  auto T = [&](const Jet& f) { return add(d1(f, s), d2(f, 0.0), b, -alpha); };
  // (perp f . grad) g = -D2 f D1 g + D1 f D2 g
  auto adv = [&](const Jet& f, const Jet& g) {
    return add(mul(d2(f, sa), d1(g, s)), mul(d1(f, s), d2(g, sa)), -1.0, 1.0);
  };
  Jet q = add(adv(P, T(B)), adv(B, T(P)));
  return {q.J[0][0].begin(), q.J[0][0].begin() + psi.ny};
}

}  // namespace blt
