#include "blt/channel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "blt/charpoly.hpp"
#include "blt/steklov.hpp"

namespace blt {

namespace {

double sigma(Side s) { return s == Side::West ? 1.0 : -1.0; }
// A2 = +b Lap west, -b Lap east
double row2_sign(Side s) { return s == Side::West ? 1.0 : -1.0; }

std::vector<double> spectral_dy(const std::vector<double>& f, double L, int d) {
  if (d == 0) return f;
  const int n = static_cast<int>(f.size());
  auto r = dy_layer(to_complex(f), 1, n, L, d);
  return real_part(r);
}

double sup_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::vector<cplx> hat_or_zero(const std::vector<double>& f, int N) {
  if (f.empty()) return std::vector<cplx>(N);
  if (static_cast<int>(f.size()) != N) fail("Usage", "boundary data length differs from N");
  return fft_forward(f);
}

// Per-mode boundary rows of a column with values u[0..3] = d^k u at the point.
std::pair<cplx, cplx> mode_rows(Side side, double alpha, double xi, const cplx* u) {
  const double b = 1.0 + alpha * alpha, sg = sigma(side);
  const cplx c1 = -2.0 * I1 * sg * alpha * xi;
  const cplx D = b * u[2] + c1 * u[1] - xi * xi * u[0];
  const cplx Dp = b * u[3] + c1 * u[2] - xi * xi * u[1];
  const cplx r2 = row2_sign(side) * b * D;
  const cplx r3 = -(b * Dp - 2.0 * alpha * I1 * xi * D) + 0.5 * u[0];
  return {r2, r3};
}

// Binomial for small integers.
double binom(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double factorial(int n) {
  double r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// d^a/dX^a of chi(X) X^k / k!, X >= 0.
double lift_basis(double X, double M, int k, int a) {
  double s = 0;
  for (int i = 0; i <= a; ++i) {
    const int m = a - i;
    if (m > k) continue;
    const double c = lift_cutoff(X, M, i);
    if (c == 0.0) continue;
    s += binom(a, i) * c * std::pow(X, k - m) / factorial(k - m);
  }
  return s;
}

void synthesise(const std::vector<std::vector<std::vector<cplx>>>& cols, FieldSlice& out) {
  const int nx = out.nx(), ny = out.ny, nl = static_cast<int>(cols[0].size());
  out.xderiv.assign(nl - 1, std::vector<cplx>(out.v.size()));
  std::vector<cplx> row(ny);
  for (int l = 0; l < nl; ++l) {
    auto& dst = l == 0 ? out.v : out.xderiv[l - 1];
    for (int i = 0; i < nx; ++i) {
      for (int k = 0; k < ny; ++k) row[k] = cols[k][l][i];
      auto phys = fft_backward(row);
      for (int j = 0; j < ny; ++j) dst[static_cast<std::size_t>(i) * ny + j] = phys[j].real();
    }
  }
}

struct ModeData {
  std::array<cplx, 4> g{};
  cplx rho2 = 0, rho3 = 0;
  bool coupled = true;
  bool traces = false;
  cplx psi0 = 0, psi1 = 0;
  const std::vector<cplx>* fl = nullptr;   // source on the left layout nodes
  const std::vector<cplx>* fr = nullptr;
};

// One Fourier column of the flat channel. eval holds the X points; when
// on_layout the first n_left entries belong to the left piece (the source
// lives there), otherwise X < 0 selects the left piece.
std::vector<std::vector<cplx>> solve_mode(Side side, double alpha, double xi, const ChannelLayout& lay,
                                          const std::vector<double>& xl, const std::vector<double>& xr,
                                          const ModeData& d, const std::vector<double>& eval,
                                          bool on_layout) {
  const auto roots = solve_quartic(quartic_coeffs(side, alpha, xi)).all;
  const double a = -lay.gamma0, M = lay.M;
  auto anchor = [&](const cplx& r, double lo, double hi) { return r.real() >= 0 ? lo : hi; };
  // phi^(k)(X) of basis m on the interval [lo, hi]
  auto basis = [&](int m, double lo, double hi, double X, int k) {
    const cplx r = roots[m];
    return std::pow(-r, k) * std::exp(-r * (X - anchor(r, lo, hi)));
  };

  std::vector<std::vector<cplx>> pl(4, std::vector<cplx>(xl.size())), pr(4, std::vector<cplx>(xr.size()));
  if (d.fl) pl = green_convolve(side, alpha, xi, xl, *d.fl, 3);
  if (d.fr) pr = green_convolve(side, alpha, xi, xr, *d.fr, 3);

  Eigen::Matrix<cplx, 8, 8> E = Eigen::Matrix<cplx, 8, 8>::Zero();
  Eigen::Matrix<cplx, 8, 1> rhs = Eigen::Matrix<cplx, 8, 1>::Zero();
  for (int m = 0; m < 4; ++m) {
    E(0, m) = basis(m, a, 0.0, a, 0);
    E(1, m) = basis(m, a, 0.0, a, 1);
    for (int k = 0; k < 4; ++k) {
      E(2 + k, 4 + m) = basis(m, 0.0, M, 0.0, k);
      E(2 + k, m) = -basis(m, a, 0.0, 0.0, k);
    }
  }
  rhs(0) = -pl[0].front();
  rhs(1) = -pl[1].front();
  for (int k = 0; k < 4; ++k) rhs(2 + k) = d.g[k] - pr[k].front() + pl[k].back();

  Eigen::Matrix2cd S = Eigen::Matrix2cd::Zero();
  if (d.coupled && !d.traces) S = symbol(side, alpha, xi);
  auto top_rows = [&](const cplx* u) {
    if (d.traces) return std::pair{u[0], u[1]};
    auto [r2, r3] = mode_rows(side, alpha, xi, u);
    r2 -= S(0, 0) * u[0] + S(0, 1) * u[1];
    r3 -= S(1, 0) * u[0] + S(1, 1) * u[1];
    return std::pair{r2, r3};
  };
  for (int m = 0; m < 4; ++m) {
    cplx u[4];
    for (int k = 0; k < 4; ++k) u[k] = basis(m, 0.0, M, M, k);
    auto [r2, r3] = top_rows(u);
    E(6, 4 + m) = r2;
    E(7, 4 + m) = r3;
  }
  {
    cplx u[4];
    for (int k = 0; k < 4; ++k) u[k] = pr[k].back();
    auto [r2, r3] = top_rows(u);
    rhs(6) = (d.traces ? d.psi0 : d.rho2) - r2;
    rhs(7) = (d.traces ? d.psi1 : d.rho3) - r3;
  }
  // Row equilibration before the conditioning test.
  for (int r = 0; r < 8; ++r) {
    const double s = E.row(r).cwiseAbs().maxCoeff();
    if (s > 0) {
      E.row(r) /= s;
      rhs(r) /= s;
    }
  }
  Eigen::PartialPivLU<Eigen::Matrix<cplx, 8, 8>> lu(E);
  if (!(lu.rcond() > 1e-15)) {
    std::ostringstream os;
    os << "channel mode system singular at xi = " << xi << " (rcond " << lu.rcond() << ")";
    fail("SingularSystem", os.str());
  }
  Eigen::Matrix<cplx, 8, 1> c = lu.solve(rhs);

  const int ne = static_cast<int>(eval.size());
  std::vector<std::vector<cplx>> out(4, std::vector<cplx>(ne));
  for (int i = 0; i < ne; ++i) {
    const bool left = on_layout ? i < lay.n_left : eval[i] < 0.0;
    const double lo = left ? a : 0.0, hi = left ? 0.0 : M;
    for (int k = 0; k < 4; ++k) {
      cplx s = 0;
      for (int m = 0; m < 4; ++m) s += c(left ? m : 4 + m) * basis(m, lo, hi, eval[i], k);
      if (on_layout) s += left ? pl[k][i] : pr[k][i - lay.n_left];
      out[k][i] = s;
    }
  }
  return out;
}

FieldSlice flat_solve(Side side, double alpha, const ChannelLayout& lay, const Jumps& g,
                      const SteklovRows& rows, const SpectralGrid& grid, const FieldSlice* F,
                      const std::vector<double>& eval, bool on_layout) {
  const int N = grid.N;
  if (lay.M <= 0 || lay.gamma0 <= 0) fail("Usage", "channel needs M > 0 and gamma0 > 0");
  if (lay.n_left < 6 || lay.n_right < 6) fail("Usage", "channel layout needs at least 6 nodes per piece");
  std::array<std::vector<cplx>, 4> gh;
  for (int k = 0; k < 4; ++k) gh[k] = hat_or_zero(g[k], N);
  auto r2h = hat_or_zero(rows.rho2, N), r3h = hat_or_zero(rows.rho3, N);
  auto p0h = hat_or_zero(rows.psi0, N), p1h = hat_or_zero(rows.psi1, N);
  const auto xl = linspace(-lay.gamma0, 0.0, lay.n_left), xr = linspace(0.0, lay.M, lay.n_right);

  // source columns: fh[k][i]
  std::vector<std::vector<cplx>> flh, frh;
  if (F) {
    if (!on_layout) fail("Usage", "a channel source needs the layout nodes");
    if (F->nx() != lay.n_left + lay.n_right || F->ny != N) fail("Usage", "source shape differs from layout");
    flh.assign(N, std::vector<cplx>(lay.n_left));
    frh.assign(N, std::vector<cplx>(lay.n_right));
    for (int i = 0; i < F->nx(); ++i) {
      auto h = fft_forward(F->row(i));
      for (int k = 0; k < N; ++k) {
        if (i < lay.n_left) flh[k][i] = h[k];
        else frh[k][i - lay.n_left] = h[k];
      }
    }
  }

  std::vector<std::vector<std::vector<cplx>>> cols(N);
  for (int k = 0; k < N; ++k) {
    ModeData d;
    for (int q = 0; q < 4; ++q) d.g[q] = gh[q][k];
    d.rho2 = r2h[k];
    d.rho3 = r3h[k];
    d.coupled = rows.coupled;
    d.traces = rows.traces;
    d.psi0 = p0h[k];
    d.psi1 = p1h[k];
    if (F) {
      d.fl = &flh[k];
      d.fr = &frh[k];
    }
    auto one = [&](double xi) { return solve_mode(side, alpha, xi, lay, xl, xr, d, eval, on_layout); };
    if (grid.is_nyquist(k)) {
      auto a = one(grid.xi(k)), b = one(-grid.xi(k));
      for (int l = 0; l < 4; ++l)
        for (std::size_t i = 0; i < a[l].size(); ++i) a[l][i] = 0.5 * (a[l][i] + b[l][i]);
      cols[k] = std::move(a);
    } else {
      cols[k] = one(grid.xi(k));
    }
  }
  FieldSlice out(eval, N, grid.L);
  out.side = side;
  out.alpha = alpha;
  synthesise(cols, out);
  return out;
}

// Per-mode rows from physical derivative rows d[k] (k = 0..3) at one X.
std::pair<std::vector<double>, std::vector<double>> rows_from_derivs(
    Side side, double alpha, const std::array<std::vector<double>, 4>& d, double L) {
  const int N = static_cast<int>(d[0].size());
  std::array<std::vector<cplx>, 4> h;
  for (int k = 0; k < 4; ++k) h[k] = fft_forward(d[k]);
  std::vector<cplx> r2(N), r3(N);
  for (int q = 0; q < N; ++q) {
    const int w = q < N / 2 ? q : q - N;
    const double xi = 2.0 * kPi * w / L;
    const cplx u[4] = {h[0][q], h[1][q], h[2][q], h[3][q]};
    if (q == N / 2) {
      // Nyquist: real operator, keep the real part of the symbol
      auto [a2, a3] = mode_rows(side, alpha, xi, u);
      auto [b2, b3] = mode_rows(side, alpha, -xi, u);
      r2[q] = 0.5 * (a2 + b2);
      r3[q] = 0.5 * (a3 + b3);
    } else {
      std::tie(r2[q], r3[q]) = mode_rows(side, alpha, xi, u);
    }
  }
  return {real_part(fft_backward(r2)), real_part(fft_backward(r3))};
}

std::array<std::vector<double>, 4> field_derivs_at(const FieldSlice& f, int row) {
  if (f.xderiv.size() < 3) fail("Usage", "boundary rows need three dX layers");
  std::array<std::vector<double>, 4> d;
  for (int k = 0; k < 4; ++k) {
    const auto& lay = f.layer(k);
    d[k].resize(f.ny);
    for (int j = 0; j < f.ny; ++j) d[k][j] = lay[static_cast<std::size_t>(row) * f.ny + j].real();
  }
  return d;
}

// Zero |k| >= N/3 of a real row.
std::vector<double> dealias_row(const std::vector<double>& f) {
  const int n = static_cast<int>(f.size());
  return real_part(dealias_layer(to_complex(f), 1, n));
}

std::vector<double> quadratic_terms(Side side, double alpha, const std::array<std::vector<double>, 4>& d,
                                    double L) {
  const double s = transport_sign(side), sa = sigma(side) * alpha, b = 1.0 + alpha * alpha;
  const int N = static_cast<int>(d[0].size());
  // P[a][c] = dX^a dY^c Psi, a + c <= 2
  std::vector<double> P[3][3];
  for (int a = 0; a <= 2; ++a)
    for (int c = 0; a + c <= 2; ++c) P[a][c] = spectral_dy(d[a], L, c);
  std::vector<double> out(N), half_sq(N);
  for (int j = 0; j < N; ++j) {
    // D1 = s dX, D2 = dY - sa dX, T = b dX - a dY (T has no transport sign)
    const double D1 = s * P[1][0][j], D2 = P[0][1][j] - sa * P[1][0][j];
    const double T_x = b * P[2][0][j] - alpha * P[1][1][j];
    const double T_y = b * P[1][1][j] - alpha * P[0][2][j];
    const double D1T = s * T_x, D2T = T_y - sa * T_x;
    half_sq[j] = 0.5 * (D1 * D1 + D2 * D2);
    out[j] = -D2 * D1T + D1 * D2T;
  }
  auto dy = spectral_dy(half_sq, L, 1);
  for (int j = 0; j < N; ++j) out[j] += dy[j];
  return dealias_row(out);
}

FieldSlice diff_fields(const FieldSlice& a, const FieldSlice& b) {
  FieldSlice r = a;
  for (std::size_t q = 0; q < r.v.size(); ++q) r.v[q] -= b.v[q];
  for (std::size_t l = 0; l < r.xderiv.size(); ++l)
    for (std::size_t q = 0; q < r.v.size(); ++q) r.xderiv[l][q] -= b.xderiv[l][q];
  return r;
}

// Trapezoid in X of a per-node quantity, skipping the zero-width segment at
// the doubled interface node.
template <class Fn>
double x_integral(const std::vector<double>& x, Fn&& w) {
  double s = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) s += 0.5 * (x[i + 1] - x[i]) * (w(i) + w(i + 1));
  return s;
}

}  // namespace

// ---------------------------------------------------------------- profiles

RoughProfile RoughProfile::flat(double gamma0, int N, double L) {
  RoughProfile p;
  p.L = L;
  p.gamma.assign(N, gamma0);
  return p;
}

RoughProfile RoughProfile::random(double gamma0, double amp, int modes, int N, double L,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RoughProfile p = flat(gamma0, N, L);
  double norm = 0;
  std::vector<double> c(modes), ph(modes);
  for (int m = 0; m < modes; ++m) {
    c[m] = u(rng) / (1.0 + m);
    ph[m] = 2.0 * kPi * u(rng);
    norm += c[m];
  }
  for (int j = 0; j < N; ++j) {
    const double y = j * L / N;
    double s = 0;
    for (int m = 0; m < modes; ++m) s += c[m] * std::sin(2.0 * kPi * (m + 1) * y / L + ph[m]);
    p.gamma[j] += amp * s / std::max(norm, 1e-300);
  }
  return p;
}

bool RoughProfile::is_flat() const {
  if (gamma.empty()) return true;
  const auto [lo, hi] = std::minmax_element(gamma.begin(), gamma.end());
  return *hi - *lo <= 1e-14 * std::max(1.0, std::abs(*hi));
}

std::vector<double> RoughProfile::slope() const { return spectral_dy(gamma, L, 1); }

double RoughProfile::lipschitz() const { return sup_abs(slope()); }

void RoughProfile::validate() const {
  if (gamma.empty() || L <= 0) fail("Usage", "empty rough profile");
  const double lo = *std::min_element(gamma.begin(), gamma.end());
  if (!(lo > 0)) {
    std::ostringstream os;
    os << "wall depth must stay positive, inf gamma = " << lo;
    fail("Usage", os.str());
  }
}

Jumps zero_jumps(int N) {
  Jumps g;
  for (auto& v : g) v.assign(N, 0.0);
  return g;
}

std::vector<double> ChannelLayout::xs() const {
  auto xl = linspace(-gamma0, 0.0, n_left), xr = linspace(0.0, M, n_right);
  xl.insert(xl.end(), xr.begin(), xr.end());
  return xl;
}

// ---------------------------------------------------------------- lift

double lift_cutoff(double X, double M, int deriv) {
  const double a = 0.0, w = 0.5 * M;
  if (X <= a) return deriv == 0 ? 1.0 : 0.0;
  if (X >= a + w) return 0.0;
  const double t = (X - a) / w;
  // S(t) = 126 t^5 - 420 t^6 + 540 t^7 - 315 t^8 + 70 t^9, C^4 at both ends
  static const double c[10] = {0, 0, 0, 0, 0, 126, -420, 540, -315, 70};
  double s = 0;
  for (int p = deriv; p <= 9; ++p) {
    double f = 1;
    for (int q = 0; q < deriv; ++q) f *= p - q;
    s += c[p] * f * std::pow(t, p - deriv);
  }
  s *= std::pow(1.0 / w, deriv);
  return deriv == 0 ? 1.0 - s : -s;
}

FieldSlice lift_jumps(const Jumps& g, const std::vector<double>& x, double L, double M) {
  const int N = static_cast<int>(g[0].size());
  FieldSlice out(x, N, L);
  out.xderiv.assign(3, std::vector<cplx>(out.v.size()));
  for (int i = 0; i < out.nx(); ++i) {
    const bool left_copy = x[i] == 0.0 && i + 1 < out.nx() && x[i + 1] == 0.0;
    if (x[i] < 0.0 || left_copy) continue;
    for (int a = 0; a < 4; ++a) {
      double w[4];
      for (int k = 0; k < 4; ++k) w[k] = lift_basis(x[i], M, k, a);
      auto& dst = a == 0 ? out.v : out.xderiv[a - 1];
      for (int j = 0; j < N; ++j) {
        double s = 0;
        for (int k = 0; k < 4; ++k)
          if (!g[k].empty()) s += w[k] * g[k][j];
        dst[static_cast<std::size_t>(i) * N + j] = s;
      }
    }
  }
  return out;
}

std::array<double, 4> lift_jump_at(const Jumps& g, int j, double M) {
  std::array<double, 4> r{};
  for (int a = 0; a < 4; ++a)
    for (int k = 0; k < 4; ++k)
      if (!g[k].empty()) r[a] += lift_basis(0.0, M, k, a) * g[k][j];
  return r;
}

// ---------------------------------------------------------------- flat path

FieldSlice solve_channel_flat(Side side, double alpha, const ChannelLayout& lay, const Jumps& g,
                              const SteklovRows& rows, const SpectralGrid& grid, const FieldSlice* F) {
  return flat_solve(side, alpha, lay, g, rows, grid, F, lay.xs(), true);
}

// ---------------------------------------------------------------- rough path

double rough_map(double s, double gamma, double M) { return s * M - gamma * std::pow(1.0 - s, 4); }

std::vector<double> RoughSolution::top_derivative(int k) const {
  // one-sided in s with k + 4 points; dX = (1/M) ds to third order at s = 1
  std::vector<double> nodes;
  const int np = k + 4;
  for (int q = 0; q < np; ++q) nodes.push_back(s[ns - 1 - q]);
  auto w = fornberg(1.0, nodes, k);
  std::vector<double> out(N);
  for (int j = 0; j < N; ++j) {
    double acc = 0;
    for (int q = 0; q < np; ++q) acc += w[k][q] * (*this)(ns - 1 - q, j);
    out[j] = acc / std::pow(M, k);
  }
  return out;
}

double RoughSolution::wall_value_max() const {
  double m = 0;
  for (int j = 0; j < N; ++j) m = std::max(m, std::abs((*this)(0, j)));
  return m;
}

double RoughSolution::wall_normal_max() const {
  // (dX + gamma' dY) Psi at the wall; the tangential part vanishes with Psi,
  // so this is ds Psi / J with the same one-sided stencil as the wall row.
  const double ds = s[1] - s[0];
  double m = 0;
  for (int j = 0; j < N; ++j) {
    const double J = M + 4.0 * profile.gamma[j];
    const double fs = (-3.0 * (*this)(0, j) + 4.0 * (*this)(1, j) - (*this)(2, j)) / (2.0 * ds);
    m = std::max(m, std::abs(fs / J));
  }
  return m;
}

RoughSolution solve_channel_rough(Side side, double alpha, const RoughProfile& profile, const Jumps& g,
                                  const SteklovRows& rows, double M, int ns) {
  profile.validate();
  if (M <= 0) fail("Usage", "channel needs M > 0");
  if (ns < 8) fail("Usage", "rough channel needs ns >= 8");
  const int N = profile.size();
  const double L = profile.L;
  const double b = 1.0 + alpha * alpha, sg = sigma(side), st = transport_sign(side);
  const double ds = 1.0 / (ns - 1), dy = L / N;
  const auto& gam = profile.gamma;
  const auto g1 = spectral_dy(gam, L, 1), g2 = spectral_dy(gam, L, 2);
  const int n = ns * N;
  auto id = [&](int i, int j) { return i * N + ((j % N) + N) % N; };

  RoughSolution sol;
  sol.profile = profile;
  sol.M = M;
  sol.ns = ns;
  sol.N = N;
  sol.s = linspace(0.0, 1.0, ns);
  sol.X.resize(n);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < N; ++j) sol.X[id(i, j)] = rough_map(sol.s[i], gam[j], M);

  // Lap on rows 1..ns-2 with central stencils, from the chain rule:
  // dX = (1/J) ds, dY|X = dY|s + eta ds, eta = -X_Y / J.
  using Trip = Eigen::Triplet<double>;
  std::vector<Trip> lt;
  lt.reserve(static_cast<std::size_t>(n) * 13);
  for (int i = 1; i < ns - 1; ++i) {
    const double s = sol.s[i], w = 1.0 - s;
    for (int j = 0; j < N; ++j) {
      const double J = M + 4.0 * gam[j] * w * w * w;
      const double Js = -12.0 * gam[j] * w * w;
      const double JY = 4.0 * g1[j] * w * w * w;
      const double num = g1[j] * std::pow(w, 4);
      const double eta = num / J;
      const double eta_s = (-4.0 * g1[j] * w * w * w * J - num * Js) / (J * J);
      const double eta_Y = (g2[j] * std::pow(w, 4) * J - num * JY) / (J * J);
      // coefficients of f_ss, f_s, f_sY, f_YY
      const double c_ss = b / (J * J) - 2.0 * sg * alpha * eta / J + eta * eta;
      const double c_s = -b * Js / (J * J * J) - 2.0 * sg * alpha * eta_s / J + eta_Y + eta * eta_s;
      const double c_sY = -2.0 * sg * alpha / J + 2.0 * eta;
      const double c_YY = 1.0;
      const int r = id(i, j);
      lt.emplace_back(r, id(i + 1, j), c_ss / (ds * ds) + c_s / (2 * ds));
      lt.emplace_back(r, id(i - 1, j), c_ss / (ds * ds) - c_s / (2 * ds));
      lt.emplace_back(r, id(i, j), -2.0 * c_ss / (ds * ds) - 2.0 * c_YY / (dy * dy));
      lt.emplace_back(r, id(i, j + 1), c_YY / (dy * dy));
      lt.emplace_back(r, id(i, j - 1), c_YY / (dy * dy));
      const double x = c_sY / (4 * ds * dy);
      lt.emplace_back(r, id(i + 1, j + 1), x);
      lt.emplace_back(r, id(i - 1, j - 1), x);
      lt.emplace_back(r, id(i + 1, j - 1), -x);
      lt.emplace_back(r, id(i - 1, j + 1), -x);
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> Lap(n, n);
  Lap.setFromTriplets(lt.begin(), lt.end());
  Eigen::SparseMatrix<double, Eigen::RowMajor> Lap2 = Lap * Lap;

  // Lift source -L Psi^L at the interior nodes.
  std::array<std::array<std::vector<double>, 5>, 4> gy;   // gy[k][c] = dY^c g_k
  for (int k = 0; k < 4; ++k)
    for (int c = 0; c <= 4; ++c)
      gy[k][c] = g[k].empty() ? std::vector<double>(N, 0.0) : spectral_dy(g[k], L, c);
  auto lift_jet = [&](double X, int j, int a, int c) {
    double s = 0;
    for (int k = 0; k < 4; ++k) s += lift_basis(X, M, k, a) * gy[k][c][j];
    return s;
  };
  auto lift_val = [&](double X, int j) { return X < 0 ? 0.0 : lift_jet(X, j, 0, 0); };
  auto lift_L = [&](double X, int j) {
    if (X < 0 || X >= 0.5 * M) return 0.0;
    const double bih = b * b * lift_jet(X, j, 4, 0) - 4.0 * sg * alpha * b * lift_jet(X, j, 3, 1) +
                       (4.0 * alpha * alpha + 2.0 * b) * lift_jet(X, j, 2, 2) -
                       4.0 * sg * alpha * lift_jet(X, j, 1, 3) + lift_jet(X, j, 0, 4);
    return st * lift_jet(X, j, 1, 0) - bih;
  };

  if ((!rows.rho2.empty() && static_cast<int>(rows.rho2.size()) != N) ||
      (!rows.rho3.empty() && static_cast<int>(rows.rho3.size()) != N))
    fail("Usage", "boundary data length differs from N");
  std::vector<Trip> at;
  at.reserve(static_cast<std::size_t>(n) * 40);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);

  // interior: s dX - Lap^2
  for (int i = 2; i <= ns - 3; ++i)
    for (int j = 0; j < N; ++j) {
      const int r = id(i, j);
      const double w = 1.0 - sol.s[i];
      const double J = M + 4.0 * gam[j] * w * w * w;
      at.emplace_back(r, id(i + 1, j), st / (J * 2 * ds));
      at.emplace_back(r, id(i - 1, j), -st / (J * 2 * ds));
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Lap2, r); it; ++it)
        at.emplace_back(r, static_cast<int>(it.col()), -it.value());
      rhs(r) = -lift_L(sol.X[r], j);
    }
  // wall: value and normal derivative (one-sided in s)
  for (int j = 0; j < N; ++j) {
    at.emplace_back(id(0, j), id(0, j), 1.0);
    const int r = id(1, j);
    at.emplace_back(r, id(0, j), -3.0 / (2 * ds));
    at.emplace_back(r, id(1, j), 4.0 / (2 * ds));
    at.emplace_back(r, id(2, j), -1.0 / (2 * ds));
  }
  // top rows: at s = 1 the map has J = M and eta = 0 with vanishing s-derivatives
  const auto w1 = fornberg(1.0, {1.0, 1.0 - ds, 1.0 - 2 * ds}, 1)[1];
  const auto w2 = fornberg(1.0, {1.0, 1.0 - ds, 1.0 - 2 * ds, 1.0 - 3 * ds}, 2)[2];
  const auto w3 = fornberg(1.0, {1.0, 1.0 - ds, 1.0 - 2 * ds, 1.0 - 3 * ds, 1.0 - 4 * ds}, 3)[3];
  const int it_ = ns - 1;
  const double M2 = M * M, M3 = M2 * M;
  const double rs = row2_sign(side);
  for (int j = 0; j < N; ++j) {
    const int r2 = id(it_, j), r3 = id(it_ - 1, j);
    // A2 = rs b (b f_ss / M^2 - 2 sg a f_sY / M + f_YY)
    for (int q = 0; q < 4; ++q) at.emplace_back(r2, id(it_ - q, j), rs * b * b * w2[q] / M2);
    for (int q = 0; q < 3; ++q) {
      const double c = rs * b * (-2.0 * sg * alpha) * w1[q] / M / (2 * dy);
      at.emplace_back(r2, id(it_ - q, j + 1), c);
      at.emplace_back(r2, id(it_ - q, j - 1), -c);
    }
    at.emplace_back(r2, id(it_, j + 1), rs * b / (dy * dy));
    at.emplace_back(r2, id(it_, j - 1), rs * b / (dy * dy));
    at.emplace_back(r2, id(it_, j), -2.0 * rs * b / (dy * dy));
    // A3 = -(b dX - 2a dY) Lap + f/2, dX Lap = b f_sss/M^3 - 2 sg a f_ssY/M^2 + f_sYY/M,
    // dY Lap = b f_ssY/M^2 - 2 sg a f_sYY/M + f_YYY
    const double cxx = -b, cy = 2.0 * alpha;
    for (int q = 0; q < 5; ++q) at.emplace_back(r3, id(it_ - q, j), cxx * b * w3[q] / M3);
    // f_ssY terms: (cxx (-2 sg a)/M^2 + cy b/M^2)
    const double c_ssY = (cxx * (-2.0 * sg * alpha) + cy * b) / M2;
    for (int q = 0; q < 4; ++q) {
      const double c = c_ssY * w2[q] / (2 * dy);
      at.emplace_back(r3, id(it_ - q, j + 1), c);
      at.emplace_back(r3, id(it_ - q, j - 1), -c);
    }
    // f_sYY terms: (cxx/M + cy (-2 sg a)/M)
    const double c_sYY = (cxx + cy * (-2.0 * sg * alpha)) / M;
    for (int q = 0; q < 3; ++q) {
      const double c = c_sYY * w1[q] / (dy * dy);
      at.emplace_back(r3, id(it_ - q, j + 1), c);
      at.emplace_back(r3, id(it_ - q, j - 1), c);
      at.emplace_back(r3, id(it_ - q, j), -2.0 * c);
    }
    // f_YYY: cy, central 5-point
    const double c3 = cy / (2 * dy * dy * dy);
    at.emplace_back(r3, id(it_, j + 2), c3);
    at.emplace_back(r3, id(it_, j + 1), -2.0 * c3);
    at.emplace_back(r3, id(it_, j - 1), 2.0 * c3);
    at.emplace_back(r3, id(it_, j - 2), -c3);
    at.emplace_back(r3, id(it_, j), 0.5);
    if (!rows.rho2.empty()) rhs(r2) = rows.rho2[j];
    if (!rows.rho3.empty()) rhs(r3) = rows.rho3[j];
  }
  if (rows.coupled) {
    // dense symbol blocks K_ab acting on (f, f_s / M) at the top
    std::vector<Eigen::Matrix2cd> S(N);
    for (int k = 0; k < N; ++k) {
      const int w = k < N / 2 ? k : k - N;
      S[k] = symbol(side, alpha, 2.0 * kPi * w / L);
      if (k == N / 2) S[k] = S[k].real().cast<cplx>();
    }
    std::vector<cplx> e(N);
    for (int jp = 0; jp < N; ++jp) {
      std::fill(e.begin(), e.end(), 0.0);
      e[jp] = 1.0;
      auto h = fft_forward(e);
      std::array<std::vector<cplx>, 4> col;
      for (auto& c : col) c.resize(N);
      for (int k = 0; k < N; ++k) {
        col[0][k] = S[k](0, 0) * h[k];
        col[1][k] = S[k](0, 1) * h[k];
        col[2][k] = S[k](1, 0) * h[k];
        col[3][k] = S[k](1, 1) * h[k];
      }
      std::array<std::vector<double>, 4> K;
      for (int a = 0; a < 4; ++a) K[a] = real_part(fft_backward(col[a]));
      for (int j = 0; j < N; ++j) {
        const int r2 = id(it_, j), r3 = id(it_ - 1, j);
        at.emplace_back(r2, id(it_, jp), -K[0][j]);
        at.emplace_back(r3, id(it_, jp), -K[2][j]);
        for (int q = 0; q < 3; ++q) {
          at.emplace_back(r2, id(it_ - q, jp), -K[1][j] * w1[q] / M);
          at.emplace_back(r3, id(it_ - q, jp), -K[3][j] * w1[q] / M);
        }
      }
    }
  }

  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(at.begin(), at.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) fail("SingularSystem", "rough channel matrix factorisation failed");
  Eigen::VectorXd u = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !u.allFinite()) fail("SingularSystem", "rough channel solve failed");
  u += lu.solve(rhs - A * u);   // one refinement step
  const double rn = rhs.lpNorm<Eigen::Infinity>();
  sol.residual = (A * u - rhs).lpNorm<Eigen::Infinity>() / (rn > 0 ? rn : 1.0);

  sol.v.resize(n);
  for (int r = 0; r < n; ++r) sol.v[r] = u(r) + lift_val(sol.X[r], r % N);
  return sol;
}

RoughSolution solve_channel_linear(Side side, double alpha, const RoughProfile& profile, const Jumps& g,
                                   const SteklovRows& rows, double M, int ns) {
  profile.validate();
  if (!profile.is_flat()) return solve_channel_rough(side, alpha, profile, g, rows, M, ns);
  const int N = profile.size();
  RoughSolution sol;
  sol.profile = profile;
  sol.M = M;
  sol.ns = ns;
  sol.N = N;
  sol.s = linspace(0.0, 1.0, ns);
  std::vector<double> xs(ns);
  for (int i = 0; i < ns; ++i) xs[i] = rough_map(sol.s[i], profile.gamma[0], M);
  SpectralGrid grid;
  grid.L = profile.L;
  grid.N = N;
  ChannelLayout lay;
  lay.gamma0 = profile.gamma[0];
  lay.M = M;
  auto f = flat_solve(side, alpha, lay, g, rows, grid, nullptr, xs, false);
  sol.v.resize(static_cast<std::size_t>(ns) * N);
  sol.X.resize(sol.v.size());
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < N; ++j) {
      sol.v[static_cast<std::size_t>(i) * N + j] = f(i, j).real();
      sol.X[static_cast<std::size_t>(i) * N + j] = xs[i];
    }
  return sol;
}

// ---------------------------------------------------------------- glue

nlohmann::json GlueReport::to_json() const {
  return {{"mismatch", mismatch}, {"rho_mismatch", rho_mismatch}, {"worst_y", worst_y},
          {"tol", tol}, {"ok", ok}};
}

namespace {

GlueReport glue_from_derivs(Side side, double alpha, const std::array<std::vector<double>, 4>& d,
                            double L, double tol, bool require) {
  const int N = static_cast<int>(d[0].size());
  SpectralGrid hg;
  hg.L = L;
  hg.N = N;
  hg.xgrid = {0.0};
  BoundaryTrace t{d[0], d[1]};
  auto half = solve_homogeneous(side, alpha, t, hg, 3);
  GlueReport r;
  r.tol = tol;
  double worst = -1;
  for (int k = 0; k < 4; ++k) {
    const auto& hl = half.layer(k);
    const double scale = std::max(sup_abs(d[k]), 1e-300);
    double m = 0;
    for (int j = 0; j < N; ++j) {
      const double e = std::abs(d[k][j] - hl[j].real());
      if (e > m) m = e;
      if (e / scale > worst) {
        worst = e / scale;
        r.worst_y = j * L / N;
      }
    }
    r.mismatch[k] = sup_abs(d[k]) > 0 ? m / scale : m;
  }
  auto [c2, c3] = rows_from_derivs(side, alpha, d, L);
  auto sk = apply(side, alpha, t, hg);
  double e = 0, s = 0;
  for (int j = 0; j < N; ++j) {
    e = std::max({e, std::abs(c2[j] - sk.rho2[j]), std::abs(c3[j] - sk.rho3[j])});
    s = std::max({s, std::abs(sk.rho2[j]), std::abs(sk.rho3[j])});
  }
  r.rho_mismatch = s > 0 ? e / s : e;
  r.ok = r.rho_mismatch <= tol;
  for (double m : r.mismatch) r.ok = r.ok && m <= tol;
  if (require && !r.ok) {
    std::ostringstream os;
    os << "channel and half-space disagree at X = M, worst Y = " << r.worst_y;
    fail("GlueMismatch", os.str());
  }
  return r;
}

}  // namespace

GlueReport glue_check(Side side, double alpha, const FieldSlice& channel, const SpectralGrid& grid,
                      double tol, bool require) {
  return glue_from_derivs(side, alpha, field_derivs_at(channel, channel.nx() - 1), grid.L, tol, require);
}

GlueReport glue_check(Side side, double alpha, const RoughSolution& channel, double tol, bool require) {
  std::array<std::vector<double>, 4> d;
  for (int k = 0; k < 4; ++k) d[k] = channel.top_derivative(k);
  return glue_from_derivs(side, alpha, d, channel.profile.L, tol, require);
}

// ---------------------------------------------------------------- energies

std::vector<double> truncated_energies(const FieldSlice& field, const SpectralGrid& grid, int k_max,
                                       double center) {
  if (field.xderiv.size() < 2) fail("Usage", "truncated energies need two dX layers");
  const int nx = field.nx(), ny = field.ny;
  const double b = 1.0 + field.alpha * field.alpha, sa = sigma(field.side) * field.alpha;
  auto J11 = dy_layer(field.xderiv[0], nx, ny, grid.L, 1);
  auto J02 = dy_layer(field.v, nx, ny, grid.L, 2);
  std::vector<double> lap2(static_cast<std::size_t>(nx) * ny);
  for (std::size_t q = 0; q < lap2.size(); ++q)
    lap2[q] = std::norm(b * field.xderiv[1][q] - 2.0 * sa * J11[q] + J02[q]);
  std::vector<double> col(ny);   // int_X |Lap|^2 per Y
  for (int j = 0; j < ny; ++j)
    col[j] = x_integral(field.x, [&](std::size_t i) { return lap2[i * ny + j]; });
  const double dy = grid.L / ny;
  std::vector<double> E(k_max + 1);
  for (int k = 0; k <= k_max; ++k) {
    double s = 0;
    for (int j = 0; j < ny; ++j) {
      double d = std::fmod(std::abs(j * dy - center), grid.L);
      d = std::min(d, grid.L - d);
      if (d <= k) s += col[j] * dy;
    }
    E[k] = s;
  }
  return E;
}

double channel_h2_norm(const FieldSlice& field, const SpectralGrid& grid) {
  const int nx = field.nx(), ny = field.ny;
  if (field.xderiv.size() < 2) fail("Usage", "H2 proxy needs two dX layers");
  std::vector<double> dens(static_cast<std::size_t>(nx) * ny, 0.0);
  for (int a = 0; a <= 2; ++a)
    for (int c = 0; a + c <= 2; ++c) {
      auto d = dy_layer(field.layer(a), nx, ny, grid.L, c);
      for (std::size_t q = 0; q < dens.size(); ++q) dens[q] += std::norm(d[q]);
    }
  double s = 0;
  for (int j = 0; j < ny; ++j)
    s += x_integral(field.x, [&](std::size_t i) { return dens[i * ny + j]; }) * grid.L / ny;
  return std::sqrt(s);
}

std::pair<std::vector<double>, std::vector<double>> boundary_rows(Side side, double alpha,
                                                                  const FieldSlice& f,
                                                                  const SpectralGrid& grid, int row) {
  return rows_from_derivs(side, alpha, field_derivs_at(f, row), grid.L);
}

std::vector<double> nonlinear_boundary_terms(Side side, double alpha, const FieldSlice& f,
                                             const SpectralGrid& grid, int row) {
  return quadratic_terms(side, alpha, field_derivs_at(f, row), grid.L);
}

// ---------------------------------------------------------------- nonlinear

ChannelPicardReport solve_channel_nonlinear(Side side, double alpha, const ChannelLayout& lay,
                                            const std::vector<double>& phi, const SteklovRows& rows,
                                            const SpectralGrid& grid, double tol, int max_iter) {
  if (rows.coupled) fail("Usage", "the nonlinear channel uses data-mode rows");
  Jumps g = zero_jumps(grid.N);
  g[0] = phi;
  const int N = grid.N, top = lay.n_left + lay.n_right - 1;
  std::vector<double> r2 = rows.rho2.empty() ? std::vector<double>(N) : rows.rho2;
  std::vector<double> r3 = rows.rho3.empty() ? std::vector<double>(N) : rows.rho3;
  SteklovRows lin{r2, r3, false, false, {}, {}};
  FieldSlice cur = solve_channel_flat(side, alpha, lay, g, lin, grid);

  ChannelPicardReport rep;
  int bad = 0;
  double prev = -1;
  for (int it = 1; it <= max_iter; ++it) {
    FieldSlice F = Qw_nonlinearity(cur, cur, alpha, grid);
    for (auto& z : F.v) z = -z;
    auto q = nonlinear_boundary_terms(side, alpha, cur, grid, top);
    SteklovRows rr{r2, r3, false, false, {}, {}};
    for (int j = 0; j < N; ++j) rr.rho3[j] -= q[j];
    FieldSlice next = solve_channel_flat(side, alpha, lay, g, rr, grid, &F);
    const double inc = channel_h2_norm(diff_fields(next, cur), grid);
    const double nrm = channel_h2_norm(next, grid);
    rep.trace.increments.push_back(inc);
    if (prev > 0) {
      const double r = inc / prev;
      rep.trace.ratios.push_back(r);
      bad = r >= 1.0 ? bad + 1 : 0;
    }
    prev = inc;
    cur = std::move(next);
    rep.trace.iterations = it;
    rep.trace.residual = nrm > 0 ? inc / nrm : inc;
    if (inc == 0.0 || rep.trace.residual <= tol) {
      rep.trace.converged = true;
      rep.field = std::move(cur);
      return rep;
    }
    if (bad >= 3 || !std::isfinite(inc)) {
      std::ostringstream os;
      os << "channel Picard ratio >= 1 for 3 consecutive iterates at iteration " << it;
      fail("ContractionFailure", os.str());
    }
  }
  fail("MaxIter", "channel Picard iteration did not reach tolerance");
}

nlohmann::json MatchReport::to_json() const {
  return {{"defects", defects}, {"sweeps", sweeps}, {"converged", converged}, {"diverged", diverged}};
}

MatchReport alternating_match(Side side, double alpha, const ChannelLayout& lay,
                              const std::vector<double>& phi, const SpectralGrid& grid, bool nonlinear,
                              double theta, int max_sweeps, double tol, bool precondition) {
  const int N = grid.N, top = lay.n_left + lay.n_right - 1;
  if (!(theta > 0 && theta <= 1)) fail("Usage", "relaxation theta must lie in (0, 1]");
  // the eastern layer problem is linear; its half-space has no spectral gap
  // for the Picard decay certificate
  if (nonlinear && side == Side::East) fail("Usage", "nonlinear matching is defined for the western layer only");
  Jumps g = zero_jumps(N);
  g[0] = phi;
  SteklovRows rho{std::vector<double>(N), std::vector<double>(N), false, false, {}, {}};
  std::vector<Eigen::Matrix2cd> P(N, Eigen::Matrix2cd::Identity());
  if (precondition) {
    const auto xl = linspace(-lay.gamma0, 0.0, lay.n_left), xr = linspace(0.0, lay.M, lay.n_right);
    for (int k = 0; k < N; ++k) {
      const double xi = grid.xi(k);
      Eigen::Matrix2cd T;
      for (int c = 0; c < 2; ++c) {
        ModeData d;
        d.coupled = false;
        (c == 0 ? d.rho2 : d.rho3) = 1.0;
        auto u = solve_mode(side, alpha, xi, lay, xl, xr, d, {lay.M}, false);
        T(0, c) = u[0][0];
        T(1, c) = u[1][0];
      }
      P[k] = (Eigen::Matrix2cd::Identity() - symbol(side, alpha, xi) * T).inverse();
      if (grid.is_nyquist(k)) P[k] = P[k].real().cast<cplx>();
    }
  }
  MatchReport rep;
  double first = -1, scale = 0;
  for (int sw = 1; sw <= max_sweeps; ++sw) {
    FieldSlice ch;
    try {
      ch = nonlinear ? solve_channel_nonlinear(side, alpha, lay, phi, rho, grid).field
                     : solve_channel_flat(side, alpha, lay, g, rho, grid);
    } catch (const Error& e) {
      if (e.kind() != "ContractionFailure" && e.kind() != "MaxIter") throw;
      rep.diverged = true;
      return rep;
    }
    auto d = field_derivs_at(ch, top);
    BoundaryTrace t{d[0], d[1]};
    std::vector<double> h2, h3;
    if (nonlinear) {
      PicardOptions opt;
      opt.delta0 = 1e9;   // the channel Picard already gated the data size
      auto [half, tr] = picard_solve(side, alpha, t, grid, opt);
      std::tie(h2, h3) = boundary_rows(side, alpha, half, grid, 0);
      auto q = nonlinear_boundary_terms(side, alpha, half, grid, 0);
      for (int j = 0; j < N; ++j) h3[j] += q[j];
    } else {
      auto sk = apply(side, alpha, t, grid);
      h2 = sk.rho2;
      h3 = sk.rho3;
    }
    double e = 0;
    for (int j = 0; j < N; ++j) {
      e = std::max({e, std::abs(h2[j] - rho.rho2[j]), std::abs(h3[j] - rho.rho3[j])});
      if (sw == 1) scale = std::max({scale, std::abs(h2[j]), std::abs(h3[j])});
    }
    // relative to the first half-space rows so that blow-up shows
    const double defect = scale > 0 ? e / scale : e;
    rep.defects.push_back(defect);
    rep.sweeps = sw;
    rep.channel = ch;
    if (first < 0) first = defect;
    if (defect <= tol) {
      rep.converged = true;
      return rep;
    }
    if (!std::isfinite(defect) || (sw > 3 && defect > 1e3 * first)) {
      rep.diverged = true;
      return rep;
    }
    std::vector<double> d2(N), d3(N);
    for (int j = 0; j < N; ++j) {
      d2[j] = h2[j] - rho.rho2[j];
      d3[j] = h3[j] - rho.rho3[j];
    }
    auto a = fft_forward(d2), b = fft_forward(d3);
    for (int k = 0; k < N; ++k) {
      const Eigen::Vector2cd v = P[k] * Eigen::Vector2cd(a[k], b[k]);
      a[k] = v(0);
      b[k] = v(1);
    }
    // P is large in the top band and would lift round-off there
    d2 = dealias_row(real_part(fft_backward(a)));
    d3 = dealias_row(real_part(fft_backward(b)));
    for (int j = 0; j < N; ++j) {
      rho.rho2[j] += theta * d2[j];
      rho.rho3[j] += theta * d3[j];
    }
  }
  return rep;
}

}  // namespace blt
