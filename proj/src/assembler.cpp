#include "blt/assembler.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "blt/ergodic.hpp"
#include "blt/grid.hpp"
#include "blt/halfspace.hpp"

namespace blt {

// ---------------------------------------------------------------- jets

YJet jet_mul(const YJet& a, const YJet& b) {
  static const double C[5][5] = {
      {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
  YJet r{};
  for (int n = 0; n < 5; ++n)
    for (int k = 0; k <= n; ++k) r[n] += C[n][k] * a[k] * b[n - k];
  return r;
}

YJet jet_scale(const YJet& a, double s) {
  YJet r;
  for (int k = 0; k < 5; ++k) r[k] = a[k] * s;
  return r;
}

YJet jet_add(const YJet& a, const YJet& b) {
  YJet r;
  for (int k = 0; k < 5; ++k) r[k] = a[k] + b[k];
  return r;
}

// ---------------------------------------------------------------- forcing

WindForcing WindForcing::zero() { return {}; }

WindForcing WindForcing::double_gyre(double amp, double x_a, double x_b, double y_min, double y_max,
                                     double margin) {
  WindForcing f;
  f.kind = Kind::DoubleGyre;
  f.amp = amp;
  f.x_a = x_a;
  f.x_b = x_b;
  f.y_min = y_min;
  f.y_max = y_max;
  f.margin = margin;
  return f;
}

WindForcing WindForcing::sin_x(double amp, double x_a, double x_b, double y_min, double y_max,
                               double margin) {
  auto f = double_gyre(amp, x_a, x_b, y_min, y_max, margin);
  f.kind = Kind::SinX;
  return f;
}

double WindForcing::time_factor(double t) const { return 1.0 + time_amp * std::sin(omega * t); }

double WindForcing::x_profile(double xh, int deriv) const {
  if (kind == Kind::SinX) {
    if (xh < 0.0 || xh > 1.0) return 0.0;
    const double w = kPi;
    static const double sgn[4] = {1, 1, -1, -1};
    const double p = std::pow(w, deriv);
    return sgn[deriv % 4] * p * (deriv % 2 == 0 ? std::sin(w * xh) : std::cos(w * xh));
  }
  // 35 t^4 - 84 t^5 + 70 t^6 - 20 t^7
  if (xh <= 0.0) return 0.0;
  if (xh >= 1.0) return deriv == 0 ? 1.0 : 0.0;
  static const double c[8] = {0, 0, 0, 0, 35, -84, 70, -20};
  double s = 0;
  for (int p = deriv; p < 8; ++p) {
    double f = 1;
    for (int q = 0; q < deriv; ++q) f *= p - q;
    s += c[p] * f * std::pow(xh, p - deriv);
  }
  return s;
}

double WindForcing::x_antiderivative(double xh) const {
  if (xh <= 0.0) return 0.0;
  if (kind == Kind::SinX) {
    if (xh >= 1.0) return 2.0 / kPi;
    return (1.0 - std::cos(kPi * xh)) / kPi;
  }
  if (xh >= 1.0) return 0.5 + (xh - 1.0);
  const double t = xh, t4 = t * t * t * t;
  return t4 * t * (7.0 - 14.0 * t + 10.0 * t * t - 2.5 * t * t * t);
}

double WindForcing::y_deriv(double y, int k) const {
  const double span = y_max - y_min - 2.0 * margin;
  const double yh = (y - y_min - margin) / span;
  if (yh <= 0.0 || yh >= 1.0) return 0.0;
  // sin(2u) sin^4(u) = 5/16 sin 2u - 1/4 sin 4u + 1/16 sin 6u, u = pi yh
  static const double b[3] = {5.0 / 16.0, -0.25, 1.0 / 16.0};
  double r = 0;
  for (int m = 1; m <= 3; ++m) {
    const double w = 2.0 * m * kPi / span, arg = w * (y - y_min - margin);
    const double v[4] = {std::sin(arg), std::cos(arg), -std::sin(arg), -std::cos(arg)};
    r += b[m - 1] * std::pow(w, k) * v[k % 4];
  }
  return r;
}

YJet WindForcing::y_profile(double y, int shift) const {
  YJet r;
  for (int k = 0; k < 5; ++k) r[k] = y_deriv(y, k + shift);
  return r;
}

double WindForcing::curl(double t, double x, double y) const {
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::Custom:
      return custom ? custom(t, x, y) : 0.0;
    default:
      return amp * time_factor(t) * x_profile((x - x_a) / (x_b - x_a)) * y_profile(y)[0];
  }
}

double WindForcing::tail_integral(double t, double x, double y) const {
  if (kind == Kind::Zero) return 0.0;
  if (kind == Kind::Custom) fail("Usage", "no closed form for a custom forcing");
  const double W = x_b - x_a;
  return amp * time_factor(t) * y_profile(y)[0] * W *
         (x_antiderivative(1.0) - x_antiderivative((x - x_a) / W));
}

std::string WindForcing::kind_name() const {
  switch (kind) {
    case Kind::Zero: return "zero";
    case Kind::DoubleGyre: return "double_gyre";
    case Kind::SinX: return "sin_x";
    default: return "custom";
  }
}

nlohmann::json WindForcing::to_json() const {
  return {{"kind", kind_name()}, {"amp", amp},         {"x_a", x_a},
          {"x_b", x_b},          {"y_min", y_min},     {"y_max", y_max},
          {"margin", margin},    {"time_amp", time_amp}, {"omega", omega}};
}

// ---------------------------------------------------------------- geometry

DomainGeometry DomainGeometry::box(double xw, double xe, double y_min, double y_max, double eps,
                                   double gamma_w, double gamma_e) {
  DomainGeometry g;
  g.chi_w = [xw](double) { return xw; };
  g.chi_e = [xe](double) { return xe; };
  g.gamma_w = gamma_w;
  g.gamma_e = gamma_e;
  g.y_min = y_min;
  g.y_max = y_max;
  g.eps = eps;
  g.straight = true;
  g.xw0 = xw;
  g.xe0 = xe;
  g.validate();
  return g;
}

void DomainGeometry::validate() const {
  if (!(eps > 0.0)) fail("Usage", "eps must be positive");
  if (!(y_max > y_min)) fail("Usage", "empty y range");
  if (!chi_w || !chi_e) fail("Usage", "coast maps missing");
  if (gamma_w < 0.0 || gamma_e < 0.0) fail("Usage", "negative wall depth");
  for (double y : linspace(y_min, y_max, 33))
    if (!(chi_w(y) < chi_e(y))) fail("Usage", "chi_w < chi_e violated");
}

nlohmann::json DomainGeometry::to_json() const {
  nlohmann::json j{{"gamma_w", gamma_w}, {"gamma_e", gamma_e}, {"y_min", y_min},
                   {"y_max", y_max},     {"eps", eps},         {"straight", straight}};
  if (straight) {
    j["chi_w"] = xw0;
    j["chi_e"] = xe0;
  }
  return j;
}

// ---------------------------------------------------------------- Sverdrup

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

// One Gauss-Kronrod panel; boost reports the error on the reference
// interval, so it is rescaled here.
double gk_panel(const std::function<double(double)>& f, double a, double b, double* err, double* L1) {
  const double v = GK::integrate(f, a, b, 0, 0.0, err, L1);
  *err *= 0.5 * std::abs(b - a);
  return v;
}

double gk_adapt(const std::function<double(double)>& f, double a, double b, double abs_tol, int depth) {
  double err = 0, L1 = 0;
  const double v = gk_panel(f, a, b, &err, &L1);
  if (std::isfinite(v) && err <= abs_tol) return v;
  if (depth == 0 || !std::isfinite(v))
    fail("QuadratureFailure", "Gauss-Kronrod error " + std::to_string(err) + " above " +
                                  std::to_string(abs_tol) + " on [" + std::to_string(a) + ", " +
                                  std::to_string(b) + "]");
  const double m = 0.5 * (a + b);
  return gk_adapt(f, a, m, 0.5 * abs_tol, depth - 1) + gk_adapt(f, m, b, 0.5 * abs_tol, depth - 1);
}

double gk_integral(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  double err = 0, L1 = 0;
  gk_panel(f, a, b, &err, &L1);
  return gk_adapt(f, a, b, tol * L1 + 1e-300, 18);
}

}  // namespace

double sverdrup_at(const WindForcing& f, const DomainGeometry& g, double t, double x, double y,
                   double tol) {
  const double xw = g.chi_w(y), xe = g.chi_e(y);
  if (x < xw || x >= xe || f.kind == WindForcing::Kind::Zero) return 0.0;
  return -gk_integral([&](double s) { return f.curl(t, s, y); }, x, xe, tol);
}

InteriorField sverdrup_interior(const WindForcing& f, const DomainGeometry& g, double t,
                                const std::vector<double>& xs, const std::vector<double>& ys,
                                double tol) {
  InteriorField r{xs, ys, std::vector<double>(xs.size() * ys.size(), 0.0)};
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j)
      r.psi[i * ys.size() + j] = sverdrup_at(f, g, t, xs[i], ys[j], tol);
  return r;
}

double jump_phi(const WindForcing& f, const DomainGeometry& g, double t, double y, double tol) {
  if (y < g.y_min || y > g.y_max) fail("Usage", "y outside [y_min, y_max]");
  if (f.kind == WindForcing::Kind::Zero) return 0.0;
  return gk_integral([&](double s) { return f.curl(t, s, y); }, g.chi_w(y), g.chi_e(y), tol);
}

// ---------------------------------------------------------------- ExpSum

namespace {

// All derivatives 0..4 at X, one exponential per term.
std::array<double, 5> eval_all(const ExpSum& s, double X) {
  std::array<cplx, 5> acc{};
  for (const auto& t : s.terms) {
    const cplx e = t.c * std::exp(-t.mu * X);
    const cplx nm = -t.mu;
    cplx p = 1.0;
    if (t.m == 0) {
      for (int k = 0; k < 5; ++k, p *= nm) acc[k] += p * e;
    } else {
      cplx q = 0.0;   // (-mu)^{k-1}
      for (int k = 0; k < 5; ++k) {
        acc[k] += (p * X + static_cast<double>(k) * q) * e;
        q = p;
        p *= nm;
      }
    }
  }
  std::array<double, 5> r;
  for (int k = 0; k < 5; ++k) r[k] = acc[k].real();
  return r;
}

}  // namespace

double ExpSum::eval(double X, int deriv) const {
  if (deriv < 0 || deriv > 4) fail("Usage", "derivative order outside 0..4");
  return eval_all(*this, X)[deriv];
}

ExpSum ExpSum::derivative() const {
  ExpSum r;
  for (const auto& t : terms) {
    if (t.m == 0) {
      r.terms.push_back({-t.mu * t.c, 0, t.mu});
    } else {
      r.terms.push_back({t.c, t.m - 1, t.mu});
      r.terms.push_back({-t.mu * t.c, t.m, t.mu});
    }
  }
  return r;
}

ExpSum ExpSum::operator*(const ExpSum& o) const {
  ExpSum r;
  for (const auto& a : terms)
    for (const auto& b : o.terms) r.terms.push_back({a.c * b.c, a.m + b.m, a.mu + b.mu});
  return r;
}

ExpSum ExpSum::operator+(const ExpSum& o) const {
  ExpSum r = *this;
  r.terms.insert(r.terms.end(), o.terms.begin(), o.terms.end());
  return r;
}

ExpSum ExpSum::scaled(cplx s) const {
  ExpSum r = *this;
  for (auto& t : r.terms) t.c *= s;
  return r;
}

// ---------------------------------------------------------------- layer profiles

namespace {

struct Symbol {
  double s, b2;
  cplx p(cplx mu) const { return -s * mu - b2 * mu * mu * mu * mu; }
  cplx dp(cplx mu) const { return -s - 4.0 * b2 * mu * mu * mu; }
};

// Roots of p, all four; right-piece modes: the decaying pair (west) or the
// constant plus the decaying one (east).
std::array<cplx, 4> all_roots(Side side, double alpha) {
  const double r = bpow(alpha, -2.0 / 3.0);
  if (side == Side::West)
    return {cplx(0.0), cplx(-r), r * std::polar(1.0, kPi / 3), r * std::polar(1.0, -kPi / 3)};
  return {cplx(0.0), cplx(r), r * std::polar(1.0, 2 * kPi / 3), r * std::polar(1.0, -2 * kPi / 3)};
}

std::array<cplx, 2> right_modes(Side side, double alpha) {
  const double r = bpow(alpha, -2.0 / 3.0);
  if (side == Side::West) return {r * std::polar(1.0, kPi / 3), r * std::polar(1.0, -kPi / 3)};
  return {cplx(0.0), cplx(r)};
}

ExpSum particular(const ExpSum& f, const Symbol& sym) {
  ExpSum u;
  for (const auto& t : f.terms) {
    if (t.m != 0) fail("Usage", "particular solution needs pure exponential sources");
    const cplx p = sym.p(t.mu);
    const double scale = 1.0 + std::pow(std::abs(t.mu), 4);
    if (std::abs(p) > 1e-9 * scale) {
      u.terms.push_back({t.c / p, 0, t.mu});
    } else {
      u.terms.push_back({-t.c / sym.dp(t.mu), 1, t.mu});
    }
  }
  return u;
}

}  // namespace

double LayerProfile::eval(double X, int deriv) const {
  return X < 0.0 ? left.eval(X, deriv) : right.eval(X, deriv);
}

double LayerProfile::source(double X) const {
  return X < 0.0 ? src_left.eval(X) : src_right.eval(X);
}

double LayerProfile::far_field() const {
  double c = 0.0;
  for (const auto& t : right.terms)
    if (t.m == 0 && std::abs(t.mu) < 1e-14) c += t.c.real();
  return c;
}

LayerProfile solve_layer_profile(Side side, double alpha, double gamma, const std::array<double, 4>& g,
                                 const ExpSum& src_left, const ExpSum& src_right) {
  if (gamma < 0.0) fail("Usage", "negative wall depth");
  const Symbol sym{side == Side::West ? 1.0 : -1.0, sqr(1.0 + alpha * alpha)};
  const auto roots = all_roots(side, alpha);
  const auto modes = right_modes(side, alpha);
  const ExpSum upl = particular(src_left, sym), upr = particular(src_right, sym);
  for (const auto& t : upr.terms)
    if (t.mu.real() <= 0.0) fail("Usage", "right-piece source must decay");

  Eigen::Matrix<cplx, 6, 6> A = Eigen::Matrix<cplx, 6, 6>::Zero();
  Eigen::Matrix<cplx, 6, 1> rhs;
  const auto wl = eval_all(upl, -gamma);
  const auto l0 = eval_all(upl, 0.0), r0 = eval_all(upr, 0.0);
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 4; ++j) A(k, j) = std::pow(-roots[j], k) * std::exp(roots[j] * gamma);
    rhs(k) = -wl[k];
  }
  for (int k = 0; k < 4; ++k) {
    for (int j = 0; j < 4; ++j) A(2 + k, j) = -std::pow(-roots[j], k);
    for (int j = 0; j < 2; ++j) A(2 + k, 4 + j) = std::pow(-modes[j], k);
    rhs(2 + k) = g[k] - r0[k] + l0[k];
  }
  const Eigen::Matrix<cplx, 6, 1> c = A.fullPivLu().solve(rhs);

  LayerProfile P;
  P.side = side;
  P.alpha = alpha;
  P.gamma = gamma;
  P.left = upl;
  P.right = upr;
  for (int j = 0; j < 4; ++j) P.left.terms.push_back({c(j), 0, roots[j]});
  for (int j = 0; j < 2; ++j) P.right.terms.push_back({c(4 + j), 0, modes[j]});
  P.src_left = src_left;
  P.src_right = src_right;
  return P;
}

MunkProfile munk_reference(double alpha, double psi0, double psi1, Side side) {
  MunkProfile m;
  m.side = side;
  m.alpha = alpha;
  if (side == Side::West) {
    const auto lam = right_modes(Side::West, alpha);
    const auto A = mode_coefficients(lam, psi0, psi1);
    for (int j = 0; j < 2; ++j) m.u.terms.push_back({A[j], 0, lam[j]});
    return m;
  }
  const double mu = bpow(alpha, -2.0 / 3.0);
  const double mis = std::abs(psi1 + mu * psi0);
  if (mis > 1e-12 * std::max(1.0, std::abs(psi0) + std::abs(psi1)))
    fail("ConstraintViolation",
         "east coast has one decaying mode at xi = 0; psi1 must equal -(1+a^2)^{-2/3} psi0 "
         "(mismatch " + std::to_string(mis) + ")");
  m.u.terms.push_back({psi0, 0, mu});
  return m;
}

// ---------------------------------------------------------------- assembly

double AppSolution::phi_factor() const {
  if (forcing.kind == WindForcing::Kind::Zero) return 0.0;
  const double W = forcing.x_b - forcing.x_a;
  const double I = forcing.x_antiderivative((geom.xe0 - forcing.x_a) / W) -
                   forcing.x_antiderivative((geom.xw0 - forcing.x_a) / W);
  return forcing.amp * forcing.time_factor(opt.t) * W * I;
}

YJet AppSolution::phi(double y) const { return jet_scale(forcing.y_profile(y), phi_factor()); }

YJet AppSolution::dphi(double y) const { return jet_scale(forcing.y_profile(y, 1), phi_factor()); }

YJet AppSolution::curl_e(double y) const {
  if (forcing.kind == WindForcing::Kind::Zero) return YJet{};
  const double S = forcing.x_profile((geom.xe0 - forcing.x_a) / (forcing.x_b - forcing.x_a));
  return jet_scale(forcing.y_profile(y), forcing.amp * forcing.time_factor(opt.t) * S);
}

YJet AppSolution::C1(double y) const { return jet_scale(curl_e(y), e_far); }

std::vector<AppSolution::Piece> AppSolution::pieces(double x, double y) const {
  std::vector<Piece> out;
  if (forcing.kind == WindForcing::Kind::Zero) return out;
  const double eps = geom.eps;
  const bool inside = x >= geom.xw0 && x <= geom.xe0;
  const double W = forcing.x_b - forcing.x_a;
  const YJet G = jet_scale(forcing.y_profile(y), forcing.amp * forcing.time_factor(opt.t));

  Piece in0{G, {}, 0.0, false};
  if (inside) {
    const double xh = (x - forcing.x_a) / W, xe = (geom.xe0 - forcing.x_a) / W;
    in0.u[0] = -W * (forcing.x_antiderivative(xe) - forcing.x_antiderivative(xh));
    for (int k = 1; k < 5; ++k) in0.u[k] = forcing.x_profile(xh, k - 1) / std::pow(W, k - 1);
  }
  out.push_back(in0);

  const double Xw = (x - geom.xw0) / eps, Xe = (geom.xe0 - x) / eps;
  auto layer = [&](const YJet& a, const LayerProfile& prof, double X, double sx, double shift) {
    Piece p{a, {}, 0.0, true};
    auto d = eval_all(X < 0 ? prof.left : prof.right, X);
    if (X >= 0.0) d[0] -= shift;
    double f = 1.0;
    for (int k = 0; k < 5; ++k, f *= sx / eps) p.u[k] = f * d[k];
    p.f = a[0] * prof.source(X);
    return p;
  };
  const YJet ph = phi(y);
  out.push_back(layer(ph, P, Xw, 1.0, 0.0));
  if (opt.order >= 1) {
    const YJet c1 = C1(y);
    Piece in1{jet_scale(c1, eps), {}, 0.0, false};
    if (inside) in1.u[0] = 1.0;
    out.push_back(in1);
    out.push_back(layer(jet_scale(c1, -eps), P, Xw, 1.0, 0.0));
    const YJet dph = dphi(y);
    out.push_back(layer(jet_scale(jet_mul(ph, dph), eps), Q, Xw, 1.0, 0.0));
    out.push_back(layer(jet_scale(curl_e(y), eps), E, Xe, -1.0, e_far));
  }
  return out;
}

double AppSolution::value(double x, double y) const {
  double s = 0;
  for (const auto& p : pieces(x, y)) s += p.a[0] * p.u[0];
  return s;
}

double AppSolution::west_layer0(double x, double y) const {
  return phi(y)[0] * P.eval((x - geom.xw0) / geom.eps);
}

double AppSolution::east_layer1(double X_e, double y) const {
  return curl_e(y)[0] * (E.eval(X_e) - (X_e >= 0.0 ? e_far : 0.0));
}

AppSolution assemble_app(const DomainGeometry& g, const WindForcing& f, const AssembleOptions& opt) {
  g.validate();
  if (!g.straight) fail("Usage", "assembly supports straight meridional coasts only");
  if (opt.order != 0 && opt.order != 1) fail("Usage", "order must be 0 or 1");
  if (!f.separable()) fail("Usage", "assembly needs a separable forcing");
  AppSolution app;
  app.geom = g;
  app.forcing = f;
  app.opt = opt;

  app.P = solve_layer_profile(Side::West, 0.0, g.gamma_w, {1, 0, 0, 0});
  app.E = solve_layer_profile(Side::East, 0.0, g.gamma_e, {0, 1, 0, 0});

  // Far-field constant through the ergodic machinery: the xi = 0 trace of E
  // at X = 0+ is constant in Y.
  const auto grid = make_grid(64.0, 16, 10.0, 8);
  BoundaryTrace tr{std::vector<double>(grid.N, app.E.right.eval(0.0, 0)),
                   std::vector<double>(grid.N, app.E.right.eval(0.0, 1))};
  const double phibar = ergodic_limit(tr.psi0[0], tr.psi1[0], 0.0);
  const auto cc = select_constant(tr, phibar, 0.0, grid, 50.0, opt.far_tol);
  app.e_far = cc.C;
  app.far_shifted = std::abs(cc.C - app.E.far_field()) + cc.shifted_sup;
  if (app.far_shifted > opt.far_tol)
    fail("NonConvergence", "eastern far-field constant mismatch " + std::to_string(app.far_shifted));

  // Order-1 western source: minus the eps^-3 Jacobian coefficient of phi phi'.
  const auto& P = app.P;
  const ExpSum l1 = P.left.derivative(), l2 = l1.derivative(), l3 = l2.derivative();
  const ExpSum r1 = P.right.derivative(), r2 = r1.derivative(), r3 = r2.derivative();
  const ExpSum sl = (l1 * l2 + (P.left * l3).scaled(-1.0)).scaled(-1.0);
  const ExpSum sr = (r1 * r2 + (P.right * r3).scaled(-1.0) + r3).scaled(-1.0);
  app.Q = solve_layer_profile(Side::West, 0.0, g.gamma_w, {0, 0, 0, 0}, sl, sr);

  for (double y : linspace(g.y_min, g.y_max, 401)) app.phi_sup = std::max(app.phi_sup, std::abs(app.phi(y)[0]));
  if (app.phi_sup > opt.smallness)
    fail("SmallnessViolation", "sup |phi| = " + std::to_string(app.phi_sup) + " above " +
                                   std::to_string(opt.smallness));
  return app;
}

AppSample sample_app(const AppSolution& app, int nx, int ny) {
  if (nx < 2 || ny < 1) fail("Usage", "sample grid too small");
  AppSample s;
  s.x = linspace(app.x_left(), app.x_right(), nx);
  s.y.resize(ny);
  const double Ly = app.geom.y_max - app.geom.y_min;
  for (int j = 0; j < ny; ++j) s.y[j] = app.geom.y_min + j * Ly / ny;
  s.psi.assign(static_cast<std::size_t>(nx) * ny, 0.0);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) s.psi[static_cast<std::size_t>(i) * ny + j] = app.value(s.x[i], s.y[j]);
  for (double xb : {app.x_left(), app.x_right()})
    for (double y : s.y) {
      double v = 0, dx = 0;
      for (const auto& p : app.pieces(xb, y)) {
        v += p.a[0] * p.u[0];
        dx += p.a[0] * p.u[1];
      }
      s.boundary_residual = std::max({s.boundary_residual, std::abs(v), app.geom.eps * std::abs(dx)});
    }
  return s;
}

// ---------------------------------------------------------------- residual

namespace {

// 2D FFT by rows then columns. f is nx x ny, y fastest.
std::vector<cplx> fft2(const std::vector<double>& f, int nx, int ny) {
  std::vector<cplx> a(f.begin(), f.end());
  std::vector<cplx> row(ny), col(nx);
  for (int i = 0; i < nx; ++i) {
    std::copy(a.begin() + static_cast<std::ptrdiff_t>(i) * ny,
              a.begin() + static_cast<std::ptrdiff_t>(i + 1) * ny, row.begin());
    row = fft_forward(row);
    std::copy(row.begin(), row.end(), a.begin() + static_cast<std::ptrdiff_t>(i) * ny);
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) col[i] = a[static_cast<std::size_t>(i) * ny + j];
    col = fft_forward(col);
    for (int i = 0; i < nx; ++i) a[static_cast<std::size_t>(i) * ny + j] = col[i];
  }
  return a;
}

struct Box {
  int nx, ny;
  double h, dy, Lx, Ly;
};

double wn(int k, int n, double L) { return 2.0 * kPi * (k <= n / 2 ? k : k - n) / L; }

// ||(1 + |k|^2)^{-s/2} f^||, or with lap set ||(|k|^2 / (1 + |k|^2)) f^||.
double sobolev_proxy(const std::vector<double>& f, const Box& b, double s, bool lap = false) {
  const auto fh = fft2(f, b.nx, b.ny);
  double acc = 0;
  for (int i = 0; i < b.nx; ++i) {
    const double kx = wn(i, b.nx, b.Lx);
    for (int j = 0; j < b.ny; ++j) {
      const double ky = wn(j, b.ny, b.Ly), k2 = kx * kx + ky * ky;
      const double m = lap ? k2 / (1.0 + k2) : std::pow(1.0 + k2, -0.5 * s);
      acc += std::norm(fh[static_cast<std::size_t>(i) * b.ny + j]) * m * m;
    }
  }
  // forward transforms are normalised by 1/n
  return std::sqrt(acc * b.h * b.dy * static_cast<double>(b.nx) * b.ny);
}

double l2_norm(const std::vector<double>& f, const Box& b) {
  double acc = 0;
  for (int i = 0; i < b.nx; ++i) {
    const double w = (i == 0 || i == b.nx - 1) ? 0.5 : 1.0;
    for (int j = 0; j < b.ny; ++j) acc += w * sqr(f[static_cast<std::size_t>(i) * b.ny + j]);
  }
  return std::sqrt(acc * b.h * b.dy);
}

}  // namespace

nlohmann::json ResidualNorms::to_json() const {
  return {{"eps", eps},   {"nx", nx},     {"ny", ny},       {"l2", l2},
          {"hm1", hm1},   {"hm2", hm2},   {"l2_scaled", l2_s}, {"hm1_scaled", hm1_s},
          {"hm2_scaled", hm2_s}, {"lap_w0_hm2", lap_w0_hm2}, {"w0_l2", w0_l2}, {"groups", groups}};
}

ResidualNorms residual_norms(const AppSolution& app, int points_per_layer, int ny) {
  if (points_per_layer < 8)
    fail("UnderResolved", "need at least 8 points per layer width, got " +
                              std::to_string(points_per_layer));
  if (ny < 8) fail("UnderResolved", "need at least 8 points in y");
  const double eps = app.geom.eps;
  const double x0 = app.x_left(), x1 = app.x_right();
  const int nx = static_cast<int>(std::ceil((x1 - x0) * points_per_layer / eps)) + 1;
  Box b{nx, ny, (x1 - x0) / (nx - 1), (app.geom.y_max - app.geom.y_min) / ny, 0.0,
        app.geom.y_max - app.geom.y_min};
  b.Lx = nx * b.h;
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  std::vector<double> r(n), jac(n), fric(n), diss(n), stiff(n), w0(n);
  const double e4 = std::pow(eps, -4.0);
  for (int i = 0; i < nx; ++i) {
    const double x = x0 + i * b.h;
    for (int j = 0; j < ny; ++j) {
      const double y = app.geom.y_min + j * b.dy;
      double py = 0, px = 0, lx = 0, ly = 0, lap = 0, d = 0, st = 0;
      for (const auto& p : app.pieces(x, y)) {
        const auto& a = p.a;
        const auto& u = p.u;
        py += a[1] * u[0];
        px += a[0] * u[1];
        lap += a[0] * u[2] + a[2] * u[0];
        lx += a[0] * u[3] + a[2] * u[1];
        ly += a[1] * u[2] + a[3] * u[0];
        d -= 2.0 * a[2] * u[2] + a[4] * u[0];
        if (p.layer)
          st += e4 * p.f;
        else
          d -= a[0] * u[4];   // the interior eps^-3 dx group cancels against curl
      }
      const std::size_t k = static_cast<std::size_t>(i) * ny + j;
      jac[k] = -py * lx + px * ly;
      fric[k] = lap;
      diss[k] = d;
      stiff[k] = st;
      r[k] = jac[k] + fric[k] + diss[k] + stiff[k];
      w0[k] = app.west_layer0(x, y);
    }
  }
  ResidualNorms out;
  out.eps = eps;
  out.nx = nx;
  out.ny = ny;
  out.l2 = l2_norm(r, b);
  out.hm1 = sobolev_proxy(r, b, 1.0);
  out.hm2 = sobolev_proxy(r, b, 2.0);
  const double s3 = eps * eps * eps;
  out.l2_s = s3 * out.l2;
  out.hm1_s = s3 * out.hm1;
  out.hm2_s = s3 * out.hm2;
  out.lap_w0_hm2 = sobolev_proxy(w0, b, 0.0, true);
  out.w0_l2 = l2_norm(w0, b);
  auto grp = [&](const std::vector<double>& g) {
    return nlohmann::json{{"l2", l2_norm(g, b)}, {"hm2", sobolev_proxy(g, b, 2.0)}};
  };
  out.groups = {{"jacobian", grp(jac)}, {"friction", grp(fric)}, {"dissipation", grp(diss)},
                {"stiff_layer", grp(stiff)}};
  return out;
}

nlohmann::json ResidualTrend::to_json() const {
  nlohmann::json j{{"hm2_decreasing", hm2_decreasing}, {"all_decreasing", all_decreasing},
                   {"raw_hm2_decreasing", raw_hm2_decreasing}, {"lap_fit", lap_fit.to_json()}};
  for (const auto& r : runs) j["runs"].push_back(r.to_json());
  return j;
}

ResidualTrend residual_trend(const DomainGeometry& g, const WindForcing& f,
                             const std::vector<double>& eps_list, int order, int points_per_layer,
                             int ny) {
  if (eps_list.size() < 2) fail("Usage", "need at least two eps values");
  ResidualTrend t;
  AssembleOptions opt;
  opt.order = order;
  for (double e : eps_list) {
    auto ge = g;
    ge.eps = e;
    t.runs.push_back(residual_norms(assemble_app(ge, f, opt), points_per_layer, ny));
  }
  auto dec = [&](auto get) {
    for (std::size_t i = 1; i < t.runs.size(); ++i)
      if (!(get(t.runs[i]) < get(t.runs[i - 1]) || get(t.runs[i]) == 0.0)) return false;
    return true;
  };
  t.hm2_decreasing = dec([](const ResidualNorms& r) { return r.hm2_s; });
  t.all_decreasing = t.hm2_decreasing && dec([](const ResidualNorms& r) { return r.hm1_s; }) &&
                     dec([](const ResidualNorms& r) { return r.l2_s; });
  t.raw_hm2_decreasing = dec([](const ResidualNorms& r) { return r.hm2; });
  if (eps_list.size() >= 3) {
    std::vector<double> v;
    for (const auto& r : t.runs) v.push_back(r.lap_w0_hm2);
    t.lap_fit = loglog_fit(eps_list, v);
    t.lap_fit.claimed = 0.5;
    t.lap_fit.pass = std::abs(t.lap_fit.slope - 0.5) <= 0.15;
  }
  return t;
}

// ---------------------------------------------------------------- Hardy

nlohmann::json HardyReport::to_json() const {
  return {{"eps", eps}, {"grid_sup", grid_sup}, {"exact", exact}, {"max_gap", max_gap}, {"ok", ok}};
}

HardyReport hardy_damping_bound(const std::vector<double>& eps_list, int samples) {
  if (samples < 3) fail("Usage", "too few samples");
  HardyReport h;
  h.eps = eps_list;
  h.exact = std::exp(-1.0);
  for (double e : eps_list) {
    if (!(e > 0.0)) fail("Usage", "eps must be positive");
    double s = 0;
    for (int i = 0; i < samples; ++i) {
      const double z = 20.0 * e * i / (samples - 1);
      s = std::max(s, (z / e) * std::exp(-z / e));
    }
    h.grid_sup.push_back(s);
    h.max_gap = std::max(h.max_gap, std::abs(s - h.exact));
  }
  h.ok = h.max_gap <= 1e-6;
  return h;
}

// ---------------------------------------------------------------- norm equivalence

nlohmann::json NormEquivalenceReport::to_json() const {
  return {{"n", n}, {"max_dev", max_dev}, {"fit", fit.to_json()},
          {"boundary_touching", boundary_touching}};
}

NormEquivalenceReport norm_equivalence_check(const std::vector<int>& n_list, int nfun,
                                             std::uint64_t seed, bool boundary_touching) {
  NormEquivalenceReport rep;
  rep.n = n_list;
  rep.boundary_touching = boundary_touching;
  struct Bump {
    double cx, cy, rx, ry, amp;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Bump> fs;
  for (int k = 0; k < nfun; ++k) {
    Bump b;
    b.rx = 0.1 + 0.2 * U(rng);
    b.ry = 0.1 + 0.2 * U(rng);
    // off-centre cut at x = 0 so that dx f does not vanish there
    b.cx = boundary_touching ? -0.3 * b.rx : b.rx + (1.0 - 2 * b.rx) * U(rng);
    b.cy = b.ry + (1.0 - 2 * b.ry) * U(rng);
    b.amp = 0.5 + U(rng);
    fs.push_back(b);
  }
  // (1 - t^2)^6 on |t| < 1: C^5, so the centred differences keep order 2.
  auto bump = [](double t) { return std::abs(t) >= 1.0 ? 0.0 : std::pow(1.0 - t * t, 6); };
  std::vector<double> hs;
  for (int n : n_list) {
    if (n < 8) fail("Usage", "grid too coarse");
    const double h = 1.0 / n;
    double worst = 0;
    for (const auto& b : fs) {
      std::vector<double> f(static_cast<std::size_t>(n + 1) * (n + 1));
      auto F = [&](int i, int j) -> double& { return f[static_cast<std::size_t>(i) * (n + 1) + j]; };
      for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
          F(i, j) = b.amp * bump((i * h - b.cx) / b.rx) * bump((j * h - b.cy) / b.ry);
      double lap2 = 0, hess2 = 0;
      for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j) {
          const double fxx = (F(i + 1, j) - 2 * F(i, j) + F(i - 1, j)) / (h * h);
          const double fyy = (F(i, j + 1) - 2 * F(i, j) + F(i, j - 1)) / (h * h);
          const double fxy =
              (F(i + 1, j + 1) - F(i + 1, j - 1) - F(i - 1, j + 1) + F(i - 1, j - 1)) / (4 * h * h);
          lap2 += sqr(fxx + fyy);
          hess2 += fxx * fxx + fyy * fyy + 2 * fxy * fxy;
        }
      if (hess2 > 0.0) worst = std::max(worst, std::abs(std::sqrt(lap2) - std::sqrt(hess2)) / std::sqrt(hess2));
    }
    rep.max_dev.push_back(worst);
    hs.push_back(h);
  }
  if (n_list.size() >= 3) {
    bool any = false;
    for (double d : rep.max_dev) any = any || d > 0.0;
    if (any) {
      try {
        rep.fit = loglog_fit(hs, rep.max_dev);
      } catch (const Error&) {
        rep.fit = OrderFit{};
      }
    }
    rep.fit.claimed = 2.0;
    rep.fit.pass = !any || std::abs(rep.fit.slope - 2.0) <= 0.35;
  }
  return rep;
}

}  // namespace blt
