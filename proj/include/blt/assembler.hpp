#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "blt/common.hpp"
#include "blt/fit.hpp"
#include "json.hpp"

namespace blt {

// Values and y-derivatives 0..4 of a slow coefficient.
using YJet = std::array<double, 5>;
YJet jet_mul(const YJet& a, const YJet& b);
YJet jet_scale(const YJet& a, double s);
YJet jet_add(const YJet& a, const YJet& b);

// Wind-stress curl. The bundled kinds are separable,
//   curl tau = amp m(t) S(xh) G(yh),
// with xh = (x - x_a) / (x_b - x_a) and yh the y coordinate rescaled so that
// [y_min + margin, y_max - margin] maps to [0, 1]; G vanishes outside it.
//   double_gyre: S = degree-7 smoothstep (0 at xh = 0 and 1 at xh = 1, both
//                with three vanishing derivatives), G = sin(2 pi yh) sin^4(pi yh).
//   sin_x:       S = sin(pi xh), same G.
// m(t) = 1 + time_amp sin(omega t). custom takes an arbitrary callable.
struct WindForcing {
  enum class Kind { Zero, DoubleGyre, SinX, Custom };
  Kind kind = Kind::Zero;
  double amp = 0.0;
  double x_a = 0.0, x_b = 1.0;
  double y_min = 0.0, y_max = 1.0, margin = 0.1;
  double time_amp = 0.0, omega = 0.0;
  std::function<double(double, double, double)> custom;

  static WindForcing zero();
  static WindForcing double_gyre(double amp, double x_a, double x_b, double y_min, double y_max,
                                 double margin);
  static WindForcing sin_x(double amp, double x_a, double x_b, double y_min, double y_max,
                           double margin);

  double curl(double t, double x, double y) const;
  double time_factor(double t) const;
  bool separable() const { return kind != Kind::Custom; }
  double x_profile(double xh, int deriv = 0) const;
  // int_0^xh S, closed form.
  double x_antiderivative(double xh) const;
  double y_deriv(double y, int k) const;
  YJet y_profile(double y, int shift = 0) const;   // d^{k + shift} G, k = 0..4
  // Exact int_x^{x_b} curl dx for the separable kinds.
  double tail_integral(double t, double x, double y) const;
  std::string kind_name() const;
  nlohmann::json to_json() const;
};

struct DomainGeometry {
  std::function<double(double)> chi_w, chi_e;
  double gamma_w = 1.0, gamma_e = 1.0;   // flat wall depths in layer units
  double y_min = 0.0, y_max = 1.0;
  double eps = 0.05;
  bool straight = false;                  // chi_w, chi_e constant
  double xw0 = 0.0, xe0 = 1.0;

  static DomainGeometry box(double xw, double xe, double y_min, double y_max, double eps,
                            double gamma_w = 1.0, double gamma_e = 1.0);
  void validate() const;
  nlohmann::json to_json() const;
};

// -int_x^{chi_e(y)} curl tau dx' by adaptive Gauss-Kronrod; 0 outside
// [chi_w, chi_e]. Throws QuadratureFailure when the error estimate exceeds tol.
double sverdrup_at(const WindForcing& f, const DomainGeometry& g, double t, double x, double y,
                   double tol = 1e-12);

struct InteriorField {
  std::vector<double> x, y;
  std::vector<double> psi;   // y fastest: psi[i * ny + j]
  double operator()(int i, int j) const { return psi[static_cast<std::size_t>(i) * y.size() + j]; }
};
InteriorField sverdrup_interior(const WindForcing& f, const DomainGeometry& g, double t,
                                const std::vector<double>& xs, const std::vector<double>& ys,
                                double tol = 1e-12);

// phi(y) = int_{chi_w}^{chi_e} curl tau dx, so Psi_int(chi_w) = -phi.
double jump_phi(const WindForcing& f, const DomainGeometry& g, double t, double y,
                double tol = 1e-12);

// Sum of c X^m e^{-mu X}, m in {0, 1}.
struct ExpSum {
  struct Term {
    cplx c;
    int m;
    cplx mu;
  };
  std::vector<Term> terms;
  double eval(double X, int deriv = 0) const;
  ExpSum derivative() const;
  ExpSum operator*(const ExpSum& o) const;
  ExpSum operator+(const ExpSum& o) const;
  ExpSum scaled(cplx s) const;
};

// Layer profile at xi = 0 on (-gamma, 0) u (0, inf): s u' - b^2 u'''' = f
// (s = +1 west, -1 east), u = u' = 0 at the wall, [d^k u](0) = g_k for
// k = 0..3, bounded at infinity. Each piece is an ExpSum.
struct LayerProfile {
  Side side = Side::West;
  double alpha = 0.0;
  double gamma = 1.0;
  ExpSum left, right;
  ExpSum src_left, src_right;
  double eval(double X, int deriv = 0) const;
  double source(double X) const;
  // Coefficient of the non-decaying constant mode (east only, else 0).
  double far_field() const;
};

LayerProfile solve_layer_profile(Side side, double alpha, double gamma, const std::array<double, 4>& g,
                                 const ExpSum& src_left = {}, const ExpSum& src_right = {});

// Decaying xi = 0 profile with trace (psi0, psi1) at X = 0. The east side has
// a single decaying mode and throws ConstraintViolation unless
// psi1 = -b^{-2/3} psi0.
struct MunkProfile {
  Side side = Side::West;
  double alpha = 0.0;
  ExpSum u;
  double eval(double X, int deriv = 0) const { return u.eval(X, deriv); }
};
MunkProfile munk_reference(double alpha, double psi0, double psi1, Side side = Side::West);

struct AssembleOptions {
  int order = 1;
  double t = 0.0;
  double smallness = 1.0;    // bound on sup |phi|
  double far_tol = 1e-8;     // shifted far-field tolerance of the eastern constant
};

// Order 0/1 approximate solution on a straight, flat-walled basin with alpha = 0.
// Terms are separable: a(y) u(x).
struct AppSolution {
  DomainGeometry geom;
  WindForcing forcing;
  AssembleOptions opt;
  LayerProfile P;    // west, unit jump
  LayerProfile Q;    // west, nonlinear source of order 1
  LayerProfile E;    // east, unit derivative jump
  double e_far = 0.0;          // far field of E, so C1 = e_far curl(chi_e)
  double far_shifted = 0.0;    // sup of the shifted eastern ergodic part at X_max
  double phi_sup = 0.0;

  double phi_factor() const;   // phi = phi_factor G
  YJet phi(double y) const;
  YJet dphi(double y) const;
  YJet C1(double y) const;
  YJet curl_e(double y) const;
  double x_left() const { return geom.xw0 - geom.eps * geom.gamma_w; }
  double x_right() const { return geom.xe0 + geom.eps * geom.gamma_e; }

  struct Piece {
    YJet a;
    std::array<double, 5> u;   // d^k/dx^k
    double f = 0.0;            // layer source times a, for the stiff group
    bool layer = false;
  };
  std::vector<Piece> pieces(double x, double y) const;
  double value(double x, double y) const;
  double west_layer0(double x, double y) const;   // Psi^0_w alone
  double east_layer1(double X_e, double y) const; // shifted Psi^1_e alone
};

AppSolution assemble_app(const DomainGeometry& g, const WindForcing& f,
                         const AssembleOptions& opt = {});

struct AppSample {
  std::vector<double> x, y;
  std::vector<double> psi;   // y fastest
  double boundary_residual = 0.0;   // max over both walls of |Psi| and h-scaled |dx Psi|
};
AppSample sample_app(const AppSolution& app, int nx, int ny);

// Residual of the steady QG operator applied to Psi_app. Terms are grouped
// before summation: the stiff layer group eps^-4 (s u' - u'''') = eps^-4 f and
// the Sverdrup group cancel symbolically. Norms are reported for the raw
// residual and for eps^3 r (the equation in units where the Sverdrup balance
// is O(1)).
struct ResidualNorms {
  double eps = 0.0;
  int nx = 0, ny = 0;
  double l2 = 0.0, hm1 = 0.0, hm2 = 0.0;             // raw r
  double l2_s = 0.0, hm1_s = 0.0, hm2_s = 0.0;       // eps^3 r
  double lap_w0_hm2 = 0.0;                           // || Lap Psi^0_w ||_{H^-2 proxy}
  double w0_l2 = 0.0;                                // || Psi^0_w ||_{L2}
  nlohmann::json groups;                             // per-group norms
  nlohmann::json to_json() const;
};
ResidualNorms residual_norms(const AppSolution& app, int points_per_layer = 16, int ny = 128);

struct ResidualTrend {
  std::vector<ResidualNorms> runs;
  bool hm2_decreasing = false;     // scaled
  bool all_decreasing = false;     // all three scaled norms
  bool raw_hm2_decreasing = false;
  OrderFit lap_fit;                // slope of lap_w0_hm2 vs eps, target 0.5
  nlohmann::json to_json() const;
};
ResidualTrend residual_trend(const DomainGeometry& g, const WindForcing& f,
                             const std::vector<double>& eps_list, int order = 1,
                             int points_per_layer = 16, int ny = 128);

struct HardyReport {
  std::vector<double> eps;
  std::vector<double> grid_sup;
  double exact = 0.0;
  double max_gap = 0.0;
  bool ok = false;
  nlohmann::json to_json() const;
};
// sup_{z >= 0} (z / eps) e^{-z / eps} sampled on z in [0, 20 eps].
HardyReport hardy_damping_bound(const std::vector<double>& eps_list, int samples = 200001);

// ||Lap f||_2 versus ||D^2 f||_F for random smooth bumps on the unit square.
struct NormEquivalenceReport {
  std::vector<int> n;
  std::vector<double> max_dev;   // max over functions of relative deviation
  OrderFit fit;
  bool boundary_touching = false;
  nlohmann::json to_json() const;
};
NormEquivalenceReport norm_equivalence_check(const std::vector<int>& n_list, int nfun,
                                             std::uint64_t seed, bool boundary_touching = false);

}  // namespace blt
