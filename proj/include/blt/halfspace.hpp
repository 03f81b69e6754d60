#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blt/charpoly.hpp"
#include "blt/grid.hpp"
#include "json.hpp"

namespace blt {

// Layer operator per side: L = s dX - Lap^2 with s = +1 west, -1 east.
// Per Fourier mode exp(i xi Y), Lap = b dX^2 - 2 i sigma a xi dX - xi^2,
// sigma = +1 west, -1 east, b = 1 + a^2.
inline double transport_sign(Side s) { return s == Side::West ? 1.0 : -1.0; }

// The two roots used for the bounded half-space solution on X > 0, ordered
// as branches 1, 2. West: Re > 0, Im ascending. East: the slow root first
// (0 at xi = 0), then the fast one.
std::array<cplx, 2> decaying_modes(Side side, double alpha, double xi);
// The complementary pair (bounded as X -> -inf), slow one first.
std::array<cplx, 2> growing_modes(Side side, double alpha, double xi);

// Solve sum A = psi0, -sum lam A = psi1.
std::array<cplx, 2> mode_coefficients(const std::array<cplx, 2>& lam, cplx psi0, cplx psi1);

struct GreenCoeffs {
  std::array<cplx, 2> lp, lm;   // Z > 0 and Z < 0 exponents
  std::array<cplx, 2> Bp, Bm;
};

// Continuity of G, G', G'' and [G'''] = -1/(1+a^2)^2 at Z = 0.
GreenCoeffs green_coefficients(Side side, double alpha, double xi);
// d^k/dZ^k of the Green kernel, Z != 0.
cplx green_kernel(double alpha, double xi, double Z, int k = 0, Side side = Side::West);

struct JumpReport {
  std::array<cplx, 4> jumps{};   // [d^k G] = G(0+) - G(0-)
  double third_rel_err = 0.0;    // vs -1/(1+a^2)^2
  double lower_max = 0.0;        // max_k<3 |[d^k G]| relative to max|B|
};
JumpReport jump_check(double alpha, double xi, Side side = Side::West);

// Field synthesised from per-mode coefficients, with X-derivative layers
// 1..nderiv computed exactly.
FieldSlice solve_homogeneous(Side side, double alpha, const BoundaryTrace& trace,
                             const SpectralGrid& grid, int nderiv = 3);

// Spectral data variant: psi0h/psi1h are the Fourier coefficients.
FieldSlice solve_homogeneous_hat(Side side, double alpha, const std::vector<cplx>& psi0h,
                                 const std::vector<cplx>& psi1h, const SpectralGrid& grid,
                                 int nderiv = 3);

// Psi^F(X) = int_0^Xmax G(X - X') F(X') dX' per xi. F is interpolated by
// local quintics and integrated exactly against the exponentials; X-derivatives
// up to 3 come out of the same recursion.
FieldSlice solve_inhomogeneous(Side side, double alpha, const FieldSlice& F,
                               const SpectralGrid& grid, int nderiv = 3);

// Same convolution for one Fourier column sampled on x. Returns layers 0..nderiv.
std::vector<std::vector<cplx>> green_convolve(Side side, double alpha, double xi,
                                              const std::vector<double>& x,
                                              const std::vector<cplx>& f, int nderiv = 3);

// Throws QuadratureUnderResolved when the solve on every other X node differs
// from the full one by more than tol (relative, on the common nodes).
double quadrature_check(Side side, double alpha, const FieldSlice& F, const SpectralGrid& grid,
                        double tol = 1e-4);

// Throws DecayViolation if F does not decay like its recorded certificate.
void check_decay_certificate(const FieldSlice& F);

// Max over the grid of |L Psi - F| divided by max(|s dX Psi|, |Lap^2 Psi|),
// with finite differences of accuracy p in X (applied to the highest stored
// X-derivative layer when present).
double pde_residual(Side side, double alpha, const FieldSlice& psi, const FieldSlice* F,
                    const SpectralGrid& grid, int p = 4, bool use_layers = true);

// Per-mode residual of one column, for the ODE oracle tests.
double column_residual(Side side, double alpha, double xi, const std::vector<double>& x,
                       const std::vector<cplx>& u, const std::vector<cplx>& f, int p = 4);

// Jets: J[a][b] = dX^a dY^b Psi for a + b <= order.
struct Jet {
  int order = 0;
  int nx = 0, ny = 0;
  std::vector<std::vector<std::vector<cplx>>> J;

  const std::vector<cplx>& at(int a, int b) const { return J.at(a).at(b); }
};
Jet make_jet(const FieldSlice& f, const SpectralGrid& grid, int order);

// Q(Psi, Psit) = perp . ((perp Psi . grad) perp Psit) for the side's sheared
// operators, dealiased by the 2/3 rule. Throws AliasRisk if either input has
// energy in the top third of the spectrum.
FieldSlice Qw_nonlinearity(const FieldSlice& psi, const FieldSlice& psit, double alpha,
                           const SpectralGrid& grid);
// grad . ((perp Psi) Lap Psi), equal to Q(Psi, Psi).
FieldSlice Qw_divergence_form(const FieldSlice& psi, double alpha, const SpectralGrid& grid);

// Quadratic part of the nonlinear boundary operator at X = 0:
// (perp Psi . grad)(b D1 - a dY) Psi0 + (perp Psi0 . grad)(b D1 - a dY) Psi.
std::vector<cplx> boundary_quadratic_term(const FieldSlice& psi, const FieldSlice& background,
                                          double alpha, const SpectralGrid& grid);

// Zero the top third of the Y spectrum of every row.
void band_limit(FieldSlice& f);

// sup_X e^{delta X} of an H^2 proxy (L2 over the period of the jet up to order 2).
double weighted_h2_norm(const FieldSlice& f, const SpectralGrid& grid, double delta);

struct IterTrace {
  std::vector<double> increments;   // ||Psi_{n+1} - Psi_n||
  std::vector<double> ratios;       // r_n
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;            // final relative fixed-point residual
  nlohmann::json to_json() const;
};

enum class PicardMode { Nonlinear, Linearized };

struct PicardOptions {
  PicardMode mode = PicardMode::Nonlinear;
  const FieldSlice* background = nullptr;   // linearized mode only
  double tol = 1e-10;
  int max_iter = 30;
  double delta0 = 1.0;                      // smallness gate on the data
};

// Smallness proxy of the data: ||psi0||_{H^{3/2}} + ||psi1||_{H^{1/2}} (discrete).
double trace_size(const BoundaryTrace& t, double L);

std::pair<FieldSlice, IterTrace> picard_solve(Side side, double alpha, const BoundaryTrace& trace,
                                              const SpectralGrid& grid, const PicardOptions& opt);

// Smallest Re of the decaying modes over the grid's frequencies (east: the
// fast mode only).
double delta_min(Side side, double alpha, const SpectralGrid& grid);

// Least-squares decay rate of log sup_Y |f(X, .)| over X in [x0, x1].
double fit_decay_rate(const FieldSlice& f, double x0, double x1);

struct DecayReport {
  Side side = Side::West;
  double alpha = 0.0;
  int n = 2;
  double C = 0.0;
  double delta = 0.0;
  double mass_err = 0.0;       // max_Z |int K dY - chi(0) e^{-lambda(0) Z}|
  double moment_err = 0.0;     // max_Z |int Y dY K dY + mass|
  bool ok = true;
  nlohmann::json to_json() const;
};

// Tabulates K(Z, Y) = F^{-1}[chi(xi) e^{-lambda(xi) Z}] for the branch and fits
// |K| <= C e^{-delta Z} / (1 + |Y|)^n over Z in [zmin, zmax]. Branch 0 is the
// slow branch (east: the ergodic kernel), branch 1 the fast one.
DecayReport kernel_decay_report(Side side, double alpha, const SpectralGrid& grid, int n,
                                int branch = 0, double zmin = 1.0, double zmax = 20.0);

// Smooth low-pass cutoff: 1 for |xi| <= xi0/2, 0 for |xi| >= xi0.
double chi_cut(double xi, double xi0);

struct CancellationReport {
  int k = 0;
  std::vector<double> xis;
  std::vector<double> ratios;
  double max_ratio = 0.0;
  double spread = 0.0;      // max/min over the window
  bool ok = true;
};

// |xi|^{2k} int |Psi_hat|^2 dX / (|xi|^{2k-1}|psi0|^2 + |xi|^{2k-3}|psi1|^2)
// evaluated in closed form from the modes over xi in [xmin, xmax].
CancellationReport regularity_cancellation_check(double alpha, cplx psi0h, cplx psi1h, int k,
                                                 double xmin = 10.0, double xmax = 100.0,
                                                 int n = 40, double bound = 1e3);

}  // namespace blt
