#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "blt/fit.hpp"
#include "blt/grid.hpp"
#include "json.hpp"

namespace blt {

// Boundary symbol: (rho2, rho3)^T = M(xi) (psi0, psi1)^T, psi1 = dX Psi at X = 0.
// West: rho2 = b Lap_w Psi, rho3 = -(b dX - 2a dY) Lap_w Psi + Psi/2.
// East: the reference mirror, rho2 = -b Lap_e Psi, rho3 = -(b dX - 2a dY) Lap_e Psi + Psi/2.
Eigen::Matrix2cd symbol(Side side, double alpha, double xi);

// Same matrix built from the per-mode boundary values and the 2x2 inverse of
// the trace map. Independent of the closed forms, kept for cross-checks.
Eigen::Matrix2cd symbol_modal(Side side, double alpha, double xi);

struct SteklovOutput {
  std::vector<double> rho2, rho3;
};

SteklovOutput apply(Side side, double alpha, const BoundaryTrace& trace, const SpectralGrid& grid);

// Nonlinear boundary operator of the rough-channel problem: the linear rho3
// plus the quadratic term around the background (western layer). psi must
// carry its first two X-derivative layers or enough X nodes for FD.
std::vector<double> apply_A3_tilde(double alpha, const FieldSlice& psi, const FieldSlice& background,
                                   const SpectralGrid& grid);

// Discrete pairing Re(<rho3, psi0> + <rho2, psi1>) over the period, and the
// scale ||rho3|| ||psi0|| + ||rho2|| ||psi1|| it is compared against.
std::pair<double, double> sign_pairing(Side side, double alpha, const BoundaryTrace& trace,
                                       const SpectralGrid& grid);

// Reproducible random real trace with Gaussian Fourier coefficients damped by
// 1/(1 + xi^2), supported on |xi| <= xi_band.
BoundaryTrace random_trace(const SpectralGrid& grid, std::uint64_t seed, double xi_band);

struct SignReport {
  Side side = Side::West;
  double alpha = 0.0;
  int n = 0;
  std::uint64_t seed = 0;
  double max_normalized = 0.0;   // max pairing / scale
  int worst = -1;
  int violations = 0;
  BoundaryTrace worst_trace;
  bool ok() const { return violations == 0; }
  nlohmann::json to_json() const;
};

SignReport negativity_check(Side side, double alpha, int n_random, const SpectralGrid& grid,
                            std::uint64_t seed, double xi_band = 4.0, double tol = 1e-10);
// Throws SignViolation naming the offending sample.
void require_sign(const SignReport& r);

// ||rho2||_{H^{-1/2}} + ||rho3||_{H^{-3/2}} over ||psi0||_{H^{3/2}} + ||psi1||_{H^{1/2}}.
double boundedness_ratio(Side side, double alpha, const BoundaryTrace& trace, const SpectralGrid& grid);
double max_boundedness_ratio(Side side, double alpha, int n_random, const SpectralGrid& grid,
                             std::uint64_t seed, double xi_band);

struct GrowthFit {
  OrderFit fit;      // |d^N m_ij| against 1 + |xi|
  double C = 0.0;    // max |d^N m_ij| / (1 + |xi|)^{3 - N}
};

// Central differences of order N in xi with step h_rel * xi. Row i in {2, 3},
// column j in {0, 1} as in m_{i,j}. Passes when slope <= 3 - N + 0.35.
GrowthFit derivative_growth(Side side, double alpha, int N, int i, int j, double xlo, double xhi,
                            int n_samples = 24, double h_rel = 1e-3);

// CSV: xi then (re, im) of m20, m21, m30, m31.
void write_symbol_csv(std::ostream& os, Side side, double alpha, const std::vector<double>& xis);

struct TailFit {
  double exponent = 0.0;   // |K(Y)| ~ |Y|^{-exponent}
  double r2 = 0.0;
};

// Inverse FFT of (1 - chi) m_ij with a Gaussian roll-off at xi_damp, fitted
// over Y in [ymin, L/4]. Informational.
TailFit kernel_tail_fit(Side side, double alpha, int i, int j, const SpectralGrid& grid,
                        double xi_damp, double ymin);

}  // namespace blt
