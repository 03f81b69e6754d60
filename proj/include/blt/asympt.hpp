#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blt/common.hpp"
#include "blt/fit.hpp"

namespace blt {

enum class Regime { LowFreq, HighFreq };
std::string to_string(Regime r);

// Low: |xi| <= 0.5, high: |xi| >= 5. Throws RegimeViolation otherwise.
void check_regime(Regime r, double xi);

// Branch j in {1, 2}. Low west: (1 + (-1)^j i sqrt3) / (2 b^{2/3}), plus
// -4 i a xi / (3b) when first_order. Low east: xi^4 and b^{-2/3}.
// High: zeta^2 |xi| + (-1)^j (i/2) zeta |xi|^{-1/2} (west, zeta^2 = (1 - ia)/b)
// and omega^2 |xi| + (-1)^j (omega/2) |xi|^{-1/2} (east, omega^2 = (1 + ia)/b);
// negative xi by conjugation.
cplx lambda_asympt(Side side, double alpha, double xi, int branch, Regime regime,
                   bool first_order = true);

// Coefficient pair ordered like the branches of lambda_asympt.
std::array<cplx, 2> coeff_A_asympt(Side side, double alpha, double xi, Regime regime, cplx psi0,
                                   cplx psi1);

// Low-frequency limits of (B1+, B2+, B1-, B2-) of the western Green kernel.
std::array<cplx, 4> green_B_asympt(double alpha, double xi);

// Leading Steklov entries (row 0: m20, m21; row 1: m30, m31).
Eigen::Matrix2cd steklov_M_asympt(Side side, double alpha, double xi, Regime regime);
// The reference tables, kept for comparison only.
Eigen::Matrix2cd steklov_M_reference(Side side, double alpha, double xi, Regime regime);

struct Expansion {
  std::string name;
  Regime regime = Regime::LowFreq;
  Side side = Side::West;
  std::function<cplx(double alpha, double xi)> eval;
  // Exact values along a sorted |xi| sample, paired with eval's branch.
  std::function<std::vector<cplx>(double alpha, const std::vector<double>& xs)> numeric;
  double claimed_order = 1.0;   // sharp exponent of the remainder
  double reference_order = 1.0;     // exponent of the reference expansion
  // Odd terms vanish at alpha = 0, which raises some orders there. NaN when
  // the generic order still applies.
  double order_alpha0 = std::numeric_limits<double>::quiet_NaN();
  double lo = 0.01, hi = 0.5;   // |xi| window

  double order(double alpha) const {
    return alpha == 0.0 && !std::isnan(order_alpha0) ? order_alpha0 : claimed_order;
  }
};

std::vector<Expansion> expansion_registry();

// Log-log fit of |numeric - eval| over the window. The slope is reported as
// an order: d log err / d log |xi| for low, its negative for high. Passes
// when |slope - claimed| <= 0.35 and r2 >= 0.9. Throws FitDegenerate when
// the errors underflow.
OrderFit fit_order(const Expansion& e, double alpha, double lo, double hi, int n_samples = 16);
OrderFit fit_order(const Expansion& e, double alpha, int n_samples = 16);

// Nearest-neighbour pairing at the first sample, then continuation with
// start_slope (d root / d xi) as the initial predictor.
std::vector<cplx> track_branch(Side side, double alpha, const std::vector<double>& xs, cplx start,
                               cplx start_slope = 0.0);

struct FitRow {
  std::string name;
  Regime regime;
  OrderFit fit;
};
void write_fit_csv(std::ostream& os, const std::vector<FitRow>& rows);

}  // namespace blt
