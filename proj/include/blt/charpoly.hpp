#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blt/common.hpp"
#include "json.hpp"

namespace blt {

// Monomial coefficients c[k] of lambda^k.
struct QuarticCoeffs {
  std::array<cplx, 5> c{};
  Side side = Side::West;
  double alpha = 0.0;
  double xi = 0.0;

  cplx eval(cplx z) const;        // Horner on c
  cplx deriv(cplx z) const;
  cplx defining(cplx z) const;    // the unexpanded expression
  double scale() const;           // max |c_k|
};

QuarticCoeffs western_coeffs(double alpha, double xi);
QuarticCoeffs eastern_coeffs(double alpha, double xi);
QuarticCoeffs quartic_coeffs(Side side, double alpha, double xi);

struct ClassifiedRoots {
  std::vector<cplx> pos;        // Re > 0, sorted
  std::vector<cplx> neg;        // Re < 0, sorted
  std::optional<cplx> zero;     // only at xi == 0
  std::array<cplx, 4> all{};    // sorted
  double min_pairwise_gap = 0.0;
  double max_residual = 0.0;    // max |P(r)| / (max|c| max(1,|r|)^4)
};

inline constexpr double kZeroRootTol = 1e-10;

// Durand-Kerner from a scaled circle plus two Newton polish steps per root.
std::array<cplx, 4> quartic_roots(const QuarticCoeffs& q, double tol = 1e-12);

// Sort with a tie tolerance on the real part so conjugate pairs keep a stable
// order (Im ascending) even when their real parts differ by round-off.
void sort_roots(std::vector<cplx>& r);

ClassifiedRoots solve_quartic(const QuarticCoeffs& q, double tol = 1e-12);

struct CertFailureEntry {
  double alpha;
  double xi;
  std::string reason;
};

struct CertReport {
  std::string sweep;
  std::size_t n_points = 0;
  double min_gap = 0.0;          // min over sweep of min pairwise gap
  double max_inv_gap = 0.0;      // max over sweep of 1/gap
  double min_abs_re = 0.0;       // min over xi != 0 of min |Re root|
  double max_residual = 0.0;
  std::vector<CertFailureEntry> failures;
  bool zero_root_seen = false;   // xi = 0 sampled and the zero root reported

  bool ok() const { return failures.empty(); }
  nlohmann::json to_json() const;
};

struct SweepSpec {
  double alpha_min = -2.0, alpha_max = 2.0;
  double xi_min = 0.01, xi_max = 50.0;   // |xi| range, log spaced
  int n_alpha = 200, n_xi = 200;
  bool both_signs = true;
  bool include_zero = false;
};

// Thresholds of the certification (criterion 1).
struct CertThresholds {
  double residual = 1e-10;
  double gap = 1e-6;
  double abs_re = 1e-8;
};

CertReport certify_simple_offaxis(Side side, const SweepSpec& sweep,
                                  const CertThresholds& thr = {});
// Throws CertFailure if the report has failures.
void require_certified(const CertReport& r);

// Grid minimisation of the smallest pairwise root gap.
struct GapMinimum {
  double gap;
  double alpha;
  double xi;
};
GapMinimum minimize_gap(Side side, double amin, double amax, double xmin, double xmax,
                        int n_alpha, int n_xi, int refine_levels = 3);

}  // namespace blt
