#include "blt/charpoly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace blt {

namespace {

// Coefficients of (q2 z^2 + q1 z + q0)^2, low order first.
std::array<cplx, 5> square_quadratic(cplx q2, cplx q1, cplx q0) {
  return {q0 * q0, 2.0 * q1 * q0, q1 * q1 + 2.0 * q2 * q0, 2.0 * q2 * q1, q2 * q2};
}

}  // namespace

cplx QuarticCoeffs::eval(cplx z) const {
  cplx p = c[4];
  for (int k = 3; k >= 0; --k) p = p * z + c[k];
  return p;
}

cplx QuarticCoeffs::deriv(cplx z) const {
  cplx p = 4.0 * c[4];
  for (int k = 3; k >= 1; --k) p = p * z + double(k) * c[k];
  return p;
}

cplx QuarticCoeffs::defining(cplx z) const {
  if (side == Side::West) {
    cplx s = z * z + (alpha * z + I1 * xi) * (alpha * z + I1 * xi);
    return -z - s * s;
  }
  cplx s = z * z + (-alpha * z + I1 * xi) * (-alpha * z + I1 * xi);
  return -z + s * s;
}

double QuarticCoeffs::scale() const {
  double m = 0.0;
  for (auto& v : c) m = std::max(m, std::abs(v));
  return m;
}

QuarticCoeffs western_coeffs(double alpha, double xi) {
  const double b = 1.0 + alpha * alpha;
  auto sq = square_quadratic(b, 2.0 * I1 * alpha * xi, -xi * xi);
  QuarticCoeffs q;
  for (int k = 0; k < 5; ++k) q.c[k] = -sq[k];
  q.c[1] -= 1.0;
  q.side = Side::West;
  q.alpha = alpha;
  q.xi = xi;
  return q;
}

QuarticCoeffs eastern_coeffs(double alpha, double xi) {
  const double b = 1.0 + alpha * alpha;
  auto sq = square_quadratic(b, -2.0 * I1 * alpha * xi, -xi * xi);
  QuarticCoeffs q;
  q.c = sq;
  q.c[1] -= 1.0;
  q.side = Side::East;
  q.alpha = alpha;
  q.xi = xi;
  return q;
}

QuarticCoeffs quartic_coeffs(Side side, double alpha, double xi) {
  return side == Side::West ? western_coeffs(alpha, xi) : eastern_coeffs(alpha, xi);
}

void sort_roots(std::vector<cplx>& r) {
  std::sort(r.begin(), r.end(), [](cplx a, cplx b) {
    const double tie = 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
    if (std::abs(a.real() - b.real()) > tie) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

std::array<cplx, 4> quartic_roots(const QuarticCoeffs& q, double tol) {
  if (!(tol > 0.0 && tol <= 1e-6)) fail("Precondition", "tol must lie in (0, 1e-6]");
  if (q.c[4] == cplx(0.0)) fail("Precondition", "leading coefficient vanishes");
  std::array<cplx, 4> a;
  for (int k = 0; k < 4; ++k) a[k] = q.c[k] / q.c[4];
  auto monic = [&](cplx z) { return (((z + a[3]) * z + a[2]) * z + a[1]) * z + a[0]; };

  double R = 0.0;
  for (int k = 0; k < 4; ++k) R = std::max(R, std::pow(std::abs(a[k]), 1.0 / (4 - k)));
  R = std::max(2.0 * R, 1e-3);
  std::array<cplx, 4> z;
  for (int k = 0; k < 4; ++k) z[k] = std::polar(R, 2.0 * kPi * k / 4.0 + 0.4);

  const int max_iter = 2000;
  int quiet = 0;
  for (int it = 0; it < max_iter && quiet < 3; ++it) {
    double change = 0.0;
    for (int k = 0; k < 4; ++k) {
      cplx den = 1.0;
      for (int j = 0; j < 4; ++j)
        if (j != k) den *= (z[k] - z[j]);
      if (den == cplx(0.0)) den = 1e-300;
      const cplx dz = monic(z[k]) / den;
      z[k] -= dz;
      change = std::max(change, std::abs(dz) / std::max(1.0, std::abs(z[k])));
    }
    quiet = change < 1e-15 ? quiet + 1 : 0;
  }
  for (int k = 0; k < 4; ++k) {
    for (int s = 0; s < 2; ++s) {
      const cplx d = q.deriv(z[k]);
      if (d == cplx(0.0)) break;
      const cplx step = q.eval(z[k]) / d;
      const cplx cand = z[k] - step;
      if (std::abs(q.eval(cand)) <= std::abs(q.eval(z[k]))) z[k] = cand;
    }
    const double res = std::abs(q.eval(z[k])) /
                       (q.scale() * std::pow(std::max(1.0, std::abs(z[k])), 4));
    if (!(res <= tol)) {
      std::ostringstream os;
      os << "residual " << res << " at alpha=" << q.alpha << " xi=" << q.xi;
      fail("NonConvergence", os.str());
    }
  }
  std::vector<cplx> v(z.begin(), z.end());
  sort_roots(v);
  std::copy(v.begin(), v.end(), z.begin());
  return z;
}

ClassifiedRoots solve_quartic(const QuarticCoeffs& q, double tol) {
  ClassifiedRoots cr;
  cr.all = quartic_roots(q, tol);
  const double sc = q.scale();
  for (const cplx& r : cr.all) {
    cr.max_residual = std::max(cr.max_residual,
                               std::abs(q.eval(r)) / (sc * std::pow(std::max(1.0, std::abs(r)), 4)));
    // The slow root is about -xi^4, so the axis test is relative to |r|.
    const bool near_zero = q.xi == 0.0 && std::abs(r) <= kZeroRootTol;
    if (near_zero || std::abs(r.real()) <= kZeroRootTol * std::abs(r)) {
      if (near_zero && !cr.zero) {
        cr.zero = cplx(0.0, 0.0);
        continue;
      }
      std::ostringstream os;
      os << "root " << r << " on the imaginary axis at alpha=" << q.alpha << " xi=" << q.xi;
      fail("DegenerateClassification", os.str());
    }
    (r.real() > 0.0 ? cr.pos : cr.neg).push_back(r);
  }
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) gap = std::min(gap, std::abs(cr.all[i] - cr.all[j]));
  cr.min_pairwise_gap = gap;
  const bool split_ok = q.xi != 0.0 ? (cr.pos.size() == 2 && cr.neg.size() == 2 && !cr.zero)
                                    : (cr.zero && cr.pos.size() == (q.side == Side::West ? 2u : 1u) &&
                                       cr.neg.size() == (q.side == Side::West ? 1u : 2u));
  if (!split_ok) {
    std::ostringstream os;
    os << "split " << cr.pos.size() << "/" << cr.neg.size() << " at alpha=" << q.alpha
       << " xi=" << q.xi;
    fail("DegenerateClassification", os.str());
  }
  return cr;
}

nlohmann::json CertReport::to_json() const {
  nlohmann::json j;
  j["sweep"] = sweep;
  j["n_points"] = n_points;
  j["min_gap"] = min_gap;
  j["max_inv_gap"] = max_inv_gap;
  j["min_abs_re"] = min_abs_re;
  j["max_residual"] = max_residual;
  j["zero_root_seen"] = zero_root_seen;
  j["failures"] = nlohmann::json::array();
  for (auto& f : failures) j["failures"].push_back({{"alpha", f.alpha}, {"xi", f.xi}, {"reason", f.reason}});
  return j;
}

CertReport certify_simple_offaxis(Side side, const SweepSpec& sw, const CertThresholds& thr) {
  CertReport rep;
  std::ostringstream os;
  os << to_string(side) << " alpha[" << sw.alpha_min << "," << sw.alpha_max << "]x" << sw.n_alpha
     << (sw.both_signs ? " xi+-[" : " xi[") << sw.xi_min << "," << sw.xi_max << "]x" << sw.n_xi
     << (sw.include_zero ? " +xi=0" : "");
  rep.sweep = os.str();
  rep.min_gap = std::numeric_limits<double>::infinity();
  rep.min_abs_re = std::numeric_limits<double>::infinity();

  std::vector<double> xis;
  for (double x : logspace(sw.xi_min, sw.xi_max, sw.n_xi)) {
    xis.push_back(x);
    if (sw.both_signs) xis.push_back(-x);
  }
  if (sw.include_zero) xis.push_back(0.0);
  const auto alphas = linspace(sw.alpha_min, sw.alpha_max, sw.n_alpha);

  for (double a : alphas) {
    for (double x : xis) {
      ++rep.n_points;
      const auto q = quartic_coeffs(side, a, x);
      ClassifiedRoots cr;
      try {
        cr = solve_quartic(q, 1e-12);
      } catch (const Error& e) {
        rep.failures.push_back({a, x, e.what()});
        continue;
      }
      rep.max_residual = std::max(rep.max_residual, cr.max_residual);
      rep.min_gap = std::min(rep.min_gap, cr.min_pairwise_gap);
      if (cr.max_residual > thr.residual) rep.failures.push_back({a, x, "residual"});
      if (!(cr.min_pairwise_gap > thr.gap)) rep.failures.push_back({a, x, "gap"});
      if (x == 0.0) {
        if (cr.zero) rep.zero_root_seen = true;
        continue;
      }
      for (const cplx& r : cr.all) {
        rep.min_abs_re = std::min(rep.min_abs_re, std::abs(r.real()));
        if (!(std::abs(r.real()) > thr.abs_re)) rep.failures.push_back({a, x, "abs_re"});
      }
    }
  }
  rep.max_inv_gap = 1.0 / rep.min_gap;
  return rep;
}

void require_certified(const CertReport& r) {
  if (r.ok()) return;
  std::ostringstream os;
  os << r.failures.size() << " offending points, first alpha=" << r.failures[0].alpha
     << " xi=" << r.failures[0].xi << " (" << r.failures[0].reason << ")";
  fail("CertFailure", os.str());
}

GapMinimum minimize_gap(Side side, double amin, double amax, double xmin, double xmax,
                        int n_alpha, int n_xi, int refine_levels) {
  GapMinimum best{std::numeric_limits<double>::infinity(), 0.0, 0.0};
  double a0 = amin, a1 = amax, x0 = xmin, x1 = xmax;
  for (int level = 0; level <= refine_levels; ++level) {
    for (double a : linspace(a0, a1, n_alpha))
      for (double x : linspace(x0, x1, n_xi)) {
        auto r = quartic_roots(quartic_coeffs(side, a, x));
        for (int i = 0; i < 4; ++i)
          for (int j = i + 1; j < 4; ++j) {
            const double g = std::abs(r[i] - r[j]);
            if (g < best.gap) best = {g, a, x};
          }
      }
    const double da = (a1 - a0) / std::max(1, n_alpha - 1), dx = (x1 - x0) / std::max(1, n_xi - 1);
    a0 = std::max(amin, best.alpha - 2 * da);
    a1 = std::min(amax, best.alpha + 2 * da);
    x0 = std::max(xmin, best.xi - 2 * dx);
    x1 = std::min(xmax, best.xi + 2 * dx);
  }
  return best;
}

}  // namespace blt
