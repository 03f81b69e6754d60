#include "blt/asympt.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "blt/charpoly.hpp"
#include "blt/halfspace.hpp"
#include "blt/steklov.hpp"

namespace blt {

std::string to_string(Regime r) { return r == Regime::LowFreq ? "low_freq" : "high_freq"; }

void check_regime(Regime r, double xi) {
  const double a = std::abs(xi);
  if ((r == Regime::LowFreq && a > 0.5) || (r == Regime::HighFreq && a < 5.0)) {
    std::ostringstream os;
    os << "|xi| = " << a << " outside the " << to_string(r) << " window";
    fail("RegimeViolation", os.str());
  }
}

namespace {

double bb(double a) { return 1.0 + a * a; }
double sgnj(int j) { return j == 1 ? -1.0 : 1.0; }   // (-1)^j

void check_branch(int j) {
  if (j != 1 && j != 2) fail("Usage", "branch must be 1 or 2");
}

// Positive-xi formula, conjugated for negative xi.
template <class F>
auto reflect(double xi, F&& f) {
  auto v = f(std::abs(xi));
  if (xi < 0) {
    if constexpr (std::is_same_v<decltype(v), cplx>) return std::conj(v);
    else return v.conjugate().eval();
  } else {
    if constexpr (std::is_same_v<decltype(v), cplx>) return v;
    else return v.eval();
  }
}

}  // namespace

cplx lambda_asympt(Side side, double alpha, double xi, int branch, Regime regime, bool first_order) {
  check_branch(branch);
  check_regime(regime, xi);
  const double b = bb(alpha), s = sgnj(branch);
  if (regime == Regime::LowFreq) {
    if (side == Side::West) {
      cplx l = cplx(1.0, s * std::sqrt(3.0)) / (2.0 * std::pow(b, 2.0 / 3.0));
      if (first_order) l += -4.0 * I1 * alpha * xi / (3.0 * b);
      return l;
    }
    return branch == 1 ? cplx(std::pow(xi, 4)) : cplx(std::pow(b, -2.0 / 3.0));
  }
  return reflect(xi, [&](double x) {
    if (side == Side::West) {
      const cplx z2 = cplx(1.0, -alpha) / b, z = std::sqrt(z2);
      return z2 * x + (first_order ? s * 0.5 * I1 * z / std::sqrt(x) : 0.0);
    }
    const cplx w2 = cplx(1.0, alpha) / b, w = std::sqrt(w2);
    return w2 * x + (first_order ? s * 0.5 * w / std::sqrt(x) : 0.0);
  });
}

std::array<cplx, 2> coeff_A_asympt(Side side, double alpha, double xi, Regime regime, cplx psi0,
                                   cplx psi1) {
  check_regime(regime, xi);
  const double b = bb(alpha);
  if (regime == Regime::LowFreq) {
    if (side == Side::East) {
      const double c = std::pow(b, 2.0 / 3.0);
      return {psi0 + c * psi1, -c * psi1};
    }
    std::array<cplx, 2> l = {lambda_asympt(side, alpha, xi, 1, regime, false),
                             lambda_asympt(side, alpha, xi, 2, regime, false)};
    return mode_coefficients(l, psi0, psi1);
  }
  auto pos = [&](double x, cplx p0, cplx p1) {
    std::array<cplx, 2> A;
    for (int j = 1; j <= 2; ++j) {
      const double s = sgnj(j);
      if (side == Side::West) {
        const cplx z = std::sqrt(cplx(1.0, -alpha) / b);
        A[j - 1] = s * I1 * z * std::pow(x, 1.5) * p0 + 0.5 * p0 + s * I1 / z * std::sqrt(x) * p1;
      } else {
        const cplx w = std::sqrt(cplx(1.0, alpha) / b);
        A[j - 1] = -s * w * std::pow(x, 1.5) * p0 + 0.5 * p0 - s / w * std::sqrt(x) * p1;
      }
    }
    return A;
  };
  if (xi >= 0) return pos(xi, psi0, psi1);
  auto A = pos(-xi, std::conj(psi0), std::conj(psi1));
  return {std::conj(A[0]), std::conj(A[1])};
}

std::array<cplx, 4> green_B_asympt(double alpha, double xi) {
  (void)alpha;  // the limits do not depend on alpha
  check_regime(Regime::LowFreq, xi);
  return {-1.0 / 3.0, -1.0 / 3.0, -1.0, 1.0 / 3.0};
}

Eigen::Matrix2cd steklov_M_asympt(Side side, double alpha, double xi, Regime regime) {
  check_regime(regime, xi);
  const double a = alpha, b = bb(a);
  Eigen::Matrix2cd M;
  if (regime == Regime::LowFreq) {
    const double x2 = xi * xi;
    if (side == Side::West)
      M << -std::pow(b, 2.0 / 3.0), -std::pow(b, 4.0 / 3.0), -0.5, -b * x2;
    else
      M << b * x2, std::pow(b, 4.0 / 3.0), 0.5, -std::pow(b, 2.0 / 3.0);
    return M;
  }
  return reflect(xi, [&](double x) {
    Eigen::Matrix2cd R;
    const cplx w(1.0, -a), wb(1.0, a);
    if (side == Side::West) {
      const cplx c30 = 0.5 - w * b / 2.0 + I1 * a * w * w / 4.0;
      R << -2.0 * w * x * x, -2.0 * b * x, -2.0 * x * x * x + c30, -2.0 * wb * x * x;
    } else {
      const cplx c30 = 0.5 + I1 * a * wb * wb / 4.0 + wb * wb * wb / 2.0;
      R << 2.0 * wb * x * x, 2.0 * b * x, -2.0 * (wb * wb * wb / b + I1 * a) * x * x * x + c30,
          -2.0 * cplx(1.0, 3.0 * a) * x * x;
    }
    return R;
  });
}

Eigen::Matrix2cd steklov_M_reference(Side side, double alpha, double xi, Regime regime) {
  check_regime(regime, xi);
  const double a = alpha, b = bb(a), ax = std::abs(xi);
  Eigen::Matrix2cd M;
  if (regime == Regime::LowFreq) {
    if (side == Side::West)
      M << -std::pow(b, 2.0 / 3.0), -std::pow(b, 4.0 / 3.0), -0.5, -8.0 * a * I1 * b * ax;
    else
      M << b * xi * xi, std::pow(b, 4.0 / 3.0), 0.5, -std::pow(b, 2.0 / 3.0);
    return M;
  }
  return reflect(xi, [&](double x) {
    Eigen::Matrix2cd R;
    if (side == Side::West)
      R << -2.0 * cplx(1, a) * x * x, -2.0 * cplx(1, 2 * a) * b * x,
          2.0 * (cplx(7, 2 * a) - 8.0 * cplx(1, a) / b) * x * x * x, -2.0 * cplx(1 - 8 * a * a, 7 * a) * x * x;
    else
      R << 2.0 * cplx(1, -a) * x * x, 2.0 * cplx(1, -2 * a) * b * x,
          2.0 * (cplx(3, -2 * a) - 4.0 * cplx(1, -a) / b) * x * x * x, -2.0 * cplx(1, -3 * a) * x * x;
    return R;
  });
}

std::vector<cplx> track_branch(Side side, double alpha, const std::vector<double>& xs, cplx start,
                               cplx start_slope) {
  std::vector<cplx> out;
  if (xs.empty()) return out;
  auto nearest = [&](double x, cplx guess) {
    auto c = decaying_modes(side, alpha, x);
    return std::abs(c[0] - guess) <= std::abs(c[1] - guess) ? c[0] : c[1];
  };
  cplx prev = nearest(xs[0], start);
  cplx slope = start_slope;   // d root / d xi from the last substep
  double xp = xs[0];
  out.push_back(prev);
  // Fine substeps between samples, each predicted by linear extrapolation;
  // the two branches can sit much closer than the sample spacing.
  constexpr int kSub = 64;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    for (int k = 1; k <= kSub; ++k) {
      const double x = xs[i - 1] + (xs[i] - xs[i - 1]) * k / kSub;
      const cplx pick = nearest(x, prev + slope * (x - xp));
      slope = (pick - prev) / (x - xp);
      prev = pick;
      xp = x;
    }
    out.push_back(prev);
  }
  return out;
}

namespace {

// Samples ordered from the accurate end of the window.
std::vector<double> from_accurate_end(Regime r, std::vector<double> xs) {
  std::sort(xs.begin(), xs.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (r == Regime::HighFreq) std::reverse(xs.begin(), xs.end());
  return xs;
}

Expansion root_expansion(Side side, Regime r, int branch, bool first, double claimed, double reference,
                         double lo, double hi) {
  Expansion e;
  std::ostringstream os;
  os << (side == Side::West ? "lambda_west_" : "mu_east_") << (r == Regime::LowFreq ? "low" : "high")
     << (first ? "_first" : "_lead") << "_b" << branch;
  e.name = os.str();
  e.regime = r;
  e.side = side;
  e.eval = [=](double a, double xi) { return lambda_asympt(side, a, xi, branch, r, first); };
  e.numeric = [=](double a, const std::vector<double>& xs) {
    auto ord = from_accurate_end(r, xs);
    const double x0 = ord.front(), h = 1e-4 * std::abs(x0);
    const double toward = ord.size() > 1 && ord[1] < x0 ? -h : h;
    auto f = [&](double x) { return lambda_asympt(side, a, x, branch, r, first); };
    auto path = track_branch(side, a, ord, f(x0), (f(x0 + toward) - f(x0)) / toward);
    std::vector<cplx> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      out[i] = path[std::find(ord.begin(), ord.end(), xs[i]) - ord.begin()];
    return out;
  };
  e.claimed_order = claimed;
  e.reference_order = reference;
  e.lo = lo;
  e.hi = hi;
  return e;
}

Expansion coeff_expansion(Side side, Regime r, int which, int branch, double claimed, double reference,
                          double lo, double hi) {
  Expansion e;
  std::ostringstream os;
  os << "A_" << to_string(side) << '_' << (r == Regime::LowFreq ? "low" : "high") << "_psi" << which
     << "_b" << branch;
  e.name = os.str();
  e.regime = r;
  e.side = side;
  const cplx p0 = which == 0 ? 1.0 : 0.0, p1 = which == 1 ? 1.0 : 0.0;
  e.eval = [=](double a, double xi) { return coeff_A_asympt(side, a, xi, r, p0, p1)[branch - 1]; };
  e.numeric = [=](double a, const std::vector<double>& xs) {
    std::vector<cplx> out;
    for (double xi : xs) {
      auto d = decaying_modes(side, a, xi);
      const cplx l1 = lambda_asympt(side, a, xi, 1, r, r == Regime::HighFreq);
      // order the exact roots like the expansion's branches
      std::array<cplx, 2> lam = std::abs(d[0] - l1) <= std::abs(d[1] - l1) ? d : std::array<cplx, 2>{d[1], d[0]};
      out.push_back(mode_coefficients(lam, p0, p1)[branch - 1]);
    }
    return out;
  };
  e.claimed_order = claimed;
  e.reference_order = reference;
  e.lo = lo;
  e.hi = hi;
  return e;
}

Expansion green_expansion(int slot, double claimed) {
  static const char* names[] = {"B1p", "B2p", "B1m", "B2m"};
  Expansion e;
  e.name = std::string("green_") + names[slot] + "_low";
  e.regime = Regime::LowFreq;
  e.eval = [=](double a, double xi) { return green_B_asympt(a, xi)[slot]; };
  e.numeric = [=](double a, const std::vector<double>& xs) {
    std::vector<cplx> out;
    for (double xi : xs) {
      auto g = green_coefficients(Side::West, a, xi);
      out.push_back(slot < 2 ? g.Bp[slot] : g.Bm[slot - 2]);
    }
    return out;
  };
  e.claimed_order = claimed;
  e.reference_order = 1.0;
  e.lo = 0.01;
  e.hi = 0.5;
  return e;
}

Expansion steklov_expansion(Side side, Regime r, int i, int j, double claimed, double reference, double lo,
                            double hi) {
  Expansion e;
  std::ostringstream os;
  os << (side == Side::West ? "m" : "n") << i + 2 << j << '_' << (r == Regime::LowFreq ? "low" : "high");
  e.name = os.str();
  e.regime = r;
  e.side = side;
  e.eval = [=](double a, double xi) { return steklov_M_asympt(side, a, xi, r)(i, j); };
  e.numeric = [=](double a, const std::vector<double>& xs) {
    std::vector<cplx> out;
    for (double xi : xs) out.push_back(symbol(side, a, xi)(i, j));
    return out;
  };
  e.claimed_order = claimed;
  e.reference_order = reference;
  e.lo = lo;
  e.hi = hi;
  return e;
}

}  // namespace

Expansion with_alpha0(Expansion e, double order) {
  e.order_alpha0 = order;
  return e;
}

std::vector<Expansion> expansion_registry() {
  using S = Side;
  const auto L = Regime::LowFreq, H = Regime::HighFreq;
  std::vector<Expansion> r;
  for (int j = 1; j <= 2; ++j) {
    r.push_back(with_alpha0(root_expansion(S::West, L, j, false, 1, 1, 0.01, 0.5), 2));
    r.push_back(root_expansion(S::West, L, j, true, 2, 2, 0.01, 0.5));
    r.push_back(with_alpha0(root_expansion(S::West, H, j, true, 2, 2, 5, 200), 3.5));
    r.push_back(with_alpha0(root_expansion(S::East, H, j, true, 2, 1.5, 5, 200), 3.5));
  }
  r.push_back(with_alpha0(root_expansion(S::East, L, 1, false, 7, 5, 0.05, 0.5), 10));
  r.push_back(with_alpha0(root_expansion(S::East, L, 2, false, 1, 1, 0.01, 0.5), 2));
  for (int j = 1; j <= 2; ++j) {
    r.push_back(with_alpha0(coeff_expansion(S::West, L, 0, j, 1, 1, 0.01, 0.5), 2));
    r.push_back(coeff_expansion(S::West, L, 1, j, 2, 1, 0.01, 0.5));
    r.push_back(coeff_expansion(S::East, L, 0, j, 4, 1, 0.05, 0.5));
    r.push_back(with_alpha0(coeff_expansion(S::East, L, 1, j, 1, 1, 0.01, 0.5), 2));
    r.push_back(coeff_expansion(S::West, H, 0, j, 1.5, 1, 5, 500));
    r.push_back(coeff_expansion(S::West, H, 1, j, 2.5, 1, 5, 500));
    r.push_back(coeff_expansion(S::East, H, 0, j, 1.5, 1, 5, 500));
    r.push_back(coeff_expansion(S::East, H, 1, j, 2.5, 1, 5, 500));
  }
  for (int k = 0; k < 4; ++k) r.push_back(with_alpha0(green_expansion(k, k == 2 ? 3 : 1), k == 2 ? 6 : 2));
  // Low: remainder exponents. High: decay exponents of the remainder.
  const double wl[2][2] = {{1, 1}, {3, 4}}, wlp[2][2] = {{1, 1}, {1, 2}};
  const double el[2][2] = {{4, 1}, {3, 1}}, elp[2][2] = {{3, 1}, {1, 1}};
  const double hi[2][2] = {{1, 2}, {3, 1}}, hip[2][2] = {{0.5, 0.5}, {0, -0.5}};
  const double wl0[2][2] = {{2, 2}, {4, 4}}, el0[2][2] = {{4, 2}, {4, 2}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      r.push_back(with_alpha0(steklov_expansion(S::West, L, i, j, wl[i][j], wlp[i][j], 0.01, 0.5), wl0[i][j]));
      r.push_back(with_alpha0(steklov_expansion(S::East, L, i, j, el[i][j], elp[i][j], 0.01, 0.5), el0[i][j]));
      // the O(1) remainder of m30 sits under xi^3, so its window stops early
      const double top = i == 1 && j == 0 ? 30 : 200;
      const double a0 = i == 0 && j == 1 ? 5 : hi[i][j];
      r.push_back(with_alpha0(steklov_expansion(S::West, H, i, j, hi[i][j], hip[i][j], 5, top), a0));
      r.push_back(with_alpha0(steklov_expansion(S::East, H, i, j, hi[i][j], hip[i][j], 5, top), a0));
    }
  return r;
}

OrderFit fit_order(const Expansion& e, double alpha, double lo, double hi, int n_samples) {
  if (n_samples < 8) fail("Usage", "fit_order needs at least 8 samples");
  if (!(lo > 0) || !(hi > lo)) fail("Usage", "bad fit window");
  check_regime(e.regime, lo);
  check_regime(e.regime, hi);
  auto xs = logspace(lo, hi, n_samples);
  auto num = e.numeric(alpha, xs);
  std::vector<double> err(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    err[i] = std::abs(num[i] - e.eval(alpha, xs[i]));
    // errors at round-off level of the value carry no order information
    if (err[i] <= 1e3 * std::numeric_limits<double>::epsilon() * std::abs(num[i])) err[i] = 0.0;
  }
  OrderFit f = loglog_fit(xs, err);
  if (e.regime == Regime::HighFreq) f.slope = -f.slope;
  f.claimed = e.order(alpha);
  f.pass = std::abs(f.slope - f.claimed) <= 0.35 && f.r2 >= 0.9;
  return f;
}

OrderFit fit_order(const Expansion& e, double alpha, int n_samples) {
  return fit_order(e, alpha, e.lo, e.hi, n_samples);
}

void write_fit_csv(std::ostream& os, const std::vector<FitRow>& rows) {
  os << "name,regime,slope,r2,pass\n";
  for (const auto& r : rows)
    os << r.name << ',' << to_string(r.regime) << ',' << r.fit.slope << ',' << r.fit.r2 << ','
       << (r.fit.pass ? "true" : "false") << '\n';
}

}  // namespace blt
