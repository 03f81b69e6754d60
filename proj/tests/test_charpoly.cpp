#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>

#include "blt/charpoly.hpp"
#include "doctest.h"

using namespace blt;

namespace {

std::vector<cplx> companion_roots(const QuarticCoeffs& q) {
  Eigen::Matrix4cd C = Eigen::Matrix4cd::Zero();
  for (int i = 1; i < 4; ++i) C(i, i - 1) = 1.0;
  for (int i = 0; i < 4; ++i) C(i, 3) = -q.c[i] / q.c[4];
  Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(C);
  std::vector<cplx> r(es.eigenvalues().data(), es.eigenvalues().data() + 4);
  return r;
}

// Greedy multiset distance.
double multiset_dist(std::vector<cplx> a, std::vector<cplx> b) {
  double worst = 0;
  for (const cplx& x : a) {
    auto it = std::min_element(b.begin(), b.end(),
                               [&](cplx p, cplx q) { return std::abs(p - x) < std::abs(q - x); });
    worst = std::max(worst, std::abs(*it - x));
    b.erase(it);
  }
  return worst;
}

}  // namespace

TEST_CASE("trivial coefficient vectors") {
  auto w = western_coeffs(0, 0);
  CHECK(w.c[4] == cplx(-1));
  CHECK(w.c[1] == cplx(-1));
  CHECK(w.c[0] == cplx(0));
  CHECK(w.c[2] == cplx(0));
  CHECK(w.c[3] == cplx(0));
  auto w1 = western_coeffs(1, 0);
  CHECK(w1.c[4] == cplx(-4));
  CHECK(w1.c[1] == cplx(-1));
  auto e = eastern_coeffs(0, 0);
  CHECK(e.c[4] == cplx(1));
  CHECK(e.c[1] == cplx(-1));
}

TEST_CASE("symbolic fixtures at alpha = 0.5, xi = 2") {
  // computer-algebra expansion, low order first
  const std::array<cplx, 5> west{cplx(-16, 0), cplx(-1, 16), cplx(14, 0), cplx(0, -5), cplx(-25.0 / 16, 0)};
  const std::array<cplx, 5> east{cplx(16, 0), cplx(-1, 16), cplx(-14, 0), cplx(0, -5), cplx(25.0 / 16, 0)};
  auto w = western_coeffs(0.5, 2), e = eastern_coeffs(0.5, 2);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(w.c[k] - west[k]) < 1e-13);
    CHECK(std::abs(e.c[k] - east[k]) < 1e-13);
  }
}

TEST_CASE("assembled polynomial equals the defining expression") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 200; ++t) {
    Side s = t % 2 ? Side::West : Side::East;
    auto q = quartic_coeffs(s, u(rng), 5 * u(rng));
    cplx z(u(rng), u(rng));
    CHECK(std::abs(q.eval(z) - q.defining(z)) <= 1e-12 * std::max(1.0, std::abs(q.defining(z))));
  }
}

TEST_CASE("mirror identity east(lambda) = -west(-lambda)") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 100; ++t) {
    double a = u(rng), xi = 10 * u(rng);
    auto w = western_coeffs(a, xi), e = eastern_coeffs(a, xi);
    cplx z(u(rng), u(rng));
    CHECK(std::abs(e.eval(z) + w.eval(-z)) < 1e-11 * std::max(1.0, std::abs(e.eval(z))));
  }
}

TEST_CASE("closed-form roots at xi = 0") {
  auto r = solve_quartic(western_coeffs(0, 0));
  REQUIRE(r.zero.has_value());
  REQUIRE(r.pos.size() == 2);
  REQUIRE(r.neg.size() == 1);
  std::vector<cplx> expect{0.0, -1.0, cplx(0.5, std::sqrt(3.0) / 2), cplx(0.5, -std::sqrt(3.0) / 2)};
  CHECK(multiset_dist({r.all.begin(), r.all.end()}, expect) < 1e-12);

  auto e = solve_quartic(eastern_coeffs(0, 0));
  REQUIRE(e.pos.size() == 1);
  CHECK(std::abs(e.pos[0] - 1.0) < 1e-12);
  REQUIRE(e.zero.has_value());
}

TEST_CASE("companion-matrix oracle") {
  auto r = solve_quartic(western_coeffs(1, 0.3));
  CHECK(r.pos.size() == 2);
  CHECK(r.neg.size() == 2);
  CHECK(r.min_pairwise_gap > 0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ua(-2, 2), ux(-4, 2);
  for (int t = 0; t < 300; ++t) {
    Side s = t % 2 ? Side::West : Side::East;
    double xi = std::pow(10.0, ux(rng)) * (t % 3 ? 1 : -1);
    auto q = quartic_coeffs(s, ua(rng), xi);
    auto mine = solve_quartic(q);
    auto ref = companion_roots(q);
    double sc = 0;
    for (auto z : ref) sc = std::max(sc, std::abs(z));
    CHECK(multiset_dist({mine.all.begin(), mine.all.end()}, ref) < 1e-9 * std::max(1.0, sc));
  }
}

TEST_CASE("Vieta, mirror and conjugation") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ua(-2, 2), ux(-2, 1.7);
  for (int t = 0; t < 200; ++t) {
    double a = ua(rng), xi = std::pow(10.0, ux(rng));
    auto q = western_coeffs(a, xi);
    auto r = solve_quartic(q);
    cplx s = 0, p = 1;
    for (auto z : r.all) {
      s += z;
      p *= z;
    }
    const cplx vs = -q.c[3] / q.c[4], vp = q.c[0] / q.c[4];
    CHECK(std::abs(s - vs) <= 1e-10 * std::max(1.0, std::abs(vs)) * std::max(1.0, xi));
    CHECK(std::abs(p - vp) <= 1e-10 * std::max(1.0, std::abs(vp)));

    auto e = solve_quartic(eastern_coeffs(a, xi));
    std::vector<cplx> neg;
    for (auto z : r.all) neg.push_back(-z);
    CHECK(multiset_dist({e.all.begin(), e.all.end()}, neg) < 1e-10 * std::max(1.0, xi));

    auto c = solve_quartic(western_coeffs(a, -xi));
    std::vector<cplx> conj;
    for (auto z : r.all) conj.push_back(std::conj(z));
    CHECK(multiset_dist({c.all.begin(), c.all.end()}, conj) < 1e-10 * std::max(1.0, xi));
  }
}

TEST_CASE("solve_quartic preconditions and ordering") {
  CHECK_THROWS_AS(solve_quartic(western_coeffs(0, 1), 1e-5), Error);
  auto r = solve_quartic(western_coeffs(0.3, 2.0));
  for (int i = 0; i + 1 < 4; ++i) CHECK(r.all[i].real() <= r.all[i + 1].real() + 1e-9);
  auto r2 = solve_quartic(western_coeffs(0.3, 2.0));
  for (int i = 0; i < 4; ++i) CHECK(r.all[i] == r2.all[i]);
}

TEST_CASE("certification sweep (reduced) and xi = 0 point") {
  SweepSpec sw;
  sw.n_alpha = 25;
  sw.n_xi = 25;
  for (Side s : {Side::West, Side::East}) {
    auto rep = certify_simple_offaxis(s, sw);
    // The slow root is -xi^4 (1 - 2 xi^6 + ...), just inside 1e-8 at |xi| = 0.01;
    // that edge is the only place the |Re| threshold trips.
    for (const auto& f : rep.failures) {
      CHECK(f.reason == "abs_re");
      CHECK(std::abs(f.xi) == doctest::Approx(0.01));
    }
    CHECK(rep.min_abs_re > 0.999999e-8);
    CHECK(rep.min_gap > 1e-6);
    CHECK(rep.max_residual <= 1e-10);
    auto j = rep.to_json();
    CHECK(j.contains("min_gap"));
    CHECK(j.contains("failures"));
  }
  SweepSpec z;
  z.n_alpha = 3;
  z.n_xi = 2;
  z.include_zero = true;
  z.xi_min = 0.02;
  auto rz = certify_simple_offaxis(Side::West, z);
  CHECK(rz.ok());
  CHECK(rz.zero_root_seen);
}

TEST_CASE("gap minimiser stays away from zero") {
  SweepSpec inner;
  inner.n_alpha = 20;
  inner.n_xi = 20;
  inner.xi_min = 0.0101;
  CHECK(certify_simple_offaxis(Side::West, inner).ok());
  auto g = minimize_gap(Side::West, -2, 2, 0.01, 50, 40, 40, 2);
  CHECK(g.gap > 1e-6);
}
