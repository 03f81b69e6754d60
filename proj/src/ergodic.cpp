#include "blt/ergodic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "blt/halfspace.hpp"

namespace blt {

StationaryProcess StationaryProcess::moving_average(double lo, double hi, double width,
                                                    std::uint64_t seed) {
  if (!(hi > lo) || !(width > 0)) fail("Usage", "moving_average needs hi > lo and width > 0");
  StationaryProcess p;
  p.kind = Kind::MovingAverage;
  p.lo = lo;
  p.hi = hi;
  p.width = width;
  p.seed = seed;
  return p;
}

StationaryProcess StationaryProcess::periodic(double offset, std::vector<double> amps, double period,
                                              std::uint64_t seed) {
  if (!(period > 0)) fail("Usage", "period must be positive");
  StationaryProcess p;
  p.kind = Kind::Periodic;
  p.offset = offset;
  p.amps = std::move(amps);
  p.period = period;
  p.seed = seed;
  return p;
}

StationaryProcess StationaryProcess::iid_bandlimited(double offset, double amp, double xi_band,
                                                     std::uint64_t seed) {
  if (!(xi_band > 0) || amp < 0) fail("Usage", "iid_bandlimited needs xi_band > 0, amp >= 0");
  StationaryProcess p;
  p.kind = Kind::IidBandlimited;
  p.offset = offset;
  p.amp = amp;
  p.xi_band = xi_band;
  p.seed = seed;
  return p;
}

StationaryProcess StationaryProcess::constant(double c) {
  StationaryProcess p;
  p.kind = Kind::Constant;
  p.offset = c;
  return p;
}

StationaryProcess StationaryProcess::with_seed(std::uint64_t s) const {
  auto p = *this;
  p.seed = s;
  return p;
}

double StationaryProcess::mean() const {
  return kind == Kind::MovingAverage ? 0.5 * (lo + hi) : offset;
}

namespace {

int ma_cells(double width, double dy) { return std::max(1, static_cast<int>(std::lround(width / dy))); }

}  // namespace

double StationaryProcess::stddev(double dy) const {
  switch (kind) {
    case Kind::MovingAverage:
      return (hi - lo) / std::sqrt(12.0 * ma_cells(width, dy));
    case Kind::Periodic: {
      double s = 0;
      for (double a : amps) s += 0.5 * a * a;
      return std::sqrt(s);
    }
    case Kind::IidBandlimited:
      return amp;
    case Kind::Constant:
      return 0.0;
  }
  return 0.0;
}

double StationaryProcess::correlation_length() const {
  switch (kind) {
    case Kind::MovingAverage: return width;
    case Kind::Periodic: return period;
    case Kind::IidBandlimited: return kPi / xi_band;
    case Kind::Constant: return 0.0;
  }
  return 0.0;
}

std::string StationaryProcess::kind_name() const {
  switch (kind) {
    case Kind::MovingAverage: return "moving_average";
    case Kind::Periodic: return "periodic";
    case Kind::IidBandlimited: return "iid_bandlimited";
    case Kind::Constant: return "constant";
  }
  return "?";
}

nlohmann::json StationaryProcess::to_json() const {
  nlohmann::json j{{"kind", kind_name()}, {"seed", seed}, {"mean", mean()}};
  switch (kind) {
    case Kind::MovingAverage: j["lo"] = lo; j["hi"] = hi; j["width"] = width; break;
    case Kind::Periodic: j["amps"] = amps; j["period"] = period; break;
    case Kind::IidBandlimited: j["amp"] = amp; j["xi_band"] = xi_band; break;
    case Kind::Constant: break;
  }
  return j;
}

std::vector<double> sample(const StationaryProcess& p, const SpectralGrid& grid) {
  const int N = grid.N;
  std::vector<double> out(N, p.mean());
  std::mt19937_64 rng(p.seed);
  switch (p.kind) {
    case StationaryProcess::Kind::MovingAverage: {
      std::uniform_real_distribution<double> U(p.lo, p.hi);
      std::vector<double> u(N);
      for (auto& x : u) x = U(rng);
      const int w = ma_cells(p.width, grid.dy());
      double s = 0;
      for (int i = 0; i < w; ++i) s += u[((-i) % N + N) % N];
      for (int j = 0; j < N; ++j) {
        if (j > 0) s += u[j] - u[((j - w) % N + N) % N];
        out[j] = s / w;
      }
      break;
    }
    case StationaryProcess::Kind::Periodic: {
      const double ratio = grid.L / p.period;
      if (std::abs(ratio - std::round(ratio)) > 1e-9)
        fail("Usage", "the period must divide the grid length");
      const double shift = std::uniform_real_distribution<double>(0.0, p.period)(rng);
      for (int j = 0; j < N; ++j)
        for (std::size_t m = 0; m < p.amps.size(); ++m)
          out[j] += p.amps[m] * std::cos(2 * kPi * (m + 1) * (grid.y(j) + shift) / p.period);
      break;
    }
    case StationaryProcess::Kind::IidBandlimited: {
      std::normal_distribution<double> G;
      std::vector<cplx> h(N);
      int nb = 0;
      for (int k = 1; k < N / 2; ++k)
        if (grid.xi(k) <= p.xi_band) ++nb;
      if (nb == 0) break;
      const double s = p.amp / std::sqrt(4.0 * nb);
      for (int k = 1; k < N / 2; ++k) {
        if (grid.xi(k) > p.xi_band) continue;
        const double re = G(rng), im = G(rng);
        h[k] = s * cplx(re, im);
        h[N - k] = std::conj(h[k]);
      }
      auto f = fft_backward(h);
      for (int j = 0; j < N; ++j) out[j] += f[j].real();
      break;
    }
    case StationaryProcess::Kind::Constant:
      break;
  }
  return out;
}

double ergodic_limit(double mean0, double mean1, double alpha) {
  return mean0 + bpow(alpha, 2.0 / 3.0) * mean1;
}

double ergodic_limit(const StationaryProcess& p0, const StationaryProcess& p1, double alpha) {
  return ergodic_limit(p0.mean(), p1.mean(), alpha);
}

namespace {

// Per-slot data of the eastern split. The Nyquist slot carries the +xi and
// -xi solutions, which are averaged.
struct Slot {
  std::array<cplx, 2> lam{};
  std::array<cplx, 2> A{};
  double chi = 0.0;
  cplx Abar = 0.0;
};

struct SplitData {
  std::vector<std::array<Slot, 2>> slots;   // [k][0] at xi, [k][1] at -xi (Nyquist only)
  int N = 0;
};

// The roots depend on (alpha, grid) only; ensembles share one table.
// A low-pass table skips the roots where chi vanishes; only the alg and erg
// pieces are meaningful then.
struct ModeTable {
  double alpha = 0.0;
  bool lowpass = false;
  std::vector<std::array<Slot, 2>> slots;
};

ModeTable mode_table(double alpha, const SpectralGrid& grid, bool lowpass = false) {
  ModeTable t;
  t.alpha = alpha;
  t.lowpass = lowpass;
  t.slots.resize(grid.N);
  for (int k = 0; k < grid.N; ++k) {
    const int nside = grid.is_nyquist(k) ? 2 : 1;
    for (int s = 0; s < nside; ++s) {
      const double xi = s == 0 ? grid.xi(k) : -grid.xi(k);
      auto& sl = t.slots[k][s];
      sl.chi = chi_cut(xi, grid.chi_cutoff);
      if (!lowpass || sl.chi > 0) sl.lam = decaying_modes(Side::East, alpha, xi);
    }
  }
  return t;
}

SplitData split_data(const BoundaryTrace& trace, const ModeTable& tab, const SpectralGrid& grid) {
  if (trace.size() != grid.N) fail("Usage", "trace length differs from grid N");
  if (!trace.finite()) fail("Usage", "non-finite trace");
  const auto p0 = fft_forward(trace.psi0), p1 = fft_forward(trace.psi1);
  const double b23 = bpow(tab.alpha, 2.0 / 3.0);
  SplitData d;
  d.N = grid.N;
  d.slots = tab.slots;
  for (int k = 0; k < grid.N; ++k) {
    const int nside = grid.is_nyquist(k) ? 2 : 1;
    for (int s = 0; s < nside; ++s) {
      auto& sl = d.slots[k][s];
      if (tab.lowpass && sl.chi == 0) continue;
      sl.A = mode_coefficients(sl.lam, p0[k], p1[k]);
      sl.Abar = p0[k] + b23 * p1[k];
    }
  }
  return d;
}

SplitData split_data(const BoundaryTrace& trace, double alpha, const SpectralGrid& grid) {
  return split_data(trace, mode_table(alpha, grid), grid);
}

// Hats of the four pieces at X: fast, slow high-pass, alg, erg.
std::array<std::vector<cplx>, 4> piece_hats(const SplitData& d, const SpectralGrid& grid, double X) {
  std::array<std::vector<cplx>, 4> h;
  for (auto& v : h) v.assign(d.N, 0.0);
  for (int k = 0; k < d.N; ++k) {
    const int nside = grid.is_nyquist(k) ? 2 : 1;
    for (int s = 0; s < nside; ++s) {
      const auto& sl = d.slots[k][s];
      const double w = 1.0 / nside;
      const cplx e1 = std::exp(-sl.lam[0] * X), e2 = std::exp(-sl.lam[1] * X);
      h[0][k] += w * sl.A[1] * e2;
      h[1][k] += w * (1.0 - sl.chi) * sl.A[0] * e1;
      h[2][k] += w * sl.chi * (sl.A[0] - sl.Abar) * e1;
      h[3][k] += w * sl.chi * sl.Abar * e1;
    }
  }
  return h;
}

std::vector<double> real_row(const std::vector<cplx>& h) { return real_part(fft_backward(h)); }

std::vector<double> erg_row(const SplitData& d, const SpectralGrid& grid, double X) {
  std::vector<cplx> h(d.N);
  for (int k = 0; k < d.N; ++k) {
    if (grid.is_nyquist(k)) continue;   // chi vanishes there
    const auto& sl = d.slots[k][0];
    if (sl.chi > 0) h[k] = sl.chi * sl.Abar * std::exp(-sl.lam[0] * X);
  }
  return real_row(h);
}

double sup_dev(const std::vector<double>& f, double c) {
  double m = 0;
  for (double v : f) m = std::max(m, std::abs(v - c));
  return m;
}

double sup_abs(const std::vector<double>& f) { return sup_dev(f, 0.0); }

}  // namespace

EasternSplit decompose_eastern(const BoundaryTrace& trace, double alpha, const SpectralGrid& grid) {
  const auto d = split_data(trace, alpha, grid);
  EasternSplit out;
  auto meta = [&] {
    FieldSlice f(grid.xgrid, grid.N, grid.L);
    f.side = Side::East;
    f.alpha = alpha;
    return f;
  };
  out.exp = meta();
  out.alg = meta();
  out.erg = meta();
  out.exp_fast = meta();
  for (int i = 0; i < grid.nx(); ++i) {
    auto h = piece_hats(d, grid, grid.xgrid[i]);
    std::vector<cplx> he(d.N);
    for (int k = 0; k < d.N; ++k) he[k] = h[0][k] + h[1][k];
    const auto rows = std::array<std::vector<cplx>, 4>{fft_backward(h[0]), fft_backward(he),
                                                       fft_backward(h[2]), fft_backward(h[3])};
    FieldSlice* dst[4] = {&out.exp_fast, &out.exp, &out.alg, &out.erg};
    for (int p = 0; p < 4; ++p)
      for (int j = 0; j < grid.N; ++j) (*dst[p])(i, j) = rows[p][j].real();
  }
  return out;
}

EasternRows eastern_rows_at(const BoundaryTrace& trace, double alpha, const SpectralGrid& grid,
                            double X) {
  const auto d = split_data(trace, alpha, grid);
  auto h = piece_hats(d, grid, X);
  for (int k = 0; k < d.N; ++k) h[0][k] += h[1][k];
  return {real_row(h[0]), real_row(h[2]), real_row(h[3])};
}

std::vector<double> ergodic_part_at(const BoundaryTrace& trace, double alpha,
                                    const SpectralGrid& grid, double X) {
  return erg_row(split_data(trace, mode_table(alpha, grid, true), grid), grid, X);
}

double kernel_moment_envelope(double alpha, const SpectralGrid& grid, double X) {
  const int N = grid.N;
  std::vector<cplx> dkh(N);
  for (int k = 0; k < N; ++k) {
    if (grid.is_nyquist(k)) continue;
    const double xi = grid.xi(k);
    const double c = chi_cut(xi, grid.chi_cutoff);
    if (c == 0) continue;
    const auto lam = decaying_modes(Side::East, alpha, xi);
    dkh[k] = I1 * xi * c * std::exp(-lam[0] * X) / grid.L;
  }
  const auto dK = fft_backward(dkh);
  double m = 0;
  for (int j = 0; j < N; ++j) {
    const double y = j < N / 2 ? grid.y(j) : grid.y(j) - grid.L;
    m = std::max(m, std::abs(y * dK[j]));
  }
  return m;
}

double l1_uloc_deviation(const std::vector<double>& f, const SpectralGrid& grid) {
  const int N = static_cast<int>(f.size());
  if (N == 0) return 0.0;
  double mean = 0;
  for (double v : f) mean += v;
  mean /= N;
  const int w = std::min(N, std::max(1, static_cast<int>(std::lround(1.0 / grid.dy()))));
  double s = 0;
  for (int i = 0; i < w; ++i) s += std::abs(f[i] - mean);
  double best = s;
  for (int j = 1; j < N; ++j) {
    s += std::abs(f[(j + w - 1) % N] - mean) - std::abs(f[j - 1] - mean);
    best = std::max(best, s);
  }
  return best * grid.dy();
}

nlohmann::json ConvergenceReport::to_json() const {
  return {{"alpha", alpha}, {"phibar", phibar}, {"X", X}, {"erg_err", erg_err},
          {"j_env", j_env}, {"j_fit_X", j_fit_X}, {"alg_ratio", alg_ratio}, {"j_exponent", j_exponent},
          {"erg_rate", erg_rate}, {"monotone", monotone}, {"j_ok", j_ok},
          {"alg_bounded", alg_bounded}, {"ok", ok}};
}

namespace {

ConvergenceReport convergence_impl(const BoundaryTrace& trace, double phibar, const ModeTable& tab,
                                   const SpectralGrid& grid, const std::vector<double>& X_list,
                                   bool require) {
  const double alpha = tab.alpha;
  if (X_list.size() < 3) fail("Usage", "need at least three X values");
  for (std::size_t i = 0; i < X_list.size(); ++i)
    if (!(X_list[i] > 0) || (i > 0 && !(X_list[i] > X_list[i - 1])))
      fail("Usage", "X_list must be positive and increasing");
  const auto d = split_data(trace, tab, grid);
  ConvergenceReport r;
  r.alpha = alpha;
  r.phibar = phibar;
  r.X = X_list;
  const double b23 = bpow(alpha, 2.0 / 3.0);
  std::vector<double> f(grid.N);
  for (int j = 0; j < grid.N; ++j) f[j] = trace.psi0[j] + b23 * trace.psi1[j];
  const double dev = l1_uloc_deviation(f, grid);
  const double data = sup_abs(trace.psi0) + sup_abs(trace.psi1);
  for (double X : X_list) {
    auto h = piece_hats(d, grid, X);
    r.erg_err.push_back(sup_dev(real_row(h[3]), phibar));
    r.j_env.push_back(kernel_moment_envelope(alpha, grid, X) * dev);
    const double alg = sup_abs(real_row(h[2]));
    r.alg_ratio.push_back(data > 0 ? std::pow(1.0 + X, 0.25) * alg / data : 0.0);
  }
  const double slack = 1e-14 * std::max(1.0, std::abs(phibar));
  r.monotone = true;
  for (std::size_t i = 1; i < r.erg_err.size(); ++i)
    if (r.erg_err[i] > r.erg_err[i - 1] + slack) r.monotone = false;
  // The envelope is self-similar only once X (xi0/2)^4 >> 1; below that the
  // cutoff sets the kernel width. The exponent is fitted on the tail.
  const double xl = X_list.back();
  r.j_fit_X = {xl, 4 * xl, 16 * xl};
  std::vector<double> kern;
  for (double X : r.j_fit_X) kern.push_back(kernel_moment_envelope(alpha, grid, X));
  r.j_exponent = -loglog_fit(r.j_fit_X, kern).slope;
  r.j_ok = r.j_exponent >= 0.15 && r.j_exponent <= 0.35;
  if (*std::min_element(r.erg_err.begin(), r.erg_err.end()) > 1e-12)
    r.erg_rate = loglog_fit(X_list, r.erg_err).slope;
  // Bounded: the tail of the weighted ratio does not outgrow its head.
  const std::size_t half = X_list.size() / 2;
  const double head = *std::max_element(r.alg_ratio.begin(), r.alg_ratio.begin() + half + 1);
  const double tail = *std::max_element(r.alg_ratio.begin() + half, r.alg_ratio.end());
  r.alg_bounded = std::isfinite(tail) && tail <= 1.5 * head + 1e-14;
  r.ok = r.monotone && r.j_ok && r.alg_bounded;
  if (require && !r.ok)
    fail("ConvergenceViolation", r.to_json().dump());
  return r;
}

TrendReport eps_impl(const BoundaryTrace& trace, double phibar, const ModeTable& tab,
                     const SpectralGrid& grid, const std::vector<double>& eps_list,
                     const EpsDomain& dom, bool require);

}  // namespace

ConvergenceReport convergence_report(const BoundaryTrace& trace, double phibar, double alpha,
                                     const SpectralGrid& grid, const std::vector<double>& X_list,
                                     bool require) {
  return convergence_impl(trace, phibar, mode_table(alpha, grid, true), grid, X_list, require);
}

nlohmann::json TrendReport::to_json() const {
  return {{"eps", eps}, {"l2", l2}, {"decreasing", decreasing}};
}

TrendReport eps_rescaled_check(const BoundaryTrace& trace, double phibar, double alpha,
                               const SpectralGrid& grid, const std::vector<double>& eps_list,
                               const EpsDomain& dom, bool require) {
  return eps_impl(trace, phibar, mode_table(alpha, grid, true), grid, eps_list, dom, require);
}

namespace {

TrendReport eps_impl(const BoundaryTrace& trace, double phibar, const ModeTable& tab,
                     const SpectralGrid& grid, const std::vector<double>& eps_list,
                     const EpsDomain& dom, bool require) {
  if (eps_list.size() < 2) fail("Usage", "need at least two eps values");
  for (std::size_t i = 0; i < eps_list.size(); ++i)
    if (!(eps_list[i] > 0) || (i > 0 && !(eps_list[i] < eps_list[i - 1])))
      fail("Usage", "eps_list must be positive and decreasing");
  if (dom.y_len / eps_list.back() > grid.L) fail("Usage", "y_len / eps exceeds the grid period");
  if (!(dom.x1 > dom.x0) || dom.x0 < 0 || dom.nx < 1) fail("Usage", "bad eps domain");
  const auto d = split_data(trace, tab, grid);
  TrendReport t;
  t.eps = eps_list;
  const double hx = (dom.x1 - dom.x0) / dom.nx;
  for (double eps : eps_list) {
    const int ny = std::max(1, static_cast<int>(std::floor(dom.y_len / eps / grid.dy())));
    double s = 0;
    for (int i = 0; i < dom.nx; ++i) {
      const double x = dom.x0 + (i + 0.5) * hx;
      const auto row = erg_row(d, grid, x / eps);
      for (int j = 0; j < ny; ++j) s += sqr(row[j] - phibar);
    }
    t.l2.push_back(std::sqrt(s * hx * grid.dy() * eps));
  }
  t.decreasing = true;
  for (std::size_t i = 1; i < t.l2.size(); ++i)
    if (!(t.l2[i] < t.l2[i - 1])) t.decreasing = false;
  // Identically zero sequences count as decreasing.
  if (*std::max_element(t.l2.begin(), t.l2.end()) <= 1e-13 * std::max(1.0, std::abs(phibar)))
    t.decreasing = true;
  if (require && !t.decreasing) fail("TrendViolation", t.to_json().dump());
  return t;
}

}  // namespace

nlohmann::json ConstantChoice::to_json() const {
  return {{"C", C}, {"shifted_sup", shifted_sup}, {"X_max", X_max}, {"ok", ok}};
}

ConstantChoice select_constant(const BoundaryTrace& trace, double phibar, double alpha,
                               const SpectralGrid& grid, double X_max, double tol) {
  const auto d = split_data(trace, mode_table(alpha, grid, true), grid);
  ConstantChoice c;
  c.C = phibar;
  c.X_max = X_max;
  c.shifted_sup = sup_dev(erg_row(d, grid, X_max), phibar);
  c.ok = c.shifted_sup <= tol;
  return c;
}

nlohmann::json BirkhoffReport::to_json() const {
  return {{"R", R}, {"rms", rms}, {"fit", fit.to_json()}};
}

BirkhoffReport birkhoff_report(const StationaryProcess& p, const SpectralGrid& grid,
                               const std::vector<double>& R_list, int nseeds) {
  if (nseeds < 1) fail("Usage", "nseeds must be positive");
  BirkhoffReport r;
  r.R = R_list;
  const int N = grid.N;
  std::vector<double> acc(R_list.size(), 0.0);
  for (int s = 0; s < nseeds; ++s) {
    const auto f = sample(p.with_seed(p.seed + s), grid);
    for (std::size_t ir = 0; ir < R_list.size(); ++ir) {
      const int m = std::max(1, static_cast<int>(std::lround(R_list[ir] / grid.dy())));
      if (m > N) fail("Usage", "window longer than the grid period");
      double w = 0;
      for (int i = 0; i < m; ++i) w += f[((-i) % N + N) % N];
      for (int j = 0; j < N; ++j) {
        if (j > 0) w += f[j] - f[((j - m) % N + N) % N];
        acc[ir] += sqr(w / m - p.mean());
      }
    }
  }
  for (double a : acc) r.rms.push_back(std::sqrt(a / (static_cast<double>(N) * nseeds)));
  r.fit = loglog_fit(R_list, r.rms);
  r.fit.claimed = -0.5;
  r.fit.pass = std::abs(r.fit.slope + 0.5) <= 0.15;
  return r;
}

nlohmann::json EnsembleReport::to_json() const {
  nlohmann::json runs_j = nlohmann::json::array(), trends_j = nlohmann::json::array();
  for (const auto& r : runs) runs_j.push_back(r.to_json());
  for (const auto& t : trends) trends_j.push_back(t.to_json());
  return {{"monotone_count", monotone_count}, {"trend_count", trend_count},
          {"seeds", runs.size()}, {"j_exponent", j_exponent}, {"alg_bounded", alg_bounded},
          {"runs", runs_j}, {"trends", trends_j}};
}

EnsembleReport ergodic_ensemble(const StationaryProcess& p0, const StationaryProcess& p1,
                                double alpha, const SpectralGrid& grid,
                                const std::vector<double>& X_list,
                                const std::vector<double>& eps_list, int nseeds, int jobs,
                                const EpsDomain& dom) {
  if (nseeds < 1) fail("Usage", "nseeds must be positive");
  EnsembleReport e;
  e.runs.resize(nseeds);
  e.trends.resize(nseeds);
  const double phibar = ergodic_limit(p0, p1, alpha);
  const auto tab = mode_table(alpha, grid, true);
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto work = [&] {
    for (int s; (s = next++) < nseeds;) {
      try {
        BoundaryTrace t{sample(p0.with_seed(p0.seed + s), grid),
                        sample(p1.with_seed(p1.seed + s), grid)};
        e.runs[s] = convergence_impl(t, phibar, tab, grid, X_list, false);
        if (!eps_list.empty()) e.trends[s] = eps_impl(t, phibar, tab, grid, eps_list, dom, false);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  const int nt = std::max(1, std::min(jobs, nseeds));
  std::vector<std::thread> pool;
  for (int i = 1; i < nt; ++i) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
  for (int s = 0; s < nseeds; ++s) {
    e.monotone_count += e.runs[s].monotone;
    e.trend_count += eps_list.empty() ? 0 : e.trends[s].decreasing;
    e.alg_bounded = e.alg_bounded && e.runs[s].alg_bounded;
  }
  e.j_exponent = e.runs[0].j_exponent;
  return e;
}

}  // namespace blt
