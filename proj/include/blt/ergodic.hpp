#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blt/fit.hpp"
#include "blt/grid.hpp"
#include "json.hpp"

namespace blt {

// Stationary random data on the periodised Y grid. The seed ensemble stands in
// for the probability space; translation invariance holds on the torus.
//   moving_average: mean of `width` (physical length) worth of i.i.d.
//                   uniforms on [lo, hi], one innovation per grid cell.
//   periodic:       offset + sum_m amp_m cos(2 pi m Y / period + phase),
//                   one uniform random phase shared by all harmonics.
//   iid_bandlimited: offset + Gaussian Fourier coefficients, flat spectrum
//                   on |xi| <= xi_band, scaled to standard deviation `amp`.
//   constant:       offset.
struct StationaryProcess {
  enum class Kind { MovingAverage, Periodic, IidBandlimited, Constant };
  Kind kind = Kind::Constant;
  std::uint64_t seed = 0;
  double lo = 0.0, hi = 1.0;
  double width = 2.0;
  double period = 8.0;
  std::vector<double> amps;
  double xi_band = 1.0;
  double amp = 1.0;
  double offset = 0.0;

  static StationaryProcess moving_average(double lo, double hi, double width, std::uint64_t seed);
  static StationaryProcess periodic(double offset, std::vector<double> amps, double period,
                                    std::uint64_t seed);
  static StationaryProcess iid_bandlimited(double offset, double amp, double xi_band,
                                           std::uint64_t seed);
  static StationaryProcess constant(double c);

  StationaryProcess with_seed(std::uint64_t s) const;
  double mean() const;
  // Pointwise standard deviation. For moving_average it depends on the cell
  // size, hence the grid spacing argument.
  double stddev(double dy) const;
  double correlation_length() const;
  std::string kind_name() const;
  nlohmann::json to_json() const;
};

std::vector<double> sample(const StationaryProcess& p, const SpectralGrid& grid);

// phibar = E[psi0] + (1 + a^2)^{2/3} E[psi1].
double ergodic_limit(const StationaryProcess& p0, const StationaryProcess& p1, double alpha);
double ergodic_limit(double mean0, double mean1, double alpha);

// Eastern solution split into
//   exp: fast-mode part plus the (1 - chi) share of the slow mode,
//   alg: chi e^{-mu1 X} (A1 - psi0 - b^{2/3} psi1),
//   erg: chi e^{-mu1 X} (psi0 + b^{2/3} psi1),
// with chi the grid's low-pass cutoff.
struct EasternSplit {
  FieldSlice exp, alg, erg;
  FieldSlice exp_fast;   // the fast-mode share of exp alone
};
EasternSplit decompose_eastern(const BoundaryTrace& trace, double alpha, const SpectralGrid& grid);

// Same pieces at a single X, as real rows over Y.
struct EasternRows {
  std::vector<double> exp, alg, erg;
};
EasternRows eastern_rows_at(const BoundaryTrace& trace, double alpha, const SpectralGrid& grid,
                            double X);

// The erg piece alone; only the low-pass roots are computed.
std::vector<double> ergodic_part_at(const BoundaryTrace& trace, double alpha,
                                    const SpectralGrid& grid, double X);

// sup_Y |Y dY K(X, Y)| for the slow low-pass kernel K = F^{-1}[chi e^{-mu1 X}].
double kernel_moment_envelope(double alpha, const SpectralGrid& grid, double X);

// sup over unit windows of int |f - mean(f)|.
double l1_uloc_deviation(const std::vector<double>& f, const SpectralGrid& grid);

struct ConvergenceReport {
  double alpha = 0.0;
  double phibar = 0.0;
  std::vector<double> X;
  std::vector<double> erg_err;     // sup_Y |Psi_erg(X) - phibar|
  std::vector<double> j_env;       // kernel envelope times the data's L1_uloc deviation
  std::vector<double> alg_ratio;   // (1 + X)^{1/4} sup |Psi_alg(X)| / sup |data|
  std::vector<double> j_fit_X;     // X_max, 4 X_max, 16 X_max
  double j_exponent = 0.0;         // -slope of the kernel envelope on j_fit_X
  double erg_rate = 0.0;           // observed log-log slope of erg_err (recorded only)
  bool monotone = false;
  bool j_ok = false;
  bool alg_bounded = false;
  bool ok = false;
  nlohmann::json to_json() const;
};

// Throws ConvergenceViolation when `require` is set and a check fails.
ConvergenceReport convergence_report(const BoundaryTrace& trace, double phibar, double alpha,
                                     const SpectralGrid& grid, const std::vector<double>& X_list,
                                     bool require = false);

// Macroscopic box [x0, x1] x [0, y_len] sampled at x/eps, y/eps.
struct EpsDomain {
  double x0 = 0.0, x1 = 1.0;
  double y_len = 1.0;
  int nx = 64;
};

struct TrendReport {
  std::vector<double> eps;
  std::vector<double> l2;   // ||Psi_erg(./eps) - phibar||_{L2(box)}
  bool decreasing = false;
  nlohmann::json to_json() const;
};

// Throws TrendViolation when `require` is set and the sequence is not
// decreasing. eps_list must be decreasing and y_len / eps <= L.
TrendReport eps_rescaled_check(const BoundaryTrace& trace, double phibar, double alpha,
                               const SpectralGrid& grid, const std::vector<double>& eps_list,
                               const EpsDomain& dom = {}, bool require = false);

// Far-field constant C = phibar and the shifted check: sup_Y |Psi_erg(X_max) - C|.
struct ConstantChoice {
  double C = 0.0;
  double shifted_sup = 0.0;
  double X_max = 0.0;
  bool ok = false;
  nlohmann::json to_json() const;
};
ConstantChoice select_constant(const BoundaryTrace& trace, double phibar, double alpha,
                               const SpectralGrid& grid, double X_max, double tol);

// Birkhoff averages (1/R) int_0^R psi(Y - s) ds over every grid start point,
// RMS deviation from the mean over seeds, and its log-log slope in R.
struct BirkhoffReport {
  std::vector<double> R;
  std::vector<double> rms;
  OrderFit fit;
  nlohmann::json to_json() const;
};
BirkhoffReport birkhoff_report(const StationaryProcess& p, const SpectralGrid& grid,
                               const std::vector<double>& R_list, int nseeds);

// Seed ensemble of convergence reports for traces psi0 ~ p0, psi1 ~ p1,
// seeds base, base + 1, ...; jobs > 1 runs seeds on worker threads.
struct EnsembleReport {
  std::vector<ConvergenceReport> runs;
  std::vector<TrendReport> trends;
  int monotone_count = 0;
  int trend_count = 0;
  double j_exponent = 0.0;
  bool alg_bounded = true;
  nlohmann::json to_json() const;
};
EnsembleReport ergodic_ensemble(const StationaryProcess& p0, const StationaryProcess& p1,
                                double alpha, const SpectralGrid& grid,
                                const std::vector<double>& X_list,
                                const std::vector<double>& eps_list, int nseeds, int jobs = 1,
                                const EpsDomain& dom = {});

}  // namespace blt
