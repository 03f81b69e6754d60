#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blt/common.hpp"

namespace blt {

// Periodised tangential grid plus the X samples of the layer.
struct SpectralGrid {
  double L = 64.0;
  int N = 256;
  std::vector<double> xgrid;
  double chi_cutoff = 0.5;

  int nx() const { return static_cast<int>(xgrid.size()); }
  double dy() const { return L / N; }
  double y(int j) const { return j * L / N; }
  // Signed integer wavenumber of FFT slot k, in [-N/2, N/2).
  int wavenumber(int k) const { return k < N / 2 ? k : k - N; }
  double xi(int k) const { return 2.0 * kPi * wavenumber(k) / L; }
  bool is_nyquist(int k) const { return k == N / 2; }
  double xi_max() const { return 2.0 * kPi * (N / 2) / L; }

  // Check N is a power of two and the X extent covers 5/delta_min.
  void validate(double delta_min) const;
};

// Geometric X grid on [0, xmax] with ratio r between consecutive spacings.
std::vector<double> geometric_xgrid(double xmax, int nx, double ratio = 1.05);
// Same, but fixing the first spacing h0 instead of the point count.
std::vector<double> geometric_xgrid_h0(double xmax, double h0, double ratio = 1.05);

SpectralGrid make_grid(double L, int N, double xmax, int nx, double ratio = 1.05);

struct BoundaryTrace {
  std::vector<double> psi0;
  std::vector<double> psi1;

  static BoundaryTrace zeros(int n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }
  int size() const { return static_cast<int>(psi0.size()); }
  double sup() const;
  bool finite() const;
};

// Field on xgrid x N, Y fastest. Optional X-derivative layers carry d^k/dX^k
// for k = 1..xderiv.size() when a solver can provide them exactly.
struct FieldSlice {
  std::vector<double> x;
  int ny = 0;
  double L = 0.0;
  std::vector<cplx> v;
  bool is_complex = false;
  Side side = Side::West;
  double alpha = 0.0;
  double eps = 0.0;
  double decay_rate = 0.0;   // decay certificate for source terms, 0 = none
  std::vector<std::vector<cplx>> xderiv;

  FieldSlice() = default;
  FieldSlice(const std::vector<double>& xs, int n, double period)
      : x(xs), ny(n), L(period), v(xs.size() * static_cast<std::size_t>(n)) {}

  int nx() const { return static_cast<int>(x.size()); }
  cplx& operator()(int i, int j) { return v[static_cast<std::size_t>(i) * ny + j]; }
  const cplx& operator()(int i, int j) const { return v[static_cast<std::size_t>(i) * ny + j]; }
  // k = 0 gives the values themselves.
  const std::vector<cplx>& layer(int k) const { return k == 0 ? v : xderiv.at(k - 1); }
  std::vector<cplx> row(int i) const;
  double sup() const;
  double max_imag() const;
};

FieldSlice like(const FieldSlice& f);  // same metadata, zero values, no derivatives

// Binary dump: "BLT1", u32 nx, u32 ny, u8 complex flag, then little-endian
// f64 row-major (Y fastest); complex values as (re, im) pairs.
void write_field(const FieldSlice& f, const std::string& path);
FieldSlice read_field(const std::string& path);

// Spectral helpers. Convention: f(y_j) = sum_k fh_k exp(i xi_k y_j),
// fh_k = (1/N) sum_j f_j exp(-i xi_k y_j).
std::vector<cplx> fft_forward(const std::vector<cplx>& f);
std::vector<cplx> fft_backward(const std::vector<cplx>& fh);
std::vector<cplx> fft_forward(const std::vector<double>& f);
std::vector<cplx> to_complex(const std::vector<double>& f);
std::vector<double> real_part(const std::vector<cplx>& f);

// Apply a Fourier multiplier m(xi) along Y to each row. The Nyquist slot uses
// Re m so that real input stays real.
template <class Fn>
std::vector<cplx> apply_multiplier(const std::vector<cplx>& f, const SpectralGrid& g, Fn&& m);

// Y derivative of order d of every row of a field layer.
std::vector<cplx> dy_layer(const std::vector<cplx>& layer, int nx, int ny, double L, int d);
// Zero every mode with |k| >= N/3 in each row (2/3 rule).
std::vector<cplx> dealias_layer(const std::vector<cplx>& layer, int nx, int ny);
// Max modulus of modes with |k| >= N/3 relative to the largest mode.
double high_band_fraction(const std::vector<cplx>& layer, int nx, int ny);

// Fornberg finite-difference weights for derivatives 0..m at x0.
std::vector<std::vector<double>> fornberg(double x0, const std::vector<double>& nodes, int m);

// Dense-banded differentiation operator of order d on a non-uniform grid,
// accuracy order p (stencil of d + p points, centred where possible,
// one-sided at the ends).
class DiffOp {
 public:
  DiffOp() = default;
  DiffOp(const std::vector<double>& x, int d, int p = 4);
  std::vector<cplx> apply(const std::vector<cplx>& col) const;
  // Apply along X to a layer stored row-major (Y fastest).
  std::vector<cplx> apply_layer(const std::vector<cplx>& layer, int ny) const;
  int order() const { return d_; }

 private:
  int d_ = 0;
  std::vector<int> start_;
  std::vector<std::vector<double>> w_;
};

}  // namespace blt

#include "blt/grid_inl.hpp"
