#include "blt/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>

namespace blt {

std::vector<double> geometric_xgrid(double xmax, int nx, double ratio) {
  if (nx < 2 || !(xmax > 0)) fail("Usage", "geometric_xgrid needs nx >= 2 and xmax > 0");
  std::vector<double> x(nx);
  double total = (ratio == 1.0) ? (nx - 1) : (std::pow(ratio, nx - 1) - 1.0) / (ratio - 1.0);
  double h = xmax / total;
  x[0] = 0.0;
  for (int i = 1; i < nx; ++i) {
    x[i] = x[i - 1] + h;
    h *= ratio;
  }
  x[nx - 1] = xmax;
  return x;
}

std::vector<double> geometric_xgrid_h0(double xmax, double h0, double ratio) {
  int nx = 2;
  if (ratio == 1.0) {
    nx = static_cast<int>(std::ceil(xmax / h0)) + 1;
  } else {
    nx = static_cast<int>(std::ceil(std::log(1.0 + xmax * (ratio - 1.0) / h0) / std::log(ratio))) + 1;
  }
  return geometric_xgrid(xmax, std::max(nx, 2), ratio);
}

SpectralGrid make_grid(double L, int N, double xmax, int nx, double ratio) {
  SpectralGrid g;
  g.L = L;
  g.N = N;
  g.xgrid = geometric_xgrid(xmax, nx, ratio);
  return g;
}

void SpectralGrid::validate(double delta_min) const {
  if (N < 2 || (N & (N - 1)) != 0) fail("Usage", "N must be a power of two");
  if (!(L > 0)) fail("Usage", "period must be positive");
  for (std::size_t i = 1; i < xgrid.size(); ++i)
    if (!(xgrid[i] > xgrid[i - 1])) fail("Usage", "xgrid must be strictly increasing");
  if (xgrid.empty() || xgrid.front() != 0.0) fail("Usage", "xgrid must start at 0");
  if (delta_min > 0 && xgrid.back() < 5.0 / delta_min)
    fail("UnderResolved", "X_max below 5/delta_min");
}

double BoundaryTrace::sup() const {
  double s = 0;
  for (double v : psi0) s = std::max(s, std::abs(v));
  for (double v : psi1) s = std::max(s, std::abs(v));
  return s;
}

bool BoundaryTrace::finite() const {
  for (double v : psi0) if (!std::isfinite(v)) return false;
  for (double v : psi1) if (!std::isfinite(v)) return false;
  return psi0.size() == psi1.size();
}

std::vector<cplx> FieldSlice::row(int i) const {
  auto b = v.begin() + static_cast<std::ptrdiff_t>(i) * ny;
  return {b, b + ny};
}

double FieldSlice::sup() const {
  double s = 0;
  for (const auto& z : v) s = std::max(s, std::abs(z));
  return s;
}

double FieldSlice::max_imag() const {
  double s = 0;
  for (const auto& z : v) s = std::max(s, std::abs(z.imag()));
  return s;
}

FieldSlice like(const FieldSlice& f) {
  FieldSlice g(f.x, f.ny, f.L);
  g.is_complex = f.is_complex;
  g.side = f.side;
  g.alpha = f.alpha;
  g.eps = f.eps;
  return g;
}

namespace {

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail("IOError", "truncated BLT1 file");
  return v;
}

}  // namespace

// x86 and arm64 hosts are little-endian, which the format requires.
void write_field(const FieldSlice& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("IOError", "cannot open " + path);
  os.write("BLT1", 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.nx()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.ny));
  put<std::uint8_t>(os, f.is_complex ? 1 : 0);
  for (const auto& z : f.v) {
    put<double>(os, z.real());
    if (f.is_complex) put<double>(os, z.imag());
  }
}

FieldSlice read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("IOError", "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "BLT1", 4) != 0) fail("IOError", "bad magic in " + path);
  auto nx = get<std::uint32_t>(is);
  auto ny = get<std::uint32_t>(is);
  bool cx = get<std::uint8_t>(is) != 0;
  FieldSlice f(std::vector<double>(nx, 0.0), static_cast<int>(ny), 0.0);
  f.is_complex = cx;
  for (auto& z : f.v) {
    double re = get<double>(is);
    double im = cx ? get<double>(is) : 0.0;
    z = {re, im};
  }
  return f;
}

namespace {

struct Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::unique_ptr<fftw_complex[], decltype(&fftw_free)> buf{nullptr, &fftw_free};
};

// FFTW planning is not thread-safe, so plans are created and run under a lock.
std::mutex& fft_mutex() {
  static std::mutex m;
  return m;
}

Plans& plans_for(int n) {
  static std::map<int, Plans> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Plans& p = cache[n];
  p.buf.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
  p.fwd = fftw_plan_dft_1d(n, p.buf.get(), p.buf.get(), FFTW_FORWARD, FFTW_ESTIMATE);
  p.bwd = fftw_plan_dft_1d(n, p.buf.get(), p.buf.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
  return p;
}

std::vector<cplx> run(const std::vector<cplx>& in, bool forward) {
  const int n = static_cast<int>(in.size());
  std::vector<cplx> out(n);
  if (n == 0) return out;
  std::lock_guard<std::mutex> lock(fft_mutex());
  Plans& p = plans_for(n);
  std::memcpy(p.buf.get(), in.data(), sizeof(cplx) * n);
  fftw_execute(forward ? p.fwd : p.bwd);
  std::memcpy(static_cast<void*>(out.data()), p.buf.get(), sizeof(cplx) * n);
  return out;
}

}  // namespace

std::vector<cplx> fft_forward(const std::vector<cplx>& f) {
  auto fh = run(f, true);
  const double s = 1.0 / static_cast<double>(f.size());
  for (auto& z : fh) z *= s;
  return fh;
}

std::vector<cplx> fft_backward(const std::vector<cplx>& fh) { return run(fh, false); }

std::vector<cplx> fft_forward(const std::vector<double>& f) { return fft_forward(to_complex(f)); }

std::vector<cplx> to_complex(const std::vector<double>& f) { return {f.begin(), f.end()}; }

std::vector<double> real_part(const std::vector<cplx>& f) {
  std::vector<double> r(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) r[i] = f[i].real();
  return r;
}

std::vector<cplx> dy_layer(const std::vector<cplx>& layer, int nx, int ny, double L, int d) {
  SpectralGrid g;
  g.L = L;
  g.N = ny;
  std::vector<cplx> out(layer.size());
  for (int i = 0; i < nx; ++i) {
    std::vector<cplx> r(layer.begin() + static_cast<std::ptrdiff_t>(i) * ny,
                        layer.begin() + static_cast<std::ptrdiff_t>(i + 1) * ny);
    auto dr = apply_multiplier(r, g, [d](double xi) { return std::pow(I1 * xi, d); });
    std::copy(dr.begin(), dr.end(), out.begin() + static_cast<std::ptrdiff_t>(i) * ny);
  }
  return out;
}

namespace {
bool high_band(int k, int ny) {
  int w = k < ny / 2 ? k : k - ny;
  return 3 * std::abs(w) >= ny;
}
}  // namespace

std::vector<cplx> dealias_layer(const std::vector<cplx>& layer, int nx, int ny) {
  std::vector<cplx> out(layer.size());
  for (int i = 0; i < nx; ++i) {
    std::vector<cplx> r(layer.begin() + static_cast<std::ptrdiff_t>(i) * ny,
                        layer.begin() + static_cast<std::ptrdiff_t>(i + 1) * ny);
    auto rh = fft_forward(r);
    for (int k = 0; k < ny; ++k)
      if (high_band(k, ny)) rh[k] = 0.0;
    auto back = fft_backward(rh);
    std::copy(back.begin(), back.end(), out.begin() + static_cast<std::ptrdiff_t>(i) * ny);
  }
  return out;
}

double high_band_fraction(const std::vector<cplx>& layer, int nx, int ny) {
  double hi = 0, all = 0;
  for (int i = 0; i < nx; ++i) {
    std::vector<cplx> r(layer.begin() + static_cast<std::ptrdiff_t>(i) * ny,
                        layer.begin() + static_cast<std::ptrdiff_t>(i + 1) * ny);
    auto rh = fft_forward(r);
    for (int k = 0; k < ny; ++k) {
      all = std::max(all, std::abs(rh[k]));
      if (high_band(k, ny)) hi = std::max(hi, std::abs(rh[k]));
    }
  }
  return all > 0 ? hi / all : 0.0;
}

// Fornberg (1988), weights c[k][j] for derivative k at x0 using nodes[j].
std::vector<std::vector<double>> fornberg(double x0, const std::vector<double>& x, int m) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0, c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    int mn = std::min(i, m);
    double c2 = 1.0, c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

DiffOp::DiffOp(const std::vector<double>& x, int d, int p) : d_(d) {
  const int n = static_cast<int>(x.size());
  int width = d + p;
  width = std::min(width, n);
  start_.resize(n);
  w_.resize(n);
  for (int i = 0; i < n; ++i) {
    int s = std::clamp(i - width / 2, 0, n - width);
    start_[i] = s;
    std::vector<double> nodes(x.begin() + s, x.begin() + s + width);
    w_[i] = fornberg(x[i], nodes, d)[d];
  }
}

std::vector<cplx> DiffOp::apply(const std::vector<cplx>& col) const {
  std::vector<cplx> out(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) {
    cplx s = 0;
    for (std::size_t j = 0; j < w_[i].size(); ++j) s += w_[i][j] * col[start_[i] + j];
    out[i] = s;
  }
  return out;
}

std::vector<cplx> DiffOp::apply_layer(const std::vector<cplx>& layer, int ny) const {
  const int n = static_cast<int>(start_.size());
  std::vector<cplx> out(layer.size());
  for (int i = 0; i < n; ++i) {
    cplx* o = out.data() + static_cast<std::ptrdiff_t>(i) * ny;
    for (std::size_t j = 0; j < w_[i].size(); ++j) {
      const cplx* src = layer.data() + static_cast<std::ptrdiff_t>(start_[i] + j) * ny;
      const double w = w_[i][j];
      for (int k = 0; k < ny; ++k) o[k] += w * src[k];
    }
  }
  return out;
}

}  // namespace blt
