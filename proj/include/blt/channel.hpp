#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blt/grid.hpp"
#include "blt/halfspace.hpp"
#include "json.hpp"

namespace blt {

// Wall depth gamma(Y_j) > 0 on the periodic Y grid.
struct RoughProfile {
  double L = 0.0;
  std::vector<double> gamma;

  static RoughProfile flat(double gamma0, int N, double L);
  // gamma0 + amp * sum_m c_m sin(2 pi m Y / L + p_m) over m <= modes, seeded.
  static RoughProfile random(double gamma0, double amp, int modes, int N, double L, std::uint64_t seed);
  int size() const { return static_cast<int>(gamma.size()); }
  bool is_flat() const;
  double lipschitz() const;               // max |gamma'| (spectral derivative)
  std::vector<double> slope() const;      // gamma'(Y_j)
  // Throws Usage if inf gamma <= 0.
  void validate() const;
};

// Four jump functions g_k(Y) = [dX^k Psi] at X = 0, k = 0..3.
using Jumps = std::array<std::vector<double>, 4>;
Jumps zero_jumps(int N);

// Boundary rows at X = M. Data mode imposes A2 Psi = rho2 and A3 Psi = rho3
// with the differential operators of the channel field. Coupled mode
// subtracts the Steklov symbol applied to (Psi, dX Psi) at X = M, so
// rho = 0 is the transparent condition.
// Trace mode instead imposes Psi = psi0 and dX Psi = psi1 at X = M.
struct SteklovRows {
  std::vector<double> rho2, rho3;   // empty = zero
  bool coupled = true;
  bool traces = false;
  std::vector<double> psi0, psi1;
};

// Flat channel layout: X in [-gamma0, 0] (n_left nodes) then [0, M]
// (n_right nodes). X = 0 is stored twice, left limit first.
struct ChannelLayout {
  double gamma0 = 1.0;
  double M = 4.0;
  int n_left = 24;
  int n_right = 48;
  std::vector<double> xs() const;
  int interface_left() const { return n_left - 1; }
  int interface_right() const { return n_left; }
};

// Cutoff of the lift: 1 at X = 0 with four vanishing derivatives, 0 beyond
// M/2 (degree-9 smoothstep in between).
double lift_cutoff(double X, double M, int deriv = 0);

// Psi^L = chi(X) sum_k g_k(Y) X^k / k! for X >= 0 and 0 for X < 0, on the
// given X samples (an X = 0 entry counts as the right limit unless it is
// immediately followed by another 0). Derivative layers 1..3 are exact.
FieldSlice lift_jumps(const Jumps& g, const std::vector<double>& x, double L, double M);
// One-sided limits d^k Psi^L (0+, Y_j) - d^k Psi^L(0-, Y_j) from the closed form.
std::array<double, 4> lift_jump_at(const Jumps& g, int j, double M);

// Exact per-mode solve on a flat wall: wall clamp, jumps, rows at M.
// F (optional) is a source on the layout's X nodes. Returns layers 0..3.
FieldSlice solve_channel_flat(Side side, double alpha, const ChannelLayout& lay, const Jumps& g,
                              const SteklovRows& rows, const SpectralGrid& grid,
                              const FieldSlice* F = nullptr);

// Terrain-following FD solution on a uniform s lattice with
// X = s M - gamma(Y) (1 - s)^4. The quartic taper keeps the map the identity
// (up to scale) to third order at s = 1, so the rows at X = M see plain
// s-derivatives. Jacobian M + 4 gamma (1 - s)^3 > 0.
struct RoughSolution {
  RoughProfile profile;
  double M = 0.0;
  int ns = 0, N = 0;
  std::vector<double> s;
  std::vector<double> v;      // ns x N, Y fastest
  std::vector<double> X;      // physical X of every node
  double residual = 0.0;      // max |A u - f| / max |f| of the sparse system
  double operator()(int i, int j) const { return v[static_cast<std::size_t>(i) * N + j]; }
  // dX^k Psi at X = M, k = 0..3, by one-sided differences in s.
  std::vector<double> top_derivative(int k) const;
  double wall_value_max() const;
  double wall_normal_max() const;
};

RoughSolution solve_channel_rough(Side side, double alpha, const RoughProfile& profile, const Jumps& g,
                                  const SteklovRows& rows, double M, int ns);
double rough_map(double s, double gamma, double M);

// Dispatch: flat profiles take the exact path, rough ones the FD path. The
// flat result is returned as a RoughSolution sampled on the same s lattice.
RoughSolution solve_channel_linear(Side side, double alpha, const RoughProfile& profile, const Jumps& g,
                                   const SteklovRows& rows, double M, int ns);

struct GlueReport {
  std::array<double, 4> mismatch{};   // sup_Y |dX^k channel(M-) - dX^k half(M+)|, relative
  double rho_mismatch = 0.0;          // differential rows vs Steklov symbol, relative
  double worst_y = 0.0;
  double tol = 1e-6;
  bool ok = true;
  nlohmann::json to_json() const;
};

// The half-space is solved with the channel traces at M. Throws GlueMismatch
// when require is set and the report fails.
GlueReport glue_check(Side side, double alpha, const FieldSlice& channel, const SpectralGrid& grid,
                      double tol = 1e-6, bool require = false);
GlueReport glue_check(Side side, double alpha, const RoughSolution& channel, double tol = 1e-6,
                      bool require = false);

// E_k = int over |Y - center| <= k of int_X |Lap Psi|^2, k = 0..k_max.
std::vector<double> truncated_energies(const FieldSlice& field, const SpectralGrid& grid, int k_max,
                                       double center);

// H^2 proxy of a channel field: L2 over the period of the jet up to order 2.
double channel_h2_norm(const FieldSlice& field, const SpectralGrid& grid);

// Differential boundary rows of a field at its last X node (A2, A3 with
// +Psi/2) and the nonlinear boundary terms of the rough-channel problem.
std::pair<std::vector<double>, std::vector<double>> boundary_rows(Side side, double alpha,
                                                                  const FieldSlice& f,
                                                                  const SpectralGrid& grid, int row);
std::vector<double> nonlinear_boundary_terms(Side side, double alpha, const FieldSlice& f,
                                             const SpectralGrid& grid, int row);

struct ChannelPicardReport {
  IterTrace trace;
  FieldSlice field;
};

// Outer Picard for Q(Psi, Psi) + s dX Psi - Lap^2 Psi = 0 in the flat
// channel, jumps (phi, 0, 0, 0), data-mode rows with the nonlinear boundary
// terms moved to rho3.
ChannelPicardReport solve_channel_nonlinear(Side side, double alpha, const ChannelLayout& lay,
                                            const std::vector<double>& phi, const SteklovRows& rows,
                                            const SpectralGrid& grid, double tol = 1e-10,
                                            int max_iter = 30);

struct MatchReport {
  std::vector<double> defects;     // sup |rho_half - rho| per sweep, relative
  int sweeps = 0;
  bool converged = false;
  bool diverged = false;
  FieldSlice channel;
  nlohmann::json to_json() const;
};

// Alternating channel / half-space solves until the data rows match the
// half-space's own boundary rows. Plain relaxation rho += theta (rho_half - rho)
// diverges once the symbol outgrows the channel trace map, so by default the
// defect is preconditioned per mode by (I - S T)^{-1}, T the linear channel
// map from data rows to traces (a chord iteration). nonlinear switches both
// sides to their Picard solvers and the nonlinear boundary operator.
MatchReport alternating_match(Side side, double alpha, const ChannelLayout& lay,
                              const std::vector<double>& phi, const SpectralGrid& grid, bool nonlinear,
                              double theta = 1.0, int max_sweeps = 60, double tol = 1e-9,
                              bool precondition = true);

}  // namespace blt
