#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace blt {

using cplx = std::complex<double>;
inline constexpr cplx I1{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

enum class Side { West, East };

std::string to_string(Side s);
Side side_from_string(const std::string& s);

// Exit codes shared with the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitSuite = 1,
  kExitCert = 2,
  kExitResolution = 3,
  kExitUsage = 64,
};

// Every failure carries a kind tag (NonConvergence, CertFailure, ...) and the
// exit code it maps to.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg, int code = kExitSuite)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)), code_(code) {}
  const std::string& kind() const { return kind_; }
  int exit_code() const { return code_; }

 private:
  std::string kind_;
  int code_;
};

[[noreturn]] void fail(const std::string& kind, const std::string& msg);

inline double sqr(double x) { return x * x; }

// (1 + a^2)^p, used all over the place.
inline double bpow(double alpha, double p) { return std::pow(1.0 + alpha * alpha, p); }

std::vector<double> linspace(double a, double b, int n);
std::vector<double> logspace(double a, double b, int n);  // a, b > 0, geometric

}  // namespace blt
