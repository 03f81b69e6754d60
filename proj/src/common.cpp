#include "blt/common.hpp"

#include <cmath>

namespace blt {

std::string to_string(Side s) { return s == Side::West ? "west" : "east"; }

Side side_from_string(const std::string& s) {
  if (s == "west" || s == "w") return Side::West;
  if (s == "east" || s == "e") return Side::East;
  throw Error("Usage", "unknown side '" + s + "'", kExitUsage);
}

void fail(const std::string& kind, const std::string& msg) {
  int code = kExitSuite;
  if (kind == "CertFailure") code = kExitCert;
  if (kind == "UnderResolved" || kind == "QuadratureUnderResolved") code = kExitResolution;
  throw Error(kind, msg, code);
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> v(n);
  const double la = std::log(a), lb = std::log(b);
  for (int i = 0; i < n; ++i) v[i] = std::exp(n == 1 ? la : la + (lb - la) * i / (n - 1));
  if (n > 0) v.front() = a;
  if (n > 1) v.back() = b;
  return v;
}

}  // namespace blt
