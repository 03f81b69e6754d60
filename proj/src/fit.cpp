#include "blt/fit.hpp"

#include <algorithm>
#include <cmath>

#include "blt/common.hpp"

namespace blt {

nlohmann::json OrderFit::to_json() const {
  return {{"slope", slope}, {"intercept", intercept}, {"r2", r2}, {"lo", lo},
          {"hi", hi},       {"n", n},                 {"claimed", claimed}, {"pass", pass}};
}

OrderFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, double floor) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0) || !std::isfinite(y[i]) || !(y[i] > floor)) continue;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const int n = static_cast<int>(lx.size());
  if (n < 3) fail("FitDegenerate", "fewer than 3 usable samples (errors underflow)");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += sqr(lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += sqr(ly[i] - my);
  }
  if (sxx == 0) fail("FitDegenerate", "window has zero width");
  OrderFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  f.lo = std::exp(*std::min_element(lx.begin(), lx.end()));
  f.hi = std::exp(*std::max_element(lx.begin(), lx.end()));
  f.n = n;
  return f;
}

}  // namespace blt
