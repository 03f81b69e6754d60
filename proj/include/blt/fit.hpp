#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace blt {

// Log-log regression of y against x. slope is d log y / d log x.
struct OrderFit {
  double slope = 0.0;
  double intercept = 0.0;   // log C
  double r2 = 0.0;
  double lo = 0.0, hi = 0.0;
  int n = 0;
  double claimed = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
};

// Throws FitDegenerate when fewer than 3 samples are usable (y must be finite
// and above the underflow floor).
OrderFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y,
                    double floor = 1e-300);

}  // namespace blt
