#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace blt::verify {

// One measured quantity against its threshold. Informational lines carry no
// verdict and never fail a criterion.
struct Line {
  std::string label;
  double value = 0.0;
  std::string bound;   // human-readable threshold, e.g. "<= 1e-10"
  bool pass = true;
  bool info = false;
  bool timing = false;   // value left out of the JSON so reruns compare equal
};

struct Criterion {
  int id = 0;
  std::string title;
  std::string module;
  std::vector<Line> lines;
  double seconds = 0.0;
  std::string error;   // set when the run threw

  bool pass() const;
  nlohmann::json to_json() const;
};

struct Options {
  std::uint64_t seed = 2024;
  int jobs = 1;
};

inline constexpr int kCriteria = 12;

// Module a criterion belongs to, for --only filtering.
std::string criterion_module(int id);
std::vector<int> criteria_for(const std::vector<std::string>& modules);

Criterion run_criterion(int id, const Options& opt);

// One summary line plus indented sub-lines.
std::string format(const Criterion& c);

}  // namespace blt::verify
