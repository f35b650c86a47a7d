#pragma once

#include <string>
#include <vector>

#include "freqprior/covariance.hpp"

namespace freqprior {

/// Covariance-error grid: every shape x filter x {mixed, freeinit, freqprior}.
struct Table1Options {
  std::vector<LatentShape> shapes{{16, 20, 20}, {16, 30, 30}, {16, 40, 40}};
  std::vector<FilterKind> filters{FilterKind::butterworth, FilterKind::gaussian};
  int order = 4;
  double cutoff = 0.25;
  double cos_theta = 0.8;
  unsigned threads = 0;
  /// Shapes up to this many elements are also cross-checked on the dense path.
  std::size_t dense_check_limit = 512;
};

struct Table1Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Table1Result {
  std::vector<CovarianceReport> rows;
  std::vector<Table1Check> checks;
  bool consistent() const;
};

/// Mixed rows use the closed form, freeinit and freqprior rows the matrix-free
/// path. Checks per (shape, filter):
///   freeinit matrix-free vs closed-form spectrum, 1e-9 relative
///   freeinit / mixed dense vs reported value (small shapes), 1e-9 relative
///   freqprior error below 1e-20 and within cos^2/(1+cos^2) of freeinit
Table1Result run_table1(const Table1Options& options);

}  // namespace freqprior
