#include "freqprior/table1.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace freqprior {
namespace {

constexpr double kAgreementTol = 1e-9;
constexpr double kRoundoffCeiling = 1e-20;

double relative_gap(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

Table1Check agreement(std::string name, double value, double reference) {
  const double gap = relative_gap(value, reference);
  return {std::move(name), gap <= kAgreementTol,
          fmt::format("{:.12g} vs {:.12g} (rel {:.3g})", value, reference, gap)};
}

}  // namespace

bool Table1Result::consistent() const {
  return std::all_of(checks.begin(), checks.end(), [](const Table1Check& c) { return c.passed; });
}

Table1Result run_table1(const Table1Options& options) {
  Table1Result result;
  const MatrixFreeOptions mf{options.threads};

  for (const auto& shape : options.shapes) {
    const std::string tag = shape.to_string();

    PriorDistribution mixed{PriorKind::mixed, shape, std::nullopt, std::nullopt};
    const CovarianceReport mixed_row = covariance_error_analytic(mixed);
    result.rows.push_back(mixed_row);
    if (shape.count() <= options.dense_check_limit) {
      result.checks.push_back(agreement(fmt::format("mixed {} dense", tag), mixed_row.error,
                                        covariance_error_dense(mixed).error));
    }

    for (const FilterKind kind : options.filters) {
      FilterSpec filter{kind, options.cutoff, options.order};
      const std::string label = fmt::format("{} {}", tag, to_string(kind));

      PriorDistribution freeinit{PriorKind::freeinit, shape, filter, std::nullopt};
      const CovarianceReport freeinit_row = covariance_error_matrix_free(freeinit, mf);
      result.rows.push_back(freeinit_row);
      result.checks.push_back(agreement(fmt::format("freeinit {} analytic", label),
                                        freeinit_row.error,
                                        covariance_error_analytic(freeinit).error));
      if (shape.count() <= options.dense_check_limit) {
        result.checks.push_back(agreement(fmt::format("freeinit {} dense", label),
                                          freeinit_row.error,
                                          covariance_error_dense(freeinit).error));
      }

      PriorDistribution freqprior{PriorKind::freqprior, shape, filter, options.cos_theta};
      const CovarianceReport freqprior_row = covariance_error_matrix_free(freqprior, mf);
      result.rows.push_back(freqprior_row);
      result.checks.push_back({fmt::format("freqprior {} roundoff", label),
                               freqprior_row.error < kRoundoffCeiling,
                               fmt::format("{:.6g} < {:g}", freqprior_row.error,
                                           kRoundoffCeiling)});

      const double c2 = options.cos_theta * options.cos_theta;
      const double bound = c2 / (1.0 + c2) * freeinit_row.error;
      result.checks.push_back({fmt::format("inequality {}", label),
                               freqprior_row.error <= bound * (1.0 + 1e-12) + 1e-13,
                               fmt::format("{:.6g} <= {:.6g}", freqprior_row.error, bound)});
    }
  }
  return result;
}

}  // namespace freqprior
