#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "freqprior/priors.hpp"

namespace freqprior {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  /// Negative control: freqprior refinement uses 1 - M as its high-pass.
  bool break_highpass = false;
  int samples = 200000;
};

/// Runs every property below in a fixed order. Results depend only on the
/// options.
std::vector<PropertyResult> run_property_suite(const VerifyOptions& options);

/// ||AB||, ||BA||, ||A^2 + B^2 - NI|| <= tol for 1D sizes 1..max_n.
PropertyResult check_dft_identities_1d(std::size_t max_n, double tol);
/// Same for every 3D shape with f * h * w <= max_count.
PropertyResult check_dft_identities_3d(std::size_t max_count, double tol);

/// Columns of p_matrix_dense equal Re(ifft3(Lambda * fft3(e_j))).
PropertyResult check_p_matrix_fft_route(const LatentShape& shape, std::uint64_t seed);

/// M^2 + H^2 = 1 for the high-pass chosen by `rule`, on every mask kind.
PropertyResult check_energy_split(HighpassRule rule);
/// diag(Sigma_FreeInit) <= 1 with strict decay on some element.
PropertyResult check_freeinit_variance_decay();
/// ||Q||_F <= 1e-11 N for every build_mask output on a set of shapes.
PropertyResult check_q_vanishing();
/// Error inequality over random (Lambda, cos) trials with N <= max_n.
PropertyResult check_inequality_trials(int trials, std::size_t max_n, std::uint64_t seed);
/// P - P^2 is PSD for random diagonal Lambda in [0, 1]^N.
PropertyResult check_bound_structure(int trials, std::uint64_t seed);
/// ||C|| >= ||D|| for random PSD D and C = D + PSD.
PropertyResult check_theorem4(int trials, std::uint64_t seed);
/// Dense and matrix-free errors agree to 1e-9 relative (freeinit) and both
/// stay below 1e-20 (freqprior).
PropertyResult check_dense_vs_matrix_free(const std::vector<LatentShape>& shapes);

/// Draws one refined sample from the stream `rng`.
using Sampler = std::function<NoiseTensor(SeededRng& rng)>;

/// Translation-invariant covariance estimate: for each lag d (a flat index),
/// g_d = mean_m x_m x_{m + d} with the shift taken per axis modulo the shape.
struct LagCovariance {
  Eigen::VectorXd mean;            // estimate of Sigma(0, d)
  Eigen::VectorXd standard_error;  // across samples
  Eigen::VectorXd element_variance;  // per-element sample variance
  int samples = 0;
};
LagCovariance estimate_lag_covariance(const LatentShape& shape, const Sampler& sampler,
                                      int samples, std::uint64_t seed);

/// Compares every lag of `reference` (translation invariant, checked) with
/// the estimate, passing when all lie within 3 standard errors.
PropertyResult compare_lag_covariance(std::string name, const LatentShape& shape,
                                      const Eigen::MatrixXd& reference,
                                      const LagCovariance& estimate);

/// Per-element variance of freqprior_refine is 1 +- 0.01 on (2,2,2).
PropertyResult check_freqprior_variance(const RefinementConfig& cfg, int samples,
                                        std::uint64_t seed);
/// Per-element variance of freeinit_refine matches diag(Sigma_FreeInit) within 1%.
PropertyResult check_freeinit_variance(const FilterMask& mask, int samples, std::uint64_t seed);
/// Mixed prior: cross-frame covariance 0.5 +- 0.01 per pixel, in-frame 0 +- 0.01.
PropertyResult check_mixed_covariance(const LatentShape& shape, int samples, std::uint64_t seed);

/// Butterworth order 4, cutoff 1.0 on (2,2,2). Its values are 1, 1/2, 1/17 and
/// 1/82; at cutoff 0.25 the (2,2,2) mask is nearly binary.
FilterMask verification_mask();

}  // namespace freqprior
