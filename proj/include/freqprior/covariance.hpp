#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "freqprior/filters.hpp"
#include "freqprior/shape.hpp"
#include "freqprior/spectral.hpp"

namespace freqprior {

// Closed-form covariances of refined noise under z_noise ~ N(0, I).
//
// With F = A + iB the DFT matrix and Lambda the filter diagonal:
//   P = (A Lambda A + B Lambda B) / N      Sigma_FreeInit   = P^2 + (I - P)^2
//   Q = (A Lambda B + B Lambda A) / N      Sigma_FreqPrior  = I - k Q^2,
// where k = 2 cos^2 / (1 + cos^2). Every function taking a DftMatrixPair
// expects `lambda` of the same length.

Eigen::MatrixXd p_matrix_dense(const Eigen::VectorXd& lambda, const DftMatrixPair& pair);
Eigen::MatrixXd q_matrix_dense(const Eigen::VectorXd& lambda, const DftMatrixPair& pair);

Eigen::MatrixXd covariance_freeinit(const Eigen::VectorXd& lambda, const DftMatrixPair& pair);
Eigen::MatrixXd covariance_freqprior(const Eigen::VectorXd& lambda, const DftMatrixPair& pair,
                                     double cos_theta);

/// Sigma - I without forming Sigma, i.e. 2(P^2 - P) and -k Q^2. These keep
/// roundoff-scale deviations that I + (tiny) would lose to cancellation.
Eigen::MatrixXd freeinit_deviation(const Eigen::VectorXd& lambda, const DftMatrixPair& pair);
Eigen::MatrixXd freqprior_deviation(const Eigen::VectorXd& lambda, const DftMatrixPair& pair,
                                    double cos_theta);

/// 2 cos^2 / (1 + cos^2)
double freqprior_coefficient(double cos_theta);

/// ||Sigma - I||_F; throws InvalidArgument for non-square input.
double covariance_error(const Eigen::MatrixXd& sigma);
/// Frobenius norm with compensated accumulation.
double frobenius_norm(const Eigen::MatrixXd& m);

/// Analytic error of the frame-shared mixed prior: sqrt(0.25 f (f-1) h w).
double mixed_prior_error(const LatentShape& shape);

enum class PriorKind { gaussian, mixed, freeinit, freqprior };
std::string_view to_string(PriorKind kind);
PriorKind parse_prior_kind(std::string_view name);

struct PriorDistribution {
  PriorKind kind = PriorKind::gaussian;
  LatentShape shape;
  std::optional<FilterSpec> filter;  // freeinit, freqprior
  std::optional<double> cos_theta;   // freqprior

  /// Throws InvalidArgument when the optional fields do not match `kind`.
  void validate() const;
};

enum class CovarianceMethod { dense, matrix_free, analytic };
std::string_view to_string(CovarianceMethod method);

struct CovarianceReport {
  PriorDistribution distribution;
  double error = 0.0;
  CovarianceMethod method = CovarianceMethod::analytic;
  double runtime_seconds = 0.0;
};

struct MatrixFreeOptions {
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
};

/// Streams standard-basis columns through FFT -> mask -> FFT and accumulates
/// squared column norms of (Sigma - I). No N x N storage; the result does not
/// depend on the thread count.
CovarianceReport covariance_error_matrix_free(const PriorDistribution& dist,
                                              const MatrixFreeOptions& options = {});

/// Dense route via p_matrix_dense / q_matrix_dense.
CovarianceReport covariance_error_dense(const PriorDistribution& dist,
                                        std::size_t cap = kDefaultDenseCap);

/// Closed forms: 0 for gaussian, mixed_prior_error for mixed, and for freeinit
/// the circulant spectrum of P (symmetrized mask), error = 2 ||p^2 - p||_2.
/// Throws InvalidArgument for freqprior (no closed form beyond Q = 0).
CovarianceReport covariance_error_analytic(const PriorDistribution& dist);

struct InequalityCheck {
  bool holds = false;
  double freqprior_error = 0.0;  // ||I - Sigma_FreqPrior||_F
  double freeinit_error = 0.0;   // ||I - Sigma_FreeInit||_F
  double bound = 0.0;            // cos^2 / (1 + cos^2) * freeinit_error
};

/// Checks ||I - Sigma_FreqPrior||_F <= cos^2/(1+cos^2) ||I - Sigma_FreeInit||_F,
/// allowing a roundoff slack of 1e-12 relative plus 1e-13 absolute.
InequalityCheck verify_error_inequality(const Eigen::VectorXd& lambda, const DftMatrixPair& pair,
                                        double cos_theta);

/// For symmetric C >= D >= 0 returns whether ||C||_F >= ||D||_F. Throws
/// InvalidArgument if D or C - D has an eigenvalue below -tol * max(1, ||C||).
bool theorem4_check(const Eigen::MatrixXd& c, const Eigen::MatrixXd& d, double tol = 1e-10);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& symmetric);

std::string csv_header();
/// prior,shape,filter,order,cutoff,cos_theta,error,method,seconds
std::string to_csv_row(const CovarianceReport& report, bool include_timing = true);

}  // namespace freqprior
