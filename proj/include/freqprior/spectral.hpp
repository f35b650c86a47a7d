#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "freqprior/shape.hpp"

namespace freqprior {

/// Largest N for which N x N matrices are materialized (512 MB per float64 matrix).
inline constexpr std::size_t kDefaultDenseCap = 8192;

/// Real and imaginary parts of a DFT matrix, F = A + iB, with
/// F_mn = exp(-2*pi*i*m*n/N) for zero-based m, n.
struct DftMatrixPair {
  Eigen::MatrixXd real;  // A
  Eigen::MatrixXd imag;  // B

  Eigen::Index size() const { return real.rows(); }
};

/// exp(-2*pi*i*k/n), exact at multiples of a quarter turn.
std::complex<double> unit_root(std::size_t k, std::size_t n);

DftMatrixPair dft_matrix_1d(std::size_t n);

/// Dense A_3D, B_3D from the four-term Kronecker expansions of
/// (A_T + iB_T) (x) (A_H + iB_H) (x) (A_W + iB_W).
/// Throws ResourceLimitError when shape.count() > cap.
DftMatrixPair dft_matrix_3d(const LatentShape& shape, std::size_t cap = kDefaultDenseCap);

/// Unnormalized forward 3D DFT (sign -1) over all three axes.
SpectralTensor fft3(const NoiseTensor& x);
SpectralTensor fft3(const SpectralTensor& x);
/// Inverse 3D DFT including the 1/N factor.
SpectralTensor ifft3(const SpectralTensor& x);

/// Reusable FFTW plans for one shape. Plans are created once per shape and
/// cached process-wide; execute() is safe to call from several threads on
/// distinct buffers.
class Fft3Plan {
 public:
  static const Fft3Plan& for_shape(const LatentShape& shape);

  const LatentShape& shape() const { return shape_; }

  /// out = F in (unnormalized). `in` and `out` must not alias.
  void forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const;
  /// out = N * F^{-1} in, i.e. the unnormalized backward transform.
  void backward(std::span<const std::complex<double>> in,
                std::span<std::complex<double>> out) const;

  Fft3Plan(const Fft3Plan&) = delete;
  Fft3Plan& operator=(const Fft3Plan&) = delete;
  ~Fft3Plan();

 private:
  explicit Fft3Plan(const LatentShape& shape);

  LatentShape shape_;
  void* forward_plan_ = nullptr;
  void* backward_plan_ = nullptr;
};

struct DftIdentityReport {
  double ab_residual = 0.0;          // ||AB||_F
  double ba_residual = 0.0;          // ||BA||_F
  double square_sum_residual = 0.0;  // ||A^2 + B^2 - N I||_F
  bool passed = false;
};

DftIdentityReport verify_dft_identities(const LatentShape& shape, double tol,
                                        std::size_t cap = kDefaultDenseCap);

/// Flattens a real tensor into an Eigen vector (row-major order).
Eigen::VectorXd to_vector(const NoiseTensor& x);
NoiseTensor from_vector(const Eigen::VectorXd& v, const LatentShape& shape);

}  // namespace freqprior
