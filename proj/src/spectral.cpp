#include "freqprior/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

namespace freqprior {
namespace {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }
fftw_complex* as_fftw(const std::complex<double>* p) {
  // fftw_execute_dft takes non-const input; out-of-place c2c plans do not write to it.
  return reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(p));
}

void require_under_cap(const LatentShape& shape, std::size_t cap) {
  if (shape.count() > cap) {
    throw ResourceLimitError("dense DFT matrix for shape " + shape.to_string() + " (N=" +
                             std::to_string(shape.count()) + ") exceeds the dense cap of " +
                             std::to_string(cap) + "; use the matrix-free path");
  }
}

}  // namespace

std::complex<double> unit_root(std::size_t k, std::size_t n) {
  k %= n;
  if ((4 * k) % n == 0) {
    switch ((4 * k) / n) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, -1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, 1.0};
    }
  }
  const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

DftMatrixPair dft_matrix_1d(std::size_t n) {
  if (n == 0) {
    throw InvalidArgument("dft_matrix_1d: size must be positive");
  }
  const auto size = static_cast<Eigen::Index>(n);
  DftMatrixPair pair{Eigen::MatrixXd(size, size), Eigen::MatrixXd(size, size)};
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t c = 0; c < n; ++c) {
      const auto w = unit_root((m * c) % n, n);
      pair.real(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c)) = w.real();
      pair.imag(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c)) = w.imag();
    }
  }
  return pair;
}

DftMatrixPair dft_matrix_3d(const LatentShape& shape, std::size_t cap) {
  require_under_cap(shape, cap);
  const auto t = dft_matrix_1d(shape.frames());
  const auto h = dft_matrix_1d(shape.height());
  const auto w = dft_matrix_1d(shape.width());
  const auto n = static_cast<Eigen::Index>(shape.count());
  DftMatrixPair out{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};

  const auto nf = t.size(), nh = h.size(), nw = w.size();
  for (Eigen::Index a = 0; a < nf; ++a) {
    for (Eigen::Index b = 0; b < nh; ++b) {
      for (Eigen::Index c = 0; c < nw; ++c) {
        const Eigen::Index row = (a * nh + b) * nw + c;
        for (Eigen::Index a2 = 0; a2 < nf; ++a2) {
          const double at = t.real(a, a2), bt = t.imag(a, a2);
          for (Eigen::Index b2 = 0; b2 < nh; ++b2) {
            const double ah = h.real(b, b2), bh = h.imag(b, b2);
            for (Eigen::Index c2 = 0; c2 < nw; ++c2) {
              const double aw = w.real(c, c2), bw = w.imag(c, c2);
              const Eigen::Index col = (a2 * nh + b2) * nw + c2;
              out.real(row, col) = at * ah * aw - at * bh * bw - bt * ah * bw - bt * bh * aw;
              out.imag(row, col) = at * ah * bw + at * bh * aw + bt * ah * aw - bt * bh * bw;
            }
          }
        }
      }
    }
  }
  return out;
}

Fft3Plan::Fft3Plan(const LatentShape& shape) : shape_(shape) {
  std::vector<std::complex<double>> in(shape.count()), out(shape.count());
  const int f = static_cast<int>(shape.frames());
  const int h = static_cast<int>(shape.height());
  const int w = static_cast<int>(shape.width());
  // FFTW_ESTIMATE keeps the chosen algorithm, and so the rounding, reproducible.
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  forward_plan_ =
      fftw_plan_dft_3d(f, h, w, as_fftw(in.data()), as_fftw(out.data()), FFTW_FORWARD, flags);
  backward_plan_ =
      fftw_plan_dft_3d(f, h, w, as_fftw(in.data()), as_fftw(out.data()), FFTW_BACKWARD, flags);
  if (forward_plan_ == nullptr || backward_plan_ == nullptr) {
    throw std::runtime_error("FFTW failed to plan a transform for shape " + shape.to_string());
  }
}

Fft3Plan::~Fft3Plan() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(backward_plan_));
}

const Fft3Plan& Fft3Plan::for_shape(const LatentShape& shape) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t>;
  static std::map<Key, std::unique_ptr<Fft3Plan>> cache;
  std::lock_guard lock(planner_mutex());
  const Key key{shape.frames(), shape.height(), shape.width()};
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, std::unique_ptr<Fft3Plan>(new Fft3Plan(shape))).first;
  }
  return *it->second;
}

void Fft3Plan::forward(std::span<const std::complex<double>> in,
                       std::span<std::complex<double>> out) const {
  fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), as_fftw(in.data()), as_fftw(out.data()));
}

void Fft3Plan::backward(std::span<const std::complex<double>> in,
                        std::span<std::complex<double>> out) const {
  fftw_execute_dft(static_cast<fftw_plan>(backward_plan_), as_fftw(in.data()),
                   as_fftw(out.data()));
}

SpectralTensor fft3(const SpectralTensor& x) {
  SpectralTensor out(x.shape());
  Fft3Plan::for_shape(x.shape()).forward(x.values(), out.values());
  return out;
}

SpectralTensor fft3(const NoiseTensor& x) {
  SpectralTensor in(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) in[i] = {x[i], 0.0};
  return fft3(in);
}

SpectralTensor ifft3(const SpectralTensor& x) {
  SpectralTensor out(x.shape());
  Fft3Plan::for_shape(x.shape()).backward(x.values(), out.values());
  const double scale = 1.0 / static_cast<double>(x.size());
  for (auto& v : out.values()) v *= scale;
  return out;
}

DftIdentityReport verify_dft_identities(const LatentShape& shape, double tol, std::size_t cap) {
  const auto pair = dft_matrix_3d(shape, cap);
  const auto n = pair.size();
  DftIdentityReport report;
  report.ab_residual = (pair.real * pair.imag).norm();
  report.ba_residual = (pair.imag * pair.real).norm();
  Eigen::MatrixXd sq = pair.real * pair.real;
  sq.noalias() += pair.imag * pair.imag;
  sq.diagonal().array() -= static_cast<double>(n);
  report.square_sum_residual = sq.norm();
  report.passed = report.ab_residual <= tol && report.ba_residual <= tol &&
                  report.square_sum_residual <= tol;
  return report;
}

Eigen::VectorXd to_vector(const NoiseTensor& x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return v;
}

NoiseTensor from_vector(const Eigen::VectorXd& v, const LatentShape& shape) {
  if (static_cast<std::size_t>(v.size()) != shape.count()) {
    throw InvalidArgument("vector length does not match shape " + shape.to_string());
  }
  return NoiseTensor(shape, std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace freqprior
