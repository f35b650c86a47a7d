#include "freqprior/covariance.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <thread>
#include <vector>

#include <fmt/format.h>

namespace freqprior {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

void require_matching(const Eigen::VectorXd& lambda, const DftMatrixPair& pair) {
  if (lambda.size() != pair.size()) {
    throw InvalidArgument(fmt::format("filter diagonal has length {}, DFT matrices are {}x{}",
                                      lambda.size(), pair.size(), pair.size()));
  }
}

void require_cos_theta(double cos_theta) {
  if (!(cos_theta >= 0.0 && cos_theta <= 1.0)) {
    throw InvalidArgument(fmt::format("cos_theta must lie in [0, 1], got {}", cos_theta));
  }
}

std::vector<std::complex<double>> root_table(std::size_t n) {
  std::vector<std::complex<double>> table(n);
  for (std::size_t k = 0; k < n; ++k) table[k] = unit_root(k, n);
  return table;
}

// Applies (Sigma - I) to standard-basis columns and records squared norms.
class ColumnStreamer {
 public:
  ColumnStreamer(const PriorDistribution& dist)
      : kind_(dist.kind),
        shape_(dist.shape),
        plan_(Fft3Plan::for_shape(dist.shape)),
        lambda_(mask_to_lambda(build_mask(*dist.filter, dist.shape))),
        coefficient_(dist.kind == PriorKind::freqprior ? freqprior_coefficient(*dist.cos_theta)
                                                       : 0.0),
        roots_f_(root_table(shape_.frames())),
        roots_h_(root_table(shape_.height())),
        roots_w_(root_table(shape_.width())) {}

  std::size_t columns() const { return shape_.count(); }

  struct Workspace {
    explicit Workspace(std::size_t n) : a(n), b(n), v(n), w(n) {}
    std::vector<std::complex<double>> a, b;
    std::vector<double> v, w;
  };

  double squared_column_norm(std::size_t column, Workspace& ws) const {
    const std::size_t n = columns();
    const double inv_n = 1.0 / static_cast<double>(n);
    basis_spectrum(column, ws.a);
    for (std::size_t k = 0; k < n; ++k) ws.a[k] *= lambda_[static_cast<Eigen::Index>(k)];

    CompensatedSum sum;
    if (kind_ == PriorKind::freeinit) {
      // v = P e_j = Re(F^{-1} Lambda F e_j), w = P v, (Sigma - I) e_j = 2 (w - v)
      plan_.backward(ws.a, ws.b);
      for (std::size_t k = 0; k < n; ++k) ws.v[k] = ws.b[k].real() * inv_n;
      apply_filtered_real(ws.v, ws, /*inverse=*/true);
      for (std::size_t k = 0; k < n; ++k) {
        const double d = 2.0 * (ws.w[k] - ws.v[k]);
        sum.add(d * d);
      }
    } else {
      // Q x = Im(F Lambda F x) / N, (Sigma - I) e_j = -k Q (Q e_j)
      plan_.forward(ws.a, ws.b);
      for (std::size_t k = 0; k < n; ++k) ws.v[k] = ws.b[k].imag() * inv_n;
      apply_filtered_real(ws.v, ws, /*inverse=*/false);
      for (std::size_t k = 0; k < n; ++k) {
        const double d = -coefficient_ * ws.w[k];
        sum.add(d * d);
      }
    }
    return sum.value();
  }

 private:
  // F e_j evaluated directly from per-axis roots of unity.
  void basis_spectrum(std::size_t column, std::vector<std::complex<double>>& out) const {
    const std::size_t nf = shape_.frames(), nh = shape_.height(), nw = shape_.width();
    const std::size_t jc = column % nw;
    const std::size_t jb = (column / nw) % nh;
    const std::size_t ja = column / (nw * nh);
    std::size_t k = 0;
    for (std::size_t a = 0; a < nf; ++a) {
      const auto ra = roots_f_[(a * ja) % nf];
      for (std::size_t b = 0; b < nh; ++b) {
        const auto rab = ra * roots_h_[(b * jb) % nh];
        for (std::size_t c = 0; c < nw; ++c) out[k++] = rab * roots_w_[(c * jc) % nw];
      }
    }
  }

  // ws.w = Re(F^{-1} Lambda F x) when inverse, else Im(F Lambda F x) / N.
  void apply_filtered_real(const std::vector<double>& x, Workspace& ws, bool inverse) const {
    const std::size_t n = columns();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) ws.a[k] = {x[k], 0.0};
    plan_.forward(ws.a, ws.b);
    for (std::size_t k = 0; k < n; ++k) ws.b[k] *= lambda_[static_cast<Eigen::Index>(k)];
    if (inverse) {
      plan_.backward(ws.b, ws.a);
      for (std::size_t k = 0; k < n; ++k) ws.w[k] = ws.a[k].real() * inv_n;
    } else {
      plan_.forward(ws.b, ws.a);
      for (std::size_t k = 0; k < n; ++k) ws.w[k] = ws.a[k].imag() * inv_n;
    }
  }

  PriorKind kind_;
  LatentShape shape_;
  const Fft3Plan& plan_;
  Eigen::VectorXd lambda_;
  double coefficient_;
  std::vector<std::complex<double>> roots_f_, roots_h_, roots_w_;
};

}  // namespace

Eigen::MatrixXd p_matrix_dense(const Eigen::VectorXd& lambda, const DftMatrixPair& pair) {
  require_matching(lambda, pair);
  const Eigen::MatrixXd al = pair.real * lambda.asDiagonal();
  const Eigen::MatrixXd bl = pair.imag * lambda.asDiagonal();
  Eigen::MatrixXd p = al * pair.real;
  p.noalias() += bl * pair.imag;
  return p / static_cast<double>(pair.size());
}

Eigen::MatrixXd q_matrix_dense(const Eigen::VectorXd& lambda, const DftMatrixPair& pair) {
  require_matching(lambda, pair);
  const Eigen::MatrixXd al = pair.real * lambda.asDiagonal();
  const Eigen::MatrixXd bl = pair.imag * lambda.asDiagonal();
  Eigen::MatrixXd q = al * pair.imag;
  q.noalias() += bl * pair.real;
  return q / static_cast<double>(pair.size());
}

double freqprior_coefficient(double cos_theta) {
  require_cos_theta(cos_theta);
  const double c2 = cos_theta * cos_theta;
  return 2.0 * c2 / (1.0 + c2);
}

Eigen::MatrixXd freeinit_deviation(const Eigen::VectorXd& lambda, const DftMatrixPair& pair) {
  const Eigen::MatrixXd p = p_matrix_dense(lambda, pair);
  Eigen::MatrixXd dev = p * p;
  dev -= p;
  return 2.0 * dev;
}

Eigen::MatrixXd freqprior_deviation(const Eigen::VectorXd& lambda, const DftMatrixPair& pair,
                                    double cos_theta) {
  const double k = freqprior_coefficient(cos_theta);
  const Eigen::MatrixXd q = q_matrix_dense(lambda, pair);
  return -k * (q * q);
}

Eigen::MatrixXd covariance_freeinit(const Eigen::VectorXd& lambda, const DftMatrixPair& pair) {
  Eigen::MatrixXd sigma = freeinit_deviation(lambda, pair);
  sigma.diagonal().array() += 1.0;
  return sigma;
}

Eigen::MatrixXd covariance_freqprior(const Eigen::VectorXd& lambda, const DftMatrixPair& pair,
                                     double cos_theta) {
  Eigen::MatrixXd sigma = freqprior_deviation(lambda, pair, cos_theta);
  sigma.diagonal().array() += 1.0;
  return sigma;
}

double frobenius_norm(const Eigen::MatrixXd& m) {
  CompensatedSum sum;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) sum.add(m(i, j) * m(i, j));
  }
  return std::sqrt(sum.value());
}

double covariance_error(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) {
    throw InvalidArgument(
        fmt::format("covariance must be square, got {}x{}", sigma.rows(), sigma.cols()));
  }
  CompensatedSum sum;
  for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
      const double d = sigma(i, j) - (i == j ? 1.0 : 0.0);
      sum.add(d * d);
    }
  }
  return std::sqrt(sum.value());
}

double mixed_prior_error(const LatentShape& shape) {
  const double f = static_cast<double>(shape.frames());
  const double hw = static_cast<double>(shape.height() * shape.width());
  return std::sqrt(0.25 * f * (f - 1.0) * hw);
}

std::string_view to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::gaussian: return "gaussian";
    case PriorKind::mixed: return "mixed";
    case PriorKind::freeinit: return "freeinit";
    case PriorKind::freqprior: return "freqprior";
  }
  return "unknown";
}

PriorKind parse_prior_kind(std::string_view name) {
  if (name == "gaussian") return PriorKind::gaussian;
  if (name == "mixed") return PriorKind::mixed;
  if (name == "freeinit") return PriorKind::freeinit;
  if (name == "freqprior") return PriorKind::freqprior;
  throw InvalidArgument(fmt::format("unknown prior kind '{}'", name));
}

std::string_view to_string(CovarianceMethod method) {
  switch (method) {
    case CovarianceMethod::dense: return "dense";
    case CovarianceMethod::matrix_free: return "matrix_free";
    case CovarianceMethod::analytic: return "analytic";
  }
  return "unknown";
}

void PriorDistribution::validate() const {
  const bool needs_filter = kind == PriorKind::freeinit || kind == PriorKind::freqprior;
  if (needs_filter != filter.has_value()) {
    throw InvalidArgument(fmt::format("{} prior {} a filter", to_string(kind),
                                      needs_filter ? "requires" : "does not take"));
  }
  if ((kind == PriorKind::freqprior) != cos_theta.has_value()) {
    throw InvalidArgument(fmt::format("cos_theta must be given iff the prior is freqprior"));
  }
  if (filter) filter->validate();
  if (cos_theta) require_cos_theta(*cos_theta);
}

CovarianceReport covariance_error_matrix_free(const PriorDistribution& dist,
                                              const MatrixFreeOptions& options) {
  dist.validate();
  if (dist.kind != PriorKind::freeinit && dist.kind != PriorKind::freqprior) {
    throw InvalidArgument("matrix-free covariance error supports freeinit and freqprior only");
  }
  const auto start = Clock::now();
  const ColumnStreamer streamer(dist);
  const std::size_t n = streamer.columns();
  std::vector<double> column_sq(n, 0.0);

  unsigned threads = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(std::max<std::size_t>(n, 1)));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    ColumnStreamer::Workspace ws(n);
    for (std::size_t j = next++; j < n; j = next++) {
      column_sq[j] = streamer.squared_column_norm(j, ws);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  // Fixed-order reduction keeps the result independent of the thread count.
  CompensatedSum total;
  for (double v : column_sq) total.add(v);

  return {dist, std::sqrt(total.value()), CovarianceMethod::matrix_free, seconds_since(start)};
}

CovarianceReport covariance_error_dense(const PriorDistribution& dist, std::size_t cap) {
  dist.validate();
  const auto start = Clock::now();
  double error = 0.0;
  switch (dist.kind) {
    case PriorKind::gaussian:
      error = 0.0;
      break;
    case PriorKind::mixed: {
      if (dist.shape.count() > cap) {
        throw ResourceLimitError("dense mixed-prior covariance exceeds the dense cap");
      }
      const auto n = static_cast<Eigen::Index>(dist.shape.count());
      const auto frame = static_cast<Eigen::Index>(dist.shape.height() * dist.shape.width());
      Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (i != j && i % frame == j % frame) sigma(i, j) = 0.5;
        }
      }
      error = covariance_error(sigma);
      break;
    }
    case PriorKind::freeinit:
    case PriorKind::freqprior: {
      const auto pair = dft_matrix_3d(dist.shape, cap);
      const auto lambda = mask_to_lambda(build_mask(*dist.filter, dist.shape));
      error = dist.kind == PriorKind::freeinit
                  ? frobenius_norm(freeinit_deviation(lambda, pair))
                  : frobenius_norm(freqprior_deviation(lambda, pair, *dist.cos_theta));
      break;
    }
  }
  return {dist, error, CovarianceMethod::dense, seconds_since(start)};
}

CovarianceReport covariance_error_analytic(const PriorDistribution& dist) {
  dist.validate();
  const auto start = Clock::now();
  double error = 0.0;
  switch (dist.kind) {
    case PriorKind::gaussian:
      error = 0.0;
      break;
    case PriorKind::mixed:
      error = mixed_prior_error(dist.shape);
      break;
    case PriorKind::freeinit: {
      const auto mask = build_mask(*dist.filter, dist.shape);
      const auto& s = dist.shape;
      CompensatedSum sum;
      for (std::size_t a = 0; a < s.frames(); ++a) {
        for (std::size_t b = 0; b < s.height(); ++b) {
          for (std::size_t c = 0; c < s.width(); ++c) {
            const double mirrored = mask.values()((s.frames() - a) % s.frames(),
                                                  (s.height() - b) % s.height(),
                                                  (s.width() - c) % s.width());
            const double p = 0.5 * (mask.values()(a, b, c) + mirrored);
            const double d = 2.0 * (p * p - p);
            sum.add(d * d);
          }
        }
      }
      error = std::sqrt(sum.value());
      break;
    }
    case PriorKind::freqprior:
      throw InvalidArgument("no analytic covariance-error route for the freqprior prior");
  }
  return {dist, error, CovarianceMethod::analytic, seconds_since(start)};
}

InequalityCheck verify_error_inequality(const Eigen::VectorXd& lambda, const DftMatrixPair& pair,
                                        double cos_theta) {
  InequalityCheck check;
  check.freqprior_error = frobenius_norm(freqprior_deviation(lambda, pair, cos_theta));
  check.freeinit_error = frobenius_norm(freeinit_deviation(lambda, pair));
  const double c2 = cos_theta * cos_theta;
  check.bound = c2 / (1.0 + c2) * check.freeinit_error;
  check.holds = check.freqprior_error <= check.bound * (1.0 + 1e-12) + 1e-13;
  return check;
}

double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

bool theorem4_check(const Eigen::MatrixXd& c, const Eigen::MatrixXd& d, double tol) {
  if (c.rows() != c.cols() || d.rows() != d.cols() || c.rows() != d.rows()) {
    throw InvalidArgument("theorem4_check: C and D must be square and of equal size");
  }
  const double scale = std::max(1.0, c.norm());
  if ((c - c.transpose()).norm() > tol * scale || (d - d.transpose()).norm() > tol * scale) {
    throw InvalidArgument("theorem4_check: C and D must be symmetric");
  }
  if (min_eigenvalue(d) < -tol * scale) {
    throw InvalidArgument("theorem4_check: D is not positive semi-definite");
  }
  if (min_eigenvalue(c - d) < -tol * scale) {
    throw InvalidArgument("theorem4_check: C - D is not positive semi-definite");
  }
  return frobenius_norm(c) >= frobenius_norm(d);
}

std::string csv_header() { return "prior,shape,filter,order,cutoff,cos_theta,error,method,seconds"; }

std::string to_csv_row(const CovarianceReport& report, bool include_timing) {
  const auto& d = report.distribution;
  std::string filter = "none", order, cutoff, cos_theta;
  if (d.filter) {
    filter = std::string(to_string(d.filter->kind));
    if (d.filter->kind == FilterKind::butterworth) order = std::to_string(d.filter->order);
    cutoff = fmt::format("{}", d.filter->cutoff);
  }
  if (d.cos_theta) cos_theta = fmt::format("{}", *d.cos_theta);
  return fmt::format("{},{},{},{},{},{},{:.12g},{},{}", to_string(d.kind), d.shape.to_string(),
                     filter, order, cutoff, cos_theta, report.error, to_string(report.method),
                     include_timing ? fmt::format("{:.3f}", report.runtime_seconds) : "");
}

}  // namespace freqprior
