#include "freqprior/properties.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "freqprior/covariance.hpp"
#include "freqprior/spectral.hpp"

namespace freqprior {
namespace {

constexpr double kDftTol = 1e-8;

PropertyResult make_result(std::string name, bool passed, std::string detail) {
  return {std::move(name), passed, std::move(detail)};
}

Eigen::VectorXd random_lambda(Eigen::Index n, SeededRng& rng) {
  Eigen::VectorXd lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda[i] = rng.uniform();
  return lambda;
}

std::size_t random_dim(SeededRng& rng, std::size_t max) {
  return 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max));
}

// Random shape with count <= max_count.
LatentShape random_shape(SeededRng& rng, std::size_t max_count) {
  for (;;) {
    const std::size_t f = random_dim(rng, 4), h = random_dim(rng, 8), w = random_dim(rng, 8);
    if (f * h * w <= max_count && f * h * w >= 2) return {f, h, w};
  }
}

Eigen::MatrixXd random_psd(Eigen::Index n, SeededRng& rng) {
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.gaussian();
  }
  return g * g.transpose();
}

std::size_t lag_partner(const LatentShape& shape, std::size_t m, std::size_t d) {
  const std::size_t h = shape.height(), w = shape.width(), f = shape.frames();
  const std::size_t ma = m / (h * w), mb = (m / w) % h, mc = m % w;
  const std::size_t da = d / (h * w), db = (d / w) % h, dc = d % w;
  return shape.flat_index((ma + da) % f, (mb + db) % h, (mc + dc) % w);
}

}  // namespace

FilterMask verification_mask() {
  return build_mask(FilterSpec{FilterKind::butterworth, 1.0, 4}, LatentShape(2, 2, 2));
}

PropertyResult check_dft_identities_1d(std::size_t max_n, double tol) {
  double worst = 0.0;
  std::size_t worst_n = 0;
  bool ok = true;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto rep = verify_dft_identities(LatentShape(1, 1, n), tol);
    const double r = std::max({rep.ab_residual, rep.ba_residual, rep.square_sum_residual});
    ok = ok && rep.passed;
    if (r >= worst) {
      worst = r;
      worst_n = n;
    }
  }
  return make_result("dft_identities_1d", ok,
                     fmt::format("N=1..{}, worst residual {:.3g} at N={}", max_n, worst, worst_n));
}

PropertyResult check_dft_identities_3d(std::size_t max_count, double tol) {
  double worst = 0.0;
  std::string worst_shape = "-";
  std::size_t shapes = 0;
  bool ok = true;
  for (std::size_t f = 1; f <= max_count; ++f) {
    for (std::size_t h = 1; f * h <= max_count; ++h) {
      for (std::size_t w = 1; f * h * w <= max_count; ++w) {
        const LatentShape shape(f, h, w);
        const auto rep = verify_dft_identities(shape, tol);
        const double r = std::max({rep.ab_residual, rep.ba_residual, rep.square_sum_residual});
        ok = ok && rep.passed;
        ++shapes;
        if (r >= worst) {
          worst = r;
          worst_shape = shape.to_string();
        }
      }
    }
  }
  return make_result(
      "dft_identities_3d", ok,
      fmt::format("{} shapes with N<={}, worst residual {:.3g} at {}", shapes, max_count, worst,
                  worst_shape));
}

PropertyResult check_p_matrix_fft_route(const LatentShape& shape, std::uint64_t seed) {
  SeededRng rng(seed, 101);
  const auto n = static_cast<Eigen::Index>(shape.count());
  const Eigen::VectorXd lambda = random_lambda(n, rng);
  const Eigen::MatrixXd p = p_matrix_dense(lambda, dft_matrix_3d(shape));
  double worst = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    SpectralTensor e(shape);
    e[static_cast<std::size_t>(j)] = 1.0;
    auto spec = fft3(e);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= lambda[static_cast<Eigen::Index>(k)];
    const auto col = ifft3(spec);
    for (Eigen::Index i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(p(i, j) - col[static_cast<std::size_t>(i)].real()));
    }
  }
  return make_result("p_matrix_fft_route", worst <= 1e-12,
                     fmt::format("{} max |dense - fft| = {:.3g}", shape.to_string(), worst));
}

PropertyResult check_energy_split(HighpassRule rule) {
  double worst = 0.0;
  for (const auto kind : {FilterKind::butterworth, FilterKind::gaussian, FilterKind::ideal}) {
    for (const double cutoff : {0.25, 0.5, 1.0}) {
      for (const auto& shape : {LatentShape(2, 2, 2), LatentShape(4, 6, 5), LatentShape(8, 8, 8)}) {
        RefinementConfig cfg;
        cfg.mask = build_mask(FilterSpec{kind, cutoff, 4}, shape);
        cfg.highpass = rule;
        const FilterMask high = highpass_mask(cfg);
        for (std::size_t i = 0; i < cfg.mask.size(); ++i) {
          worst = std::max(worst, std::abs(cfg.mask[i] * cfg.mask[i] + high[i] * high[i] - 1.0));
        }
      }
    }
  }
  return make_result("energy_split", worst <= 1e-12,
                     fmt::format("max |M^2 + H^2 - 1| = {:.3g}", worst));
}

PropertyResult check_freeinit_variance_decay() {
  const LatentShape shape(8, 8, 8);
  const auto lambda = mask_to_lambda(build_mask(FilterSpec{}, shape));
  const Eigen::MatrixXd sigma = covariance_freeinit(lambda, dft_matrix_3d(shape));
  const double max_diag = sigma.diagonal().maxCoeff();
  const double min_diag = sigma.diagonal().minCoeff();
  return make_result("freeinit_variance_decay", max_diag <= 1.0 + 1e-12 && min_diag < 1.0 - 1e-6,
                     fmt::format("diag(Sigma) in [{:.6f}, {:.6f}]", min_diag, max_diag));
}

PropertyResult check_q_vanishing() {
  double worst = 0.0;
  std::string where = "-";
  for (const auto kind : {FilterKind::butterworth, FilterKind::gaussian, FilterKind::ideal}) {
    for (const double cutoff : {0.25, 0.6}) {
      for (const auto& shape : {LatentShape(2, 2, 2), LatentShape(3, 5, 7), LatentShape(4, 4, 4),
                                LatentShape(5, 6, 6), LatentShape(8, 8, 8)}) {
        const auto lambda = mask_to_lambda(build_mask(FilterSpec{kind, cutoff, 4}, shape));
        const double ratio = frobenius_norm(q_matrix_dense(lambda, dft_matrix_3d(shape))) /
                             static_cast<double>(shape.count());
        if (ratio >= worst) {
          worst = ratio;
          where = fmt::format("{} {} {}", to_string(kind), cutoff, shape.to_string());
        }
      }
    }
  }
  return make_result("q_vanishing", worst <= 1e-11,
                     fmt::format("max ||Q||_F / N = {:.3g} ({})", worst, where));
}

PropertyResult check_inequality_trials(int trials, std::size_t max_n, std::uint64_t seed) {
  SeededRng rng(seed, 102);
  constexpr std::array<double, 4> kFixed{0.5, 0.7, 0.8, 1.0};
  int held = 0;
  double tightest = 0.0;
  for (int t = 0; t < trials; ++t) {
    const LatentShape shape = random_shape(rng, max_n);
    const auto lambda = random_lambda(static_cast<Eigen::Index>(shape.count()), rng);
    const double cos_theta = t % 5 == 4 ? rng.uniform() : kFixed[static_cast<std::size_t>(t % 5)];
    const auto check = verify_error_inequality(lambda, dft_matrix_3d(shape), cos_theta);
    if (check.holds) ++held;
    if (check.bound > 0.0) tightest = std::max(tightest, check.freqprior_error / check.bound);
  }
  return make_result(
      "inequality_trials", held == trials,
      fmt::format("{}/{} trials hold, max lhs/bound = {:.3g}", held, trials, tightest));
}

PropertyResult check_bound_structure(int trials, std::uint64_t seed) {
  SeededRng rng(seed, 103);
  double lowest = 1.0;
  for (int t = 0; t < trials; ++t) {
    const LatentShape shape = random_shape(rng, 64);
    const auto lambda = random_lambda(static_cast<Eigen::Index>(shape.count()), rng);
    const Eigen::MatrixXd p = p_matrix_dense(lambda, dft_matrix_3d(shape));
    lowest = std::min(lowest, min_eigenvalue(p - p * p));
  }
  return make_result("bound_structure_psd", lowest >= -1e-10,
                     fmt::format("min eigenvalue of P - P^2 over {} trials = {:.3g}", trials, lowest));
}

PropertyResult check_theorem4(int trials, std::uint64_t seed) {
  SeededRng rng(seed, 104);
  int held = 0;
  for (int t = 0; t < trials; ++t) {
    const auto n = static_cast<Eigen::Index>(random_dim(rng, 12));
    const Eigen::MatrixXd d = random_psd(n, rng);
    const Eigen::MatrixXd c = d + random_psd(n, rng);
    if (theorem4_check(c, d)) ++held;
  }
  return make_result("psd_norm_monotonicity", held == trials,
                     fmt::format("{}/{} trials hold", held, trials));
}

PropertyResult check_dense_vs_matrix_free(const std::vector<LatentShape>& shapes) {
  double worst_rel = 0.0;
  double worst_freqprior = 0.0;
  for (const auto& shape : shapes) {
    for (const auto kind : {FilterKind::butterworth, FilterKind::gaussian}) {
      const FilterSpec filter{kind, 0.25, 4};
      const PriorDistribution freeinit{PriorKind::freeinit, shape, filter, std::nullopt};
      const double dense = covariance_error_dense(freeinit).error;
      const double mf = covariance_error_matrix_free(freeinit).error;
      const double scale = std::max({dense, mf, 1e-300});
      worst_rel = std::max(worst_rel, dense == mf ? 0.0 : std::abs(dense - mf) / scale);

      const PriorDistribution freqprior{PriorKind::freqprior, shape, filter, 0.8};
      worst_freqprior = std::max({worst_freqprior, covariance_error_dense(freqprior).error,
                                  covariance_error_matrix_free(freqprior).error});
    }
  }
  return make_result("dense_vs_matrix_free", worst_rel <= 1e-9 && worst_freqprior < 1e-20,
                     fmt::format("{} shapes, freeinit max rel gap {:.3g}, freqprior max {:.3g}",
                                 shapes.size(), worst_rel, worst_freqprior));
}

LagCovariance estimate_lag_covariance(const LatentShape& shape, const Sampler& sampler,
                                      int samples, std::uint64_t seed) {
  if (samples < 2) throw InvalidArgument("lag covariance needs at least two samples");
  const std::size_t n = shape.count();
  std::vector<std::vector<std::size_t>> partners(n, std::vector<std::size_t>(n));
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t m = 0; m < n; ++m) partners[d][m] = lag_partner(shape, m, d);
  }

  Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd g_sq = g_sum, x_sum = g_sum, x_sq = g_sum;
  SeededRng base(seed, 105);
  for (int s = 0; s < samples; ++s) {
    SeededRng rng = base.derive(static_cast<std::uint64_t>(s));
    const NoiseTensor x = sampler(rng);
    for (std::size_t d = 0; d < n; ++d) {
      double g = 0.0;
      for (std::size_t m = 0; m < n; ++m) g += x[m] * x[partners[d][m]];
      g /= static_cast<double>(n);
      g_sum[static_cast<Eigen::Index>(d)] += g;
      g_sq[static_cast<Eigen::Index>(d)] += g * g;
    }
    for (std::size_t m = 0; m < n; ++m) {
      x_sum[static_cast<Eigen::Index>(m)] += x[m];
      x_sq[static_cast<Eigen::Index>(m)] += x[m] * x[m];
    }
  }

  const double count = samples;
  LagCovariance out;
  out.samples = samples;
  out.mean = g_sum / count;
  const Eigen::ArrayXd g_var =
      ((g_sq.array() - count * out.mean.array().square()) / (count - 1.0)).max(0.0);
  out.standard_error = (g_var / count).sqrt().matrix();
  const Eigen::ArrayXd x_mean = x_sum.array() / count;
  out.element_variance = ((x_sq.array() - count * x_mean.square()) / (count - 1.0)).matrix();
  return out;
}

PropertyResult compare_lag_covariance(std::string name, const LatentShape& shape,
                                      const Eigen::MatrixXd& reference,
                                      const LagCovariance& estimate) {
  const std::size_t n = shape.count();
  double drift = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t m = 0; m < n; ++m) {
      drift = std::max(drift, std::abs(reference(static_cast<Eigen::Index>(m),
                                                 static_cast<Eigen::Index>(lag_partner(shape, m, d))) -
                                       reference(0, static_cast<Eigen::Index>(d))));
    }
  }
  if (drift > 1e-12) {
    return make_result(std::move(name), false,
                       fmt::format("reference is not translation invariant ({:.3g})", drift));
  }
  double worst_z = 0.0;
  std::size_t worst_lag = 0;
  for (std::size_t d = 0; d < n; ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    const double se = estimate.standard_error[i];
    const double gap = std::abs(estimate.mean[i] - reference(0, i));
    const double z = se > 0.0 ? gap / se : (gap > 1e-12 ? INFINITY : 0.0);
    if (z >= worst_z) {
      worst_z = z;
      worst_lag = d;
    }
  }
  return make_result(std::move(name), worst_z <= 3.0,
                     fmt::format("{} lags, {} samples, max |z| = {:.2f} at lag {}", n,
                                 estimate.samples, worst_z, worst_lag));
}

PropertyResult check_freqprior_variance(const RefinementConfig& cfg, int samples,
                                        std::uint64_t seed) {
  const LatentShape& shape = cfg.mask.shape();
  const Sampler sampler = [&](SeededRng& rng) {
    SeededRng z_rng = rng.derive(0);
    return freqprior_refine(sample_gaussian(shape, z_rng), cfg, rng.derive(1));
  };
  const auto est = estimate_lag_covariance(shape, sampler, samples, seed);
  const double lo = est.element_variance.minCoeff(), hi = est.element_variance.maxCoeff();
  return make_result("freqprior_variance", lo >= 0.99 && hi <= 1.01,
                     fmt::format("per-element variance in [{:.5f}, {:.5f}] over {} samples", lo,
                                 hi, samples));
}

PropertyResult check_freeinit_variance(const FilterMask& mask, int samples, std::uint64_t seed) {
  const LatentShape& shape = mask.shape();
  const Sampler sampler = [&](SeededRng& rng) {
    SeededRng z_rng = rng.derive(0), eta_rng = rng.derive(1);
    const auto z = sample_gaussian(shape, z_rng);
    return freeinit_refine(z, sample_gaussian(shape, eta_rng), mask);
  };
  const auto est = estimate_lag_covariance(shape, sampler, samples, seed);
  const Eigen::VectorXd diag =
      covariance_freeinit(mask_to_lambda(mask), dft_matrix_3d(shape)).diagonal();
  const double worst = ((est.element_variance.array() - diag.array()).abs() / diag.array()).maxCoeff();
  return make_result("freeinit_variance", worst <= 0.01,
                     fmt::format("max relative gap to diag(Sigma) = {:.4f} (closed form {:.5f})",
                                 worst, diag.mean()));
}

PropertyResult check_mixed_covariance(const LatentShape& shape, int samples, std::uint64_t seed) {
  const std::size_t n = shape.count();
  const std::size_t frame = shape.height() * shape.width();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
  SeededRng base(seed, 106);
  for (int s = 0; s < samples; ++s) {
    SeededRng rng = base.derive(static_cast<std::uint64_t>(s));
    const Eigen::VectorXd x = to_vector(mixed_prior(shape, rng));
    sum.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  const Eigen::MatrixXd cov = sum.selfadjointView<Eigen::Lower>().toDenseMatrix() / samples;
  double worst_cross = 0.0, worst_other = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double c = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (i % frame == j % frame) {
        worst_cross = std::max(worst_cross, std::abs(c - 0.5));
      } else {
        worst_other = std::max(worst_other, std::abs(c));
      }
    }
  }
  return make_result("mixed_cross_frame_covariance", worst_cross <= 0.01 && worst_other <= 0.01,
                     fmt::format("max |cov - 0.5| across frames = {:.4f}, max |cov| otherwise = {:.4f}",
                                 worst_cross, worst_other));
}

std::vector<PropertyResult> run_property_suite(const VerifyOptions& options) {
  const std::uint64_t seed = options.seed;
  const int samples = options.samples;
  const HighpassRule rule =
      options.break_highpass ? HighpassRule::classic : HighpassRule::energy_preserving;

  std::vector<PropertyResult> results;
  results.push_back(check_dft_identities_1d(64, kDftTol));
  results.push_back(check_dft_identities_3d(64, kDftTol));
  results.push_back(check_p_matrix_fft_route(LatentShape(2, 3, 4), seed));
  results.push_back(check_energy_split(rule));
  results.push_back(check_freeinit_variance_decay());
  results.push_back(check_q_vanishing());
  results.push_back(check_inequality_trials(400, 64, seed));
  results.push_back(check_bound_structure(50, seed));
  results.push_back(check_theorem4(50, seed));
  results.push_back(check_dense_vs_matrix_free(
      {LatentShape(2, 2, 2), LatentShape(3, 4, 5), LatentShape(4, 4, 4), LatentShape(8, 8, 8)}));

  const FilterMask mask = verification_mask();
  const LatentShape& shape = mask.shape();
  RefinementConfig cfg;
  cfg.cos_theta = 0.8;
  cfg.mask = mask;
  cfg.highpass = rule;
  results.push_back(check_freqprior_variance(cfg, samples, seed));
  results.push_back(check_freeinit_variance(mask, samples, seed));

  const auto pair = dft_matrix_3d(shape);
  const auto lambda = mask_to_lambda(mask);
  const Sampler freeinit_sampler = [&](SeededRng& rng) {
    SeededRng z_rng = rng.derive(0), eta_rng = rng.derive(1);
    const auto z = sample_gaussian(shape, z_rng);
    return freeinit_refine(z, sample_gaussian(shape, eta_rng), mask);
  };
  results.push_back(compare_lag_covariance(
      "freeinit_covariance_mc", shape, covariance_freeinit(lambda, pair),
      estimate_lag_covariance(shape, freeinit_sampler, samples, seed)));
  const Sampler freqprior_sampler = [&](SeededRng& rng) {
    SeededRng z_rng = rng.derive(0);
    return freqprior_refine(sample_gaussian(shape, z_rng), cfg, rng.derive(1));
  };
  results.push_back(compare_lag_covariance(
      "freqprior_covariance_mc", shape, covariance_freqprior(lambda, pair, cfg.cos_theta),
      estimate_lag_covariance(shape, freqprior_sampler, samples, seed + 1)));
  results.push_back(check_mixed_covariance(LatentShape(2, 2, 2), samples, seed));
  return results;
}

}  // namespace freqprior
