#include <doctest.h>

#include <cmath>
#include <numbers>

#include "freqprior/covariance.hpp"
#include "freqprior/rng.hpp"
#include "oracles.hpp"

using namespace freqprior;

namespace {

Eigen::VectorXd random_lambda(Eigen::Index n, SeededRng& rng) {
  Eigen::VectorXd v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Reference ||Sigma - I||_F by a plain double loop in long double.
double reference_error(const Eigen::MatrixXd& sigma) {
  long double sum = 0.0L;
  for (Eigen::Index i = 0; i < sigma.rows(); ++i)
    for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
      const long double d = sigma(i, j) - (i == j ? 1.0L : 0.0L);
      sum += d * d;
    }
  return static_cast<double>(std::sqrt(sum));
}

PriorDistribution fi_dist(const LatentShape& s, FilterSpec f = {}) {
  return {PriorKind::freeinit, s, f, std::nullopt};
}
PriorDistribution fp_dist(const LatentShape& s, double c = 0.8, FilterSpec f = {}) {
  return {PriorKind::freqprior, s, f, c};
}

}  // namespace

TEST_CASE("P matrix") {
  const LatentShape shape(2, 3, 4);
  const auto pair = dft_matrix_3d(shape);
  const Eigen::Index n = pair.size();
  CHECK(max_abs(p_matrix_dense(Eigen::VectorXd::Ones(n), pair) - Eigen::MatrixXd::Identity(n, n)) <= 1e-10);
  CHECK(max_abs(p_matrix_dense(Eigen::VectorXd::Zero(n), pair)) == 0.0);

  const Eigen::Vector4d lambda(1.0, 0.5, 0.0, 0.5);
  const Eigen::MatrixXd p4 = p_matrix_dense(lambda, dft_matrix_1d(4));
  CHECK(max_abs(p4 - oracle::p_matrix(lambda, LatentShape(1, 1, 4))) <= 1e-12);

  SeededRng rng(1);
  for (int t = 0; t < 5; ++t) {
    const auto l = random_lambda(n, rng);
    const Eigen::MatrixXd p = p_matrix_dense(l, pair);
    CHECK(max_abs(p - p.transpose()) <= 1e-12);
    CHECK(max_abs(p - oracle::p_matrix(l, shape)) <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p);
    // Only the symmetric part of lambda enters P, so 0 <= P <= I still holds.
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-12);
  }
  CHECK_THROWS_AS(p_matrix_dense(Eigen::VectorXd::Ones(3), pair), InvalidArgument);
}

TEST_CASE("Q matrix") {
  const LatentShape shape(2, 3, 4);
  const auto pair = dft_matrix_3d(shape);
  const Eigen::Index n = pair.size();
  for (const double c : {0.0, 0.3, 1.0}) {
    CHECK(max_abs(q_matrix_dense(Eigen::VectorXd::Constant(n, c), pair)) <= 1e-12);
  }

  for (const auto& s : {LatentShape(2, 2, 2), LatentShape(3, 4, 5), LatentShape(4, 4, 4)}) {
    const auto mask = build_mask(FilterSpec{FilterKind::gaussian, 0.4, 4}, s);
    const Eigen::MatrixXd q = q_matrix_dense(mask_to_lambda(mask), dft_matrix_3d(s));
    CHECK(frobenius_norm(q) <= 1e-12 * static_cast<double>(s.count()));
  }

  // Scalar-sum form Q_mn = (1/N) sum_k lambda_k sin(k (m + n) theta), zero-based.
  const Eigen::Vector4d lambda(1.0, 0.8, 0.2, 0.1);
  const Eigen::MatrixXd q4 = q_matrix_dense(lambda, dft_matrix_1d(4));
  CHECK(max_abs(q4) > 0.1);
  const double theta = -2.0 * std::numbers::pi / 4.0;
  for (int m = 0; m < 4; ++m)
    for (int k2 = 0; k2 < 4; ++k2) {
      double sum = 0.0;
      for (int k = 0; k < 4; ++k) sum += lambda[k] * std::sin(k * (m + k2) * theta);
      CHECK(q4(m, k2) == doctest::Approx(sum / 4.0).epsilon(1e-12));
    }

  SeededRng rng(2);
  const auto l = random_lambda(n, rng);
  const Eigen::MatrixXd q = q_matrix_dense(l, pair);
  CHECK(max_abs(q - q.transpose()) <= 1e-12);
  CHECK(max_abs(q - oracle::q_matrix(l, shape)) <= 1e-12);
}

TEST_CASE("closed-form covariances") {
  const LatentShape shape(2, 2, 3);
  const auto pair = dft_matrix_3d(shape);
  const Eigen::Index n = pair.size();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  CHECK(max_abs(covariance_freeinit(Eigen::VectorXd::Ones(n), pair) - id) <= 1e-12);
  CHECK(max_abs(covariance_freeinit(Eigen::VectorXd::Zero(n), pair) - id) <= 1e-12);

  SeededRng rng(3);
  const auto l = random_lambda(n, rng);
  CHECK(max_abs(covariance_freqprior(l, pair, 0.0) - id) == 0.0);

  const Eigen::MatrixXd fi = covariance_freeinit(l, pair);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> fe(fi);
  CHECK(fe.eigenvalues().minCoeff() > 0.0);
  CHECK(fe.eigenvalues().maxCoeff() <= 1.0 + 1e-12);

  const Eigen::MatrixXd fp = covariance_freqprior(l, pair, 0.8);
  CHECK(max_abs(fp - fp.transpose()) <= 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fp).eigenvalues().maxCoeff() <= 1.0 + 1e-12);

  const auto sym = mask_to_lambda(build_mask(FilterSpec{}, shape));
  CHECK(max_abs(covariance_freqprior(sym, pair, 0.8) - id) <= 1e-12);
  CHECK(freqprior_coefficient(0.8) == doctest::Approx(2 * 0.64 / 1.64));
  CHECK_THROWS_AS(freqprior_coefficient(1.5), InvalidArgument);
}

TEST_CASE("covariance_error") {
  CHECK(covariance_error(Eigen::MatrixXd::Identity(5, 5)) == 0.0);
  CHECK(covariance_error(0.5 * Eigen::MatrixXd::Identity(4, 4)) == doctest::Approx(1.0));
  SeededRng rng(4);
  Eigen::MatrixXd a(20, 20);
  for (Eigen::Index i = 0; i < 20; ++i)
    for (Eigen::Index j = 0; j < 20; ++j) a(i, j) = rng.gaussian();
  const Eigen::MatrixXd s = a + a.transpose();
  CHECK(covariance_error(s) == doctest::Approx(reference_error(s)).epsilon(1e-14));
  CHECK_THROWS_AS(covariance_error(Eigen::MatrixXd::Zero(3, 4)), InvalidArgument);
}

TEST_CASE("mixed prior error") {
  CHECK(std::abs(mixed_prior_error(LatentShape(16, 20, 20)) - 154.9193) <= 1e-3);
  CHECK(std::abs(mixed_prior_error(LatentShape(16, 30, 30)) - 232.3790) <= 1e-3);
  CHECK(std::abs(mixed_prior_error(LatentShape(16, 40, 40)) - 309.8387) <= 1e-3);
  CHECK(mixed_prior_error(LatentShape(1, 7, 9)) == 0.0);

  for (const auto& s : {LatentShape(2, 2, 2), LatentShape(3, 4, 5), LatentShape(5, 1, 3)}) {
    // Explicit covariance: 1 on the diagonal, 0.5 between frames at one pixel.
    const auto n = static_cast<Eigen::Index>(s.count());
    const auto frame = static_cast<Eigen::Index>(s.height() * s.width());
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j && i % frame == j % frame) sigma(i, j) = 0.5;
    CHECK(mixed_prior_error(s) == doctest::Approx(reference_error(sigma)).epsilon(1e-14));
    const PriorDistribution mixed{PriorKind::mixed, s, std::nullopt, std::nullopt};
    CHECK(covariance_error_dense(mixed).error == doctest::Approx(reference_error(sigma)).epsilon(1e-14));
    CHECK(covariance_error_analytic(mixed).error == doctest::Approx(reference_error(sigma)).epsilon(1e-14));
  }
}

TEST_CASE("PriorDistribution validation") {
  const LatentShape s(2, 2, 2);
  CHECK_NOTHROW(fi_dist(s).validate());
  CHECK_NOTHROW(fp_dist(s).validate());
  CHECK_THROWS_AS((PriorDistribution{PriorKind::freeinit, s, std::nullopt, std::nullopt}.validate()),
                  InvalidArgument);
  CHECK_THROWS_AS((PriorDistribution{PriorKind::freeinit, s, FilterSpec{}, 0.8}.validate()),
                  InvalidArgument);
  CHECK_THROWS_AS((PriorDistribution{PriorKind::freqprior, s, FilterSpec{}, std::nullopt}.validate()),
                  InvalidArgument);
  CHECK_THROWS_AS((PriorDistribution{PriorKind::mixed, s, FilterSpec{}, std::nullopt}.validate()),
                  InvalidArgument);
  CHECK_THROWS_AS(fp_dist(s, 1.1).validate(), InvalidArgument);
  CHECK(parse_prior_kind("mixed") == PriorKind::mixed);
  CHECK_THROWS_AS(parse_prior_kind("progressive"), InvalidArgument);
}

TEST_CASE("dense, matrix-free and analytic paths agree") {
  for (const auto& s : {LatentShape(2, 2, 2), LatentShape(3, 4, 5), LatentShape(1, 6, 7),
                        LatentShape(4, 4, 4), LatentShape(8, 8, 8)}) {
    for (const auto kind : {FilterKind::butterworth, FilterKind::gaussian, FilterKind::ideal}) {
      const FilterSpec f{kind, 0.25, 4};
      const double dense = covariance_error_dense(fi_dist(s, f)).error;
      const double oracle_dense =
          reference_error(oracle::p_matrix(mask_to_lambda(build_mask(f, s)), s) *
                              oracle::p_matrix(mask_to_lambda(build_mask(f, s)), s) * 2.0 -
                          2.0 * oracle::p_matrix(mask_to_lambda(build_mask(f, s)), s) +
                          Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(s.count()),
                                                    static_cast<Eigen::Index>(s.count())));
      if (s.count() <= 64) CHECK(dense == doctest::Approx(oracle_dense).epsilon(1e-9));
      const auto mf = covariance_error_matrix_free(fi_dist(s, f));
      CHECK(mf.method == CovarianceMethod::matrix_free);
      CHECK(mf.error == doctest::Approx(dense).epsilon(1e-9));
      CHECK(covariance_error_analytic(fi_dist(s, f)).error == doctest::Approx(dense).epsilon(1e-9));
      CHECK(covariance_error_dense(fp_dist(s, 0.8, f)).error < 1e-20);
      CHECK(covariance_error_matrix_free(fp_dist(s, 0.8, f)).error < 1e-20);
    }
  }
  const FilterSpec all{FilterKind::ideal, std::sqrt(3.0), 4};
  CHECK(covariance_error_matrix_free(fi_dist(LatentShape(2, 2, 2), all)).error <= 1e-14);
  CHECK(covariance_error_dense(PriorDistribution{PriorKind::gaussian, LatentShape(2, 2, 2), std::nullopt, std::nullopt}).error == 0.0);
  CHECK_THROWS_AS(covariance_error_analytic(fp_dist(LatentShape(2, 2, 2))), InvalidArgument);
  CHECK_THROWS_AS(covariance_error_matrix_free(PriorDistribution{PriorKind::mixed, LatentShape(2, 2, 2), std::nullopt, std::nullopt}),
                  InvalidArgument);
  CHECK_THROWS_AS(covariance_error_dense(fi_dist(LatentShape(10, 10, 10)), 999), ResourceLimitError);
}

TEST_CASE("matrix-free result does not depend on the thread count") {
  const auto dist = fi_dist(LatentShape(4, 10, 10), FilterSpec{FilterKind::gaussian, 0.25, 4});
  const double one = covariance_error_matrix_free(dist, {1}).error;
  CHECK(covariance_error_matrix_free(dist, {3}).error == one);
  CHECK(covariance_error_matrix_free(dist, {8}).error == one);
  const auto fp = fp_dist(LatentShape(4, 10, 10));
  CHECK(covariance_error_matrix_free(fp, {1}).error == covariance_error_matrix_free(fp, {4}).error);
}

TEST_CASE("freqprior error at 16x20x20 is roundoff") {
  const auto report = covariance_error_matrix_free(fp_dist(LatentShape(16, 20, 20)));
  CHECK(report.error <= 1e-20);
}

TEST_CASE("error inequality") {
  SeededRng rng(5);
  const double cosines[] = {0.5, 0.7, 0.8, 1.0};
  for (int t = 0; t < 100; ++t) {
    const LatentShape s(1 + t % 3, 2 + t % 4, 1 + t % 5);
    const auto l = random_lambda(static_cast<Eigen::Index>(s.count()), rng);
    const double c = cosines[t % 4];
    const auto pair = dft_matrix_3d(s);
    const auto check = verify_error_inequality(l, pair, c);
    CHECK(check.holds);
    // Recompute both sides from the complex oracle.
    const Eigen::MatrixXd p = oracle::p_matrix(l, s), q = oracle::q_matrix(l, s);
    const double lhs = (2 * c * c / (1 + c * c) * q * q).norm();
    const double rhs = c * c / (1 + c * c) * (2.0 * (p * p - p)).norm();
    CHECK(lhs <= rhs * (1 + 1e-12) + 1e-13);
    CHECK(check.freqprior_error == doctest::Approx(lhs).epsilon(1e-9));
    CHECK(check.bound == doctest::Approx(rhs).epsilon(1e-9));
  }
  const LatentShape s(2, 2, 3);
  const auto pair = dft_matrix_3d(s);
  const auto l = random_lambda(12, rng);
  const auto zero = verify_error_inequality(l, pair, 0.0);
  CHECK(zero.holds);
  CHECK(zero.freqprior_error == 0.0);
  const auto ident = verify_error_inequality(Eigen::VectorXd::Ones(12), pair, 0.8);
  CHECK(ident.holds);
  CHECK(ident.freqprior_error <= 1e-12);
  CHECK(ident.freeinit_error <= 1e-12);
}

TEST_CASE("PSD ordering implies Frobenius ordering") {
  const Eigen::MatrixXd i = Eigen::MatrixXd::Identity(6, 6);
  CHECK(theorem4_check(2 * i, i));
  CHECK(theorem4_check(i, i));
  SeededRng rng(6);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd g(6, 6), h(6, 6);
    for (Eigen::Index a = 0; a < 6; ++a)
      for (Eigen::Index b = 0; b < 6; ++b) {
        g(a, b) = rng.gaussian();
        h(a, b) = rng.gaussian();
      }
    const Eigen::MatrixXd d = g * g.transpose();
    const Eigen::MatrixXd c = d + h * h.transpose();
    CHECK(theorem4_check(c, d));
    CHECK(c.norm() >= d.norm());
  }
  CHECK_THROWS_AS(theorem4_check(i, 2 * i), InvalidArgument);
  CHECK_THROWS_AS(theorem4_check(i, -i), InvalidArgument);
  Eigen::MatrixXd asym = i;
  asym(0, 1) = 0.3;
  CHECK_THROWS_AS(theorem4_check(2 * i, asym), InvalidArgument);
}

TEST_CASE("bound structure: I - Sigma_FreeInit is PSD") {
  SeededRng rng(7);
  for (int t = 0; t < 20; ++t) {
    const LatentShape s(2, 1 + t % 4, 2 + t % 3);
    const auto l = random_lambda(static_cast<Eigen::Index>(s.count()), rng);
    const auto pair = dft_matrix_3d(s);
    const Eigen::MatrixXd gap = -freeinit_deviation(l, pair);
    CHECK(min_eigenvalue(gap) >= -1e-12);
  }
}

TEST_CASE("CSV rows") {
  CHECK(csv_header() == "prior,shape,filter,order,cutoff,cos_theta,error,method,seconds");
  CovarianceReport r{fp_dist(LatentShape(2, 2, 2)), 1.5e-30, CovarianceMethod::matrix_free, 0.25};
  CHECK(to_csv_row(r) == "freqprior,2x2x2,butterworth,4,0.25,0.8,1.5e-30,matrix_free,0.250");
  CHECK(to_csv_row(r, false) == "freqprior,2x2x2,butterworth,4,0.25,0.8,1.5e-30,matrix_free,");
  CovarianceReport m{PriorDistribution{PriorKind::mixed, LatentShape(16, 20, 20), std::nullopt, std::nullopt},
                     mixed_prior_error(LatentShape(16, 20, 20)), CovarianceMethod::analytic, 0.0};
  CHECK(to_csv_row(m, false) == "mixed,16x20x20,none,,,,154.919333848,analytic,");
}
