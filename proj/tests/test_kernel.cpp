#include "driftbench/kernel.hpp"
#include "driftbench/subroutines.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace driftbench;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<long>(v.size()));
  long i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_SUITE("kernel") {
  TEST_CASE("kernel_eval examples") {
    CHECK(kernel_eval(LinearKernel{}, vec({1, 0}), vec({1, 0})) == 1.0);
    const VectorXd x = vec({0.3, -0.7});
    CHECK(kernel_eval(GaussianKernel{1.0}, x, x) == 1.0);
    CHECK(kernel_eval(PolynomialKernel{2, 1.0}, vec({1}), vec({1})) == 4.0);
  }

  TEST_CASE("kernels are symmetric and gaussian follows its formula") {
    testsupport::Gen g(20);
    const std::vector<KernelFunction> ks{LinearKernel{}, GaussianKernel{0.7}, PolynomialKernel{3, 0.5}};
    for (int i = 0; i < 200; ++i) {
      const VectorXd a = g.vector(3), b = g.vector(3);
      for (const auto& k : ks) CHECK(kernel_eval(k, a, b) == doctest::Approx(kernel_eval(k, b, a)));
      CHECK(kernel_eval(GaussianKernel{0.7}, a, b) == doctest::Approx(testsupport::gaussian(a, b, 0.7)));
    }
    CHECK_THROWS_AS(validate_kernel(GaussianKernel{0.0}), std::domain_error);
    CHECK_THROWS_AS(validate_kernel(PolynomialKernel{0, 1.0}), std::domain_error);
  }

  TEST_CASE("kernel awv examples") {
    KernelAwvState<double> s(LinearKernel{}, 1.0);
    CHECK(kernel_awv_predict(s, vec({1.0})) == 0.0);
    s = kernel_awv_observe(s, vec({1.0}), 1.0);
    CHECK(s.size() == 1);
    CHECK(s.inputs().size() == s.outputs().size());
    // (K + I)^{-1} (1, 0) with K = [[1,1],[1,1]] is (2/3, -1/3); k_x = (1, 1)
    const Eigen::Matrix2d reg = (Eigen::Matrix2d() << 2, 1, 1, 2).finished();
    const Eigen::Vector2d alpha = reg.inverse() * Eigen::Vector2d(1, 0);
    CHECK(alpha(0) == doctest::Approx(2.0 / 3.0));
    CHECK(alpha(1) == doctest::Approx(-1.0 / 3.0));
    CHECK(kernel_awv_predict(s, vec({1.0})) == doctest::Approx(alpha.sum()));

    KernelAwvState<double> orth(LinearKernel{}, 1.0);
    orth.observe(vec({1.0, 0.0}), 2.0);
    orth.observe(vec({2.0, 0.0}), -1.0);
    CHECK(std::abs(orth.predict(vec({0.0, 1.0}))) < 1e-15);

    CHECK_THROWS_AS(KernelAwvState<double>(LinearKernel{}, 0.0), std::domain_error);
  }

  TEST_CASE("incremental factor reproduces K + lambda I") {
    testsupport::Gen g(21);
    const GaussianKernel k{0.8};
    KernelAwvState<double> s(k, 0.5);
    std::vector<VectorXd> xs;
    for (int i = 0; i < 10; ++i) {
      xs.push_back(g.vector(3));
      s.observe(xs.back(), g.normal());
    }
    MatrixXd gram(10, 10);
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) gram(i, j) = testsupport::gaussian(xs[i], xs[j], 0.8);
    }
    const MatrixXd l = s.factor();
    CHECK(l.rows() == 10);
    CHECK(l.isLowerTriangular());
    CHECK(((l * l.transpose()) - (gram + 0.5 * MatrixXd::Identity(10, 10))).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("duplicate inputs keep the factor positive definite") {
    KernelAwvState<double> s(GaussianKernel{1.0}, 1.0);
    const VectorXd x = vec({0.2, 0.2});
    for (int i = 0; i < 20; ++i) s.observe(x, 1.0);
    const VectorXd diag = s.factor().diagonal();
    CHECK(diag.minCoeff() > 0.0);
    CHECK(s.jitter_events() == 0);
    CHECK(std::isfinite(s.predict(x)));
  }

  TEST_CASE("tiny lambda with duplicates triggers recorded jitter") {
    KernelAwvState<double> s(GaussianKernel{1.0}, 1e-12);
    const VectorXd x = vec({0.5});
    s.observe(x, 1.0);
    s.observe(x, 1.0);
    CHECK(s.jitter_events() >= 1);
    CHECK(s.diagonal_jitter().maxCoeff() >= 1e-8);
    CHECK(std::isfinite(s.predict(x)));
  }

  TEST_CASE("kernel awv matches dense solve for several kernels") {
    testsupport::Gen g(22);
    const std::vector<KernelFunction> ks{GaussianKernel{0.5}, PolynomialKernel{2, 1.0}, LinearKernel{}};
    for (int inst = 0; inst < 60; ++inst) {
      const auto& k = ks[static_cast<std::size_t>(inst % 3)];
      const long d = g.integer(1, 4);
      const double lambda = g.uniform(0.2, 3.0);
      KernelAwv<double> learner(k, lambda);
      std::vector<VectorXd> xs;
      std::vector<double> ys;
      const long t = g.integer(0, 40);
      for (long s = 0; s < t; ++s) {
        xs.push_back(g.vector(d));
        ys.push_back(g.normal());
        learner.observe(xs.back(), ys.back());
      }
      const VectorXd q = g.vector(d);
      const double dense = testsupport::kernel_awv_dense(
          xs, ys, q, lambda, [&](const VectorXd& a, const VectorXd& b) { return kernel_eval(k, a, b); });
      CHECK(std::abs(learner.predict(q) - dense) <= 1e-8 * std::max(1.0, std::abs(dense)));
    }
  }

  TEST_CASE("linear kernel agrees with awv") {
    testsupport::Gen g(23);
    for (int inst = 0; inst < 100; ++inst) {
      const long d = g.integer(1, 5);
      const long t = g.integer(1, 100);
      const double lambda = g.uniform(0.1, 10.0);
      KernelAwv<double> kawv(LinearKernel{}, lambda);
      Awv<double> awv(d, lambda);
      double worst = 0.0;
      for (long s = 0; s < t; ++s) {
        const VectorXd x = g.vector(d);
        const double y = g.normal();
        worst = std::max(worst, std::abs(kawv.predict(x) - awv.predict(x)));
        kawv.observe(x, y);
        awv.observe(x, y);
      }
      CHECK(worst <= 1e-8);
    }
  }

  TEST_CASE("kernel awv regret on a static target respects the log-det bound") {
    // regret against a fixed f <= lambda ||f||^2 + Y^2 sum_k log(1 + mu_k / lambda)
    testsupport::Gen g(24);
    for (int trial = 0; trial < 10; ++trial) {
      const long n = 200;
      const double bw = 0.6;
      const long anchors = 4;
      std::vector<VectorXd> a;
      VectorXd c(anchors);
      for (long j = 0; j < anchors; ++j) {
        a.push_back(g.vector(2));
        c(j) = g.uniform(-1, 1);
      }
      MatrixXd ga(anchors, anchors);
      for (long i = 0; i < anchors; ++i) {
        for (long j = 0; j < anchors; ++j) ga(i, j) = testsupport::gaussian(a[i], a[j], bw);
      }
      auto f = [&](const VectorXd& x) {
        double v = 0;
        for (long j = 0; j < anchors; ++j) v += c(j) * testsupport::gaussian(a[j], x, bw);
        return v;
      };
      const double lambda = 1.0;
      KernelAwv<double> learner(GaussianKernel{bw}, lambda);
      std::vector<VectorXd> xs;
      double regret = 0.0, ymax = 0.0;
      for (long t = 0; t < n; ++t) {
        const VectorXd x = g.vector(2);
        const double y = f(x) + g.normal(0.3);
        const double p = learner.predict(x);
        regret += (p - y) * (p - y) - (f(x) - y) * (f(x) - y);
        ymax = std::max(ymax, std::abs(y));
        learner.observe(x, y);
        xs.push_back(x);
      }
      MatrixXd k(n, n);
      for (long i = 0; i < n; ++i) {
        for (long j = 0; j < n; ++j) k(i, j) = testsupport::gaussian(xs[i], xs[j], bw);
      }
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(k, Eigen::EigenvaluesOnly);
      double logdet = 0.0;
      for (long i = 0; i < n; ++i) logdet += std::log1p(std::max(0.0, es.eigenvalues()(i)) / lambda);
      const double bound = lambda * c.dot(ga * c) + ymax * ymax * logdet;
      CHECK(regret <= bound);
    }
  }

  TEST_CASE("effective dimension examples") {
    CHECK(effective_dimension(MatrixXd::Identity(2, 2), 1.0) == doctest::Approx(1.0));
    CHECK(effective_dimension(MatrixXd::Zero(3, 3), 1.0) == doctest::Approx(0.0));
    MatrixXd d = MatrixXd::Zero(2, 2);
    d(0, 0) = 3;
    d(1, 1) = 1;
    CHECK(effective_dimension(d, 1.0) == doctest::Approx(3.0 / 4.0 + 1.0 / 2.0));
    CHECK(testsupport::effective_dimension_eigen(d, 1.0) == doctest::Approx(1.25));
  }

  TEST_CASE("effective dimension rejects bad input") {
    MatrixXd neg = MatrixXd::Identity(2, 2);
    neg(1, 1) = -1e-3;
    CHECK_THROWS_AS(effective_dimension(neg, 1.0), std::domain_error);
    CHECK_THROWS_AS(effective_dimension(MatrixXd::Identity(2, 3), 1.0), std::domain_error);
    CHECK_THROWS_AS(effective_dimension(MatrixXd::Identity(2, 2), 0.0), std::domain_error);
    MatrixXd asym = MatrixXd::Identity(2, 2);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(effective_dimension(asym, 1.0), std::domain_error);
  }

  TEST_CASE("effective dimension matches the eigen-sum and is monotone") {
    testsupport::Gen g(25);
    for (int inst = 0; inst < 100; ++inst) {
      const long n = g.integer(1, 50);
      const MatrixXd k = g.psd(n, g.integer(1, n));
      double prev = std::numeric_limits<double>::infinity();
      for (double lambda : {1e-3, 1e-1, 1.0, 10.0, 1e3}) {
        const double de = effective_dimension(k, lambda);
        CHECK(std::abs(de - testsupport::effective_dimension_eigen(k, lambda)) <= 1e-8);
        CHECK(de >= 0.0);
        CHECK(de <= static_cast<double>(n) + 1e-12);
        CHECK(de <= prev + 1e-12);
        prev = de;
      }
    }
  }

  TEST_CASE("effective dimension approaches the rank as lambda shrinks") {
    testsupport::Gen g(26);
    for (int inst = 0; inst < 10; ++inst) {
      const long n = 12, rank = g.integer(1, 11);
      Eigen::HouseholderQR<MatrixXd> qr(MatrixXd::Random(n, n));
      const MatrixXd q = qr.householderQ();
      VectorXd mu = VectorXd::Zero(n);
      for (long i = 0; i < rank; ++i) mu(i) = 1.0 + static_cast<double>(i);
      MatrixXd k = q * mu.asDiagonal() * q.transpose();
      k = 0.5 * (k + k.transpose());
      const double small = effective_dimension(k, 1e-6);
      CHECK(std::abs(small - static_cast<double>(rank)) < 1e-4);
      CHECK(effective_dimension(k, 1e-3) <= small + 1e-12);
      CHECK(effective_dimension(k, 1.0) <= effective_dimension(k, 1e-3) + 1e-12);
      CHECK(effective_dimension(k, 1e3) <= effective_dimension(k, 1.0) + 1e-12);
    }
  }

  TEST_CASE("lambda schedule") {
    CHECK(lambda_schedule(50, 50, 0.5) == doctest::Approx(1.0));
    CHECK(lambda_schedule(1024, 1, 1.0 / 3.0) == doctest::Approx(std::pow(1024.0, 0.25)));
    CHECK(lambda_schedule(1024, 1, 1.0 / 3.0) == doctest::Approx(5.6569).epsilon(1e-4));
    CHECK(lambda_schedule(1024, 1, 1e-9) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(lambda_schedule(10, 1, 0.0), std::domain_error);
    CHECK_THROWS_AS(lambda_schedule(10, 1, 1.0), std::domain_error);
    CHECK_THROWS_AS(lambda_schedule(10, 20, 0.5), std::domain_error);
    CHECK_THROWS_AS(lambda_schedule(10, 0, 0.5), std::domain_error);
  }

  TEST_CASE("capacity exponent of a polynomially decaying spectrum") {
    // mu_i = i^{-2} gives d_eff(lambda) ~ lambda^{-1/2}
    const long n = 400;
    VectorXd mu(n);
    for (long i = 0; i < n; ++i) mu(i) = 1.0 / std::pow(static_cast<double>(i + 1), 2.0);
    const MatrixXd k = mu.asDiagonal();
    const double beta = estimate_capacity_exponent<double>(k, {1e-4, 1e-3, 1e-2});
    CHECK(beta == doctest::Approx(0.5).epsilon(0.1));
    CHECK(capacity_condition_holds<double>(k, {1e-3, 1e-2, 1e-1}, 0.6));
  }
}
