#include "driftbench/subroutines.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace driftbench;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<long>(v.size()));
  long i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_SUITE("subroutines") {
  TEST_CASE("moving average examples") {
    MovingAverageState<double> s;
    CHECK(ma_predict(s) == 0.0);
    for (double y : {1.0, 2.0, 3.0}) s = ma_observe(s, y);
    CHECK(ma_predict(s) == 2.0);
    MovingAverageState<double> z;
    z = ma_observe(ma_observe(z, -1.0), 1.0);
    CHECK(ma_predict(z) == 0.0);
    CHECK(z.count == 2);
  }

  TEST_CASE("moving average on a constant stream is exact after one step") {
    testsupport::Gen g(10);
    for (int i = 0; i < 100; ++i) {
      const double c = g.uniform(-100, 100);
      MovingAverage<double> ma;
      const VectorXd x = VectorXd::Ones(1);
      ma.observe(x, c);
      CHECK(ma.predict(x) == c);
      for (int k = 0; k < 20; ++k) {
        ma.observe(x, c);
        CHECK(ma.predict(x) == doctest::Approx(c).epsilon(1e-15));
      }
    }
  }

  TEST_CASE("ogd examples") {
    auto s = make_ogd_state<double>(2, 1.0, 1.0);
    s = ogd_step(s, VectorXd(VectorXd::Zero(2)), 3.0);
    CHECK(s.theta.isZero(0));

    auto one = make_ogd_state<double>(1, 10.0, 1.0);
    one = ogd_step(one, vec({1.0}), 1.0);
    // unprojected step: 0 - (10 / (1 * sqrt(1))) * 2 * (0 - 1) * 1 = 20, then clamp to the radius
    const double raw = 0.0 - (10.0 / 1.0) * (2.0 * (0.0 - 1.0));
    CHECK(raw == 20.0);
    CHECK(one.theta(0) == doctest::Approx(std::min(raw, 10.0)));

    auto opt = make_ogd_state<double>(2, 5.0, 1.0);
    opt.theta = vec({0.5, -0.25});
    const VectorXd x = vec({1.0, 2.0});
    const auto after = ogd_step(opt, x, x.dot(opt.theta));
    CHECK(after.theta == opt.theta);
  }

  TEST_CASE("ons examples") {
    auto s = make_ons_state<double>(1, 1.0, 1.0, 10.0);
    s.theta(0) = 2.0;
    const auto fit = ons_step(s, vec({1.0}), 2.0);
    CHECK(fit.theta == s.theta);
    CHECK(fit.A_inv == s.A_inv);

    auto fresh = make_ons_state<double>(1, 1.0, 1.0, 10.0);
    fresh = ons_step(fresh, vec({1.0}), 1.0);
    // g = -2, A = 1 + 4 = 5, theta = 0 - (1/1)(1/5)(-2)
    const double g = 2.0 * (0.0 - 1.0);
    const double a = 1.0 + g * g;
    CHECK(fresh.A_inv(0, 0) == doctest::Approx(1.0 / a));
    CHECK(fresh.theta(0) == doctest::Approx(0.0 - (1.0 / a) * g));
    CHECK(fresh.theta(0) == doctest::Approx(0.4));
  }

  TEST_CASE("weighted projection is identity inside the ball and optimal outside") {
    testsupport::Gen g(11);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::MatrixXd a = g.psd(2, 2) + 0.1 * Eigen::MatrixXd::Identity(2, 2);
      const VectorXd inside = g.vector(2, -0.3, 0.3);
      CHECK((detail::weighted_ball_projection<double>(a, inside, 1.0) - inside).norm() == 0.0);

      const VectorXd outside = g.vector(2, -5, 5).normalized() * g.uniform(1.5, 6.0);
      const VectorXd p = detail::weighted_ball_projection<double>(a, outside, 1.0);
      CHECK(p.norm() <= 1.0 + 1e-9);
      auto cost = [&](const VectorXd& q) { return (q - outside).dot(a * (q - outside)); };
      const double best = cost(p);
      // brute force over the boundary circle
      for (int k = 0; k < 2000; ++k) {
        const double ang = 2.0 * M_PI * k / 2000.0;
        const VectorXd q = vec({std::cos(ang), std::sin(ang)});
        CHECK(best <= cost(q) + 1e-6);
      }
    }
  }

  TEST_CASE("ogd and ons iterates stay in the ball") {
    testsupport::Gen g(12);
    for (int trial = 0; trial < 20; ++trial) {
      const long d = g.integer(1, 5);
      const double radius = g.uniform(0.1, 2.0);
      Ogd<double> ogd(d, radius);
      Ogd<double> ogd_fixed(d, radius, 3.0);
      Ons<double> ons(d, radius);
      for (int t = 0; t < 300; ++t) {
        const VectorXd x = g.vector(d);
        const double y = g.normal(3.0);
        ogd.observe(x, y);
        ogd_fixed.observe(x, y);
        ons.observe(x, y);
        REQUIRE(ogd.state().theta.norm() <= radius * (1 + 1e-12));
        REQUIRE(ogd_fixed.state().theta.norm() <= radius * (1 + 1e-12));
        REQUIRE(ons.state().theta.norm() <= radius * (1 + 1e-9));
      }
      const Eigen::MatrixXd a_inv = ons.state().A_inv;
      CHECK((a_inv - a_inv.transpose()).cwiseAbs().maxCoeff() < 1e-8 * a_inv.cwiseAbs().maxCoeff());
      Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (a_inv + a_inv.transpose()));
      CHECK(llt.info() == Eigen::Success);
    }
  }

  TEST_CASE("ons constants are fixed at the first nonzero gradient") {
    Ons<double> ons(2, 1.0);
    const VectorXd x = vec({0.5, -0.5});
    ons.observe(x, 0.0);  // zero gradient at theta = 0
    CHECK(ons.state().A.size() == 0);
    ons.observe(x, 1.0);
    const double gnorm = 2.0 * 1.0 * x.norm();
    const double diameter = 2.0;
    const double range = x.norm() * 1.0 + 1.0;
    const double gamma = 0.5 * std::min(1.0 / (4.0 * gnorm * diameter), 1.0 / (2.0 * range * range));
    CHECK(ons.state().gamma == doctest::Approx(gamma));
    CHECK(ons.state().epsilon == doctest::Approx(1.0 / (gamma * gamma * diameter * diameter)));
  }

  TEST_CASE("ons with fixed constants replays ons_step") {
    testsupport::Gen g(15);
    Ons<double> ons(2, 1.5, 0.25, 2.0);
    auto ref = make_ons_state<double>(2, 0.25, 2.0, 1.5);
    for (int t = 0; t < 50; ++t) {
      const VectorXd x = g.vector(2);
      const double y = g.normal();
      ons.observe(x, y);
      ref = ons_step(ref, x, y);
      CHECK(ons.state().theta == ref.theta);
    }
    CHECK_THROWS_AS(Ons<double>(2, 1.0, 0.0), std::domain_error);
  }

  TEST_CASE("awv examples") {
    auto s = make_awv_state<double>(1, 1.0);
    CHECK(awv_predict(s, vec({1.0})) == 0.0);

    auto after = awv_observe(s, vec({1.0}), 1.0);
    CHECK(after.P(0, 0) == doctest::Approx(0.5));
    CHECK(after.b(0) == doctest::Approx(1.0));
    const double oracle = testsupport::awv_dense({vec({1.0})}, {1.0}, vec({1.0}), 1.0);
    CHECK(oracle == doctest::Approx(1.0 / 3.0));
    CHECK(awv_predict(after, vec({1.0})) == doctest::Approx(oracle));
    CHECK(awv_predict(after, vec({0.0})) == 0.0);

    auto null = awv_observe(after, vec({0.0}), 5.0);
    CHECK(null.P == after.P);
    CHECK(null.b == after.b);

    auto twice = awv_observe(awv_observe(make_awv_state<double>(1, 1.0), vec({2.0}), 1.0), vec({2.0}), 1.0);
    CHECK(twice.P(0, 0) == doctest::Approx(1.0 / (1.0 + 2.0 * 4.0)));

    CHECK_THROWS_AS(make_awv_state<double>(2, 0.0), std::domain_error);
  }

  TEST_CASE("awv prediction does not mutate state") {
    auto s = make_awv_state<double>(2, 1.0);
    s = awv_observe(s, vec({1.0, 0.5}), 2.0);
    const auto before = s;
    (void)awv_predict(s, vec({0.3, 0.1}));
    CHECK(s.P == before.P);
    CHECK(s.b == before.b);
  }

  TEST_CASE("awv matches the dense ridge solve") {
    testsupport::Gen g(13);
    for (int inst = 0; inst < 200; ++inst) {
      const long d = g.integer(1, 5);
      const long t = g.integer(0, 50);
      const double lambda = std::vector<double>{0.1, 1.0, 10.0}[static_cast<std::size_t>(inst % 3)];
      Awv<double> awv(d, lambda);
      std::vector<VectorXd> xs;
      std::vector<double> ys;
      for (long s = 0; s < t; ++s) {
        xs.push_back(g.vector(d));
        ys.push_back(g.normal(2.0));
        awv.observe(xs.back(), ys.back());
      }
      const VectorXd q = g.vector(d);
      CHECK(std::abs(awv.predict(q) - testsupport::awv_dense(xs, ys, q, lambda)) <= 1e-8);
    }
  }

  TEST_CASE("rank-one updates track the direct inverse") {
    testsupport::Gen g(14);
    const long d = 4;
    Eigen::MatrixXd gram = 0.5 * Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd inv = 2.0 * Eigen::MatrixXd::Identity(d, d);
    for (int i = 0; i < 500; ++i) {
      const VectorXd v = g.vector(d, -3, 3);
      detail::rank_one_update(gram, inv, v);
    }
    CHECK((inv - gram.inverse()).cwiseAbs().maxCoeff() < 1e-10);
  }
}
