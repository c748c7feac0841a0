#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ifepanel/families.hpp"

using namespace ifepanel;

namespace {

// Independent high-precision normal CDF: Simpson quadrature of the density in
// long double, anchored at Phi(0) = 1/2.
long double phi_quadrature(long double z) {
  const long double inv_sqrt2pi = 0.39894228040143267793994L;
  auto dens = [&](long double u) { return inv_sqrt2pi * std::exp(-0.5L * u * u); };
  long double a = 0.0L, b = z;
  const int steps = 20000;
  long double h = (b - a) / steps;
  long double s = dens(a) + dens(b);
  for (int i = 1; i < steps; ++i) s += (i % 2 ? 4.0L : 2.0L) * dens(a + i * h);
  return 0.5L + s * h / 3.0L;
}

// Central finite differences of the log-likelihood in long double.
long double fd_derivative(const IndexFamily& f, double y, double z, int order, long double h) {
  auto l = [&](long double zz) { return (long double)f.loglik(y, (double)zz); };
  switch (order) {
    case 1: return (l(z + h) - l(z - h)) / (2.0L * h);
    case 2: return (l(z + h) - 2.0L * l(z) + l(z - h)) / (h * h);
    case 3:
      return (l(z + 2.0L * h) - 2.0L * l(z + h) + 2.0L * l(z - h) - l(z - 2.0L * h)) /
             (2.0L * h * h * h);
    default: FAIL("unsupported order"); return 0.0L;
  }
}

void check_family_fd(const IndexFamily& f, double y, double z, double tol = 1e-6) {
  DerivativeBundle d = f.derivatives(y, z);
  double analytic[3] = {d.d1, d.d2, d.d3};
  long double h[3] = {1e-5L, 1e-4L, 1e-3L};
  for (int q = 1; q <= 3; ++q) {
    long double fd = fd_derivative(f, y, z, q, h[q - 1]);
    double rel = std::abs((double)fd - analytic[q - 1]) / (1.0 + std::abs(analytic[q - 1]));
    INFO("family " << f.name() << " y=" << y << " z=" << z << " order " << q << " analytic "
                   << analytic[q - 1] << " fd " << (double)fd);
    CHECK(rel <= tol);
  }
}

}  // namespace

TEST_CASE("log-likelihood values at hand-checked points") {
  CHECK(IndexFamily::logit().loglik(1.0, 0.0) == Catch::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(IndexFamily::poisson().loglik(2.0, 0.0) ==
        Catch::Approx(-1.0 - std::log(2.0)).epsilon(1e-12));
  // probit against the quadrature oracle
  long double phi_half = phi_quadrature(0.5L);
  CHECK(IndexFamily::probit().loglik(1.0, 0.5) ==
        Catch::Approx((double)std::log(phi_half)).epsilon(1e-10));
  CHECK(IndexFamily::probit().loglik(0.0, 0.5) ==
        Catch::Approx((double)std::log(1.0L - phi_half)).epsilon(1e-10));
  // linear: density of N(z, sigma^2) at y
  double v = IndexFamily::linear(2.0).loglik(1.0, 0.0);
  CHECK(v == Catch::Approx(-0.5 * std::log(2.0 * M_PI) - std::log(2.0) - 0.125).epsilon(1e-12));
}

TEST_CASE("first derivatives at hand-checked points") {
  CHECK(IndexFamily::logit().derivatives(1.0, 0.0).d1 == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(IndexFamily::poisson().derivatives(1.0, 0.0).d1 == Catch::Approx(0.0).margin(1e-12));
  CHECK(IndexFamily::probit().derivatives(1.0, 0.0).d1 ==
        Catch::Approx(0.7978845608).epsilon(1e-8));
}

TEST_CASE("analytic derivatives match finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> zdist(-4.0, 4.0);
  std::uniform_int_distribution<int> bit(0, 1);
  std::poisson_distribution<int> pois(3.0);
  std::normal_distribution<double> ydist(0.0, 2.0);
  for (int rep = 0; rep < 300; ++rep) {
    double z = zdist(rng);
    check_family_fd(IndexFamily::probit(), bit(rng), z);
    check_family_fd(IndexFamily::logit(), bit(rng), z);
    check_family_fd(IndexFamily::poisson(), pois(rng), z);
    check_family_fd(IndexFamily::linear(1.3), ydist(rng), z);
  }
}

TEST_CASE("probit tail evaluation stays finite and consistent") {
  auto f = IndexFamily::probit();
  for (double z : {-40.0, -20.0, -8.0, -6.5, -6.0001, -5.9999, 6.0, 12.0, 40.0}) {
    DerivativeBundle d = f.derivatives(1.0, z);
    CHECK(std::isfinite(d.value));
    CHECK(std::isfinite(d.d1));
    CHECK(d.d2 < 0.0);
    CHECK(std::isfinite(d.d3));
    CHECK(std::isfinite(d.d4));
  }
  // continuity across the |z| = 6 seam
  double below = f.derivatives(1.0, -6.0 - 1e-9).d1;
  double above = f.derivatives(1.0, -6.0 + 1e-9).d1;
  CHECK(std::abs(below - above) / std::abs(below) < 1e-9);
  double lb = f.loglik(1.0, -6.0 - 1e-9), la = f.loglik(1.0, -6.0 + 1e-9);
  CHECK(std::abs(lb - la) / std::abs(lb) < 1e-9);
}

TEST_CASE("strict concavity and exact higher-derivative identities") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> zdist(-5.0, 5.0);
  for (int rep = 0; rep < 500; ++rep) {
    double z = zdist(rng);
    CHECK(IndexFamily::probit().derivatives(rep % 2, z).d2 < 0.0);
    CHECK(IndexFamily::logit().derivatives(rep % 2, z).d2 < 0.0);
    DerivativeBundle lin = IndexFamily::linear(0.7).derivatives(z, -z);
    CHECK(lin.d2 < 0.0);
    CHECK(lin.d3 == 0.0);
    CHECK(lin.d4 == 0.0);
    DerivativeBundle poi = IndexFamily::poisson().derivatives(2.0, z);
    CHECK(poi.d2 == -std::exp(z));
    CHECK(poi.d3 == poi.d2);
    CHECK(poi.d4 == poi.d2);
  }
}

TEST_CASE("check_concavity reports the curvature range") {
  std::vector<double> grid;
  for (double z = -1.0; z <= 1.0 + 1e-12; z += 0.01) grid.push_back(z);
  auto rep = check_concavity(IndexFamily::poisson(), {0.0}, grid);
  CHECK(rep.min_neg_d2 == Catch::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK(rep.concave);

  auto rl = check_concavity(IndexFamily::logit(), {0.0, 1.0}, {0.0});
  CHECK(rl.max_neg_d2 == Catch::Approx(0.25).epsilon(1e-12));
  auto rlin = check_concavity(IndexFamily::linear(2.0), {3.14}, {0.0, 1.0});
  CHECK(rlin.min_neg_d2 == Catch::Approx(0.25).epsilon(1e-12));
  CHECK(rlin.max_neg_d2 == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("support checks raise domain errors naming the family") {
  CHECK_THROWS_AS(IndexFamily::poisson().loglik(-1.0, 0.0), support_error);
  CHECK_THROWS_AS(IndexFamily::poisson().loglik(2.5, 0.0), support_error);
  CHECK_THROWS_AS(IndexFamily::probit().loglik(2.0, 0.0), support_error);
  CHECK_THROWS_AS(IndexFamily::logit().loglik(0.5, 0.0), support_error);
  CHECK_THROWS_WITH(IndexFamily::probit().loglik(2.0, 0.0),
                    Catch::Matchers::ContainsSubstring("probit"));
  CHECK_THROWS_AS(IndexFamily::linear(-1.0), argument_error);
  CHECK_THROWS_AS(IndexFamily::probit().derivatives(1.0, 0.0, 5), argument_error);
  CHECK_THROWS_AS(IndexFamily::probit().derivatives(1.0, 0.0, 0), argument_error);
}

TEST_CASE("family selection strings") {
  CHECK(IndexFamily::parse("probit").kind() == FamilyKind::probit);
  CHECK(IndexFamily::parse("logit").kind() == FamilyKind::logit);
  CHECK(IndexFamily::parse("poisson").kind() == FamilyKind::poisson);
  auto lin = IndexFamily::parse("linear:sigma=2.5");
  CHECK(lin.kind() == FamilyKind::linear);
  CHECK(lin.sigma() == Catch::Approx(2.5));
  CHECK_THROWS_AS(IndexFamily::parse("gamma"), argument_error);
  CHECK_THROWS_AS(IndexFamily::parse("linear:sigma=abc"), argument_error);
}
