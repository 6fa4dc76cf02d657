#include <doctest.h>

#include <cmath>

#include "wn/probes.hpp"
#include "wn/weights.hpp"

using namespace wn;

namespace {

// |x|_H^2 / 2 as a polynomial in ambient coordinates.
CylFunction half_h_norm_sq(const GaussianModel& m) {
  Polynomial p = Polynomial::constant(m.dim, 0.0);
  for (int i = 0; i < m.dim; ++i) {
    Polynomial xi = Polynomial::coordinate(m.dim, i);
    p += (xi * xi) * (0.5 / m.lambda(i));
  }
  return polynomial_fn(m, p);
}

// Golden-section oracle for the 1-D envelope inf_h f(x+h) + h^2/(2a).
double golden_envelope(const std::function<double(double)>& f, double x, double alpha) {
  auto obj = [&](double h) { return f(x + h) + h * h / (2.0 * alpha); };
  double a = -50.0, b = 50.0;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (obj(c) < obj(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - gr * (b - a);
    d = a + gr * (b - a);
  }
  return obj(0.5 * (a + b));
}

}  // namespace

TEST_CASE("prox of the quadratic |x|_H^2/2 in closed form") {
  GaussianModel m(2, {1.0, 3.0}, 16);
  CylFunction f = half_h_norm_sq(m);
  for (double alpha : {0.1, 0.7, 2.0}) {
    Vec x(2);
    x << 1.3, -0.8;
    ProxResult pr = prox(f, m, x, alpha);
    const Vec expect = -alpha / (1.0 + alpha) * m.whiten(x);
    CHECK((pr.minimizer - expect).norm() <= 1e-9);
    const double z2 = m.whiten(x).squaredNorm();
    CHECK(pr.envelope == doctest::Approx(z2 / (2.0 * (1.0 + alpha))).epsilon(1e-10));
    CHECK(pr.kkt_residual <= 1e-9);
  }

  // 1-D oracle cross-check.
  GaussianModel m1(1, {1.0}, 16);
  CylFunction f1 = half_h_norm_sq(m1);
  Vec x1(1);
  x1 << 0.9;
  const double env = prox(f1, m1, x1, 0.35).envelope;
  const double oracle =
      golden_envelope([](double t) { return 0.5 * t * t; }, 0.9, 0.35);
  CHECK(env == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("prox of a linear functional") {
  GaussianModel m(2, {1.0, 4.0}, 16);
  Vec c(2);
  c << 0.7, -0.4;
  Weight lin = Weight::linear(m, c);
  Vec x(2);
  x << 0.2, 0.5;
  const double alpha = 0.3;
  ProxResult pr = prox(lin.U(), m, x, alpha);
  // The H-representer of the covector has H-coordinates c_i sqrt(l_i).
  Vec hc(2);
  for (int i = 0; i < 2; ++i) hc[i] = c[i] * m.sqrt_lambda(i);
  CHECK((pr.minimizer + alpha * hc).norm() <= 1e-9);
  const double fx = lin.U().value(x);
  CHECK(pr.envelope ==
        doctest::Approx(fx - alpha * hc.squaredNorm() / 2.0).epsilon(1e-10));

  // 1-D oracle; an H-shift with lambda = 4 is an ambient shift with the
  // penalty rescaled by lambda.
  GaussianModel m1(1, {4.0}, 16);
  Vec c1(1);
  c1 << 0.7;
  Weight l1 = Weight::linear(m1, c1);
  Vec x1(1);
  x1 << -0.3;
  const double env = prox(l1.U(), m1, x1, 0.5).envelope;
  const double oracle = golden_envelope([](double t) { return 0.7 * t; }, -0.3, 0.5 * 4.0);
  CHECK(env == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("prox vanishes as alpha goes to zero") {
  GaussianModel m(2, {1.0, 2.0}, 16);
  Lcg rng(9);
  CylFunction f = random_convex_fn(rng, m);
  Vec x(2);
  x << 0.4, -0.6;
  double prev = std::numeric_limits<double>::infinity();
  for (double alpha : {1.0, 0.1, 0.01, 0.001}) {
    const double pn = prox(f, m, x, alpha).minimizer.norm();
    CHECK(pn <= prev + 1e-12);
    prev = pn;
  }
  CHECK(prev <= 1e-2);
}

TEST_CASE("envelope monotone increasing as alpha decreases") {
  GaussianModel m(1, {1.0}, 16);
  Lcg rng(17);
  CylFunction f = random_convex_fn(rng, m);
  Vec x(1);
  x << 0.8;
  double prev = -std::numeric_limits<double>::infinity();
  for (double alpha : {1.0, 0.5, 0.1, 0.02}) {
    const double env = my_envelope(f, m, x, alpha);
    CHECK(env >= prev - 1e-12);
    CHECK(env <= f.value(x) + 1e-12);
    prev = env;
  }
}

TEST_CASE("gradient and hessian formulas") {
  GaussianModel m(2, {1.0, 3.0}, 16);
  CylFunction q = half_h_norm_sq(m);
  Vec x(2);
  x << 0.6, -1.1;
  const double alpha = 0.25;

  const Vec g = my_gradient(q, m, x, alpha);
  CHECK((g - m.whiten(x) / (1.0 + alpha)).norm() <= 1e-9);

  const Mat h = my_hessian(q, m, x, alpha);
  Mat expect = Mat::Identity(2, 2) / (1.0 + alpha);
  CHECK((h - expect).norm() <= 1e-10);

  // Affine functions have vanishing Moreau-Yosida Hessian.
  Vec c(2);
  c << 0.3, 0.9;
  const Mat ha = my_hessian(Weight::linear(m, c).U(), m, x, alpha);
  CHECK(ha.norm() <= 1e-12);

  // Small alpha: the regularized gradient approaches the gradient.
  Lcg rng(21);
  for (int t = 0; t < 5; ++t) {
    CylFunction f = random_convex_fn(rng, m);
    Vec y(2);
    y << rng.next_pm1(), rng.next_pm1();
    const Vec gd = my_gradient(f, m, y, 1e-4);
    CHECK((gd - f.grad_h(y)).norm() <= 1e-2);
  }
}

TEST_CASE("prox error paths") {
  GaussianModel m(1, {1.0}, 16);
  // Concave objective with alpha large enough that the regularization does
  // not restore convexity.
  Polynomial neg = Polynomial::monomial(1, -0.5, {2});
  CylFunction f = polynomial_fn(m, neg);
  Vec x(1);
  x << 0.7;
  CHECK_THROWS_AS(prox(f, m, x, 4.0), std::runtime_error);

  // Singular (I + alpha hess) is reported for the hessian system.
  CylFunction fake(
      1, {0}, [](const Vec&) { return 0.0; },
      [](const Vec&) -> Vec { return Vec::Zero(1); },
      [](const Vec&) -> Mat { return -4.0 * Mat::Identity(1, 1); });
  CHECK_THROWS_WITH(my_hessian(fake, m, x, 0.25), "Hessian system singular");
}

TEST_CASE("hessian convergence to the exact hessian") {
  GaussianModel m(2, {1.0, 2.0}, 16);
  Lcg rng(29);
  for (int t = 0; t < 5; ++t) {
    CylFunction f = random_convex_fn(rng, m);
    Vec x(2);
    x << rng.next_pm1(), rng.next_pm1();
    const Mat exact = f.hess_h(x);
    double prev = std::numeric_limits<double>::infinity();
    for (double alpha : {1e-1, 1e-2, 1e-3}) {
      const double err = (my_hessian(f, m, x, alpha) - exact).norm();
      CHECK(err <= prev + 1e-12);
      prev = err;
    }
    CHECK(prev <= 0.05 * (1.0 + exact.norm()));
  }
}

TEST_CASE("penalized weight") {
  GaussianModel m(1, {1.0}, 16);
  Vec a(1);
  a << 1.0;
  LevelSetDomain line = LevelSetDomain::half_space(m, a, 0.0);
  Weight w0 = Weight::zero(m);

  CHECK_THROWS(penalized(w0, line, 1.5));

  PenalizedWeight v = penalized(w0, line, 0.2);
  Vec xin(1);
  xin << -0.5;
  CHECK(v.value(xin) == doctest::Approx(0.0));
  Vec xout(1);
  xout << 1.0;
  CHECK(v.value(xout) == doctest::Approx(1.0 / (2.0 * 0.2)).epsilon(1e-12));

  // V_alpha = U_alpha + d^2/(2 alpha) pointwise for a nonzero weight.
  Weight wq = Weight::custom(half_h_norm_sq(m));
  PenalizedWeight vq = penalized(wq, line, 0.3);
  Vec x(1);
  x << 1.4;
  const double ua = my_envelope(wq.U(), m, x, 0.3);
  const double d = line.dh_distance(x);
  CHECK(vq.value(x) == doctest::Approx(ua + d * d / 0.6).epsilon(1e-10));

  // Monotone in alpha at sampled points.
  double prev = -1e300;
  for (double alpha : {1.0, 0.5, 0.2, 0.1}) {
    const double val = penalized(wq, line, alpha).value(x);
    CHECK(val >= prev - 1e-12);
    prev = val;
  }

  // Gradient: base part plus d grad d / alpha; hessian symmetric.
  const Vec g = vq.grad_h(xout);
  const Vec gbase = my_gradient(wq.U(), m, xout, 0.3);
  CHECK((g - (gbase + (line.dh_distance(xout) / 0.3) * line.dh_distance_grad(xout)))
            .norm() <= 1e-9);
  const Mat h = vq.hess_h(xout);
  CHECK((h - Mat(h.transpose())).norm() <= 1e-12);
}

TEST_CASE("weight presets satisfy the convexity invariants") {
  GaussianModel m(2, {1.0, 2.0}, 16);
  Lcg rng(41);
  Vec cvec(2);
  cvec << 0.4, -0.2;
  for (const Weight& w :
       {Weight::zero(m), Weight::linear(m, cvec), Weight::phi_norm_sq(m)}) {
    for (int t = 0; t < 20; ++t) {
      Vec x(2), y(2), h(2);
      x << 2.0 * rng.next_pm1(), 2.0 * rng.next_pm1();
      y << 2.0 * rng.next_pm1(), 2.0 * rng.next_pm1();
      h << rng.next_pm1(), rng.next_pm1();
      Vec mid = 0.5 * (x + y);
      CHECK(w.U().value(mid) <= 0.5 * (w.U().value(x) + w.U().value(y)) + 1e-10);
      CHECK(h.dot(w.U().hess_h(x) * h) >= -1e-10);
    }
  }
}
