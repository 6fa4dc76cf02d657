// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runtime budgets are part of the criteria and are asserted.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "wn/extension.hpp"
#include "wn/probes.hpp"
#include "wn/solver.hpp"

using namespace wn;

namespace {

struct Criterion {
  int number;
  std::string title;
  bool pass = true;
  std::vector<std::string> failures;
  double seconds = 0.0;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
    }
  }
};

std::vector<Criterion> results;

template <typename F>
void run_criterion(int number, const std::string& title, double budget_s, F&& body) {
  Criterion c;
  c.number = number;
  c.title = title;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.pass = false;
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const auto t1 = std::chrono::steady_clock::now();
  c.seconds = std::chrono::duration<double>(t1 - t0).count();
  c.expect(c.seconds < budget_s,
           "runtime " + std::to_string(c.seconds) + " s over budget " +
               std::to_string(budget_s) + " s");
  std::printf("[%s] criterion %d: %s (%.1f s)\n", c.pass ? "PASS" : "FAIL", c.number,
              c.title.c_str(), c.seconds);
  for (const auto& f : c.failures) std::printf("       - %s\n", f.c_str());
  std::fflush(stdout);
  results.push_back(c);
}

Vec make_vec(std::initializer_list<double> v) {
  Vec x(static_cast<long>(v.size()));
  int i = 0;
  for (double t : v) x[i++] = t;
  return x;
}

std::vector<Weight> weight_set(const GaussianModel& m, bool with_quartic) {
  std::vector<Weight> ws;
  ws.push_back(Weight::zero(m));
  Vec c = Vec::Zero(m.dim);
  for (int i = 0; i < m.dim; ++i) c[i] = 0.3 / (i + 1.0) * (i % 2 == 0 ? 1.0 : -1.0);
  ws.push_back(Weight::linear(m, c));
  if (with_quartic) ws.push_back(Weight::phi_norm_sq(m));
  return ws;
}

// Neumann-compatible cylindrical probe on a half-space: tangential part
// plus (normal coordinate - rstar)^2 times a tangential factor.
CylFunction neumann_probe(Lcg& rng, const GaussianModel& m, const LevelSetDomain& hs) {
  const HalfSpaceFrame& fr = hs.frame();
  const int n = m.dim;
  Polynomial normal = Polynomial::constant(n, -fr.offset);
  for (int i = 0; i < n; ++i)
    if (fr.covector[i] != 0.0) normal += Polynomial::coordinate(n, i) * fr.covector[i];
  normal = normal * (1.0 / fr.h_norm);

  Polynomial tang = Polynomial::constant(n, rng.next_pm1());
  for (int col = 1; col < n; ++col) {
    Polynomial eta = Polynomial::constant(n, 0.0);
    for (int i = 0; i < n; ++i) {
      const double coef = fr.rot(i, col) / m.sqrt_lambda(i);
      if (coef != 0.0) eta += Polynomial::coordinate(n, i) * coef;
    }
    tang += eta * rng.next_pm1() + (eta * eta) * (0.5 * rng.next_pm1());
  }
  Polynomial tfac = Polynomial::constant(n, 0.4 * rng.next_pm1());
  if (n >= 2) {
    Polynomial eta = Polynomial::constant(n, 0.0);
    for (int i = 0; i < n; ++i) {
      const double coef = fr.rot(i, 1) / m.sqrt_lambda(i);
      if (coef != 0.0) eta += Polynomial::coordinate(n, i) * coef;
    }
    tfac += eta * (0.3 * rng.next_pm1());
  }
  return polynomial_fn(m, tang + (normal * normal) * tfac);
}

// ---------------------------------------------------------------- criteria

void criterion1(Criterion& c) {
  Lcg rng(101);
  struct Geom {
    GaussianModel model;
    LevelSetDomain domain;
  };
  std::vector<Geom> geoms;
  {
    GaussianModel m1(1, {1.0}, 40);
    geoms.push_back({m1, LevelSetDomain::half_space(m1, make_vec({1.0}), 0.0)});
    GaussianModel m2(2, {1.0, 2.0}, 32);
    geoms.push_back({m2, LevelSetDomain::half_space(m2, make_vec({1.0, -0.5}), 0.2)});
    GaussianModel m3(3, {0.5, 1.0, 2.0}, 20);
    geoms.push_back({m3, LevelSetDomain::half_space(m3, make_vec({1.0, 1.0, -0.5}), 0.25)});
    GaussianModel mb(2, {1.0, 1.0}, 32);
    geoms.push_back({mb, LevelSetDomain::unit_ball(mb)});
  }
  double worst = 0.0;
  for (const auto& g : geoms)
    for (const Weight& w : weight_set(g.model, true)) {
      const IbpBatch batch = make_ibp_batch(w, g.domain);
      for (int p = 0; p < 30; ++p) {
        CylFunction phi = random_polynomial_fn(rng, g.model, 4);
        double w12 = 0.0;
        const Vec res = ibp_residual_all(phi, batch, &w12);
        worst = std::max(worst, res.cwiseAbs().maxCoeff() / (1.0 + w12));
      }
    }
  c.expect(worst <= 1e-6, "max normalized residual " + std::to_string(worst));
}

void criterion2(Criterion& c) {
  GaussianModel m(2, {1.0, 2.0}, 24);
  Lcg rng(202);
  double env = 0.0, charac = 0.0, nonexp = 0.0, gradfd = 0.0;
  bool monotone = true;
  for (int p = 0; p < 10; ++p) {
    CylFunction f = random_convex_fn(rng, m);
    Vec x(2);
    x << rng.next_pm1(), rng.next_pm1();
    const double alpha = 0.05 + 0.5 * rng.next_u01();
    ProxResult pr = prox(f, m, x, alpha);
    env = std::max(env, pr.envelope - f.value(x));

    Vec xp = x + m.unwhiten(pr.minimizer);
    const double fxp = f.value(xp);
    for (int t = 0; t < 100; ++t) {
      Vec h(2);
      h << rng.next_pm1(), rng.next_pm1();
      charac = std::max(charac, fxp - (f.value(x + m.unwhiten(h)) +
                                       pr.minimizer.dot(h - pr.minimizer) / alpha));
    }
    {
      Vec h(2);
      h << rng.next_pm1(), rng.next_pm1();
      ProxResult pr2 = prox(f, m, x + m.unwhiten(h), alpha);
      nonexp = std::max(nonexp, (pr2.minimizer - pr.minimizer).norm() / h.norm() - 1.0);
    }
    {
      const Vec g = my_gradient(f, m, x, alpha);
      const double eps = 1e-5;
      for (int i = 0; i < 2; ++i) {
        Vec a = x, b = x;
        a[i] += eps * m.sqrt_lambda(i);
        b[i] -= eps * m.sqrt_lambda(i);
        const double fd =
            (my_envelope(f, m, a, alpha) - my_envelope(f, m, b, alpha)) / (2.0 * eps);
        gradfd = std::max(gradfd, std::abs(fd - g[i]) / (1.0 + std::abs(g[i])));
      }
    }
    {
      const Mat exact = f.hess_h(x);
      double prev = std::numeric_limits<double>::infinity();
      for (double a : {1e-1, 1e-2, 1e-3}) {
        const double err = (my_hessian(f, m, x, a) - exact).norm();
        if (err > prev + 1e-12) monotone = false;
        prev = err;
      }
    }
  }
  c.expect(env <= 1e-10, "envelope bound violated by " + std::to_string(env));
  c.expect(charac <= 1e-8, "minimizer characterization " + std::to_string(charac));
  c.expect(nonexp <= 1e-8, "nonexpansiveness excess " + std::to_string(nonexp));
  c.expect(gradfd <= 1e-5, "gradient formula vs FD " + std::to_string(gradfd));
  c.expect(monotone, "hessian convergence not monotone");
}

void criterion3(Criterion& c) {
  Lcg rng(303);
  double adj = 0.0, bound = 0.0, rot_div = 0.0;

  GaussianModel mh(2, {1.0, 2.0}, 32);
  LevelSetDomain hs = LevelSetDomain::half_space(mh, make_vec({1.0, -0.5}), 0.2);
  GaussianModel mb(2, {1.0, 1.0}, 32);
  LevelSetDomain ball = LevelSetDomain::unit_ball(mb);

  auto run_fields = [&](const GaussianModel& m, const LevelSetDomain& d,
                        const Weight& w, int count, bool on_ball) {
    const QuadratureGrid bulk = weighted_interior(d, w);
    for (int t = 0; t < count; ++t) {
      CylVectorField field = on_ball ? random_tangent_field_ball(rng, m, 2)
                                     : random_tangent_field_half_space(rng, m, d, 2);
      CylFunction div = divergence(field, w, d, m);
      double div2 = 0.0;
      Vec x(m.dim);
      for (int q = 0; q < bulk.size(); ++q) {
        x = bulk.nodes.col(q);
        const double dv = div.value(x);
        div2 += bulk.weights[q] * dv * dv;
      }
      bound = std::max(bound, std::sqrt(div2) - std::sqrt(z12_norm_sq(field, w, d)));
      for (int s = 0; s < 3; ++s) {
        CylFunction f = random_polynomial_fn(rng, m, 2);
        double acc = 0.0;
        for (int q = 0; q < bulk.size(); ++q) {
          x = bulk.nodes.col(q);
          acc += bulk.weights[q] *
                 (f.grad_h(x).dot(field.value_h(x)) + f.value(x) * div.value(x));
        }
        adj = std::max(adj, std::abs(acc));
      }
    }
  };
  run_fields(mh, hs, Weight::zero(mh), 5, false);
  run_fields(mh, hs, weight_set(mh, false)[1], 5, false);
  run_fields(mb, ball, Weight::zero(mb), 10, true);

  // Rotation fields on the isotropic ball have vanishing divergence.
  {
    CylFunction div = divergence(rotation_field(mb, 0, 1), Weight::zero(mb), ball, mb);
    const QuadratureGrid& bulk = ball.interior_quad();
    Vec x(2);
    for (int q = 0; q < bulk.size(); q += 3) {
      x = bulk.nodes.col(q);
      rot_div = std::max(rot_div, std::abs(div.value(x)));
    }
  }
  c.expect(adj <= 1e-6, "adjointness residual " + std::to_string(adj));
  c.expect(bound <= 1e-9, "norm bound excess " + std::to_string(bound));
  c.expect(rot_div <= 1e-10, "rotation divergence " + std::to_string(rot_div));
}

void criterion4(Criterion& c) {
  Lcg rng(404);
  GaussianModel m2(2, {1.0, 1.0}, 32);
  LevelSetDomain circle = LevelSetDomain::unit_ball(m2);
  CylVectorField rot = rotation_field(m2, 0, 1);
  const double rot_res = boundary_hessian_identity(rot, circle);
  c.expect(rot_res <= 1e-9, "rotation-field residual " + std::to_string(rot_res));
  {
    // Closed form: both sides equal 2 on the circle.
    const SurfaceQuad& sq = circle.boundary_quad();
    Vec x = sq.nodes.col(0);
    const Vec phi = rot.value_h(x);
    const double lhs = phi.dot(sq.hess_G[0] * phi);
    c.expect(std::abs(lhs - 2.0) <= 1e-12,
             "closed-form value " + std::to_string(lhs) + " != 2");
  }
  double seeded = 0.0;
  for (int t = 0; t < 10; ++t)
    seeded = std::max(seeded,
                      boundary_hessian_identity(random_tangent_field_ball(rng, m2, 2), circle));
  GaussianModel m3 = GaussianModel::isotropic(3, 1.0, 16);
  LevelSetDomain sphere = LevelSetDomain::unit_ball(m3);
  for (int t = 0; t < 10; ++t)
    seeded = std::max(seeded,
                      boundary_hessian_identity(random_tangent_field_ball(rng, m3, 2), sphere));
  c.expect(seeded <= 1e-7, "seeded tangent fields residual " + std::to_string(seeded));
}

void criterion5(Criterion& c) {
  Lcg rng(505);
  const std::vector<double> lambdas{0.5, 1.0, 4.0};
  double worst = 0.0;

  // Whole space, spectral, n = 1..3.
  for (int n = 1; n <= 3; ++n) {
    std::vector<double> spec;
    for (int i = 0; i < n; ++i) spec.push_back(0.5 + 0.75 * i);
    GaussianModel m(n, spec, n == 1 ? 40 : (n == 2 ? 24 : 16));
    for (int uq = 0; uq < 2; ++uq) {
      DiscreteProblem base;
      base.model = m;
      base.weight = uq == 0 ? Weight::zero(m) : Weight::phi_norm_sq(m);
      base.hermite_degree = uq == 0 ? 6 : (n == 1 ? 12 : (n == 2 ? 10 : 8));
      SolverHandle op(base);
      for (int p = 0; p < 50; ++p) {
        CylFunction f = random_polynomial_fn(rng, m, 3);
        for (double lambda : lambdas) {
          SolveResult res = op.solve(lambda, f);
          DiscreteProblem pr = base;
          pr.lambda = lambda;
          EstimateReport er = estimate_report(res, pr);
          worst = std::max({worst, er.ratio_l2, er.ratio_grad, er.ratio_hess});
        }
      }
    }
  }

  // Half-spaces, 1-D and 2-D, FD mesh h1 = 0.025.
  std::vector<std::pair<GaussianModel, Vec>> hs_geoms;
  hs_geoms.emplace_back(GaussianModel(1, {1.0}, 40), make_vec({1.0}));
  hs_geoms.emplace_back(GaussianModel(2, {1.0, 1.5}, 32), make_vec({1.0, -0.5}));
  for (const auto& [m, a] : hs_geoms) {
    LevelSetDomain hs = LevelSetDomain::half_space(m, a, 0.2);
    for (int uq = 0; uq < 2; ++uq) {
      DiscreteProblem base;
      base.model = m;
      base.weight = uq == 0 ? Weight::zero(m) : Weight::phi_norm_sq(m);
      base.domain = hs;
      base.mesh_h = 0.025;
      base.tangential_degree = uq == 0 ? 6 : 10;
      SolverHandle op(base);
      for (int p = 0; p < 50; ++p) {
        CylFunction f = random_polynomial_fn(rng, m, 3);
        for (double lambda : lambdas) {
          SolveResult res = op.solve(lambda, f);
          DiscreteProblem pr = base;
          pr.lambda = lambda;
          EstimateReport er = estimate_report(res, pr);
          worst = std::max({worst, er.ratio_l2, er.ratio_grad, er.ratio_hess});
        }
      }
    }
  }
  c.expect(worst <= 1.0 + 5e-3, "max estimate ratio " + std::to_string(worst));

  // Neumann residual order >= 1.8 under halving the mesh twice.
  double min_order = 10.0;
  int observed = 0;
  for (const auto& [m, a] : hs_geoms) {
    LevelSetDomain hs = LevelSetDomain::half_space(m, a, 0.2);
    for (int uq = 0; uq < 2; ++uq) {
      for (int p = 0; p < 3; ++p) {
        CylFunction f = random_polynomial_fn(rng, m, 3);
        std::vector<double> res;
        for (double h : {0.1, 0.05, 0.025}) {
          DiscreteProblem pr;
          pr.model = m;
          pr.weight = uq == 0 ? Weight::zero(m) : Weight::phi_norm_sq(m);
          pr.domain = hs;
          pr.mesh_h = h;
          pr.tangential_degree = uq == 0 ? 6 : 10;
          pr.lambda = 1.0;
          pr.f = f;
          res.push_back(solve(pr).neumann_residual.value());
        }
        // The stencil measures C h^2 + O(h^3); when the leading constant is
        // near zero the bound holds trivially but the order extraction only
        // sees higher-order terms and noise, so such cases are skipped.
        if (res[0] < 5e-4) continue;
        ++observed;
        min_order = std::min(min_order, std::log2(res[0] / res[1]));
        min_order = std::min(min_order, std::log2(res[1] / res[2]));
      }
    }
  }
  c.expect(observed > 0, "no non-degenerate mesh-study cases");
  c.expect(min_order >= 1.8, "observed order " + std::to_string(min_order));
}

void criterion6(Criterion& c) {
  Lcg rng(606);
  const double c22 = 2.0 * std::sqrt(2.0);
  const double slack = 1e-8;
  double lower = 0.0, upper = 0.0;

  GaussianModel m(2, {1.0, 2.0}, 28);
  LevelSetDomain hs = LevelSetDomain::half_space(m, make_vec({1.0, -0.5}), 0.2);
  int count = 0;
  for (const Weight& w : weight_set(m, true)) {
    for (int p = 0; p < 4 && count < 20; ++p, ++count) {
      CylFunction u = random_polynomial_fn(rng, m, 3);
      GraphNormCheck g = graph_norm_check(u, w, std::nullopt, m);
      lower = std::max(lower, g.d_norm - g.w_norm * (1.0 + slack));
      upper = std::max(upper, g.w_norm - c22 * g.d_norm * (1.0 + slack));
    }
    for (int p = 0; p < 3 && count < 20; ++p, ++count) {
      CylFunction u = neumann_probe(rng, m, hs);
      GraphNormCheck g = graph_norm_check(u, w, hs, m);
      lower = std::max(lower, g.d_norm - g.w_norm * (1.0 + slack));
      upper = std::max(upper, g.w_norm - c22 * g.d_norm * (1.0 + slack));
    }
  }
  c.expect(lower <= 0.0, "lower inequality violated by " + std::to_string(lower));
  c.expect(upper <= 0.0, "upper inequality violated by " + std::to_string(upper));
}

void criterion7(Criterion& c) {
  GaussianModel m(1, {1.0}, 40);
  DiscreteProblem p;
  p.model = m;
  p.weight = Weight::zero(m);
  p.domain = LevelSetDomain::half_space(m, make_vec({1.0}), 0.0);
  p.lambda = 1.0;
  p.f = polynomial_fn(m, Polynomial::coordinate(1, 0));
  p.mesh_h = 0.02;

  PenalizationTable t = penalization_sweep(p, {0.5, 0.2, 0.1, 0.05, 0.02});
  c.expect(t.decreasing, "errors not strictly decreasing");
  const double final_ratio = t.rows.back().error / t.u_omega_norm;
  c.expect(final_ratio <= 0.05,
           "final error ratio " + std::to_string(final_ratio) + " > 0.05 " +
               "(continuum penalization gap is O(sqrt(alpha)) ~= 0.76 sqrt(alpha); "
               "alpha = 0.02 cannot reach 0.05)");
  for (const auto& row : t.rows) {
    c.expect(row.report.ratio_l2 <= 1.0 + 5e-3 && row.report.ratio_grad <= 1.0 + 5e-3 &&
                 row.report.ratio_hess <= 1.0 + 5e-3,
             "penalized estimates fail at alpha " + std::to_string(row.alpha));
  }
}

void criterion8(Criterion& c) {
  Lcg rng(808);
  GaussianModel m(2, {1.0, 2.0}, 24);
  const double r = 0.6;
  LevelSetDomain hs = LevelSetDomain::half_space(m, make_vec({1.0, 0.25}), r);
  ReflectionCoefficients co = solve_coefficients(r);

  c.expect(co.max_residual <= 1e-12,
           "coefficient residual " + std::to_string(co.max_residual));
  const double expect_b[7] = {0.0, 0.75, 8.0 / 9.0, 0.9375, 0.96, 35.0 / 36.0, 48.0 / 49.0};
  for (int j = 0; j < 7; ++j)
    c.expect(std::abs(co.b[j] - expect_b[j]) <= 1e-15, "b-vector entry mismatch");

  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  for (int p = 0; p < 20; ++p) {
    MatchingReport rep =
        matching_report(extend(random_polynomial_fn(rng, m, 4), co, hs));
    c0 = std::max(c0, rep.c0);
    c1 = std::max(c1, rep.c1);
    c2 = std::max(c2, rep.c2);
  }
  c.expect(c0 <= 1e-6, "C0 jump " + std::to_string(c0));
  c.expect(c1 <= 1e-6, "C1 jump " + std::to_string(c1));
  c.expect(c2 <= 1e-6, "C2 jump " + std::to_string(c2));

  // Negative control: push sum a_j (j+1)^2 to 0.1.
  {
    ReflectionCoefficients bad = co;
    Eigen::Matrix<double, 7, 7> M;
    for (int j = 0; j < 7; ++j) {
      const double jj = j + 1.0;
      const double k = 2.0 * (jj + 1.0) / (jj * jj) * (2.0 - 1.0 / (jj * jj));
      M(0, j) = 1.0;
      M(1, j) = jj + 1.0;
      M(2, j) = (jj + 1.0) * (jj + 1.0);
      M(3, j) = 1.0 - 1.0 / (jj * jj);
      M(4, j) = k;
      M(5, j) = k * (jj + 1.0);
      M(6, j) = k * k;
    }
    Eigen::Matrix<double, 7, 1> e3 = Eigen::Matrix<double, 7, 1>::Zero();
    e3[2] = 0.1;
    Eigen::Matrix<double, 7, 1> delta = M.partialPivLu().solve(e3);
    for (int j = 0; j < 7; ++j) bad.a[j] += delta[j];
    Polynomial q = Polynomial::coordinate(2, 0) * Polynomial::coordinate(2, 0);
    MatchingReport rep = matching_report(extend(polynomial_fn(m, q), bad, hs));
    c.expect(rep.c2 > 1e-3, "negative control C2 jump only " + std::to_string(rep.c2));
  }

  // Empirical operator norm, stable across two quadrature orders.
  {
    std::vector<CylFunction> tests;
    for (int p = 0; p < 10; ++p) tests.push_back(random_polynomial_fn(rng, m, 4));
    const double k1 = operator_norm_probe(tests, co, hs);
    GaussianModel mc = m;
    mc.quad_order = 16;
    LevelSetDomain hsc = LevelSetDomain::half_space(mc, make_vec({1.0, 0.25}), r);
    const double k2 = operator_norm_probe(tests, co, hsc);
    c.expect(std::isfinite(k1) && k1 >= 1.0, "operator norm not finite/sane");
    c.expect(std::abs(k1 - k2) / std::max(k1, k2) <= 0.10,
             "operator norm unstable: " + std::to_string(k1) + " vs " + std::to_string(k2));
  }

  // Cylindrical approximants: exact boundary condition, decreasing error.
  {
    GaussianModel m3(3, {1.0, 1.0, 2.0}, 14);
    Vec a3 = make_vec({1.0, 0.0, 0.0});
    LevelSetDomain d3 = LevelSetDomain::half_space(m3, a3, r);
    const HalfSpaceFrame& fr = d3.frame();
    Polynomial normal = Polynomial::coordinate(3, 0) + Polynomial::constant(3, -r);
    Polynomial t2 = Polynomial::coordinate(3, 1);
    Polynomial t3 = Polynomial::coordinate(3, 2);
    Polynomial up = t2 + t3 * t3 * 0.4 + (normal * normal) * (t2 * 0.3);
    ExtendedFunction eu = extend(polynomial_fn(m3, up), solve_coefficients(r), d3);

    const SurfaceQuad& sq = d3.boundary_quad();
    double prev = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    double bc = 0.0;
    for (int keep = 1; keep <= 3; ++keep) {
      CylFunction v = cylindrical_approximant(eu, keep, 16);
      for (int k = 0; k < sq.size(); k += std::max(1, sq.size() / 12)) {
        Vec x0 = sq.nodes.col(k);
        Eigen::VectorXd gf = fr.rot.transpose() * Eigen::VectorXd(v.grad_h(x0));
        bc = std::max(bc, std::abs(gf[0]));
      }
      const double err = split_w22_norm(v - eu.as_cyl_function(), d3);
      if (err >= prev) decreasing = false;
      prev = err;
    }
    c.expect(bc <= 1e-12, "approximant boundary condition defect " + std::to_string(bc));
    c.expect(decreasing, "approximant W22 error not decreasing");
  }
}

void criterion9(Criterion& c) {
  GaussianModel m(2, {1.0, 4.0}, 24);
  const double p1 = m.sqrt_lambda(1), p2 = -m.sqrt_lambda(0);
  auto phi = [&](double x1, double x2) {
    return std::pow(std::abs(x1), p1) * std::pow(std::abs(x2), p2);
  };
  double pde = 0.0;
  for (int i = 0; i < 24; ++i)
    for (int j = 0; j < 24; ++j) {
      const double x1 = 0.05 + 0.9 * i / 23.0;
      const double x2 = 0.08 + 0.9 * j / 23.0;
      if (x1 * x1 + x2 * x2 > 1.0) continue;
      const double d1 = p1 * phi(x1, x2) / x1;
      const double d2 = p2 * phi(x1, x2) / x2;
      pde = std::max(pde,
                     std::abs(m.sqrt_lambda(0) * x1 * d1 + m.sqrt_lambda(1) * x2 * d2));
    }
  c.expect(pde <= 1e-8, "characteristic ODE residual " + std::to_string(pde));

  const double tmin = 1e-3;
  const double v1 = phi(tmin * std::cos(M_PI / 4), tmin * std::sin(M_PI / 4));
  const double v2 = phi(tmin * std::cos(M_PI / 3), tmin * std::sin(M_PI / 3));
  c.expect(std::abs(v1 - v2) > 10.0 * 1e-8,
           "ray separation " + std::to_string(std::abs(v1 - v2)));
}

}  // namespace

int main() {
  run_criterion(1, "integration-by-parts / trace identity", 30.0, criterion1);
  run_criterion(2, "Moreau-Yosida first and second order calculus", 10.0, criterion2);
  run_criterion(3, "divergence adjointness and norm bound", 20.0, criterion3);
  run_criterion(4, "boundary Hessian identity", 30.0, criterion4);
  run_criterion(5, "maximal regularity estimates and Neumann order", 180.0, criterion5);
  run_criterion(6, "graph-norm equivalence with constant 2 sqrt 2", 60.0, criterion6);
  run_criterion(7, "penalization convergence", 60.0, criterion7);
  run_criterion(8, "half-space reflection extension operator", 60.0, criterion8);
  run_criterion(9, "ball characteristic ODE and discontinuity", 5.0, criterion9);

  int failed = 0;
  for (const auto& c : results)
    if (!c.pass) ++failed;
  std::printf("%d/%d criteria passed\n", static_cast<int>(results.size()) - failed,
              static_cast<int>(results.size()));
  return failed;
}
