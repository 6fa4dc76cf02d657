#include <doctest.h>

#include <cmath>

#include <Eigen/Sparse>

#include "wn/probes.hpp"
#include "wn/solver.hpp"

using namespace wn;

namespace {

// Independent half-line oracle: strong-form central differences with a
// one-sided Neumann row at the boundary, dense tridiagonal solve.
struct OracleSolution {
  std::vector<double> xi, u;
  double at(double x) const {
    const double h = xi[1] - xi[0];
    int j = std::max(1, std::min((int)((x - xi[0]) / h), (int)xi.size() - 2));
    const double t = (x - xi[j]) / h;
    return u[j] + 0.5 * t * (u[j + 1] - u[j - 1]) +
           0.5 * t * t * (u[j + 1] - 2 * u[j] + u[j - 1]);
  }
};

OracleSolution strong_form_oracle(double lambda, const std::function<double(double)>& f,
                                  double h) {
  const double lo = -8.5, hi = 0.0;
  const int J = static_cast<int>(std::round((hi - lo) / h));
  OracleSolution sol;
  for (int j = 0; j <= J; ++j) sol.xi.push_back(lo + j * h);
  using T = Eigen::Triplet<double>;
  std::vector<T> trips;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(J + 1);
  for (int j = 1; j < J; ++j) {
    const double x = sol.xi[j];
    trips.emplace_back(j, j, lambda + 2.0 / (h * h));
    trips.emplace_back(j, j - 1, -1.0 / (h * h) - x / (2.0 * h));
    trips.emplace_back(j, j + 1, -1.0 / (h * h) + x / (2.0 * h));
    b[j] = f(x);
  }
  // One-sided second-order Neumann rows at both ends.
  trips.emplace_back(0, 0, -3.0);
  trips.emplace_back(0, 1, 4.0);
  trips.emplace_back(0, 2, -1.0);
  trips.emplace_back(J, J, 3.0);
  trips.emplace_back(J, J - 1, -4.0);
  trips.emplace_back(J, J - 2, 1.0);
  Eigen::SparseMatrix<double> A(J + 1, J + 1);
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
  Eigen::VectorXd u = lu.solve(b);
  for (int j = 0; j <= J; ++j) sol.u.push_back(u[j]);
  return sol;
}

}  // namespace

TEST_CASE("apply_L eigenfunction identities") {
  GaussianModel m(2, {1.0, 2.0}, 24);
  Weight w0 = Weight::zero(m);
  Lcg rng(3);

  CylFunction Lc = apply_L(constant_fn(2, 1.0), w0, m);
  CylFunction h1 = hhat_fn(m, 0);
  CylFunction Lh = apply_L(h1, w0, m);
  CylFunction he2 = hermite_fn(m, {2});
  CylFunction Lhe2 = apply_L(he2, w0, m);
  for (int t = 0; t < 10; ++t) {
    Vec x(2);
    x << 1.5 * rng.next_pm1(), 1.5 * rng.next_pm1();
    CHECK(Lc.value(x) == doctest::Approx(0.0));
    CHECK(Lh.value(x) == doctest::Approx(-h1.value(x)).epsilon(1e-13));
    CHECK(Lhe2.value(x) == doctest::Approx(-2.0 * he2.value(x)).epsilon(1e-12));
  }
}

TEST_CASE("whole-space spectral solve") {
  GaussianModel m(2, {1.0, 2.0}, 24);
  DiscreteProblem p;
  p.model = m;
  p.weight = Weight::zero(m);
  p.lambda = 2.0;
  p.hermite_degree = 8;

  // Constants are in the kernel of L.
  p.f = constant_fn(2, 3.0);
  SolveResult rc = solve(p);
  Lcg rng(5);
  for (int t = 0; t < 5; ++t) {
    Vec x(2);
    x << rng.next_pm1(), rng.next_pm1();
    CHECK(rc.u.value(x) == doctest::Approx(1.5).epsilon(1e-12));
  }
  EstimateReport er = estimate_report(rc, p);
  CHECK(er.ratio_l2 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(er.ratio_grad <= 1e-8);
  CHECK(er.ratio_hess <= 1e-8);
  CHECK(er.pass);

  // f = hat(h_1): eigenvalue -1, so u = f / (lambda + 1).
  p.lambda = 1.0;
  p.f = hhat_fn(m, 0);
  SolveResult re = solve(p);
  CylFunction Lu = apply_L(re.u, p.weight, m);
  for (int t = 0; t < 5; ++t) {
    Vec x(2);
    x << rng.next_pm1(), rng.next_pm1();
    CHECK(re.u.value(x) == doctest::Approx(0.5 * m.hhat(0, x)).epsilon(1e-11));
    // Residual of the strong equation through the apply_L oracle.
    CHECK(p.lambda * re.u.value(x) - Lu.value(x) ==
          doctest::Approx(p.f.value(x)).epsilon(1e-10));
  }
  CHECK(re.system_residual <= 1e-12);
  CHECK(estimate_report(re, p).ratio_l2 == doctest::Approx(0.5).epsilon(1e-10));

  CHECK_THROWS(solve([&] { DiscreteProblem q = p; q.lambda = -1.0; return q; }()));
}

TEST_CASE("half-space solve against the strong-form oracle") {
  GaussianModel m(1, {1.0}, 32);
  Vec a(1);
  a << 1.0;
  DiscreteProblem p;
  p.model = m;
  p.weight = Weight::zero(m);
  p.domain = LevelSetDomain::half_space(m, a, 0.0);
  p.lambda = 1.0;
  p.f = polynomial_fn(m, Polynomial::monomial(1, 1.0, {2}));
  p.mesh_h = 0.025;
  SolveResult res = solve(p);

  OracleSolution oracle =
      strong_form_oracle(1.0, [](double x) { return x * x; }, 0.0025);
  double num = 0.0, den = 0.0;
  const QuadratureGrid grid = p.domain->interior_quad();
  Vec x(1);
  for (int k = 0; k < grid.size(); ++k) {
    x = grid.nodes.col(k);
    const double diff = res.u.value(x) - oracle.at(x[0]);
    num += grid.weights[k] * diff * diff;
    den += grid.weights[k] * oracle.at(x[0]) * oracle.at(x[0]);
  }
  CHECK(std::sqrt(num / den) <= 1e-4);
  CHECK(res.system_residual <= 1e-12);
  CHECK(res.neumann_residual.has_value());

  // Constant f: u = c / lambda reproduced exactly by the conservative scheme.
  DiscreteProblem pc = p;
  pc.f = constant_fn(1, 2.0);
  pc.lambda = 4.0;
  SolveResult rc = solve(pc);
  x << -1.3;
  CHECK(rc.u.value(x) == doctest::Approx(0.5).epsilon(1e-11));
  EstimateReport ec = estimate_report(rc, pc);
  CHECK(ec.ratio_l2 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ec.pass);
}

TEST_CASE("half-space 2-D: tangential eigenfunction in closed form") {
  GaussianModel m(2, {1.0, 1.0}, 24);
  Vec a(2);
  a << 1.0, 0.0;
  DiscreteProblem p;
  p.model = m;
  p.weight = Weight::zero(m);
  p.domain = LevelSetDomain::half_space(m, a, 0.0);
  p.lambda = 1.0;
  p.f = hhat_fn(m, 1);  // tangential: u = f / (lambda + 1), Neumann-compatible
  p.mesh_h = 0.05;
  p.tangential_degree = 6;
  SolveResult res = solve(p);
  Lcg rng(9);
  for (int t = 0; t < 8; ++t) {
    Vec x(2);
    x << -2.0 * rng.next_u01(), 1.5 * rng.next_pm1();
    CHECK(res.u.value(x) == doctest::Approx(0.5 * x[1]).epsilon(5e-4));
  }
  CHECK(*res.neumann_residual <= 1e-8);

  // Neumann residual decays at second order under mesh refinement.
  DiscreteProblem pr = p;
  pr.f = polynomial_fn(m, Polynomial::monomial(2, 1.0, {2, 1}) +
                              Polynomial::monomial(2, 0.5, {1, 0}));
  std::vector<double> residuals;
  for (double h : {0.1, 0.05, 0.025}) {
    pr.mesh_h = h;
    residuals.push_back(*solve(pr).neumann_residual);
  }
  const double o1 = std::log2(residuals[0] / residuals[1]);
  const double o2 = std::log2(residuals[1] / residuals[2]);
  CHECK(o1 >= 1.8);
  CHECK(o2 >= 1.8);
}

TEST_CASE("solver error paths") {
  GaussianModel m(2, {1.0, 1.0}, 16);
  DiscreteProblem p;
  p.model = m;
  p.weight = Weight::zero(m);
  p.domain = LevelSetDomain::unit_ball(m);
  p.lambda = 1.0;
  p.f = constant_fn(2, 1.0);
  CHECK_THROWS_WITH(solve(p), "no discrete solver for this domain");
}

TEST_CASE("graph norm check") {
  GaussianModel m(2, {1.0, 1.0}, 24);
  Weight w0 = Weight::zero(m);

  // u = 1: both norms equal one.
  GraphNormCheck g1 = graph_norm_check(constant_fn(2, 1.0), w0, std::nullopt, m);
  CHECK(g1.d_norm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g1.w_norm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g1.lower_ok);
  CHECK(g1.upper_ok);

  // u = hat(h_2) on the half-space {hat(h_1) <= r}: Lu = -u.
  Vec a(2);
  a << 1.0, 0.0;
  LevelSetDomain hs = LevelSetDomain::half_space(m, a, 0.4);
  CylFunction u = hhat_fn(m, 1);
  GraphNormCheck g2 = graph_norm_check(u, w0, hs, m);
  const double mass = integrate(hs.interior_quad(), [](const Vec&) { return 1.0; });
  CHECK(g2.d_norm == doctest::Approx(std::sqrt(2.0 * mass)).epsilon(1e-9));
  CHECK(g2.lower_ok);
  CHECK(g2.upper_ok);

  // Violating the Neumann condition gets rejected.
  CHECK_THROWS_WITH(graph_norm_check(hhat_fn(m, 0), w0, hs, m),
                    "Neumann condition violated");

  // Random Neumann-compatible functions on the half-space.
  Lcg rng(13);
  for (int t = 0; t < 10; ++t) {
    Polynomial tang = Polynomial::constant(2, rng.next_pm1());
    tang += Polynomial::coordinate(2, 1) * rng.next_pm1();
    tang += Polynomial::monomial(2, rng.next_pm1(), {0, 2});
    Polynomial nrm = Polynomial::coordinate(2, 0) + Polynomial::constant(2, -0.4);
    Polynomial up = tang + (nrm * nrm) * (0.5 * rng.next_pm1());
    GraphNormCheck g = graph_norm_check(polynomial_fn(m, up), w0, hs, m);
    CHECK(g.lower_ok);
    CHECK(g.upper_ok);
  }
}

TEST_CASE("penalization sweep") {
  GaussianModel m(1, {1.0}, 32);
  Vec a(1);
  a << 1.0;
  DiscreteProblem p;
  p.model = m;
  p.weight = Weight::zero(m);
  p.domain = LevelSetDomain::half_space(m, a, 0.0);
  p.lambda = 1.0;

  // f = 1: u_alpha and u_Omega are the same constant for every alpha.
  p.f = constant_fn(1, 1.0);
  p.mesh_h = 0.05;
  PenalizationTable tc = penalization_sweep(p, {0.5, 0.1});
  for (const auto& row : tc.rows) CHECK(row.error <= 1e-9);

  // f = xi: errors decrease along the schedule and the penalized estimates
  // hold.
  p.f = polynomial_fn(m, Polynomial::coordinate(1, 0));
  p.mesh_h = 0.02;
  PenalizationTable t = penalization_sweep(p, {0.5, 0.1, 0.02});
  CHECK(t.decreasing);
  for (const auto& row : t.rows) {
    CHECK(row.report.ratio_l2 <= 1.005);
    CHECK(row.report.ratio_grad <= 1.005);
    CHECK(row.report.ratio_hess <= 1.005);
  }
  // Magnitudes match the continuum gap of the penalized problem.
  CHECK(t.rows.front().error / t.u_omega_norm == doctest::Approx(0.36).epsilon(0.05));
  CHECK(t.rows.back().error / t.u_omega_norm == doctest::Approx(0.107).epsilon(0.05));
}

TEST_CASE("norms against closed forms") {
  GaussianModel m(1, {1.0}, 40);
  Weight w0 = Weight::zero(m);
  CylFunction he2 = hermite_fn(m, {2});
  Norms n = compute_norms(he2, w0, std::nullopt, m);
  CHECK(n.l2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(n.grad == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(n.hess == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(n.hess_form == doctest::Approx(0.0));
}
