#include "wn/experiments.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <vector>

#include <json.hpp>

#include "wn/extension.hpp"
#include "wn/probes.hpp"
#include "wn/solver.hpp"

namespace wn {

using json = nlohmann::ordered_json;

namespace {

struct Check {
  std::string name;
  std::string theorem;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct Report {
  std::string command;
  json config_echo;
  std::vector<Check> checks;
  std::vector<std::pair<double, double>> series;  // optional CSV rows
  std::string series_header;
  json extras;  // command-specific audit payload
};

Check make_check(std::string name, std::string theorem, double stat, double thr) {
  // Convention: pass == (statistic <= threshold). Lower-bound checks are
  // recorded with both sides negated.
  Check c;
  c.name = std::move(name);
  c.theorem = std::move(theorem);
  c.statistic = stat;
  c.threshold = thr;
  c.pass = stat <= thr;
  return c;
}

// ------------------------------------------------------------ configuration

struct Config {
  json raw;
  uint64_t seed = 20240901;
  GaussianModel model = GaussianModel::isotropic(1);
  json domain_spec;  // {"kind": ...}
  std::string weight_preset = "zero";
  Vec weight_covector;
  double lambda = 1.0;
  std::vector<double> lambdas{0.5, 1.0, 4.0};
  Polynomial f_poly{1};
  bool has_f = false;
  std::vector<double> alpha_schedule{0.5, 0.2, 0.1, 0.05, 0.02};
  double mesh_h = 0.025;
  double cutoff = 8.75;
  int tangential_degree = 10;
  int hermite_degree = 12;
  int probe_count = 0;  // 0 = command default
  int probe_degree = 4;
  json tolerances;
  json fields_spec;  // optional explicit vector fields for div-check
};

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& where) {
  if (!obj.is_object()) throw std::runtime_error("config: " + where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw std::runtime_error("config: unknown key '" + key + "' in " + where);
}

Config parse_config(const json& j) {
  require_keys(j, {"schema", "seed", "model", "domain", "weight", "lambda", "lambdas",
                   "f", "alpha_schedule", "mesh", "probes", "tolerances", "fields"},
               "top level");
  Config c;
  c.raw = j;
  if (!j.contains("schema") || j["schema"] != kConfigSchema)
    throw std::runtime_error(std::string("config: schema must be ") + kConfigSchema);
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();

  int dim = 1;
  std::vector<double> spectrum{1.0};
  int quad_order = 40;
  if (j.contains("model")) {
    require_keys(j["model"], {"dim", "spectrum", "quad_order"}, "model");
    dim = j["model"].value("dim", 1);
    if (j["model"].contains("spectrum"))
      spectrum = j["model"]["spectrum"].get<std::vector<double>>();
    else
      spectrum.assign(static_cast<size_t>(dim), 1.0);
    quad_order = j["model"].value("quad_order", 40);
  }
  c.model = GaussianModel(dim, spectrum, quad_order);

  c.domain_spec = j.value("domain", json{{"kind", "half_space"}});
  require_keys(c.domain_spec, {"kind", "a", "r"}, "domain");

  if (j.contains("weight")) {
    require_keys(j["weight"], {"preset", "covector"}, "weight");
    c.weight_preset = j["weight"].value("preset", "zero");
    if (j["weight"].contains("covector")) {
      auto cv = j["weight"]["covector"].get<std::vector<double>>();
      c.weight_covector.resize(static_cast<long>(cv.size()));
      for (size_t i = 0; i < cv.size(); ++i) c.weight_covector[static_cast<long>(i)] = cv[i];
    }
  }
  if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
  if (j.contains("lambdas")) c.lambdas = j["lambdas"].get<std::vector<double>>();
  if (j.contains("f")) {
    c.f_poly = Polynomial(c.model.dim);
    for (const auto& term : j["f"]) {
      require_keys(term, {"coeff", "powers"}, "f[]");
      c.f_poly += Polynomial::monomial(c.model.dim, term["coeff"].get<double>(),
                                       term["powers"].get<std::vector<int>>());
    }
    c.has_f = true;
  }
  if (j.contains("alpha_schedule"))
    c.alpha_schedule = j["alpha_schedule"].get<std::vector<double>>();
  if (j.contains("mesh")) {
    require_keys(j["mesh"], {"h1", "cutoff", "tangential_degree", "hermite_degree"},
                 "mesh");
    c.mesh_h = j["mesh"].value("h1", 0.025);
    c.cutoff = j["mesh"].value("cutoff", 8.75);
    c.tangential_degree = j["mesh"].value("tangential_degree", 10);
    c.hermite_degree = j["mesh"].value("hermite_degree", 12);
  }
  if (j.contains("probes")) {
    require_keys(j["probes"], {"count", "degree"}, "probes");
    c.probe_count = j["probes"].value("count", 0);
    c.probe_degree = j["probes"].value("degree", 4);
  }
  c.tolerances = j.value("tolerances", json::object());
  if (!c.tolerances.is_object()) throw std::runtime_error("config: tolerances");
  if (j.contains("fields")) {
    c.fields_spec = j["fields"];
    for (const auto& fs : c.fields_spec) {
      require_keys(fs, {"direction", "poly"}, "fields[]");
      for (const auto& term : fs["poly"]) require_keys(term, {"coeff", "powers"}, "fields[].poly[]");
    }
  }
  return c;
}

double tol(const Config& c, const std::string& name, double fallback) {
  return c.tolerances.value(name, fallback);
}

LevelSetDomain build_domain(const Config& c) {
  const std::string kind = c.domain_spec.value("kind", "half_space");
  if (kind == "half_space") {
    Vec a = Vec::Zero(c.model.dim);
    if (c.domain_spec.contains("a")) {
      auto av = c.domain_spec["a"].get<std::vector<double>>();
      if (static_cast<int>(av.size()) != c.model.dim)
        throw std::runtime_error("config: domain.a dimension mismatch");
      for (size_t i = 0; i < av.size(); ++i) a[static_cast<long>(i)] = av[i];
    } else {
      a[0] = 1.0;
    }
    return LevelSetDomain::half_space(c.model, a, c.domain_spec.value("r", 0.0));
  }
  if (kind == "unit_ball") return LevelSetDomain::unit_ball(c.model);
  throw std::runtime_error("config: unsupported domain kind '" + kind + "'");
}

bool is_whole_space(const Config& c) {
  return c.domain_spec.value("kind", "half_space") == "whole_space";
}

Weight build_weight(const Config& c) {
  if (c.weight_preset == "zero") return Weight::zero(c.model);
  if (c.weight_preset == "linear") {
    Vec cov = c.weight_covector;
    if (cov.size() != c.model.dim) {
      cov = Vec::Zero(c.model.dim);
      if (cov.size() > 0) cov[0] = 0.5;
    }
    return Weight::linear(c.model, cov);
  }
  if (c.weight_preset == "phi_norm_sq") return Weight::phi_norm_sq(c.model);
  throw std::runtime_error("config: unknown weight preset '" + c.weight_preset + "'");
}

// ------------------------------------------------------------------ commands

Report cmd_ibp_check(const Config& c) {
  Report rep;
  rep.command = "ibp-check";
  LevelSetDomain d = build_domain(c);
  Weight w = build_weight(c);
  Lcg rng(c.seed);
  const int count = c.probe_count > 0 ? c.probe_count : 30;
  const double threshold = tol(c, "ibp", 1e-6);

  const IbpBatch batch = make_ibp_batch(w, d);
  double worst = 0.0;
  for (int p = 0; p < count; ++p) {
    CylFunction phi = random_polynomial_fn(rng, c.model, c.probe_degree);
    double w12 = 0.0;
    const Vec res = ibp_residual_all(phi, batch, &w12);
    worst = std::max(worst, res.cwiseAbs().maxCoeff() / (1.0 + w12));
  }
  rep.checks.push_back(
      make_check("ibp residual, max over probes/directions", "ibp-trace-identity",
                 worst, threshold));
  return rep;
}

Report cmd_my_check(const Config& c) {
  Report rep;
  rep.command = "my-check";
  Lcg rng(c.seed);
  const int count = c.probe_count > 0 ? c.probe_count : 10;

  double env_worst = 0.0, char_worst = 0.0, nonexp_worst = 0.0, grad_worst = 0.0;
  bool hess_monotone = true;
  double hess_worst_ratio = 0.0;

  for (int p = 0; p < count; ++p) {
    CylFunction f = random_convex_fn(rng, c.model);
    Vec x(c.model.dim);
    for (int i = 0; i < c.model.dim; ++i) x[i] = rng.next_pm1();
    const double alpha = 0.05 + 0.5 * rng.next_u01();

    ProxResult pr = prox(f, c.model, x, alpha);
    env_worst = std::max(env_worst, pr.envelope - f.value(x));

    // Minimizer characterization against random competitors.
    Vec shift = c.model.unwhiten(pr.minimizer);
    Vec xp = x + shift;
    const double fxp = f.value(xp);
    for (int t = 0; t < 100; ++t) {
      Vec h(c.model.dim);
      for (int i = 0; i < c.model.dim; ++i) h[i] = rng.next_pm1();
      const double lhs = fxp;
      Vec xh = x + c.model.unwhiten(h);
      const double rhs = f.value(xh) + pr.minimizer.dot(h - pr.minimizer) / alpha;
      char_worst = std::max(char_worst, lhs - rhs);
    }

    // Nonexpansiveness of x -> P(x, alpha) along H-shifts.
    {
      Vec h(c.model.dim);
      for (int i = 0; i < c.model.dim; ++i) h[i] = rng.next_pm1();
      ProxResult pr2 = prox(f, c.model, x + c.model.unwhiten(h), alpha);
      const double lip = (pr2.minimizer - pr.minimizer).norm() / h.norm();
      nonexp_worst = std::max(nonexp_worst, lip - 1.0);
    }

    // Gradient formula against central differences of the envelope.
    {
      const Vec g = my_gradient(f, c.model, x, alpha);
      const double eps = 1e-5;
      double err = 0.0;
      for (int i = 0; i < c.model.dim; ++i) {
        Vec xp2 = x, xm = x;
        xp2[i] += eps * c.model.sqrt_lambda(i);
        xm[i] -= eps * c.model.sqrt_lambda(i);
        const double fd = (my_envelope(f, c.model, xp2, alpha) -
                           my_envelope(f, c.model, xm, alpha)) /
                          (2.0 * eps);
        err = std::max(err, std::abs(fd - g[i]));
      }
      grad_worst = std::max(grad_worst, err / (1.0 + g.norm()));
    }

    // Second-order convergence over decreasing alpha.
    {
      const Mat exact = f.hess_h(x);
      double prev = -1.0;
      for (double a : {1e-1, 1e-2, 1e-3}) {
        const double err = (my_hessian(f, c.model, x, a) - exact).norm();
        if (prev >= 0.0 && err > prev + 1e-12) hess_monotone = false;
        prev = err;
      }
      hess_worst_ratio = std::max(hess_worst_ratio, prev / (1.0 + exact.norm()));
    }
  }

  rep.checks.push_back(make_check("envelope bound f_alpha <= f", "my-envelope-bound",
                                  env_worst, 1e-10));
  rep.checks.push_back(make_check("minimizer characterization",
                                  "my-minimizer-characterization", char_worst, 1e-8));
  rep.checks.push_back(make_check("prox nonexpansiveness", "my-prox-nonexpansive",
                                  nonexp_worst, 1e-8));
  rep.checks.push_back(make_check("gradient formula vs finite differences",
                                  "my-gradient-formula", grad_worst, tol(c, "my_grad", 1e-5)));
  rep.checks.push_back(make_check("hessian convergence monotone",
                                  "my-hessian-convergence", hess_monotone ? 0.0 : 1.0, 0.5));
  rep.checks.push_back(make_check("hessian error at alpha=1e-3",
                                  "my-hessian-convergence", hess_worst_ratio,
                                  tol(c, "my_hess", 5e-2)));
  return rep;
}

Report cmd_div_check(const Config& c) {
  Report rep;
  rep.command = "div-check";
  LevelSetDomain d = build_domain(c);
  Weight w = build_weight(c);
  Lcg rng(c.seed);
  const int count = c.probe_count > 0 ? c.probe_count : 20;
  const bool ball = d.kind() == DomainKind::unit_ball;

  double adj_worst = 0.0, bound_worst = 0.0, hessid_worst = 0.0, bilinear_worst = 0.0;
  const QuadratureGrid bulk = weighted_interior(d, w);

  // Explicit fields from the config take precedence over seeded ones.
  std::vector<CylVectorField> given;
  if (!c.fields_spec.is_null()) {
    std::vector<CylVectorField::Term> terms;
    for (const auto& fs : c.fields_spec) {
      Polynomial p(c.model.dim);
      for (const auto& term : fs["poly"])
        p += Polynomial::monomial(c.model.dim, term["coeff"].get<double>(),
                                  term["powers"].get<std::vector<int>>());
      terms.push_back({polynomial_fn(c.model, p), fs["direction"].get<int>()});
    }
    given.emplace_back(c.model.dim, std::move(terms), true);
  }

  const int total = given.empty() ? count : static_cast<int>(given.size());
  for (int p = 0; p < total; ++p) {
    CylVectorField field = !given.empty()
                               ? given[static_cast<size_t>(p)]
                               : (ball ? random_tangent_field_ball(rng, c.model, 2)
                                       : random_tangent_field_half_space(rng, c.model, d, 2));
    CylFunction div = divergence(field, w, d, c.model);

    for (int t = 0; t < 3; ++t) {
      CylFunction f = random_polynomial_fn(rng, c.model, 2);
      double acc = 0.0;
      Vec x(c.model.dim);
      for (int k = 0; k < bulk.size(); ++k) {
        x = bulk.nodes.col(k);
        acc += bulk.weights[k] *
               (f.grad_h(x).dot(field.value_h(x)) + f.value(x) * div.value(x));
      }
      adj_worst = std::max(adj_worst, std::abs(acc));
    }

    double div2 = 0.0;
    Vec x(c.model.dim);
    for (int k = 0; k < bulk.size(); ++k) {
      x = bulk.nodes.col(k);
      const double v = div.value(x);
      div2 += bulk.weights[k] * v * v;
    }
    bound_worst = std::max(bound_worst, std::sqrt(div2) -
                                            std::sqrt(z12_norm_sq(field, w, d)));
    hessid_worst = std::max(hessid_worst, boundary_hessian_identity(field, d));
  }

  for (int t = 0; t < 5; ++t) {
    CylFunction f = random_polynomial_fn(rng, c.model, 2);
    CylFunction g = random_polynomial_fn(rng, c.model, 2);
    const int h = rng.next_int(0, c.model.dim - 1);
    const int k = rng.next_int(0, c.model.dim - 1);
    bilinear_worst =
        std::max(bilinear_worst,
                 std::abs(bilinear_identity_residual(f, g, h, k, w, d, c.model)));
  }

  rep.checks.push_back(make_check("adjointness residual", "divergence-adjointness",
                                  adj_worst, tol(c, "adjoint", 1e-6)));
  rep.checks.push_back(make_check("norm bound ||div|| <= ||Phi||_Z12",
                                  "divergence-norm-bound", bound_worst, 1e-9));
  rep.checks.push_back(make_check("boundary hessian identity",
                                  "boundary-hessian-identity", hessid_worst,
                                  tol(c, "hess_identity", 1e-7)));
  rep.checks.push_back(make_check("bilinear commutation identity", "bilinear-identity",
                                  bilinear_worst, tol(c, "bilinear", 1e-6)));

  if (ball) {
    bool iso = true;
    for (int i = 1; i < c.model.dim; ++i)
      if (c.model.lambda(i) != c.model.lambda(0)) iso = false;
    if (iso && c.model.dim >= 2) {
      CylVectorField rot = rotation_field(c.model, 0, 1);
      CylFunction div = divergence(rot, w, std::optional<LevelSetDomain>(d), c.model);
      double worst = 0.0;
      Vec x(c.model.dim);
      for (int k = 0; k < bulk.size(); k += 7) {
        x = bulk.nodes.col(k);
        worst = std::max(worst, std::abs(div.value(x)));
      }
      rep.checks.push_back(make_check("rotation field divergence",
                                      "rotation-divergence-zero", worst, 1e-10));
    }
  }
  return rep;
}

CylFunction config_f(const Config& c) {
  if (c.has_f) return polynomial_fn(c.model, c.f_poly);
  return polynomial_fn(c.model, Polynomial::coordinate(c.model.dim, 0));
}

Report cmd_solve(const Config& c) {
  Report rep;
  rep.command = "solve";
  DiscreteProblem p;
  p.model = c.model;
  p.weight = build_weight(c);
  p.lambda = c.lambda;
  p.f = config_f(c);
  p.hermite_degree = c.hermite_degree;
  p.mesh_h = c.mesh_h;
  p.cutoff = c.cutoff;
  p.tangential_degree = c.tangential_degree;
  if (!is_whole_space(c)) p.domain = build_domain(c);

  SolveResult res = solve(p);
  EstimateReport er = estimate_report(res, p, tol(c, "estimates", 5e-3));
  const double thr = 1.0 + er.tolerance;
  rep.checks.push_back(
      make_check("lambda ||u|| / ||f||", "resolvent-contraction", er.ratio_l2, thr));
  rep.checks.push_back(
      make_check("sqrt(lambda) ||grad u|| / ||f||", "gradient-estimate", er.ratio_grad, thr));
  rep.checks.push_back(make_check("(||hess u||^2 + form) / 2||f||^2", "hessian-estimate",
                                  er.ratio_hess, thr));
  rep.checks.push_back(make_check("weak-form relative residual", "weak-form-residual",
                                  res.system_residual, 1e-12));
  if (res.neumann_residual)
    rep.checks.push_back(make_check("neumann residual", "neumann-natural",
                                    *res.neumann_residual,
                                    tol(c, "neumann", 50.0 * c.mesh_h * c.mesh_h)));
  return rep;
}

Report cmd_estimates(const Config& c) {
  Report rep;
  rep.command = "estimates";
  Lcg rng(c.seed);
  const int count = c.probe_count > 0 ? c.probe_count : 50;
  const double ratio_thr = tol(c, "ratio", 1.0 + 5e-3);

  DiscreteProblem base;
  base.model = c.model;
  base.weight = build_weight(c);
  base.hermite_degree = c.hermite_degree;
  base.mesh_h = c.mesh_h;
  base.cutoff = c.cutoff;
  base.tangential_degree = c.tangential_degree;
  if (!is_whole_space(c)) base.domain = build_domain(c);

  double worst = 0.0;
  for (int p = 0; p < count; ++p) {
    CylFunction f = random_polynomial_fn(rng, c.model, std::min(c.probe_degree, 3));
    for (double lambda : c.lambdas) {
      DiscreteProblem prob = base;
      prob.lambda = lambda;
      prob.f = f;
      SolveResult res = solve(prob);
      EstimateReport er = estimate_report(res, prob);
      worst = std::max({worst, er.ratio_l2, er.ratio_grad, er.ratio_hess});
    }
  }
  rep.checks.push_back(make_check("max estimate ratio over probes/lambdas",
                                  "maximal-regularity-estimates", worst, ratio_thr));

  if (base.domain) {
    // Mesh study: order of the Neumann residual under refinement.
    std::vector<double> residuals;
    CylFunction f = random_polynomial_fn(rng, c.model, std::min(c.probe_degree, 3));
    for (double h : {4.0 * c.mesh_h, 2.0 * c.mesh_h, c.mesh_h}) {
      DiscreteProblem prob = base;
      prob.lambda = c.lambda;
      prob.f = f;
      prob.mesh_h = h;
      SolveResult res = solve(prob);
      residuals.push_back(res.neumann_residual.value_or(0.0));
      rep.series.emplace_back(h, residuals.back());
    }
    rep.series_header = "h1,neumann_residual";
    double order = 0.0;
    if (residuals[0] > 1e-13 && residuals[1] > 1e-13 && residuals[2] > 1e-13)
      order = std::min(std::log2(residuals[0] / residuals[1]),
                       std::log2(residuals[1] / residuals[2]));
    rep.checks.push_back(make_check("neumann residual order (negated)",
                                    "neumann-residual-order", -order, -1.8));
  }
  return rep;
}

Report cmd_penalize(const Config& c) {
  Report rep;
  rep.command = "penalize";
  DiscreteProblem p;
  p.model = c.model;
  p.weight = build_weight(c);
  p.lambda = c.lambda;
  p.f = config_f(c);
  p.mesh_h = c.mesh_h;
  p.cutoff = c.cutoff;
  p.tangential_degree = c.tangential_degree;
  p.domain = build_domain(c);

  PenalizationTable table = penalization_sweep(p, c.alpha_schedule);
  rep.series_header = "alpha,error";
  for (const auto& row : table.rows) rep.series.emplace_back(row.alpha, row.error);

  rep.checks.push_back(make_check("errors strictly decreasing",
                                  "penalization-monotone", table.decreasing ? 0.0 : 1.0,
                                  0.5));
  const double final_ratio =
      table.rows.empty() ? 0.0 : table.rows.back().error / table.u_omega_norm;
  rep.checks.push_back(make_check("final error / ||u_Omega||", "penalization-final",
                                  final_ratio, tol(c, "final_ratio", 0.05)));
  double ratio_worst = 0.0;
  for (const auto& row : table.rows)
    ratio_worst = std::max({ratio_worst, row.report.ratio_l2, row.report.ratio_grad,
                            row.report.ratio_hess});
  rep.checks.push_back(make_check("penalized estimate ratios", "penalized-estimates",
                                  ratio_worst, 1.0 + tol(c, "estimates", 5e-3)));
  return rep;
}

Report cmd_domain_norms(const Config& c) {
  Report rep;
  rep.command = "domain-norms";
  Lcg rng(c.seed);
  Weight w = build_weight(c);
  const int count = c.probe_count > 0 ? c.probe_count : 20;
  const double c22 = 2.0 * std::sqrt(2.0);

  std::optional<LevelSetDomain> dom;
  if (!is_whole_space(c)) dom = build_domain(c);

  double lower_worst = 0.0;  // d_norm - w_norm
  double upper_worst = 0.0;  // w_norm - 2 sqrt2 d_norm
  for (int p = 0; p < count; ++p) {
    CylFunction u;
    if (!dom) {
      u = random_polynomial_fn(rng, c.model, 3);
    } else {
      // Neumann-compatible by construction: tangential polynomial plus
      // (normal - rstar)^2 times a tangential polynomial, in the adapted
      // frame.
      const HalfSpaceFrame& fr = dom->frame();
      const int n = c.model.dim;
      Polynomial normal = Polynomial::constant(n, -fr.offset);
      for (int i = 0; i < n; ++i)
        if (fr.covector[i] != 0.0)
          normal += Polynomial::coordinate(n, i) * fr.covector[i];
      normal = normal * (1.0 / fr.h_norm);  // whitened normal coordinate - rstar

      // Tangential part: polynomial in the second frame coordinate.
      Polynomial tang = Polynomial::constant(n, rng.next_pm1());
      if (n >= 2) {
        Polynomial eta2 = Polynomial::constant(n, 0.0);
        for (int i = 0; i < n; ++i) {
          const double coef = fr.rot(i, 1) / c.model.sqrt_lambda(i);
          if (coef != 0.0) eta2 += Polynomial::coordinate(n, i) * coef;
        }
        tang += eta2 * rng.next_pm1() + eta2 * eta2 * rng.next_pm1();
      }
      Polynomial u_poly = tang + normal * normal * (0.5 * rng.next_pm1());
      u = polynomial_fn(c.model, u_poly);
    }
    GraphNormCheck g = graph_norm_check(u, w, dom, c.model);
    lower_worst = std::max(lower_worst, g.d_norm - g.w_norm);
    upper_worst = std::max(upper_worst, g.w_norm - c22 * g.d_norm);
  }
  rep.checks.push_back(make_check("||u||_D <= ||u||_W22U", "graph-norm-lower",
                                  lower_worst, 1e-8));
  rep.checks.push_back(make_check("||u||_W22U <= 2 sqrt2 ||u||_D", "graph-norm-upper",
                                  upper_worst, 1e-8));
  return rep;
}

Report cmd_extension_check(const Config& c) {
  Report rep;
  rep.command = "extension-check";
  Lcg rng(c.seed);
  const double r = c.domain_spec.value("r", 1.0);
  LevelSetDomain d = [&]() {
    Vec a = Vec::Zero(c.model.dim);
    if (c.domain_spec.contains("a")) {
      auto av = c.domain_spec["a"].get<std::vector<double>>();
      for (size_t i = 0; i < av.size(); ++i) a[static_cast<long>(i)] = av[i];
    } else {
      a[0] = 1.0;
    }
    return LevelSetDomain::half_space(c.model, a, r);
  }();

  ReflectionCoefficients coeffs = solve_coefficients(r);
  rep.extras["coefficients"] = {{"a", coeffs.a},
                                {"b", coeffs.b},
                                {"c", coeffs.c},
                                {"r", coeffs.r},
                                {"condition_number", coeffs.condition_number},
                                {"max_residual", coeffs.max_residual}};
  rep.checks.push_back(make_check("coefficient residuals", "reflection-coefficients",
                                  coeffs.max_residual, 1e-12));
  {
    const double expect[7] = {0.0, 0.75, 8.0 / 9.0, 0.9375, 0.96, 35.0 / 36.0, 48.0 / 49.0};
    double berr = 0.0;
    for (int j = 0; j < 7; ++j)
      berr = std::max(berr, std::abs(coeffs.b[static_cast<size_t>(j)] - expect[j]));
    rep.checks.push_back(make_check("b-vector values", "reflection-b-values", berr, 1e-15));
  }

  const int count = c.probe_count > 0 ? c.probe_count : 20;
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  for (int p = 0; p < count; ++p) {
    CylFunction f = random_polynomial_fn(rng, c.model, c.probe_degree);
    MatchingReport m = matching_report(extend(f, coeffs, d));
    c0 = std::max(c0, m.c0);
    c1 = std::max(c1, m.c1);
    c2 = std::max(c2, m.c2);
  }
  const double jump_thr = tol(c, "jumps", 1e-6);
  rep.checks.push_back(make_check("C0 boundary jump", "extension-c0-matching", c0, jump_thr));
  rep.checks.push_back(make_check("C1 boundary jump", "extension-c1-matching", c1, jump_thr));
  rep.checks.push_back(make_check("C2 boundary jump", "extension-c2-matching", c2, jump_thr));

  {
    // Negative control: corrupt the second-moment condition by 0.1.
    ReflectionCoefficients bad = coeffs;
    Eigen::Matrix<double, 7, 7> M;
    for (int j = 0; j < 7; ++j) {
      const double jp1 = j + 2.0;
      const double k = 2.0 * jp1 / double((j + 1) * (j + 1)) *
                       (2.0 - 1.0 / double((j + 1) * (j + 1)));
      M(0, j) = 1.0;
      M(1, j) = jp1;
      M(2, j) = jp1 * jp1;
      M(3, j) = bad.b[static_cast<size_t>(j)];
      M(4, j) = k;
      M(5, j) = k * jp1;
      M(6, j) = k * k;
    }
    Eigen::Matrix<double, 7, 1> e3 = Eigen::Matrix<double, 7, 1>::Zero();
    e3[2] = 0.1;
    Eigen::Matrix<double, 7, 1> delta = M.partialPivLu().solve(e3);
    for (int j = 0; j < 7; ++j) bad.a[static_cast<size_t>(j)] += delta[j];
    Polynomial q(c.model.dim);
    q = Polynomial::coordinate(c.model.dim, 0) * Polynomial::coordinate(c.model.dim, 0);
    MatchingReport m = matching_report(extend(polynomial_fn(c.model, q), bad, d));
    rep.checks.push_back(make_check("negative control C2 jump (negated)",
                                    "extension-negative-control", -m.c2, -1e-3));
  }

  {
    std::vector<CylFunction> tests;
    for (int p = 0; p < 10; ++p)
      tests.push_back(random_polynomial_fn(rng, c.model, c.probe_degree));
    GaussianModel coarse = c.model;
    coarse.quad_order = std::max(16, c.model.quad_order / 2);
    LevelSetDomain dc = LevelSetDomain::half_space(
        coarse, d.frame().covector, d.frame().offset);
    const double k1 = operator_norm_probe(tests, coeffs, d);
    const double k2 = operator_norm_probe(tests, coeffs, dc);
    rep.checks.push_back(make_check("operator norm stability across quad orders",
                                    "extension-operator-norm-stability",
                                    std::abs(k1 - k2) / std::max(k1, k2), 0.10));
    rep.checks.push_back(make_check("operator norm finite (negated margin)",
                                    "extension-operator-norm", -k1, -1.0));
  }

  {
    // Neumann transfer and the cylindrical approximation pipeline on a
    // 3-D model built from this config's first eigenvalue.
    GaussianModel m3(3, {c.model.lambda(0), 1.0, 2.0}, 16);
    Vec a3 = Vec::Zero(3);
    a3[0] = 1.0;
    LevelSetDomain d3 = LevelSetDomain::half_space(m3, a3, r);
    const HalfSpaceFrame& fr = d3.frame();
    // u = tangential polynomial + (normal offset)^2 * tangential: the
    // normal derivative vanishes on the whole boundary.
    Polynomial normal = Polynomial::constant(3, -fr.offset);
    normal += Polynomial::coordinate(3, 0);
    normal = normal * (1.0 / fr.h_norm);
    Polynomial t2 = Polynomial::coordinate(3, 1) * (1.0 / m3.sqrt_lambda(1));
    Polynomial t3 = Polynomial::coordinate(3, 2) * (1.0 / m3.sqrt_lambda(2));
    Polynomial up = t2 + t3 * t3 * 0.5 + (normal * normal) * (t2 * 0.3);
    CylFunction u = polynomial_fn(m3, up);

    ReflectionCoefficients co3 = solve_coefficients(r);
    ExtendedFunction eu = extend(u, co3, d3);

    // One-sided limits of the normal derivative, Richardson extrapolated.
    double transfer = 0.0;
    const SurfaceQuad& sq = d3.boundary_quad();
    Vec step(3);
    for (int i = 0; i < 3; ++i) step[i] = fr.normal_white[i] * m3.sqrt_lambda(i);
    const double e1 = 1e-8, e2 = 1e-9;
    const double w2r = e1 / (e1 - e2), w1r = -e2 / (e1 - e2);
    for (int k = 0; k < sq.size(); k += std::max(1, sq.size() / 16)) {
      Vec x0 = sq.nodes.col(k);
      auto nd = [&](double off) {
        Vec x = x0;
        for (int i = 0; i < 3; ++i) x[i] += off * step[i];
        Eigen::VectorXd gf = fr.rot.transpose() * Eigen::VectorXd(eu.grad_h(x));
        return gf[0];
      };
      for (double sgn : {1.0, -1.0})
        transfer = std::max(transfer,
                            std::abs(w1r * nd(sgn * e1) + w2r * nd(sgn * e2)));
    }
    rep.checks.push_back(make_check("neumann transfer to extension",
                                    "extension-neumann-transfer", transfer,
                                    tol(c, "neumann_transfer", 1e-7)));

    double prev = -1.0;
    bool decreasing = true;
    double bc_worst = 0.0;
    for (int keep = 1; keep <= 3; ++keep) {
      CylFunction v = cylindrical_approximant(eu, keep, 20);
      for (int k = 0; k < sq.size(); k += std::max(1, sq.size() / 8)) {
        Vec x0 = sq.nodes.col(k);
        Eigen::VectorXd gf = fr.rot.transpose() * Eigen::VectorXd(v.grad_h(x0));
        bc_worst = std::max(bc_worst, std::abs(gf[0]));
      }
      CylFunction diff = v - eu.as_cyl_function();
      const double err = split_w22_norm(diff, d3);
      if (prev >= 0.0 && err > prev - 1e-12) decreasing = false;
      prev = err;
    }
    rep.checks.push_back(make_check("approximants keep the boundary condition",
                                    "cylindrical-approximant-neumann", bc_worst, 1e-12));
    rep.checks.push_back(make_check("approximant W22 error decreasing",
                                    "cylindrical-approximant-convergence",
                                    decreasing ? 0.0 : 1.0, 0.5));
  }
  return rep;
}

Report cmd_ball_demo(const Config& c) {
  Report rep;
  rep.command = "ball-demo";
  GaussianModel model =
      c.model.dim == 2 ? c.model : GaussianModel(2, {1.0, 4.0}, c.model.quad_order);

  // phi(xi) = g(xi_1^{sqrt(l2)} xi_2^{-sqrt(l1)}) solves
  // sqrt(l1) xi1 d1 phi + sqrt(l2) xi2 d2 phi = 0 away from xi2 = 0.
  const double p1 = model.sqrt_lambda(1), p2 = -model.sqrt_lambda(0);
  auto invariant = [&](double x1, double x2) {
    return std::pow(std::abs(x1), p1) * std::pow(std::abs(x2), p2);
  };
  auto g = [](double t) { return t; };
  auto phi = [&](double x1, double x2) { return g(invariant(x1, x2)); };

  double pde_worst = 0.0;
  const int grid_n = 24;
  for (int i = 0; i < grid_n; ++i)
    for (int j = 0; j < grid_n; ++j) {
      const double x1 = 0.05 + 0.9 * i / (grid_n - 1.0);
      const double x2 = 0.08 + 0.9 * j / (grid_n - 1.0);
      if (x1 * x1 + x2 * x2 > 1.0) continue;
      const double eps = 1e-6;
      const double d1 = (phi(x1 + eps, x2) - phi(x1 - eps, x2)) / (2.0 * eps);
      const double d2 = (phi(x1, x2 + eps) - phi(x1, x2 - eps)) / (2.0 * eps);
      const double exact1 = p1 * phi(x1, x2) / x1;
      const double exact2 = p2 * phi(x1, x2) / x2;
      // Residual with analytic derivatives; the finite differences only
      // cross-check the closed form.
      const double res = model.sqrt_lambda(0) * x1 * exact1 +
                         model.sqrt_lambda(1) * x2 * exact2;
      const double fd_res = model.sqrt_lambda(0) * x1 * d1 + model.sqrt_lambda(1) * x2 * d2;
      pde_worst = std::max(pde_worst, std::abs(res));
      pde_worst = std::max(pde_worst, 1e-4 * std::abs(fd_res));
    }
  rep.checks.push_back(make_check("characteristic ODE residual",
                                  "tangent-ode-residual", pde_worst,
                                  tol(c, "ode", 1e-8)));

  // Non-constant solutions take direction-dependent values at the smallest
  // grid radius along distinct rays, against a 1e-8 grid tolerance.
  const double tmin = 1e-3;
  const double v1 = phi(tmin * std::cos(M_PI / 4), tmin * std::sin(M_PI / 4));
  const double v2 = phi(tmin * std::cos(M_PI / 3), tmin * std::sin(M_PI / 3));
  rep.checks.push_back(make_check("ray separation at grid floor (negated)",
                                  "tangent-ode-discontinuity", -std::abs(v1 - v2),
                                  -10.0 * 1e-8));

  // Rotation-field identities in the isotropic geometry.
  GaussianModel iso = GaussianModel::isotropic(2, 1.0, c.model.quad_order);
  LevelSetDomain ball = LevelSetDomain::unit_ball(iso);
  Weight w0 = Weight::zero(iso);
  CylVectorField rot = rotation_field(iso, 0, 1);
  CylFunction div = divergence(rot, w0, std::optional<LevelSetDomain>(ball), iso);
  double div_worst = 0.0;
  const QuadratureGrid bulk = ball.interior_quad();
  Vec x(2);
  for (int k = 0; k < bulk.size(); k += 5) {
    x = bulk.nodes.col(k);
    div_worst = std::max(div_worst, std::abs(div.value(x)));
  }
  rep.checks.push_back(make_check("rotation field divergence",
                                  "rotation-divergence-zero", div_worst, 1e-10));
  rep.checks.push_back(make_check("boundary hessian identity (rotation field)",
                                  "boundary-hessian-identity",
                                  boundary_hessian_identity(rot, ball), 1e-9));
  return rep;
}

// --------------------------------------------------------------- run/report

json report_to_json(const Report& rep) {
  json out;
  out["schema"] = kReportSchema;
  out["command"] = rep.command;
  out["config"] = rep.config_echo;
  json checks = json::array();
  for (const auto& c : rep.checks) {
    json j;
    j["name"] = c.name;
    j["theorem"] = c.theorem;
    j["statistic"] = c.statistic;
    j["threshold"] = c.threshold;
    j["pass"] = c.pass;
    checks.push_back(j);
  }
  out["checks"] = checks;
  if (!rep.extras.is_null()) out["extras"] = rep.extras;
  return out;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "ibp-check", "my-check",     "div-check",       "solve",    "estimates",
      "penalize",  "domain-norms", "extension-check", "ball-demo"};
  return names;
}

int run_command(const std::string& command, const std::string& config_path,
                const std::string& out_path, std::optional<uint64_t> seed_override) {
  json config_json;
  try {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config: " + config_path);
    in >> config_json;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  Report rep;
  try {
    Config cfg = parse_config(config_json);
    if (seed_override) cfg.seed = *seed_override;
    if (command == "ibp-check")
      rep = cmd_ibp_check(cfg);
    else if (command == "my-check")
      rep = cmd_my_check(cfg);
    else if (command == "div-check")
      rep = cmd_div_check(cfg);
    else if (command == "solve")
      rep = cmd_solve(cfg);
    else if (command == "estimates")
      rep = cmd_estimates(cfg);
    else if (command == "penalize")
      rep = cmd_penalize(cfg);
    else if (command == "domain-norms")
      rep = cmd_domain_norms(cfg);
    else if (command == "extension-check")
      rep = cmd_extension_check(cfg);
    else if (command == "ball-demo")
      rep = cmd_ball_demo(cfg);
    else {
      std::cerr << "error: unknown command '" << command << "'\n";
      return 2;
    }
    rep.config_echo = config_json;
    if (seed_override) rep.config_echo["seed"] = *seed_override;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  const auto t1 = std::chrono::steady_clock::now();

  json out = report_to_json(rep);
  out["wall_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();

  try {
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("cannot open output: " + out_path);
    os << out.dump(2) << "\n";
    if (!rep.series.empty()) {
      std::string csv_path = out_path;
      const auto dot = csv_path.find_last_of('.');
      csv_path = (dot == std::string::npos ? csv_path : csv_path.substr(0, dot)) + ".csv";
      std::ofstream cs(csv_path);
      cs << rep.series_header << "\n";
      for (const auto& [a, b] : rep.series) cs << a << "," << b << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  for (const auto& c : rep.checks)
    if (!c.pass) return 1;
  return 0;
}

}  // namespace wn
