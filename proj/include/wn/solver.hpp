#pragma once

#include <optional>
#include <vector>

#include "wn/divergence.hpp"
#include "wn/domains.hpp"
#include "wn/weights.hpp"

namespace wn {

/// Sobolev norm pieces of a function against a weighted Gaussian measure.
struct Norms {
  double l2 = 0.0;        // ||u||_{L^2}
  double grad = 0.0;      // ||grad_H u||_{L^2}
  double hess = 0.0;      // ||hess_H u||_{L^2(HS)}
  double hess_form = 0.0; // int <hess_H U grad u, grad u> dnu

  double w12_sq() const { return l2 * l2 + grad * grad; }
  double w22_sq() const { return w12_sq() + hess * hess; }
  double w22u_sq() const { return w22_sq() + hess_form; }
};

/// lambda u - L u = f, weak form over the whole space or a half-space.
/// Whole space: spectral Hermite-Galerkin of total degree hermite_degree.
/// Half-space: conservative finite differences in the whitened normal
/// coordinate (mesh_h, left cutoff at -cutoff) tensorized with Hermite
/// polynomials of degree tangential_degree in the tangential coordinates;
/// the Neumann condition at the boundary is natural (zero flux), the
/// condition at the cutoff is the homogeneous natural one.
struct DiscreteProblem {
  GaussianModel model;
  Weight weight;
  std::optional<PenalizedWeight> penalty;  // when set, replaces weight by V_alpha
  std::optional<LevelSetDomain> domain;    // empty = whole space
  double lambda = 1.0;
  CylFunction f;
  int hermite_degree = 12;
  double mesh_h = 0.025;
  double cutoff = 8.5;
  int tangential_degree = 10;
};

struct SolveResult {
  CylFunction u;
  Norms norms;
  double f_norm = 0.0;
  std::optional<double> neumann_residual;  // rho-mean-square of the one-sided
                                           // second-order normal derivative
  int dofs = 0;
  double system_residual = 0.0;  // relative residual of the linear solve
};

/// L u = sum_i (d_ii u - d_i u d_i U - d_i u hat(h_i)) over active
/// coordinates; value and gradient evaluators only.
CylFunction apply_L(const CylFunction& u, const Weight& w, const GaussianModel& model);

SolveResult solve(const DiscreteProblem& p);

/// Assembled discretization reused across (lambda, f) pairs; the lambda and
/// f fields of the seed problem are ignored at construction.
class SolverHandle {
 public:
  explicit SolverHandle(const DiscreteProblem& base);
  ~SolverHandle();
  SolverHandle(SolverHandle&&) noexcept;
  SolveResult solve(double lambda, const CylFunction& f) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct EstimateReport {
  double ratio_l2 = 0.0;    // lambda ||u|| / ||f||
  double ratio_grad = 0.0;  // sqrt(lambda) ||grad u|| / ||f||
  double ratio_hess = 0.0;  // (||hess u||^2 + hess_form) / (2 ||f||^2)
  double tolerance = 5e-3;
  bool pass = false;
};

EstimateReport estimate_report(const SolveResult& res, const DiscreteProblem& p,
                               double tolerance = 5e-3);

struct GraphNormCheck {
  double d_norm = 0.0;   // sqrt(||u||^2 + ||Lu||^2)
  double w_norm = 0.0;   // W^{2,2}_U norm
  double neumann_defect = 0.0;
  bool lower_ok = false;  // d_norm <= w_norm (quadrature slack)
  bool upper_ok = false;  // w_norm <= 2*sqrt(2)*d_norm
};

/// Requires the Neumann condition at boundary nodes within 1e-8 for domain
/// problems; otherwise rejects the input.
GraphNormCheck graph_norm_check(const CylFunction& u, const Weight& w,
                                const std::optional<LevelSetDomain>& d,
                                const GaussianModel& model);

struct PenalizationRow {
  double alpha = 0.0;
  double error = 0.0;  // ||u_alpha - u_Omega||_{L^2(Omega,nu)}
  EstimateReport report;
};

struct PenalizationTable {
  std::vector<PenalizationRow> rows;
  double u_omega_norm = 0.0;
  bool decreasing = false;
};

/// Solves the penalized whole-space problems over the alpha schedule and
/// compares against the direct half-space solve. The normal mesh refines
/// like sqrt(alpha) so the boundary layer of exp(-V_alpha) stays resolved.
PenalizationTable penalization_sweep(const DiscreteProblem& p,
                                     const std::vector<double>& alphas);

/// Sobolev norms of u by quadrature against exp(-U) mu over the domain (or
/// the whole space when d is empty).
Norms compute_norms(const CylFunction& u, const Weight& w,
                    const std::optional<LevelSetDomain>& d, const GaussianModel& model);

/// L^2(nu) norm over the same region.
double l2_norm(const CylFunction& u, const Weight& w,
               const std::optional<LevelSetDomain>& d, const GaussianModel& model);

}  // namespace wn
