#pragma once

#include <optional>
#include <string>

#include "wn/cyl_function.hpp"
#include "wn/domains.hpp"

namespace wn {

/// Convex weight U defining nu = exp(-U) mu.
class Weight {
 public:
  static Weight zero(const GaussianModel& model);
  /// U(x) = c.x (ambient covector).
  static Weight linear(const GaussianModel& model, const Vec& covector);
  /// U(x) = Phi(|x|_X^2) with Phi(s) = s^2/2.
  static Weight phi_norm_sq(const GaussianModel& model);
  static Weight custom(CylFunction u, std::optional<double> grad_lip = {});

  const CylFunction& U() const { return u_; }
  bool is_zero() const { return is_zero_; }
  std::optional<double> grad_lipschitz() const { return grad_lip_; }

 private:
  CylFunction u_;
  bool is_zero_ = false;
  std::optional<double> grad_lip_;
};

struct ProxResult {
  Vec minimizer;        // P(x, alpha), H-coordinates
  double envelope;      // f_alpha(x)
  int iterations;
  double kkt_residual;  // H-norm of the stationarity residual
};

/// Moreau-Yosida prox along H: minimizes h -> f(x+h) + |h|_H^2 / (2 alpha).
/// Newton with Armijo backtracking, gradient-descent fallback. Throws
/// "prox non-convergent" past 500 iterations and "convexity violated" when
/// negative curvature shows up along a step.
ProxResult prox(const CylFunction& f, const GaussianModel& model, const Vec& x, double alpha);

/// grad_H f_alpha(x) = -P(x, alpha) / alpha, in H-coordinates.
Vec my_gradient(const CylFunction& f, const GaussianModel& model, const Vec& x, double alpha);

/// Hessian of f_alpha from the fixed-point relation
///   hess f_alpha = hess f(x+P) (I - alpha hess f_alpha),
/// solved as the linear system (I + alpha A) X = A with A = hess f(x+P).
Mat my_hessian(const CylFunction& f, const GaussianModel& model, const Vec& x, double alpha);

/// Envelope value f_alpha(x).
double my_envelope(const CylFunction& f, const GaussianModel& model, const Vec& x, double alpha);

/// Penalized weight V_alpha(x) = U_alpha(x) + d_H^2(x, Omega) / (2 alpha).
/// The Hessian evaluator uses central differences of the gradient.
class PenalizedWeight {
 public:
  PenalizedWeight(const Weight& base, const LevelSetDomain& domain, double alpha);

  double alpha() const { return alpha_; }
  const Weight& base() const { return base_; }
  const LevelSetDomain& domain() const { return domain_; }

  double value(const Vec& x) const;
  Vec grad_h(const Vec& x) const;
  Mat hess_h(const Vec& x) const;

  /// View as a CylFunction (Hessian via finite differences of the gradient).
  CylFunction as_cyl_function() const;

 private:
  Weight base_;
  LevelSetDomain domain_;
  double alpha_;
};

PenalizedWeight penalized(const Weight& w, const LevelSetDomain& d, double alpha);

}  // namespace wn
