#pragma once

#include <array>
#include <vector>

#include "wn/domains.hpp"
#include "wn/solver.hpp"

namespace wn {

/// Coefficients of the seven-term Gaussian reflection operator for the
/// half-space G(x) = a.x - r <= 0:
///   b_j = 1 - 1/j^2,   c_j = 2(j+1) r / j^2 * (2 - 1/j^2),
/// and a_j solving the moment conditions. Since c_j is linear in r, the
/// three c-conditions reduce to r-independent conditions on k_j = c_j / r,
/// so a single a-vector serves every r != 0; at r = 0 the c-conditions
/// vanish and the minimum-norm solution of the remaining four is used.
struct ReflectionCoefficients {
  std::array<double, 7> a{};
  std::array<double, 7> b{};
  std::array<double, 7> c{};
  double r = 0.0;
  double condition_number = 0.0;  // of the 7x7 system (r != 0)
  double max_residual = 0.0;      // largest constraint violation
};

ReflectionCoefficients solve_coefficients(double r);

/// Extension of f from Omega to the whole space by weighted reflections:
/// value, H-gradient and H-Hessian implement the two-branch formula with
/// its exact derivatives. Restriction to Omega is f itself, with matching
/// derivatives.
class ExtendedFunction {
 public:
  ExtendedFunction(const CylFunction& f, const ReflectionCoefficients& coeffs,
                   const LevelSetDomain& half_space);

  const CylFunction& as_cyl_function() const { return ef_; }
  const CylFunction& original() const { return f_; }
  const LevelSetDomain& domain() const { return domain_; }

  double value(const Vec& x) const { return ef_.value(x); }
  Vec grad_h(const Vec& x) const { return ef_.grad_h(x); }
  Mat hess_h(const Vec& x) const { return ef_.hess_h(x); }

 private:
  CylFunction f_;
  CylFunction ef_;
  LevelSetDomain domain_;
};

ExtendedFunction extend(const CylFunction& f, const ReflectionCoefficients& coeffs,
                        const LevelSetDomain& half_space);

/// Largest boundary jumps of the value, first and second derivatives,
/// estimated from one-sided differences at two offsets with Richardson
/// extrapolation over a set of boundary probe points.
struct MatchingReport {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

MatchingReport matching_report(const ExtendedFunction& ef, int probes = 16);

/// Max over the test set of ||Ef||_{W^{2,2}(X,mu)} / ||f||_{W^{2,2}(Omega,mu)}.
/// Whole-space norms split the integral at the boundary so each branch is
/// integrated where it is smooth.
double operator_norm_probe(const std::vector<CylFunction>& test_set,
                           const ReflectionCoefficients& coeffs,
                           const LevelSetDomain& half_space);

/// W^{2,2}(X, mu) norm of a function that is smooth on each side of the
/// half-space boundary.
double split_w22_norm(const CylFunction& g, const LevelSetDomain& half_space);

/// Cylindrical approximant of Ef by conditional expectation: keeps the
/// first keep_coords coordinates of the adapted frame (normal first) and
/// averages the rest out against mu.
CylFunction cylindrical_approximant(const ExtendedFunction& ef, int keep_coords,
                                    int quad_order = 32);

}  // namespace wn
