#pragma once

#include <memory>
#include <optional>

#include "wn/cyl_function.hpp"
#include "wn/model.hpp"
#include "wn/quadrature.hpp"

namespace wn {

enum class DomainKind { half_space, unit_ball, custom };

/// Boundary rule on G^{-1}(0) for the Hausdorff-Gauss measure rho. In
/// whitened coordinates rho is the standard Gaussian density times the
/// Euclidean surface measure; that normalization is validated through the
/// integration-by-parts residuals. Per-node level-set data is precomputed.
struct SurfaceQuad {
  Eigen::MatrixXd nodes;     // dim x N, ambient
  Eigen::VectorXd weights;   // rho-weights
  Eigen::MatrixXd grad_G;    // dim x N, H-coordinates of grad_H G
  Eigen::VectorXd grad_norm; // |grad_H G|_H per node
  std::vector<Mat> hess_G;   // H-Hessian of G per node

  int size() const { return static_cast<int>(weights.size()); }
};

struct HalfSpaceFrame {
  Vec covector;           // ambient a, G(x) = a.x - r
  double offset = 0.0;    // r
  Vec normal_white;       // unit normal in whitened coordinates
  Eigen::MatrixXd rot;    // whitened rotation, columns = [normal, tangentials]
  double rstar = 0.0;     // boundary position of the normal coordinate
  double h_norm = 0.0;    // |h_a|_H
};

/// Sublevel-set domain Omega = G^{-1}(-inf, 0].
class LevelSetDomain {
 public:
  static LevelSetDomain half_space(const GaussianModel& model, const Vec& a, double r);
  static LevelSetDomain unit_ball(const GaussianModel& model);
  static LevelSetDomain custom(const GaussianModel& model, CylFunction G);

  DomainKind kind() const;
  const GaussianModel& model() const;
  const CylFunction& G() const;
  const HalfSpaceFrame& frame() const;  // half_space only

  bool contains(const Vec& x) const;  // G(x) <= 0

  /// Bulk rule on Omega against mu (half-space n<=4, ball n<=2).
  const QuadratureGrid& interior_quad() const;
  /// Boundary rule for rho; throws "no surface rule" when unavailable.
  const SurfaceQuad& boundary_quad() const;

  /// Gaussian density in whitened coordinates (the surface-measure weight).
  double surface_density(const Vec& x) const;

  /// Distance along H from x to Omega and the minimizing shift h* (as
  /// H-coordinates), so that x - h* lies in Omega and d = |h*|_H.
  double dh_distance(const Vec& x) const;
  Vec dh_project(const Vec& x) const;

  /// Gradient (H-coordinates) of x -> d_H(x, Omega); zero inside Omega.
  Vec dh_distance_grad(const Vec& x) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Integral of g against rho on G^{-1}(0).
double surface_integrate(const LevelSetDomain& d, const CylFunction& g);
double surface_integrate(const LevelSetDomain& d, const std::function<double(const Vec&)>& g);

/// Trace as literal restriction: values of f at the boundary nodes.
Eigen::VectorXd trace_restrict(const CylFunction& f, const LevelSetDomain& d);

class Weight;

/// Interior rule against exp(-U) mu. Weights with an H-Lipschitz gradient
/// reuse the Gauss-Hermite grid; faster-growing weights get a composite
/// Gauss-Legendre rule whose spans follow the decay of exp(-U) mu, since
/// Gauss-Hermite converges poorly against such tails.
QuadratureGrid weighted_interior(const LevelSetDomain& d, const Weight& w);

/// Boundary rule with exp(-U) folded into the weights (same adaptivity).
SurfaceQuad weighted_boundary(const LevelSetDomain& d, const Weight& w);

/// Whole-space rule against exp(-U) mu (same adaptivity; n <= 3 for the
/// adaptive path).
QuadratureGrid weighted_whole_grid(const GaussianModel& model, const Weight& w);

}  // namespace wn
