#pragma once

#include <functional>

#include "wn/cyl_function.hpp"
#include "wn/model.hpp"

namespace wn {

/// Nodes are columns; weights sum to the measure of the integration region.
struct QuadratureGrid {
  Eigen::MatrixXd nodes;    // dim x N, ambient coordinates
  Eigen::VectorXd weights;  // N

  int size() const { return static_cast<int>(weights.size()); }
  Vec node(int k) const { return nodes.col(k); }
};

/// Gauss-Hermite rule for N(0,1): integrates polynomials of degree
/// 2*order - 1 exactly against the standard Gaussian.
void gauss_hermite(int order, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

/// Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int order, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

/// Tensor Gauss-Hermite grid for mu; rejects dim > 4 rather than subsample.
QuadratureGrid tensor_mu_grid(const GaussianModel& model);

/// Composite Gauss-Legendre rule against the 1-D standard Gaussian density
/// on [lo, hi]; panel width <= panel and points_per_panel points per panel.
void gaussian_segment_rule(double lo, double hi, double panel, int points_per_panel,
                           Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

double integrate(const QuadratureGrid& grid, const std::function<double(const Vec&)>& f);

/// Sum w_k f(node_k); throws "non-integrable sample" on non-finite values.
double integrate_mu(const CylFunction& f, const GaussianModel& model);

/// Grid with weights multiplied by exp(-U(node)); reused across integrands.
QuadratureGrid apply_weight(const QuadratureGrid& grid, const CylFunction& U);

}  // namespace wn
