#include "wn/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace wn {

namespace {

// Golub-Welsch: nodes/weights from the symmetric Jacobi matrix of the
// orthogonal-polynomial recurrence.
void golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag,
                  double total_mass, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  const int n = static_cast<int>(diag.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    J(i, i) = diag[i];
    if (i + 1 < n) {
      J(i, i + 1) = offdiag[i];
      J(i + 1, i) = offdiag[i];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes = es.eigenvalues();
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v = es.eigenvectors()(0, i);
    weights[i] = total_mass * v * v;
  }
}

}  // namespace

void gauss_hermite(int order, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  if (order < 1) throw std::invalid_argument("quadrature order must be positive");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd off(order - 1 > 0 ? order - 1 : 0);
  for (int k = 1; k < order; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
  golub_welsch(diag, off, 1.0, nodes, weights);
}

void gauss_legendre(int order, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  if (order < 1) throw std::invalid_argument("quadrature order must be positive");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd off(order - 1 > 0 ? order - 1 : 0);
  for (int k = 1; k < order; ++k)
    off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  golub_welsch(diag, off, 2.0, nodes, weights);
}

QuadratureGrid tensor_mu_grid(const GaussianModel& model) {
  if (model.dim > 4)
    throw std::runtime_error("tensor grid rejected: dimension exceeds 4");
  Eigen::VectorXd n1, w1;
  gauss_hermite(model.quad_order, n1, w1);
  const int q = model.quad_order;
  long total = 1;
  for (int i = 0; i < model.dim; ++i) total *= q;

  QuadratureGrid grid;
  grid.nodes.resize(model.dim, total);
  grid.weights.resize(total);
  std::vector<int> idx(static_cast<size_t>(model.dim), 0);
  for (long k = 0; k < total; ++k) {
    double w = 1.0;
    for (int i = 0; i < model.dim; ++i) {
      grid.nodes(i, k) = n1[idx[static_cast<size_t>(i)]] * model.sqrt_lambda(i);
      w *= w1[idx[static_cast<size_t>(i)]];
    }
    grid.weights[k] = w;
    for (int i = 0; i < model.dim; ++i) {
      if (++idx[static_cast<size_t>(i)] < q) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return grid;
}

void gaussian_segment_rule(double lo, double hi, double panel, int points_per_panel,
                           Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  if (!(hi > lo)) throw std::invalid_argument("empty integration segment");
  Eigen::VectorXd gl_n, gl_w;
  gauss_legendre(points_per_panel, gl_n, gl_w);
  const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / panel)));
  const double h = (hi - lo) / panels;
  const int total = panels * points_per_panel;
  nodes.resize(total);
  weights.resize(total);
  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
  int k = 0;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * h;
    for (int j = 0; j < points_per_panel; ++j, ++k) {
      const double x = a + 0.5 * h * (gl_n[j] + 1.0);
      nodes[k] = x;
      weights[k] = 0.5 * h * gl_w[j] * inv_sqrt2pi * std::exp(-0.5 * x * x);
    }
  }
}

double integrate(const QuadratureGrid& grid, const std::function<double(const Vec&)>& f) {
  double s = 0.0;
  Vec x(grid.nodes.rows());
  for (int k = 0; k < grid.size(); ++k) {
    x = grid.nodes.col(k);
    s += grid.weights[k] * f(x);
  }
  return s;
}

double integrate_mu(const CylFunction& f, const GaussianModel& model) {
  for (int c : f.active())
    if (c < 0 || c >= model.dim)
      throw std::invalid_argument("active coordinate out of range");
  const QuadratureGrid grid = tensor_mu_grid(model);
  double s = 0.0;
  Vec x(model.dim);
  for (int k = 0; k < grid.size(); ++k) {
    x = grid.nodes.col(k);
    const double v = f.value(x);
    if (!std::isfinite(v)) throw std::runtime_error("non-integrable sample");
    s += grid.weights[k] * v;
  }
  return s;
}

QuadratureGrid apply_weight(const QuadratureGrid& grid, const CylFunction& U) {
  QuadratureGrid out = grid;
  Vec x(grid.nodes.rows());
  for (int k = 0; k < grid.size(); ++k) {
    x = grid.nodes.col(k);
    out.weights[k] *= std::exp(-U.value(x));
  }
  return out;
}

}  // namespace wn
