#include "wn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace wn {

GaussianModel::GaussianModel(int n, std::vector<double> lambda, int order)
    : dim(n), spectrum(std::move(lambda)), quad_order(order) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("dimension out of range");
  if (static_cast<int>(spectrum.size()) != dim)
    throw std::invalid_argument("spectrum size does not match dimension");
  for (double l : spectrum)
    if (!(l > 0.0)) throw std::invalid_argument("covariance eigenvalues must be positive");
  if (quad_order < 2) throw std::invalid_argument("quad_order must be at least 2");
}

GaussianModel GaussianModel::isotropic(int n, double lambda, int order) {
  return GaussianModel(n, std::vector<double>(static_cast<size_t>(n), lambda), order);
}

double GaussianModel::sqrt_lambda(int i) const {
  return std::sqrt(spectrum[static_cast<size_t>(i)]);
}

Vec GaussianModel::whiten(const Vec& x) const {
  Vec z(dim);
  for (int i = 0; i < dim; ++i) z[i] = x[i] / sqrt_lambda(i);
  return z;
}

Vec GaussianModel::unwhiten(const Vec& z) const {
  Vec x(dim);
  for (int i = 0; i < dim; ++i) x[i] = z[i] * sqrt_lambda(i);
  return x;
}

double GaussianModel::whitened_density(const Vec& x) const {
  double q = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double z = x[i] / sqrt_lambda(i);
    q += z * z;
  }
  const double norm = std::pow(2.0 * M_PI, -0.5 * dim);
  return norm * std::exp(-0.5 * q);
}

double cm_inner(const Vec& h, const Vec& k, const GaussianModel& model) {
  if (h.size() != model.dim || k.size() != model.dim)
    throw std::invalid_argument("dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < model.dim; ++i) s += h[i] * k[i] / model.lambda(i);
  return s;
}

double cm_norm(const Vec& h, const GaussianModel& model) {
  return std::sqrt(cm_inner(h, h, model));
}

}  // namespace wn
