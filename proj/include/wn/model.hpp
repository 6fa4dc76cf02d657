#pragma once

#include <vector>

#include "wn/types.hpp"

namespace wn {

/// Finite-dimensional Gaussian measure mu = N(0, diag(lambda_1..lambda_n))
/// together with its Cameron-Martin structure.
///
/// Conventions used throughout the library:
///  - the H-orthonormal basis is { h_i = sqrt(lambda_i) e_i };
///  - H-vectors are stored by their coordinates in that basis, so the
///    H-inner product of two coordinate vectors is the Euclidean dot;
///  - partial derivatives "d_i" are taken along h_i, i.e. sqrt(lambda_i)
///    times the ambient partial;
///  - the functional hat(h_i) evaluates as x_i / sqrt(lambda_i);
///  - "whitened" coordinates z_i = x_i / sqrt(lambda_i) turn mu into the
///    standard Gaussian and the H-metric into the Euclidean one.
struct GaussianModel {
  int dim = 1;
  std::vector<double> spectrum;  // covariance eigenvalues, all > 0
  int quad_order = 40;           // Gauss-Hermite points per axis

  GaussianModel() = default;
  GaussianModel(int n, std::vector<double> lambda, int order = 40);

  static GaussianModel isotropic(int n, double lambda = 1.0, int order = 40);

  double lambda(int i) const { return spectrum[static_cast<size_t>(i)]; }
  double sqrt_lambda(int i) const;

  Vec whiten(const Vec& x) const;    // z_i = x_i / sqrt(lambda_i)
  Vec unwhiten(const Vec& z) const;  // x_i = sqrt(lambda_i) z_i

  /// H-coordinates of an H-vector given in ambient coordinates.
  Vec to_h_coords(const Vec& ambient) const { return whiten(ambient); }
  /// Ambient coordinates of an H-vector given in H-coordinates.
  Vec to_ambient(const Vec& h_coords) const { return unwhiten(h_coords); }

  double hhat(int i, const Vec& x) const { return x[i] / sqrt_lambda(i); }

  /// Density of the standard Gaussian in whitened coordinates; this is the
  /// weight of the Hausdorff-Gauss surface measure in those coordinates.
  double whitened_density(const Vec& x) const;
};

/// <h,k>_H = sum h_i k_i / lambda_i for vectors in ambient coordinates.
double cm_inner(const Vec& h, const Vec& k, const GaussianModel& model);

double cm_norm(const Vec& h, const GaussianModel& model);

}  // namespace wn
