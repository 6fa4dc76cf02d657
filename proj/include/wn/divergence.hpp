#pragma once

#include <optional>
#include <vector>

#include "wn/domains.hpp"
#include "wn/weights.hpp"

namespace wn {

/// Finitely supported H-valued field Phi = sum_i phi_i h_{dir_i} with
/// distinct direction indices into the H-orthonormal basis.
class CylVectorField {
 public:
  struct Term {
    CylFunction coeff;
    int direction;
  };

  CylVectorField(int dim, std::vector<Term> terms, bool tangent_to_boundary = false);

  int dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }
  bool tangent_claim() const { return tangent_; }

  Vec value_h(const Vec& x) const;        // H-coordinates
  Mat jacobian_h(const Vec& x) const;     // (grad_H Phi)[i][j] = d_j phi_i
  /// Directional derivative (grad_H Phi) Phi, H-coordinates.
  Vec self_derivative(const Vec& x) const;

  CylVectorField operator+(const CylVectorField& other) const;
  CylVectorField operator*(double s) const;

 private:
  int dim_;
  std::vector<Term> terms_;
  bool tangent_;
};

/// Max over boundary nodes of |<Phi, grad_H G>_H| / |grad_H G|_H.
double tangency_defect(const CylVectorField& field, const LevelSetDomain& d);

/// Weighted divergence div_{nu,Omega} Phi = sum_i (d_i phi_i - phi_i d_i U
/// - phi_i hat(h_i)). For a proper domain the field must lie in the tangent
/// class; otherwise throws "field not in Z(Omega,H)". The returned function
/// carries value and gradient evaluators (no Hessian). Pass an empty domain
/// for the whole space.
CylFunction divergence(const CylVectorField& field, const Weight& w,
                       const std::optional<LevelSetDomain>& d, const GaussianModel& model);

/// Signed residual of the integration-by-parts identity for direction k:
///   int_Omega (d_k phi - phi d_k U - phi hat(e_k)) dnu
///   - int_{G^{-1}(0)} phi (d_k G / |grad_H G|_H) e^{-U} drho.
double ibp_residual(const CylFunction& phi, int k, const Weight& w,
                    const LevelSetDomain& d);

/// All directions at once (shares the per-node evaluation pass).
Vec ibp_residual_all(const CylFunction& phi, const Weight& w, const LevelSetDomain& d);

/// Precomputed weighted rules for repeated residual evaluations; the drift
/// coefficients d_i U + hat(h_i) are cached per bulk node.
struct IbpBatch {
  GaussianModel model;
  Weight weight;
  QuadratureGrid bulk;
  SurfaceQuad boundary;
  Eigen::MatrixXd drift;  // dim x N
};

IbpBatch make_ibp_batch(const Weight& w, const LevelSetDomain& d);

/// Residuals for every direction; optionally reports ||phi||_{W^{1,2}(Omega,nu)}.
Vec ibp_residual_all(const CylFunction& phi, const IbpBatch& batch,
                     double* w12_norm = nullptr);

/// Max over boundary nodes of |<hess_H G Phi, Phi>_H + <(grad_H Phi) Phi, grad_H G>_H|.
double boundary_hessian_identity(const CylVectorField& field, const LevelSetDomain& d);

/// Residual of the bilinear commutation identity between directions h and k;
/// on a domain the two boundary integrals are included. Empty domain = whole
/// space.
double bilinear_identity_residual(const CylFunction& f, const CylFunction& g,
                                  int h, int k, const Weight& w,
                                  const std::optional<LevelSetDomain>& d,
                                  const GaussianModel& model);

/// ||Phi||_{Z^{1,2}}^2 = ||Phi||_{W^{1,2}(Omega,nu;H)}^2
///   + int <hess_H U Phi, Phi> dnu
///   + int_{G^{-1}(0)} <hess_H G Phi, Phi> e^{-U} / |grad_H G|_H drho.
double z12_norm_sq(const CylVectorField& field, const Weight& w, const LevelSetDomain& d);

}  // namespace wn
