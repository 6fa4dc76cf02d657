#pragma once

#include <cstdint>
#include <vector>

#include "wn/cyl_function.hpp"
#include "wn/divergence.hpp"

namespace wn {

/// 64-bit linear congruential generator (Knuth MMIX constants,
/// a = 6364136223846793005, c = 1442695040888963407, mod 2^64). Probe
/// coefficients are uniform in [-1, 1] drawn from the top 53 bits, so runs
/// are reproducible across implementations.
class Lcg {
 public:
  explicit Lcg(uint64_t seed) : state_(seed) {}

  uint64_t next_raw();
  double next_u01();   // [0, 1)
  double next_pm1();   // [-1, 1)
  int next_int(int lo, int hi);  // inclusive bounds

 private:
  uint64_t state_;
};

/// Graded-lexicographic monomial list over the given coordinates up to
/// max_degree (the documented probe ordering).
std::vector<std::vector<int>> graded_monomials(const std::vector<int>& coords,
                                               int max_degree, int dim);

/// Random polynomial with coefficients in [-1, 1] over the graded ordering.
Polynomial random_polynomial(Lcg& rng, int dim, const std::vector<int>& coords,
                             int max_degree);

CylFunction random_polynomial_fn(Lcg& rng, const GaussianModel& model,
                                 int max_degree);

/// Random smooth convex function: positive combination of even powers of
/// affine functionals of the whitened coordinates plus a linear part.
CylFunction random_convex_fn(Lcg& rng, const GaussianModel& model);

/// Random field tangent to a half-space boundary: polynomial coefficients on
/// tangential directions plus G times a polynomial on the normal direction.
CylVectorField random_tangent_field_half_space(Lcg& rng, const GaussianModel& model,
                                               const LevelSetDomain& d, int max_degree);

/// Rotation field Phi_{i,j}(x) = -(x,h_i) / sqrt(l_i) h_j + (x,h_j) / sqrt(l_j) h_i.
CylVectorField rotation_field(const GaussianModel& model, int i, int j);

/// Random combination sum psi_k Phi_{i_k, j_k} (tangent to the isotropic ball).
CylVectorField random_tangent_field_ball(Lcg& rng, const GaussianModel& model,
                                         int max_degree);

}  // namespace wn
