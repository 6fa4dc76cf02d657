#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "wn/model.hpp"
#include "wn/types.hpp"

namespace wn {

/// Sparse multivariate polynomial in ambient coordinates. The workhorse for
/// probe functions; keeps exact derivatives cheap.
class Polynomial {
 public:
  struct Term {
    double coeff;
    std::array<uint8_t, kMaxDim> powers;
  };

  explicit Polynomial(int dim) : dim_(dim) {}

  static Polynomial constant(int dim, double c);
  static Polynomial coordinate(int dim, int i);
  static Polynomial monomial(int dim, double c, const std::vector<int>& powers);

  int dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  int total_degree() const;

  double eval(const Vec& x) const;
  Polynomial partial(int i) const;  // ambient d/dx_i

  Polynomial& operator+=(const Polynomial& other);
  Polynomial operator+(const Polynomial& other) const;
  Polynomial operator*(const Polynomial& other) const;
  Polynomial operator*(double s) const;
  Polynomial operator-(const Polynomial& other) const;

  void add_term(double c, const std::array<uint8_t, kMaxDim>& p);

 private:
  void compress();

  int dim_;
  std::vector<Term> terms_;
};

/// A scalar C^2 map with exact derivatives, used for compositions.
struct ScalarC2 {
  std::function<double(double)> f, df, d2f;
};

/// Cylindrical function with exact value / H-gradient / H-Hessian evaluators.
///
/// The gradient is returned in H-coordinates (component i is the derivative
/// along sqrt(lambda_i) e_i) and the Hessian likewise. Some derived objects
/// (divergences, images of the operator L) only carry value and gradient;
/// querying their Hessian throws.
class CylFunction {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradFn = std::function<Vec(const Vec&)>;
  using HessFn = std::function<Mat(const Vec&)>;

  CylFunction() = default;
  CylFunction(int dim, std::vector<int> active, ValueFn v, GradFn g, HessFn h);

  int dim() const;
  const std::vector<int>& active() const;
  bool has_hessian() const;
  bool has_gradient() const;

  double value(const Vec& x) const;
  Vec grad_h(const Vec& x) const;
  Mat hess_h(const Vec& x) const;

  /// d_k f(x): derivative along the k-th H-basis vector.
  double partial_h(const Vec& x, int k) const { return grad_h(x)[k]; }

  CylFunction operator+(const CylFunction& other) const;
  CylFunction operator-(const CylFunction& other) const;
  CylFunction operator*(const CylFunction& other) const;
  CylFunction operator*(double s) const;

 private:
  struct Impl {
    int dim = 0;
    std::vector<int> active;
    ValueFn value;
    GradFn grad;
    HessFn hess;
  };
  std::shared_ptr<const Impl> impl_;

  friend CylFunction value_grad_only(int dim, std::vector<int> active,
                                     CylFunction::ValueFn v, CylFunction::GradFn g);
};

// ---- constructors ----

CylFunction constant_fn(int dim, double c);

/// Ambient coordinate functional x -> x_i.
CylFunction coordinate_fn(const GaussianModel& model, int i);

/// hat(h_i)(x) = x_i / sqrt(lambda_i), a standard normal variable under mu.
CylFunction hhat_fn(const GaussianModel& model, int i);

CylFunction polynomial_fn(const GaussianModel& model, const Polynomial& p);

/// outer(inner(x)) with outer in C^2.
CylFunction compose_scalar(const CylFunction& inner, const ScalarC2& outer);

/// Tensor Hermite polynomial, orthonormal in L^2(X, mu); multi_index[i] is
/// the degree in hat(h_i). Eigenfunction of the unweighted operator with
/// eigenvalue -|multi_index|.
CylFunction hermite_fn(const GaussianModel& model, const std::vector<int>& multi_index);

/// Function with value/gradient evaluators only (no Hessian).
CylFunction value_grad_only(int dim, std::vector<int> active,
                            CylFunction::ValueFn v, CylFunction::GradFn g);

/// Orthonormalized 1-D Hermite evaluation helpers (probabilists', He_n/sqrt(n!)).
/// Fills values and first/second derivatives at xi for degrees 0..deg.
void hermite_all(double xi, int deg, double* val, double* d1, double* d2);

}  // namespace wn
