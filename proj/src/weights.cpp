#include "wn/weights.hpp"

#include <cmath>
#include <stdexcept>

namespace wn {

Weight Weight::zero(const GaussianModel& model) {
  Weight w;
  w.u_ = constant_fn(model.dim, 0.0);
  w.is_zero_ = true;
  w.grad_lip_ = 0.0;
  return w;
}

Weight Weight::linear(const GaussianModel& model, const Vec& covector) {
  if (covector.size() != model.dim) throw std::invalid_argument("dimension mismatch");
  Polynomial p = Polynomial::constant(model.dim, 0.0);
  for (int i = 0; i < model.dim; ++i)
    if (covector[i] != 0.0) p += Polynomial::coordinate(model.dim, i) * covector[i];
  Weight w;
  w.u_ = polynomial_fn(model, p);
  w.grad_lip_ = 0.0;
  return w;
}

Weight Weight::phi_norm_sq(const GaussianModel& model) {
  // U(x) = Phi(|x|_X^2) with Phi(s) = s^2/2.
  Polynomial s(model.dim);
  s = Polynomial::constant(model.dim, 0.0);
  for (int i = 0; i < model.dim; ++i) {
    Polynomial xi = Polynomial::coordinate(model.dim, i);
    s += xi * xi;
  }
  Polynomial u = (s * s) * 0.5;
  Weight w;
  w.u_ = polynomial_fn(model, u);
  return w;
}

Weight Weight::custom(CylFunction u, std::optional<double> grad_lip) {
  Weight w;
  w.u_ = std::move(u);
  w.grad_lip_ = grad_lip;
  return w;
}

// ----------------------------------------------------------------- prox

ProxResult prox(const CylFunction& f, const GaussianModel& model, const Vec& x,
                double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const int n = model.dim;
  // Work in H-coordinates of the shift: psi(z) = f(x + S z) + |z|^2/(2 alpha)
  // is strongly convex with modulus 1/alpha.
  Vec z = Vec::Zero(n);
  auto point = [&](const Vec& zz) -> Vec {
    Vec p = x;
    for (int i = 0; i < n; ++i) p[i] += model.sqrt_lambda(i) * zz[i];
    return p;
  };
  auto objective = [&](const Vec& zz) {
    return f.value(point(zz)) + zz.squaredNorm() / (2.0 * alpha);
  };
  double fe = objective(z);
  const int max_iter = 500;
  int it = 0;
  double kkt = 0.0;
  for (; it < max_iter; ++it) {
    const Vec p = point(z);
    Vec g = f.grad_h(p) + z / alpha;
    kkt = g.norm();
    if (kkt <= 1e-10) break;
    Vec step;
    bool newton_ok = false;
    if (f.has_hessian()) {
      Mat H = f.hess_h(p);
      for (int i = 0; i < n; ++i) H(i, i) += 1.0 / alpha;
      Eigen::LDLT<Mat> ldlt(H);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        step = -ldlt.solve(g);
        newton_ok = true;
      }
    }
    if (!newton_ok) step = -alpha * g;  // scaled gradient descent
    // Armijo backtracking, with rounding slack so steps at the floating
    // point floor are not rejected.
    double t = 1.0;
    const double slope = g.dot(step);
    if (slope >= 0.0) {
      if (kkt <= 1e-9) break;
      throw std::runtime_error("convexity violated");
    }
    bool accepted = false;
    const double fuzz = 1e-15 * (1.0 + std::abs(fe));
    for (int ls = 0; ls < 60; ++ls) {
      const double cand = objective(z + t * step);
      if (cand <= fe + 1e-4 * t * slope + fuzz) {
        z += t * step;
        fe = cand;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (kkt <= 1e-9) break;
      throw std::runtime_error("prox non-convergent");
    }
  }
  if (it == max_iter && kkt > 1e-9) throw std::runtime_error("prox non-convergent");
  ProxResult res;
  res.minimizer = z;
  res.envelope = fe;
  res.iterations = it;
  res.kkt_residual = kkt;
  return res;
}

Vec my_gradient(const CylFunction& f, const GaussianModel& model, const Vec& x,
                double alpha) {
  return -prox(f, model, x, alpha).minimizer / alpha;
}

double my_envelope(const CylFunction& f, const GaussianModel& model, const Vec& x,
                   double alpha) {
  return prox(f, model, x, alpha).envelope;
}

Mat my_hessian(const CylFunction& f, const GaussianModel& model, const Vec& x,
               double alpha) {
  ProxResult pr = prox(f, model, x, alpha);
  Vec p = x;
  for (int i = 0; i < model.dim; ++i) p[i] += model.sqrt_lambda(i) * pr.minimizer[i];
  const Mat A = f.hess_h(p);
  Mat M = alpha * A;
  for (int i = 0; i < model.dim; ++i) M(i, i) += 1.0;
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible()) throw std::runtime_error("Hessian system singular");
  return lu.solve(A);
}

// -------------------------------------------------------- PenalizedWeight

PenalizedWeight::PenalizedWeight(const Weight& base, const LevelSetDomain& domain,
                                 double alpha)
    : base_(base), domain_(domain), alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in (0, 1]");
}

double PenalizedWeight::value(const Vec& x) const {
  const double d = domain_.dh_distance(x);
  double ua;
  if (base_.is_zero()) {
    ua = 0.0;
  } else {
    ua = my_envelope(base_.U(), domain_.model(), x, alpha_);
  }
  return ua + d * d / (2.0 * alpha_);
}

Vec PenalizedWeight::grad_h(const Vec& x) const {
  const double d = domain_.dh_distance(x);
  Vec g = base_.is_zero() ? Vec(Vec::Zero(domain_.model().dim))
                          : Vec(my_gradient(base_.U(), domain_.model(), x, alpha_));
  if (d > 0.0) g += (d / alpha_) * domain_.dh_distance_grad(x);
  return g;
}

Mat PenalizedWeight::hess_h(const Vec& x) const {
  // Central differences of the gradient along the H-basis directions.
  const GaussianModel& m = domain_.model();
  const int n = m.dim;
  const double eps = 1e-5;
  Mat h(n, n);
  for (int i = 0; i < n; ++i) {
    Vec xp = x, xm = x;
    xp[i] += eps * m.sqrt_lambda(i);
    xm[i] -= eps * m.sqrt_lambda(i);
    Vec diff = (grad_h(xp) - grad_h(xm)) / (2.0 * eps);
    h.col(i) = diff;
  }
  return Mat(0.5 * (h + h.transpose()));
}

CylFunction PenalizedWeight::as_cyl_function() const {
  PenalizedWeight self = *this;
  const int n = domain_.model().dim;
  std::vector<int> active(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) active[static_cast<size_t>(i)] = i;
  return CylFunction(
      n, active, [self](const Vec& x) { return self.value(x); },
      [self](const Vec& x) -> Vec { return self.grad_h(x); },
      [self](const Vec& x) -> Mat { return self.hess_h(x); });
}

PenalizedWeight penalized(const Weight& w, const LevelSetDomain& d, double alpha) {
  return PenalizedWeight(w, d, alpha);
}

}  // namespace wn
