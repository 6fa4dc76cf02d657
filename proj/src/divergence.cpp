#include "wn/divergence.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace wn {

CylVectorField::CylVectorField(int dim, std::vector<Term> terms, bool tangent)
    : dim_(dim), terms_(std::move(terms)), tangent_(tangent) {
  std::set<int> dirs;
  for (const auto& t : terms_) {
    if (t.direction < 0 || t.direction >= dim_)
      throw std::invalid_argument("field direction out of range");
    if (!dirs.insert(t.direction).second)
      throw std::invalid_argument("field directions must be distinct");
  }
}

Vec CylVectorField::value_h(const Vec& x) const {
  Vec v = Vec::Zero(dim_);
  for (const auto& t : terms_) v[t.direction] += t.coeff.value(x);
  return v;
}

Mat CylVectorField::jacobian_h(const Vec& x) const {
  Mat j = Mat::Zero(dim_, dim_);
  for (const auto& t : terms_) j.row(t.direction) += t.coeff.grad_h(x).transpose();
  return j;
}

Vec CylVectorField::self_derivative(const Vec& x) const {
  return jacobian_h(x) * value_h(x);
}

CylVectorField CylVectorField::operator+(const CylVectorField& other) const {
  std::vector<Term> terms = terms_;
  for (const auto& t : other.terms_) {
    bool merged = false;
    for (auto& s : terms)
      if (s.direction == t.direction) {
        s.coeff = s.coeff + t.coeff;
        merged = true;
        break;
      }
    if (!merged) terms.push_back(t);
  }
  return CylVectorField(dim_, std::move(terms), tangent_ && other.tangent_);
}

CylVectorField CylVectorField::operator*(double s) const {
  std::vector<Term> terms = terms_;
  for (auto& t : terms) t.coeff = t.coeff * s;
  return CylVectorField(dim_, std::move(terms), tangent_);
}

double tangency_defect(const CylVectorField& field, const LevelSetDomain& d) {
  const SurfaceQuad& sq = d.boundary_quad();
  double worst = 0.0;
  Vec x(sq.nodes.rows());
  for (int k = 0; k < sq.size(); ++k) {
    x = sq.nodes.col(k);
    const Vec phi = field.value_h(x);
    const double normal = std::abs(phi.dot(sq.grad_G.col(k))) / sq.grad_norm[k];
    worst = std::max(worst, normal);
  }
  return worst;
}

CylFunction divergence(const CylVectorField& field, const Weight& w,
                       const std::optional<LevelSetDomain>& d,
                       const GaussianModel& model) {
  if (d && tangency_defect(field, *d) > 1e-8)
    throw std::runtime_error("field not in Z(Omega,H)");

  struct Captured {
    std::vector<CylVectorField::Term> terms;
    CylFunction U;
    bool zero_weight;
    std::vector<double> inv_sqrt_lambda;
    int dim;
  };
  auto cap = std::make_shared<Captured>();
  cap->terms = field.terms();
  cap->U = w.U();
  cap->zero_weight = w.is_zero();
  cap->dim = model.dim;
  for (int i = 0; i < model.dim; ++i)
    cap->inv_sqrt_lambda.push_back(1.0 / model.sqrt_lambda(i));

  std::vector<int> active;
  for (int i = 0; i < model.dim; ++i) active.push_back(i);

  auto value = [cap](const Vec& x) {
    double s = 0.0;
    for (const auto& t : cap->terms) {
      const int i = t.direction;
      const double phi = t.coeff.value(x);
      double v = t.coeff.grad_h(x)[i] - phi * x[i] * cap->inv_sqrt_lambda[static_cast<size_t>(i)];
      if (!cap->zero_weight) v -= phi * cap->U.grad_h(x)[i];
      s += v;
    }
    return s;
  };
  auto grad = [cap](const Vec& x) -> Vec {
    Vec g = Vec::Zero(cap->dim);
    Vec gu;
    Mat hu;
    if (!cap->zero_weight) {
      gu = cap->U.grad_h(x);
      hu = cap->U.hess_h(x);
    }
    for (const auto& t : cap->terms) {
      const int i = t.direction;
      const double phi = t.coeff.value(x);
      const Vec gphi = t.coeff.grad_h(x);
      const Mat hphi = t.coeff.hess_h(x);
      const double hhat = x[i] * cap->inv_sqrt_lambda[static_cast<size_t>(i)];
      for (int j = 0; j < cap->dim; ++j) {
        double term = hphi(j, i) - gphi[j] * hhat;
        if (j == i) term -= phi;
        if (!cap->zero_weight)
          term -= gphi[j] * gu[i] + phi * hu(j, i);
        g[j] += term;
      }
    }
    return g;
  };
  return value_grad_only(model.dim, active, value, grad);
}

IbpBatch make_ibp_batch(const Weight& w, const LevelSetDomain& d) {
  IbpBatch b{d.model(), w, weighted_interior(d, w), weighted_boundary(d, w), {}};
  const int n = b.model.dim;
  b.drift.resize(n, b.bulk.size());
  Vec x(n);
  for (int k = 0; k < b.bulk.size(); ++k) {
    x = b.bulk.nodes.col(k);
    Vec dr(n);
    for (int i = 0; i < n; ++i) dr[i] = x[i] / b.model.sqrt_lambda(i);
    if (!w.is_zero()) dr += w.U().grad_h(x);
    b.drift.col(k) = dr;
  }
  return b;
}

Vec ibp_residual_all(const CylFunction& phi, const IbpBatch& batch, double* w12_norm) {
  const GaussianModel& model = batch.model;
  const int n = model.dim;
  Vec res = Vec::Zero(n);
  Vec x(n);
  double l2 = 0.0, g2 = 0.0;
  for (int k = 0; k < batch.bulk.size(); ++k) {
    x = batch.bulk.nodes.col(k);
    const double v = phi.value(x);
    const Vec g = phi.grad_h(x);
    const double wt = batch.bulk.weights[k];
    if (w12_norm) {
      l2 += wt * v * v;
      g2 += wt * g.squaredNorm();
    }
    for (int i = 0; i < n; ++i)
      res[i] += wt * (g[i] - v * batch.drift(i, k));
  }
  const SurfaceQuad& sq = batch.boundary;
  for (int k = 0; k < sq.size(); ++k) {
    x = sq.nodes.col(k);
    const double wt = sq.weights[k] * phi.value(x) / sq.grad_norm[k];
    for (int i = 0; i < n; ++i) res[i] -= wt * sq.grad_G(i, k);
  }
  if (w12_norm) *w12_norm = std::sqrt(l2 + g2);
  return res;
}

Vec ibp_residual_all(const CylFunction& phi, const Weight& w, const LevelSetDomain& d) {
  return ibp_residual_all(phi, make_ibp_batch(w, d), nullptr);
}

double ibp_residual(const CylFunction& phi, int k, const Weight& w,
                    const LevelSetDomain& d) {
  return ibp_residual_all(phi, w, d)[k];
}

double boundary_hessian_identity(const CylVectorField& field, const LevelSetDomain& d) {
  if (tangency_defect(field, d) > 1e-8)
    throw std::runtime_error("field not in Z(Omega,H)");
  const SurfaceQuad& sq = d.boundary_quad();
  double worst = 0.0;
  Vec x(sq.nodes.rows());
  for (int k = 0; k < sq.size(); ++k) {
    x = sq.nodes.col(k);
    const Vec phi = field.value_h(x);
    const Vec dphi = field.self_derivative(x);
    const double lhs = phi.dot(sq.hess_G[static_cast<size_t>(k)] * phi);
    const double rhs = dphi.dot(sq.grad_G.col(k));
    worst = std::max(worst, std::abs(lhs + rhs));
  }
  return worst;
}

double bilinear_identity_residual(const CylFunction& f, const CylFunction& g,
                                  int h, int k, const Weight& w,
                                  const std::optional<LevelSetDomain>& d,
                                  const GaussianModel& model) {
  const bool zero = w.is_zero();
  const int n = model.dim;
  auto hhat = [&](const Vec& x, int i) { return x[i] / model.sqrt_lambda(i); };

  // Bulk terms shared by both variants.
  auto bulk_integrand = [&](const Vec& x, double& lhs, double& rhs) {
    const double fv = f.value(x), gv = g.value(x);
    const Vec gf = f.grad_h(x), gg = g.grad_h(x);
    double dfh = gf[h], dgk = gg[k];
    double uh = 0.0, uk = 0.0, uhk = 0.0;
    if (!zero) {
      const Vec gu = w.U().grad_h(x);
      uh = gu[h];
      uk = gu[k];
      uhk = w.U().hess_h(x)(h, k);
    }
    lhs = (dfh - fv * uh - fv * hhat(x, h)) * (dgk - gv * uk - gv * hhat(x, k));
    rhs = fv * gv * uhk + gf[k] * gg[h];
    if (h == k) rhs += fv * gv;
  };

  double lhs_total = 0.0, rhs_total = 0.0;
  if (d) {
    const QuadratureGrid bulk = weighted_interior(*d, w);
    Vec x(n);
    for (int q = 0; q < bulk.size(); ++q) {
      x = bulk.nodes.col(q);
      double lhs, rhs;
      bulk_integrand(x, lhs, rhs);
      lhs_total += bulk.weights[q] * lhs;
      rhs_total += bulk.weights[q] * rhs;
    }
    const SurfaceQuad sq = weighted_boundary(*d, w);
    for (int q = 0; q < sq.size(); ++q) {
      x = sq.nodes.col(q);
      const double fv = f.value(x), gv = g.value(x);
      const Vec gg = g.grad_h(x);
      const double uk = zero ? 0.0 : w.U().grad_h(x)[k];
      const double scale = sq.weights[q] / sq.grad_norm[q];
      rhs_total += scale * fv * (gg[k] - gv * uk - gv * hhat(x, k)) * sq.grad_G(h, q);
      rhs_total -= scale * fv * gg[h] * sq.grad_G(k, q);
    }
  } else {
    const QuadratureGrid grid = weighted_whole_grid(model, w);
    Vec x(n);
    for (int q = 0; q < grid.size(); ++q) {
      x = grid.nodes.col(q);
      double lhs, rhs;
      bulk_integrand(x, lhs, rhs);
      lhs_total += grid.weights[q] * lhs;
      rhs_total += grid.weights[q] * rhs;
    }
  }
  return lhs_total - rhs_total;
}

double z12_norm_sq(const CylVectorField& field, const Weight& w, const LevelSetDomain& d) {
  const QuadratureGrid bulk = weighted_interior(d, w);
  const bool zero = w.is_zero();
  double acc = 0.0;
  Vec x(bulk.nodes.rows());
  for (int k = 0; k < bulk.size(); ++k) {
    x = bulk.nodes.col(k);
    const Vec phi = field.value_h(x);
    const Mat j = field.jacobian_h(x);
    double v = phi.squaredNorm() + j.squaredNorm();
    if (!zero) v += phi.dot(w.U().hess_h(x) * phi);
    acc += bulk.weights[k] * v;
  }
  const SurfaceQuad sq = weighted_boundary(d, w);
  for (int k = 0; k < sq.size(); ++k) {
    x = sq.nodes.col(k);
    const Vec phi = field.value_h(x);
    acc += sq.weights[k] * phi.dot(sq.hess_G[static_cast<size_t>(k)] * phi) /
           sq.grad_norm[k];
  }
  return acc;
}

}  // namespace wn
