#include "wn/cyl_function.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace wn {

// ---------------------------------------------------------------- Polynomial

Polynomial Polynomial::constant(int dim, double c) {
  Polynomial p(dim);
  if (c != 0.0) p.add_term(c, {});
  return p;
}

Polynomial Polynomial::coordinate(int dim, int i) {
  Polynomial p(dim);
  std::array<uint8_t, kMaxDim> pw{};
  pw[static_cast<size_t>(i)] = 1;
  p.add_term(1.0, pw);
  return p;
}

Polynomial Polynomial::monomial(int dim, double c, const std::vector<int>& powers) {
  Polynomial p(dim);
  std::array<uint8_t, kMaxDim> pw{};
  for (size_t i = 0; i < powers.size(); ++i) pw[i] = static_cast<uint8_t>(powers[i]);
  p.add_term(c, pw);
  return p;
}

void Polynomial::add_term(double c, const std::array<uint8_t, kMaxDim>& p) {
  terms_.push_back({c, p});
  compress();
}

int Polynomial::total_degree() const {
  int d = 0;
  for (const auto& t : terms_) {
    int td = 0;
    for (int i = 0; i < dim_; ++i) td += t.powers[static_cast<size_t>(i)];
    d = std::max(d, td);
  }
  return d;
}

double Polynomial::eval(const Vec& x) const {
  double s = 0.0;
  for (const auto& t : terms_) {
    double m = t.coeff;
    for (int i = 0; i < dim_; ++i) {
      const int p = t.powers[static_cast<size_t>(i)];
      const double xi = x[i];
      for (int j = 0; j < p; ++j) m *= xi;
    }
    s += m;
  }
  return s;
}

Polynomial Polynomial::partial(int i) const {
  Polynomial out(dim_);
  for (const auto& t : terms_) {
    const int p = t.powers[static_cast<size_t>(i)];
    if (p == 0) continue;
    Term d = t;
    d.coeff *= p;
    d.powers[static_cast<size_t>(i)] = static_cast<uint8_t>(p - 1);
    out.terms_.push_back(d);
  }
  out.compress();
  return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  for (const auto& t : other.terms_) terms_.push_back(t);
  compress();
  return *this;
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
  Polynomial out = *this;
  out += other;
  return out;
}

Polynomial Polynomial::operator-(const Polynomial& other) const {
  return *this + other * (-1.0);
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  Polynomial out(dim_);
  for (const auto& s : terms_)
    for (const auto& t : other.terms_) {
      Term r;
      r.coeff = s.coeff * t.coeff;
      for (size_t i = 0; i < kMaxDim; ++i)
        r.powers[i] = static_cast<uint8_t>(s.powers[i] + t.powers[i]);
      out.terms_.push_back(r);
    }
  out.compress();
  return out;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial out = *this;
  for (auto& t : out.terms_) t.coeff *= s;
  return out;
}

void Polynomial::compress() {
  std::map<std::array<uint8_t, kMaxDim>, double> acc;
  for (const auto& t : terms_) acc[t.powers] += t.coeff;
  terms_.clear();
  for (const auto& [p, c] : acc)
    if (c != 0.0) terms_.push_back({c, p});
}

// --------------------------------------------------------------- CylFunction

CylFunction::CylFunction(int dim, std::vector<int> active, ValueFn v, GradFn g, HessFn h) {
  auto impl = std::make_shared<Impl>();
  impl->dim = dim;
  impl->active = std::move(active);
  std::sort(impl->active.begin(), impl->active.end());
  impl->active.erase(std::unique(impl->active.begin(), impl->active.end()),
                     impl->active.end());
  impl->value = std::move(v);
  impl->grad = std::move(g);
  impl->hess = std::move(h);
  impl_ = impl;
}

int CylFunction::dim() const { return impl_ ? impl_->dim : 0; }
const std::vector<int>& CylFunction::active() const {
  static const std::vector<int> empty;
  return impl_ ? impl_->active : empty;
}
bool CylFunction::has_hessian() const { return impl_ && impl_->hess != nullptr; }
bool CylFunction::has_gradient() const { return impl_ && impl_->grad != nullptr; }

double CylFunction::value(const Vec& x) const {
  if (!impl_) throw std::logic_error("empty function");
  return impl_->value(x);
}

Vec CylFunction::grad_h(const Vec& x) const {
  if (!impl_ || !impl_->grad) throw std::logic_error("gradient unavailable");
  return impl_->grad(x);
}

Mat CylFunction::hess_h(const Vec& x) const {
  if (!impl_ || !impl_->hess) throw std::logic_error("hessian unavailable");
  return impl_->hess(x);
}

namespace {

std::vector<int> merge_active(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out = a;
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

CylFunction CylFunction::operator+(const CylFunction& other) const {
  CylFunction a = *this, b = other;
  const int n = dim();
  HessFn hess;
  if (has_hessian() && b.has_hessian())
    hess = [a, b](const Vec& x) -> Mat { return a.hess_h(x) + b.hess_h(x); };
  return CylFunction(
      n, merge_active(active(), b.active()),
      [a, b](const Vec& x) { return a.value(x) + b.value(x); },
      [a, b](const Vec& x) -> Vec { return a.grad_h(x) + b.grad_h(x); }, hess);
}

CylFunction CylFunction::operator-(const CylFunction& other) const {
  return *this + other * (-1.0);
}

CylFunction CylFunction::operator*(const CylFunction& other) const {
  CylFunction a = *this, b = other;
  const int n = dim();
  HessFn hess;
  if (has_hessian() && b.has_hessian())
    hess = [a, b](const Vec& x) -> Mat {
      const Vec ga = a.grad_h(x), gb = b.grad_h(x);
      Mat m = a.hess_h(x) * b.value(x) + b.hess_h(x) * a.value(x);
      m += ga * gb.transpose() + gb * ga.transpose();
      return m;
    };
  return CylFunction(
      n, merge_active(active(), b.active()),
      [a, b](const Vec& x) { return a.value(x) * b.value(x); },
      [a, b](const Vec& x) -> Vec {
        return a.grad_h(x) * b.value(x) + b.grad_h(x) * a.value(x);
      },
      hess);
}

CylFunction CylFunction::operator*(double s) const {
  CylFunction a = *this;
  HessFn hess;
  if (has_hessian())
    hess = [a, s](const Vec& x) -> Mat { return a.hess_h(x) * s; };
  return CylFunction(
      dim(), active(), [a, s](const Vec& x) { return s * a.value(x); },
      [a, s](const Vec& x) -> Vec { return s * a.grad_h(x); }, hess);
}

CylFunction value_grad_only(int dim, std::vector<int> active,
                            CylFunction::ValueFn v, CylFunction::GradFn g) {
  return CylFunction(dim, std::move(active), std::move(v), std::move(g), nullptr);
}

// --------------------------------------------------------------- constructors

CylFunction constant_fn(int dim, double c) {
  return CylFunction(
      dim, {}, [c](const Vec&) { return c; },
      [dim](const Vec&) -> Vec { return Vec::Zero(dim); },
      [dim](const Vec&) -> Mat { return Mat::Zero(dim, dim); });
}

CylFunction coordinate_fn(const GaussianModel& model, int i) {
  return polynomial_fn(model, Polynomial::coordinate(model.dim, i));
}

CylFunction hhat_fn(const GaussianModel& model, int i) {
  return polynomial_fn(model,
                       Polynomial::coordinate(model.dim, i) * (1.0 / model.sqrt_lambda(i)));
}

CylFunction polynomial_fn(const GaussianModel& model, const Polynomial& p) {
  struct Data {
    int dim;
    Polynomial value;
    std::vector<Polynomial> d1;               // H-partials (sqrt(l_i) included)
    std::vector<std::vector<Polynomial>> d2;  // H-second partials, lower triangle
  };
  auto data = std::make_shared<Data>(Data{model.dim, p, {}, {}});
  std::vector<int> active;
  for (int i = 0; i < model.dim; ++i) {
    Polynomial di = p.partial(i) * model.sqrt_lambda(i);
    if (!di.empty()) active.push_back(i);
    data->d1.push_back(di);
  }
  for (int i = 0; i < model.dim; ++i) {
    data->d2.emplace_back();
    for (int j = 0; j <= i; ++j)
      data->d2.back().push_back(data->d1[static_cast<size_t>(i)].partial(j) *
                                model.sqrt_lambda(j));
  }
  return CylFunction(
      model.dim, active,
      [data](const Vec& x) { return data->value.eval(x); },
      [data](const Vec& x) -> Vec {
        Vec g(data->dim);
        for (int i = 0; i < data->dim; ++i) g[i] = data->d1[static_cast<size_t>(i)].eval(x);
        return g;
      },
      [data](const Vec& x) -> Mat {
        Mat h(data->dim, data->dim);
        for (int i = 0; i < data->dim; ++i)
          for (int j = 0; j <= i; ++j) {
            const double v = data->d2[static_cast<size_t>(i)][static_cast<size_t>(j)].eval(x);
            h(i, j) = v;
            h(j, i) = v;
          }
        return h;
      });
}

CylFunction compose_scalar(const CylFunction& inner, const ScalarC2& outer) {
  CylFunction g = inner;
  ScalarC2 out = outer;
  return CylFunction(
      g.dim(), g.active(),
      [g, out](const Vec& x) { return out.f(g.value(x)); },
      [g, out](const Vec& x) -> Vec { return out.df(g.value(x)) * g.grad_h(x); },
      [g, out](const Vec& x) -> Mat {
        const double v = g.value(x);
        const Vec gr = g.grad_h(x);
        return out.df(v) * g.hess_h(x) + out.d2f(v) * (gr * gr.transpose());
      });
}

void hermite_all(double xi, int deg, double* val, double* d1, double* d2) {
  // Orthonormalized probabilists' recurrence:
  //   p_{n+1} = (xi p_n - sqrt(n) p_{n-1}) / sqrt(n+1)
  val[0] = 1.0;
  if (deg >= 1) val[1] = xi;
  for (int n = 1; n < deg; ++n)
    val[n + 1] =
        (xi * val[n] - std::sqrt(static_cast<double>(n)) * val[n - 1]) /
        std::sqrt(static_cast<double>(n + 1));
  if (d1) {
    d1[0] = 0.0;
    for (int n = 1; n <= deg; ++n) d1[n] = std::sqrt(static_cast<double>(n)) * val[n - 1];
  }
  if (d2) {
    d2[0] = 0.0;
    if (deg >= 1) d2[1] = 0.0;
    for (int n = 2; n <= deg; ++n)
      d2[n] = std::sqrt(static_cast<double>(n) * (n - 1)) * val[n - 2];
  }
}

CylFunction hermite_fn(const GaussianModel& model, const std::vector<int>& multi_index) {
  if (static_cast<int>(multi_index.size()) > model.dim)
    throw std::invalid_argument("multi-index longer than dimension");
  for (int d : multi_index)
    if (d < 0) throw std::invalid_argument("hermite degrees must be nonnegative");

  struct Data {
    int dim;
    std::vector<int> mi;       // degree per coordinate (padded with zeros)
    std::vector<double> isl;   // 1 / sqrt(lambda_i)
  };
  auto data = std::make_shared<Data>();
  data->dim = model.dim;
  data->mi.assign(static_cast<size_t>(model.dim), 0);
  for (size_t i = 0; i < multi_index.size(); ++i) data->mi[i] = multi_index[i];
  for (int i = 0; i < model.dim; ++i) data->isl.push_back(1.0 / model.sqrt_lambda(i));

  std::vector<int> active;
  for (int i = 0; i < model.dim; ++i)
    if (data->mi[static_cast<size_t>(i)] > 0) active.push_back(i);

  // Per-axis evaluation buffers fit the largest degree.
  auto axis_eval = [data](const Vec& x, int i, double* v, double* a, double* b) {
    const int d = data->mi[static_cast<size_t>(i)];
    hermite_all(x[i] * data->isl[static_cast<size_t>(i)], d, v, a, b);
  };

  return CylFunction(
      model.dim, active,
      [data, axis_eval](const Vec& x) {
        double prod = 1.0;
        double buf[64];
        for (int i = 0; i < data->dim; ++i) {
          axis_eval(x, i, buf, nullptr, nullptr);
          prod *= buf[data->mi[static_cast<size_t>(i)]];
        }
        return prod;
      },
      [data, axis_eval](const Vec& x) -> Vec {
        double v[kMaxDim], d1[kMaxDim];
        double buf[64], dbuf[64];
        for (int i = 0; i < data->dim; ++i) {
          axis_eval(x, i, buf, dbuf, nullptr);
          v[i] = buf[data->mi[static_cast<size_t>(i)]];
          d1[i] = dbuf[data->mi[static_cast<size_t>(i)]];
        }
        Vec g(data->dim);
        for (int i = 0; i < data->dim; ++i) {
          double prod = d1[i];
          for (int j = 0; j < data->dim; ++j)
            if (j != i) prod *= v[j];
          g[i] = prod;
        }
        return g;
      },
      [data, axis_eval](const Vec& x) -> Mat {
        double v[kMaxDim], d1[kMaxDim], d2[kMaxDim];
        double buf[64], dbuf[64], d2buf[64];
        for (int i = 0; i < data->dim; ++i) {
          axis_eval(x, i, buf, dbuf, d2buf);
          v[i] = buf[data->mi[static_cast<size_t>(i)]];
          d1[i] = dbuf[data->mi[static_cast<size_t>(i)]];
          d2[i] = d2buf[data->mi[static_cast<size_t>(i)]];
        }
        Mat h(data->dim, data->dim);
        for (int i = 0; i < data->dim; ++i)
          for (int j = 0; j <= i; ++j) {
            double prod;
            if (i == j) {
              prod = d2[i];
              for (int l = 0; l < data->dim; ++l)
                if (l != i) prod *= v[l];
            } else {
              prod = d1[i] * d1[j];
              for (int l = 0; l < data->dim; ++l)
                if (l != i && l != j) prod *= v[l];
            }
            h(i, j) = prod;
            h(j, i) = prod;
          }
        return h;
      });
}

}  // namespace wn
