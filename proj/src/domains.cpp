#include "wn/domains.hpp"

#include <cmath>
#include <stdexcept>

#include "wn/weights.hpp"

namespace wn {

namespace {

constexpr double kSegmentPanel = 0.7;
constexpr int kSegmentPoints = 10;
constexpr double kCutoff = 8.75;  // whitened tail, mass < 1e-17
constexpr int kCircleNodes = 256;
constexpr int kSphereLat = 32;
constexpr int kSphereLon = 64;
constexpr int kBallRadial = 48;

Eigen::MatrixXd complete_frame(const Vec& e) {
  const int n = static_cast<int>(e.size());
  Eigen::MatrixXd R(n, n);
  R.col(0) = e;
  int col = 1;
  for (int i = 0; i < n && col < n; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v[i] = 1.0;
    for (int j = 0; j < col; ++j) v -= R.col(j).dot(v) * R.col(j);
    const double nv = v.norm();
    if (nv > 1e-8) R.col(col++) = v / nv;
  }
  if (col != n) throw std::logic_error("frame completion failed");
  return R;
}

struct TensorGauss {
  Eigen::MatrixXd pts;  // m x N
  Eigen::VectorXd wts;
};

// Standard-Gaussian tensor rule in m whitened coordinates.
TensorGauss tangential_rule(int m, int order) {
  TensorGauss t;
  if (m == 0) {
    t.pts.resize(0, 1);
    t.wts = Eigen::VectorXd::Ones(1);
    return t;
  }
  Eigen::VectorXd n1, w1;
  gauss_hermite(order, n1, w1);
  long total = 1;
  for (int i = 0; i < m; ++i) total *= order;
  t.pts.resize(m, total);
  t.wts.resize(total);
  std::vector<int> idx(static_cast<size_t>(m), 0);
  for (long k = 0; k < total; ++k) {
    double w = 1.0;
    for (int i = 0; i < m; ++i) {
      t.pts(i, k) = n1[idx[static_cast<size_t>(i)]];
      w *= w1[idx[static_cast<size_t>(i)]];
    }
    t.wts[k] = w;
    for (int i = 0; i < m; ++i) {
      if (++idx[static_cast<size_t>(i)] < order) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return t;
}

}  // namespace

struct LevelSetDomain::Impl {
  DomainKind kind = DomainKind::custom;
  GaussianModel model;
  CylFunction G;
  HalfSpaceFrame frame;
  bool has_interior = false;
  bool has_boundary = false;
  QuadratureGrid interior;
  SurfaceQuad boundary;
};

DomainKind LevelSetDomain::kind() const { return impl_->kind; }
const GaussianModel& LevelSetDomain::model() const { return impl_->model; }
const CylFunction& LevelSetDomain::G() const { return impl_->G; }
const HalfSpaceFrame& LevelSetDomain::frame() const {
  if (impl_->kind != DomainKind::half_space)
    throw std::logic_error("frame only defined for half-spaces");
  return impl_->frame;
}

bool LevelSetDomain::contains(const Vec& x) const { return impl_->G.value(x) <= 0.0; }

const QuadratureGrid& LevelSetDomain::interior_quad() const {
  if (!impl_->has_interior) throw std::runtime_error("no interior rule");
  return impl_->interior;
}

const SurfaceQuad& LevelSetDomain::boundary_quad() const {
  if (!impl_->has_boundary) throw std::runtime_error("no surface rule");
  return impl_->boundary;
}

double LevelSetDomain::surface_density(const Vec& x) const {
  return impl_->model.whitened_density(x);
}

LevelSetDomain LevelSetDomain::half_space(const GaussianModel& model, const Vec& a,
                                          double r) {
  if (a.size() != model.dim) throw std::invalid_argument("dimension mismatch");
  auto impl = std::make_shared<Impl>();
  impl->kind = DomainKind::half_space;
  impl->model = model;

  Polynomial g = Polynomial::constant(model.dim, -r);
  for (int i = 0; i < model.dim; ++i)
    if (a[i] != 0.0) g += Polynomial::coordinate(model.dim, i) * a[i];
  impl->G = polynomial_fn(model, g);

  HalfSpaceFrame& fr = impl->frame;
  fr.covector = a;
  fr.offset = r;
  Vec b(model.dim);
  for (int i = 0; i < model.dim; ++i) b[i] = a[i] * model.sqrt_lambda(i);
  fr.h_norm = b.norm();
  if (!(fr.h_norm > 0.0)) throw std::invalid_argument("zero covector");
  fr.normal_white = b / fr.h_norm;
  fr.rot = complete_frame(fr.normal_white);
  fr.rstar = r / fr.h_norm;

  const int n = model.dim;
  // grad_H G is the constant vector b in H-coordinates; hess_H G = 0.
  auto fill_levelset_data = [&](SurfaceQuad& sq) {
    const int N = sq.size();
    sq.grad_G.resize(n, N);
    sq.grad_norm.resize(N);
    sq.hess_G.assign(static_cast<size_t>(N), Mat::Zero(n, n));
    for (int k = 0; k < N; ++k) {
      sq.grad_G.col(k) = b;
      sq.grad_norm[k] = fr.h_norm;
    }
  };

  if (n <= 3) {
    // Bulk rule: normal segment times tangential Gauss-Hermite, whitened.
    Eigen::VectorXd sn, sw;
    gaussian_segment_rule(fr.rstar - kCutoff, fr.rstar, kSegmentPanel, kSegmentPoints,
                          sn, sw);
    TensorGauss tg = tangential_rule(n - 1, model.quad_order);
    const long total = sn.size() * tg.wts.size();
    impl->interior.nodes.resize(n, total);
    impl->interior.weights.resize(total);
    long k = 0;
    Eigen::VectorXd eta(n);
    for (long i = 0; i < sn.size(); ++i)
      for (long j = 0; j < tg.wts.size(); ++j, ++k) {
        eta[0] = sn[i];
        for (int t = 1; t < n; ++t) eta[t] = tg.pts(t - 1, j);
        Eigen::VectorXd z = fr.rot * eta;
        for (int c = 0; c < n; ++c)
          impl->interior.nodes(c, k) = z[c] * model.sqrt_lambda(c);
        impl->interior.weights[k] = sw[i] * tg.wts[j];
      }
    impl->has_interior = true;
  }

  {
    // Boundary rule: tangential Gauss-Hermite on the hyperplane, weighted by
    // the 1-D Gaussian density at the normal offset.
    TensorGauss tg = tangential_rule(n - 1, model.quad_order);
    const double gn = std::exp(-0.5 * fr.rstar * fr.rstar) / std::sqrt(2.0 * M_PI);
    const long total = tg.wts.size();
    impl->boundary.nodes.resize(n, total);
    impl->boundary.weights.resize(total);
    Eigen::VectorXd eta(n);
    for (long j = 0; j < total; ++j) {
      eta[0] = fr.rstar;
      for (int t = 1; t < n; ++t) eta[t] = tg.pts(t - 1, j);
      Eigen::VectorXd z = fr.rot * eta;
      for (int c = 0; c < n; ++c)
        impl->boundary.nodes(c, j) = z[c] * model.sqrt_lambda(c);
      impl->boundary.weights[j] = gn * tg.wts[j];
    }
    fill_levelset_data(impl->boundary);
    impl->has_boundary = true;
  }

  LevelSetDomain d;
  d.impl_ = impl;
  return d;
}

LevelSetDomain LevelSetDomain::unit_ball(const GaussianModel& model) {
  auto impl = std::make_shared<Impl>();
  impl->kind = DomainKind::unit_ball;
  impl->model = model;

  Polynomial g = Polynomial::constant(model.dim, -1.0);
  for (int i = 0; i < model.dim; ++i) {
    Polynomial xi = Polynomial::coordinate(model.dim, i);
    g += xi * xi;
  }
  impl->G = polynomial_fn(model, g);

  const int n = model.dim;

  auto fill_levelset_data = [&](SurfaceQuad& sq) {
    const int N = sq.size();
    sq.grad_G.resize(n, N);
    sq.grad_norm.resize(N);
    sq.hess_G.assign(static_cast<size_t>(N), Mat::Zero(n, n));
    Mat hess = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) hess(i, i) = 2.0 * model.lambda(i);
    for (int k = 0; k < N; ++k) {
      Vec x = sq.nodes.col(k);
      for (int i = 0; i < n; ++i) sq.grad_G(i, k) = 2.0 * model.sqrt_lambda(i) * x[i];
      sq.grad_norm[k] = sq.grad_G.col(k).norm();
      sq.hess_G[static_cast<size_t>(k)] = hess;
    }
  };

  if (n == 1) {
    Eigen::VectorXd gl_n, gl_w;
    gauss_legendre(64, gl_n, gl_w);
    impl->interior.nodes.resize(1, gl_n.size());
    impl->interior.weights.resize(gl_n.size());
    const double l = model.lambda(0);
    for (long k = 0; k < gl_n.size(); ++k) {
      const double x = gl_n[k];
      impl->interior.nodes(0, k) = x;
      impl->interior.weights[k] =
          gl_w[k] * std::exp(-0.5 * x * x / l) / std::sqrt(2.0 * M_PI * l);
    }
    impl->has_interior = true;

    impl->boundary.nodes.resize(1, 2);
    impl->boundary.weights.resize(2);
    for (int s = 0; s < 2; ++s) {
      const double x = s == 0 ? -1.0 : 1.0;
      impl->boundary.nodes(0, s) = x;
      Vec xv(1);
      xv[0] = x;
      impl->boundary.weights[s] = model.whitened_density(xv);
    }
    fill_levelset_data(impl->boundary);
    impl->has_boundary = true;
  } else if (n == 2) {
    // Interior: polar rule with the ambient Gaussian density.
    Eigen::VectorXd gl_n, gl_w;
    gauss_legendre(kBallRadial, gl_n, gl_w);
    const long total = kBallRadial * static_cast<long>(kCircleNodes);
    impl->interior.nodes.resize(2, total);
    impl->interior.weights.resize(total);
    const double dth = 2.0 * M_PI / kCircleNodes;
    long k = 0;
    for (int i = 0; i < kBallRadial; ++i) {
      const double s = 0.5 * (gl_n[i] + 1.0);
      const double ws = 0.5 * gl_w[i];
      for (int j = 0; j < kCircleNodes; ++j, ++k) {
        const double th = j * dth;
        Vec x(2);
        x[0] = s * std::cos(th);
        x[1] = s * std::sin(th);
        impl->interior.nodes.col(k) = x;
        double dens = 1.0;
        for (int c = 0; c < 2; ++c)
          dens *= std::exp(-0.5 * x[c] * x[c] / model.lambda(c)) /
                  std::sqrt(2.0 * M_PI * model.lambda(c));
        impl->interior.weights[k] = ws * dth * s * dens;
      }
    }
    impl->has_interior = true;

    // Boundary: the whitened boundary is an ellipse; trapezoid in angle.
    impl->boundary.nodes.resize(2, kCircleNodes);
    impl->boundary.weights.resize(kCircleNodes);
    for (int j = 0; j < kCircleNodes; ++j) {
      const double th = j * dth;
      Vec x(2);
      x[0] = std::cos(th);
      x[1] = std::sin(th);
      impl->boundary.nodes.col(j) = x;
      Eigen::Vector2d dz(-std::sin(th) / model.sqrt_lambda(0),
                         std::cos(th) / model.sqrt_lambda(1));
      impl->boundary.weights[j] = model.whitened_density(x) * dz.norm() * dth;
    }
    fill_levelset_data(impl->boundary);
    impl->has_boundary = true;
  } else if (n == 3) {
    // Boundary only: latitude (Gauss-Legendre in cos) x longitude rule on the
    // whitened ellipsoid.
    Eigen::VectorXd gl_n, gl_w;
    gauss_legendre(kSphereLat, gl_n, gl_w);
    const double dth = 2.0 * M_PI / kSphereLon;
    const long total = kSphereLat * static_cast<long>(kSphereLon);
    impl->boundary.nodes.resize(3, total);
    impl->boundary.weights.resize(total);
    long k = 0;
    for (int i = 0; i < kSphereLat; ++i) {
      const double t = gl_n[i];  // cos(latitude)
      const double st = std::sqrt(std::max(0.0, 1.0 - t * t));
      for (int j = 0; j < kSphereLon; ++j, ++k) {
        const double th = j * dth;
        Vec x(3);
        x[0] = st * std::cos(th);
        x[1] = st * std::sin(th);
        x[2] = t;
        impl->boundary.nodes.col(k) = x;
        // Whitened parametrization derivatives.
        Eigen::Vector3d zt(-t * std::cos(th) / st / model.sqrt_lambda(0),
                           -t * std::sin(th) / st / model.sqrt_lambda(1),
                           1.0 / model.sqrt_lambda(2));
        Eigen::Vector3d zth(-st * std::sin(th) / model.sqrt_lambda(0),
                            st * std::cos(th) / model.sqrt_lambda(1), 0.0);
        const double area = zt.cross(zth).norm();
        impl->boundary.weights[k] = model.whitened_density(x) * area * gl_w[i] * dth;
      }
    }
    fill_levelset_data(impl->boundary);
    impl->has_boundary = true;
  }

  LevelSetDomain d;
  d.impl_ = impl;
  return d;
}

LevelSetDomain LevelSetDomain::custom(const GaussianModel& model, CylFunction G) {
  auto impl = std::make_shared<Impl>();
  impl->kind = DomainKind::custom;
  impl->model = model;
  impl->G = std::move(G);
  LevelSetDomain d;
  d.impl_ = impl;
  return d;
}

double LevelSetDomain::dh_distance(const Vec& x) const {
  return std::sqrt(static_cast<double>(dh_project(x).squaredNorm()));
}

Vec LevelSetDomain::dh_project(const Vec& x) const {
  const GaussianModel& m = impl_->model;
  const int n = m.dim;
  switch (impl_->kind) {
    case DomainKind::half_space: {
      const HalfSpaceFrame& fr = impl_->frame;
      double s = -fr.offset;
      for (int i = 0; i < n; ++i) s += fr.covector[i] * x[i];
      if (s <= 0.0) return Vec::Zero(n);
      return (s / fr.h_norm) * fr.normal_white;
    }
    case DomainKind::unit_ball: {
      Vec z = m.whiten(x);
      double g0 = -1.0;
      for (int i = 0; i < n; ++i) g0 += m.lambda(i) * z[i] * z[i];
      if (g0 <= 0.0) return Vec::Zero(n);
      // Projection in whitened coordinates onto the ellipsoid sum l z^2 <= 1:
      // p_i = z_i / (1 + t l_i) with the multiplier t solving the constraint.
      double t = 0.0;
      bool done = false;
      for (int it = 0; it < 200; ++it) {
        double g = -1.0, dg = 0.0;
        for (int i = 0; i < n; ++i) {
          const double l = m.lambda(i);
          const double d = 1.0 + t * l;
          g += l * z[i] * z[i] / (d * d);
          dg += -2.0 * l * l * z[i] * z[i] / (d * d * d);
        }
        if (std::abs(g) <= 1e-12) {
          done = true;
          break;
        }
        t = std::max(t - g / dg, 0.0);
      }
      if (!done) throw std::runtime_error("projection failed");
      Vec p(n);
      for (int i = 0; i < n; ++i) p[i] = z[i] / (1.0 + t * m.lambda(i));
      return z - p;
    }
    case DomainKind::custom:
      throw std::runtime_error("projection unavailable for custom domains");
  }
  throw std::logic_error("unreachable");
}

Vec LevelSetDomain::dh_distance_grad(const Vec& x) const {
  Vec h = dh_project(x);
  const double d = h.norm();
  if (d == 0.0) return Vec::Zero(impl_->model.dim);
  return h / d;
}

namespace {

bool gauss_hermite_suits(const Weight& w) {
  // Weights with an H-Lipschitz gradient grow at most quadratically, which
  // Gauss-Hermite against mu handles; anything faster gets adaptive rules.
  return w.is_zero() || w.grad_lipschitz().has_value();
}

constexpr double kAdaptivePanel = 0.5;
constexpr int kAdaptivePoints = 10;
constexpr double kSpanFloor = 1e-22;

// n = 3 tensor rules would explode at full resolution; a coarser panel and a
// tighter span floor keep them near 1e-8 accuracy at ~1e5 nodes.
constexpr double kAdaptivePanel3 = 1.0;
constexpr int kAdaptivePoints3 = 8;
constexpr double kSpanFloor3 = 1e-16;

// Decay span of exp(-U) gamma along one frame axis, other coordinates at a
// few offsets; returns [lo, hi] in the frame coordinate.
std::pair<double, double> axis_span(const GaussianModel& m, const Eigen::MatrixXd& rot,
                                    const CylFunction& U, int axis, double fixed0,
                                    bool has_fixed0, double floor = kSpanFloor,
                                    double margin = 1.0) {
  const int n = m.dim;
  double peak = 0.0;
  std::vector<double> offsets{0.0, 1.2, -1.2};
  auto profile = [&](double t) {
    double best = 0.0;
    for (double o : offsets) {
      Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, o);
      if (has_fixed0) eta[0] = fixed0;
      eta[axis] = t;
      Eigen::VectorXd z = rot * eta;
      Vec x(n);
      for (int i = 0; i < n; ++i) x[i] = z[i] * m.sqrt_lambda(i);
      best = std::max(best, std::exp(-U.value(x)) * std::exp(-0.5 * t * t));
    }
    return best;
  };
  std::vector<double> ts, ps;
  for (double t = -kCutoff; t <= kCutoff + 1e-9; t += 0.25) {
    ts.push_back(t);
    ps.push_back(profile(t));
    peak = std::max(peak, ps.back());
  }
  double lo = -kCutoff, hi = kCutoff;
  for (size_t i = 0; i < ts.size(); ++i)
    if (ps[i] >= peak * floor) {
      lo = ts[i];
      break;
    }
  for (size_t i = ts.size(); i-- > 0;)
    if (ps[i] >= peak * floor) {
      hi = ts[i];
      break;
    }
  return {std::max(lo - margin, -kCutoff), std::min(hi + margin, kCutoff)};
}

// Composite Gauss-Legendre tensor rule in frame coordinates with the full
// weight exp(-U(x)) gamma_n(eta) folded into the node weights.
QuadratureGrid adaptive_tensor_rule(const GaussianModel& m, const Eigen::MatrixXd& rot,
                                    const std::vector<std::pair<double, double>>& spans,
                                    const CylFunction& U) {
  const int n = m.dim;
  const double panel = n >= 3 ? kAdaptivePanel3 : kAdaptivePanel;
  const int points = n >= 3 ? kAdaptivePoints3 : kAdaptivePoints;
  Eigen::VectorXd gl_n, gl_w;
  gauss_legendre(points, gl_n, gl_w);
  std::vector<std::vector<double>> nodes1(static_cast<size_t>(n)),
      weights1(static_cast<size_t>(n));
  long total = 1;
  for (int i = 0; i < n; ++i) {
    const auto [lo, hi] = spans[static_cast<size_t>(i)];
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / panel)));
    const double h = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p)
      for (int q = 0; q < points; ++q) {
        nodes1[static_cast<size_t>(i)].push_back(lo + h * (p + 0.5 * (gl_n[q] + 1.0)));
        weights1[static_cast<size_t>(i)].push_back(0.5 * h * gl_w[q]);
      }
    total *= static_cast<long>(nodes1[static_cast<size_t>(i)].size());
  }
  QuadratureGrid grid;
  grid.nodes.resize(n, total);
  grid.weights.resize(total);
  std::vector<size_t> idx(static_cast<size_t>(n), 0);
  const double dens_norm = std::pow(2.0 * M_PI, -0.5 * n);
  Eigen::VectorXd eta(n);
  Vec x(n);
  for (long k = 0; k < total; ++k) {
    double w = dens_norm;
    double q2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t = nodes1[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
      eta[i] = t;
      q2 += t * t;
      w *= weights1[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
    }
    Eigen::VectorXd z = rot * eta;
    for (int i = 0; i < n; ++i) x[i] = z[i] * m.sqrt_lambda(i);
    grid.nodes.col(k) = x;
    grid.weights[k] = w * std::exp(-0.5 * q2) * std::exp(-U.value(x));
    for (int i = 0; i < n; ++i) {
      if (++idx[static_cast<size_t>(i)] < nodes1[static_cast<size_t>(i)].size()) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return grid;
}

}  // namespace

QuadratureGrid weighted_interior(const LevelSetDomain& d, const Weight& w) {
  if (gauss_hermite_suits(w) || d.kind() == DomainKind::unit_ball)
    return apply_weight(d.interior_quad(), w.U());
  if (d.kind() != DomainKind::half_space) throw std::runtime_error("no interior rule");
  const GaussianModel& m = d.model();
  if (m.dim > 3) throw std::runtime_error("adaptive rule rejected: dimension exceeds 3");
  const HalfSpaceFrame& fr = d.frame();
  const double floor = m.dim >= 3 ? kSpanFloor3 : kSpanFloor;
  const double margin = m.dim >= 3 ? 0.5 : 1.0;
  std::vector<std::pair<double, double>> spans;
  auto n0 = axis_span(m, fr.rot, w.U(), 0, 0.0, false, floor, margin);
  spans.emplace_back(std::max(n0.first, fr.rstar - kCutoff), fr.rstar);
  for (int i = 1; i < m.dim; ++i)
    spans.push_back(axis_span(m, fr.rot, w.U(), i, fr.rstar, true, floor, margin));
  return adaptive_tensor_rule(m, fr.rot, spans, w.U());
}

SurfaceQuad weighted_boundary(const LevelSetDomain& d, const Weight& w) {
  const GaussianModel& m = d.model();
  if (gauss_hermite_suits(w) || d.kind() == DomainKind::unit_ball ||
      m.dim == 1) {
    SurfaceQuad sq = d.boundary_quad();
    Vec x(m.dim);
    for (int k = 0; k < sq.size(); ++k) {
      x = sq.nodes.col(k);
      sq.weights[k] *= std::exp(-w.U().value(x));
    }
    return sq;
  }
  if (d.kind() != DomainKind::half_space) throw std::runtime_error("no surface rule");
  const HalfSpaceFrame& fr = d.frame();
  const int n = m.dim;
  // Adaptive tangential rule on the hyperplane.
  Eigen::VectorXd gl_n, gl_w;
  gauss_legendre(kAdaptivePoints, gl_n, gl_w);
  std::vector<std::vector<double>> nodes1, weights1;
  long total = 1;
  for (int i = 1; i < n; ++i) {
    const auto [lo, hi] = axis_span(m, fr.rot, w.U(), i, fr.rstar, true);
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / kAdaptivePanel)));
    const double h = (hi - lo) / panels;
    std::vector<double> nd, wt;
    for (int p = 0; p < panels; ++p)
      for (int q = 0; q < kAdaptivePoints; ++q) {
        nd.push_back(lo + h * (p + 0.5 * (gl_n[q] + 1.0)));
        wt.push_back(0.5 * h * gl_w[q]);
      }
    total *= static_cast<long>(nd.size());
    nodes1.push_back(std::move(nd));
    weights1.push_back(std::move(wt));
  }
  SurfaceQuad sq;
  sq.nodes.resize(n, total);
  sq.weights.resize(total);
  Vec b(n);
  for (int i = 0; i < n; ++i) b[i] = fr.covector[i] * m.sqrt_lambda(i);
  sq.grad_G.resize(n, total);
  sq.grad_norm.resize(total);
  sq.hess_G.assign(static_cast<size_t>(total), Mat::Zero(n, n));
  const double dens_norm = std::pow(2.0 * M_PI, -0.5 * (n - 1));
  const double gn = std::exp(-0.5 * fr.rstar * fr.rstar) / std::sqrt(2.0 * M_PI);
  std::vector<size_t> idx(static_cast<size_t>(n - 1), 0);
  Eigen::VectorXd eta(n);
  Vec x(n);
  for (long k = 0; k < total; ++k) {
    double wq = dens_norm;
    double q2 = 0.0;
    eta[0] = fr.rstar;
    for (int i = 0; i < n - 1; ++i) {
      const double t = nodes1[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
      eta[i + 1] = t;
      q2 += t * t;
      wq *= weights1[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
    }
    Eigen::VectorXd z = fr.rot * eta;
    for (int i = 0; i < n; ++i) x[i] = z[i] * m.sqrt_lambda(i);
    sq.nodes.col(k) = x;
    sq.weights[k] = wq * std::exp(-0.5 * q2) * gn * std::exp(-w.U().value(x));
    sq.grad_G.col(k) = b;
    sq.grad_norm[k] = fr.h_norm;
    for (int i = 0; i < n - 1; ++i) {
      if (++idx[static_cast<size_t>(i)] < nodes1[static_cast<size_t>(i)].size()) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return sq;
}

QuadratureGrid weighted_whole_grid(const GaussianModel& model, const Weight& w) {
  if (gauss_hermite_suits(w)) return apply_weight(tensor_mu_grid(model), w.U());
  if (model.dim > 3)
    throw std::runtime_error("adaptive rule rejected: dimension exceeds 3");
  if (model.dim <= 2) {
    Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(model.dim, model.dim);
    std::vector<std::pair<double, double>> spans;
    for (int i = 0; i < model.dim; ++i)
      spans.push_back(axis_span(model, rot, w.U(), i, 0.0, false));
    return adaptive_tensor_rule(model, rot, spans, w.U());
  }

  // n = 3: radial-shell rule (radius Gauss-Legendre, latitude Gauss-Legendre,
  // longitude trapezoid) keeps the node count moderate; exact in the angular
  // directions for polynomial-times-analytic integrands.
  const CylFunction& U = w.U();
  double R = 0.5;
  {
    std::vector<Vec> dirs;
    for (int i = 0; i < 3; ++i) {
      Vec e = Vec::Zero(3);
      e[i] = 1.0;
      dirs.push_back(e);
      dirs.push_back(-e);
    }
    Vec diag(3);
    diag << 1.0, 1.0, 1.0;
    dirs.push_back(diag / diag.norm());
    dirs.push_back(-diag / diag.norm());
    const double smax = kCutoff * std::sqrt(*std::max_element(model.spectrum.begin(),
                                                              model.spectrum.end()));
    for (const Vec& dir : dirs) {
      double peak = 0.0;
      std::vector<double> ss, ps;
      for (double s = 0.0; s <= smax; s += 0.1) {
        Vec x = s * dir;
        double q = 0.0;
        for (int i = 0; i < 3; ++i) q += x[i] * x[i] / model.lambda(i);
        ss.push_back(s);
        ps.push_back(std::exp(-U.value(x) - 0.5 * q));
        peak = std::max(peak, ps.back());
      }
      for (size_t i = ss.size(); i-- > 0;)
        if (ps[i] >= peak * kSpanFloor) {
          R = std::max(R, ss[i] + 0.5);
          break;
        }
    }
    R = std::min(R, smax);
  }

  const int nr = 48, nt = 24, nl = 48;
  Eigen::VectorXd rs, rw, ts, tw;
  gauss_legendre(nr, rs, rw);
  gauss_legendre(nt, ts, tw);
  const double dth = 2.0 * M_PI / nl;
  QuadratureGrid grid;
  grid.nodes.resize(3, static_cast<long>(nr) * nt * nl);
  grid.weights.resize(grid.nodes.cols());
  long k = 0;
  Vec x(3);
  for (int i = 0; i < nr; ++i) {
    const double s = 0.5 * R * (rs[i] + 1.0);
    const double ws = 0.5 * R * rw[i] * s * s;
    for (int j = 0; j < nt; ++j) {
      const double t = ts[j];
      const double st = std::sqrt(std::max(0.0, 1.0 - t * t));
      for (int l = 0; l < nl; ++l, ++k) {
        const double th = l * dth;
        x[0] = s * st * std::cos(th);
        x[1] = s * st * std::sin(th);
        x[2] = s * t;
        grid.nodes.col(k) = x;
        double dens = 1.0;
        for (int i2 = 0; i2 < 3; ++i2)
          dens *= std::exp(-0.5 * x[i2] * x[i2] / model.lambda(i2)) /
                  std::sqrt(2.0 * M_PI * model.lambda(i2));
        grid.weights[k] = ws * tw[j] * dth * dens * std::exp(-U.value(x));
      }
    }
  }
  return grid;
}

double surface_integrate(const LevelSetDomain& d, const CylFunction& g) {
  return surface_integrate(d, [&g](const Vec& x) { return g.value(x); });
}

double surface_integrate(const LevelSetDomain& d,
                         const std::function<double(const Vec&)>& g) {
  const SurfaceQuad& sq = d.boundary_quad();
  double s = 0.0;
  Vec x(sq.nodes.rows());
  for (int k = 0; k < sq.size(); ++k) {
    x = sq.nodes.col(k);
    s += sq.weights[k] * g(x);
  }
  return s;
}

Eigen::VectorXd trace_restrict(const CylFunction& f, const LevelSetDomain& d) {
  const SurfaceQuad& sq = d.boundary_quad();
  Eigen::VectorXd v(sq.size());
  Vec x(sq.nodes.rows());
  for (int k = 0; k < sq.size(); ++k) {
    x = sq.nodes.col(k);
    v[k] = f.value(x);
  }
  return v;
}

}  // namespace wn
