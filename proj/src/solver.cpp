#include "wn/solver.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

#include <Eigen/Sparse>

namespace wn {

namespace {

constexpr double kLineCutoff = 8.75;
constexpr double kWeightFloor = 1e-40;

double gauss1(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); }

struct WeightView {
  std::function<double(const Vec&)> value;
  std::function<Mat(const Vec&)> hess;
  bool zero = false;
  bool gauss_hermite_ok = true;  // tails no heavier than a shifted Gaussian
};

WeightView make_view(const Weight& w) {
  WeightView v;
  v.zero = w.is_zero();
  v.gauss_hermite_ok = w.is_zero() || w.grad_lipschitz().has_value();
  CylFunction u = w.U();
  v.value = [u](const Vec& x) { return u.value(x); };
  v.hess = [u](const Vec& x) -> Mat { return u.hess_h(x); };
  return v;
}

WeightView make_view(const PenalizedWeight& w) {
  WeightView v;
  v.zero = false;
  // The penalty decays only along the normal coordinate, which the grid
  // resolves nodally; tangential adaptivity follows the base weight.
  v.gauss_hermite_ok =
      w.base().is_zero() || w.base().grad_lipschitz().has_value();
  PenalizedWeight pw = w;
  v.value = [pw](const Vec& x) { return pw.value(x); };
  v.hess = [pw](const Vec& x) -> Mat { return pw.hess_h(x); };
  return v;
}

// ------------------------------------------------------------ multi-indices

std::vector<std::vector<int>> multi_indices(int dim, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<size_t>(dim), 0);
  // graded lexicographic
  for (int total = 0; total <= degree; ++total) {
    std::function<void(int, int)> rec = [&](int pos, int left) {
      if (pos == dim - 1) {
        cur[static_cast<size_t>(pos)] = left;
        out.push_back(cur);
        return;
      }
      for (int d = left; d >= 0; --d) {
        cur[static_cast<size_t>(pos)] = d;
        rec(pos + 1, left - d);
      }
    };
    if (dim == 0) break;
    rec(0, total);
  }
  return out;
}

// --------------------------------------------------------- spectral operator

class SpectralOperator {
 public:
  SpectralOperator(const GaussianModel& model, const Weight& w, int degree)
      : model_(model), weight_(make_view(w)), degree_(degree) {
    if (weight_.gauss_hermite_ok) {
      GaussianModel qm = model;
      qm.quad_order = std::max(model.quad_order, degree + 8);
      grid_ = apply_weight(tensor_mu_grid(qm), w.U());
    } else {
      grid_ = weighted_whole_grid(model, w);
    }
    const int N = grid_.size();
    wnu_ = grid_.weights;
    indices_ = multi_indices(model.dim, degree);
    Vec x(model.dim);
    const int nb = static_cast<int>(indices_.size());

    Eigen::MatrixXd B(nb, N);
    std::vector<Eigen::MatrixXd> Bd(static_cast<size_t>(model.dim),
                                    Eigen::MatrixXd(nb, N));
    std::vector<double> val(static_cast<size_t>((degree + 1) * model.dim));
    std::vector<double> der(val.size());
    for (int k = 0; k < N; ++k) {
      for (int i = 0; i < model.dim; ++i) {
        const double xi = grid_.nodes(i, k) / model.sqrt_lambda(i);
        hermite_all(xi, degree, &val[static_cast<size_t>(i * (degree + 1))],
                    &der[static_cast<size_t>(i * (degree + 1))], nullptr);
      }
      for (int m = 0; m < nb; ++m) {
        double prod = 1.0;
        for (int i = 0; i < model.dim; ++i)
          prod *= val[static_cast<size_t>(i * (degree + 1) + indices_[static_cast<size_t>(m)][static_cast<size_t>(i)])];
        B(m, k) = prod;
        for (int i = 0; i < model.dim; ++i) {
          double dp = der[static_cast<size_t>(i * (degree + 1) + indices_[static_cast<size_t>(m)][static_cast<size_t>(i)])];
          for (int j = 0; j < model.dim; ++j)
            if (j != i)
              dp *= val[static_cast<size_t>(j * (degree + 1) + indices_[static_cast<size_t>(m)][static_cast<size_t>(j)])];
          Bd[static_cast<size_t>(i)](m, k) = dp;
        }
      }
    }
    mass_ = B * wnu_.asDiagonal() * B.transpose();
    stiffness_ = Eigen::MatrixXd::Zero(nb, nb);
    for (int i = 0; i < model.dim; ++i)
      stiffness_ += Bd[static_cast<size_t>(i)] * wnu_.asDiagonal() *
                    Bd[static_cast<size_t>(i)].transpose();
    B_ = std::move(B);
  }

  SolveResult solve(double lambda, const CylFunction& f) const {
    const int nb = static_cast<int>(indices_.size());
    const int N = grid_.size();
    Eigen::VectorXd fv(N);
    Vec x(model_.dim);
    for (int k = 0; k < N; ++k) {
      x = grid_.nodes.col(k);
      fv[k] = f.value(x);
    }
    Eigen::VectorXd b = B_ * wnu_.cwiseProduct(fv);

    // Under heavy weights the mu-orthonormal Hermite basis loses numerical
    // independence in L^2(nu); work in a nu-orthonormal subbasis obtained by
    // filtering the mass spectrum, which keeps the system manifestly SPD.
    if (trans_.size() == 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mass_);
      if (es.info() != Eigen::Success)
        throw std::runtime_error("discretization degenerate");
      const double dmax = es.eigenvalues().maxCoeff();
      if (!(dmax > 0.0)) throw std::runtime_error("discretization degenerate");
      std::vector<int> keep;
      for (int i = 0; i < nb; ++i)
        if (es.eigenvalues()[i] > 1e-11 * dmax) keep.push_back(i);
      trans_.resize(nb, static_cast<int>(keep.size()));
      for (size_t k = 0; k < keep.size(); ++k)
        trans_.col(static_cast<long>(k)) =
            es.eigenvectors().col(keep[k]) / std::sqrt(es.eigenvalues()[keep[k]]);
      stiff_t_ = trans_.transpose() * stiffness_ * trans_;
    }
    const long nk = trans_.cols();
    Eigen::MatrixXd A = stiff_t_;
    for (long i = 0; i < nk; ++i) A(i, i) += lambda;
    Eigen::VectorXd bt = trans_.transpose() * b;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw std::runtime_error("discretization degenerate");
    Eigen::VectorXd ct = ldlt.solve(bt);
    ct += ldlt.solve(bt - A * ct);  // one refinement step
    const double rres = (A * ct - bt).norm() / std::max(bt.norm(), 1e-300);
    Eigen::VectorXd c = trans_ * ct;

    SolveResult res;
    res.u = make_function(c);
    res.dofs = nb;
    res.system_residual = rres;
    res.f_norm = std::sqrt(fv.cwiseAbs2().dot(wnu_));

    // Norms by the cached grid.
    Eigen::VectorXd uv = B_.transpose() * c;
    res.norms.l2 = std::sqrt(uv.cwiseAbs2().dot(wnu_));
    double g2 = 0.0, h2 = 0.0, hf = 0.0;
    for (int k = 0; k < N; ++k) {
      x = grid_.nodes.col(k);
      const Vec g = res.u.grad_h(x);
      const Mat h = res.u.hess_h(x);
      g2 += wnu_[k] * g.squaredNorm();
      h2 += wnu_[k] * h.squaredNorm();
      if (!weight_.zero) hf += wnu_[k] * g.dot(weight_.hess(x) * g);
    }
    res.norms.grad = std::sqrt(g2);
    res.norms.hess = std::sqrt(h2);
    res.norms.hess_form = hf;
    return res;
  }

 private:
  CylFunction make_function(const Eigen::VectorXd& coeffs) const {
    struct Data {
      GaussianModel model;
      std::vector<std::vector<int>> indices;
      Eigen::VectorXd c;
      int degree;
    };
    auto data = std::make_shared<Data>(Data{model_, indices_, coeffs, degree_});
    std::vector<int> active;
    for (int i = 0; i < model_.dim; ++i) active.push_back(i);

    auto tables = [](const Data& d, const Vec& x, double* val, double* der,
                     double* der2) {
      for (int i = 0; i < d.model.dim; ++i) {
        const double xi = x[i] / d.model.sqrt_lambda(i);
        hermite_all(xi, d.degree, val + i * (d.degree + 1), der + i * (d.degree + 1),
                    der2 ? der2 + i * (d.degree + 1) : nullptr);
      }
    };
    auto value = [data, tables](const Vec& x) {
      double val[kMaxDim * 64], der[kMaxDim * 64];
      tables(*data, x, val, der, nullptr);
      double s = 0.0;
      const int D = data->degree + 1;
      for (size_t m = 0; m < data->indices.size(); ++m) {
        double prod = data->c[static_cast<long>(m)];
        for (int i = 0; i < data->model.dim; ++i)
          prod *= val[i * D + data->indices[m][static_cast<size_t>(i)]];
        s += prod;
      }
      return s;
    };
    auto grad = [data, tables](const Vec& x) -> Vec {
      double val[kMaxDim * 64], der[kMaxDim * 64];
      tables(*data, x, val, der, nullptr);
      const int n = data->model.dim, D = data->degree + 1;
      Vec g = Vec::Zero(n);
      for (size_t m = 0; m < data->indices.size(); ++m) {
        const double cm = data->c[static_cast<long>(m)];
        for (int i = 0; i < n; ++i) {
          double prod = cm * der[i * D + data->indices[m][static_cast<size_t>(i)]];
          for (int j = 0; j < n; ++j)
            if (j != i) prod *= val[j * D + data->indices[m][static_cast<size_t>(j)]];
          g[i] += prod;
        }
      }
      return g;
    };
    auto hess = [data, tables](const Vec& x) -> Mat {
      double val[kMaxDim * 64], der[kMaxDim * 64], der2[kMaxDim * 64];
      tables(*data, x, val, der, der2);
      const int n = data->model.dim, D = data->degree + 1;
      Mat h = Mat::Zero(n, n);
      for (size_t m = 0; m < data->indices.size(); ++m) {
        const double cm = data->c[static_cast<long>(m)];
        for (int i = 0; i < n; ++i)
          for (int j = 0; j <= i; ++j) {
            double prod = cm;
            if (i == j) {
              prod *= der2[i * D + data->indices[m][static_cast<size_t>(i)]];
            } else {
              prod *= der[i * D + data->indices[m][static_cast<size_t>(i)]] *
                      der[j * D + data->indices[m][static_cast<size_t>(j)]];
            }
            for (int l = 0; l < n; ++l)
              if (l != i && l != j)
                prod *= val[l * D + data->indices[m][static_cast<size_t>(l)]];
            h(i, j) += prod;
          }
      }
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) h(i, j) = h(j, i);
      return h;
    };
    return CylFunction(model_.dim, active, value, grad, hess);
  }

  GaussianModel model_;
  WeightView weight_;
  int degree_;
  QuadratureGrid grid_;
  Eigen::VectorXd wnu_;
  std::vector<std::vector<int>> indices_;
  Eigen::MatrixXd B_;
  Eigen::MatrixXd mass_, stiffness_;
  mutable Eigen::MatrixXd trans_, stiff_t_;  // filtered nu-orthonormal basis
};

// ------------------------------------------------------- local cubic in 1-D

// Piecewise cubic Lagrange evaluation of nodal data on a uniform grid.
struct NodalInterp {
  double lo = 0.0, h = 1.0;
  Eigen::MatrixXd values;  // J+1 x modes

  void eval(double eta, int mode, double& v, double& d1, double& d2) const {
    const int J = static_cast<int>(values.rows()) - 1;
    double s = (eta - lo) / h;
    int j = static_cast<int>(std::floor(s));
    j = std::max(1, std::min(j, J - 2));
    const double t = s - j;  // local coordinate in [-1, 2]
    const double ym1 = values(j - 1, mode), y0 = values(j, mode),
                 y1 = values(j + 1, mode), y2 = values(j + 2, mode);
    // Cubic through nodes at t = -1, 0, 1, 2.
    const double a = y0;
    const double b = (-2.0 * ym1 - 3.0 * y0 + 6.0 * y1 - y2) / 6.0;
    const double c2 = (ym1 - 2.0 * y0 + y1) / 2.0;
    const double d = (-ym1 + 3.0 * y0 - 3.0 * y1 + y2) / 6.0;
    v = a + t * (b + t * (c2 + t * d));
    d1 = (b + t * (2.0 * c2 + 3.0 * t * d)) / h;
    d2 = (2.0 * c2 + 6.0 * t * d) / (h * h);
  }
};

// ------------------------------------------------------ half-space operator

// Conservative finite differences in the whitened normal coordinate against
// the weighted measure, tensorized with tangential Hermite modes. With a
// right boundary at rstar the zero-flux closure leaves the Neumann condition
// natural; without one the grid extends past the boundary (penalized solves).
class LineOperator {
 public:
  LineOperator(const GaussianModel& model, const HalfSpaceFrame& frame,
               const WeightView& weight, double mesh_h, double lo, double hi,
               int tangential_degree)
      : model_(model), frame_(frame), weight_(weight), h_(mesh_h) {
    if (model.dim > 2)
      throw std::runtime_error("half-space solver supports n <= 2");
    tdeg_ = model.dim == 1 ? 0 : tangential_degree;
    tdim_ = tdeg_ + 1;

    const int q = std::max(model.quad_order, 2 * tdeg_ + 8);
    if (model.dim == 2) {
      if (weight.gauss_hermite_ok) {
        gauss_hermite(q, tq_, tw_);
      } else {
        // Composite rule following the decay of exp(-U) along the
        // tangential coordinate, scanned at two normal positions.
        double span = 1.0;
        for (double eta1 : {hi, hi - 2.0}) {
          for (double t = 0.0; t <= 8.75; t += 0.25) {
            const double p = std::exp(-weight.value(ambient(eta1, t))) *
                             std::exp(-0.5 * t * t);
            if (p >= 1e-22) span = std::max(span, t);
          }
        }
        span = std::min(span + 1.0, 8.75);
        Eigen::VectorXd nd, wt;
        gaussian_segment_rule(-span, span, 0.5, 10, nd, wt);
        tq_ = nd;
        tw_ = wt;
      }
      Ht_.resize(tdim_, tq_.size());
      Htd_.resize(tdim_, tq_.size());
      std::vector<double> v(static_cast<size_t>(tdim_)), dv(static_cast<size_t>(tdim_));
      for (long k = 0; k < tq_.size(); ++k) {
        hermite_all(tq_[k], tdeg_, v.data(), dv.data(), nullptr);
        for (int m = 0; m < tdim_; ++m) {
          Ht_(m, k) = v[static_cast<size_t>(m)];
          Htd_(m, k) = dv[static_cast<size_t>(m)];
        }
      }
      ttrans_ = Eigen::MatrixXd::Identity(tdim_, tdim_);
      if (!weight.gauss_hermite_ok) {
        // High-degree Hermites lose independence against heavy weights; move
        // to an eigenvalue-filtered basis of the reference tangential Gram.
        Eigen::MatrixXd gref = Eigen::MatrixXd::Zero(tdim_, tdim_);
        Eigen::MatrixXd m0, m1;
        for (double eta1 : {hi, hi - 1.0, hi - 2.5}) {
          blocks(eta1, m0, nullptr);
          gref += m0 / gauss1(eta1);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gref);
        const double dmax = es.eigenvalues().maxCoeff();
        std::vector<int> keep;
        for (int i = 0; i < tdim_; ++i)
          if (es.eigenvalues()[i] > 1e-11 * dmax) keep.push_back(i);
        Eigen::MatrixXd T(tdim_, static_cast<int>(keep.size()));
        for (size_t kk = 0; kk < keep.size(); ++kk)
          T.col(static_cast<long>(kk)) =
              es.eigenvectors().col(keep[kk]) / std::sqrt(es.eigenvalues()[keep[kk]]);
        ttrans_ = T;
        Ht_ = (T.transpose() * Ht_).eval();
        Htd_ = (T.transpose() * Htd_).eval();
        tdim_ = static_cast<int>(keep.size());
      }
    } else {
      tq_.resize(1);
      tw_ = Eigen::VectorXd::Ones(1);
      Ht_ = Eigen::MatrixXd::Ones(1, 1);
      Htd_ = Eigen::MatrixXd::Zero(1, 1);
      ttrans_ = Eigen::MatrixXd::Ones(1, 1);
    }

    // Normal grid, trimmed where the weight underflows.
    int J = static_cast<int>(std::round((hi - lo) / h_));
    J = std::max(J, 8);
    std::vector<double> eta;
    for (int j = 0; j <= J; ++j) eta.push_back(hi - (J - j) * h_);
    double wmax = 0.0;
    std::vector<double> wline(eta.size());
    for (size_t j = 0; j < eta.size(); ++j) {
      wline[j] = line_weight(eta[j]);
      wmax = std::max(wmax, wline[j]);
    }
    size_t first = 0, last = eta.size() - 1;
    while (first + 8 < last && wline[first] < wmax * kWeightFloor) ++first;
    while (last > first + 8 && wline[last] < wmax * kWeightFloor) --last;
    eta_.assign(eta.begin() + static_cast<long>(first), eta.begin() + static_cast<long>(last) + 1);

    assemble();
  }

  Vec ambient(double eta1, double etat) const {
    const int n = model_.dim;
    Eigen::VectorXd e(n);
    e[0] = eta1;
    if (n == 2) e[1] = etat;
    Eigen::VectorXd z = frame_.rot * e;
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = z[i] * model_.sqrt_lambda(i);
    return x;
  }

  double line_weight(double eta1) const {
    const double u = weight_.zero ? 0.0 : weight_.value(ambient(eta1, 0.0));
    return std::exp(-u) * gauss1(eta1);
  }

  // Tangential blocks at a fixed normal position.
  void blocks(double eta1, Eigen::MatrixXd& m0, Eigen::MatrixXd* m1) const {
    m0.setZero(tdim_, tdim_);
    if (m1) m1->setZero(tdim_, tdim_);
    for (long k = 0; k < tq_.size(); ++k) {
      double wq = tw_[k] * gauss1(eta1);
      if (!weight_.zero) wq *= std::exp(-weight_.value(ambient(eta1, tq_[k])));
      m0 += wq * (Ht_.col(k) * Ht_.col(k).transpose());
      if (m1) *m1 += wq * (Htd_.col(k) * Htd_.col(k).transpose());
    }
  }

  void assemble() {
    const int J = static_cast<int>(eta_.size()) - 1;
    const int nb = (J + 1) * tdim_;
    diag_.assign(static_cast<size_t>(J + 1), Eigen::MatrixXd());
    stiff_.assign(static_cast<size_t>(J + 1), Eigen::MatrixXd());
    half_.assign(static_cast<size_t>(J), Eigen::MatrixXd());
    for (int j = 0; j <= J; ++j) blocks(eta_[static_cast<size_t>(j)], diag_[static_cast<size_t>(j)], &stiff_[static_cast<size_t>(j)]);
    for (int j = 0; j < J; ++j) {
      Eigen::MatrixXd m0;
      blocks(0.5 * (eta_[static_cast<size_t>(j)] + eta_[static_cast<size_t>(j + 1)]), m0, nullptr);
      half_[static_cast<size_t>(j)] = m0;
    }
    nb_ = nb;
  }

  double cell(int j) const {
    const int J = static_cast<int>(eta_.size()) - 1;
    return (j == 0 || j == J) ? 0.5 * h_ : h_;
  }

  struct Solution {
    NodalInterp interp;
    Eigen::MatrixXd nodal;  // J+1 x tdim
  };

  SolveResult solve(double lambda, const CylFunction& f, bool domain_solve) const {
    const int J = static_cast<int>(eta_.size()) - 1;
    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> trips;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nb_);

    auto add_block = [&](int jr, int jc, const Eigen::MatrixXd& blk, double scale) {
      for (int r = 0; r < tdim_; ++r)
        for (int c = 0; c < tdim_; ++c) {
          const double v = blk(r, c) * scale;
          if (v != 0.0) trips.emplace_back(jr * tdim_ + r, jc * tdim_ + c, v);
        }
    };

    for (int j = 0; j <= J; ++j) {
      add_block(j, j, diag_[static_cast<size_t>(j)], lambda * cell(j));
      add_block(j, j, stiff_[static_cast<size_t>(j)], cell(j));
      // RHS: tangential projection of f.
      Eigen::VectorXd fj = Eigen::VectorXd::Zero(tdim_);
      for (long k = 0; k < tq_.size(); ++k) {
        const Vec x = ambient(eta_[static_cast<size_t>(j)], tq_[k]);
        double wq = tw_[k] * gauss1(eta_[static_cast<size_t>(j)]);
        if (!weight_.zero) wq *= std::exp(-weight_.value(x));
        fj += wq * f.value(x) * Ht_.col(k);
      }
      b.segment(j * tdim_, tdim_) = cell(j) * fj;
    }
    for (int j = 0; j < J; ++j) {
      const Eigen::MatrixXd& mh = half_[static_cast<size_t>(j)];
      add_block(j, j, mh, 1.0 / h_);
      add_block(j + 1, j + 1, mh, 1.0 / h_);
      add_block(j, j + 1, mh, -1.0 / h_);
      add_block(j + 1, j, mh, -1.0 / h_);
    }

    Eigen::SparseMatrix<double> A(nb_, nb_);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(A);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
      throw std::runtime_error("discretization degenerate");
    Eigen::VectorXd c = ldlt.solve(b);
    c += ldlt.solve(b - A * c);
    const double rres = (A * c - b).norm() / std::max(b.norm(), 1e-300);

    Eigen::MatrixXd nodal(J + 1, tdim_);
    for (int j = 0; j <= J; ++j)
      for (int m = 0; m < tdim_; ++m) nodal(j, m) = c[j * tdim_ + m];

    // Cutoff adequacy: L2 share of the first cell.
    {
      const Eigen::VectorXd u0 = nodal.row(0).transpose();
      const double first = cell(0) * u0.dot(diag_[0] * u0);
      const double total = c.dot(A * c) / std::max(lambda, 1e-12);
      if (first > 1e-12 * std::max(total, 1e-300))
        throw std::runtime_error("cutoff insufficient");
    }

    SolveResult res;
    res.dofs = nb_;
    res.system_residual = rres;
    res.u = make_function(nodal);

    if (domain_solve) {
      // One-sided second-order normal derivative at the boundary, mean
      // square against the problem's own boundary measure exp(-U) rho.
      Eigen::VectorXd slope(tdim_);
      for (int m = 0; m < tdim_; ++m)
        slope[m] = (3.0 * nodal(J, m) - 4.0 * nodal(J - 1, m) + nodal(J - 2, m)) /
                   (2.0 * h_);
      Eigen::MatrixXd bmass;
      blocks(eta_.back(), bmass, nullptr);
      bmass /= gauss1(eta_.back());
      res.neumann_residual = std::sqrt(slope.dot(bmass * slope));
    }
    return res;
  }

  const std::vector<double>& eta() const { return eta_; }
  double mesh() const { return h_; }

  CylFunction make_function(const Eigen::MatrixXd& nodal) const {
    struct Data {
      GaussianModel model;
      HalfSpaceFrame frame;
      NodalInterp interp;
      Eigen::MatrixXd ttrans;  // full-basis -> working-basis transform
      int tdim, tdeg;
    };
    auto data = std::make_shared<Data>();
    data->model = model_;
    data->frame = frame_;
    data->interp.lo = eta_.front();
    data->interp.h = h_;
    data->interp.values = nodal;
    data->ttrans = ttrans_;
    data->tdim = tdim_;
    data->tdeg = tdeg_;

    const int n = model_.dim;
    std::vector<int> active;
    for (int i = 0; i < n; ++i) active.push_back(i);

    // eta = rot^T whiten(x); grad_h = rot * grad_eta; hess_h = rot H rot^T.
    auto frame_coords = [](const Data& d, const Vec& x) -> Eigen::VectorXd {
      Eigen::VectorXd z(d.model.dim);
      for (int i = 0; i < d.model.dim; ++i) z[i] = x[i] / d.model.sqrt_lambda(i);
      return d.frame.rot.transpose() * z;
    };
    auto tbasis = [](const Data& d, double t, double* tv, double* td, double* td2) {
      double v[64], dv[64], d2v[64];
      hermite_all(t, d.tdeg, v, dv, td2 ? d2v : nullptr);
      for (int m = 0; m < d.tdim; ++m) {
        double av = 0.0, ad = 0.0, ad2 = 0.0;
        for (int j = 0; j <= d.tdeg; ++j) {
          const double tmj = d.ttrans(j, m);
          av += tmj * v[j];
          ad += tmj * dv[j];
          if (td2) ad2 += tmj * d2v[j];
        }
        tv[m] = av;
        td[m] = ad;
        if (td2) td2[m] = ad2;
      }
    };
    auto value = [data, frame_coords, tbasis](const Vec& x) {
      const Eigen::VectorXd eta = frame_coords(*data, x);
      double tv[64], td[64];
      tbasis(*data, data->model.dim == 2 ? eta[1] : 0.0, tv, td, nullptr);
      double s = 0.0;
      for (int m = 0; m < data->tdim; ++m) {
        double v, d1, d2;
        data->interp.eval(eta[0], m, v, d1, d2);
        s += v * tv[m];
      }
      return s;
    };
    auto grad = [data, frame_coords, tbasis](const Vec& x) -> Vec {
      const int n2 = data->model.dim;
      const Eigen::VectorXd eta = frame_coords(*data, x);
      double tv[64], td[64];
      tbasis(*data, n2 == 2 ? eta[1] : 0.0, tv, td, nullptr);
      Eigen::VectorXd ge = Eigen::VectorXd::Zero(n2);
      for (int m = 0; m < data->tdim; ++m) {
        double v, d1, d2;
        data->interp.eval(eta[0], m, v, d1, d2);
        ge[0] += d1 * tv[m];
        if (n2 == 2) ge[1] += v * td[m];
      }
      Eigen::VectorXd g = data->frame.rot * ge;
      Vec out(n2);
      for (int i = 0; i < n2; ++i) out[i] = g[i];
      return out;
    };
    auto hess = [data, frame_coords, tbasis](const Vec& x) -> Mat {
      const int n2 = data->model.dim;
      const Eigen::VectorXd eta = frame_coords(*data, x);
      double tv[64], td[64], td2[64];
      tbasis(*data, n2 == 2 ? eta[1] : 0.0, tv, td, td2);
      Eigen::MatrixXd he = Eigen::MatrixXd::Zero(n2, n2);
      for (int m = 0; m < data->tdim; ++m) {
        double v, d1, d2;
        data->interp.eval(eta[0], m, v, d1, d2);
        he(0, 0) += d2 * tv[m];
        if (n2 == 2) {
          he(0, 1) += d1 * td[m];
          he(1, 1) += v * td2[m];
        }
      }
      if (n2 == 2) he(1, 0) = he(0, 1);
      Eigen::MatrixXd h = data->frame.rot * he * data->frame.rot.transpose();
      Mat out(n2, n2);
      for (int i = 0; i < n2; ++i)
        for (int j = 0; j < n2; ++j) out(i, j) = h(i, j);
      return out;
    };
    return CylFunction(n, active, value, grad, hess);
  }

 private:
  GaussianModel model_;
  HalfSpaceFrame frame_;
  WeightView weight_;
  double h_;
  int tdeg_ = 0, tdim_ = 1, nb_ = 0;
  std::vector<double> eta_;
  Eigen::VectorXd tq_, tw_;
  Eigen::MatrixXd Ht_, Htd_, ttrans_;
  std::vector<Eigen::MatrixXd> diag_, stiff_, half_;
};

QuadratureGrid line_quadrature(const GaussianModel& model, const HalfSpaceFrame& frame,
                               const WeightView& weight, double lo, double hi) {
  Eigen::VectorXd sn, sw;
  gaussian_segment_rule(lo, hi, 0.25, 12, sn, sw);
  Eigen::VectorXd tq(1), tw(1);
  tw[0] = 1.0;
  tq[0] = 0.0;
  if (model.dim == 2) gauss_hermite(model.quad_order, tq, tw);
  const long total = sn.size() * tq.size();
  QuadratureGrid grid;
  grid.nodes.resize(model.dim, total);
  grid.weights.resize(total);
  long k = 0;
  for (long i = 0; i < sn.size(); ++i)
    for (long j = 0; j < tq.size(); ++j, ++k) {
      Eigen::VectorXd eta(model.dim);
      eta[0] = sn[i];
      if (model.dim == 2) eta[1] = tq[j];
      Eigen::VectorXd z = frame.rot * eta;
      Vec x(model.dim);
      for (int c = 0; c < model.dim; ++c) x[c] = z[c] * model.sqrt_lambda(c);
      grid.nodes.col(k) = x;
      double w = sw[i] * tw[j];
      if (!weight.zero) w *= std::exp(-weight.value(x));
      grid.weights[k] = w;
    }
  return grid;
}

double f_norm_on_grid(const CylFunction& f, const QuadratureGrid& grid) {
  double f2 = 0.0;
  Vec x(grid.nodes.rows());
  for (int k = 0; k < grid.size(); ++k) {
    x = grid.nodes.col(k);
    const double fv = f.value(x);
    f2 += grid.weights[k] * fv * fv;
  }
  return std::sqrt(f2);
}

Norms norms_on_grid(const CylFunction& u, const WeightView& w, const QuadratureGrid& grid) {
  Norms n;
  double l2 = 0.0, g2 = 0.0, h2 = 0.0, hf = 0.0;
  Vec x(grid.nodes.rows());
  for (int k = 0; k < grid.size(); ++k) {
    x = grid.nodes.col(k);
    const double v = u.value(x);
    const Vec g = u.grad_h(x);
    const Mat h = u.hess_h(x);
    const double wt = grid.weights[k];
    l2 += wt * v * v;
    g2 += wt * g.squaredNorm();
    h2 += wt * h.squaredNorm();
    if (!w.zero) hf += wt * g.dot(w.hess(x) * g);
  }
  n.l2 = std::sqrt(l2);
  n.grad = std::sqrt(g2);
  n.hess = std::sqrt(h2);
  n.hess_form = hf;
  return n;
}

}  // namespace

// ------------------------------------------------------------------ apply_L

CylFunction apply_L(const CylFunction& u, const Weight& w, const GaussianModel& model) {
  struct Captured {
    CylFunction u, U;
    bool zero;
    GaussianModel model;
  };
  auto cap = std::make_shared<Captured>(Captured{u, w.U(), w.is_zero(), model});
  auto value = [cap](const Vec& x) {
    const Mat h = cap->u.hess_h(x);
    const Vec g = cap->u.grad_h(x);
    double s = 0.0;
    for (int i = 0; i < cap->model.dim; ++i)
      s += h(i, i) - g[i] * x[i] / cap->model.sqrt_lambda(i);
    if (!cap->zero) {
      const Vec gu = cap->U.grad_h(x);
      for (int i = 0; i < cap->model.dim; ++i) s -= g[i] * gu[i];
    }
    return s;
  };
  return CylFunction(model.dim, u.active(), value, nullptr, nullptr);
}

// -------------------------------------------------------------------- solve

struct SolverHandle::Impl {
  std::unique_ptr<SpectralOperator> spectral;
  std::unique_ptr<LineOperator> line;
  bool domain_solve = false;
  WeightView view;
  QuadratureGrid norm_grid;  // line paths only
};

SolverHandle::SolverHandle(const DiscreteProblem& p) : impl_(new Impl) {
  if (p.penalty) {
    // Whole-space problem with the penalized weight; normal mesh follows
    // sqrt(alpha) so the boundary layer stays resolved.
    const LevelSetDomain& dom = p.penalty->domain();
    if (dom.kind() != DomainKind::half_space)
      throw std::runtime_error("penalized solves require a half-space domain");
    const HalfSpaceFrame& fr = dom.frame();
    const double alpha = p.penalty->alpha();
    const double h = std::min(p.mesh_h, std::sqrt(alpha) / 40.0);
    const double hi = fr.rstar + 10.0 * std::sqrt(alpha) + 4.0 * h;
    impl_->view = make_view(*p.penalty);
    impl_->line.reset(new LineOperator(p.model, fr, impl_->view, h,
                                       fr.rstar - p.cutoff, hi, p.tangential_degree));
    impl_->norm_grid = line_quadrature(p.model, fr, impl_->view,
                                       impl_->line->eta().front(),
                                       impl_->line->eta().back());
    return;
  }
  if (p.domain) {
    if (p.domain->kind() != DomainKind::half_space)
      throw std::runtime_error("no discrete solver for this domain");
    const HalfSpaceFrame& fr = p.domain->frame();
    impl_->view = make_view(p.weight);
    impl_->line.reset(new LineOperator(p.model, fr, impl_->view, p.mesh_h,
                                       fr.rstar - p.cutoff, fr.rstar,
                                       p.tangential_degree));
    impl_->domain_solve = true;
    impl_->norm_grid = weighted_interior(*p.domain, p.weight);
    return;
  }
  impl_->view = make_view(p.weight);
  impl_->spectral.reset(new SpectralOperator(p.model, p.weight, p.hermite_degree));
}

SolverHandle::~SolverHandle() = default;
SolverHandle::SolverHandle(SolverHandle&&) noexcept = default;

SolveResult SolverHandle::solve(double lambda, const CylFunction& f) const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (impl_->spectral) return impl_->spectral->solve(lambda, f);
  SolveResult res = impl_->line->solve(lambda, f, impl_->domain_solve);
  res.norms = norms_on_grid(res.u, impl_->view, impl_->norm_grid);
  res.f_norm = f_norm_on_grid(f, impl_->norm_grid);
  return res;
}

SolveResult solve(const DiscreteProblem& p) {
  return SolverHandle(p).solve(p.lambda, p.f);
}

EstimateReport estimate_report(const SolveResult& res, const DiscreteProblem& p,
                               double tolerance) {
  EstimateReport rep;
  rep.tolerance = tolerance;
  const double fn = std::max(res.f_norm, 1e-300);
  rep.ratio_l2 = p.lambda * res.norms.l2 / fn;
  rep.ratio_grad = std::sqrt(p.lambda) * res.norms.grad / fn;
  rep.ratio_hess = (res.norms.hess * res.norms.hess + res.norms.hess_form) / (2.0 * fn * fn);
  rep.pass = rep.ratio_l2 <= 1.0 + tolerance && rep.ratio_grad <= 1.0 + tolerance &&
             rep.ratio_hess <= 1.0 + tolerance;
  return rep;
}

GraphNormCheck graph_norm_check(const CylFunction& u, const Weight& w,
                                const std::optional<LevelSetDomain>& d,
                                const GaussianModel& model) {
  GraphNormCheck out;
  if (d) {
    const SurfaceQuad& sq = d->boundary_quad();
    double worst = 0.0;
    Vec x(model.dim);
    for (int k = 0; k < sq.size(); ++k) {
      x = sq.nodes.col(k);
      worst = std::max(worst,
                       std::abs(u.grad_h(x).dot(sq.grad_G.col(k))) / sq.grad_norm[k]);
    }
    out.neumann_defect = worst;
    if (worst > 1e-8) throw std::runtime_error("Neumann condition violated");
  }

  WeightView view = make_view(w);
  QuadratureGrid grid =
      d ? weighted_interior(*d, w) : weighted_whole_grid(model, w);
  Norms n = norms_on_grid(u, view, grid);
  CylFunction Lu = apply_L(u, w, model);
  double l2L = 0.0;
  Vec x(model.dim);
  for (int k = 0; k < grid.size(); ++k) {
    x = grid.nodes.col(k);
    const double v = Lu.value(x);
    l2L += grid.weights[k] * v * v;
  }
  out.d_norm = std::sqrt(n.l2 * n.l2 + l2L);
  out.w_norm = std::sqrt(n.w22u_sq());
  const double slack = 1e-8;
  out.lower_ok = out.d_norm <= out.w_norm * (1.0 + slack);
  out.upper_ok = out.w_norm <= 2.0 * std::sqrt(2.0) * out.d_norm * (1.0 + slack);
  return out;
}

PenalizationTable penalization_sweep(const DiscreteProblem& p,
                                     const std::vector<double>& alphas) {
  if (!p.domain || p.domain->kind() != DomainKind::half_space)
    throw std::invalid_argument("penalization sweep needs a half-space domain");
  if (p.model.dim > 2)
    throw std::invalid_argument("penalization sweep supports n <= 2");

  PenalizationTable table;
  SolveResult direct = solve(p);
  table.u_omega_norm = direct.norms.l2;

  const QuadratureGrid omega = weighted_interior(*p.domain, p.weight);
  for (double alpha : alphas) {
    DiscreteProblem pa = p;
    pa.domain.reset();
    pa.penalty = penalized(p.weight, *p.domain, alpha);
    SolveResult res = solve(pa);

    double e2 = 0.0;
    Vec x(p.model.dim);
    for (int k = 0; k < omega.size(); ++k) {
      x = omega.nodes.col(k);
      const double diff = res.u.value(x) - direct.u.value(x);
      e2 += omega.weights[k] * diff * diff;
    }
    PenalizationRow row;
    row.alpha = alpha;
    row.error = std::sqrt(e2);
    row.report = estimate_report(res, pa);
    table.rows.push_back(row);
  }
  table.decreasing = true;
  for (size_t i = 1; i < table.rows.size(); ++i)
    if (!(table.rows[i].error < table.rows[i - 1].error)) table.decreasing = false;
  return table;
}

Norms compute_norms(const CylFunction& u, const Weight& w,
                    const std::optional<LevelSetDomain>& d, const GaussianModel& model) {
  WeightView view = make_view(w);
  QuadratureGrid grid =
      d ? weighted_interior(*d, w) : weighted_whole_grid(model, w);
  return norms_on_grid(u, view, grid);
}

double l2_norm(const CylFunction& u, const Weight& w,
               const std::optional<LevelSetDomain>& d, const GaussianModel& model) {
  QuadratureGrid grid =
      d ? weighted_interior(*d, w) : weighted_whole_grid(model, w);
  double s = 0.0;
  Vec x(model.dim);
  for (int k = 0; k < grid.size(); ++k) {
    x = grid.nodes.col(k);
    const double v = u.value(x);
    s += grid.weights[k] * v * v;
  }
  return std::sqrt(s);
}

}  // namespace wn
