#include "wn/probes.hpp"

#include <cmath>

namespace wn {

uint64_t Lcg::next_raw() {
  state_ = state_ * 6364136223846793005ull + 1442695040888963407ull;
  return state_;
}

double Lcg::next_u01() {
  return static_cast<double>(next_raw() >> 11) * 0x1.0p-53;
}

double Lcg::next_pm1() { return 2.0 * next_u01() - 1.0; }

int Lcg::next_int(int lo, int hi) {
  return lo + static_cast<int>(next_u01() * (hi - lo + 1));
}

std::vector<std::vector<int>> graded_monomials(const std::vector<int>& coords,
                                               int max_degree, int dim) {
  std::vector<std::vector<int>> out;
  const int m = static_cast<int>(coords.size());
  std::vector<int> cur(static_cast<size_t>(m), 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == m - 1) {
      cur[static_cast<size_t>(pos)] = left;
      std::vector<int> powers(static_cast<size_t>(dim), 0);
      for (int i = 0; i < m; ++i)
        powers[static_cast<size_t>(coords[static_cast<size_t>(i)])] = cur[static_cast<size_t>(i)];
      out.push_back(powers);
      return;
    }
    for (int d = left; d >= 0; --d) {
      cur[static_cast<size_t>(pos)] = d;
      rec(pos + 1, left - d);
    }
  };
  for (int total = 0; total <= max_degree; ++total) {
    if (m == 0) break;
    rec(0, total);
  }
  return out;
}

Polynomial random_polynomial(Lcg& rng, int dim, const std::vector<int>& coords,
                             int max_degree) {
  Polynomial p(dim);
  for (const auto& powers : graded_monomials(coords, max_degree, dim)) {
    const double c = rng.next_pm1();
    p += Polynomial::monomial(dim, c, powers);
  }
  return p;
}

CylFunction random_polynomial_fn(Lcg& rng, const GaussianModel& model, int max_degree) {
  std::vector<int> coords;
  for (int i = 0; i < model.dim; ++i) coords.push_back(i);
  return polynomial_fn(model, random_polynomial(rng, model.dim, coords, max_degree));
}

CylFunction random_convex_fn(Lcg& rng, const GaussianModel& model) {
  // Positive combination of even powers of affine functionals of the
  // whitened coordinates, plus a linear part: smooth, convex, exact
  // derivatives through the polynomial calculus.
  const int n = model.dim;
  Polynomial total = Polynomial::constant(n, 0.0);
  for (int term = 0; term < 3; ++term) {
    Polynomial aff = Polynomial::constant(n, 0.5 * rng.next_pm1());
    for (int i = 0; i < n; ++i)
      aff += Polynomial::coordinate(n, i) * (rng.next_pm1() / model.sqrt_lambda(i));
    Polynomial sq = aff * aff;
    const double weight = 0.2 + 0.8 * rng.next_u01();
    if (rng.next_u01() < 0.5) {
      total += sq * weight;
    } else {
      total += (sq * sq) * weight;
    }
  }
  for (int i = 0; i < n; ++i)
    total += Polynomial::coordinate(n, i) * (0.3 * rng.next_pm1());
  return polynomial_fn(model, total);
}

CylVectorField random_tangent_field_half_space(Lcg& rng, const GaussianModel& model,
                                               const LevelSetDomain& d, int max_degree) {
  const HalfSpaceFrame& fr = d.frame();
  const int n = model.dim;
  std::vector<int> coords;
  for (int i = 0; i < n; ++i) coords.push_back(i);

  // Tangential directions get free coefficients; the normal direction gets
  // G times a polynomial, which vanishes on the boundary. Directions here
  // are the standard H-basis, so a field tangent in the adapted frame is
  // rebuilt as standard-direction terms via the rotation columns.
  Polynomial zero = Polynomial::constant(n, 0.0);
  std::vector<Polynomial> comps(static_cast<size_t>(n), zero);

  Polynomial gpoly = Polynomial::constant(n, -fr.offset);
  for (int i = 0; i < n; ++i)
    if (fr.covector[i] != 0.0) gpoly += Polynomial::coordinate(n, i) * fr.covector[i];

  for (int fdir = 0; fdir < n; ++fdir) {
    Polynomial coeff = random_polynomial(rng, n, coords, max_degree);
    if (fdir == 0) coeff = coeff * gpoly;  // normal component vanishes at G = 0
    for (int i = 0; i < n; ++i) {
      const double ri = fr.rot(i, fdir);
      if (ri != 0.0) comps[static_cast<size_t>(i)] += coeff * ri;
    }
  }

  std::vector<CylVectorField::Term> terms;
  for (int i = 0; i < n; ++i)
    if (!comps[static_cast<size_t>(i)].empty())
      terms.push_back({polynomial_fn(model, comps[static_cast<size_t>(i)]), i});
  if (terms.empty()) terms.push_back({constant_fn(n, 0.0), 0});
  return CylVectorField(n, std::move(terms), true);
}

CylVectorField rotation_field(const GaussianModel& model, int i, int j) {
  const int n = model.dim;
  // In H-coordinates the i-component is (x, h_j)/sqrt(l_j l_i) and the
  // j-component is -(x, h_i)/sqrt(l_i l_j).
  const double s = 1.0 / (model.sqrt_lambda(i) * model.sqrt_lambda(j));
  std::vector<CylVectorField::Term> terms;
  terms.push_back({polynomial_fn(model, Polynomial::coordinate(n, j) * s), i});
  terms.push_back({polynomial_fn(model, Polynomial::coordinate(n, i) * (-s)), j});
  return CylVectorField(n, std::move(terms), true);
}

CylVectorField random_tangent_field_ball(Lcg& rng, const GaussianModel& model,
                                         int max_degree) {
  const int n = model.dim;
  std::vector<int> coords;
  for (int i = 0; i < n; ++i) coords.push_back(i);
  Polynomial zero = Polynomial::constant(n, 0.0);
  std::vector<Polynomial> comps(static_cast<size_t>(n), zero);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Polynomial psi = random_polynomial(rng, n, coords, max_degree);
      const double s = 1.0 / (model.sqrt_lambda(i) * model.sqrt_lambda(j));
      comps[static_cast<size_t>(i)] += psi * (Polynomial::coordinate(n, j) * s);
      comps[static_cast<size_t>(j)] += psi * (Polynomial::coordinate(n, i) * (-s));
    }
  std::vector<CylVectorField::Term> terms;
  for (int i = 0; i < n; ++i)
    if (!comps[static_cast<size_t>(i)].empty())
      terms.push_back({polynomial_fn(model, comps[static_cast<size_t>(i)]), i});
  if (terms.empty()) terms.push_back({constant_fn(n, 0.0), 0});
  return CylVectorField(n, std::move(terms), true);
}

}  // namespace wn
