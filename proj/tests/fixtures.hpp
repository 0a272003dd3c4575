#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "foreco/structures.hpp"

namespace fixtures {

using foreco::Index;
using foreco::Matrix;
using foreco::Vector;

inline Matrix toy_agg() {
  Matrix A(3, 5);
  A << 1, 1, 1, 1, 1,
       1, 1, 0, 0, 0,
       0, 0, 1, 1, 1;
  return A;
}

inline Matrix toy_cons() {
  Matrix C(3, 8);
  C << 1, 0, 0, -1, -1, -1, -1, -1,
       0, 1, 0, -1, -1, 0, 0, 0,
       0, 0, 1, 0, 0, -1, -1, -1;
  return C;
}

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Matrix gaussian(Index r, Index c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> N(0.0, sd);
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = N(rng);
  return m;
}

/// Random 0/1 hierarchy with n_b bottoms and between 1 and n_b-1 uppers; the
/// first upper row is the grand total.
inline Matrix random_agg(Index nb, Index nu, std::mt19937_64& rng) {
  Matrix A = Matrix::Zero(nu, nb);
  A.row(0).setOnes();
  std::bernoulli_distribution coin(0.5);
  for (Index u = 1; u < nu; ++u) {
    Index count = 0;
    for (Index b = 0; b < nb; ++b) {
      A(u, b) = coin(rng) ? 1.0 : 0.0;
      count += A(u, b) != 0.0;
    }
    if (count == 0) A(u, static_cast<Index>(rng() % static_cast<unsigned long>(nb))) = 1.0;
  }
  return A;
}

/// Random symmetric positive definite matrix with moderate conditioning.
inline Matrix random_spd(Index d, std::mt19937_64& rng) {
  const Matrix X = gaussian(d, d, rng);
  Matrix O = X * X.transpose() / static_cast<double>(d);
  O.diagonal().array() += 0.5;
  return O;
}

/// Equality-constrained weighted least squares through the dense KKT system,
/// solved with full-pivot LU: min (x−x̂)ᵀΩ⁻¹(x−x̂) s.t. C x = r.
inline Vector kkt_oracle(const Matrix& omega, const Matrix& C, const Vector& base, const Vector& r) {
  const Index d = omega.rows();
  const Index c = C.rows();
  const Matrix Oi = omega.fullPivLu().inverse();
  Matrix K = Matrix::Zero(d + c, d + c);
  K.topLeftCorner(d, d) = Oi;
  K.topRightCorner(d, c) = C.transpose();
  K.bottomLeftCorner(c, d) = C;
  Vector rhs(d + c);
  rhs << Oi * base, r;
  return K.fullPivLu().solve(rhs).head(d);
}

inline Vector kkt_oracle(const Matrix& omega, const Matrix& C, const Vector& base) {
  return kkt_oracle(omega, C, base, Vector::Zero(C.rows()));
}

/// Brute-force NNLS: min ½bᵀGb − cᵀb, b ≥ 0 over every passive set.
inline Vector nnls_enumerate(const Matrix& G, const Vector& c) {
  const Index n = G.rows();
  Vector best;
  double best_val = 0.0;
  for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
    std::vector<Index> F;
    for (Index i = 0; i < n; ++i)
      if (mask & (1ul << i)) F.push_back(i);
    Vector x = Vector::Zero(n);
    if (!F.empty()) {
      Matrix Gf(F.size(), F.size());
      Vector cf(F.size());
      for (std::size_t a = 0; a < F.size(); ++a) {
        cf(a) = c(F[a]);
        for (std::size_t b = 0; b < F.size(); ++b) Gf(a, b) = G(F[a], F[b]);
      }
      const Vector xf = Gf.fullPivLu().solve(cf);
      bool ok = true;
      for (std::size_t a = 0; a < F.size(); ++a) {
        if (xf(a) < 0) ok = false;
        x(F[a]) = xf(a);
      }
      if (!ok) continue;
    }
    const double val = 0.5 * x.dot(G * x) - c.dot(x);
    if (best.size() == 0 || val < best_val) {
      best = x;
      best_val = val;
    }
  }
  return best;
}

}  // namespace fixtures
