#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "foreco/error.hpp"
#include "foreco/linalg.hpp"

namespace foreco::qp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// min ½ xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u   (rows with l = u are equalities)
struct Problem {
  Matrix P;
  Vector q;
  Matrix A;
  Vector l;
  Vector u;
};

struct Settings {
  double eps_abs = 1e-8;
  double eps_rel = 1e-6;
  double eps_infeasible = 1e-9;
  int max_iter = 20000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int adapt_interval = 25;
  bool polish = true;
  bool refine = true;
};

enum class Status { Solved, PrimalInfeasible, MaxIterations };

struct Result {
  Vector x;
  Vector y;
  Status status = Status::MaxIterations;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool polished = false;
  bool refined = false;  // finished by the dual active-set method
};

namespace detail {

inline double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

inline Vector clamp(const Vector& v, const Vector& l, const Vector& u) { return v.cwiseMax(l).cwiseMin(u); }

struct Residuals {
  double prim, dual, eps_prim, eps_dual;
};

inline Residuals residuals(const Problem& p, const Vector& x, const Vector& z, const Vector& y, const Settings& s) {
  const Vector Ax = p.A * x;
  const Vector Px = p.P * x;
  const Vector Aty = p.A.transpose() * y;
  Residuals r;
  r.prim = inf_norm(Ax - z);
  r.dual = inf_norm(Px + p.q + Aty);
  r.eps_prim = s.eps_abs + s.eps_rel * std::max(inf_norm(Ax), inf_norm(z));
  r.eps_dual = s.eps_abs + s.eps_rel * std::max({inf_norm(Px), inf_norm(Aty), inf_norm(p.q)});
  return r;
}

/// Solves the equality-constrained QP on the guessed active set; accepts the
/// point only when it is primal feasible and its multipliers have the right
/// signs, in which case it satisfies the KKT conditions of the full problem.
inline bool polish(const Problem& p, const Vector& z, const Vector& y, const Settings& s, Result& out) {
  const Index n = p.P.rows();
  const Index m = p.A.rows();
  std::vector<int> side(static_cast<std::size_t>(m), 0);  // -1 lower, +1 upper, 2 equality
  IndexList act;
  for (Index i = 0; i < m; ++i) {
    if (p.l(i) == p.u(i)) {
      side[static_cast<std::size_t>(i)] = 2;
    } else if (z(i) - p.l(i) < -y(i)) {
      side[static_cast<std::size_t>(i)] = -1;
    } else if (p.u(i) - z(i) < y(i)) {
      side[static_cast<std::size_t>(i)] = 1;
    }
    if (side[static_cast<std::size_t>(i)] != 0) act.push_back(i);
  }
  const Index na = static_cast<Index>(act.size());
  const Matrix Aa = linalg::select_rows(p.A, act);
  Vector ba(na);
  for (Index k = 0; k < na; ++k) {
    const Index i = act[static_cast<std::size_t>(k)];
    ba(k) = side[static_cast<std::size_t>(i)] == 1 ? p.u(i) : p.l(i);
  }
  const double delta = 1e-10;
  Matrix K = Matrix::Zero(n + na, n + na);
  K.topLeftCorner(n, n) = p.P;
  K.topRightCorner(n, na) = Aa.transpose();
  K.bottomLeftCorner(na, n) = Aa;
  Matrix Kreg = K;
  Kreg.topLeftCorner(n, n).diagonal().array() += delta;
  Kreg.bottomRightCorner(na, na).diagonal().array() -= delta;
  Vector rhs(n + na);
  rhs << -p.q, ba;
  Eigen::PartialPivLU<Matrix> lu(Kreg);
  Vector sol = lu.solve(rhs);
  for (int it = 0; it < 25; ++it) {
    const Vector corr = lu.solve(rhs - K * sol);
    sol += corr;
    if (inf_norm(corr) <= 1e-15 * std::max(1.0, inf_norm(sol))) break;
  }
  if (!sol.allFinite()) return false;
  const Vector x = sol.head(n);
  Vector yy = Vector::Zero(m);
  for (Index k = 0; k < na; ++k) yy(act[static_cast<std::size_t>(k)]) = sol(n + k);

  const Vector Ax = p.A * x;
  const double scale = std::max(1.0, inf_norm(Ax));
  for (Index i = 0; i < m; ++i) {
    if (Ax(i) < p.l(i) - 1e-9 * scale || Ax(i) > p.u(i) + 1e-9 * scale) return false;
    const int sd = side[static_cast<std::size_t>(i)];
    const double yscale = 1e-9 * std::max(1.0, inf_norm(yy));
    if (sd == -1 && yy(i) > yscale) return false;
    if (sd == 1 && yy(i) < -yscale) return false;
  }
  const Vector zz = clamp(Ax, p.l, p.u);
  const Residuals r = residuals(p, x, zz, yy, s);
  if (r.prim > r.eps_prim || r.dual > r.eps_dual) return false;
  out.x = x;
  out.y = yy;
  out.primal_residual = r.prim;
  out.dual_residual = r.dual;
  out.polished = true;
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dual active-set method (Goldfarb–Idnani)
// ---------------------------------------------------------------------------

enum class DasStatus { Solved, Infeasible, Failed };

struct DasResult {
  Vector x;
  DasStatus status = DasStatus::Failed;
  int iterations = 0;
  Index active = 0;
};

/// min ½xᵀGx + cᵀx  s.t.  Ceq x = beq,  Cin x ≥ bin, with G positive definite.
///
/// Starts from the unconstrained minimizer and adds violated constraints one
/// at a time, keeping dual feasibility; J = L⁻ᵀQ and the triangular R of the
/// active normals are updated with Givens rotations. Finite and exact up to
/// round-off, including when the active normals are linearly dependent.
inline DasResult solve_dual_active_set(const Matrix& G, const Vector& c, const Matrix& Ceq, const Vector& beq,
                                       const Matrix& Cin, const Vector& bin, int max_iter = 0) {
  const Index n = G.rows();
  const Index me = Ceq.rows();
  const Index mi = Cin.rows();
  DasResult out;
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() != Eigen::Success) return out;
  if (max_iter <= 0) max_iter = static_cast<int>(10 * (n + mi) + 100);

  Matrix J = llt.matrixU().solve(Matrix::Identity(n, n));
  Matrix R = Matrix::Zero(n, n);
  Vector x = -llt.solve(c);
  Vector d(n), z(n), r(n), u = Vector::Zero(n + 1);
  std::vector<Index> A(static_cast<std::size_t>(n + 1), 0);
  Index iq = 0;
  double R_norm = 1.0;
  const double eps = std::numeric_limits<double>::epsilon();

  auto compute_dzr = [&](const Vector& np) {
    d = J.transpose() * np;
    z = J.rightCols(n - iq) * d.tail(n - iq);
    if (iq > 0)
      r.head(iq) = R.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
  };

  auto add_constraint = [&]() {
    for (Index j = n - 1; j >= iq + 1; --j) {
      double cc = d(j - 1), ss = d(j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d(j - 1) = -h;
      } else {
        d(j - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Index k = 0; k < n; ++k) {
        const double t1 = J(k, j - 1), t2 = J(k, j);
        J(k, j - 1) = t1 * cc + t2 * ss;
        J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
      }
    }
    ++iq;
    R.col(iq - 1).head(iq) = d.head(iq);
    if (std::abs(d(iq - 1)) <= eps * R_norm) return false;
    R_norm = std::max(R_norm, std::abs(d(iq - 1)));
    return true;
  };

  // removes active entry at position qq (the tentative entry at iq shifts down with the rest)
  auto delete_at = [&](Index qq) {
    for (Index i = qq; i < iq - 1; ++i) {
      A[static_cast<std::size_t>(i)] = A[static_cast<std::size_t>(i + 1)];
      u(i) = u(i + 1);
      R.col(i) = R.col(i + 1);
    }
    A[static_cast<std::size_t>(iq - 1)] = A[static_cast<std::size_t>(iq)];
    u(iq - 1) = u(iq);
    A[static_cast<std::size_t>(iq)] = 0;
    u(iq) = 0.0;
    R.col(iq - 1).setZero();
    --iq;
    for (Index j = qq; j < iq; ++j) {
      double cc = R(j, j), ss = R(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Index k = j + 1; k < iq; ++k) {
        const double t1 = R(j, k), t2 = R(j + 1, k);
        R(j, k) = t1 * cc + t2 * ss;
        R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
      }
      for (Index k = 0; k < n; ++k) {
        const double t1 = J(k, j), t2 = J(k, j + 1);
        J(k, j) = t1 * cc + t2 * ss;
        J(k, j + 1) = xny * (J(k, j) + t1) - t2;
      }
    }
  };

  for (Index i = 0; i < me; ++i) {
    const Vector np = Ceq.row(i).transpose();
    compute_dzr(np);
    double t2 = 0.0;
    const double zn = z.dot(np);
    if (std::abs(zn) > eps * std::max(1.0, np.norm())) t2 = (beq(i) - np.dot(x)) / zn;
    x += t2 * z;
    u(iq) = t2;
    if (iq > 0) u.head(iq) -= t2 * r.head(iq);
    A[static_cast<std::size_t>(iq)] = -i - 1;
    if (!add_constraint()) return out;  // dependent equalities
  }

  std::vector<bool> active(static_cast<std::size_t>(mi), false), excluded(static_cast<std::size_t>(mi), false);
  Vector row_scale(mi);
  for (Index i = 0; i < mi; ++i) row_scale(i) = Cin.row(i).cwiseAbs().sum();

  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    const double xs = x.cwiseAbs().maxCoeff();
    Index p = -1;
    double worst = 0.0;
    for (Index i = 0; i < mi; ++i) {
      if (active[static_cast<std::size_t>(i)] || excluded[static_cast<std::size_t>(i)]) continue;
      const double tol = 1e-12 * (1.0 + std::abs(bin(i)) + row_scale(i) * xs);
      const double s = (Cin.row(i).dot(x) - bin(i));
      if (s < -tol && s / tol < worst) {
        worst = s / tol;
        p = i;
      }
    }
    if (p < 0) {
      out.x = x;
      out.status = DasStatus::Solved;
      out.active = iq;
      return out;
    }
    const Vector np = Cin.row(p).transpose();
    double sp = np.dot(x) - bin(p);
    u(iq) = 0.0;
    A[static_cast<std::size_t>(iq)] = p;

    for (int inner = 0; inner <= static_cast<int>(n + mi); ++inner) {
      compute_dzr(np);
      double t1 = kInf;
      Index lpos = -1;
      for (Index k = me; k < iq; ++k) {
        if (r(k) > 0.0 && u(k) / r(k) < t1) {
          t1 = u(k) / r(k);
          lpos = k;
        }
      }
      const double zn = z.dot(np);
      const double t2 = (z.norm() > eps * 1e3 * std::max(1.0, np.norm()) && zn > 0) ? -sp / zn : kInf;
      const double t = std::min(t1, t2);
      if (std::isinf(t)) {
        out.status = DasStatus::Infeasible;
        return out;
      }
      if (std::isinf(t2)) {
        // dual step only
        if (iq > 0) u.head(iq) -= t * r.head(iq);
        u(iq) += t;
        active[static_cast<std::size_t>(A[static_cast<std::size_t>(lpos)])] = false;
        delete_at(lpos);
        continue;
      }
      x += t * z;
      if (iq > 0) u.head(iq) -= t * r.head(iq);
      u(iq) += t;
      if (t == t2) {
        if (!add_constraint()) {
          excluded[static_cast<std::size_t>(p)] = true;
          delete_at(iq - 1);
        } else {
          active[static_cast<std::size_t>(p)] = true;
        }
        break;
      }
      active[static_cast<std::size_t>(A[static_cast<std::size_t>(lpos)])] = false;
      delete_at(lpos);
      sp = np.dot(x) - bin(p);
    }
  }
  return out;
}

/// Operator-splitting (ADMM) solver for convex QPs with adaptive penalty.
inline Result solve(const Problem& p, const Settings& s = {}) {
  const Index n = p.P.rows();
  const Index m = p.A.rows();
  if (p.P.cols() != n || p.q.size() != n || p.A.cols() != n || p.l.size() != m || p.u.size() != m)
    throw ValidationError("inconsistent QP dimensions");
  for (Index i = 0; i < m; ++i)
    if (p.l(i) > p.u(i)) throw InfeasibleError("QP bounds have lower > upper in row " + std::to_string(i));

  Vector rho(m);
  double rho_base = s.rho;
  auto set_rho = [&](double base) {
    for (Index i = 0; i < m; ++i) {
      if (p.l(i) == p.u(i))
        rho(i) = 1e3 * base;
      else if (std::isinf(p.l(i)) && std::isinf(p.u(i)))
        rho(i) = 1e-6;
      else
        rho(i) = base;
    }
  };
  set_rho(rho_base);

  Eigen::LLT<Matrix> kkt;
  auto factor = [&]() {
    Matrix K = p.P + p.A.transpose() * rho.asDiagonal() * p.A;
    K.diagonal().array() += s.sigma;
    kkt.compute(K);
    if (kkt.info() != Eigen::Success) throw NumericalError("QP system matrix is not positive definite");
  };
  factor();

  Vector x = Vector::Zero(n);
  Vector z = detail::clamp(Vector::Zero(m), p.l, p.u);
  Vector y = Vector::Zero(m);
  Result out;
  out.status = Status::MaxIterations;

  for (int k = 1; k <= s.max_iter; ++k) {
    const Vector rhs = s.sigma * x - p.q + p.A.transpose() * (rho.cwiseProduct(z) - y);
    const Vector xt = kkt.solve(rhs);
    const Vector zt = p.A * xt;
    const Vector x_new = s.alpha * xt + (1.0 - s.alpha) * x;
    const Vector z_relax = s.alpha * zt + (1.0 - s.alpha) * z;
    const Vector z_new = detail::clamp(z_relax + y.cwiseQuotient(rho), p.l, p.u);
    const Vector y_new = y + rho.cwiseProduct(z_relax - z_new);
    const Vector dy = y_new - y;
    x = x_new;
    z = z_new;
    y = y_new;
    out.iterations = k;

    const detail::Residuals r = detail::residuals(p, x, z, y, s);
    out.primal_residual = r.prim;
    out.dual_residual = r.dual;
    if (r.prim <= r.eps_prim && r.dual <= r.eps_dual) {
      out.status = Status::Solved;
      break;
    }

    const double dy_norm = detail::inf_norm(dy);
    if (dy_norm > 0) {
      const double eps = s.eps_infeasible * dy_norm;
      if (detail::inf_norm(p.A.transpose() * dy) <= eps) {
        double support = 0.0;
        bool unbounded = false;
        for (Index i = 0; i < m; ++i) {
          if (dy(i) > 0) {
            if (std::isinf(p.u(i))) unbounded = true;
            else support += p.u(i) * dy(i);
          } else if (dy(i) < 0) {
            if (std::isinf(p.l(i))) unbounded = true;
            else support += p.l(i) * dy(i);
          }
        }
        if (!unbounded && support < -eps) {
          out.status = Status::PrimalInfeasible;
          break;
        }
      }
    }

    if (s.adapt_interval > 0 && k % s.adapt_interval == 0) {
      const Vector Ax = p.A * x;
      const Vector Px = p.P * x;
      const Vector Aty = p.A.transpose() * y;
      const double pn = r.prim / std::max(std::max(detail::inf_norm(Ax), detail::inf_norm(z)), 1e-30);
      const double dn = r.dual / std::max({detail::inf_norm(Px), detail::inf_norm(Aty), detail::inf_norm(p.q), 1e-30});
      if (dn > 0 && pn > 0) {
        const double proposed = std::clamp(rho_base * std::sqrt(pn / dn), 1e-6, 1e6);
        if (proposed > 5.0 * rho_base || proposed < 0.2 * rho_base) {
          rho_base = proposed;
          set_rho(rho_base);
          factor();
        }
      }
    }
  }

  out.x = x;
  out.y = y;
  if (out.status == Status::PrimalInfeasible) return out;
  if (s.polish && detail::polish(p, z, y, s, out)) {
    out.status = Status::Solved;
    return out;
  }
  if (s.refine) {
    // exact finish when the active set could not be certified from the ADMM iterate
    IndexList eq, lo, hi;
    for (Index i = 0; i < m; ++i) {
      if (p.l(i) == p.u(i)) {
        eq.push_back(i);
        continue;
      }
      if (std::isfinite(p.l(i))) lo.push_back(i);
      if (std::isfinite(p.u(i))) hi.push_back(i);
    }
    Matrix Cin(static_cast<Index>(lo.size() + hi.size()), n);
    Vector bin(Cin.rows());
    Index k = 0;
    for (Index i : lo) {
      Cin.row(k) = p.A.row(i);
      bin(k++) = p.l(i);
    }
    for (Index i : hi) {
      Cin.row(k) = -p.A.row(i);
      bin(k++) = -p.u(i);
    }
    const DasResult das = solve_dual_active_set(p.P, p.q, linalg::select_rows(p.A, eq), linalg::select(p.l, eq),
                                                Cin, bin);
    if (das.status == DasStatus::Solved) {
      out.x = das.x;
      out.status = Status::Solved;
      out.refined = true;
      const Vector Ax = p.A * out.x;
      out.primal_residual = detail::inf_norm(Ax - detail::clamp(Ax, p.l, p.u));
    } else if (das.status == DasStatus::Infeasible && out.status != Status::Solved) {
      out.status = Status::PrimalInfeasible;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Non-negative least squares, block principal pivoting
// ---------------------------------------------------------------------------

struct NnlsResult {
  Vector x;
  int iterations = 0;
  bool single_pivot_fallback = false;
};

/// min ½ xᵀGx − cᵀx  s.t.  x ≥ 0, with G symmetric positive definite.
///
/// Full exchanges of every infeasible variable; when the infeasible count
/// stops shrinking for three rounds, only the largest infeasible index is
/// exchanged (the backup rule that guarantees termination).
inline NnlsResult nnls_bpp(const Matrix& G, const Vector& c, int max_iter = 1000) {
  const Index n = G.rows();
  if (G.cols() != n || c.size() != n) throw ValidationError("inconsistent NNLS dimensions");
  NnlsResult out;
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Vector x = Vector::Zero(n);
  Vector y = -c;
  const double tol = 1e-12 * std::max({1.0, linalg::max_abs(G), c.size() ? c.cwiseAbs().maxCoeff() : 0.0});
  Index best = n + 1;
  int backup = 3;

  for (int it = 0; it < max_iter; ++it) {
    IndexList infeasible;
    for (Index i = 0; i < n; ++i) {
      const bool pi = passive[static_cast<std::size_t>(i)];
      if ((pi && x(i) < -tol) || (!pi && y(i) < -tol)) infeasible.push_back(i);
    }
    out.iterations = it;
    if (infeasible.empty()) break;
    const Index count = static_cast<Index>(infeasible.size());
    if (count < best) {
      best = count;
      backup = 3;
      for (Index i : infeasible) passive[static_cast<std::size_t>(i)] = !passive[static_cast<std::size_t>(i)];
    } else if (backup >= 1) {
      --backup;
      for (Index i : infeasible) passive[static_cast<std::size_t>(i)] = !passive[static_cast<std::size_t>(i)];
    } else {
      out.single_pivot_fallback = true;
      const Index i = infeasible.back();
      passive[static_cast<std::size_t>(i)] = !passive[static_cast<std::size_t>(i)];
    }

    IndexList F, Z;
    for (Index i = 0; i < n; ++i) (passive[static_cast<std::size_t>(i)] ? F : Z).push_back(i);
    x.setZero();
    if (!F.empty()) {
      const Matrix Gff = linalg::select(G, F, F);
      Eigen::LDLT<Matrix> ldlt(Gff);
      const Vector xf = ldlt.solve(linalg::select(c, F));
      for (std::size_t k = 0; k < F.size(); ++k) x(F[k]) = xf(static_cast<Index>(k));
    }
    y = G * x - c;
    for (Index i : F) y(i) = 0.0;
    if (it + 1 == max_iter) {
      std::ostringstream os;
      os << "block principal pivoting did not terminate in " << max_iter << " iterations";
      throw NumericalError(os.str());
    }
  }
  for (Index i = 0; i < n; ++i)
    if (!passive[static_cast<std::size_t>(i)] || x(i) < 0) x(i) = std::max(0.0, x(i));
  out.x = x;
  return out;
}

}  // namespace foreco::qp
