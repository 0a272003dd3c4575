#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "foreco/classical.hpp"
#include "foreco/covariance.hpp"
#include "foreco/error.hpp"
#include "foreco/linalg.hpp"
#include "foreco/qp.hpp"
#include "foreco/series_tools.hpp"
#include "foreco/structures.hpp"

namespace foreco {

enum class Approach { Proj, Strc, ProjQp, StrcQp };
enum class NonNegative { None, Sntz, Bpv, Qp };

inline std::string to_string(Approach a) {
  switch (a) {
    case Approach::Proj: return "proj";
    case Approach::Strc: return "strc";
    case Approach::ProjQp: return "proj_qp";
    case Approach::StrcQp: return "strc_qp";
  }
  return "?";
}

inline Approach parse_approach(std::string_view s) {
  if (s == "proj") return Approach::Proj;
  if (s == "strc") return Approach::Strc;
  if (s == "proj_qp") return Approach::ProjQp;
  if (s == "strc_qp") return Approach::StrcQp;
  throw ValidationError("unknown approach: " + std::string(s));
}

inline std::string to_string(NonNegative n) {
  switch (n) {
    case NonNegative::None: return "none";
    case NonNegative::Sntz: return "sntz";
    case NonNegative::Bpv: return "bpv";
    case NonNegative::Qp: return "qp";
  }
  return "?";
}

inline NonNegative parse_nn(std::string_view s) {
  if (s == "none" || s.empty()) return NonNegative::None;
  if (s == "sntz") return NonNegative::Sntz;
  if (s == "bpv") return NonNegative::Bpv;
  if (s == "qp" || s == "osqp") return NonNegative::Qp;
  throw ValidationError("unknown non-negativity method: " + std::string(s));
}

/// One forecast cell: series (0-based), temporal order, and 0-based step
/// within that order's block over the whole horizon. A negative step selects
/// every step of the (series, order) pair.
struct Cell {
  Index series = 0;
  int order = 1;
  Index step = -1;
};

struct Bound {
  Cell cell;
  double lower = -qp::kInf;
  double upper = qp::kInf;
};

struct ReconciliationOptions {
  Approach approach = Approach::Proj;
  NonNegative nn = NonNegative::None;
  std::vector<Bound> bounds;
  std::vector<Cell> immutable;
  qp::Settings solver;
  int bpv_max_iter = 1000;
};

struct LsReport {
  Approach approach = Approach::Proj;
  NonNegative nn = NonNegative::None;
  double rcond = 1.0;
  Index constrained_columns = 0;  // horizon steps that needed the constrained solver
  int max_iterations = 0;
  bool bpv_fallback = false;
  bool polished = true;
  Index immutable_count = 0;
};

struct ProjectionOperator {
  Matrix M;
  Approach approach = Approach::Proj;
  std::string omega_ref;
  double rcond = 1.0;

  Matrix apply(const Matrix& periods) const { return M * periods; }
};

/// M = I − ΩCᵀ(CΩCᵀ)⁻¹C (proj) or S(SᵀΩ⁻¹S)⁻¹SᵀΩ⁻¹ (strc).
inline ProjectionOperator build_projection(const CrossTemporalStructure& s, const Matrix& omega,
                                           Approach approach = Approach::Proj, std::string omega_ref = "") {
  const Index d = s.dim();
  if (omega.rows() != d || omega.cols() != d)
    throw ValidationError("covariance is " + std::to_string(omega.rows()) + "x" + std::to_string(omega.cols()) +
                          ", expected " + std::to_string(d) + "x" + std::to_string(d));
  if (!omega.allFinite()) throw ValidationError("covariance contains non-finite values");
  ProjectionOperator out;
  out.approach = approach;
  out.omega_ref = std::move(omega_ref);
  if (approach == Approach::Proj || approach == Approach::ProjQp) {
    const Matrix& C = s.cons_mat();
    const Matrix OCt = omega * C.transpose();
    linalg::SpdSolver solver(linalg::symmetrize(C * OCt), "C Omega C'");
    out.rcond = solver.rcond();
    out.M = Matrix::Identity(d, d) - OCt * solver.solve(C);
  } else {
    const Matrix& S = s.strc_mat();
    linalg::Whitener L(omega);
    const Matrix W = L.whiten(S);
    linalg::SpdSolver solver(linalg::symmetrize(W.transpose() * W), "S' Omega^-1 S");
    out.rcond = solver.rcond();
    // SᵀΩ⁻¹ = (L⁻ᵀW)ᵀ
    const Matrix StOi = L.whiten_transpose(W).transpose();
    out.M = S * solver.solve(StOi);
  }
  return out;
}

inline ProjectionOperator build_projection(const CrossTemporalStructure& s, const CovarianceMatrix& cov,
                                           Approach approach = Approach::Proj) {
  return build_projection(s, cov.omega, approach, to_string(cov.estimator));
}

namespace detail {

/// Per-period positions addressed by a cell, as (period, position) pairs.
inline std::vector<std::pair<Index, Index>> cell_positions(const Cell& c, const CrossTemporalStructure& s, Index H) {
  if (c.series < 0 || c.series >= s.n())
    throw ValidationError("series index " + std::to_string(c.series + 1) + " is out of range (n=" +
                          std::to_string(s.n()) + ")");
  const auto level = s.te().level_of(c.order);
  if (!level) throw ValidationError("order " + std::to_string(c.order) + " is not an aggregation order");
  const Index w = s.te().level_count(*level);
  std::vector<std::pair<Index, Index>> out;
  if (c.step < 0) {
    for (Index h = 0; h < H; ++h)
      for (Index j = 0; j < w; ++j) out.emplace_back(h, s.index(c.series, *level, j));
  } else {
    if (c.step >= w * H)
      throw ValidationError("step " + std::to_string(c.step + 1) + " is out of range for order " +
                            std::to_string(c.order) + " (" + std::to_string(w * H) + " steps)");
    out.emplace_back(c.step / w, s.index(c.series, *level, c.step % w));
  }
  return out;
}

/// Result of substituting fixed variables: the remaining variables keep the
/// Schur-complement covariance and a reduced, consistent constraint system E x_R = g.
struct Elimination {
  IndexList fixed;
  IndexList rest;
  Matrix omega;  // Ω_RR − Ω_RF Ω_FF⁻¹ Ω_FR
  Matrix E;      // reduced constraints (full row rank)
  Matrix g;      // right-hand sides, one column per period
};

inline Elimination eliminate(const Matrix& C, const Matrix& omega, const IndexList& fixed, const Matrix& base) {
  Elimination el;
  const Index d = omega.rows();
  el.fixed = fixed;
  el.rest = linalg::complement(d, fixed);
  const Index H = base.cols();
  if (fixed.empty()) {
    el.omega = omega;
    el.E = C;
    el.g = Matrix::Zero(C.rows(), H);
    return el;
  }
  const Matrix oRR = linalg::select(omega, el.rest, el.rest);
  const Matrix oRF = linalg::select(omega, el.rest, fixed);
  const Matrix oFF = linalg::select(omega, fixed, fixed);
  linalg::SpdSolver ff(oFF, "covariance block of the immutable forecasts");
  el.omega = linalg::symmetrize(oRR - oRF * ff.solve(oRF.transpose()));

  const Matrix CR = linalg::select_cols(C, el.rest);
  Matrix rhs = -(linalg::select_cols(C, fixed) * linalg::select_rows(base, fixed));
  Vector scale(H);
  for (Index h = 0; h < H; ++h) {
    const double mx = rhs.col(h).cwiseAbs().maxCoeff();
    scale(h) = mx > 0 ? mx : 1.0;
    rhs.col(h) /= scale(h);
  }
  Matrix aug(C.rows(), CR.cols() + H);
  aug << CR, rhs;
  const linalg::Rref r = linalg::rref(aug, 1e-10, CR.cols());
  if (r.inconsistent) throw InfeasibleError("immutable forecasts are inconsistent with the constraints");
  el.E = r.reduced.leftCols(CR.cols());
  el.g = r.reduced.rightCols(H) * scale.asDiagonal();
  return el;
}

/// LS solution of the reduced problem for every column.
inline Matrix solve_reduced(const Elimination& el, const Matrix& base_rest) {
  if (el.E.rows() == 0) return base_rest;
  const Matrix OEt = el.omega * el.E.transpose();
  linalg::SpdSolver solver(linalg::symmetrize(el.E * OEt), "E Omega E'");
  return base_rest - OEt * solver.solve(el.E * base_rest - el.g);
}

struct QpOutcome {
  Vector x;
  int iterations = 0;
  bool polished = false;
};

/// min (x−x̂)ᵀΩ⁻¹(x−x̂) s.t. E x = g, lo ≤ x ≤ hi.
inline QpOutcome solve_qp_column(const Matrix& omega, const Matrix& E, const Vector& g, const Vector& base,
                                 const Vector& lo, const Vector& hi, Approach approach, const qp::Settings& settings) {
  const Index d = base.size();
  IndexList bounded;
  for (Index i = 0; i < d; ++i)
    if (std::isfinite(lo(i)) || std::isfinite(hi(i))) bounded.push_back(i);
  const Index nb = static_cast<Index>(bounded.size());
  linalg::Whitener L(omega);
  qp::Problem p;
  Vector x0, shift;
  Matrix N;
  if (approach == Approach::Strc || approach == Approach::StrcQp) {
    // null-space parameterization x = x0 + N w, exact on E x = g
    Matrix aug(E.rows(), E.cols() + 1);
    aug << E, g;
    const linalg::Rref r = linalg::rref(aug, 1e-10, E.cols());
    if (r.inconsistent) throw InfeasibleError("constraints are inconsistent");
    const Index nf = static_cast<Index>(r.free.size());
    x0 = Vector::Zero(d);
    N = Matrix::Zero(d, nf);
    for (Index i = 0; i < r.rank; ++i) {
      const Index piv = r.pivots[static_cast<std::size_t>(i)];
      x0(piv) = r.reduced(i, E.cols());
      for (Index f = 0; f < nf; ++f) N(piv, f) = -r.reduced(i, r.free[static_cast<std::size_t>(f)]);
    }
    for (Index f = 0; f < nf; ++f) N(r.free[static_cast<std::size_t>(f)], f) = 1.0;
    const Matrix W = L.whiten(N);
    p.P = linalg::symmetrize(W.transpose() * W);
    p.q = -(W.transpose() * L.whiten(base - x0));
    p.A = linalg::select_rows(N, bounded);
    p.l = linalg::select(lo, bounded) - linalg::select(x0, bounded);
    p.u = linalg::select(hi, bounded) - linalg::select(x0, bounded);
  } else {
    // whitened deviation x = x̂ + L z
    const Matrix Lm = L.color(Matrix::Identity(d, d));
    const Index ne = E.rows();
    p.P = Matrix::Identity(d, d);
    p.q = Vector::Zero(d);
    p.A.resize(ne + nb, d);
    p.A.topRows(ne) = E * Lm;
    p.A.bottomRows(nb) = linalg::select_rows(Lm, bounded);
    p.l.resize(ne + nb);
    p.u.resize(ne + nb);
    const Vector eq = g - E * base;
    p.l.head(ne) = eq;
    p.u.head(ne) = eq;
    p.l.tail(nb) = linalg::select(lo, bounded) - linalg::select(base, bounded);
    p.u.tail(nb) = linalg::select(hi, bounded) - linalg::select(base, bounded);
  }
  const qp::Result res = qp::solve(p, settings);
  if (res.status == qp::Status::PrimalInfeasible) throw InfeasibleError("bounds are infeasible with the constraints");
  if (res.status != qp::Status::Solved) {
    std::ostringstream os;
    os << "QP solver did not converge after " << res.iterations << " iterations (primal residual "
       << res.primal_residual << ", dual residual " << res.dual_residual << ")";
    throw NumericalError(os.str());
  }
  QpOutcome out;
  out.iterations = res.iterations;
  out.polished = res.polished;
  if (approach == Approach::Strc || approach == Approach::StrcQp)
    out.x = x0 + N * res.x;
  else
    out.x = base + L.color(res.x);
  return out;
}

inline bool violates(const Vector& x, const Vector& lo, const Vector& hi) {
  for (Index i = 0; i < x.size(); ++i)
    if (x(i) < lo(i) || x(i) > hi(i)) return true;
  return false;
}

}  // namespace detail

/// min (x−x̂)ᵀΩ⁻¹(x−x̂) s.t. Cx = 0, lower ≤ x ≤ upper, x_F = x̂_F for F = fixed.
///
/// `approach` selects the QP formulation: proj variants solve in whitened
/// deviations with C as equality rows, strc variants in a null-space basis
/// of the constraints. Infinite bounds are dropped.
inline Vector solve_constrained_qp(const Matrix& omega, const Matrix& C, const Vector& base, const Vector& lower,
                                   const Vector& upper, const IndexList& fixed = {},
                                   const qp::Settings& settings = {}, Approach approach = Approach::ProjQp) {
  const Index d = base.size();
  if (omega.rows() != d || omega.cols() != d || C.cols() != d || lower.size() != d || upper.size() != d)
    throw ValidationError("inconsistent dimensions in constrained reconciliation");
  for (Index i = 0; i < d; ++i)
    if (lower(i) > upper(i)) throw ValidationError("lower bound exceeds upper bound at position " + std::to_string(i));
  for (Index f : fixed)
    if (base(f) < lower(f) || base(f) > upper(f)) throw InfeasibleError("an immutable forecast violates its bounds");
  const detail::Elimination el = detail::eliminate(C, omega, fixed, base);
  const Vector xr = linalg::select(base, el.rest);
  const detail::QpOutcome q =
      detail::solve_qp_column(el.omega, el.E, el.g.col(0), xr, linalg::select(lower, el.rest),
                              linalg::select(upper, el.rest), approach, settings);
  Vector x = base;
  for (std::size_t k = 0; k < el.rest.size(); ++k) x(el.rest[k]) = q.x(static_cast<Index>(k));
  return x;
}

/// Non-negative structural reconciliation by block principal pivoting on the
/// bottom variables; uppers follow from S.
inline Vector nn_bpv(const Matrix& omega, const CrossTemporalStructure& s, const Vector& base, int max_iter = 1000,
                     bool* fallback = nullptr) {
  const Matrix& S = s.strc_mat();
  linalg::Whitener L(omega);
  const Matrix W = L.whiten(S);
  const Matrix G = linalg::symmetrize(W.transpose() * W);
  const Vector c = W.transpose() * L.whiten(base);
  const qp::NnlsResult r = qp::nnls_bpp(G, c, max_iter);
  if (fallback) *fallback = r.single_pivot_fallback;
  return S * r.x;
}

/// Clamps reconciled bottom values at zero and aggregates.
inline ForecastSet nn_sntz(const Matrix& bottom, const CrossTemporalStructure& s) {
  return bottom_up(bottom, s, true, false);
}

struct LsResult {
  Matrix periods;
  LsReport report;
};

/// Reconciles per-period vectors (dim × H).
inline LsResult reconcile_periods(const Matrix& base, const CrossTemporalStructure& s, const Matrix& omega,
                                  const ReconciliationOptions& opts = {}, const std::string& omega_ref = "") {
  const Index d = s.dim();
  const Index H = base.cols();
  if (base.rows() != d)
    throw ValidationError("base forecasts have " + std::to_string(base.rows()) + " values per period, expected " +
                          std::to_string(d));
  if (!base.allFinite()) throw ValidationError("base forecasts contain non-finite values");

  LsResult out;
  out.report.approach = opts.approach;
  out.report.nn = opts.nn;

  // bounds and fixations per period
  Matrix lo = Matrix::Constant(d, H, -qp::kInf);
  Matrix hi = Matrix::Constant(d, H, qp::kInf);
  for (const Bound& b : opts.bounds) {
    if (std::isnan(b.lower) || std::isnan(b.upper)) throw ValidationError("bounds must not be NaN");
    if (b.lower > b.upper) throw ValidationError("lower bound exceeds upper bound");
    for (auto [h, pos] : detail::cell_positions(b.cell, s, H)) {
      lo(pos, h) = std::max(lo(pos, h), b.lower);
      hi(pos, h) = std::min(hi(pos, h), b.upper);
      if (lo(pos, h) > hi(pos, h)) throw InfeasibleError("bounds for " + s.position_label(pos) + " are empty");
    }
  }
  if (opts.nn == NonNegative::Qp) lo = lo.cwiseMax(0.0);
  const bool has_bounds = !opts.bounds.empty();
  if (has_bounds && (opts.nn == NonNegative::Sntz || opts.nn == NonNegative::Bpv))
    throw ValidationError("bounds can only be combined with nn=qp or no non-negativity");
  if (!opts.immutable.empty() && (opts.nn == NonNegative::Sntz || opts.nn == NonNegative::Bpv))
    throw ValidationError("immutable forecasts cannot be combined with nn=" + to_string(opts.nn));

  std::vector<std::vector<bool>> fixed_mask(static_cast<std::size_t>(H), std::vector<bool>(static_cast<std::size_t>(d)));
  for (const Cell& c : opts.immutable)
    for (auto [h, pos] : detail::cell_positions(c, s, H))
      fixed_mask[static_cast<std::size_t>(h)][static_cast<std::size_t>(pos)] = true;

  // group periods with identical fixed sets
  std::map<std::vector<bool>, IndexList> groups;
  for (Index h = 0; h < H; ++h) groups[fixed_mask[static_cast<std::size_t>(h)]].push_back(h);

  Matrix result(d, H);
  const bool qp_needed = has_bounds || opts.nn == NonNegative::Qp;
  for (const auto& [mask, cols] : groups) {
    IndexList fixed;
    for (Index i = 0; i < d; ++i)
      if (mask[static_cast<std::size_t>(i)]) fixed.push_back(i);
    out.report.immutable_count += static_cast<Index>(fixed.size() * cols.size());
    const Matrix B = linalg::select_cols(base, cols);
    for (std::size_t k = 0; k < cols.size(); ++k)
      for (Index f : fixed)
        if (B(f, static_cast<Index>(k)) < lo(f, cols[k]) || B(f, static_cast<Index>(k)) > hi(f, cols[k]))
          throw InfeasibleError("immutable forecast " + s.position_label(f) + " violates its bounds");

    Matrix X(d, static_cast<Index>(cols.size()));
    std::optional<detail::Elimination> el;
    if (fixed.empty()) {
      const ProjectionOperator P = build_projection(s, omega, opts.approach, omega_ref);
      out.report.rcond = P.rcond;
      X = P.apply(B);
    } else {
      el = detail::eliminate(s.cons_mat(), omega, fixed, B);
      const Matrix XR = detail::solve_reduced(*el, linalg::select_rows(B, el->rest));
      X = B;
      for (std::size_t r = 0; r < el->rest.size(); ++r) X.row(el->rest[r]) = XR.row(static_cast<Index>(r));
    }

    for (std::size_t k = 0; k < cols.size(); ++k) {
      const Index h = cols[k];
      const Index kk = static_cast<Index>(k);
      if (opts.nn == NonNegative::Sntz) {
        Vector b = linalg::select(Vector(X.col(kk)), s.bottom_index()).cwiseMax(0.0);
        X.col(kk) = s.strc_mat() * b;
      } else if (opts.nn == NonNegative::Bpv) {
        if (X.col(kk).minCoeff() < 0) {
          bool fb = false;
          X.col(kk) = nn_bpv(omega, s, B.col(kk), opts.bpv_max_iter, &fb);
          out.report.bpv_fallback = out.report.bpv_fallback || fb;
          ++out.report.constrained_columns;
        }
      } else if (qp_needed && detail::violates(X.col(kk), lo.col(h), hi.col(h))) {
        if (!el) el = detail::eliminate(s.cons_mat(), omega, fixed, B);
        const Vector base_r = linalg::select(Vector(B.col(kk)), el->rest);
        const Approach form = (opts.approach == Approach::Strc || opts.approach == Approach::StrcQp)
                                  ? Approach::StrcQp
                                  : Approach::ProjQp;
        const detail::QpOutcome q =
            detail::solve_qp_column(el->omega, el->E, el->g.col(kk), base_r, linalg::select(Vector(lo.col(h)), el->rest),
                                    linalg::select(Vector(hi.col(h)), el->rest), form, opts.solver);
        for (std::size_t r = 0; r < el->rest.size(); ++r) X(el->rest[r], kk) = q.x(static_cast<Index>(r));
        out.report.max_iterations = std::max(out.report.max_iterations, q.iterations);
        out.report.polished = out.report.polished && q.polished;
        ++out.report.constrained_columns;
      }
      for (Index f : fixed) X(f, kk) = B(f, kk);
      result.col(h) = X.col(kk);
    }
  }
  out.periods = std::move(result);
  return out;
}

struct ReconciliationResult {
  ForecastSet forecasts;
  LsReport report;
};

inline ReconciliationResult reconcile_ls(const ForecastSet& base, const CrossTemporalStructure& s,
                                         const CovarianceMatrix& cov, const ReconciliationOptions& opts = {}) {
  LsResult r = reconcile_periods(to_periods(base, s), s, cov.omega, opts, to_string(cov.estimator));
  return ReconciliationResult{from_periods(r.periods, s), r.report};
}

inline ReconciliationResult reconcile_ls(const ForecastSet& base, const CrossTemporalStructure& s,
                                         const Matrix& omega, const ReconciliationOptions& opts = {}) {
  LsResult r = reconcile_periods(to_periods(base, s), s, omega, opts);
  return ReconciliationResult{from_periods(r.periods, s), r.report};
}

/// Largest absolute constraint residual over all periods.
inline double coherence_inf(const Matrix& periods, const CrossTemporalStructure& s) {
  if (s.cons_mat().rows() == 0 || periods.size() == 0) return 0.0;
  return (s.cons_mat() * periods).cwiseAbs().maxCoeff();
}

inline double coherence_inf(const ForecastSet& fs, const CrossTemporalStructure& s) {
  return coherence_inf(to_periods(fs, s), s);
}

}  // namespace foreco
