#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "foreco/covariance.hpp"
#include "foreco/error.hpp"
#include "foreco/linalg.hpp"
#include "foreco/ls_reconciliation.hpp"
#include "foreco/series_tools.hpp"
#include "foreco/structures.hpp"

namespace foreco {

enum class StepOrder { Tcs, Cst };
enum class Averaging { Ka, Simple };
enum class NormKind { Inf, One, Two };

inline StepOrder parse_step_order(std::string_view s) {
  if (s == "tcs") return StepOrder::Tcs;
  if (s == "cst") return StepOrder::Cst;
  throw ValidationError("unknown step order: " + std::string(s) + " (expected tcs or cst)");
}
inline std::string to_string(StepOrder o) { return o == StepOrder::Tcs ? "tcs" : "cst"; }

inline Averaging parse_averaging(std::string_view s) {
  if (s == "KA" || s == "ka") return Averaging::Ka;
  if (s == "simple") return Averaging::Simple;
  throw ValidationError("unknown averaging: " + std::string(s) + " (expected KA or simple)");
}
inline std::string to_string(Averaging a) { return a == Averaging::Ka ? "KA" : "simple"; }

inline NormKind parse_norm(std::string_view s) {
  if (s == "inf") return NormKind::Inf;
  if (s == "one") return NormKind::One;
  if (s == "two") return NormKind::Two;
  throw ValidationError("unknown norm: " + std::string(s) + " (expected inf, one or two)");
}
inline std::string to_string(NormKind n) {
  switch (n) {
    case NormKind::Inf: return "inf";
    case NormKind::One: return "one";
    case NormKind::Two: return "two";
  }
  return "?";
}

/// Covariances for the one-dimensional steps: one n × n matrix per temporal
/// level (k_p first) and one kt × kt matrix per series. A single entry is
/// shared by every level or series.
struct DimensionCovariances {
  std::vector<Matrix> cs;
  std::vector<Matrix> te;

  const Matrix& cs_at(Index level) const {
    return cs.size() == 1 ? cs.front() : cs.at(static_cast<std::size_t>(level));
  }
  const Matrix& te_at(Index series) const {
    return te.size() == 1 ? te.front() : te.at(static_cast<std::size_t>(series));
  }
};

namespace detail {

/// Residual rows of level l reshaped to cross-sectional vectors: (T·m/k) × n.
inline Matrix cs_residuals_at(const Matrix& res, const CrossTemporalStructure& s, Index l) {
  const Index w = s.te().level_count(l);
  Matrix out(res.rows() * w, s.n());
  for (Index t = 0; t < res.rows(); ++t)
    for (Index j = 0; j < w; ++j)
      for (Index i = 0; i < s.n(); ++i) out(t * w + j, i) = res(t, s.index(i, l, j));
  return out;
}

}  // namespace detail

/// Builds the per-level cross-sectional and per-series temporal covariances
/// from cross-temporal residuals (T × dim).
inline DimensionCovariances dimension_covariances(const CrossTemporalStructure& s, Estimator cs_est,
                                                  Estimator te_est,
                                                  const std::optional<Matrix>& residuals = std::nullopt,
                                                  const CovarianceOptions& opts = {}) {
  const auto cs = CrossTemporalStructure::cross_sectional(s.cs());
  const auto te = CrossTemporalStructure::temporal(s.te());
  std::optional<Matrix> res;
  if (residuals) res = clean_residuals(*residuals, s.dim()).values;
  DimensionCovariances out;
  for (Index l = 0; l < s.te().p(); ++l) {
    std::optional<Matrix> r;
    if (res && requires_residuals(cs_est)) r = detail::cs_residuals_at(*res, s, l);
    out.cs.push_back(estimate_covariance(cs_est, cs, r, opts).omega);
  }
  for (Index i = 0; i < s.n(); ++i) {
    std::optional<Matrix> r;
    if (res && requires_residuals(te_est)) r = Matrix(res->middleCols(i * s.kt(), s.kt()));
    out.te.push_back(estimate_covariance(te_est, te, r, opts).omega);
  }
  return out;
}

namespace detail {

inline double norm_of(const Matrix& r, NormKind k) {
  if (r.size() == 0) return 0.0;
  switch (k) {
    case NormKind::Inf: return r.cwiseAbs().maxCoeff();
    case NormKind::One: return r.cwiseAbs().sum();
    case NormKind::Two: return r.norm();
  }
  return 0.0;
}

/// Cross-sectional constraint residuals over every temporal column.
inline Matrix cs_residual(const Matrix& X, const CrossTemporalStructure& s) {
  const Matrix& C = s.cs().cons_mat();
  Matrix out(C.rows(), s.kt() * X.cols());
  for (Index h = 0; h < X.cols(); ++h)
    for (Index c = 0; c < s.kt(); ++c) {
      Vector v(s.n());
      for (Index i = 0; i < s.n(); ++i) v(i) = X(i * s.kt() + c, h);
      out.col(h * s.kt() + c) = C * v;
    }
  return out;
}

/// Temporal constraint residuals of every series and period.
inline Matrix te_residual(const Matrix& X, const CrossTemporalStructure& s) {
  const Matrix& C = s.te().cons_mat();
  Matrix out(C.rows(), s.n() * X.cols());
  for (Index h = 0; h < X.cols(); ++h)
    for (Index i = 0; i < s.n(); ++i) out.col(h * s.n() + i) = C * X.block(i * s.kt(), h, s.kt(), 1);
  return out;
}

inline Matrix cs_projection(const CrossTemporalStructure& s, const Matrix& omega) {
  return build_projection(CrossTemporalStructure::cross_sectional(s.cs()), omega).M;
}

inline Matrix te_projection(const CrossTemporalStructure& s, const Matrix& omega) {
  return build_projection(CrossTemporalStructure::temporal(s.te()), omega).M;
}

/// Applies M_cs to the series vector of every temporal column; `per_level`
/// holds one matrix per temporal level.
inline void apply_cs(Matrix& X, const CrossTemporalStructure& s, const std::vector<Matrix>& per_level) {
  const auto& te = s.te();
  for (Index h = 0; h < X.cols(); ++h)
    for (Index l = 0; l < te.p(); ++l)
      for (Index j = 0; j < te.level_count(l); ++j) {
        Vector v(s.n());
        for (Index i = 0; i < s.n(); ++i) v(i) = X(s.index(i, l, j), h);
        const Vector r = per_level[static_cast<std::size_t>(l)] * v;
        for (Index i = 0; i < s.n(); ++i) X(s.index(i, l, j), h) = r(i);
      }
}

/// Applies M_te to the kt values of every series and period.
inline void apply_te(Matrix& X, const CrossTemporalStructure& s, const std::vector<Matrix>& per_series) {
  for (Index h = 0; h < X.cols(); ++h)
    for (Index i = 0; i < s.n(); ++i) {
      const Vector v = X.block(i * s.kt(), h, s.kt(), 1);
      X.block(i * s.kt(), h, s.kt(), 1) = per_series[static_cast<std::size_t>(i)] * v;
    }
}

inline void check_dims(const DimensionCovariances& cov, const CrossTemporalStructure& s) {
  if (cov.cs.size() != 1 && static_cast<Index>(cov.cs.size()) != s.te().p())
    throw ValidationError("expected 1 or " + std::to_string(s.te().p()) + " cross-sectional covariances");
  if (cov.te.size() != 1 && static_cast<Index>(cov.te.size()) != s.n())
    throw ValidationError("expected 1 or " + std::to_string(s.n()) + " temporal covariances");
}

}  // namespace detail

/// Sequential cross-temporal reconciliation.
///
/// tcs: temporal reconciliation of every series, then one cross-sectional
/// projection applied to every temporal column. The latter combines the
/// per-level projections M_k: KA takes their plain mean over levels, simple
/// the mean over all kt columns (level k weighted by m/k). cst runs the
/// cross-sectional step first, then one temporal projection, the mean of the
/// per-series projections.
inline ForecastSet two_step(const ForecastSet& base, const CrossTemporalStructure& s, const DimensionCovariances& cov,
                            StepOrder order = StepOrder::Tcs, Averaging avg = Averaging::Ka) {
  detail::check_dims(cov, s);
  Matrix X = to_periods(base, s);
  if (!X.allFinite()) throw ValidationError("base forecasts contain non-finite values");
  const auto& te = s.te();
  std::vector<Matrix> Mcs, Mte;
  for (Index l = 0; l < te.p(); ++l) Mcs.push_back(detail::cs_projection(s, cov.cs_at(l)));
  for (Index i = 0; i < s.n(); ++i) Mte.push_back(detail::te_projection(s, cov.te_at(i)));

  if (order == StepOrder::Tcs) {
    detail::apply_te(X, s, Mte);
    Matrix Mbar = Matrix::Zero(s.n(), s.n());
    double wsum = 0.0;
    for (Index l = 0; l < te.p(); ++l) {
      const double w = avg == Averaging::Ka ? 1.0 : static_cast<double>(te.level_count(l));
      Mbar += w * Mcs[static_cast<std::size_t>(l)];
      wsum += w;
    }
    Mbar /= wsum;
    detail::apply_cs(X, s, std::vector<Matrix>(static_cast<std::size_t>(te.p()), Mbar));
  } else {
    detail::apply_cs(X, s, Mcs);
    Matrix Mbar = Matrix::Zero(s.kt(), s.kt());
    for (const Matrix& M : Mte) Mbar += M;
    Mbar /= static_cast<double>(Mte.size());
    detail::apply_te(X, s, std::vector<Matrix>(static_cast<std::size_t>(s.n()), Mbar));
  }
  return from_periods(X, s);
}

struct IterationReport {
  int iterations = 0;
  std::vector<double> trace;
  NormKind norm = NormKind::Inf;
  bool converged = false;
  double initial = 0.0;
  double final_cs = 0.0;
  double final_te = 0.0;
};

struct IterativeOptions {
  int itmax = 100;
  double tol = 1e-5;
  StepOrder type = StepOrder::Tcs;
  NormKind norm = NormKind::Inf;
};

struct IterativeResult {
  ForecastSet forecasts;
  IterationReport report;
};

/// Alternates one-dimensional reconciliations until the constraints of the
/// dimension reconciled first hold within `tol` after the second step.
inline IterativeResult iterative(const ForecastSet& base, const CrossTemporalStructure& s,
                                 const DimensionCovariances& cov, const IterativeOptions& opts = {}) {
  if (opts.itmax < 1) throw ValidationError("itmax must be at least 1");
  if (!(opts.tol > 0)) throw ValidationError("tol must be positive");
  detail::check_dims(cov, s);
  Matrix X = to_periods(base, s);
  if (!X.allFinite()) throw ValidationError("base forecasts contain non-finite values");
  std::vector<Matrix> Mcs, Mte;
  for (Index l = 0; l < s.te().p(); ++l) Mcs.push_back(detail::cs_projection(s, cov.cs_at(l)));
  for (Index i = 0; i < s.n(); ++i) Mte.push_back(detail::te_projection(s, cov.te_at(i)));

  const bool tcs = opts.type == StepOrder::Tcs;
  auto check = [&](const Matrix& Y) {
    return detail::norm_of(tcs ? detail::te_residual(Y, s) : detail::cs_residual(Y, s), opts.norm);
  };
  IterativeResult out;
  out.report.norm = opts.norm;
  out.report.initial = check(X);
  for (int it = 1; it <= opts.itmax; ++it) {
    if (tcs) {
      detail::apply_te(X, s, Mte);
      detail::apply_cs(X, s, Mcs);
    } else {
      detail::apply_cs(X, s, Mcs);
      detail::apply_te(X, s, Mte);
    }
    const double v = check(X);
    out.report.trace.push_back(v);
    out.report.iterations = it;
    if (v <= opts.tol) {
      out.report.converged = true;
      break;
    }
  }
  out.report.final_cs = detail::norm_of(detail::cs_residual(X, s), opts.norm);
  out.report.final_te = detail::norm_of(detail::te_residual(X, s), opts.norm);
  out.forecasts = from_periods(X, s);
  return out;
}

}  // namespace foreco
