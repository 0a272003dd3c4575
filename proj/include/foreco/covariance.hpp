#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "foreco/error.hpp"
#include "foreco/linalg.hpp"
#include "foreco/series_tools.hpp"
#include "foreco/structures.hpp"

namespace foreco {

enum class Estimator { Ols, Str, CsStr, TeStr, Wls, Wlsv, Wlsh, Sam, Shr, BdSam, BdShr };

inline std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::Ols: return "ols";
    case Estimator::Str: return "str";
    case Estimator::CsStr: return "csstr";
    case Estimator::TeStr: return "testr";
    case Estimator::Wls: return "wls";
    case Estimator::Wlsv: return "wlsv";
    case Estimator::Wlsh: return "wlsh";
    case Estimator::Sam: return "sam";
    case Estimator::Shr: return "shr";
    case Estimator::BdSam: return "bdsam";
    case Estimator::BdShr: return "bdshr";
  }
  return "?";
}

inline Estimator parse_estimator(std::string_view tag) {
  static constexpr std::pair<std::string_view, Estimator> known[] = {
      {"ols", Estimator::Ols},     {"str", Estimator::Str},     {"csstr", Estimator::CsStr},
      {"testr", Estimator::TeStr}, {"wls", Estimator::Wls},     {"wlsv", Estimator::Wlsv},
      {"wlsh", Estimator::Wlsh},   {"sam", Estimator::Sam},     {"shr", Estimator::Shr},
      {"bdsam", Estimator::BdSam}, {"bdshr", Estimator::BdShr},
  };
  for (const auto& [name, e] : known)
    if (tag == name) return e;
  throw UnsupportedEstimator(std::string(tag));
}

inline bool requires_residuals(Estimator e) {
  switch (e) {
    case Estimator::Ols:
    case Estimator::Str:
    case Estimator::CsStr:
    case Estimator::TeStr: return false;
    default: return true;
  }
}

inline bool is_diagonal(Estimator e) {
  switch (e) {
    case Estimator::Sam:
    case Estimator::Shr:
    case Estimator::BdSam:
    case Estimator::BdShr: return false;
    default: return true;
  }
}

inline bool available(Estimator e, Framework f) {
  switch (e) {
    case Estimator::Ols:
    case Estimator::Str:
    case Estimator::Sam:
    case Estimator::Shr: return true;
    case Estimator::Wls: return f == Framework::CrossSectional;
    case Estimator::Wlsv:
    case Estimator::Wlsh: return f != Framework::CrossSectional;
    case Estimator::CsStr:
    case Estimator::TeStr:
    case Estimator::BdSam:
    case Estimator::BdShr: return f == Framework::CrossTemporal;
  }
  return false;
}

inline std::vector<Estimator> estimators_for(Framework f) {
  std::vector<Estimator> out;
  for (int i = 0; i <= static_cast<int>(Estimator::BdShr); ++i)
    if (available(static_cast<Estimator>(i), f)) out.push_back(static_cast<Estimator>(i));
  return out;
}

struct CovarianceMatrix {
  Matrix omega;
  Estimator estimator = Estimator::Ols;
  std::optional<double> shrink_lambda;
  bool repaired = false;
  double repair_epsilon = 0.0;
  Index excluded_rows = 0;

  Index dim() const { return omega.rows(); }
};

struct CovarianceOptions {
  /// Residuals are used as errors around zero (no mean correction).
  bool mse = true;
  /// Replaces the built-in shrinkage for shr/bdshr; maps residuals to a covariance.
  std::function<Matrix(const Matrix&)> shrink_fun;
  /// Fixes the shrinkage intensity instead of estimating it.
  std::optional<double> lambda;
};

namespace detail {

inline Index min_rows(bool mse) { return mse ? 1 : 2; }

/// Two-pass covariance. mse: XᵀX/T; otherwise centered with divisor T-1.
inline Matrix sample_cov(const Matrix& x, bool mse) {
  const Index T = x.rows();
  if (T < min_rows(mse)) throw ValidationError("not enough residual rows to estimate a covariance");
  if (mse) return linalg::symmetrize(x.transpose() * x / static_cast<double>(T));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Matrix c = x.rowwise() - mean;
  return linalg::symmetrize(c.transpose() * c / static_cast<double>(T - 1));
}

inline Vector column_variances(const Matrix& x, bool mse) {
  const Index T = x.rows();
  if (T < min_rows(mse)) throw ValidationError("not enough residual rows to estimate variances");
  Vector v(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    if (mse) {
      v(j) = x.col(j).squaredNorm() / static_cast<double>(T);
    } else {
      const double mean = x.col(j).mean();
      v(j) = (x.col(j).array() - mean).square().sum() / static_cast<double>(T - 1);
    }
  }
  return v;
}

}  // namespace detail

struct ShrinkResult {
  double lambda = 0.0;
  Matrix cov;
};

/// Shrinks the sample covariance toward its diagonal.
///
/// The intensity is λ = Σ_{i≠j} Var(r_ij) / Σ_{i≠j} r_ij², with r the sample
/// correlations and Var(r_ij) estimated from the standardized residuals,
/// clamped to [0, 1]. When every sample correlation is zero λ = 1. The
/// diagonal of the result is the sample diagonal, bit for bit.
inline ShrinkResult shrink_intensity(const Matrix& residuals, bool mse = true,
                                     std::optional<double> lambda_override = std::nullopt) {
  const Index T = residuals.rows();
  if (T < 2) throw ValidationError("shrinkage needs at least 2 residual rows, got " + std::to_string(T));
  const Matrix sam = detail::sample_cov(residuals, mse);
  const Index p = sam.cols();

  double lambda;
  if (lambda_override) {
    lambda = *lambda_override;
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("shrinkage intensity must lie in [0, 1]");
  } else {
    Matrix xs = residuals;
    if (!mse) xs = xs.rowwise() - residuals.colwise().mean();
    Vector sd = sam.diagonal().cwiseSqrt();
    for (Index j = 0; j < p; ++j) {
      if (sd(j) > 0)
        xs.col(j) /= sd(j);
      else
        xs.col(j).setZero();
    }
    const Matrix xs2 = xs.array().square().matrix();
    const Matrix cross = xs.transpose() * xs;
    const double Td = static_cast<double>(T);
    Matrix v = (xs2.transpose() * xs2 - cross.array().square().matrix() / Td) / (Td * (Td - 1.0));
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < p; ++j) {
        if (i == j) continue;
        num += v(i, j);
        const double r = (sd(i) > 0 && sd(j) > 0) ? sam(i, j) / (sd(i) * sd(j)) : 0.0;
        den += r * r;
      }
    lambda = den > 0 ? std::clamp(num / den, 0.0, 1.0) : 1.0;
  }

  ShrinkResult out;
  out.lambda = lambda;
  out.cov = (1.0 - lambda) * sam;
  out.cov.diagonal() = sam.diagonal();
  return out;
}

namespace detail {

inline Vector structural_diag(const CrossTemporalStructure& s) {
  return s.strc_mat().rowwise().sum();
}

inline Matrix shrunk(const Matrix& res, const CovarianceOptions& opts, std::optional<double>& lambda_out) {
  if (opts.shrink_fun) {
    Matrix m = opts.shrink_fun(res);
    if (m.rows() != res.cols() || m.cols() != res.cols())
      throw ValidationError("custom shrinkage function returned a matrix of the wrong size");
    return linalg::symmetrize(m);
  }
  ShrinkResult r = shrink_intensity(res, opts.mse, opts.lambda);
  lambda_out = r.lambda;
  return std::move(r.cov);
}

}  // namespace detail

/// Adds ε·I when the minimum eigenvalue is negative beyond -1e-8·trace/d.
inline void repair_psd(CovarianceMatrix& cov) {
  const Index d = cov.omega.rows();
  if (d == 0) return;
  const double tr = cov.omega.trace();
  const double scale = std::max(tr, 0.0) / static_cast<double>(d);
  const double mn = linalg::min_eigenvalue(cov.omega);
  if (mn < -1e-8 * scale) {
    const double eps = std::abs(mn) + 1e-12 * scale;
    cov.omega.diagonal().array() += eps;
    cov.repaired = true;
    cov.repair_epsilon = eps;
  }
}

/// Base-forecast error covariance of the structure's full per-period dimension.
inline CovarianceMatrix estimate_covariance(Estimator est, const CrossTemporalStructure& s,
                                            const std::optional<Matrix>& residuals = std::nullopt,
                                            const CovarianceOptions& opts = {}) {
  if (!available(est, s.framework()))
    throw ValidationError("estimator " + to_string(est) + " is not available for framework " +
                          to_string(s.framework()));
  const Index d = s.dim();
  CovarianceMatrix out;
  out.estimator = est;

  Matrix res;
  if (requires_residuals(est)) {
    if (!residuals) throw ValidationError("estimator " + to_string(est) + " requires residuals (res)");
    CleanResiduals c = clean_residuals(*residuals, d);
    res = std::move(c.values);
    out.excluded_rows = c.excluded_rows;
    if (res.rows() == 0) throw ValidationError("no finite residual rows left");
  }

  switch (est) {
    case Estimator::Ols: out.omega = Matrix::Identity(d, d); break;
    case Estimator::Str: out.omega = detail::structural_diag(s).asDiagonal(); break;
    case Estimator::CsStr: {
      const Vector cs = s.cs().strc_mat().rowwise().sum();
      out.omega = linalg::kron(Matrix(cs.asDiagonal()), Matrix::Identity(s.kt(), s.kt()));
      break;
    }
    case Estimator::TeStr: {
      const Vector te = s.te().strc_mat().rowwise().sum();
      out.omega = linalg::kron(Matrix::Identity(s.n(), s.n()), Matrix(te.asDiagonal()));
      break;
    }
    case Estimator::Wls:
    case Estimator::Wlsh: out.omega = detail::column_variances(res, opts.mse).asDiagonal(); break;
    case Estimator::Wlsv: {
      const Vector var = detail::column_variances(res, opts.mse);
      Vector pooled(d);
      for (Index i = 0; i < s.n(); ++i)
        for (Index l = 0; l < s.te().p(); ++l) {
          const Index w = s.te().level_count(l);
          double acc = 0.0;
          for (Index j = 0; j < w; ++j) acc += var(s.index(i, l, j));
          for (Index j = 0; j < w; ++j) pooled(s.index(i, l, j)) = acc / static_cast<double>(w);
        }
      out.omega = pooled.asDiagonal();
      break;
    }
    case Estimator::Sam: out.omega = detail::sample_cov(res, opts.mse); break;
    case Estimator::Shr: out.omega = detail::shrunk(res, opts, out.shrink_lambda); break;
    case Estimator::BdSam:
    case Estimator::BdShr: {
      const Index k = s.kt();
      out.omega = Matrix::Zero(d, d);
      for (Index i = 0; i < s.n(); ++i) {
        const Matrix block = res.middleCols(i * k, k);
        if (est == Estimator::BdSam) {
          out.omega.block(i * k, i * k, k, k) = detail::sample_cov(block, opts.mse);
        } else {
          std::optional<double> lam;
          out.omega.block(i * k, i * k, k, k) = detail::shrunk(block, opts, lam);
        }
      }
      break;
    }
  }
  if (!is_diagonal(est)) repair_psd(out);
  return out;
}

inline CovarianceMatrix estimate_covariance(std::string_view tag, const CrossTemporalStructure& s,
                                            const std::optional<Matrix>& residuals = std::nullopt,
                                            const CovarianceOptions& opts = {}) {
  return estimate_covariance(parse_estimator(tag), s, residuals, opts);
}

}  // namespace foreco
