#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "foreco/covariance.hpp"
#include "foreco/error.hpp"
#include "foreco/linalg.hpp"
#include "foreco/ls_reconciliation.hpp"
#include "foreco/parallel.hpp"
#include "foreco/series_tools.hpp"
#include "foreco/structures.hpp"

namespace foreco {

/// Gaussian forecast of one period: per-period mean vector and covariance.
struct GaussianForecast {
  Vector mean;
  Matrix cov;
  bool reduced = false;
};

struct GaussianReport {
  double min_eigenvalue = 0.0;
  bool repaired = false;
  bool sigma_is_omega = false;
};

struct GaussianResult {
  GaussianForecast forecast;
  GaussianReport report;
};

struct GaussianOptions {
  Approach approach = Approach::Proj;
  bool reduce_form = false;
  /// Σ equals the reconciliation covariance Ω, so MΣMᵀ simplifies to MΩ.
  bool sigma_is_omega = false;
};

namespace detail {

/// Clips eigenvalues below −tol·scale to zero; returns the smallest eigenvalue found.
inline double clip_negative(Matrix& cov, bool& repaired) {
  repaired = false;
  if (cov.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const double lo = es.eigenvalues().minCoeff();
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (lo < -1e-10 * scale) {
    const Vector ev = es.eigenvalues().cwiseMax(0.0);
    cov = linalg::symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
    repaired = true;
  }
  return lo;
}

}  // namespace detail

/// x̃ ∼ N(Mμ, MΣMᵀ), optionally reduced to the bottom high-frequency marginal.
inline GaussianResult reconcile_gaussian(const GaussianForecast& base, const CrossTemporalStructure& s,
                                         const Matrix& omega, const GaussianOptions& opts = {}) {
  const Index d = s.dim();
  if (base.reduced) throw ValidationError("base distribution must cover every series");
  if (base.mean.size() != d)
    throw ValidationError("mean has length " + std::to_string(base.mean.size()) + ", expected " + std::to_string(d));
  if (base.cov.rows() != d || base.cov.cols() != d)
    throw ValidationError("base covariance is " + std::to_string(base.cov.rows()) + "x" +
                          std::to_string(base.cov.cols()) + ", expected " + std::to_string(d) + "x" +
                          std::to_string(d));
  if (!base.mean.allFinite() || !base.cov.allFinite())
    throw ValidationError("base distribution contains non-finite values");
  if (opts.approach == Approach::ProjQp || opts.approach == Approach::StrcQp)
    throw ValidationError("Gaussian reconciliation needs a linear approach (proj or strc)");
  const Matrix M = build_projection(s, omega, opts.approach).M;

  GaussianResult out;
  out.report.sigma_is_omega = opts.sigma_is_omega;
  out.forecast.mean = M * base.mean;
  Matrix cov = opts.sigma_is_omega ? linalg::symmetrize(M * base.cov)
                                   : linalg::symmetrize(M * base.cov * M.transpose());
  out.report.min_eigenvalue = detail::clip_negative(cov, out.report.repaired);
  if (opts.reduce_form) {
    const IndexList& B = s.bottom_index();
    out.forecast.mean = linalg::select_rows(Matrix(out.forecast.mean), B).col(0);
    cov = linalg::select(cov, B, B);
    out.forecast.reduced = true;
  }
  out.forecast.cov = std::move(cov);
  return out;
}

struct GaussianPeriods {
  Matrix mean;  // dim × H, or n_free × H when reduced
  Matrix cov;
  GaussianReport report;
};

/// Builds Ω from `comb` and Σ from `comb_base` (Σ = Ω when they coincide or
/// `comb_base` is absent) and reconciles every period of `base`.
inline GaussianPeriods reconcile_gaussian(const ForecastSet& base, const CrossTemporalStructure& s, Estimator comb,
                                          std::optional<Estimator> comb_base, const std::optional<Matrix>& residuals,
                                          const GaussianOptions& opts = {}, const CovarianceOptions& copts = {}) {
  const Matrix X = to_periods(base, s);
  const CovarianceMatrix omega = estimate_covariance(comb, s, residuals, copts);
  GaussianOptions o = opts;
  Matrix sigma;
  if (!comb_base || *comb_base == comb) {
    sigma = omega.omega;
    o.sigma_is_omega = true;
  } else {
    sigma = estimate_covariance(*comb_base, s, residuals, copts).omega;
    o.sigma_is_omega = false;
  }
  GaussianPeriods out;
  for (Index h = 0; h < X.cols(); ++h) {
    const auto r = reconcile_gaussian(GaussianForecast{X.col(h), sigma, false}, s, omega.omega, o);
    if (h == 0) {
      out.mean.resize(r.forecast.mean.size(), X.cols());
      out.cov = r.forecast.cov;
      out.report = r.report;
    }
    out.mean.col(h) = r.forecast.mean;
  }
  return out;
}

/// Draws of base forecasts, one per row. Each row is the row-major
/// flattening of an n × (kt·H) forecast matrix.
struct SampleForecast {
  Matrix draws;
  Index count() const { return draws.rows(); }
};

using PointMethod = std::function<ForecastSet(const ForecastSet&)>;

inline ForecastSet unflatten_draw(const Eigen::Ref<const Vector>& row, const CrossTemporalStructure& s) {
  const Index n = s.n();
  if (row.size() % s.dim() != 0)
    throw ValidationError("draw length " + std::to_string(row.size()) + " is not a multiple of " +
                          std::to_string(s.dim()));
  const Index H = row.size() / s.dim();
  ForecastSet fs{Matrix(n, s.kt() * H), Layout::of(s.te(), H)};
  for (Index i = 0; i < n; ++i) fs.values.row(i) = row.segment(i * s.kt() * H, s.kt() * H).transpose();
  return fs;
}

inline Vector flatten_draw(const ForecastSet& fs) {
  Vector out(fs.values.size());
  const Index q = fs.values.cols();
  for (Index i = 0; i < fs.values.rows(); ++i) out.segment(i * q, q) = fs.values.row(i).transpose();
  return out;
}

/// Applies `method` to every draw independently. Output rows keep the input
/// order whatever the schedule; the first failing draw (lowest index) is
/// reported and aborts the batch.
inline SampleForecast reconcile_samples(const SampleForecast& base, const CrossTemporalStructure& s,
                                        const PointMethod& method, unsigned threads = 0) {
  const Index B = base.count();
  if (B == 0) throw ValidationError("no draws to reconcile");
  if (!base.draws.allFinite()) throw ValidationError("draws contain non-finite values");
  // validates the layout before spawning workers
  (void)unflatten_draw(base.draws.row(0).transpose(), s);
  std::vector<Vector> rows(static_cast<std::size_t>(B));
  const auto errors = parallel_for(B, threads, [&](Index b) {
    rows[static_cast<std::size_t>(b)] = flatten_draw(method(unflatten_draw(base.draws.row(b).transpose(), s)));
  });
  for (Index b = 0; b < B; ++b) {
    const auto& e = errors[static_cast<std::size_t>(b)];
    if (!e) continue;
    const std::string where = "draw " + std::to_string(b) + ": ";
    try {
      std::rethrow_exception(e);
    } catch (const UnsupportedEstimator&) {
      throw;
    } catch (const ValidationError& x) {
      throw ValidationError(where + x.what());
    } catch (const InfeasibleError& x) {
      throw InfeasibleError(where + x.what());
    } catch (const NumericalError& x) {
      throw NumericalError(where + x.what());
    } catch (const std::exception& x) {
      throw NumericalError(where + x.what());
    }
  }
  SampleForecast out{Matrix(B, rows.front().size())};
  for (Index b = 0; b < B; ++b) {
    if (rows[static_cast<std::size_t>(b)].size() != out.draws.cols())
      throw ValidationError("draw " + std::to_string(b) + ": reconciled draw has an unexpected length");
    out.draws.row(b) = rows[static_cast<std::size_t>(b)].transpose();
  }
  return out;
}

}  // namespace foreco
