#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "foreco/error.hpp"
#include "foreco/linalg.hpp"
#include "foreco/series_tools.hpp"
#include "foreco/structures.hpp"

namespace foreco {

/// Disaggregation proportions for the free (bottom, high-frequency) variables.
///
/// Length n_b (cs), m (te) or n_b·m (ct, series-major). With `normalize`
/// set, the weights are rescaled to sum to one before use.
struct WeightVector {
  Vector weights;
  bool normalize = true;

  Vector normalized() const {
    if (!weights.allFinite()) throw ValidationError("weights must be finite");
    if (!normalize) return weights;
    const double s = weights.sum();
    if (s == 0.0) throw ValidationError("weights sum to zero and cannot be normalized");
    return weights / s;
  }
};

namespace detail {

inline Matrix clamp_and_round(Matrix free, bool sntz, bool round) {
  if (sntz) free = free.cwiseMax(0.0);
  if (round) free = free.unaryExpr([](double v) { return std::round(v); });
  return free;
}

/// Splits `value` over the free variables in `support` proportionally to `w`,
/// so that the aggregation row `a` reproduces `value` when normalizing.
inline void disaggregate(double value, const Vector& a, const IndexList& support, const Vector& w, bool normalize,
                         Eigen::Ref<Vector> free) {
  double scale = 1.0;
  if (normalize) {
    double sw = 0.0;
    for (Index f : support) sw += w(f);
    if (sw == 0.0) throw ValidationError("weights sum to zero within a disaggregation block");
    double aw = 0.0;
    for (Index f : support) aw += a(f) * w(f) / sw;
    if (aw == 0.0) throw ValidationError("weights give a zero aggregate within a disaggregation block");
    scale = 1.0 / (sw * aw);
  }
  for (Index f : support) free(f) = value * w(f) * scale;
}

}  // namespace detail

/// Aggregates bottom high-frequency forecasts (n_b rows × m·H columns) to the full structure.
inline ForecastSet bottom_up(const Matrix& bottom, const CrossTemporalStructure& s, bool sntz = false,
                             bool round = false) {
  if (!bottom.allFinite()) throw ValidationError("bottom forecasts contain non-finite values");
  const Matrix free = detail::clamp_and_round(bottom_to_periods(bottom, s), sntz, round);
  return from_periods(s.strc_mat() * free, s);
}

/// Same as bottom_up, starting from per-period free variables (n_b·m × H).
inline Matrix bottom_up_periods(const Matrix& free, const CrossTemporalStructure& s, bool sntz = false,
                                bool round = false) {
  return s.strc_mat() * detail::clamp_and_round(free, sntz, round);
}

/// Proportional disaggregation of the top forecast (1 × H: the first series at order m).
inline ForecastSet top_down(const Matrix& top, const CrossTemporalStructure& s, const WeightVector& weights) {
  const Index nf = s.n_free();
  if (top.rows() != 1) throw ValidationError("top-down expects a single row of top-level forecasts");
  if (weights.weights.size() != nf)
    throw ValidationError("weights have length " + std::to_string(weights.weights.size()) + ", expected " +
                          std::to_string(nf));
  if (!top.allFinite()) throw ValidationError("top forecasts contain non-finite values");
  const Vector w = weights.normalized();
  const Vector a = s.strc_mat().row(0).transpose();
  IndexList all(static_cast<std::size_t>(nf));
  for (Index f = 0; f < nf; ++f) all[static_cast<std::size_t>(f)] = f;

  const Index H = top.cols();
  Matrix free(nf, H);
  for (Index h = 0; h < H; ++h) {
    Vector col(nf);
    detail::disaggregate(top(0, h), a, all, w, weights.normalize, col);
    free.col(h) = col;
  }
  Matrix periods = s.strc_mat() * free;
  if (weights.normalize) periods.row(0) = top.row(0);
  return from_periods(periods, s);
}

/// Middle-out reconciliation from level (id_rows, order).
///
/// `base` holds one row per entry of `id_rows` (0-based rows of the
/// cross-sectional aggregation matrix) and m·H/order columns. Values above
/// the middle level follow by aggregation; below it each block is split with
/// the weights restricted to its own support. The supports of the middle
/// nodes must partition the free variables.
inline ForecastSet middle_out(const Matrix& base, const CrossTemporalStructure& s, const WeightVector& weights,
                              const IndexList& id_rows, int order) {
  const auto& cs = s.cs();
  const auto& te = s.te();
  const Index nf = s.n_free();
  if (weights.weights.size() != nf)
    throw ValidationError("weights have length " + std::to_string(weights.weights.size()) + ", expected " +
                          std::to_string(nf));
  const auto level = te.level_of(order);
  if (!level) throw ValidationError("order " + std::to_string(order) + " is not an aggregation order");

  IndexList series;
  if (cs.n_upper() == 0) {
    if (!id_rows.empty() && !(id_rows.size() == 1 && id_rows[0] == 0))
      throw ValidationError("id_rows must be empty or {1} without cross-sectional constraints");
    series.push_back(0);
  } else {
    if (id_rows.empty()) throw ValidationError("id_rows is empty");
    for (Index r : id_rows) {
      if (r < 0 || r >= cs.n_upper())
        throw ValidationError("id_rows entry " + std::to_string(r + 1) + " is outside the aggregation matrix");
      series.push_back(r);
    }
  }
  const Index per_period = te.level_count(*level);
  if (base.rows() != static_cast<Index>(series.size()))
    throw ValidationError("middle-out base has " + std::to_string(base.rows()) + " rows, expected " +
                          std::to_string(series.size()));
  if (base.cols() == 0 || base.cols() % per_period != 0)
    throw ValidationError("middle-out base width " + std::to_string(base.cols()) + " is not a multiple of " +
                          std::to_string(per_period));
  if (!base.allFinite()) throw ValidationError("middle-out base contains non-finite values");

  const Matrix& S = s.strc_mat();
  // middle positions with their supports over the free variables
  std::vector<Index> positions;
  std::vector<IndexList> supports;
  std::vector<int> cover(static_cast<std::size_t>(nf), 0);
  for (Index i : series)
    for (Index j = 0; j < per_period; ++j) {
      const Index pos = s.index(i, *level, j);
      IndexList sup;
      for (Index f = 0; f < nf; ++f)
        if (S(pos, f) != 0.0) {
          sup.push_back(f);
          ++cover[static_cast<std::size_t>(f)];
        }
      positions.push_back(pos);
      supports.push_back(std::move(sup));
    }
  for (Index f = 0; f < nf; ++f) {
    if (cover[static_cast<std::size_t>(f)] == 0)
      throw ValidationError("id_rows do not cover every bottom series");
    if (cover[static_cast<std::size_t>(f)] > 1) throw ValidationError("id_rows have overlapping bottom supports");
  }

  const Vector w = weights.weights;
  if (!w.allFinite()) throw ValidationError("weights must be finite");
  const Index H = base.cols() / per_period;
  Matrix free = Matrix::Zero(nf, H);
  for (Index h = 0; h < H; ++h) {
    Vector col = Vector::Zero(nf);
    for (std::size_t p = 0; p < positions.size(); ++p) {
      const Index row = static_cast<Index>(p) / per_period;
      const Index j = static_cast<Index>(p) % per_period;
      detail::disaggregate(base(row, h * per_period + j), S.row(positions[p]).transpose(), supports[p], w,
                           weights.normalize, col);
    }
    free.col(h) = col;
  }
  Matrix periods = S * free;
  if (weights.normalize) {
    for (std::size_t p = 0; p < positions.size(); ++p) {
      const Index row = static_cast<Index>(p) / per_period;
      const Index j = static_cast<Index>(p) % per_period;
      for (Index h = 0; h < H; ++h) periods(positions[p], h) = base(row, h * per_period + j);
    }
  }
  return from_periods(periods, s);
}

}  // namespace foreco
