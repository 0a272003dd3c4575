#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foreco/error.hpp"
#include "foreco/linalg.hpp"
#include "foreco/structures.hpp"

namespace foreco {

struct AggregateResult {
  Vector values;
  Index dropped = 0;  // trailing observations that did not fill a block
  bool partial_block_dropped() const noexcept { return dropped > 0; }
};

/// Non-overlapping temporal aggregation of a single series.
inline AggregateResult aggregate(std::span<const double> series, int k, Tew tew = Tew::Sum) {
  if (k <= 0) throw ValidationError("aggregation order must be positive, got " + std::to_string(k));
  const Index T = static_cast<Index>(series.size());
  const Index blocks = T / k;
  AggregateResult out;
  out.values.resize(blocks);
  out.dropped = T - blocks * k;
  for (Index j = 0; j < blocks; ++j) {
    const double* b = series.data() + j * k;
    double v = 0.0;
    switch (tew) {
      case Tew::Sum:
        for (int t = 0; t < k; ++t) v += b[t];
        break;
      case Tew::Avg:
        for (int t = 0; t < k; ++t) v += b[t];
        v /= k;
        break;
      case Tew::First: v = b[0]; break;
      case Tew::Last: v = b[k - 1]; break;
    }
    out.values(j) = v;
  }
  return out;
}

inline AggregateResult aggregate(const Vector& series, int k, Tew tew = Tew::Sum) {
  return aggregate(std::span<const double>(series.data(), static_cast<std::size_t>(series.size())), k, tew);
}

/// Column layout of a forecast matrix: level blocks from the largest order
/// down to 1, each holding m·H/k columns.
struct Layout {
  std::vector<int> orders{1};
  int m = 1;
  Index horizon = 1;

  static Layout of(const TemporalStructure& te, Index horizon) { return Layout{te.orders(), te.m(), horizon}; }

  Index level_width(std::size_t level) const { return m * horizon / orders[level]; }
  Index level_start(std::size_t level) const {
    Index s = 0;
    for (std::size_t l = 0; l < level; ++l) s += level_width(l);
    return s;
  }
  Index q() const { return level_start(orders.size()); }
  bool operator==(const Layout&) const = default;
};

/// Base or reconciled forecasts: one row per series, columns per `layout`.
struct ForecastSet {
  Matrix values;
  Layout layout;

  Index n() const { return values.rows(); }
  Index horizon() const { return layout.horizon; }

  static ForecastSet cross_sectional(Matrix values) {
    Layout l;
    l.horizon = values.cols();
    return ForecastSet{std::move(values), l};
  }

  void validate() const {
    if (values.cols() != layout.q())
      throw ValidationError("forecast matrix has " + std::to_string(values.cols()) + " columns, layout expects " +
                            std::to_string(layout.q()));
  }
};

/// Infers the horizon from the column count for a given temporal structure.
inline ForecastSet make_forecast_set(Matrix values, const TemporalStructure& te) {
  const Index kt = te.kt();
  if (values.cols() == 0 || values.cols() % kt != 0)
    throw ValidationError("forecast matrix width " + std::to_string(values.cols()) + " is not a multiple of " +
                          std::to_string(kt) + " (values per top period)");
  ForecastSet fs{std::move(values), Layout::of(te, 0)};
  fs.layout.horizon = fs.values.cols() / kt;
  return fs;
}

using LevelBlocks = std::map<int, Matrix, std::greater<int>>;

inline LevelBlocks to_level_blocks(const ForecastSet& fs) {
  fs.validate();
  LevelBlocks out;
  for (std::size_t l = 0; l < fs.layout.orders.size(); ++l)
    out[fs.layout.orders[l]] = fs.values.middleCols(fs.layout.level_start(l), fs.layout.level_width(l));
  return out;
}

/// Inverse of to_level_blocks. `m` is the maximum order the blocks must
/// describe; when omitted, the largest key is used.
inline ForecastSet from_level_blocks(const LevelBlocks& blocks, std::optional<int> m = std::nullopt) {
  if (blocks.empty()) throw ValidationError("no level blocks given");
  const int mm = m.value_or(blocks.begin()->first);
  if (blocks.count(1) == 0) throw ValidationError("level blocks must include order 1");
  const Index rows = blocks.begin()->second.rows();
  const Index width1 = blocks.at(1).cols();
  if (width1 % mm != 0)
    throw ValidationError("order-1 block width " + std::to_string(width1) + " is not a multiple of m=" +
                          std::to_string(mm));
  Layout layout;
  layout.m = mm;
  layout.horizon = width1 / mm;
  layout.orders.clear();
  for (const auto& [k, blk] : blocks) {
    if (k < 1 || mm % k != 0)
      throw ValidationError("order " + std::to_string(k) + " does not divide m=" + std::to_string(mm));
    if (blk.rows() != rows) throw ValidationError("level blocks have different row counts");
    const Index expected = mm * layout.horizon / k;
    if (blk.cols() != expected)
      throw ValidationError("block k" + std::to_string(k) + " has width " + std::to_string(blk.cols()) +
                            ", expected " + std::to_string(expected));
    layout.orders.push_back(k);
  }
  ForecastSet fs{Matrix(rows, layout.q()), layout};
  for (std::size_t l = 0; l < layout.orders.size(); ++l)
    fs.values.middleCols(layout.level_start(l), layout.level_width(l)) = blocks.at(layout.orders[l]);
  return fs;
}

/// Per-period vectors (dim × H), each vec(X_hᵀ) of the n × kt block for period h.
inline Matrix to_periods(const ForecastSet& fs, const CrossTemporalStructure& s) {
  fs.validate();
  if (fs.n() != s.n())
    throw ValidationError("forecast matrix has " + std::to_string(fs.n()) + " rows, structure has " +
                          std::to_string(s.n()) + " series");
  if (fs.layout.orders != s.te().orders() || fs.layout.m != s.m())
    throw ValidationError("forecast layout does not match the temporal structure");
  const Index H = fs.horizon();
  const auto& te = s.te();
  Matrix out(s.dim(), H);
  for (Index h = 0; h < H; ++h)
    for (Index i = 0; i < s.n(); ++i)
      for (Index l = 0; l < te.p(); ++l) {
        const Index w = te.level_count(l);
        const Index col0 = fs.layout.level_start(static_cast<std::size_t>(l)) + h * w;
        for (Index j = 0; j < w; ++j) out(s.index(i, l, j), h) = fs.values(i, col0 + j);
      }
  return out;
}

inline ForecastSet from_periods(const Matrix& periods, const CrossTemporalStructure& s) {
  if (periods.rows() != s.dim())
    throw ValidationError("period vectors have " + std::to_string(periods.rows()) + " rows, expected " +
                          std::to_string(s.dim()));
  const Index H = periods.cols();
  ForecastSet fs{Matrix(s.n(), s.kt() * H), Layout::of(s.te(), H)};
  const auto& te = s.te();
  for (Index h = 0; h < H; ++h)
    for (Index i = 0; i < s.n(); ++i)
      for (Index l = 0; l < te.p(); ++l) {
        const Index w = te.level_count(l);
        const Index col0 = fs.layout.level_start(static_cast<std::size_t>(l)) + h * w;
        for (Index j = 0; j < w; ++j) fs.values(i, col0 + j) = periods(s.index(i, l, j), h);
      }
  return fs;
}

/// Bottom high-frequency values (n_b × mH) → per-period vectors of free variables (n_b·m × H).
inline Matrix bottom_to_periods(const Matrix& bottom, const CrossTemporalStructure& s) {
  const Index nb = s.cs().n_bottom();
  const Index m = s.m();
  if (bottom.rows() != nb)
    throw ValidationError("bottom forecasts have " + std::to_string(bottom.rows()) + " rows, expected " +
                          std::to_string(nb));
  if (bottom.cols() == 0 || bottom.cols() % m != 0)
    throw ValidationError("bottom forecast width " + std::to_string(bottom.cols()) + " is not a multiple of m=" +
                          std::to_string(m));
  const Index H = bottom.cols() / m;
  Matrix out(nb * m, H);
  for (Index h = 0; h < H; ++h)
    for (Index b = 0; b < nb; ++b)
      for (Index t = 0; t < m; ++t) out(b * m + t, h) = bottom(b, h * m + t);
  return out;
}

inline Matrix periods_to_bottom(const Matrix& free, const CrossTemporalStructure& s) {
  const Index nb = s.cs().n_bottom();
  const Index m = s.m();
  const Index H = free.cols();
  Matrix out(nb, m * H);
  for (Index h = 0; h < H; ++h)
    for (Index b = 0; b < nb; ++b)
      for (Index t = 0; t < m; ++t) out(b, h * m + t) = free(b * m + t, h);
  return out;
}

enum class ResidualKind { InSample, Validation };

/// Residuals or validation errors: rows are time points, columns follow the
/// per-period flattening of the structure they belong to.
struct ResidualSet {
  Matrix values;
  ResidualKind kind = ResidualKind::InSample;
};

struct CleanResiduals {
  Matrix values;
  Index excluded_rows = 0;
};

/// Drops rows containing non-finite values; checks the column count.
inline CleanResiduals clean_residuals(const Matrix& res, Index dim) {
  if (res.cols() != dim)
    throw ValidationError("residual matrix has " + std::to_string(res.cols()) + " columns, expected " +
                          std::to_string(dim));
  IndexList keep;
  for (Index r = 0; r < res.rows(); ++r)
    if (res.row(r).allFinite()) keep.push_back(r);
  CleanResiduals out;
  out.values = linalg::select_rows(res, keep);
  out.excluded_rows = res.rows() - static_cast<Index>(keep.size());
  return out;
}

}  // namespace foreco
