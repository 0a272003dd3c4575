#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "foreco/error.hpp"
#include "foreco/linalg.hpp"

namespace foreco {

enum class Framework { CrossSectional, Temporal, CrossTemporal };

inline std::string to_string(Framework f) {
  switch (f) {
    case Framework::CrossSectional: return "cs";
    case Framework::Temporal: return "te";
    case Framework::CrossTemporal: return "ct";
  }
  return "?";
}

inline std::string framework_title(Framework f) {
  switch (f) {
    case Framework::CrossSectional: return "Cross-sectional";
    case Framework::Temporal: return "Temporal";
    case Framework::CrossTemporal: return "Cross-temporal";
  }
  return "?";
}

inline Framework parse_framework(std::string_view s) {
  if (s == "cs") return Framework::CrossSectional;
  if (s == "te") return Framework::Temporal;
  if (s == "ct") return Framework::CrossTemporal;
  throw ValidationError("unknown framework: " + std::string(s) + " (expected cs, te or ct)");
}

/// Temporal aggregation kind.
enum class Tew { Sum, Avg, First, Last };

inline std::string to_string(Tew t) {
  switch (t) {
    case Tew::Sum: return "sum";
    case Tew::Avg: return "avg";
    case Tew::First: return "first";
    case Tew::Last: return "last";
  }
  return "?";
}

inline Tew parse_tew(std::string_view s) {
  if (s == "sum") return Tew::Sum;
  if (s == "avg") return Tew::Avg;
  if (s == "first") return Tew::First;
  if (s == "last") return Tew::Last;
  throw ValidationError("unknown tew: " + std::string(s) + " (expected sum, avg, first or last)");
}

// ---------------------------------------------------------------------------
// Cross-sectional structure
// ---------------------------------------------------------------------------

/// Linear constraints among n series: u = A b, equivalently [I | -A] y = 0.
///
/// Series are ordered upper first, then bottom. When built from a constraint
/// matrix whose pivot columns are not leading, `source_columns()` maps each
/// structure position back to the input column.
class CrossSectionalStructure {
 public:
  CrossSectionalStructure() : CrossSectionalStructure(Matrix(0, 1), {}, {}) {}

  static CrossSectionalStructure from_agg(const Matrix& agg_mat, std::vector<std::string> labels = {}) {
    if (agg_mat.rows() == 0 || agg_mat.cols() == 0) throw ValidationError("aggregation matrix is empty");
    if (!agg_mat.allFinite()) throw ValidationError("aggregation matrix has non-finite entries");
    return CrossSectionalStructure(agg_mat, std::move(labels), {});
  }

  /// Recovers the aggregation form of a full-row-rank constraint matrix.
  static CrossSectionalStructure from_cons(const Matrix& cons_mat, std::vector<std::string> labels = {}) {
    if (cons_mat.rows() == 0 || cons_mat.cols() == 0) throw ValidationError("constraint matrix is empty");
    if (!cons_mat.allFinite()) throw ValidationError("constraint matrix has non-finite entries");
    if (cons_mat.rows() >= cons_mat.cols())
      throw ValidationError("constraint matrix must have fewer rows than columns");
    const linalg::Rref r = linalg::rref(cons_mat, 1e-10);
    if (r.rank < cons_mat.rows()) {
      std::ostringstream os;
      os << "constraint matrix is rank deficient: rank " << r.rank << " < " << cons_mat.rows()
         << " rows (" << cons_mat.rows() << " x " << cons_mat.cols() << ")";
      throw ValidationError(os.str());
    }
    Matrix agg(r.rank, static_cast<Index>(r.free.size()));
    for (Index i = 0; i < r.rank; ++i)
      for (std::size_t j = 0; j < r.free.size(); ++j) {
        const double v = r.reduced(i, r.free[j]);
        agg(i, static_cast<Index>(j)) = v == 0.0 ? 0.0 : -v;
      }
    IndexList order = r.pivots;
    order.insert(order.end(), r.free.begin(), r.free.end());
    std::vector<std::string> ordered;
    if (!labels.empty()) {
      if (labels.size() != static_cast<std::size_t>(cons_mat.cols()))
        throw ValidationError("label count does not match constraint matrix columns");
      for (Index c : order) ordered.push_back(labels[static_cast<std::size_t>(c)]);
    }
    return CrossSectionalStructure(agg, std::move(ordered), std::move(order));
  }

  /// One series with no constraints; the cross-sectional part of a purely temporal setup.
  static CrossSectionalStructure single() { return CrossSectionalStructure(Matrix(0, 1), {}, {}); }

  const Matrix& agg_mat() const noexcept { return agg_; }
  const Matrix& cons_mat() const noexcept { return cons_; }
  Index n() const noexcept { return agg_.rows() + agg_.cols(); }
  Index n_upper() const noexcept { return agg_.rows(); }
  Index n_bottom() const noexcept { return agg_.cols(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const IndexList& source_columns() const noexcept { return source_; }

  /// [A; I], mapping bottom series to all series.
  Matrix strc_mat() const {
    Matrix s(n(), n_bottom());
    s.topRows(n_upper()) = agg_;
    s.bottomRows(n_bottom()).setIdentity();
    return s;
  }

  /// Bottom series (0-based, within bottoms) that contribute to upper row `u`.
  IndexList support(Index u) const {
    IndexList out;
    for (Index b = 0; b < n_bottom(); ++b)
      if (agg_(u, b) != 0.0) out.push_back(b);
    return out;
  }

  /// Groups upper rows into levels by nesting depth: the number of other
  /// upper rows whose bottom support strictly contains the row's support.
  std::vector<IndexList> default_levels() const {
    std::vector<Index> depth(static_cast<std::size_t>(n_upper()), 0);
    std::vector<IndexList> sup;
    for (Index u = 0; u < n_upper(); ++u) sup.push_back(support(u));
    for (Index u = 0; u < n_upper(); ++u)
      for (Index v = 0; v < n_upper(); ++v) {
        if (u == v) continue;
        const auto& su = sup[static_cast<std::size_t>(u)];
        const auto& sv = sup[static_cast<std::size_t>(v)];
        if (sv.size() > su.size() && std::includes(sv.begin(), sv.end(), su.begin(), su.end()))
          ++depth[static_cast<std::size_t>(u)];
      }
    const Index max_depth = depth.empty() ? -1 : *std::max_element(depth.begin(), depth.end());
    std::vector<IndexList> levels;
    for (Index d = 0; d <= max_depth; ++d) {
      IndexList lv;
      for (Index u = 0; u < n_upper(); ++u)
        if (depth[static_cast<std::size_t>(u)] == d) lv.push_back(u);
      if (!lv.empty()) levels.push_back(std::move(lv));
    }
    return levels;
  }

 private:
  CrossSectionalStructure(Matrix agg, std::vector<std::string> labels, IndexList source)
      : agg_(std::move(agg)), labels_(std::move(labels)), source_(std::move(source)) {
    cons_.resize(agg_.rows(), n());
    cons_.leftCols(agg_.rows()).setIdentity();
    cons_.rightCols(agg_.cols()) = -agg_;
    // -0.0 from negating zeros would still compare equal; keep the matrix clean anyway
    for (Index i = 0; i < cons_.rows(); ++i)
      for (Index j = 0; j < cons_.cols(); ++j)
        if (cons_(i, j) == 0.0) cons_(i, j) = 0.0;
    if (labels_.empty()) {
      for (Index i = 0; i < n(); ++i) labels_.push_back("y" + std::to_string(i + 1));
    } else if (labels_.size() != static_cast<std::size_t>(n())) {
      throw ValidationError("label count " + std::to_string(labels_.size()) + " does not match series count " +
                            std::to_string(n()));
    }
    if (source_.empty()) {
      source_.resize(static_cast<std::size_t>(n()));
      std::iota(source_.begin(), source_.end(), Index{0});
    }
  }

  Matrix agg_;
  Matrix cons_;
  std::vector<std::string> labels_;
  IndexList source_;
};

// ---------------------------------------------------------------------------
// Temporal structure
// ---------------------------------------------------------------------------

/// Non-overlapping temporal hierarchy over one top period of m high-frequency steps.
class TemporalStructure {
 public:
  TemporalStructure() : TemporalStructure(1, {1}, Tew::Sum) {}

  /// Every divisor of m, descending.
  static TemporalStructure from_max_order(int m, Tew tew = Tew::Sum) {
    if (m < 2) throw ValidationError("maximum aggregation order must be >= 2, got " + std::to_string(m));
    std::vector<int> orders;
    for (int k = m; k >= 1; --k)
      if (m % k == 0) orders.push_back(k);
    return TemporalStructure(m, std::move(orders), tew);
  }

  /// Explicit order set; 1 and the maximum are always included.
  static TemporalStructure from_orders(std::vector<int> orders, Tew tew = Tew::Sum) {
    if (orders.empty()) throw ValidationError("aggregation order list is empty");
    for (int k : orders)
      if (k < 1) throw ValidationError("aggregation orders must be positive, got " + std::to_string(k));
    const int m = *std::max_element(orders.begin(), orders.end());
    if (m < 2) throw ValidationError("maximum aggregation order must be >= 2");
    for (int k : orders)
      if (m % k != 0)
        throw ValidationError("aggregation order " + std::to_string(k) + " does not divide " + std::to_string(m));
    orders.push_back(1);
    std::sort(orders.begin(), orders.end(), std::greater<>());
    orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
    return TemporalStructure(m, std::move(orders), tew);
  }

  static TemporalStructure single() { return TemporalStructure(); }

  int m() const noexcept { return m_; }
  const std::vector<int>& orders() const noexcept { return orders_; }
  Index p() const noexcept { return static_cast<Index>(orders_.size()); }
  Tew tew() const noexcept { return tew_; }
  /// Σ_k m/k: values per series per top period.
  Index kt() const noexcept { return kt_; }
  const Matrix& agg_mat() const noexcept { return agg_; }
  const Matrix& cons_mat() const noexcept { return cons_; }

  Index level_count(Index level) const { return m_ / orders_[static_cast<std::size_t>(level)]; }
  /// Offset of `level` (0 = most aggregated) within the kt values of one period.
  Index level_offset(Index level) const { return offsets_[static_cast<std::size_t>(level)]; }

  std::optional<Index> level_of(int k) const {
    for (std::size_t l = 0; l < orders_.size(); ++l)
      if (orders_[l] == k) return static_cast<Index>(l);
    return std::nullopt;
  }

  /// Row mapping m high-frequency values to block j of order k.
  Vector agg_row(int k, Index j) const {
    Vector row = Vector::Zero(m_);
    const Index start = j * k;
    switch (tew_) {
      case Tew::Sum: row.segment(start, k).setConstant(1.0); break;
      case Tew::Avg: row.segment(start, k).setConstant(1.0 / k); break;
      case Tew::First: row(start) = 1.0; break;
      case Tew::Last: row(start + k - 1) = 1.0; break;
    }
    return row;
  }

  /// [A_te; I_m]
  Matrix strc_mat() const {
    Matrix s(kt_, m_);
    s.topRows(agg_.rows()) = agg_;
    s.bottomRows(m_).setIdentity();
    return s;
  }

 private:
  TemporalStructure(int m, std::vector<int> orders, Tew tew) : m_(m), orders_(std::move(orders)), tew_(tew) {
    kt_ = 0;
    for (int k : orders_) {
      offsets_.push_back(kt_);
      kt_ += m_ / k;
    }
    agg_.resize(kt_ - m_, m_);
    Index r = 0;
    for (int k : orders_) {
      if (k == 1) continue;
      for (Index j = 0; j < m_ / k; ++j) agg_.row(r++) = agg_row(k, j).transpose();
    }
    cons_.resize(agg_.rows(), kt_);
    cons_.leftCols(agg_.rows()).setIdentity();
    cons_.rightCols(m_) = -agg_;
    for (Index i = 0; i < cons_.rows(); ++i)
      for (Index j = 0; j < cons_.cols(); ++j)
        if (cons_(i, j) == 0.0) cons_(i, j) = 0.0;
  }

  int m_;
  std::vector<int> orders_;
  Tew tew_;
  Index kt_ = 0;
  std::vector<Index> offsets_;
  Matrix agg_;
  Matrix cons_;
};

// ---------------------------------------------------------------------------
// Cross-temporal structure (also the common view of cs and te setups)
// ---------------------------------------------------------------------------

/// Joint description of one top period for all series at all temporal levels.
///
/// The per-period vector is vec(Xᵀ) of the n × kt block: series-major, and
/// within a series the levels run from the most aggregated to order 1. A
/// purely cross-sectional setup is the special case m = 1, a purely temporal
/// one the case n = 1.
class CrossTemporalStructure {
 public:
  CrossTemporalStructure() : CrossTemporalStructure(CrossSectionalStructure::single(), TemporalStructure::single(),
                                                    Framework::CrossSectional) {}

  static CrossTemporalStructure cross_sectional(CrossSectionalStructure cs) {
    return CrossTemporalStructure(std::move(cs), TemporalStructure::single(), Framework::CrossSectional);
  }
  static CrossTemporalStructure temporal(TemporalStructure te) {
    return CrossTemporalStructure(CrossSectionalStructure::single(), std::move(te), Framework::Temporal);
  }
  static CrossTemporalStructure cross_temporal(CrossSectionalStructure cs, TemporalStructure te) {
    return CrossTemporalStructure(std::move(cs), std::move(te), Framework::CrossTemporal);
  }

  Framework framework() const noexcept { return fw_; }
  const CrossSectionalStructure& cs() const noexcept { return cs_; }
  const TemporalStructure& te() const noexcept { return te_; }

  Index n() const noexcept { return cs_.n(); }
  Index kt() const noexcept { return te_.kt(); }
  int m() const noexcept { return te_.m(); }
  /// Variables per top period.
  Index dim() const noexcept { return n() * kt(); }
  /// Free (bottom, high-frequency) variables per top period.
  Index n_free() const noexcept { return cs_.n_bottom() * te_.m(); }

  Index index(Index series, Index level, Index j) const {
    return series * kt() + te_.level_offset(level) + j;
  }

  /// Full-row-rank constraint matrix: cross-sectional constraints on the
  /// high-frequency columns, temporal constraints on every series.
  const Matrix& cons_mat() const noexcept { return cons_; }
  /// S = S_cs ⊗ S_te, mapping the n_b·m bottom high-frequency values to the full period vector.
  const Matrix& strc_mat() const noexcept { return strc_; }
  /// Per-period positions of the bottom high-frequency variables, in S column order.
  const IndexList& bottom_index() const noexcept { return bottom_; }
  /// Remaining positions, ascending.
  const IndexList& upper_index() const noexcept { return upper_; }

  /// Rows of S for the upper positions.
  Matrix agg_mat() const { return linalg::select_rows(strc_, upper_); }

  /// Human-readable name of each per-period position, e.g. "y2[k4,1]".
  std::string position_label(Index pos) const {
    const Index i = pos / kt();
    Index r = pos % kt();
    Index level = 0;
    while (level + 1 < te_.p() && te_.level_offset(level + 1) <= r) ++level;
    const Index j = r - te_.level_offset(level);
    std::string s = cs_.labels()[static_cast<std::size_t>(i)];
    if (fw_ != Framework::CrossSectional)
      s += "[k" + std::to_string(te_.orders()[static_cast<std::size_t>(level)]) + "," + std::to_string(j + 1) + "]";
    return s;
  }

 private:
  CrossTemporalStructure(CrossSectionalStructure cs, TemporalStructure te, Framework fw)
      : cs_(std::move(cs)), te_(std::move(te)), fw_(fw) {
    const Index n = cs_.n(), nu = cs_.n_upper(), nb = cs_.n_bottom();
    const Index k = te_.kt(), m = te_.m();
    strc_ = linalg::kron(cs_.strc_mat(), te_.strc_mat());

    Matrix hf = Matrix::Zero(m, k);
    hf.rightCols(m).setIdentity();
    const Matrix cs_part = linalg::kron(cs_.cons_mat(), hf);
    const Matrix te_part = linalg::kron(Matrix::Identity(n, n), te_.cons_mat());
    cons_.resize(cs_part.rows() + te_part.rows(), n * k);
    cons_ << cs_part, te_part;

    for (Index b = 0; b < nb; ++b)
      for (Index t = 0; t < m; ++t) bottom_.push_back((nu + b) * k + (k - m) + t);
    IndexList sorted = bottom_;
    std::sort(sorted.begin(), sorted.end());
    upper_ = linalg::complement(n * k, sorted);
  }

  CrossSectionalStructure cs_;
  TemporalStructure te_;
  Framework fw_;
  Matrix strc_;
  Matrix cons_;
  IndexList bottom_;
  IndexList upper_;
};

}  // namespace foreco
