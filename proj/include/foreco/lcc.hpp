#pragma once

#include <optional>
#include <string>
#include <vector>

#include "foreco/classical.hpp"
#include "foreco/error.hpp"
#include "foreco/linalg.hpp"
#include "foreco/ls_reconciliation.hpp"
#include "foreco/series_tools.hpp"
#include "foreco/structures.hpp"

namespace foreco {

enum class LccMode { Exogenous, Endogenous };

inline LccMode parse_lcc_mode(std::string_view s) {
  if (s == "exogenous" || s == "exo") return LccMode::Exogenous;
  if (s == "endogenous" || s == "endo") return LccMode::Endogenous;
  throw ValidationError("unknown lcc mode: " + std::string(s) + " (expected exogenous or endogenous)");
}

inline std::string to_string(LccMode m) { return m == LccMode::Exogenous ? "exogenous" : "endogenous"; }

struct LccOptions {
  bool ccc = false;
  LccMode mode = LccMode::Exogenous;
  /// Replacement bottom high-frequency base forecasts (n_b × m·H).
  std::optional<Matrix> alt_bottom;
  /// Cross-sectional levels as groups of 0-based upper rows; defaults to nesting depth.
  std::optional<std::vector<IndexList>> cs_levels;
};

/// One level of the unified structure: a set of upper per-period positions.
struct LccLevel {
  std::string label;
  IndexList positions;
};

/// Levels of the structure: every (cross-sectional group, temporal order)
/// pair, where the bottom series form one extra group, except (bottom, 1).
inline std::vector<LccLevel> lcc_levels(const CrossTemporalStructure& s,
                                        const std::optional<std::vector<IndexList>>& cs_levels = std::nullopt) {
  const auto& cs = s.cs();
  const auto& te = s.te();
  std::vector<IndexList> groups = cs_levels ? *cs_levels : cs.default_levels();
  std::vector<int> seen(static_cast<std::size_t>(cs.n_upper()), 0);
  for (const auto& g : groups)
    for (Index u : g) {
      if (u < 0 || u >= cs.n_upper())
        throw ValidationError("level entry " + std::to_string(u + 1) + " is not an upper row");
      if (seen[static_cast<std::size_t>(u)]++) throw ValidationError("upper row " + std::to_string(u + 1) +
                                                                     " appears in more than one level");
    }
  IndexList bottoms;
  for (Index b = 0; b < cs.n_bottom(); ++b) bottoms.push_back(cs.n_upper() + b);
  groups.push_back(bottoms);

  std::vector<LccLevel> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const bool bottom_group = g + 1 == groups.size();
    for (Index l = 0; l < te.p(); ++l) {
      const int k = te.orders()[static_cast<std::size_t>(l)];
      if (bottom_group && k == 1) continue;
      LccLevel lv;
      lv.label = (bottom_group ? std::string("bts") : "L" + std::to_string(g + 1));
      if (s.framework() != Framework::CrossSectional) lv.label += "-k" + std::to_string(k);
      for (Index i : groups[g])
        for (Index j = 0; j < te.level_count(l); ++j) lv.positions.push_back(s.index(i, l, j));
      if (!lv.positions.empty()) out.push_back(std::move(lv));
    }
  }
  return out;
}

struct LccResult {
  ForecastSet forecasts;
  std::vector<Matrix> components;  // per-period vectors of each level-conditional forecast
  std::vector<std::string> labels;
};

/// Level-conditional coherent reconciliation (combined with bottom-up when `ccc`).
///
/// For each level the sub-system made of that level and the bottom
/// variables is reconciled with the matching block of Ω, either keeping the
/// level fixed (exogenous) or revising both jointly (endogenous); the
/// revised bottoms are then aggregated over the full structure. The output is
/// the mean of the level components.
inline LccResult reconcile_lcc(const ForecastSet& base, const CrossTemporalStructure& s, const Matrix& omega,
                               const LccOptions& opts = {}) {
  Matrix X = to_periods(base, s);
  const Index H = X.cols();
  const Index d = s.dim();
  if (omega.rows() != d || omega.cols() != d)
    throw ValidationError("covariance does not match the structure dimension " + std::to_string(d));
  if (!X.allFinite()) throw ValidationError("base forecasts contain non-finite values");
  const IndexList& B = s.bottom_index();
  if (opts.alt_bottom) {
    const Matrix alt = bottom_to_periods(*opts.alt_bottom, s);
    if (alt.cols() != H)
      throw ValidationError("alternative bottom forecasts cover " + std::to_string(alt.cols()) +
                            " periods, expected " + std::to_string(H));
    if (!alt.allFinite()) throw ValidationError("alternative bottom forecasts contain non-finite values");
    for (std::size_t k = 0; k < B.size(); ++k) X.row(B[k]) = alt.row(static_cast<Index>(k));
  }
  const Matrix& S = s.strc_mat();
  const Index nf = static_cast<Index>(B.size());

  LccResult out;
  for (const LccLevel& lv : lcc_levels(s, opts.cs_levels)) {
    const Index nl = static_cast<Index>(lv.positions.size());
    IndexList sub = lv.positions;
    sub.insert(sub.end(), B.begin(), B.end());
    Matrix C(nl, nl + nf);
    C.leftCols(nl).setIdentity();
    C.rightCols(nf) = -linalg::select_rows(S, lv.positions);
    const Matrix O = linalg::select(omega, sub, sub);
    const Matrix Xs = linalg::select_rows(X, sub);

    IndexList fixed;
    if (opts.mode == LccMode::Exogenous)
      for (Index i = 0; i < nl; ++i) fixed.push_back(i);
    const detail::Elimination el = detail::eliminate(C, O, fixed, Xs);
    const Matrix rest = detail::solve_reduced(el, linalg::select_rows(Xs, el.rest));
    Matrix bottoms(nf, H);
    for (std::size_t r = 0; r < el.rest.size(); ++r) {
      const Index v = el.rest[r];
      if (v >= nl) bottoms.row(v - nl) = rest.row(static_cast<Index>(r));
    }
    Matrix comp = S * bottoms;
    if (opts.mode == LccMode::Exogenous)
      for (Index i = 0; i < nl; ++i) comp.row(lv.positions[static_cast<std::size_t>(i)]) = X.row(lv.positions[static_cast<std::size_t>(i)]);
    out.components.push_back(std::move(comp));
    out.labels.push_back(lv.label);
  }
  if (opts.ccc) {
    out.components.push_back(S * linalg::select_rows(X, B));
    out.labels.push_back("bu");
  }
  if (out.components.empty()) throw ValidationError("the structure has no levels to condition on");
  Matrix mean = Matrix::Zero(d, H);
  for (const Matrix& c : out.components) mean += c;
  mean /= static_cast<double>(out.components.size());
  out.forecasts = from_periods(mean, s);
  return out;
}

inline LccResult reconcile_lcc(const ForecastSet& base, const CrossTemporalStructure& s, const CovarianceMatrix& cov,
                               const LccOptions& opts = {}) {
  return reconcile_lcc(base, s, cov.omega, opts);
}

}  // namespace foreco
