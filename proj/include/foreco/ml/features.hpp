#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "foreco/error.hpp"
#include "foreco/structures.hpp"

namespace foreco::ml {

enum class FeatureMode { All, Bts, Str, StrBts, LowHigh, Compact };

inline FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "all") return FeatureMode::All;
  if (s == "bts") return FeatureMode::Bts;
  if (s == "str") return FeatureMode::Str;
  if (s == "str-bts") return FeatureMode::StrBts;
  if (s == "low-high") return FeatureMode::LowHigh;
  if (s == "compact") return FeatureMode::Compact;
  throw ValidationError("unknown feature mode: " + std::string(s) +
                        " (expected all, bts, str, str-bts, low-high or compact)");
}

inline std::string to_string(FeatureMode f) {
  switch (f) {
    case FeatureMode::All: return "all";
    case FeatureMode::Bts: return "bts";
    case FeatureMode::Str: return "str";
    case FeatureMode::StrBts: return "str-bts";
    case FeatureMode::LowHigh: return "low-high";
    case FeatureMode::Compact: return "compact";
  }
  return "?";
}

inline bool mode_allowed(FeatureMode f, Framework fw) {
  if (f == FeatureMode::All) return true;
  switch (fw) {
    case Framework::CrossSectional:
      return f == FeatureMode::Bts || f == FeatureMode::Str || f == FeatureMode::StrBts;
    case Framework::Temporal: return f == FeatureMode::LowHigh;
    case Framework::CrossTemporal: return f == FeatureMode::Compact;
  }
  return false;
}

/// Per-period positions used as features for the free variable `target`
/// (an index into bottom_index()), in ascending order.
///
/// cs: str takes every series whose aggregation row covers the bottom, plus
/// the bottom itself; bts all bottoms; str-bts the union. te: low-high takes
/// the lowest- and highest-frequency columns. ct: compact takes every series
/// at the highest frequency plus all temporal aggregates of the target's own
/// bottom series.
inline IndexList select_features(const CrossTemporalStructure& s, FeatureMode mode, Index target) {
  if (!mode_allowed(mode, s.framework()))
    throw ValidationError("feature mode " + to_string(mode) + " is not available for the " +
                          to_string(s.framework()) + " framework");
  if (target < 0 || target >= s.n_free())
    throw ValidationError("target " + std::to_string(target) + " is outside the " + std::to_string(s.n_free()) +
                          " free variables");
  const auto& cs = s.cs();
  const auto& te = s.te();
  const Index m = te.m();
  const Index b = target / m;  // bottom series (0-based among bottoms)
  const Index series = cs.n_upper() + b;
  IndexList out;
  switch (mode) {
    case FeatureMode::All:
      for (Index p = 0; p < s.dim(); ++p) out.push_back(p);
      break;
    case FeatureMode::Bts:
    case FeatureMode::Str:
    case FeatureMode::StrBts: {
      const Matrix& A = cs.agg_mat();
      for (Index u = 0; u < cs.n_upper(); ++u)
        if (mode != FeatureMode::Bts && A(u, b) != 0.0) out.push_back(u);
      for (Index j = 0; j < cs.n_bottom(); ++j)
        if (mode != FeatureMode::Str || j == b) out.push_back(cs.n_upper() + j);
      break;
    }
    case FeatureMode::LowHigh: {
      const Index lo = 0, hi = te.p() - 1;
      for (Index j = 0; j < te.level_count(lo); ++j) out.push_back(s.index(0, lo, j));
      if (hi != lo)
        for (Index j = 0; j < te.level_count(hi); ++j) out.push_back(s.index(0, hi, j));
      break;
    }
    case FeatureMode::Compact: {
      const Index hi = te.p() - 1;
      for (Index i = 0; i < s.n(); ++i)
        for (Index l = 0; l < te.p(); ++l)
          for (Index j = 0; j < te.level_count(l); ++j)
            if (l == hi || i == series) out.push_back(s.index(i, l, j));
      break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace foreco::ml
