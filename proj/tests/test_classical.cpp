#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "foreco/classical.hpp"

using namespace foreco;
using fixtures::mat;
using fixtures::vec;

namespace {

CrossTemporalStructure toy() {
  return CrossTemporalStructure::cross_sectional(CrossSectionalStructure::from_agg(fixtures::toy_agg()));
}

double coherence(const ForecastSet& fs, const CrossTemporalStructure& s) {
  const Matrix p = to_periods(fs, s);
  return (s.cons_mat() * p).cwiseAbs().maxCoeff() / (1.0 + p.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(BottomUp, Toy) {
  const auto out = bottom_up(mat({{1}, {2}, {3}, {4}, {5}}), toy());
  EXPECT_TRUE(out.values.col(0) == vec({15, 3, 12, 1, 2, 3, 4, 5}));
}

TEST(BottomUp, Sntz) {
  const auto s = CrossTemporalStructure::cross_sectional(CrossSectionalStructure::from_agg(mat({{1, 1}})));
  EXPECT_TRUE(bottom_up(mat({{-1}, {2}}), s, true).values.col(0) == vec({2, 0, 2}));
}

TEST(BottomUp, TemporalAverage) {
  const auto s = CrossTemporalStructure::temporal(TemporalStructure::from_max_order(2, Tew::Avg));
  EXPECT_TRUE(bottom_up(mat({{2, 4}}), s).values == mat({{3, 2, 4}}));
}

TEST(BottomUp, RoundAndShape) {
  const auto s = toy();
  const auto out = bottom_up(mat({{1.4}, {2.6}, {-0.2}, {4}, {5}}), s, false, true);
  EXPECT_TRUE(out.values.col(0) == vec({13, 4, 9, 1, 3, -0.0, 4, 5}));
  EXPECT_THROW(bottom_up(mat({{1}, {2}}), s), ValidationError);
}

TEST(BottomUp, CrossTemporalCoherent) {
  std::mt19937_64 rng(1);
  const auto s = CrossTemporalStructure::cross_temporal(CrossSectionalStructure::from_agg(fixtures::toy_agg()),
                                                        TemporalStructure::from_max_order(4));
  const auto out = bottom_up(fixtures::gaussian(5, 8, rng), s);
  EXPECT_EQ(out.values.rows(), 8);
  EXPECT_EQ(out.values.cols(), 14);
  EXPECT_LE(coherence(out, s), 1e-12);
}

TEST(TopDown, EqualWeights) {
  const auto out = top_down(mat({{10}}), toy(), {vec({0.2, 0.2, 0.2, 0.2, 0.2})});
  EXPECT_TRUE(out.values.col(0) == vec({10, 4, 6, 2, 2, 2, 2, 2}));
}

TEST(TopDown, Normalization) {
  const auto out = top_down(mat({{10}}), toy(), {vec({2, 2, 2, 2, 2}), true});
  EXPECT_TRUE(out.values.col(0) == vec({10, 4, 6, 2, 2, 2, 2, 2}));
}

TEST(TopDown, Shares) {
  const auto s = CrossTemporalStructure::cross_sectional(CrossSectionalStructure::from_agg(mat({{1, 1}})));
  const auto out = top_down(mat({{9}}), s, {vec({1.0 / 3, 2.0 / 3})});
  EXPECT_NEAR(out.values(1, 0), 3, 1e-12);
  EXPECT_NEAR(out.values(2, 0), 6, 1e-12);
  EXPECT_EQ(out.values(0, 0), 9);
}

TEST(TopDown, Errors) {
  EXPECT_THROW(top_down(mat({{10}}), toy(), {vec({1, 1})}), ValidationError);
  EXPECT_THROW(top_down(mat({{10}}), toy(), {vec({1, -1, 0, 0, 0}), true}), ValidationError);
}

TEST(TopDown, UnnormalizedBreaksTop) {
  const auto out = top_down(mat({{10}}), toy(), {vec({1, 1, 1, 1, 1}), false});
  EXPECT_EQ(out.values(0, 0), 50);
  EXPECT_LE(coherence(out, toy()), 1e-12);
}

TEST(TopDown, InvertsBottomUpWithTrueShares) {
  std::mt19937_64 rng(2);
  const Vector b = fixtures::gaussian(5, 1, rng).cwiseAbs() + Vector::Ones(5);
  const auto s = toy();
  const auto bu = bottom_up(Matrix(b), s);
  const auto td = top_down(bu.values.topRows(1), s, {b / b.sum()});
  EXPECT_LE(linalg::max_abs(td.values - bu.values), 1e-12);
}

TEST(TopDown, TemporalAndCrossTemporalTopReproduced) {
  for (Tew tew : {Tew::Sum, Tew::Avg, Tew::First, Tew::Last}) {
    const auto te = CrossTemporalStructure::temporal(TemporalStructure::from_max_order(4, tew));
    const auto out = top_down(mat({{8, 12}}), te, {vec({1, 2, 3, 4})});
    EXPECT_EQ(out.values(0, 0), 8);
    EXPECT_EQ(out.values(0, 1), 12);
    EXPECT_LE(coherence(out, te), 1e-12);
    const auto ct = CrossTemporalStructure::cross_temporal(CrossSectionalStructure::from_agg(mat({{1, 1}})),
                                                           TemporalStructure::from_max_order(2, tew));
    const auto o2 = top_down(mat({{5}}), ct, {vec({1, 1, 2, 2})});
    EXPECT_EQ(o2.values(0, 0), 5);
    EXPECT_LE(coherence(o2, ct), 1e-12);
  }
}

TEST(MiddleOut, Toy) {
  const auto out = middle_out(mat({{4}, {6}}), toy(), {vec({.5, .5, 1.0 / 3, 1.0 / 3, 1.0 / 3})}, {1, 2}, 1);
  EXPECT_LE((out.values.col(0) - vec({10, 4, 6, 2, 2, 2, 2, 2})).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(out.values(1, 0), 4);
  EXPECT_EQ(out.values(2, 0), 6);
}

TEST(MiddleOut, ZeroBase) {
  const auto out = middle_out(mat({{0}, {0}}), toy(), {vec({.5, .5, 1.0 / 3, 1.0 / 3, 1.0 / 3})}, {1, 2}, 1);
  EXPECT_EQ(linalg::max_abs(out.values), 0.0);
}

TEST(MiddleOut, TopRowIsTopDown) {
  const WeightVector w{vec({1, 2, 3, 4, 5})};
  const auto mo = middle_out(mat({{10}}), toy(), w, {0}, 1);
  const auto td = top_down(mat({{10}}), toy(), w);
  EXPECT_LE(linalg::max_abs(mo.values - td.values), 1e-12);
}

TEST(MiddleOut, PartitionChecks) {
  const WeightVector w{Vector::Ones(5)};
  try {
    middle_out(mat({{4}}), toy(), w, {1}, 1);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("cover"), std::string::npos);
  }
  try {
    middle_out(mat({{4}, {6}, {1}}), toy(), w, {0, 1, 2}, 1);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("overlapping"), std::string::npos);
  }
  EXPECT_THROW(middle_out(mat({{4}}), toy(), w, {7}, 1), ValidationError);
}

TEST(MiddleOut, Temporal) {
  const auto te = CrossTemporalStructure::temporal(TemporalStructure::from_max_order(4));
  // order-2 values (3, 7) with equal weights
  const auto out = middle_out(mat({{3, 7}}), te, {Vector::Ones(4)}, {}, 2);
  EXPECT_TRUE(out.values == mat({{10, 3, 7, 1.5, 1.5, 3.5, 3.5}}));
  EXPECT_THROW(middle_out(mat({{3, 7}}), te, {Vector::Ones(4)}, {}, 3), ValidationError);
}

TEST(MiddleOut, CrossTemporalJointLevel) {
  const auto s = CrossTemporalStructure::cross_temporal(CrossSectionalStructure::from_agg(fixtures::toy_agg()),
                                                        TemporalStructure::from_max_order(4));
  // series y2, y3 at order 2: two values per series per period
  const auto out = middle_out(mat({{4, 2}, {6, 3}}), s, {Vector::Ones(20)}, {1, 2}, 2);
  EXPECT_LE(coherence(out, s), 1e-12);
  EXPECT_EQ(out.values(1, 1), 4);
  EXPECT_EQ(out.values(2, 2), 3);
  EXPECT_EQ(out.values(0, 0), 15);
}

TEST(Classical, IntegerAndNonNegativeBottoms) {
  std::mt19937_64 rng(4);
  const auto s = toy();
  const auto out = bottom_up(fixtures::gaussian(5, 3, rng, 5.0), s, true, true);
  const Matrix b = out.values.bottomRows(5);
  EXPECT_TRUE((b.array() >= 0).all());
  EXPECT_TRUE((b.array() == b.array().round()).all());
}
