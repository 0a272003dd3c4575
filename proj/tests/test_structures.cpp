#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "foreco/structures.hpp"

using namespace foreco;
using fixtures::toy_agg;
using fixtures::toy_cons;
using fixtures::mat;

TEST(CrossSectional, FromAggToy) {
  const auto cs = CrossSectionalStructure::from_agg(toy_agg());
  EXPECT_EQ(cs.n(), 8);
  EXPECT_EQ(cs.n_upper(), 3);
  EXPECT_EQ(cs.n_bottom(), 5);
  EXPECT_TRUE(cs.cons_mat() == toy_cons());
  EXPECT_EQ(cs.labels().front(), "y1");
  EXPECT_EQ(cs.labels().back(), "y8");
}

TEST(CrossSectional, FromAggTrivial) {
  EXPECT_TRUE(CrossSectionalStructure::from_agg(mat({{1, 1}})).cons_mat() == mat({{1, -1, -1}}));
  const auto one = CrossSectionalStructure::from_agg(mat({{1}}));
  EXPECT_TRUE(one.cons_mat() == mat({{1, -1}}));
  EXPECT_EQ(one.n(), 2);
}

TEST(CrossSectional, FromAggErrors) {
  EXPECT_THROW(CrossSectionalStructure::from_agg(Matrix(0, 3)), ValidationError);
  EXPECT_THROW(CrossSectionalStructure::from_agg(mat({{1, NAN}})), ValidationError);
  EXPECT_THROW(CrossSectionalStructure::from_agg(mat({{1, 1}}), {"a"}), ValidationError);
}

TEST(CrossSectional, FromConsToy) {
  const auto cs = CrossSectionalStructure::from_cons(toy_cons());
  EXPECT_TRUE(cs.agg_mat() == toy_agg());
}

TEST(CrossSectional, FromConsScaledRow) {
  EXPECT_TRUE(CrossSectionalStructure::from_cons(mat({{1, -1, -1}})).agg_mat() == mat({{1, 1}}));
  EXPECT_TRUE(CrossSectionalStructure::from_cons(mat({{2, -2, -2}})).agg_mat() == mat({{1, 1}}));
}

TEST(CrossSectional, FromConsPermutedColumnsRecordsSplit) {
  // y3 = y1 + y2 written with the aggregate last
  const auto cs = CrossSectionalStructure::from_cons(mat({{-1, -1, 1}}), {"a", "b", "t"});
  EXPECT_EQ(cs.n_upper(), 1);
  EXPECT_EQ(cs.source_columns(), (IndexList{0, 1, 2}));
  // the first pivot column is "a": a = t - b
  EXPECT_EQ(cs.labels()[0], "a");
  EXPECT_TRUE(cs.agg_mat() == mat({{-1, 1}}));
}

TEST(CrossSectional, FromConsRankDeficient) {
  try {
    CrossSectionalStructure::from_cons(mat({{1, -1, -1}, {2, -2, -2}, {0, 0, 0}}).topRows(2));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("rank 1 < 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("2 x 3"), std::string::npos);
  }
}

TEST(CrossSectional, RoundTripRandom01) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const Index nb = 2 + static_cast<Index>(rng() % 8);
    const Index nu = 1 + static_cast<Index>(rng() % 4);
    const Matrix A = fixtures::random_agg(nb, nu, rng);
    const auto cs = CrossSectionalStructure::from_agg(A);
    if (linalg::rank(cs.cons_mat()) < nu) continue;
    EXPECT_TRUE(CrossSectionalStructure::from_cons(cs.cons_mat()).agg_mat() == A);
  }
}

TEST(CrossSectional, DefaultLevelsByNesting) {
  const auto cs = CrossSectionalStructure::from_agg(toy_agg());
  const auto lv = cs.default_levels();
  ASSERT_EQ(lv.size(), 2u);
  EXPECT_EQ(lv[0], (IndexList{0}));
  EXPECT_EQ(lv[1], (IndexList{1, 2}));
}

TEST(Temporal, ScalarOrders) {
  EXPECT_EQ(TemporalStructure::from_max_order(4).orders(), (std::vector<int>{4, 2, 1}));
  EXPECT_EQ(TemporalStructure::from_max_order(24).orders(), (std::vector<int>{24, 12, 8, 6, 4, 3, 2, 1}));
  EXPECT_THROW(TemporalStructure::from_max_order(1), ValidationError);
}

TEST(Temporal, ExplicitOrders) {
  const auto te = TemporalStructure::from_orders({4});
  EXPECT_EQ(te.orders(), (std::vector<int>{4, 1}));
  EXPECT_TRUE(te.agg_mat() == mat({{1, 1, 1, 1}}));
  EXPECT_EQ(TemporalStructure::from_orders({1, 4, 2, 2}).orders(), (std::vector<int>{4, 2, 1}));
  EXPECT_THROW(TemporalStructure::from_orders({4, 3}), ValidationError);
}

TEST(Temporal, ToyMatrices) {
  const auto te = TemporalStructure::from_max_order(4);
  EXPECT_TRUE(te.agg_mat() == mat({{1, 1, 1, 1}, {1, 1, 0, 0}, {0, 0, 1, 1}}));
  EXPECT_EQ(te.kt(), 7);
}

TEST(Temporal, TewRows) {
  for (int m : {2, 4, 6, 12}) {
    const Vector ones = Vector::Ones(m);
    for (Tew tew : {Tew::Sum, Tew::Avg, Tew::First, Tew::Last}) {
      const auto te = TemporalStructure::from_max_order(m, tew);
      EXPECT_EQ(te.agg_mat().rows(), te.kt() - m);
      Index r = 0;
      for (int k : te.orders()) {
        if (k == 1) continue;
        for (Index j = 0; j < m / k; ++j, ++r) {
          const double v = te.agg_mat().row(r).dot(ones);
          const Index nz = (te.agg_mat().row(r).array() != 0.0).count();
          switch (tew) {
            case Tew::Sum: EXPECT_EQ(v, k); EXPECT_EQ(nz, k); break;
            case Tew::Avg: EXPECT_NEAR(v, 1.0, 1e-15); break;
            case Tew::First:
            case Tew::Last: EXPECT_EQ(nz, 1); EXPECT_EQ(v, 1.0); break;
          }
        }
      }
    }
  }
}

TEST(CrossTemporal, ToyDimension) {
  const auto ct = CrossTemporalStructure::cross_temporal(CrossSectionalStructure::from_agg(toy_agg()),
                                                         TemporalStructure::from_max_order(4));
  EXPECT_EQ(ct.dim(), 56);
  const auto small = CrossTemporalStructure::cross_temporal(CrossSectionalStructure::from_agg(mat({{1}})),
                                                            TemporalStructure::from_max_order(2));
  EXPECT_EQ(small.dim(), 6);
}

TEST(CrossTemporal, CoherentDataSatisfiesConstraints) {
  std::mt19937_64 rng(11);
  for (int m : {2, 3, 4, 6, 12}) {
    for (Tew tew : {Tew::Sum, Tew::Avg, Tew::First, Tew::Last}) {
      const auto ct = CrossTemporalStructure::cross_temporal(CrossSectionalStructure::from_agg(toy_agg()),
                                                             TemporalStructure::from_max_order(m, tew));
      // build the period vector by direct aggregation, not through S
      const Matrix bottoms = fixtures::gaussian(5, m, rng, 10.0);
      const Matrix all = toy_agg() * bottoms;
      Matrix hf(8, m);
      hf << all, bottoms;
      Vector x(ct.dim());
      for (Index i = 0; i < 8; ++i)
        for (Index l = 0; l < ct.te().p(); ++l) {
          const int k = ct.te().orders()[static_cast<std::size_t>(l)];
          for (Index j = 0; j < m / k; ++j) {
            const Vector blk = hf.row(i).segment(j * k, k).transpose();
            double v = 0;
            switch (tew) {
              case Tew::Sum: v = blk.sum(); break;
              case Tew::Avg: v = blk.mean(); break;
              case Tew::First: v = blk(0); break;
              case Tew::Last: v = blk(k - 1); break;
            }
            x(ct.index(i, l, j)) = v;
          }
        }
      EXPECT_LE((ct.cons_mat() * x).cwiseAbs().maxCoeff(), 1e-12 * (1 + x.cwiseAbs().maxCoeff()));
      // S maps the bottoms to the same vector
      Vector b(5 * m);
      for (Index i = 0; i < 5; ++i) b.segment(i * m, m) = bottoms.row(i).transpose();
      EXPECT_LE((ct.strc_mat() * b - x).cwiseAbs().maxCoeff(), 1e-12 * (1 + x.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(CrossTemporal, FullRowRank) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    const Index nb = 2 + static_cast<Index>(rng() % 6);
    const Index nu = 1 + static_cast<Index>(rng() % 3);
    auto cs = CrossSectionalStructure::from_agg(fixtures::random_agg(nb, nu, rng));
    if (linalg::rank(cs.cons_mat()) < nu) continue;
    for (int m : {2, 4, 6, 12}) {
      const auto ct = CrossTemporalStructure::cross_temporal(cs, TemporalStructure::from_max_order(m));
      const Matrix& C = ct.cons_mat();
      EXPECT_EQ(C.fullPivLu().rank(), C.rows());
      EXPECT_EQ(C.rows(), ct.dim() - ct.n_free());
    }
  }
}

TEST(CrossTemporal, DegenerateFrameworks) {
  const auto cs = CrossTemporalStructure::cross_sectional(CrossSectionalStructure::from_agg(toy_agg()));
  EXPECT_EQ(cs.dim(), 8);
  EXPECT_TRUE(cs.cons_mat() == toy_cons());
  const auto te = CrossTemporalStructure::temporal(TemporalStructure::from_max_order(4));
  EXPECT_EQ(te.dim(), 7);
  EXPECT_TRUE(te.cons_mat() == te.te().cons_mat());
  EXPECT_EQ(te.position_label(1), "y1[k2,1]");
}
