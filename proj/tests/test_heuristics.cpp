#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "foreco/heuristics.hpp"

using namespace foreco;
using fixtures::mat;

namespace {

CrossTemporalStructure ct_of(const Matrix& A, int m) {
  return CrossTemporalStructure::cross_temporal(CrossSectionalStructure::from_agg(A),
                                                TemporalStructure::from_max_order(m));
}

DimensionCovariances ols(const CrossTemporalStructure& s) {
  return {{Matrix::Identity(s.n(), s.n())}, {Matrix::Identity(s.kt(), s.kt())}};
}

DimensionCovariances random_covs(const CrossTemporalStructure& s, std::mt19937_64& rng) {
  DimensionCovariances c;
  for (Index l = 0; l < s.te().p(); ++l) c.cs.push_back(fixtures::random_spd(s.n(), rng));
  for (Index i = 0; i < s.n(); ++i) c.te.push_back(fixtures::random_spd(s.kt(), rng));
  return c;
}

double scale(const Matrix& X) { return 1 + linalg::max_abs(X); }

}  // namespace

TEST(TwoStep, OlsEqualsCrossTemporalOls) {
  std::mt19937_64 rng(2);
  const auto s = ct_of(mat({{1}}), 2);
  const Matrix X = fixtures::gaussian(s.dim(), 2, rng);
  const Matrix ref = reconcile_periods(X, s, Matrix::Identity(s.dim(), s.dim())).periods;
  for (StepOrder o : {StepOrder::Tcs, StepOrder::Cst}) {
    const Matrix out = to_periods(two_step(from_periods(X, s), s, ols(s), o), s);
    EXPECT_LE(linalg::max_abs(out - ref), 1e-12);
  }
}

TEST(TwoStep, CoherentBaseUnchanged) {
  std::mt19937_64 rng(3);
  const auto s = ct_of(fixtures::toy_agg(), 4);
  const Matrix X = s.strc_mat() * fixtures::gaussian(s.n_free(), 1, rng);
  const auto covs = random_covs(s, rng);
  for (StepOrder o : {StepOrder::Tcs, StepOrder::Cst})
    for (Averaging a : {Averaging::Ka, Averaging::Simple}) {
      const Matrix out = to_periods(two_step(from_periods(X, s), s, covs, o, a), s);
      EXPECT_LE(linalg::max_abs(out - X), 1e-10 * scale(X));
    }
}

TEST(TwoStep, AveragingModesDifferAndCohere) {
  std::mt19937_64 rng(4);
  const auto s = ct_of(fixtures::toy_agg(), 4);
  const Matrix X = fixtures::gaussian(s.dim(), 2, rng, 3.0);
  const auto covs = random_covs(s, rng);
  const Matrix ka = to_periods(two_step(from_periods(X, s), s, covs, StepOrder::Tcs, Averaging::Ka), s);
  const Matrix si = to_periods(two_step(from_periods(X, s), s, covs, StepOrder::Tcs, Averaging::Simple), s);
  EXPECT_GT(linalg::max_abs(ka - si), 1e-6);
  EXPECT_LE(coherence_inf(ka, s), 1e-8 * scale(X));
  EXPECT_LE(coherence_inf(si, s), 1e-8 * scale(X));
  const Matrix cst = to_periods(two_step(from_periods(X, s), s, covs, StepOrder::Cst), s);
  EXPECT_LE(coherence_inf(cst, s), 1e-8 * scale(X));
}

TEST(TwoStep, CovariancesFromResiduals) {
  std::mt19937_64 rng(6);
  const auto s = ct_of(fixtures::toy_agg(), 2);
  const Matrix res = fixtures::gaussian(40, s.dim(), rng);
  const auto covs = dimension_covariances(s, Estimator::Shr, Estimator::Wlsv, res);
  EXPECT_EQ(covs.cs.size(), 2u);
  EXPECT_EQ(covs.te.size(), 8u);
  EXPECT_EQ(covs.cs[0].rows(), 8);
  EXPECT_EQ(covs.te[0].rows(), 3);
  const Matrix X = fixtures::gaussian(s.dim(), 1, rng);
  EXPECT_LE(coherence_inf(to_periods(two_step(from_periods(X, s), s, covs), s), s), 1e-8 * scale(X));
  EXPECT_THROW(two_step(from_periods(X, s), s, DimensionCovariances{{covs.cs[0], covs.cs[0], covs.cs[0]}, covs.te}),
               ValidationError);
}

TEST(Iterative, CoherentBaseConvergesAtOnce) {
  std::mt19937_64 rng(7);
  const auto s = ct_of(fixtures::toy_agg(), 2);
  const Matrix X = s.strc_mat() * fixtures::gaussian(s.n_free(), 1, rng);
  const auto r = iterative(from_periods(X, s), s, random_covs(s, rng));
  EXPECT_TRUE(r.report.converged);
  EXPECT_EQ(r.report.iterations, 1);
  EXPECT_LE(r.report.initial, 1e-12);
}

TEST(Iterative, CapIsReported) {
  std::mt19937_64 rng(8);
  const auto s = ct_of(fixtures::toy_agg(), 4);
  const Matrix X = fixtures::gaussian(s.dim(), 1, rng, 10.0);
  IterativeOptions o;
  o.itmax = 1;
  o.tol = 1e-12;
  const auto r = iterative(from_periods(X, s), s, random_covs(s, rng), o);
  EXPECT_FALSE(r.report.converged);
  EXPECT_EQ(r.report.trace.size(), 1u);
  o.itmax = 0;
  EXPECT_THROW(iterative(from_periods(X, s), s, random_covs(s, rng), o), ValidationError);
}

TEST(Iterative, OlsSmallInstanceMeetsTolerance) {
  std::mt19937_64 rng(9);
  const auto s = ct_of(mat({{1, 1}}), 2);
  const Matrix X = fixtures::gaussian(s.dim(), 1, rng, 5.0);
  const auto r = iterative(from_periods(X, s), s, ols(s));
  ASSERT_TRUE(r.report.converged);
  EXPECT_LE(r.report.final_cs, 1e-5);
  EXPECT_LE(r.report.final_te, 1e-5);
}

TEST(Iterative, RandomInstancesConverge) {
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 10; ++rep) {
    const auto s = ct_of(fixtures::random_agg(2 + static_cast<Index>(rng() % 4), 1, rng), rep % 2 ? 4 : 3);
    const Matrix X = fixtures::gaussian(s.dim(), 2, rng, 4.0);
    for (StepOrder t : {StepOrder::Tcs, StepOrder::Cst})
      for (NormKind nk : {NormKind::Inf, NormKind::One, NormKind::Two}) {
        IterativeOptions o;
        o.type = t;
        o.norm = nk;
        const auto r = iterative(from_periods(X, s), s, random_covs(s, rng), o);
        EXPECT_TRUE(r.report.converged);
        EXPECT_LE(r.report.trace.back(), o.tol);
        EXPECT_LE(std::max(r.report.final_cs, r.report.final_te), o.tol);
      }
  }
}
