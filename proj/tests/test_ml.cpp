#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "foreco/ls_reconciliation.hpp"
#include "foreco/ml/reconciler.hpp"

using namespace foreco;
using namespace foreco::ml;
using fixtures::mat;

namespace {

CrossTemporalStructure toy() {
  return CrossTemporalStructure::cross_sectional(CrossSectionalStructure::from_agg(fixtures::toy_agg()));
}

std::vector<std::string> labels_of(const CrossTemporalStructure& s, const IndexList& pos) {
  std::vector<std::string> out;
  for (Index p : pos) out.push_back(s.position_label(p));
  return out;
}

/// Noisy base forecasts around coherent truth; obs holds the true free variables.
TrainingTable synthetic(const CrossTemporalStructure& s, Index V, std::mt19937_64& rng) {
  const Matrix truth = fixtures::gaussian(s.n_free(), V, rng, 3.0).array() + 10.0;
  const Matrix hat = s.strc_mat() * truth + fixtures::gaussian(s.dim(), V, rng, 0.5);
  return {hat.transpose(), truth.transpose()};
}

}  // namespace

TEST(Features, StructuralModesOnToy) {
  const auto s = toy();
  // target 0 is y4
  EXPECT_EQ(labels_of(s, select_features(s, FeatureMode::Str, 0)), (std::vector<std::string>{"y1", "y2", "y4"}));
  EXPECT_EQ(labels_of(s, select_features(s, FeatureMode::StrBts, 0)),
            (std::vector<std::string>{"y1", "y2", "y4", "y5", "y6", "y7", "y8"}));
  EXPECT_EQ(select_features(s, FeatureMode::Bts, 0), (IndexList{3, 4, 5, 6, 7}));
  EXPECT_EQ(select_features(s, FeatureMode::All, 0).size(), 8u);
  EXPECT_EQ(labels_of(s, select_features(s, FeatureMode::Str, 2)), (std::vector<std::string>{"y1", "y3", "y6"}));
  EXPECT_THROW(select_features(s, FeatureMode::LowHigh, 0), ValidationError);
  EXPECT_THROW(select_features(s, FeatureMode::Str, 5), ValidationError);
}

TEST(Features, ModesAreNested) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = CrossTemporalStructure::cross_sectional(
        CrossSectionalStructure::from_agg(fixtures::random_agg(2 + static_cast<Index>(rng() % 6), 2, rng)));
    for (Index f = 0; f < s.n_free(); ++f) {
      const auto bts = select_features(s, FeatureMode::Bts, f);
      const auto sb = select_features(s, FeatureMode::StrBts, f);
      const auto all = select_features(s, FeatureMode::All, f);
      EXPECT_TRUE(std::includes(sb.begin(), sb.end(), bts.begin(), bts.end()));
      EXPECT_TRUE(std::includes(all.begin(), all.end(), sb.begin(), sb.end()));
    }
  }
}

TEST(Features, TemporalAndCrossTemporal) {
  const auto te = CrossTemporalStructure::temporal(TemporalStructure::from_max_order(4));
  EXPECT_EQ(labels_of(te, select_features(te, FeatureMode::LowHigh, 2)),
            (std::vector<std::string>{"y1[k4,1]", "y1[k1,1]", "y1[k1,2]", "y1[k1,3]", "y1[k1,4]"}));
  EXPECT_THROW(select_features(te, FeatureMode::Compact, 0), ValidationError);
  const auto ct = CrossTemporalStructure::cross_temporal(CrossSectionalStructure::from_agg(mat({{1, 1}})),
                                                         TemporalStructure::from_max_order(2));
  // target 2 is y3 at step 1: every series at k1 plus all of y3
  EXPECT_EQ(labels_of(ct, select_features(ct, FeatureMode::Compact, 2)),
            (std::vector<std::string>{"y1[k1,1]", "y1[k1,2]", "y2[k1,1]", "y2[k1,2]", "y3[k2,1]", "y3[k1,1]",
                                      "y3[k1,2]"}));
}

TEST(Fit, NearestNeighbourMemorizes) {
  std::mt19937_64 rng(2);
  const auto s = toy();
  const TrainingTable t = synthetic(s, 15, rng);
  FitOptions o;
  o.learner = "knn";
  const auto f = fit(t, s, o);
  const ForecastSet base = ForecastSet::cross_sectional(t.hat.transpose());
  const ForecastSet out = reconcile_ml(base, f, s);
  const Matrix expect = s.strc_mat() * t.obs.transpose();
  EXPECT_EQ(out.values, expect);
}

TEST(Fit, ConstantTargetGivesConstantModel) {
  std::mt19937_64 rng(3);
  const auto s = toy();
  TrainingTable t = synthetic(s, 20, rng);
  for (Index f = 0; f < 5; ++f) t.obs.col(f).setConstant(static_cast<double>(f + 1));
  const Matrix newbase = fixtures::gaussian(8, 4, rng, 5.0);
  for (const char* learner : {"ridge", "trees", "knn"}) {
    FitOptions o;
    o.learner = learner;
    const auto out = reconcile_ml(ForecastSet::cross_sectional(newbase), fit(t, s, o), s);
    for (Index h = 0; h < 4; ++h)
      for (Index b = 0; b < 5; ++b) EXPECT_NEAR(out.values(3 + b, h), b + 1.0, 1e-12) << learner;
    EXPECT_NEAR(out.values(0, 0), 15.0, 1e-12);
  }
}

TEST(Fit, RidgeRecoversSlope) {
  std::mt19937_64 rng(4);
  const auto s = toy();
  TrainingTable t{fixtures::gaussian(30, 8, rng, 2.0), Matrix(30, 5)};
  for (Index b = 0; b < 5; ++b) t.obs.col(b) = 2.0 * t.hat.col(3 + b);
  FitOptions o;
  o.learner = "ridge";
  o.features = FeatureMode::Str;
  o.params = {{"lambda", 1e-12}};
  const auto f = fit(t, s, o);
  const auto& m = dynamic_cast<const RidgeModel&>(*f.models[0].model);
  ASSERT_EQ(m.coef().size(), 3);
  EXPECT_NEAR(m.coef()(2), 2.0, 1e-6);
  EXPECT_NEAR(m.coef()(0), 0.0, 1e-6);
  EXPECT_NEAR(m.intercept(), 0.0, 1e-6);
}

TEST(Fit, RidgeMatchesNormalEquations) {
  std::mt19937_64 rng(5);
  const Matrix X = fixtures::gaussian(25, 3, rng);
  const Vector y = fixtures::gaussian(25, 1, rng).col(0);
  const auto m = Ridge({{"lambda", 0.1}}).fit(X, y, 0);
  // augmented design, penalty only on the slopes
  const Matrix Xc = X.rowwise() - X.colwise().mean();
  const double pen = 0.1 * (Xc.transpose() * Xc).trace() / 3;
  Matrix Z(25, 4);
  Z << Vector::Ones(25), X;
  Matrix G = Z.transpose() * Z;
  G.diagonal().tail(3).array() += pen;
  const Vector beta = G.fullPivLu().solve(Z.transpose() * y);
  const auto& r = dynamic_cast<const RidgeModel&>(*m);
  EXPECT_NEAR(r.intercept(), beta(0), 1e-10);
  EXPECT_LE((r.coef() - beta.tail(3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Fit, OutputsCoherentForEveryLearner) {
  std::mt19937_64 rng(6);
  const auto ct = CrossTemporalStructure::cross_temporal(CrossSectionalStructure::from_agg(fixtures::toy_agg()),
                                                         TemporalStructure::from_max_order(2));
  const TrainingTable t = synthetic(ct, 24, rng);
  const ForecastSet base = from_periods(fixtures::gaussian(ct.dim(), 3, rng, 4.0), ct);
  for (const char* learner : {"ridge", "trees", "knn"})
    for (FeatureMode mode : {FeatureMode::All, FeatureMode::Compact}) {
      FitOptions o;
      o.learner = learner;
      o.features = mode;
      const auto out = reconcile_ml(base, fit(t, ct, o), ct);
      EXPECT_LE(coherence_inf(out, ct), 1e-10 * (1 + linalg::max_abs(out.values))) << learner;
    }
}

TEST(Fit, TreesAreDeterministicAndPersist) {
  std::mt19937_64 rng(7);
  const auto s = toy();
  const TrainingTable t = synthetic(s, 40, rng);
  FitOptions o;
  o.learner = "trees";
  o.seed = 99;
  o.threads = 1;
  const auto a = fit(t, s, o);
  o.threads = 3;
  const auto b = fit(t, s, o);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  o.seed = 100;
  EXPECT_NE(to_json(fit(t, s, o)).dump(), to_json(a).dump());

  const auto back = from_json(Json::parse(to_json(a).dump()));
  const ForecastSet base = ForecastSet::cross_sectional(fixtures::gaussian(8, 5, rng, 3.0).array() + 20.0);
  EXPECT_EQ(reconcile_ml(base, a, s).values, reconcile_ml(base, back, s).values);
  EXPECT_EQ(to_json(back).dump(), to_json(a).dump());
}

TEST(Fit, GridSearchPicksLowestCvError) {
  std::mt19937_64 rng(8);
  const auto s = toy();
  const TrainingTable t = synthetic(s, 30, rng);
  FitOptions o;
  o.learner = "knn";
  o.grid = {{"k", {1, 3, 7}}};
  const auto f = fit(t, s, o);
  ASSERT_TRUE(f.cv_mse.has_value());
  std::vector<Matrix> X;
  for (Index b = 0; b < 5; ++b) X.push_back(t.hat);
  double best = 1e300;
  double best_k = 0;
  for (double k : {1.0, 3.0, 7.0}) {
    const double e = ml::detail::cv_error(Knn({{"k", k}}), X, t.obs, 5, o.seed, 1);
    if (e < best) {
      best = e;
      best_k = k;
    }
  }
  EXPECT_EQ(f.params.at("k"), best_k);
  EXPECT_EQ(*f.cv_mse, best);

  // identical candidates keep the first one
  o.grid = {{"k", {2, 2}}};
  o.params = {};
  EXPECT_EQ(fit(t, s, o).params.at("k"), 2);
  const auto grid = ml::detail::expand_grid({}, {{"a", {1, 2}}, {"b", {3, 4}}});
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(grid[1].at("a"), 1);
  EXPECT_EQ(grid[1].at("b"), 4);
}

TEST(Fit, NonNegativeClampBeforeAggregation) {
  std::mt19937_64 rng(9);
  const auto s = toy();
  TrainingTable t = synthetic(s, 12, rng);
  t.obs.col(1).setConstant(-3.0);
  FitOptions o;
  o.learner = "ridge";
  const auto f = fit(t, s, o);
  const ForecastSet base = ForecastSet::cross_sectional(t.hat.topRows(2).transpose());
  const auto raw = reconcile_ml(base, f, s);
  const auto nn = reconcile_ml(base, f, s, true);
  EXPECT_NEAR(raw.values(4, 0), -3.0, 1e-10);
  EXPECT_EQ(nn.values(4, 0), 0.0);
  EXPECT_NEAR(nn.values(1, 0), raw.values(1, 0) + 3.0, 1e-10);
}

TEST(Fit, InputValidation) {
  std::mt19937_64 rng(10);
  const auto s = toy();
  TrainingTable t = synthetic(s, 9, rng);
  EXPECT_THROW(fit(t, s), ValidationError);
  t = synthetic(s, 12, rng);
  t.hat(4, 2) = std::numeric_limits<double>::quiet_NaN();
  try {
    fit(t, s);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 5"), std::string::npos);
  }
  t = synthetic(s, 12, rng);
  FitOptions o;
  o.learner = "svm";
  EXPECT_THROW(fit(t, s, o), ValidationError);
  o.learner = "ridge";
  o.params = {{"depth", 3}};
  EXPECT_THROW(fit(t, s, o), ValidationError);

  // applying to a structure that lacks the trained columns
  o.params = {};
  o.features = FeatureMode::Str;
  const auto f = fit(t, s, o);
  const auto other = CrossTemporalStructure::cross_sectional(CrossSectionalStructure::from_agg(
      fixtures::toy_agg(), {"T", "A", "B", "AA", "AB", "BA", "BB", "BC"}));
  try {
    reconcile_ml(ForecastSet::cross_sectional(Matrix::Ones(8, 1)), f, other);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("y1"), std::string::npos);
  }
}
