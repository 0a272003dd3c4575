#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "foreco/classical.hpp"
#include "foreco/error.hpp"
#include "foreco/ml/features.hpp"
#include "foreco/ml/learners.hpp"
#include "foreco/parallel.hpp"
#include "foreco/series_tools.hpp"
#include "foreco/structures.hpp"

namespace foreco::ml {

/// Validation sample: `hat` holds one per-period base-forecast vector per
/// row (V × dim), `obs` the observed free variables in bottom_index order
/// (V × n_free).
struct TrainingTable {
  Matrix hat;
  Matrix obs;
};

/// Builds the table from base forecasts in the usual layout (n × kt·V) and
/// observed bottom high-frequency series (n_b × m·V).
inline TrainingTable make_training_table(const ForecastSet& hat, const Matrix& obs_bottom,
                                         const CrossTemporalStructure& s) {
  TrainingTable t;
  t.hat = to_periods(hat, s).transpose();
  if (obs_bottom.rows() != s.cs().n_bottom())
    throw ValidationError("obs has " + std::to_string(obs_bottom.rows()) + " rows, expected " +
                          std::to_string(s.cs().n_bottom()) + " bottom series");
  t.obs = bottom_to_periods(obs_bottom, s).transpose();
  return t;
}

using Grid = std::vector<std::pair<std::string, std::vector<double>>>;

struct FitOptions {
  std::string learner = "trees";
  FeatureMode features = FeatureMode::All;
  Params params;
  /// Candidate values searched by K-fold cross-validation; fixed `params` apply to every candidate.
  Grid grid;
  int folds = 5;
  std::uint64_t seed = 42;
  Index min_rows = 10;
  unsigned threads = 0;
};

struct FittedModel {
  Index target = 0;
  IndexList features;
  std::unique_ptr<Model> model;
};

struct FittedReconciler {
  std::string learner;
  FeatureMode features = FeatureMode::All;
  Params params;
  std::uint64_t seed = 0;
  Framework framework = Framework::CrossSectional;
  std::vector<std::string> position_labels;
  Index n_free = 0;
  std::optional<double> cv_mse;
  std::vector<FittedModel> models;
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::vector<Params> expand_grid(const Params& fixed, const Grid& grid) {
  std::vector<Params> out{fixed};
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw ValidationError("tuning grid for " + key + " is empty");
    std::vector<Params> next;
    for (const Params& p : out)
      for (double v : values) {
        Params q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    out = std::move(next);
  }
  return out;
}

/// Mean squared error of K contiguous-fold cross-validation over all targets.
inline double cv_error(const Learner& learner, const std::vector<Matrix>& X, const Matrix& Y, int folds,
                       std::uint64_t seed, unsigned threads) {
  const Index N = Y.rows();
  std::vector<double> sse(X.size(), 0.0);
  const auto errors = parallel_for(static_cast<Index>(X.size()), threads, [&](Index f) {
    const Matrix& Xf = X[static_cast<std::size_t>(f)];
    for (int k = 0; k < folds; ++k) {
      const Index lo = N * k / folds, hi = N * (k + 1) / folds;
      Matrix Xt(N - (hi - lo), Xf.cols());
      Vector yt(N - (hi - lo));
      for (Index r = 0, w = 0; r < N; ++r)
        if (r < lo || r >= hi) {
          Xt.row(w) = Xf.row(r);
          yt(w++) = Y(r, f);
        }
      const auto m = learner.fit(Xt, yt, splitmix(seed + static_cast<std::uint64_t>(f)));
      const Vector pred = m->predict(Xf.middleRows(lo, hi - lo));
      sse[static_cast<std::size_t>(f)] += (pred - Y.col(f).segment(lo, hi - lo)).squaredNorm();
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  double total = 0;
  for (double v : sse) total += v;
  return total / static_cast<double>(N * Y.cols());
}

}  // namespace detail

/// Fits one model per free variable on its selected feature columns. With a
/// tuning grid the candidate with the lowest cross-validated MSE is refit on
/// the whole table (ties keep the earliest candidate).
inline FittedReconciler fit(const TrainingTable& train, const CrossTemporalStructure& s, const FitOptions& opts = {}) {
  const Index d = s.dim(), nf = s.n_free();
  if (train.hat.cols() != d)
    throw ValidationError("hat has " + std::to_string(train.hat.cols()) + " columns, expected " + std::to_string(d));
  if (train.obs.cols() != nf)
    throw ValidationError("obs has " + std::to_string(train.obs.cols()) + " columns, expected " + std::to_string(nf));
  if (train.hat.rows() != train.obs.rows())
    throw ValidationError("hat and obs have different numbers of rows (" + std::to_string(train.hat.rows()) + " vs " +
                          std::to_string(train.obs.rows()) + ")");
  for (Index r = 0; r < train.hat.rows(); ++r)
    if (!train.hat.row(r).allFinite() || !train.obs.row(r).allFinite())
      throw ValidationError("training row " + std::to_string(r + 1) + " contains non-finite values");
  if (train.hat.rows() < opts.min_rows)
    throw ValidationError("need at least " + std::to_string(opts.min_rows) + " validation rows, got " +
                          std::to_string(train.hat.rows()));
  if (opts.folds < 2 && !opts.grid.empty()) throw ValidationError("tuning needs at least 2 folds");
  if (!opts.grid.empty() && opts.folds > train.hat.rows())
    throw ValidationError("more folds than validation rows");

  FittedReconciler out;
  out.learner = make_learner(opts.learner, opts.params)->tag();
  out.features = opts.features;
  out.seed = opts.seed;
  out.framework = s.framework();
  out.n_free = nf;
  for (Index p = 0; p < d; ++p) out.position_labels.push_back(s.position_label(p));

  std::vector<Matrix> X;
  for (Index f = 0; f < nf; ++f) {
    FittedModel fm;
    fm.target = f;
    fm.features = select_features(s, opts.features, f);
    X.push_back(linalg::select_cols(train.hat, fm.features));
    out.models.push_back(std::move(fm));
  }

  Params chosen = opts.params;
  if (!opts.grid.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (const Params& cand : detail::expand_grid(opts.params, opts.grid)) {
      const auto learner = make_learner(opts.learner, cand);
      const double e = detail::cv_error(*learner, X, train.obs, opts.folds, opts.seed, opts.threads);
      if (e < best) {
        best = e;
        chosen = cand;
      }
    }
    out.cv_mse = best;
  }
  out.params = chosen;
  const auto learner = make_learner(opts.learner, chosen);
  const auto errors = parallel_for(nf, opts.threads, [&](Index f) {
    out.models[static_cast<std::size_t>(f)].model =
        learner->fit(X[static_cast<std::size_t>(f)], train.obs.col(f), detail::splitmix(opts.seed + static_cast<std::uint64_t>(f)));
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Predicts the free variables of every period and aggregates them bottom-up.
inline ForecastSet reconcile_ml(const ForecastSet& base, const FittedReconciler& fitted,
                                const CrossTemporalStructure& s, bool sntz = false, bool round = false) {
  std::set<std::string> have;
  for (Index p = 0; p < s.dim(); ++p) have.insert(s.position_label(p));
  std::string missing;
  for (const auto& m : fitted.models)
    for (Index p : m.features) {
      const std::string& lab = fitted.position_labels.at(static_cast<std::size_t>(p));
      if (!have.count(lab) && missing.find(lab) == std::string::npos) missing += (missing.empty() ? "" : ", ") + lab;
    }
  if (!missing.empty()) throw ValidationError("base forecasts lack feature columns: " + missing);
  if (static_cast<Index>(fitted.position_labels.size()) != s.dim() || fitted.n_free != s.n_free() ||
      fitted.framework != s.framework())
    throw ValidationError("fitted model does not match the structure");
  for (Index p = 0; p < s.dim(); ++p)
    if (fitted.position_labels[static_cast<std::size_t>(p)] != s.position_label(p))
      throw ValidationError("feature column " + fitted.position_labels[static_cast<std::size_t>(p)] +
                            " is at a different position in the structure");

  const Matrix X = to_periods(base, s);
  if (!X.allFinite()) throw ValidationError("base forecasts contain non-finite values");
  const Matrix Xt = X.transpose();
  Matrix free(s.n_free(), X.cols());
  for (const auto& m : fitted.models) free.row(m.target) = m.model->predict(linalg::select_cols(Xt, m.features)).transpose();
  return from_periods(bottom_up_periods(free, s, sntz, round), s);
}

// ---------------------------------------------------------------------------
// JSON bundle

inline constexpr int kBundleVersion = 1;

inline Json to_json(const FittedReconciler& f) {
  Json models = Json::array();
  for (const auto& m : f.models) {
    Json labels = Json::array();
    for (Index p : m.features) labels.push_back(f.position_labels[static_cast<std::size_t>(p)]);
    models.push_back({{"target", m.target}, {"features", m.features}, {"feature_labels", labels},
                      {"model", m.model->to_json()}});
  }
  Json j = {{"format", "foreco-rml"},
            {"version", kBundleVersion},
            {"learner", f.learner},
            {"features", to_string(f.features)},
            {"seed", f.seed},
            {"params", f.params},
            {"framework", to_string(f.framework)},
            {"position_labels", f.position_labels},
            {"n_free", f.n_free},
            {"models", models}};
  if (f.cv_mse) j["cv_mse"] = *f.cv_mse;
  return j;
}

inline FittedReconciler from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != "foreco-rml") throw ValidationError("not a model bundle");
    if (j.at("version").get<int>() != kBundleVersion)
      throw ValidationError("unsupported model bundle version " + std::to_string(j.at("version").get<int>()));
    FittedReconciler f;
    f.learner = j.at("learner").get<std::string>();
    f.features = parse_feature_mode(j.at("features").get<std::string>());
    f.seed = j.at("seed").get<std::uint64_t>();
    f.params = j.at("params").get<Params>();
    f.framework = parse_framework(j.at("framework").get<std::string>());
    f.position_labels = j.at("position_labels").get<std::vector<std::string>>();
    f.n_free = j.at("n_free").get<Index>();
    if (j.contains("cv_mse")) f.cv_mse = j.at("cv_mse").get<double>();
    for (const auto& mj : j.at("models")) {
      FittedModel m;
      m.target = mj.at("target").get<Index>();
      m.features = mj.at("features").get<IndexList>();
      for (Index p : m.features)
        if (p < 0 || p >= static_cast<Index>(f.position_labels.size()))
          throw ValidationError("model bundle references feature " + std::to_string(p) + " out of range");
      if (m.target < 0 || m.target >= f.n_free) throw ValidationError("model bundle target out of range");
      m.model = model_from_json(f.learner, mj.at("model"));
      f.models.push_back(std::move(m));
    }
    if (static_cast<Index>(f.models.size()) != f.n_free)
      throw ValidationError("model bundle has " + std::to_string(f.models.size()) + " models, expected " +
                            std::to_string(f.n_free));
    return f;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed model bundle: ") + e.what());
  }
}

}  // namespace foreco::ml
