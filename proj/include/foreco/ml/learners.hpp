#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "foreco/error.hpp"
#include "foreco/linalg.hpp"

namespace foreco::ml {

using Json = nlohmann::json;
using Params = std::map<std::string, double>;

/// Fitted regression model: rows of X are observations.
class Model {
 public:
  virtual ~Model() = default;
  virtual Vector predict(const Matrix& X) const = 0;
  virtual Json to_json() const = 0;
};

/// Learner plug-in: pure fit given features, target and seed.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::string tag() const = 0;
  virtual std::unique_ptr<Model> fit(const Matrix& X, const Vector& y, std::uint64_t seed) const = 0;
};

namespace detail {

inline double param(const Params& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

inline int int_param(const Params& p, const std::string& key, int fallback, int lo) {
  const double v = param(p, key, fallback);
  if (!(v >= lo) || v != std::floor(v) || v > 1e9)
    throw ValidationError("parameter " + key + " must be an integer >= " + std::to_string(lo));
  return static_cast<int>(v);
}

inline void check_keys(const Params& p, std::initializer_list<const char*> allowed, const std::string& learner) {
  for (const auto& [k, v] : p) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw ValidationError("unknown parameter for " + learner + ": " + k);
    if (!std::isfinite(v)) throw ValidationError("parameter " + k + " must be finite");
  }
}

inline Vector vec_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline std::vector<double> vec_to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Ridge regression with an unpenalized intercept.

class RidgeModel : public Model {
 public:
  RidgeModel(double intercept, Vector coef) : intercept_(intercept), coef_(std::move(coef)) {}
  Vector predict(const Matrix& X) const override {
    return (X * coef_).array() + intercept_;
  }
  Json to_json() const override { return {{"intercept", intercept_}, {"coef", detail::vec_to_std(coef_)}}; }
  static std::unique_ptr<Model> from_json(const Json& j) {
    return std::make_unique<RidgeModel>(j.at("intercept").get<double>(), detail::vec_from_json(j.at("coef")));
  }
  double intercept() const { return intercept_; }
  const Vector& coef() const { return coef_; }

 private:
  double intercept_;
  Vector coef_;
};

/// Penalty λ·trace(XcᵀXc)/p on centered features (λ = `lambda`, default 1e−6).
class Ridge : public Learner {
 public:
  explicit Ridge(const Params& p = {}) {
    detail::check_keys(p, {"lambda"}, "ridge");
    lambda_ = detail::param(p, "lambda", 1e-6);
    if (lambda_ < 0) throw ValidationError("parameter lambda must be non-negative");
  }
  std::string tag() const override { return "ridge"; }
  std::unique_ptr<Model> fit(const Matrix& X, const Vector& y, std::uint64_t) const override {
    const Index p = X.cols();
    const Vector xm = X.colwise().mean().transpose();
    const double ym = y.mean();
    if (p == 0) return std::make_unique<RidgeModel>(ym, Vector());
    const Matrix Xc = X.rowwise() - xm.transpose();
    Matrix G = Xc.transpose() * Xc;
    const double pen = lambda_ * G.trace() / static_cast<double>(p);
    Vector coef = Vector::Zero(p);
    if (G.trace() > 0) {
      G.diagonal().array() += pen;
      const Vector rhs = Xc.transpose() * (y.array() - ym).matrix();
      if (pen > 0)
        coef = G.ldlt().solve(rhs);
      else
        coef = G.completeOrthogonalDecomposition().solve(rhs);
    }
    return std::make_unique<RidgeModel>(ym - xm.dot(coef), coef);
  }

 private:
  double lambda_ = 1e-6;
};

// ---------------------------------------------------------------------------
// k-nearest neighbours (Euclidean, ties to the earliest row).

class KnnModel : public Model {
 public:
  KnnModel(int k, Matrix X, Vector y) : k_(k), X_(std::move(X)), y_(std::move(y)) {}
  Vector predict(const Matrix& X) const override {
    Vector out(X.rows());
    const Index k = std::min<Index>(k_, X_.rows());
    std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(X_.rows()));
    for (Index r = 0; r < X.rows(); ++r) {
      for (Index t = 0; t < X_.rows(); ++t) dist[static_cast<std::size_t>(t)] = {(X_.row(t) - X.row(r)).squaredNorm(), t};
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
      double s = 0;
      for (Index i = 0; i < k; ++i) s += y_(dist[static_cast<std::size_t>(i)].second);
      out(r) = s / static_cast<double>(k);
    }
    return out;
  }
  Json to_json() const override {
    Json rows = Json::array();
    for (Index r = 0; r < X_.rows(); ++r) rows.push_back(detail::vec_to_std(X_.row(r).transpose()));
    return {{"k", k_}, {"x", rows}, {"y", detail::vec_to_std(y_)}, {"p", X_.cols()}};
  }
  static std::unique_ptr<Model> from_json(const Json& j) {
    const auto& rows = j.at("x");
    const Index p = j.at("p").get<Index>();
    Matrix X(static_cast<Index>(rows.size()), p);
    for (std::size_t r = 0; r < rows.size(); ++r) X.row(static_cast<Index>(r)) = detail::vec_from_json(rows[r]).transpose();
    return std::make_unique<KnnModel>(j.at("k").get<int>(), std::move(X), detail::vec_from_json(j.at("y")));
  }

 private:
  int k_;
  Matrix X_;
  Vector y_;
};

class Knn : public Learner {
 public:
  explicit Knn(const Params& p = {}) {
    detail::check_keys(p, {"k"}, "knn");
    k_ = detail::int_param(p, "k", 1, 1);
  }
  std::string tag() const override { return "knn"; }
  std::unique_ptr<Model> fit(const Matrix& X, const Vector& y, std::uint64_t) const override {
    return std::make_unique<KnnModel>(k_, X, y);
  }

 private:
  int k_ = 1;
};

// ---------------------------------------------------------------------------
// Bagged regression trees with per-split feature subsampling.

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

using Tree = std::vector<TreeNode>;

inline double predict_tree(const Tree& t, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  int i = 0;
  while (t[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = t[static_cast<std::size_t>(i)];
    i = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return t[static_cast<std::size_t>(i)].value;
}

class ForestModel : public Model {
 public:
  explicit ForestModel(std::vector<Tree> trees) : trees_(std::move(trees)) {}
  Vector predict(const Matrix& X) const override {
    Vector out = Vector::Zero(X.rows());
    for (Index r = 0; r < X.rows(); ++r) {
      double s = 0;
      for (const Tree& t : trees_) s += predict_tree(t, X.row(r));
      out(r) = s / static_cast<double>(trees_.size());
    }
    return out;
  }
  Json to_json() const override {
    Json ts = Json::array();
    for (const Tree& t : trees_) {
      Json nodes = Json::array();
      for (const TreeNode& n : t) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
      ts.push_back(nodes);
    }
    return {{"trees", ts}};
  }
  static std::unique_ptr<Model> from_json(const Json& j) {
    std::vector<Tree> trees;
    for (const auto& tj : j.at("trees")) {
      Tree t;
      for (const auto& nj : tj)
        t.push_back(TreeNode{nj.at(0).get<int>(), nj.at(1).get<double>(), nj.at(2).get<int>(), nj.at(3).get<int>(),
                             nj.at(4).get<double>()});
      trees.push_back(std::move(t));
    }
    if (trees.empty()) throw ValidationError("forest model has no trees");
    return std::make_unique<ForestModel>(std::move(trees));
  }

 private:
  std::vector<Tree> trees_;
};

class BaggedTrees : public Learner {
 public:
  explicit BaggedTrees(const Params& p = {}) {
    detail::check_keys(p, {"n_trees", "max_depth", "min_leaf", "mtry"}, "trees");
    n_trees_ = detail::int_param(p, "n_trees", 100, 1);
    max_depth_ = detail::int_param(p, "max_depth", 8, 0);
    min_leaf_ = detail::int_param(p, "min_leaf", 5, 1);
    mtry_ = detail::int_param(p, "mtry", 0, 0);
  }
  std::string tag() const override { return "trees"; }

  std::unique_ptr<Model> fit(const Matrix& X, const Vector& y, std::uint64_t seed) const override {
    std::mt19937_64 rng(seed);
    const Index N = X.rows(), p = X.cols();
    const int mtry = mtry_ > 0 ? std::min<int>(mtry_, static_cast<int>(p))
                               : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
    std::vector<Tree> trees;
    for (int t = 0; t < n_trees_; ++t) {
      std::vector<Index> rows(static_cast<std::size_t>(N));
      for (auto& r : rows) r = static_cast<Index>(rng() % static_cast<std::uint64_t>(N));
      Tree tree;
      grow(tree, X, y, rows, 0, mtry, rng);
      trees.push_back(std::move(tree));
    }
    return std::make_unique<ForestModel>(std::move(trees));
  }

 private:
  int grow(Tree& tree, const Matrix& X, const Vector& y, std::vector<Index> rows, int depth, int mtry,
           std::mt19937_64& rng) const {
    const int id = static_cast<int>(tree.size());
    tree.emplace_back();
    double sum = 0;
    for (Index r : rows) sum += y(r);
    const double n = static_cast<double>(rows.size());
    tree[static_cast<std::size_t>(id)].value = sum / n;
    if (depth >= max_depth_ || static_cast<int>(rows.size()) < 2 * min_leaf_ || X.cols() == 0) return id;

    // features for this split: partial Fisher–Yates over all columns
    std::vector<int> feats(static_cast<std::size_t>(X.cols()));
    std::iota(feats.begin(), feats.end(), 0);
    for (int i = 0; i < mtry; ++i) {
      const auto j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(feats.size() - i));
      std::swap(feats[static_cast<std::size_t>(i)], feats[static_cast<std::size_t>(j)]);
    }

    double best_gain = 1e-12 * (1 + std::abs(sum));
    int best_f = -1;
    double best_thr = 0;
    std::vector<std::pair<double, double>> xy(rows.size());
    for (int fi = 0; fi < mtry; ++fi) {
      const int f = feats[static_cast<std::size_t>(fi)];
      for (std::size_t i = 0; i < rows.size(); ++i) xy[i] = {X(rows[i], f), y(rows[i])};
      std::sort(xy.begin(), xy.end());
      double ls = 0;
      const std::size_t lo = static_cast<std::size_t>(min_leaf_);
      for (std::size_t i = 0; i + lo < xy.size(); ++i) {
        ls += xy[i].second;
        const std::size_t nl = i + 1;
        if (nl < lo || xy[i].first == xy[i + 1].first) continue;
        const double nr = n - static_cast<double>(nl);
        const double rs = sum - ls;
        // SSE reduction up to a constant
        const double gain = ls * ls / static_cast<double>(nl) + rs * rs / nr - sum * sum / n;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = f;
          best_thr = 0.5 * (xy[i].first + xy[i + 1].first);
        }
      }
    }
    if (best_f < 0) return id;
    std::vector<Index> left, right;
    for (Index r : rows) (X(r, best_f) <= best_thr ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(tree, X, y, std::move(left), depth + 1, mtry, rng);
    const int r = grow(tree, X, y, std::move(right), depth + 1, mtry, rng);
    auto& node = tree[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = best_thr;
    node.left = l;
    node.right = r;
    return id;
  }

  int n_trees_ = 100;
  int max_depth_ = 8;
  int min_leaf_ = 5;
  int mtry_ = 0;
};

inline std::unique_ptr<Learner> make_learner(const std::string& tag, const Params& p = {}) {
  if (tag == "ridge") return std::make_unique<Ridge>(p);
  if (tag == "trees" || tag == "forest") return std::make_unique<BaggedTrees>(p);
  if (tag == "knn") return std::make_unique<Knn>(p);
  throw ValidationError("unknown learner: " + tag + " (expected ridge, trees or knn)");
}

inline std::unique_ptr<Model> model_from_json(const std::string& tag, const Json& j) {
  if (tag == "ridge") return RidgeModel::from_json(j);
  if (tag == "trees" || tag == "forest") return ForestModel::from_json(j);
  if (tag == "knn") return KnnModel::from_json(j);
  throw ValidationError("unknown learner in model bundle: " + tag);
}

}  // namespace foreco::ml
