// foreco: batch front end for the reconciliation library.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "foreco/foreco.hpp"

using namespace foreco;
using Json = nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Options {
  // structure
  std::string framework, method;
  std::string structure, agg_mat, cons_mat, agg_order, tew = "sum";
  // inputs
  std::string base, res, weights, samples, hat, obs, model, alt_bottom, immutable, bounds;
  // least squares
  std::string comb = "ols", comb_cs, comb_te, comb_base, approach = "proj", nn;
  bool mse = true;
  // classical
  std::string id_rows;
  int order = 0;
  bool normalize = true, sntz = false, round = false;
  // lcc
  bool ccc = false;
  std::string const_mode = "exogenous";
  // heuristics
  int itmax = 100;
  double tol = 1e-5;
  std::string norm = "inf", type = "tcs", avg = "KA";
  bool verbose = false;
  // probabilistic
  bool reduce_form = false;
  // ml
  std::string features = "all", learner = "trees";
  std::vector<std::string> params, tune;
  int folds = 5;
  std::uint64_t seed = 42;
  // outputs
  std::string out, out_cov, diag, config;
  bool header = false, timings = false;
};

// ---------------------------------------------------------------------------
// config file: a JSON object whose keys are long flag names

std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  const Json j = io::read_json(path);
  if (!j.is_object()) throw ValidationError(path + ": config must be a JSON object");
  auto given = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value.is_boolean()) {
      args.push_back(value.get<bool>() ? flag : "--no-" + key);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        args.push_back(flag);
        args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      }
    } else if (value.is_string()) {
      args.push_back(flag);
      args.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      args.push_back(flag);
      args.push_back(value.is_number_integer() ? std::to_string(value.get<long long>()) : io::format_double(value.get<double>()));
    } else {
      throw ValidationError(path + ": unsupported value for " + key);
    }
  }
  return args;
}

// ---------------------------------------------------------------------------
// inputs

std::vector<int> parse_int_list(const std::string& s, const std::string& flag) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto v = io::parse_double(tok);
    if (!v || !std::isfinite(*v) || *v != std::floor(*v))
      throw ValidationError(flag + ": '" + tok + "' is not an integer");
    out.push_back(static_cast<int>(*v));
  }
  if (out.empty()) throw ValidationError(flag + " is empty");
  return out;
}

CrossSectionalStructure load_cs(const Options& o) {
  if (!o.agg_mat.empty() && !o.cons_mat.empty()) throw ValidationError("give only one of --agg-mat and --cons-mat");
  if (!o.agg_mat.empty()) {
    const auto t = io::read_csv(o.agg_mat);
    return CrossSectionalStructure::from_agg(t.values);
  }
  if (!o.cons_mat.empty()) {
    const auto t = io::read_csv(o.cons_mat);
    return CrossSectionalStructure::from_cons(t.values, t.header);
  }
  throw ValidationError("the " + o.framework + " framework needs --agg-mat or --cons-mat");
}

TemporalStructure load_te(const Options& o) {
  if (o.agg_order.empty()) throw ValidationError("the " + o.framework + " framework needs --agg-order");
  const auto k = parse_int_list(o.agg_order, "--agg-order");
  const Tew tew = parse_tew(o.tew);
  return k.size() == 1 ? TemporalStructure::from_max_order(k[0], tew) : TemporalStructure::from_orders(k, tew);
}

CrossTemporalStructure load_structure(const Options& o) {
  const Framework fw = parse_framework(o.framework);
  if (!o.structure.empty()) {
    const auto s = io::structure_from_json(io::read_json(o.structure), o.structure);
    if (s.framework() != fw)
      throw ValidationError(o.structure + " describes a " + to_string(s.framework()) + " structure, not " +
                            o.framework);
    return s;
  }
  switch (fw) {
    case Framework::CrossSectional: return CrossTemporalStructure::cross_sectional(load_cs(o));
    case Framework::Temporal: return CrossTemporalStructure::temporal(load_te(o));
    case Framework::CrossTemporal: return CrossTemporalStructure::cross_temporal(load_cs(o), load_te(o));
  }
  throw ValidationError("unknown framework");
}

std::string require(const std::string& value, const std::string& flag, const std::string& why) {
  if (value.empty()) throw ValidationError("missing --" + flag + " (" + why + ")");
  return value;
}

ForecastSet load_forecasts(const std::string& path, const CrossTemporalStructure& s, const std::string& flag) {
  const Matrix v = io::read_matrix(path);
  if (v.rows() != s.n())
    throw ValidationError("--" + flag + " " + path + ": " + std::to_string(v.rows()) + " rows, expected " +
                          std::to_string(s.n()) + " series");
  try {
    return make_forecast_set(v, s.te());
  } catch (const ValidationError& e) {
    throw ValidationError("--" + flag + " " + path + ": " + e.what());
  }
}

/// Residuals in the forecast layout (one row per series) as per-period rows.
std::optional<Matrix> load_residuals(const Options& o, const CrossTemporalStructure& s, bool needed,
                                     const std::string& tag) {
  if (o.res.empty()) {
    if (needed) throw ValidationError("estimator " + tag + " requires residuals (res): pass --res");
    return std::nullopt;
  }
  return to_periods(load_forecasts(o.res, s, "res"), s).transpose();
}

Estimator estimator_tag(const std::string& tag) { return parse_estimator(tag); }

CovarianceMatrix covariance_for(const Options& o, const CrossTemporalStructure& s, const std::string& tag) {
  const Estimator e = estimator_tag(tag);
  CovarianceOptions co;
  co.mse = o.mse;
  return estimate_covariance(e, s, load_residuals(o, s, requires_residuals(e), tag), co);
}

Vector load_weights(const Options& o, Index expected) {
  const Matrix w = io::read_matrix(require(o.weights, "weights", "weights for the disaggregation"));
  if (w.size() != expected)
    throw ValidationError("--weights " + o.weights + ": " + std::to_string(w.size()) + " values, expected " +
                          std::to_string(expected));
  Vector out(expected);
  if (w.cols() == 1)
    out = w.col(0);
  else
    out = w.row(0).transpose();
  return out;
}

ReconciliationOptions ls_options(const Options& o, const CrossTemporalStructure&) {
  ReconciliationOptions r;
  r.approach = parse_approach(o.approach);
  if (!o.nn.empty()) r.nn = parse_nn(o.nn);
  if (!o.immutable.empty()) r.immutable = io::read_cells(o.immutable);
  if (!o.bounds.empty()) r.bounds = io::read_bounds(o.bounds);
  return r;
}

ml::Params parse_params(const std::vector<std::string>& kv, const std::string& flag) {
  ml::Params p;
  for (const auto& item : kv) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError(flag + " expects key=value, got '" + item + "'");
    const auto v = io::parse_double(item.substr(eq + 1));
    if (!v || !std::isfinite(*v)) throw ValidationError(flag + " " + item + ": value is not a number");
    p[item.substr(0, eq)] = *v;
  }
  return p;
}

ml::Grid parse_grid(const std::vector<std::string>& kv) {
  ml::Grid g;
  for (const auto& item : kv) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("--tune expects key=v1,v2,..., got '" + item + "'");
    std::vector<double> values;
    std::stringstream ss(item.substr(eq + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const auto v = io::parse_double(tok);
      if (!v || !std::isfinite(*v)) throw ValidationError("--tune " + item + ": '" + tok + "' is not a number");
      values.push_back(*v);
    }
    g.emplace_back(item.substr(0, eq), values);
  }
  return g;
}

// ---------------------------------------------------------------------------
// outputs

void write_matrix(const std::string& path, const Matrix& m, const std::vector<std::string>& header) {
  if (path.empty() || path == "-")
    io::write_csv(std::cout, m, header);
  else
    io::write_csv(path, m, header);
}

void write_forecasts(const Options& o, const ForecastSet& fs) {
  write_matrix(o.out, fs.values, o.header ? io::forecast_header(fs.layout) : std::vector<std::string>{});
}

Json config_json(const Options& o) {
  Json c = {{"framework", o.framework}, {"method", o.method}};
  auto put = [&](const char* k, const std::string& v) {
    if (!v.empty()) c[k] = v;
  };
  put("structure", o.structure);
  put("agg_mat", o.agg_mat);
  put("cons_mat", o.cons_mat);
  put("agg_order", o.agg_order);
  put("tew", o.tew);
  put("base", o.base);
  put("res", o.res);
  put("config", o.config);
  return c;
}

Json base_diag(const Options& o, const CrossTemporalStructure& s) {
  Json d;
  d["framework"] = to_string(s.framework());
  d["framework_title"] = framework_title(s.framework());
  d["method"] = o.method;
  d["dimensions"] = {{"n", s.n()}, {"n_upper", s.cs().n_upper()}, {"n_bottom", s.cs().n_bottom()},
                     {"m", s.m()}, {"kt", s.kt()}};
  d["config"] = config_json(o);
  return d;
}

double coherence_of(const ForecastSet& fs, const CrossTemporalStructure& s) { return coherence_inf(fs, s); }

// ---------------------------------------------------------------------------
// methods

Json run_reconcile(Options& o) {
  const auto s = load_structure(o);
  Json d = base_diag(o, s);
  const std::string& m = o.method;
  auto finish = [&](const ForecastSet& fs) {
    write_forecasts(o, fs);
    d["horizon"] = fs.horizon();
    d["coherence_inf"] = coherence_of(fs, s);
  };

  if (m == "bu") {
    const Matrix v = io::read_matrix(require(o.base, "base", "forecasts to aggregate"));
    Matrix bottom;
    if (v.rows() == s.cs().n_bottom() && v.rows() != s.n()) {
      bottom = v;
    } else {
      const auto fs = load_forecasts(o.base, s, "base");
      bottom = to_level_blocks(fs).at(1).bottomRows(s.cs().n_bottom());
    }
    d["estimator"] = nullptr;
    d["nn"] = o.sntz ? "sntz" : "none";
    finish(bottom_up(bottom, s, o.sntz, o.round));
  } else if (m == "td") {
    const Matrix v = io::read_matrix(require(o.base, "base", "top-level forecasts"));
    Matrix top;
    if (v.rows() == 1 && s.n() != 1) {
      top = v;
    } else {
      const auto fs = load_forecasts(o.base, s, "base");
      top = to_level_blocks(fs).at(s.m()).topRows(1);
    }
    d["nn"] = "none";
    finish(top_down(top, s, WeightVector{load_weights(o, s.n_free()), o.normalize}));
  } else if (m == "mo") {
    if (o.order == 0 && s.m() == 1) o.order = 1;
    if (o.order == 0) throw ValidationError("missing --order (temporal order of the middle level)");
    IndexList rows;
    if (!o.id_rows.empty())
      for (int r : parse_int_list(o.id_rows, "--id-rows")) rows.push_back(r - 1);
    const Matrix v = io::read_matrix(require(o.base, "base", "middle-level forecasts"));
    const Index nmid = s.cs().n_upper() == 0 ? 1 : static_cast<Index>(rows.size());
    Matrix mid;
    if (v.rows() == nmid && v.rows() != s.n()) {
      mid = v;
    } else {
      const auto fs = load_forecasts(o.base, s, "base");
      const Matrix blk = to_level_blocks(fs).at(o.order);
      mid = s.cs().n_upper() == 0 ? blk : linalg::select_rows(blk, rows);
    }
    d["nn"] = "none";
    finish(middle_out(mid, s, WeightVector{load_weights(o, s.n_free()), o.normalize}, rows, o.order));
  } else if (m == "rec") {
    const auto base = load_forecasts(require(o.base, "base", "base forecasts"), s, "base");
    const auto cov = covariance_for(o, s, o.comb);
    const auto opts = ls_options(o, s);
    const auto r = reconcile_ls(base, s, cov, opts);
    d["estimator"] = to_string(cov.estimator);
    d["approach"] = to_string(r.report.approach);
    d["nn"] = to_string(r.report.nn);
    if (cov.shrink_lambda) d["shrink_lambda"] = *cov.shrink_lambda;
    d["psd_repair"] = {{"repaired", cov.repaired}, {"epsilon", cov.repair_epsilon}};
    d["excluded_residual_rows"] = cov.excluded_rows;
    d["report"] = {{"rcond", r.report.rcond},
                   {"constrained_columns", r.report.constrained_columns},
                   {"max_iterations", r.report.max_iterations},
                   {"bpv_fallback", r.report.bpv_fallback},
                   {"polished", r.report.polished},
                   {"immutable_count", r.report.immutable_count}};
    finish(r.forecasts);
  } else if (m == "lcc") {
    const auto base = load_forecasts(require(o.base, "base", "base forecasts"), s, "base");
    const auto cov = covariance_for(o, s, o.comb);
    LccOptions lo;
    lo.ccc = o.ccc;
    lo.mode = parse_lcc_mode(o.const_mode);
    if (!o.alt_bottom.empty()) lo.alt_bottom = io::read_matrix(o.alt_bottom);
    const auto r = reconcile_lcc(base, s, cov, lo);
    d["estimator"] = to_string(cov.estimator);
    d["nn"] = "none";
    d["ccc"] = o.ccc;
    d["const"] = to_string(lo.mode);
    d["levels"] = r.labels;
    finish(r.forecasts);
  } else if (m == "tcs" || m == "cst" || m == "iter") {
    if (s.framework() != Framework::CrossTemporal)
      throw ValidationError("method " + m + " needs the ct framework");
    const auto base = load_forecasts(require(o.base, "base", "base forecasts"), s, "base");
    const std::string cs_tag = o.comb_cs.empty() ? o.comb : o.comb_cs;
    const std::string te_tag = o.comb_te.empty() ? o.comb : o.comb_te;
    const Estimator ce = estimator_tag(cs_tag), tee = estimator_tag(te_tag);
    CovarianceOptions co;
    co.mse = o.mse;
    const auto res = load_residuals(o, s, requires_residuals(ce) || requires_residuals(tee),
                                    requires_residuals(ce) ? cs_tag : te_tag);
    const auto covs = dimension_covariances(s, ce, tee, res, co);
    d["estimator"] = {{"cs", to_string(ce)}, {"te", to_string(tee)}};
    d["nn"] = "none";
    if (m == "iter") {
      IterativeOptions io_;
      io_.itmax = o.itmax;
      io_.tol = o.tol;
      io_.type = parse_step_order(o.type);
      io_.norm = parse_norm(o.norm);
      const auto r = iterative(base, s, covs, io_);
      if (o.verbose)
        for (std::size_t i = 0; i < r.report.trace.size(); ++i)
          std::cerr << "iteration " << i + 1 << ": " << io::format_double(r.report.trace[i]) << '\n';
      d["iterations"] = {{"count", r.report.iterations}, {"trace", r.report.trace},
                         {"norm", to_string(r.report.norm)}, {"converged", r.report.converged},
                         {"initial", r.report.initial}, {"final_cs", r.report.final_cs},
                         {"final_te", r.report.final_te}, {"type", o.type}};
      finish(r.forecasts);
    } else {
      const Averaging a = parse_averaging(o.avg);
      d["avg"] = to_string(a);
      finish(two_step(base, s, covs, parse_step_order(m), a));
    }
  } else if (m == "mvn") {
    const auto base = load_forecasts(require(o.base, "base", "base forecast means"), s, "base");
    const Estimator comb = estimator_tag(o.comb);
    std::optional<Estimator> comb_base;
    if (!o.comb_base.empty()) comb_base = estimator_tag(o.comb_base);
    const bool need = requires_residuals(comb) || (comb_base && requires_residuals(*comb_base));
    const auto res = load_residuals(o, s, need, requires_residuals(comb) ? o.comb : o.comb_base);
    GaussianOptions go;
    go.approach = parse_approach(o.approach);
    go.reduce_form = o.reduce_form;
    CovarianceOptions co;
    co.mse = o.mse;
    const auto r = reconcile_gaussian(base, s, comb, comb_base, res, go, co);
    d["estimator"] = to_string(comb);
    d["comb_base"] = comb_base ? to_string(*comb_base) : to_string(comb);
    d["approach"] = to_string(go.approach);
    d["nn"] = "none";
    d["reduce_form"] = o.reduce_form;
    d["gaussian"] = {{"min_eigenvalue", r.report.min_eigenvalue}, {"repaired", r.report.repaired},
                     {"sigma_is_omega", r.report.sigma_is_omega}};
    d["horizon"] = base.horizon();
    if (o.reduce_form) {
      write_matrix(o.out, periods_to_bottom(r.mean, s), {});
    } else {
      const ForecastSet mean = from_periods(r.mean, s);
      write_forecasts(o, mean);
      d["coherence_inf"] = coherence_of(mean, s);
    }
    if (!o.out_cov.empty()) write_matrix(o.out_cov, r.cov, {});
  } else if (m == "smp") {
    const Matrix draws = io::read_matrix(require(o.samples, "samples", "draws, one per row"));
    const auto cov = covariance_for(o, s, o.comb);
    const auto opts = ls_options(o, s);
    const PointMethod method = [&](const ForecastSet& fs) { return reconcile_ls(fs, s, cov, opts).forecasts; };
    const auto r = reconcile_samples(SampleForecast{draws}, s, method);
    d["estimator"] = to_string(cov.estimator);
    d["approach"] = o.approach;
    d["nn"] = o.nn.empty() ? "none" : o.nn;
    d["draws"] = r.count();
    double worst = 0;
    for (Index b = 0; b < r.count(); ++b)
      worst = std::max(worst, coherence_inf(unflatten_draw(r.draws.row(b).transpose(), s), s));
    d["coherence_inf"] = worst;
    write_matrix(o.out, r.draws, {});
  } else if (m == "rml") {
    const auto base = load_forecasts(require(o.base, "base", "base forecasts"), s, "base");
    ml::FittedReconciler f;
    if (!o.hat.empty()) {
      ml::FitOptions fo;
      fo.learner = o.learner;
      fo.features = ml::parse_feature_mode(o.features);
      fo.params = parse_params(o.params, "--params");
      fo.grid = parse_grid(o.tune);
      fo.folds = o.folds;
      fo.seed = o.seed;
      const auto hat = load_forecasts(o.hat, s, "hat");
      const Matrix obs = io::read_matrix(require(o.obs, "obs", "observed bottom series for training"));
      f = ml::fit(ml::make_training_table(hat, obs, s), s, fo);
      if (!o.model.empty()) io::write_json(o.model, ml::to_json(f));
    } else {
      f = ml::from_json(io::read_json(require(o.model, "model", "a fitted model bundle, or --hat and --obs")));
    }
    d["estimator"] = nullptr;
    d["approach"] = f.learner;
    d["nn"] = o.sntz ? "sntz" : "none";
    d["ml"] = {{"learner", f.learner}, {"features", ml::to_string(f.features)}, {"seed", f.seed},
               {"params", f.params}};
    if (f.cv_mse) d["ml"]["cv_mse"] = *f.cv_mse;
    finish(ml::reconcile_ml(base, f, s, o.sntz, o.round));
  } else {
    throw ValidationError("unknown method: " + m + " (expected td, bu, mo, rec, lcc, mvn, smp, rml, tcs, cst or iter)");
  }
  return d;
}

Json run_rml_fit(const Options& o) {
  const auto s = load_structure(o);
  ml::FitOptions fo;
  fo.learner = o.learner;
  fo.features = ml::parse_feature_mode(o.features);
  fo.params = parse_params(o.params, "--params");
  fo.grid = parse_grid(o.tune);
  fo.folds = o.folds;
  fo.seed = o.seed;
  const auto hat = load_forecasts(require(o.hat, "hat", "validation base forecasts"), s, "hat");
  const Matrix obs = io::read_matrix(require(o.obs, "obs", "observed bottom series"));
  const auto f = ml::fit(ml::make_training_table(hat, obs, s), s, fo);
  io::write_json(require(o.model, "model", "where to write the model bundle"), ml::to_json(f));
  Json d = base_diag(o, s);
  d["method"] = "rml-fit";
  d["approach"] = f.learner;
  d["nn"] = "none";
  d["ml"] = {{"learner", f.learner}, {"features", ml::to_string(f.features)}, {"seed", f.seed}, {"params", f.params}};
  if (f.cv_mse) d["ml"]["cv_mse"] = *f.cv_mse;
  return d;
}

Json run_rml_apply(Options& o) {
  o.method = "rml";
  o.hat.clear();
  require(o.model, "model", "a fitted model bundle");
  return run_reconcile(o);
}

int run_info(const std::string& path) {
  const Json d = io::read_json(path);
  if (!d.is_object() || !d.contains("framework")) throw ValidationError(path + ": not a diagnostics file");
  try {
    const Framework fw = parse_framework(d.at("framework").get<std::string>());
    std::cout << framework_title(fw) << " Forecast Reconciliation\n";
    std::cout << "Framework: " << framework_title(fw) << '\n';
    std::cout << "Method: " << d.value("method", std::string("?")) << '\n';
    if (d.contains("estimator") && !d["estimator"].is_null()) {
      const auto& e = d["estimator"];
      std::cout << "Estimator: "
                << (e.is_string() ? e.get<std::string>() : "cs " + e.value("cs", std::string("?")) + ", te " +
                                                               e.value("te", std::string("?")))
                << '\n';
    }
    if (d.contains("approach")) std::cout << "Approach: " << d["approach"].get<std::string>() << '\n';
    std::cout << "Non-negativity: " << d.value("nn", std::string("none")) << '\n';
    if (d.contains("coherence_inf"))
      std::cout << "Coherence (max abs residual): " << io::format_double(d["coherence_inf"].get<double>()) << '\n';
    if (d.contains("iterations"))
      std::cout << "Iterations: " << d["iterations"].value("count", 0)
                << (d["iterations"].value("converged", false) ? " (converged)" : " (not converged)") << '\n';
  } catch (const Json::exception& e) {
    throw ValidationError(path + ": malformed diagnostics (" + e.what() + ")");
  }
  return 0;
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--structure", o.structure, "structure JSON {labels, agg_mat, orders, tew}");
  app->add_option("--agg-mat", o.agg_mat, "cross-sectional aggregation matrix (CSV)");
  app->add_option("--cons-mat", o.cons_mat, "zero-sum constraint matrix (CSV)");
  app->add_option("--agg-order", o.agg_order, "max order m or a comma list of orders");
  app->add_option("--tew", o.tew, "temporal aggregation: sum, avg, first or last");
  app->add_option("--base", o.base, "base forecasts (CSV, one row per series)");
  app->add_option("--res", o.res, "in-sample residuals (CSV, same layout as --base)");
  app->add_option("--comb", o.comb, "covariance estimator tag");
  app->add_flag("--mse,!--no-mse", o.mse, "residual moments about zero (default) or centered");
  app->add_option("--out", o.out, "output CSV (default stdout)");
  app->add_option("--diag", o.diag, "diagnostics JSON");
  app->add_option("--config", o.config, "JSON file with default flag values");
  app->add_flag("--header", o.header, "write a k<order>_<j> header row");
  app->add_flag("--timings", o.timings, "record wall-clock timings in the diagnostics");
}

void add_ml(CLI::App* app, Options& o) {
  app->add_option("--hat", o.hat, "validation base forecasts (CSV, same layout as --base)");
  app->add_option("--obs", o.obs, "observed bottom high-frequency series (CSV)");
  app->add_option("--model", o.model, "model bundle (JSON)");
  app->add_option("--features", o.features, "all, bts, str, str-bts, low-high or compact");
  app->add_option("--learner", o.learner, "ridge, trees or knn");
  app->add_option("--params", o.params, "learner parameter key=value (repeatable)");
  app->add_option("--tune", o.tune, "tuning grid key=v1,v2,... (repeatable)");
  app->add_option("--folds", o.folds, "cross-validation folds for tuning");
  app->add_option("--seed", o.seed, "random seed");
}

int execute(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  args = merge_config(std::move(args));

  Options o;
  CLI::App app{"foreco: coherent forecast reconciliation"};
  app.require_subcommand(1);

  auto* rec = app.add_subcommand("reconcile", "reconcile base forecasts");
  rec->add_option("framework", o.framework, "cs, te or ct")->required();
  rec->add_option("method", o.method, "td, bu, mo, rec, lcc, mvn, smp, rml, tcs, cst or iter")->required();
  add_common(rec, o);
  add_ml(rec, o);
  rec->add_option("--weights", o.weights, "disaggregation weights (CSV)");
  rec->add_option("--id-rows", o.id_rows, "middle-level rows of the aggregation matrix (1-based, comma list)");
  rec->add_option("--order", o.order, "temporal order of the middle level");
  rec->add_flag("--normalize,!--no-normalize", o.normalize, "rescale weights to sum to one");
  rec->add_flag("--sntz", o.sntz, "set negative bottom forecasts to zero");
  rec->add_flag("--round", o.round, "round bottom forecasts");
  rec->add_option("--approach", o.approach, "proj, strc, proj_qp or strc_qp");
  rec->add_option("--nn", o.nn, "non-negativity: sntz, bpv or qp");
  rec->add_option("--immutable", o.immutable, "CSV of series, order, step");
  rec->add_option("--bounds", o.bounds, "CSV of series, order, step, lower, upper");
  rec->add_flag("--ccc", o.ccc, "average with the bottom-up forecast");
  rec->add_option("--const", o.const_mode, "exogenous or endogenous");
  rec->add_option("--alt-bottom", o.alt_bottom, "alternative bottom base forecasts (CSV)");
  rec->add_option("--comb-cs", o.comb_cs, "cross-sectional estimator for tcs, cst and iter");
  rec->add_option("--comb-te", o.comb_te, "temporal estimator for tcs, cst and iter");
  rec->add_option("--avg", o.avg, "KA or simple");
  rec->add_option("--itmax", o.itmax, "maximum iterations");
  rec->add_option("--tol", o.tol, "convergence tolerance");
  rec->add_option("--norm", o.norm, "inf, one or two");
  rec->add_option("--type", o.type, "tcs or cst");
  rec->add_flag("--verbose", o.verbose, "print the iteration trace");
  rec->add_option("--samples", o.samples, "draws, one per row (CSV)");
  rec->add_option("--comb-base", o.comb_base, "estimator for the base covariance");
  rec->add_flag("--reduce-form", o.reduce_form, "bottom high-frequency marginal only");
  rec->add_option("--out-cov", o.out_cov, "reconciled covariance (CSV)");

  auto* rml = app.add_subcommand("rml", "fit or apply machine-learning reconciliation");
  rml->require_subcommand(1);
  auto* fit = rml->add_subcommand("fit", "train per-variable models and save a bundle");
  fit->add_option("framework", o.framework, "cs, te or ct")->required();
  add_common(fit, o);
  add_ml(fit, o);
  auto* apply = rml->add_subcommand("apply", "reconcile with a saved bundle");
  apply->add_option("framework", o.framework, "cs, te or ct")->required();
  add_common(apply, o);
  add_ml(apply, o);
  apply->add_flag("--sntz", o.sntz, "set negative bottom forecasts to zero");
  apply->add_flag("--round", o.round, "round bottom forecasts");

  std::string info_path;
  auto* info = app.add_subcommand("info", "summarize a diagnostics file");
  info->add_option("diagnostics", info_path, "diagnostics JSON")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  if (info->parsed()) return run_info(info_path);

  const auto t0 = std::chrono::steady_clock::now();
  Json d;
  if (rec->parsed()) {
    d = run_reconcile(o);
  } else if (fit->parsed()) {
    o.method = "rml-fit";
    d = run_rml_fit(o);
  } else {
    d = run_rml_apply(o);
  }
  if (o.timings)
    d["timings"] = {{"total_ms", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()}};
  if (!o.diag.empty()) io::write_json(o.diag, d);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return execute(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
