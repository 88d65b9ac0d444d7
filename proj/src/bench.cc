// Copyright 2026 The dpsearch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpsearch/bench.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "dpsearch/errors.h"
#include "dpsearch/mechanisms.h"
#include "dpsearch/parallel.h"
#include "json.hpp"

namespace dpsearch {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SweepEntry {
  SweepVar var;
  std::string_view name;
};

constexpr SweepEntry kSweeps[] = {
    {SweepVar::kN, "n"},           {SweepVar::kEpsilon, "epsilon"},
    {SweepVar::kDelta, "delta"},   {SweepVar::kNCorp, "n_corp"},
    {SweepVar::kNReq, "n_req"},    {SweepVar::kD, "d"},
};

std::size_t as_count(double v, const char* what) {
  if (!(v >= 1) || v != std::floor(v)) {
    throw PreconditionError(std::string(what) + " must be a positive integer");
  }
  return static_cast<std::size_t>(v);
}

FixedParams apply_sweep(FixedParams p, SweepVar var, double v) {
  switch (var) {
    case SweepVar::kN:
      p.n = as_count(v, "n");
      break;
    case SweepVar::kEpsilon:
      p.epsilon = v;
      break;
    case SweepVar::kDelta:
      p.delta = v;
      break;
    case SweepVar::kNCorp:
      p.n_corp = as_count(v, "n_corp");
      break;
    case SweepVar::kNReq:
      p.n_req = as_count(v, "n_req");
      break;
    case SweepVar::kD:
      p.d = as_count(v, "d");
      break;
  }
  return p;
}

Dataset concat(const Dataset& a, const Dataset& b, double bound) {
  RowMatrix x(a.features().rows() + b.features().rows(), a.features().cols());
  x << a.features(), b.features();
  return Dataset(a.schema(), std::move(x), {}, bound);
}

// Outcome of one mechanism in one world, before scoring.
struct Release {
  bool unsupported = false;
  bool failed = false;                  // guaranteed failure or similar
  std::optional<SemiringVector> total;  // raw or normalised statistics
  std::optional<PrivatizedMoments> moments;
};

struct Truth {
  SemiringVector stats;  // normalised
  FitOutcome fit;
};

TrialRecord score(const std::string& label, double value, std::size_t trial,
                  const Release& rel, const Truth& truth,
                  const std::vector<std::string>& features,
                  bool slope_only, bool normalised) {
  TrialRecord r;
  r.mechanism = label;
  r.sweep_value = value;
  r.trial = trial;
  if (rel.unsupported) {
    r.unsupported = true;
    r.s_error = kNaN;
    r.beta_error = kNaN;
    return r;
  }
  if (rel.failed) {
    r.failed = true;
    r.s_error = kInf;
    r.beta_error = kInf;
    return r;
  }
  if (rel.moments) {
    r.s_error = kNaN;
    const auto& m = *rel.moments;
    if (!(m.var_x > 0) || !std::isfinite(m.cov_xy)) {
      r.failed = true;
      r.beta_error = kInf;
      return r;
    }
    if (truth.fit.failed()) {
      r.failed = true;
      r.beta_error = kInf;
      return r;
    }
    r.beta_error =
        std::abs(m.cov_xy / m.var_x - truth.fit.params->coefficient(m.feature));
    return r;
  }
  std::optional<SemiringVector> stats;
  try {
    stats = normalised ? *rel.total : statistics(*rel.total);
  } catch (const UndefinedStatistics&) {
  }
  r.s_error = stats ? s_error(*stats, truth.stats) : kInf;
  FitOutcome fit;
  if (stats) fit = fit_linear(*stats, features, "y");
  r.failed = fit.failed();
  if (r.failed || truth.fit.failed()) {
    r.failed = true;
    r.beta_error = kInf;
  } else if (slope_only) {
    const std::string& x = features.front();
    r.beta_error = std::abs(fit.params->coefficient(x) -
                            truth.fit.params->coefficient(x));
  } else {
    r.beta_error = beta_error(fit, truth.fit);
  }
  return r;
}

template <typename Fn>
Release guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const UnsupportedError&) {
    Release r;
    r.unsupported = true;
    return r;
  }
}

}  // namespace

UnionWorld make_union_world(const ExperimentConfig& cfg, const FixedParams& p,
                            std::size_t trial) {
  std::vector<std::string> names = cfg.world == World::kUnionSimple
                                       ? std::vector<std::string>{"y", "x"}
                                       : std::vector<std::string>{"y", "x1", "x2"};
  CounterRng world =
      CounterRng(cfg.seed).substream(std::string_view("world")).substream(trial);
  CounterRng cov_rng = world.substream(std::string_view("cov"));
  Eigen::MatrixXd cov = gen_spd_covariance(names.size(), cov_rng);
  CounterRng r0 = world.substream(std::string_view("d0"));
  CounterRng r1 = world.substream(std::string_view("d1"));
  Dataset d0 = sample_relation(cov, p.n, p.B, r0, std::nullopt, names);
  Dataset d1 = sample_relation(cov, p.n, p.B, r1, std::nullopt, names);
  return UnionWorld{std::move(names), std::move(cov), std::move(d0), std::move(d1)};
}

namespace {

std::vector<TrialRecord> run_union_trial(const ExperimentConfig& cfg,
                                         const FixedParams& p, double value,
                                         std::size_t trial) {
  const bool simple = cfg.world == World::kUnionSimple;
  UnionWorld w = make_union_world(cfg, p, trial);
  const std::vector<std::string>& names = w.names;
  const std::vector<std::string> features(names.begin() + 1, names.end());
  const Dataset& d0 = w.d0;
  const Dataset& d1 = w.d1;
  CounterRng root(cfg.seed);
  Dataset both = concat(d0, d1, p.B);

  const SemiringVector exact = aggregate(both, p.k).total();
  Truth truth{statistics(exact), fit_linear(exact, features, "y")};
  const PrivacyBudget budget{p.epsilon, p.delta};
  const ApmContext ctx{p.n_corp, p.n_req, std::nullopt};
  const MechanismOptions opts{cfg.inject_noise, cfg.inject_noise};
  CounterRng noise = root.substream(std::string_view("noise")).substream(trial);

  std::vector<TrialRecord> out;
  for (const auto& name : cfg.mechanisms) {
    const MechanismKind kind = *parse_mechanism(name);
    CounterRng ms = noise.substream(name);
    auto per_dataset = [&](auto&& privatize) {
      Release r;
      PrivatizedStats a = privatize(d0, ms.substream(0));
      PrivatizedStats b = privatize(d1, ms.substream(1));
      r.total = union_aggregate(a.stats, b.stats).total();
      return r;
    };
    Release rel = guarded([&]() -> Release {
      switch (kind) {
        case MechanismKind::kNone: {
          Release r;
          r.total = exact;
          return r;
        }
        case MechanismKind::kFpm:
          return per_dataset([&](const Dataset& ds, const CounterRng& s) {
            return fpm_privatize(ds, std::nullopt, p.k, budget, s, opts);
          });
        case MechanismKind::kTpm:
          return per_dataset([&](const Dataset& ds, const CounterRng& s) {
            return tpm_privatize(ds, std::nullopt, p.k, budget, s, opts);
          });
        case MechanismKind::kSf1:
          return per_dataset([&](const Dataset& ds, const CounterRng& s) {
            return shuffle_privatize(ds, budget, ShuffleLevel::kSf1, std::nullopt,
                                     p.k, s, opts);
          });
        case MechanismKind::kSf2: {
          Release r;
          r.total = shuffle_privatize(both, budget, ShuffleLevel::kSf2, ctx, p.k,
                                      ms.substream(0), opts)
                        .stats.total();
          return r;
        }
        case MechanismKind::kApm: {
          PrivatizedStats s = apm_privatize(aggregate(both, p.k), p.B, both.rows(),
                                            budget, ctx, ms.substream(0), opts);
          Release r;
          r.failed = s.guaranteed_failure;
          r.total = s.stats.total();
          return r;
        }
        case MechanismKind::kFpmUnionOpt: {
          if (!simple) throw UnsupportedError("needs a single feature");
          PrivatizedMoments parts[] = {
              fpm_union_opt_privatize(d0, "y", budget, ms.substream(0), opts),
              fpm_union_opt_privatize(d1, "y", budget, ms.substream(1), opts)};
          Release r;
          r.moments = combine_moments(parts);
          return r;
        }
        case MechanismKind::kFpmOpt:
          throw UnsupportedError("fpm-opt needs a join key");
      }
      throw UnsupportedError("unknown mechanism");
    });
    out.push_back(score(name, value, trial, rel, truth, features, simple, false));
  }
  return out;
}

std::vector<TrialRecord> run_join_trial(const ExperimentConfig& cfg,
                                        const FixedParams& p, double value,
                                        std::size_t trial) {
  const std::vector<std::string> names{"y", "x1", "x2"};
  const std::vector<std::string> features{"x1", "x2"};
  const std::vector<std::string> left{"y", "x1"};
  const std::vector<std::string> right{"x2"};
  CounterRng root(cfg.seed);
  CounterRng world = root.substream(std::string_view("world")).substream(trial);
  CounterRng cov_rng = world.substream(std::string_view("cov"));
  Eigen::MatrixXd cov = gen_spd_covariance(names.size(), cov_rng);
  CounterRng rr = world.substream(std::string_view("R"));
  Dataset R = sample_relation(cov, p.n, p.B, rr, p.d, names);
  auto [A, Bp] = vertical_partition(R, "J", left, right);

  const SemiringVector exact = aggregate(R, p.k, false).total();
  Truth truth{statistics(exact), fit_linear(exact, features, "y")};
  const PrivacyBudget budget{p.epsilon, p.delta};
  const double n = static_cast<double>(p.n);
  const double d = static_cast<double>(p.d);
  const ApmContext ctx{p.n_corp, p.n_req, n / d};
  const MechanismOptions opts{cfg.inject_noise, cfg.inject_noise};
  CounterRng noise = root.substream(std::string_view("noise")).substream(trial);
  const std::optional<std::string> key = "J";

  std::vector<TrialRecord> out;
  for (const auto& name : cfg.mechanisms) {
    const MechanismKind kind = *parse_mechanism(name);
    CounterRng ms = noise.substream(name);
    auto pair = [&](auto&& privatize) {
      Release r;
      PrivatizedStats a = privatize(A, ms.substream(0));
      PrivatizedStats b = privatize(Bp, ms.substream(1));
      r.total = join_aggregate(a.stats, b.stats).total();
      return r;
    };
    Release rel = guarded([&]() -> Release {
      switch (kind) {
        case MechanismKind::kNone:
          return pair([&](const Dataset& ds, const CounterRng&) {
            return no_privacy(ds, key, p.k);
          });
        case MechanismKind::kFpm:
          return pair([&](const Dataset& ds, const CounterRng& s) {
            return fpm_privatize(ds, key, p.k, budget, s, opts);
          });
        case MechanismKind::kFpmOpt:
          return pair([&](const Dataset& ds, const CounterRng& s) {
            return fpm_opt_privatize(ds, *key, p.k, budget, s, opts);
          });
        case MechanismKind::kTpm:
          return pair([&](const Dataset& ds, const CounterRng& s) {
            return tpm_privatize(ds, key, p.k, budget, s, opts);
          });
        case MechanismKind::kApm: {
          AnnotatedRelation joined =
              join_aggregate(aggregate(A, p.k), aggregate(Bp, p.k)).marginalize();
          const auto rows = static_cast<std::size_t>(joined.group(0).count());
          PrivatizedStats s =
              apm_privatize(joined, std::sqrt(2.0) * p.B, rows, budget, ctx,
                            ms.substream(0), opts);
          Release r;
          r.failed = s.guaranteed_failure;
          r.total = s.stats.total();
          return r;
        }
        case MechanismKind::kSf1:
        case MechanismKind::kSf2:
          throw UnsupportedError("shuffling baselines are union-only");
        case MechanismKind::kFpmUnionOpt:
          throw UnsupportedError("fpm-union-opt is union-only");
      }
      throw UnsupportedError("unknown mechanism");
    });
    for (const auto& est : cfg.estimators) {
      const bool naive = est == "naive";
      const std::string label = naive ? name + "+naive" : name;
      Release scored = rel;
      if (!rel.unsupported && !rel.failed) {
        try {
          scored.total = naive ? statistics(*rel.total)
                               : unbiased_cross_moments(*rel.total, n, d, left, right);
        } catch (const UndefinedStatistics&) {
          scored.failed = true;
        }
      }
      out.push_back(score(label, value, trial, scored, truth, features, false, true));
    }
  }
  return out;
}

std::vector<std::string> labels_of(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& m : cfg.mechanisms) {
    if (cfg.world != World::kJoin) {
      out.push_back(m);
      continue;
    }
    for (const auto& e : cfg.estimators) out.push_back(e == "naive" ? m + "+naive" : m);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd gen_spd_covariance(std::size_t dim, CounterRng& rng) {
  if (dim < 1) throw PreconditionError("dimension must be >= 1");
  const auto n = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.uniform();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.transpose() * a);
  Eigen::VectorXd eig(n);
  for (Eigen::Index i = 0; i < n; ++i) eig(i) = 1.0 + rng.uniform();
  const Eigen::MatrixXd& q = solver.eigenvectors();
  Eigen::MatrixXd cov = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (cov + cov.transpose());
}

Dataset sample_relation(const Eigen::MatrixXd& cov, std::size_t n,
                        std::optional<double> B, CounterRng& rng,
                        std::optional<std::size_t> d,
                        std::vector<std::string> names) {
  if (n < 1) throw PreconditionError("n must be >= 1");
  if (cov.rows() != cov.cols() || cov.rows() < 1) {
    throw PreconditionError("covariance must be square");
  }
  if (B && !(*B > 0)) throw PreconditionError("norm bound must be positive");
  if (d && (*d < 1 || n % *d != 0)) {
    throw PreconditionError("domain size must divide n");
  }
  const Eigen::Index m = cov.rows();
  if (names.empty()) {
    for (Eigen::Index i = 0; i < m; ++i) names.push_back("x" + std::to_string(i + 1));
  }
  if (static_cast<Eigen::Index>(names.size()) != m) {
    throw SchemaError("one name per covariance dimension required");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw PreconditionError("covariance is not positive definite");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix x(static_cast<Eigen::Index>(n), m);
  Eigen::VectorXd z(m);
  std::size_t accepted = 0, attempts = 0;
  while (accepted < n) {
    for (Eigen::Index j = 0; j < m; ++j) z(j) = normal(rng);
    Eigen::VectorXd row = L * z;
    ++attempts;
    if (B && row.norm() > *B) {
      if (attempts >= 10000 && static_cast<double>(accepted) <
                                   1e-3 * static_cast<double>(attempts)) {
        throw PreconditionError(
            "norm bound too small: rejection acceptance below 1e-3");
      }
      continue;
    }
    x.row(static_cast<Eigen::Index>(accepted++)) = row.transpose();
  }
  std::optional<JoinKey> key;
  std::vector<std::size_t> keys;
  if (d) {
    key = JoinKey{"J", {}};
    for (std::size_t v = 0; v < *d; ++v) key->domain.push_back(std::to_string(v));
    for (std::size_t i = 0; i < n; ++i) keys.push_back(i % *d);
  }
  Schema schema(std::move(names), std::move(key));
  if (B) return Dataset(std::move(schema), std::move(x), std::move(keys), *B);
  return Dataset::with_observed_bound(std::move(schema), std::move(x), std::move(keys));
}

std::pair<Dataset, Dataset> vertical_partition(const Dataset& ds,
                                               const std::string& join_key,
                                               const std::vector<std::string>& f1,
                                               const std::vector<std::string>& f2) {
  if (!ds.has_key() || ds.schema().join_key()->name != join_key) {
    throw SchemaError("dataset has no join key named " + join_key);
  }
  if (f1.empty() || f2.empty()) throw PreconditionError("empty partition");
  std::set<std::string> s1(f1.begin(), f1.end()), s2(f2.begin(), f2.end());
  std::set<std::string> all(ds.schema().feature_names().begin(),
                            ds.schema().feature_names().end());
  std::set<std::string> cover = s1;
  cover.insert(s2.begin(), s2.end());
  if (s1.size() != f1.size() || s2.size() != f2.size() ||
      cover.size() != s1.size() + s2.size() || cover != all) {
    throw PreconditionError("partition must split the features disjointly");
  }
  auto project = [&](const std::vector<std::string>& fs) {
    RowMatrix x(ds.features().rows(), static_cast<Eigen::Index>(fs.size()));
    for (std::size_t j = 0; j < fs.size(); ++j) {
      x.col(static_cast<Eigen::Index>(j)) =
          ds.features().col(static_cast<Eigen::Index>(*ds.schema().feature_index(fs[j])));
    }
    return Dataset(Schema(fs, ds.schema().join_key()), std::move(x), ds.keys(),
                   ds.norm_bound());
  };
  return {project(f1), project(f2)};
}

double s_error(const SemiringVector& privatized, const SemiringVector& truth) {
  SemiringVector p = privatized.remap(truth.basis());
  double sum = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    const double diff = p[i] - truth[i];
    if (!std::isfinite(diff)) return kInf;
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

double beta_error(const FitOutcome& privatized, const FitOutcome& truth) {
  if (privatized.failed() || truth.failed()) return kInf;
  const auto& a = *privatized.params;
  const auto& b = *truth.params;
  if (a.theta.size() != b.theta.size()) {
    throw PreconditionError("parameter dimensions differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < b.feature_names.size(); ++i) {
    const double diff = a.coefficient(b.feature_names[i]) -
                        b.theta(static_cast<Eigen::Index>(i));
    sum += diff * diff;
  }
  const double di = a.intercept() - b.intercept();
  sum += di * di;
  return std::isfinite(sum) ? std::sqrt(sum) : kInf;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

std::string_view sweep_var_name(SweepVar v) {
  for (const auto& e : kSweeps) {
    if (e.var == v) return e.name;
  }
  return "unknown";
}

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    const std::string world = j.value("world", std::string("union"));
    if (world == "union") {
      cfg.world = World::kUnion;
    } else if (world == "union_simple") {
      cfg.world = World::kUnionSimple;
    } else if (world == "join") {
      cfg.world = World::kJoin;
    } else {
      throw PreconditionError("unknown world: " + world);
    }
    cfg.mechanisms = j.at("mechanisms").get<std::vector<std::string>>();
    if (j.contains("estimators")) {
      cfg.estimators = j["estimators"].get<std::vector<std::string>>();
    }
    const auto& sweep = j.at("sweep");
    const std::string var = sweep.at("variable").get<std::string>();
    bool found = false;
    for (const auto& e : kSweeps) {
      if (e.name == var) {
        cfg.sweep = e.var;
        found = true;
      }
    }
    if (!found) throw PreconditionError("unknown sweep variable: " + var);
    cfg.values = sweep.at("values").get<std::vector<double>>();
    if (j.contains("fixed")) {
      const auto& f = j["fixed"];
      cfg.fixed.n = f.value("n", cfg.fixed.n);
      cfg.fixed.d = f.value("d", cfg.fixed.d);
      cfg.fixed.B = f.value("B", cfg.fixed.B);
      cfg.fixed.k = f.value("k", cfg.fixed.k);
      cfg.fixed.epsilon = f.value("epsilon", cfg.fixed.epsilon);
      cfg.fixed.delta = f.value("delta", cfg.fixed.delta);
      cfg.fixed.n_corp = f.value("n_corp", cfg.fixed.n_corp);
      cfg.fixed.n_req = f.value("n_req", cfg.fixed.n_req);
    }
    cfg.trials = j.value("trials", cfg.trials);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.inject_noise = j.value("inject_noise", cfg.inject_noise);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad config: ") + e.what());
  }
  if (cfg.mechanisms.empty()) throw PreconditionError("no mechanisms given");
  for (const auto& m : cfg.mechanisms) {
    if (!parse_mechanism(m)) throw PreconditionError("unknown mechanism: " + m);
  }
  for (const auto& e : cfg.estimators) {
    if (e != "unbiased" && e != "naive") {
      throw PreconditionError("unknown estimator: " + e);
    }
  }
  if (cfg.estimators.empty()) throw PreconditionError("no estimators given");
  if (cfg.values.empty()) throw PreconditionError("sweep values are empty");
  if (cfg.trials < 1) throw PreconditionError("trials must be >= 1");
  if (cfg.fixed.k < 2) throw PreconditionError("k must be >= 2 to fit a model");
  for (double v : cfg.values) apply_sweep(cfg.fixed, cfg.sweep, v);
  return cfg;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t threads) {
  const std::size_t tasks = cfg.values.size() * cfg.trials;
  std::vector<std::vector<TrialRecord>> per_task(tasks);
  parallel_for(tasks, threads, [&](std::size_t t) {
    const std::size_t vi = t / cfg.trials;
    const std::size_t trial = t % cfg.trials;
    const double value = cfg.values[vi];
    const FixedParams p = apply_sweep(cfg.fixed, cfg.sweep, value);
    per_task[t] = cfg.world == World::kJoin ? run_join_trial(cfg, p, value, trial)
                                            : run_union_trial(cfg, p, value, trial);
  });

  ExperimentResult result;
  for (auto& v : per_task) {
    for (auto& r : v) result.records.push_back(std::move(r));
  }
  const std::string var(sweep_var_name(cfg.sweep));
  for (const auto& label : labels_of(cfg)) {
    for (double value : cfg.values) {
      std::vector<const TrialRecord*> recs;
      for (const auto& r : result.records) {
        if (r.mechanism == label && r.sweep_value == value) recs.push_back(&r);
      }
      const bool unsupported = std::all_of(recs.begin(), recs.end(),
                                           [](const auto* r) { return r->unsupported; });
      for (const char* metric : {"s_error", "beta_error"}) {
        SummaryRow row{label, var, value, metric, kNaN, kNaN, kNaN, kNaN, unsupported};
        if (!unsupported) {
          std::vector<double> vals;
          std::size_t failures = 0;
          const bool s = std::string_view(metric) == "s_error";
          for (const auto* r : recs) {
            if (r->unsupported) continue;
            const double v = s ? r->s_error : r->beta_error;
            if (std::isnan(v)) continue;
            vals.push_back(v);
            if (s ? !std::isfinite(v) : r->failed) ++failures;
          }
          if (vals.empty()) continue;  // no statistics released for this metric
          row.median = percentile(vals, 0.5);
          row.p25 = percentile(vals, 0.25);
          row.p75 = percentile(vals, 0.75);
          row.failure_rate =
              static_cast<double>(failures) / static_cast<double>(vals.size());
        }
        result.rows.push_back(row);
      }
    }
  }
  return result;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string to_csv(const ExperimentResult& result) {
  std::ostringstream os;
  os << "# percentiles: nearest rank; failed fits enter as +inf\n";
  os << "mechanism,sweep_var,sweep_value,metric,median,p25,p75,failure_rate\n";
  for (const auto& r : result.rows) {
    os << r.mechanism << ',' << r.sweep_var << ',' << format_double(r.sweep_value)
       << ',' << r.metric << ',';
    if (r.unsupported) {
      os << "unsupported,unsupported,unsupported,unsupported\n";
    } else {
      os << format_double(r.median) << ',' << format_double(r.p25) << ','
         << format_double(r.p75) << ',' << format_double(r.failure_rate) << '\n';
    }
  }
  return os.str();
}

std::vector<SummaryRow> parse_summary_csv(std::string_view csv) {
  std::vector<SummaryRow> rows;
  std::istringstream in{std::string(csv)};
  std::string line;
  bool header = true;
  auto num = [](const std::string& s) {
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan" || s == "unsupported") return kNaN;
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc()) throw DataError("bad number in CSV: " + s);
    return v;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw DataError("CSV row needs 8 columns: " + line);
    SummaryRow r;
    r.mechanism = cells[0];
    r.sweep_var = cells[1];
    r.sweep_value = num(cells[2]);
    r.metric = cells[3];
    r.unsupported = cells[4] == "unsupported";
    r.median = num(cells[4]);
    r.p25 = num(cells[5]);
    r.p75 = num(cells[6]);
    r.failure_rate = num(cells[7]);
    rows.push_back(r);
  }
  return rows;
}

std::string render_svg(const std::vector<SummaryRow>& rows,
                       const std::string& metric) {
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::vector<std::string> order;
  std::string sweep_var;
  for (const auto& r : rows) {
    if (r.metric != metric || r.unsupported) continue;
    sweep_var = r.sweep_var;
    if (!series.count(r.mechanism)) order.push_back(r.mechanism);
    auto& s = series[r.mechanism];
    if (std::isfinite(r.median) && std::isfinite(r.sweep_value)) {
      s.emplace_back(r.sweep_value, r.median);
    }
  }
  double xmin = kInf, xmax = -kInf, ymin = kInf, ymax = -kInf;
  for (const auto& [m, pts] : series) {
    for (auto [x, y] : pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  const bool any = std::isfinite(xmin);
  if (!any) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  const bool logx = xmin > 0 && xmax / xmin >= 10;
  const bool logy = ymin > 0 && ymax / ymin >= 10;
  auto tx = [&](double v) { return logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return logy ? std::log10(v) : v; };
  double x0 = tx(xmin), x1 = tx(xmax), y0 = ty(ymin), y1 = ty(ymax);
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double W = 640, H = 400, L = 70, R = 160, T = 40, Bm = 50;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - Bm - (ty(v) - y0) / (y1 - y0) * (H - T - Bm); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
     << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"15\">median "
     << metric << " vs " << sweep_var << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - Bm << "\" x2=\"" << W - R
     << "\" y2=\"" << H - Bm << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\""
     << H - Bm << "\" stroke=\"black\"/>\n";
  auto label = [&](double v) { return format_double(std::round(v * 1e4) / 1e4); };
  os << "<text x=\"" << L << "\" y=\"" << H - Bm + 18
     << "\" font-family=\"sans-serif\" font-size=\"11\">" << label(xmin) << "</text>\n";
  os << "<text x=\"" << W - R << "\" y=\"" << H - Bm + 18
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
     << label(xmax) << "</text>\n";
  os << "<text x=\"" << L - 4 << "\" y=\"" << H - Bm
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
     << label(ymin) << "</text>\n";
  os << "<text x=\"" << L - 4 << "\" y=\"" << T + 4
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
     << label(ymax) << "</text>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
     << sweep_var << (logx ? " (log)" : "") << "</text>\n";
  for (std::size_t i = 0; i < order.size(); ++i) {
    const char* color = kColors[i % 8];
    const auto& pts = series[order[i]];
    if (!pts.empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t j = 0; j < pts.size(); ++j) {
        os << (j ? " " : "") << px(pts[j].first) << ',' << py(pts[j].second);
      }
      os << "\"/>\n";
      for (auto [x, y] : pts) {
        os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\""
           << color << "\"/>\n";
      }
    }
    const double ly = T + 16.0 * static_cast<double>(i);
    os << "<rect x=\"" << W - R + 12 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\""
       << color << "\"/>\n";
    os << "<text x=\"" << W - R + 28 << "\" y=\"" << ly + 9
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << order[i] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dpsearch
