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

#include "dpsearch/regression.h"

#include <algorithm>
#include <cmath>

#include "dpsearch/errors.h"

namespace dpsearch {
namespace {

std::size_t entry(const SemiringVector& s, std::vector<std::string> names) {
  auto idx = s.basis()->find_names(names);
  if (!idx) {
    std::string what = names.empty() ? "count" : names[0];
    for (std::size_t i = 1; i < names.size(); ++i) what += "*" + names[i];
    throw SchemaError("statistics lack monomial " + what);
  }
  return *idx;
}

// Gram over (features..., intercept) and X'y.
void build_system(const SemiringVector& s, const std::vector<std::string>& f,
                  const std::string& target, Eigen::MatrixXd& gram,
                  Eigen::VectorXd& xty) {
  const Eigen::Index p = static_cast<Eigen::Index>(f.size()) + 1;
  gram.resize(p, p);
  xty.resize(p);
  const Eigen::Index c = p - 1;
  gram(c, c) = s[entry(s, {})];
  xty(c) = s[entry(s, {target})];
  for (Eigen::Index i = 0; i < c; ++i) {
    const std::string& fi = f[static_cast<std::size_t>(i)];
    gram(i, c) = gram(c, i) = s[entry(s, {fi})];
    xty(i) = s[entry(s, {fi, target})];
    for (Eigen::Index j = 0; j <= i; ++j) {
      gram(i, j) = gram(j, i) =
          s[entry(s, {fi, f[static_cast<std::size_t>(j)]})];
    }
  }
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

}  // namespace

double ModelParams::coefficient(const std::string& feature) const {
  auto it = std::find(feature_names.begin(), feature_names.end(), feature);
  if (it == feature_names.end()) throw SchemaError("no coefficient for " + feature);
  return theta(it - feature_names.begin());
}

std::optional<Eigen::VectorXd> solve_normal_equations(const Eigen::MatrixXd& gram,
                                                      const Eigen::VectorXd& rhs) {
  if (gram.rows() != gram.cols() || gram.rows() != rhs.size()) {
    throw PreconditionError("gram and rhs dimensions differ");
  }
  if (!gram.allFinite() || !rhs.allFinite()) return std::nullopt;
  Eigen::MatrixXd sym = 0.5 * (gram + gram.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd theta = llt.solve(rhs);
  if (!theta.allFinite()) return std::nullopt;
  return theta;
}

FitOutcome fit_linear(const SemiringVector& s,
                      const std::vector<std::string>& features,
                      const std::string& target) {
  if (s.order() < 2) throw SchemaError("fitting needs order >= 2 statistics");
  Eigen::MatrixXd gram;
  Eigen::VectorXd xty;
  build_system(s, features, target, gram, xty);
  // Touch y^2 now so a missing entry is a schema error rather than a
  // failure later in evaluate().
  entry(s, {target, target});
  FitOutcome out;
  auto theta = solve_normal_equations(gram, xty);
  if (!theta) return out;
  ModelParams params{features, target, *theta};
  out.r2_proxy = evaluate(params, s).r2;
  out.params = std::move(params);
  return out;
}

Evaluation evaluate(const ModelParams& params, const SemiringVector& s_test) {
  Eigen::MatrixXd gram;
  Eigen::VectorXd xty;
  build_system(s_test, params.feature_names, params.target_name, gram, xty);
  const double yy = s_test[entry(s_test, {params.target_name, params.target_name})];
  const double sy = s_test[entry(s_test, {params.target_name})];
  const double c = s_test.count();
  const Eigen::VectorXd& t = params.theta;
  Evaluation e;
  e.sse = yy - 2.0 * t.dot(xty) + t.dot(gram * t);
  const double tss = yy - sy * sy / c;
  if (!(c > 0) || !(tss > 0) || !std::isfinite(tss)) {
    e.r2 = 0.0;
    return e;
  }
  e.r2 = std::min(1.0, 1.0 - e.sse / tss);
  if (std::isnan(e.r2)) e.r2 = 0.0;
  return e;
}

SemiringVector unbiased_cross_moments(const SemiringVector& s_join, double n,
                                      double d,
                                      const std::vector<std::string>& f1,
                                      const std::vector<std::string>& f2) {
  JoinPartition parts[] = {{f1, n}, {f2, n}};
  return unbiased_cross_moments(s_join, d, parts);
}

SemiringVector unbiased_cross_moments(const SemiringVector& s_join, double d,
                                      std::span<const JoinPartition> parts) {
  if (d == 1.0) {
    throw AssumptionViolation(
        "join-key domain of size 1: estimator coefficients are undefined");
  }
  SemiringVector e = statistics(s_join);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t q = p + 1; q < parts.size(); ++q) {
      const double n = std::min(parts[p].n, parts[q].n);
      const double a = (1.0 - n) / (1.0 - d);
      const double b = (n - d) / (1.0 - d);
      for (const auto& x : parts[p].features) {
        for (const auto& y : parts[q].features) {
          const std::size_t ix = entry(e, {x});
          const std::size_t iy = entry(e, {y});
          const std::size_t ixy = entry(e, {x, y});
          e[ixy] = a * e[ixy] + b * e[ix] * e[iy];
        }
      }
    }
  }
  return e;
}

SimpleMoments moments_from_stats(const SemiringVector& s,
                                 const std::string& feature,
                                 const std::string& target) {
  SemiringVector e = statistics(s);
  const double ex = e[entry(e, {feature})];
  const double ey = e[entry(e, {target})];
  return {e[entry(e, {feature, feature})] - ex * ex,
          e[entry(e, {feature, target})] - ex * ey};
}

SimpleMoments empirical_moments(const Dataset& ds, const std::string& feature,
                                const std::string& target) {
  auto fi = ds.schema().feature_index(feature);
  auto ti = ds.schema().feature_index(target);
  if (!fi || !ti) throw SchemaError("unknown feature or target column");
  Eigen::VectorXd x = ds.features().col(static_cast<Eigen::Index>(*fi));
  Eigen::VectorXd y = ds.features().col(static_cast<Eigen::Index>(*ti));
  x.array() -= x.mean();
  y.array() -= y.mean();
  const double n = static_cast<double>(ds.rows());
  return {x.squaredNorm() / n, x.dot(y) / n};
}

double confidence_bound(double beta_hat, const ConfidenceInputs& ci) {
  if (!(ci.sigma2x_hat > 0)) {
    throw UnboundedConfidence("feature variance must be positive");
  }
  const double tau1 = ci.B1 / ci.sigma2x_hat;
  const double tau2 = ci.B2 / ci.sigma2x_hat;
  if (!(tau1 < 1.0)) {
    throw UnboundedConfidence("tau1 >= 1: no finite bound at this p");
  }
  return tau2 + tau1 / (1.0 - tau1) * (std::abs(beta_hat) + tau2);
}

ConfidenceInputs estimate_tau(const MomentClosure& run, const Dataset& ds,
                              const std::string& feature,
                              const std::string& target, double p,
                              std::size_t trials, const CounterRng& stream) {
  if (!(p > 0 && p < 1)) throw PreconditionError("p must lie in (0, 1)");
  if (trials < 100) throw PreconditionError("estimate_tau needs >= 100 trials");
  const SimpleMoments truth = empirical_moments(ds, feature, target);
  std::vector<double> e1, e2;
  e1.reserve(trials);
  e2.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    SimpleMoments m = run(stream.substream(t));
    e1.push_back(std::abs(m.var_x - truth.var_x));
    e2.push_back(std::abs(m.cov_xy - truth.cov_xy));
  }
  ConfidenceInputs ci;
  ci.p = p;
  ci.B1 = quantile(e1, 1.0 - p);
  ci.B2 = quantile(e2, 1.0 - p);
  ci.sigma2x_hat = truth.var_x;
  return ci;
}

}  // namespace dpsearch
