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

#ifndef DPSEARCH_REGRESSION_H_
#define DPSEARCH_REGRESSION_H_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpsearch/relation.h"
#include "dpsearch/rng.h"
#include "dpsearch/semiring.h"

namespace dpsearch {

// theta holds one coefficient per feature followed by the intercept.
struct ModelParams {
  std::vector<std::string> feature_names;
  std::string target_name;
  Eigen::VectorXd theta;

  double intercept() const { return theta(theta.size() - 1); }
  double coefficient(const std::string& feature) const;
};

struct FitOutcome {
  std::optional<ModelParams> params;  // empty on Failure
  double r2_proxy = 0.0;

  bool failed() const { return !params.has_value(); }
};

// Solves gram * theta = rhs by Cholesky; nullopt when gram is not positive
// definite or the solution is not finite.
std::optional<Eigen::VectorXd> solve_normal_equations(const Eigen::MatrixXd& gram,
                                                      const Eigen::VectorXd& rhs);

// Builds the gram over (features, intercept) from the 0-, 1- and 2-order
// entries of s. Throws SchemaError when an entry is missing from s; a gram
// that is not positive definite is a Failure, not an exception.
FitOutcome fit_linear(const SemiringVector& s,
                      const std::vector<std::string>& features,
                      const std::string& target);

struct Evaluation {
  double sse = 0.0;
  double r2 = 0.0;
};

// sse = y'y - 2 theta'X'y + theta'X'X theta from the monomials of s_test;
// r2 = min(1, 1 - sse/TSS), reported as 0 when TSS <= 0 or not finite.
Evaluation evaluate(const ModelParams& params, const SemiringVector& s_test);

// One side of a join for the cross-moment correction.
struct JoinPartition {
  std::vector<std::string> features;
  double n = 0.0;  // rows of that relation
};

// Normalised statistics of a many-to-many join with each cross moment
// E[f1 f2] replaced by ((1-n)/(1-d)) s[f1f2]/s[c] +
// ((n-d)/(1-d)) (s[f1]/s[c]) (s[f2]/s[c]).
SemiringVector unbiased_cross_moments(const SemiringVector& s_join, double n,
                                      double d,
                                      const std::vector<std::string>& f1,
                                      const std::vector<std::string>& f2);
// Applies the correction to every pair of partitions, with n taken as the
// smaller of the two relations' sizes.
SemiringVector unbiased_cross_moments(const SemiringVector& s_join, double d,
                                      std::span<const JoinPartition> parts);

struct SimpleMoments {
  double var_x = 0.0;
  double cov_xy = 0.0;
};

// 1/n variance and covariance from (possibly noisy) statistics.
SimpleMoments moments_from_stats(const SemiringVector& s,
                                 const std::string& feature,
                                 const std::string& target);
SimpleMoments empirical_moments(const Dataset& ds, const std::string& feature,
                                const std::string& target);

struct ConfidenceInputs {
  double p = 0.05;
  double B1 = 0.0;
  double B2 = 0.0;
  double sigma2x_hat = 1.0;
};

// tau2 + tau1/(1 - tau1) * (|beta_hat| + tau2) with tau_i = B_i/sigma2x_hat.
// Throws UnboundedConfidence when tau1 >= 1.
double confidence_bound(double beta_hat, const ConfidenceInputs& ci);

// A repeatable privatization returning the released moments for one stream.
using MomentClosure = std::function<SimpleMoments(const CounterRng&)>;

// Runs the closure on `trials` substreams of `stream` and returns the
// empirical (1-p) quantiles of the moment errors as B1, B2.
ConfidenceInputs estimate_tau(const MomentClosure& run, const Dataset& ds,
                              const std::string& feature,
                              const std::string& target, double p,
                              std::size_t trials, const CounterRng& stream);

}  // namespace dpsearch

#endif  // DPSEARCH_REGRESSION_H_
