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

#ifndef DPSEARCH_BENCH_H_
#define DPSEARCH_BENCH_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpsearch/regression.h"
#include "dpsearch/relation.h"
#include "dpsearch/rng.h"
#include "dpsearch/semiring.h"

namespace dpsearch {

// Random SPD matrix: eigenvectors of A'A for uniform A, eigenvalues drawn
// uniformly from (1, 2).
Eigen::MatrixXd gen_spd_covariance(std::size_t dim, CounterRng& rng);

// n multivariate-normal rows, resampled until each row norm is <= B (no
// bound when B is empty; the dataset then records its observed bound).
// With a domain size d, key value i % d goes to row i, so each of the d
// values appears n/d times. Features default to x1..xm; the key is "J" with
// values "0".."d-1".
Dataset sample_relation(const Eigen::MatrixXd& cov, std::size_t n,
                        std::optional<double> B, CounterRng& rng,
                        std::optional<std::size_t> d = std::nullopt,
                        std::vector<std::string> names = {});

// Projections (F1, key) and (F2, key); F1 and F2 must be disjoint, nonempty
// and cover the features.
std::pair<Dataset, Dataset> vertical_partition(const Dataset& ds,
                                               const std::string& join_key,
                                               const std::vector<std::string>& f1,
                                               const std::vector<std::string>& f2);

// l2 distance over the entries of degree >= 1 of two normalised statistics
// vectors (feature order may differ). +inf when any entry is not finite.
double s_error(const SemiringVector& privatized, const SemiringVector& truth);
// l2 distance of theta (features and intercept); +inf when either fit failed.
double beta_error(const FitOutcome& privatized, const FitOutcome& truth);

// Nearest-rank percentile (q in (0, 1]); +inf values rank last.
double percentile(std::vector<double> values, double q);

enum class World { kUnion, kUnionSimple, kJoin };
enum class SweepVar { kN, kEpsilon, kDelta, kNCorp, kNReq, kD };

std::string_view sweep_var_name(SweepVar v);

struct FixedParams {
  std::size_t n = 1000;
  std::size_t d = 100;
  double B = 5.0;
  int k = 2;
  double epsilon = 1.0;
  double delta = 1e-6;
  std::size_t n_corp = 2;
  std::size_t n_req = 1;
};

struct ExperimentConfig {
  World world = World::kUnion;
  std::vector<std::string> mechanisms;
  // Join world only: "unbiased" and/or "naive" cross-moment estimates.
  std::vector<std::string> estimators{"unbiased"};
  SweepVar sweep = SweepVar::kN;
  std::vector<double> values;
  FixedParams fixed;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  bool inject_noise = true;
};

// Throws PreconditionError / SchemaError on invalid configs.
ExperimentConfig parse_experiment_config(std::string_view json_text);

struct TrialRecord {
  std::string mechanism;
  double sweep_value = 0.0;
  std::size_t trial = 0;
  double s_error = 0.0;     // NaN when the mechanism releases no statistics
  double beta_error = 0.0;  // +inf on Failure
  bool failed = false;
  bool unsupported = false;
};

struct SummaryRow {
  std::string mechanism;
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string metric;  // "s_error" or "beta_error"
  double median = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
  double failure_rate = 0.0;
  bool unsupported = false;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;
  std::vector<SummaryRow> rows;
};

// The two provider datasets of one union-world trial ("y" first, then the
// features), drawn from a per-trial covariance.
struct UnionWorld {
  std::vector<std::string> names;
  Eigen::MatrixXd cov;
  Dataset d0;
  Dataset d1;
};

UnionWorld make_union_world(const ExperimentConfig& cfg, const FixedParams& p,
                            std::size_t trial);

// Worlds are seeded by (seed, trial) and mechanism noise by (seed, trial,
// mechanism), independent of the sweep value and of `threads`.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1);

std::string to_csv(const ExperimentResult& result);
std::vector<SummaryRow> parse_summary_csv(std::string_view csv);
// Line chart of the medians of one metric, one polyline per mechanism.
std::string render_svg(const std::vector<SummaryRow>& rows,
                       const std::string& metric);

// Shortest round-trip decimal; "inf", "-inf", "nan" for non-finite values.
std::string format_double(double v);

}  // namespace dpsearch

#endif  // DPSEARCH_BENCH_H_
