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

#ifndef DPSEARCH_MECHANISMS_H_
#define DPSEARCH_MECHANISMS_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsearch/relation.h"
#include "dpsearch/rng.h"
#include "dpsearch/semiring.h"

namespace dpsearch {

enum class MechanismKind { kNone, kFpm, kFpmOpt, kFpmUnionOpt, kTpm, kApm, kSf1, kSf2 };

std::string_view mechanism_name(MechanismKind kind);
std::optional<MechanismKind> parse_mechanism(std::string_view name);

// delta = 0 selects pure DP (Laplace noise, l1 sensitivities).
struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 1e-6;

  // Throws BudgetError unless epsilon > 0 and 0 <= delta < 1.
  void validate() const;
  bool pure() const { return delta == 0.0; }
};

enum class NoiseDistribution { kGaussian, kLaplace };

struct NoiseSpec {
  NoiseDistribution distribution = NoiseDistribution::kGaussian;
  double scale = 0.0;        // sigma, or b for Laplace
  double sensitivity = 0.0;  // l2 for Gaussian, l1 for Laplace

  double stddev() const;
};

enum class AggregationMode { kUnion, kJoin };

// l2 sensitivity of the degree 1..k monomials (union) or of all groups'
// degree 0..k monomials (join) under a one-tuple change.
double sensitivity(int k, std::size_t num_features, double B,
                   AggregationMode mode);
// l1 counterpart used in pure-DP mode. A degree-i block has l1 norm at most
// (sqrt(m) B)^i per tuple.
double l1_sensitivity(int k, std::size_t num_features, double B,
                      AggregationMode mode);
// Per-order sensitivity for the order-split mechanism: 2 B^i for odd i,
// sqrt(2) B^i for even i.
double order_sensitivity(int i, double B);
double order_l1_sensitivity(int i, std::size_t num_features, double B);

// sigma = sqrt(2 ln(1.25/delta)) * Delta / epsilon, or b = Delta / epsilon
// when delta = 0.
NoiseSpec make_noise(const PrivacyBudget& budget, double delta_q);

struct MechanismOptions {
  bool inject_noise = true;
  bool randomize_keys = true;  // generalized randomized response for keys
};

struct BudgetSpend {
  std::string label;
  double epsilon = 0.0;
  double delta = 0.0;
};

// Output of a privatization. Everything computed from it afterwards is
// post-processing.
struct PrivatizedStats {
  AnnotatedRelation stats;
  MechanismKind mechanism = MechanismKind::kNone;
  PrivacyBudget budget;             // total spent by this release
  std::vector<BudgetSpend> spends;  // splits, summing to budget
  int order = 0;
  double norm_bound = 0.0;
  std::size_t cardinality = 0;      // public n
  bool join_mode = false;
  std::vector<NoiseSpec> noise;     // one per split that draws noise
  double log_noise_scale = 0.0;     // natural log of the largest scale
  bool guaranteed_failure = false;
  std::uint64_t seed_fingerprint = 0;
  std::uint64_t noise_draws = 0;
};

struct ApmContext {
  std::size_t n_corp = 1;
  std::size_t n_req = 1;
  // Join mode when set: the largest number of rows sharing a key value.
  std::optional<double> max_join_frequency;
};

// Per-augmentation budget min(eps/(2^nc - 1), eps/(n_req 2^(nc-1))), and
// likewise for delta, evaluated in log space.
struct ApmSplit {
  double log_epsilon = 0.0;
  double log_delta = 0.0;  // -inf when delta = 0
  PrivacyBudget budget;    // exp of the logs; may underflow to 0
};
ApmSplit apm_split(const PrivacyBudget& total, const ApmContext& ctx);

// Noise-free aggregate wrapped as a release (debug and baseline path).
PrivatizedStats no_privacy(const Dataset& ds,
                           const std::optional<std::string>& join_key, int k);

PrivatizedStats fpm_privatize(const Dataset& ds,
                              const std::optional<std::string>& join_key, int k,
                              const PrivacyBudget& budget,
                              const CounterRng& stream,
                              const MechanismOptions& options = {});

PrivatizedStats fpm_opt_privatize(const Dataset& ds, const std::string& join_key,
                                  int k, const PrivacyBudget& budget,
                                  const CounterRng& stream,
                                  const MechanismOptions& options = {});

PrivatizedStats tpm_privatize(const Dataset& ds,
                              const std::optional<std::string>& join_key, int k,
                              const PrivacyBudget& budget,
                              const CounterRng& stream,
                              const MechanismOptions& options = {});

// Probability of reporting the true key under generalized randomized
// response with budget epsilon over d values.
double grr_keep_probability(double epsilon, std::size_t d);

// `aggregated` is the trusted aggregator's already-augmented statistics over
// `cardinality` rows whose norms are bounded by B.
PrivatizedStats apm_privatize(const AnnotatedRelation& aggregated, double B,
                              std::size_t cardinality,
                              const PrivacyBudget& budget, const ApmContext& ctx,
                              const CounterRng& stream,
                              const MechanismOptions& options = {});

enum class ShuffleLevel { kSf1, kSf2 };

PrivatizedStats shuffle_privatize(const Dataset& ds, const PrivacyBudget& budget,
                                  ShuffleLevel level,
                                  const std::optional<ApmContext>& ctx, int k,
                                  const CounterRng& stream,
                                  const MechanismOptions& options = {});

// Variance of one feature and its covariance with the target (both with
// 1/n normalisation), noised directly.
struct PrivatizedMoments {
  std::string feature;
  std::string target;
  double var_x = 0.0;
  double cov_xy = 0.0;
  std::size_t n = 0;
  double norm_bound = 0.0;
  NoiseSpec noise;
  PrivacyBudget budget;
  std::uint64_t seed_fingerprint = 0;
};

// Sensitivity of the released (var, cov) pair: l2 4 sqrt(2) B^2 / n,
// l1 8 B^2 / n.
double union_opt_sensitivity(std::size_t n, double B, bool pure);

PrivatizedMoments fpm_union_opt_privatize(const Dataset& ds,
                                          const std::string& target,
                                          const PrivacyBudget& budget,
                                          const CounterRng& stream,
                                          const MechanismOptions& options = {});
// Count-weighted average across unioned datasets.
PrivatizedMoments combine_moments(std::span<const PrivatizedMoments> parts);

// Records per-dataset spends; the only shared mutable state of the
// mechanisms, so updates are serialised.
class BudgetLedger {
 public:
  void record(const std::string& dataset_id, const std::string& mechanism,
              const std::vector<BudgetSpend>& spends);
  void record(const std::string& dataset_id, const PrivatizedStats& stats);
  PrivacyBudget spent(const std::string& dataset_id) const;
  // True when the recorded spends sum to `declared` (1e-12 relative).
  bool balanced(const std::string& dataset_id,
                const PrivacyBudget& declared) const;
  std::string summary(const std::string& dataset_id) const;

 private:
  struct Entry {
    std::string mechanism;
    BudgetSpend spend;
  };
  mutable std::mutex mu_;
  std::map<std::string, std::vector<Entry>> entries_;
};

}  // namespace dpsearch

#endif  // DPSEARCH_MECHANISMS_H_
