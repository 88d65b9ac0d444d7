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

#include "dpsearch/mechanisms.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dpsearch/errors.h"

namespace dpsearch {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct NameEntry {
  MechanismKind kind;
  std::string_view name;
};

constexpr NameEntry kNames[] = {
    {MechanismKind::kNone, "none"},
    {MechanismKind::kFpm, "fpm"},
    {MechanismKind::kFpmOpt, "fpm-opt"},
    {MechanismKind::kFpmUnionOpt, "fpm-union-opt"},
    {MechanismKind::kTpm, "tpm"},
    {MechanismKind::kApm, "apm"},
    {MechanismKind::kSf1, "sf1"},
    {MechanismKind::kSf2, "sf2"},
};

double draw(NoiseSampler& sampler, CounterRng stream, const NoiseSpec& spec) {
  return spec.distribution == NoiseDistribution::kGaussian
             ? sampler.gaussian(stream, spec.scale)
             : sampler.laplace(stream, spec.scale);
}

void check_key(const Dataset& ds, const std::optional<std::string>& join_key) {
  if (!join_key) return;
  if (!ds.has_key() || ds.schema().join_key()->name != *join_key) {
    throw SchemaError("dataset has no join key named " + *join_key);
  }
}

void check_order(int k) {
  if (k < 1) throw PreconditionError("order k must be >= 1");
}

PrivatizedStats base_release(MechanismKind kind, const Dataset& ds, int k,
                             bool join_mode, const CounterRng& stream) {
  PrivatizedStats out;
  out.mechanism = kind;
  out.order = k;
  out.norm_bound = ds.norm_bound();
  out.cardinality = ds.rows();
  out.join_mode = join_mode;
  out.seed_fingerprint = mix64(stream.key());
  return out;
}

// Adds noise to every entry of degree >= min_degree in every group.
std::uint64_t perturb(AnnotatedRelation& rel, int min_degree,
                      const NoiseSpec& spec, const CounterRng& stream) {
  NoiseSampler sampler;
  const MonomialBasis& basis = *rel.basis();
  for (std::size_t g = 0; g < rel.groups().size(); ++g) {
    CounterRng gs = stream.substream(g);
    for (std::size_t j = 0; j < basis.size(); ++j) {
      if (basis.degree(j) < min_degree) continue;
      rel.groups()[g][j] += draw(sampler, gs.substream(j), spec);
    }
  }
  return sampler.draws();
}

double log_gaussian_scale(double log_delta_q, double log_eps, double log_delta) {
  return 0.5 * std::log(2.0 * (std::log(1.25) - log_delta)) + log_delta_q -
         log_eps;
}

// log(2^n - 1) for n >= 1.
double log_pow2_minus_one(std::size_t n) {
  const double nl = static_cast<double>(n) * std::log(2.0);
  return nl + std::log1p(-std::exp(-nl));
}

}  // namespace

std::string_view mechanism_name(MechanismKind kind) {
  for (const auto& e : kNames) {
    if (e.kind == kind) return e.name;
  }
  return "unknown";
}

std::optional<MechanismKind> parse_mechanism(std::string_view name) {
  for (const auto& e : kNames) {
    if (e.name == name) return e.kind;
  }
  return std::nullopt;
}

void PrivacyBudget::validate() const {
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw BudgetError("epsilon must be a positive finite number");
  }
  if (!(delta >= 0 && delta < 1)) {
    throw BudgetError("delta must lie in [0, 1)");
  }
}

double NoiseSpec::stddev() const {
  return distribution == NoiseDistribution::kGaussian ? scale
                                                      : std::sqrt(2.0) * scale;
}

double sensitivity(int k, std::size_t num_features, double B,
                   AggregationMode mode) {
  check_order(k);
  if (B < 0) throw PreconditionError("norm bound must be >= 0");
  double sum = 0.0;
  for (int i = 1; i <= k; ++i) {
    double w = (i % 2 == 1) ? 4.0 : (num_features == 1 ? 1.0 : 2.0);
    sum += w * std::pow(B, 2 * i);
  }
  double union_delta = std::sqrt(sum);
  if (mode == AggregationMode::kUnion) return union_delta;
  double key_change = 0.0;
  for (int i = 0; i <= k; ++i) key_change += std::pow(B, 2 * i);
  return std::max(union_delta, std::sqrt(2.0 * key_change));
}

double l1_sensitivity(int k, std::size_t num_features, double B,
                      AggregationMode mode) {
  check_order(k);
  if (B < 0) throw PreconditionError("norm bound must be >= 0");
  const double r = std::sqrt(static_cast<double>(num_features)) * B;
  double union_delta = 0.0;
  for (int i = 1; i <= k; ++i) {
    double c = (i % 2 == 0 && num_features == 1) ? 1.0 : 2.0;
    union_delta += c * std::pow(r, i);
  }
  if (mode == AggregationMode::kUnion) return union_delta;
  double key_change = 0.0;
  for (int i = 0; i <= k; ++i) key_change += 2.0 * std::pow(r, i);
  return std::max(union_delta, key_change);
}

double order_sensitivity(int i, double B) {
  return (i % 2 == 1 ? 2.0 : std::sqrt(2.0)) * std::pow(B, i);
}

double order_l1_sensitivity(int i, std::size_t num_features, double B) {
  return 2.0 * std::pow(std::sqrt(static_cast<double>(num_features)) * B, i);
}

NoiseSpec make_noise(const PrivacyBudget& budget, double delta_q) {
  budget.validate();
  if (!(delta_q > 0) || !std::isfinite(delta_q)) {
    throw PreconditionError("sensitivity must be positive and finite");
  }
  NoiseSpec spec;
  spec.sensitivity = delta_q;
  if (budget.pure()) {
    spec.distribution = NoiseDistribution::kLaplace;
    spec.scale = delta_q / budget.epsilon;
  } else {
    spec.distribution = NoiseDistribution::kGaussian;
    spec.scale =
        std::sqrt(2.0 * std::log(1.25 / budget.delta)) * delta_q / budget.epsilon;
  }
  return spec;
}

ApmSplit apm_split(const PrivacyBudget& total, const ApmContext& ctx) {
  total.validate();
  if (ctx.n_corp < 1 || ctx.n_req < 1) {
    throw PreconditionError("n_corp and n_req must be >= 1");
  }
  const double divisor =
      std::max(log_pow2_minus_one(ctx.n_corp),
               std::log(static_cast<double>(ctx.n_req)) +
                   static_cast<double>(ctx.n_corp - 1) * std::log(2.0));
  ApmSplit s;
  s.log_epsilon = std::log(total.epsilon) - divisor;
  s.log_delta = total.delta > 0 ? std::log(total.delta) - divisor : -kInf;
  s.budget.epsilon = std::exp(s.log_epsilon);
  s.budget.delta = std::exp(s.log_delta);
  return s;
}

PrivatizedStats no_privacy(const Dataset& ds,
                           const std::optional<std::string>& join_key, int k) {
  check_order(k);
  check_key(ds, join_key);
  PrivatizedStats out = base_release(MechanismKind::kNone, ds, k,
                                     join_key.has_value(), CounterRng(0));
  out.budget = {0.0, 0.0};
  out.stats = aggregate(ds, k, join_key.has_value());
  return out;
}

PrivatizedStats fpm_privatize(const Dataset& ds,
                              const std::optional<std::string>& join_key, int k,
                              const PrivacyBudget& budget,
                              const CounterRng& stream,
                              const MechanismOptions& options) {
  check_order(k);
  budget.validate();
  check_key(ds, join_key);
  const bool join = join_key.has_value();
  const auto mode = join ? AggregationMode::kJoin : AggregationMode::kUnion;
  const std::size_t m = ds.cols();
  const double B = ds.norm_bound();
  const double dq = budget.pure() ? l1_sensitivity(k, m, B, mode)
                                  : sensitivity(k, m, B, mode);
  NoiseSpec spec = make_noise(budget, dq);

  PrivatizedStats out = base_release(MechanismKind::kFpm, ds, k, join, stream);
  out.stats = aggregate(ds, k, join);
  out.budget = budget;
  out.spends = {{"all monomials", budget.epsilon, budget.delta}};
  out.noise = {spec};
  out.log_noise_scale = std::log(spec.scale);
  if (options.inject_noise) {
    // Bounded DP: n is public, so the union path leaves the count exact.
    out.noise_draws = perturb(out.stats, join ? 0 : 1, spec, stream);
  }
  return out;
}

PrivatizedStats fpm_opt_privatize(const Dataset& ds, const std::string& join_key,
                                  int k, const PrivacyBudget& budget,
                                  const CounterRng& stream,
                                  const MechanismOptions& options) {
  check_order(k);
  budget.validate();
  if (!ds.has_key()) {
    throw UnsupportedError("fpm-opt needs a join key");
  }
  check_key(ds, join_key);
  const std::size_t m = ds.cols();
  const double B = ds.norm_bound();
  const PrivacyBudget part{budget.epsilon / (k + 1), budget.delta / (k + 1)};

  PrivatizedStats out = base_release(MechanismKind::kFpmOpt, ds, k, true, stream);
  out.stats = aggregate(ds, k, true);
  out.budget = budget;
  double max_scale = 0.0;
  for (int i = 0; i <= k; ++i) {
    const double dq = budget.pure() ? order_l1_sensitivity(i, m, B)
                                    : order_sensitivity(i, B);
    out.noise.push_back(make_noise(part, dq));
    out.spends.push_back(
        {"order " + std::to_string(i), part.epsilon, part.delta});
    max_scale = std::max(max_scale, out.noise.back().scale);
  }
  out.log_noise_scale = std::log(max_scale);
  if (options.inject_noise) {
    NoiseSampler sampler;
    const MonomialBasis& basis = *out.stats.basis();
    for (std::size_t g = 0; g < out.stats.groups().size(); ++g) {
      CounterRng gs = stream.substream(g);
      for (std::size_t j = 0; j < basis.size(); ++j) {
        const NoiseSpec& spec = out.noise[static_cast<std::size_t>(basis.degree(j))];
        out.stats.groups()[g][j] += draw(sampler, gs.substream(j), spec);
      }
    }
    out.noise_draws = sampler.draws();
  }
  return out;
}

double grr_keep_probability(double epsilon, std::size_t d) {
  if (d <= 1) return 1.0;
  // e^eps / (e^eps + d - 1), written to stay finite for large epsilon.
  return 1.0 / (1.0 + static_cast<double>(d - 1) * std::exp(-epsilon));
}

PrivatizedStats tpm_privatize(const Dataset& ds,
                              const std::optional<std::string>& join_key, int k,
                              const PrivacyBudget& budget,
                              const CounterRng& stream,
                              const MechanismOptions& options) {
  check_order(k);
  budget.validate();
  check_key(ds, join_key);
  const bool join = join_key.has_value();
  const std::size_t m = ds.cols();
  const double B = ds.norm_bound();
  const PrivacyBudget feature_budget{join ? budget.epsilon / 2 : budget.epsilon,
                                     budget.delta};
  const double key_epsilon = budget.epsilon / 2;
  const double dq = budget.pure()
                        ? l1_sensitivity(k, m, B, AggregationMode::kUnion)
                        : sensitivity(k, m, B, AggregationMode::kUnion);
  NoiseSpec spec = make_noise(feature_budget, dq);

  PrivatizedStats out = base_release(MechanismKind::kTpm, ds, k, join, stream);
  out.budget = budget;
  out.noise = {spec};
  out.log_noise_scale = std::log(spec.scale);
  out.spends.push_back(
      {"tuple monomials", feature_budget.epsilon, feature_budget.delta});
  if (join) out.spends.push_back({"join keys", key_epsilon, 0.0});

  BasisPtr basis = MonomialBasis::make(ds.schema().feature_names(), k);
  const std::size_t d = join ? ds.schema().join_key()->domain.size() : 1;
  std::vector<SemiringVector> groups(d, SemiringVector(basis));
  const double keep = grr_keep_probability(key_epsilon, d);
  NoiseSampler sampler;
  std::vector<double> tuple(basis->size());
  std::vector<double> scratch;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    CounterRng rs = stream.substream(r);
    std::fill(tuple.begin(), tuple.end(), 0.0);
    accumulate_row(*basis, ds.row(r), tuple, scratch);
    if (options.inject_noise) {
      for (std::size_t j = 1; j < tuple.size(); ++j) {
        tuple[j] += draw(sampler, rs.substream(j), spec);
      }
    }
    std::size_t g = 0;
    if (join) {
      g = ds.keys()[r];
      if (options.randomize_keys && d > 1) {
        CounterRng ks = rs.substream(std::string_view("key"));
        if (ks.uniform() >= keep) {
          auto other = static_cast<std::size_t>(ks.uniform() *
                                                static_cast<double>(d - 1));
          other = std::min(other, d - 2);
          g = other >= g ? other + 1 : other;
        }
      }
    }
    for (std::size_t j = 0; j < tuple.size(); ++j) groups[g][j] += tuple[j];
  }
  out.noise_draws = sampler.draws();
  if (join) {
    out.stats = AnnotatedRelation(*ds.schema().join_key(), std::move(groups));
  } else {
    out.stats = AnnotatedRelation(std::move(groups.front()));
  }
  return out;
}

PrivatizedStats apm_privatize(const AnnotatedRelation& aggregated, double B,
                              std::size_t cardinality,
                              const PrivacyBudget& budget, const ApmContext& ctx,
                              const CounterRng& stream,
                              const MechanismOptions& options) {
  const ApmSplit split = apm_split(budget, ctx);
  const bool join = ctx.max_join_frequency.has_value();
  if (join && !(*ctx.max_join_frequency >= 1)) {
    throw PreconditionError("max join frequency must be >= 1");
  }
  const int k = aggregated.order();
  const std::size_t m = aggregated.features().size();
  const auto mode = join ? AggregationMode::kJoin : AggregationMode::kUnion;
  double dq = budget.pure() ? l1_sensitivity(k, m, B, mode)
                            : sensitivity(k, m, B, mode);
  if (join) dq *= *ctx.max_join_frequency;
  if (!(dq > 0)) throw PreconditionError("sensitivity must be positive");

  NoiseSpec spec;
  spec.sensitivity = dq;
  double log_scale = 0.0;
  if (budget.pure()) {
    spec.distribution = NoiseDistribution::kLaplace;
    log_scale = std::log(dq) - split.log_epsilon;
  } else {
    spec.distribution = NoiseDistribution::kGaussian;
    log_scale = log_gaussian_scale(std::log(dq), split.log_epsilon, split.log_delta);
  }
  spec.scale = std::exp(log_scale);

  PrivatizedStats out;
  out.mechanism = MechanismKind::kApm;
  out.order = k;
  out.norm_bound = B;
  out.cardinality = cardinality;
  out.join_mode = join;
  out.seed_fingerprint = mix64(stream.key());
  out.stats = aggregated;
  out.budget = split.budget;
  out.spends = {{"augmentation share", split.budget.epsilon, split.budget.delta}};
  out.noise = {spec};
  out.log_noise_scale = log_scale;
  // Information-free release: noise six orders of magnitude above the
  // largest entry any bounded dataset of this size could produce.
  const double log_signal =
      std::log(std::max<double>(1.0, static_cast<double>(cardinality))) +
      std::max(0.0, k * std::log(std::max(B, 1e-300)));
  out.guaranteed_failure = log_scale > std::log(1e6) + log_signal;
  if (options.inject_noise) {
    if (std::isfinite(spec.scale)) {
      out.noise_draws = perturb(out.stats, join ? 0 : 1, spec, stream);
    } else {
      for (auto& g : out.stats.groups()) {
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (g.basis()->degree(j) >= (join ? 0 : 1)) {
            g[j] = std::numeric_limits<double>::quiet_NaN();
          }
        }
      }
    }
  }
  return out;
}

PrivatizedStats shuffle_privatize(const Dataset& ds, const PrivacyBudget& budget,
                                  ShuffleLevel level,
                                  const std::optional<ApmContext>& ctx, int k,
                                  const CounterRng& stream,
                                  const MechanismOptions& options) {
  check_order(k);
  budget.validate();
  if (budget.pure()) {
    throw UnsupportedError(
        "shuffling only yields approximate DP; pure DP (delta = 0) is "
        "unsupported");
  }
  if (level == ShuffleLevel::kSf2 && ds.has_key()) {
    throw UnsupportedError("sf2 does not support join keys");
  }
  PrivacyBudget base = budget;
  if (level == ShuffleLevel::kSf2) {
    if (!ctx) throw PreconditionError("sf2 needs n_corp and n_req");
    base = apm_split(budget, *ctx).budget;
  }
  const double n = static_cast<double>(ds.rows());
  const PrivacyBudget local{base.epsilon / std::sqrt(n), base.delta};
  const std::size_t m = ds.cols();
  const double dq = l1_sensitivity(k, m, ds.norm_bound(), AggregationMode::kUnion);
  NoiseSpec spec;
  spec.distribution = NoiseDistribution::kLaplace;
  spec.sensitivity = dq;
  spec.scale = dq / local.epsilon;

  PrivatizedStats out = base_release(
      level == ShuffleLevel::kSf1 ? MechanismKind::kSf1 : MechanismKind::kSf2,
      ds, k, false, stream);
  out.budget = base;
  out.spends = {{"local responses", base.epsilon, base.delta}};
  out.noise = {spec};
  out.log_noise_scale = std::log(spec.scale);

  BasisPtr basis = MonomialBasis::make(ds.schema().feature_names(), k);
  std::vector<std::vector<double>> tuples(ds.rows());
  NoiseSampler sampler;
  std::vector<double> scratch;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    tuples[r].assign(basis->size(), 0.0);
    accumulate_row(*basis, ds.row(r), tuples[r], scratch);
    if (options.inject_noise) {
      CounterRng rs = stream.substream(r);
      for (std::size_t j = 1; j < basis->size(); ++j) {
        tuples[r][j] += draw(sampler, rs.substream(j), spec);
      }
    }
  }
  out.noise_draws = sampler.draws();
  std::vector<std::size_t> order(ds.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng shuffle_stream = stream.substream(std::string_view("shuffle"));
  std::shuffle(order.begin(), order.end(), shuffle_stream);
  SemiringVector total(basis);
  for (std::size_t r : order) {
    for (std::size_t j = 0; j < basis->size(); ++j) total[j] += tuples[r][j];
  }
  out.stats = AnnotatedRelation(std::move(total));
  return out;
}

double union_opt_sensitivity(std::size_t n, double B, bool pure) {
  const double per = 4.0 * B * B / static_cast<double>(n);
  return pure ? 2.0 * per : std::sqrt(2.0) * per;
}

PrivatizedMoments fpm_union_opt_privatize(const Dataset& ds,
                                          const std::string& target,
                                          const PrivacyBudget& budget,
                                          const CounterRng& stream,
                                          const MechanismOptions& options) {
  budget.validate();
  if (ds.has_key()) {
    throw UnsupportedError("fpm-union-opt is union-only; drop the join key");
  }
  if (ds.cols() != 2) {
    throw PreconditionError(
        "fpm-union-opt needs exactly one feature and the target");
  }
  auto t = ds.schema().feature_index(target);
  if (!t) throw SchemaError("unknown target column: " + target);
  if (ds.rows() < 2) throw PreconditionError("fpm-union-opt needs n >= 2");
  const Eigen::Index ti = static_cast<Eigen::Index>(*t);
  const Eigen::Index xi = 1 - ti;
  const double n = static_cast<double>(ds.rows());
  Eigen::VectorXd x = ds.features().col(xi);
  Eigen::VectorXd y = ds.features().col(ti);
  x.array() -= x.mean();
  y.array() -= y.mean();

  PrivatizedMoments out;
  out.feature = ds.schema().feature_names()[static_cast<std::size_t>(xi)];
  out.target = target;
  out.n = ds.rows();
  out.norm_bound = ds.norm_bound();
  out.var_x = x.squaredNorm() / n;
  out.cov_xy = x.dot(y) / n;
  out.budget = budget;
  out.seed_fingerprint = mix64(stream.key());
  out.noise = make_noise(
      budget, union_opt_sensitivity(ds.rows(), ds.norm_bound(), budget.pure()));
  if (options.inject_noise) {
    NoiseSampler sampler;
    out.var_x += draw(sampler, stream.substream(0), out.noise);
    out.cov_xy += draw(sampler, stream.substream(1), out.noise);
  }
  return out;
}

PrivatizedMoments combine_moments(std::span<const PrivatizedMoments> parts) {
  if (parts.empty()) throw PreconditionError("no moments to combine");
  PrivatizedMoments out = parts.front();
  double total = 0.0, var = 0.0, cov = 0.0;
  for (const auto& p : parts) {
    if (p.feature != out.feature || p.target != out.target) {
      throw SchemaError("moments over different columns");
    }
    const double w = static_cast<double>(p.n);
    total += w;
    var += w * p.var_x;
    cov += w * p.cov_xy;
  }
  out.var_x = var / total;
  out.cov_xy = cov / total;
  out.n = static_cast<std::size_t>(total);
  return out;
}

void BudgetLedger::record(const std::string& dataset_id,
                          const std::string& mechanism,
                          const std::vector<BudgetSpend>& spends) {
  std::lock_guard<std::mutex> lock(mu_);
  auto& list = entries_[dataset_id];
  for (const auto& s : spends) list.push_back({mechanism, s});
}

void BudgetLedger::record(const std::string& dataset_id,
                          const PrivatizedStats& stats) {
  record(dataset_id, std::string(mechanism_name(stats.mechanism)), stats.spends);
}

PrivacyBudget BudgetLedger::spent(const std::string& dataset_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  PrivacyBudget total{0.0, 0.0};
  auto it = entries_.find(dataset_id);
  if (it == entries_.end()) return total;
  for (const auto& e : it->second) {
    total.epsilon += e.spend.epsilon;
    total.delta += e.spend.delta;
  }
  return total;
}

bool BudgetLedger::balanced(const std::string& dataset_id,
                            const PrivacyBudget& declared) const {
  PrivacyBudget s = spent(dataset_id);
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
  };
  return close(s.epsilon, declared.epsilon) && close(s.delta, declared.delta);
}

std::string BudgetLedger::summary(const std::string& dataset_id) const {
  PrivacyBudget s = spent(dataset_id);
  std::lock_guard<std::mutex> lock(mu_);
  auto shortest = [](double v) {
    char buf[64];
    return std::string(buf, std::to_chars(buf, buf + sizeof(buf), v).ptr);
  };
  std::ostringstream os;
  os << "ledger: dataset=" << dataset_id;
  auto it = entries_.find(dataset_id);
  if (it != entries_.end() && !it->second.empty()) {
    os << " mechanism=" << it->second.front().mechanism;
    os << " splits=" << it->second.size();
  }
  os << " epsilon=" << shortest(s.epsilon) << " delta=" << shortest(s.delta);
  return os.str();
}

}  // namespace dpsearch
