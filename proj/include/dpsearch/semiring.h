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

#ifndef DPSEARCH_SEMIRING_H_
#define DPSEARCH_SEMIRING_H_

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsearch/relation.h"

namespace dpsearch {

// Sorted multiset of feature indices; {0, 0, 1} is f0^2*f1, {} is the count.
using Monomial = std::vector<int>;

// All monomials of degree 0..k over a feature list, in canonical order:
// by degree, then lexicographically by sorted index multiset. Shared by the
// vectors built over it.
class MonomialBasis {
 public:
  static std::shared_ptr<const MonomialBasis> make(
      std::vector<std::string> features, int order);

  const std::vector<std::string>& features() const { return features_; }
  int order() const { return order_; }
  std::size_t size() const { return keys_.size(); }
  const Monomial& key(std::size_t i) const { return keys_[i]; }
  int degree(std::size_t i) const { return static_cast<int>(keys_[i].size()); }

  std::optional<std::size_t> find(const Monomial& m) const;
  // Looks a monomial up by feature names, e.g. {"x1", "x1", "x2"}.
  std::optional<std::size_t> find_names(
      std::span<const std::string> names) const;
  // Throws SchemaError when the monomial is not in the basis.
  std::size_t index_of(std::string_view monomial_string) const;

  // "1" for the count, otherwise e.g. "x1^2*x2".
  std::string name(std::size_t i) const;
  std::optional<Monomial> parse(std::string_view monomial_string) const;

  // For index i > 0: the monomial with the last factor removed, and that
  // factor. Used to annotate a row with one multiplication per entry.
  std::size_t parent(std::size_t i) const { return parent_[i]; }
  int last_factor(std::size_t i) const { return last_[i]; }

  bool same_as(const MonomialBasis& other) const {
    return this == &other ||
           (order_ == other.order_ && features_ == other.features_);
  }

 private:
  MonomialBasis() = default;

  std::vector<std::string> features_;
  int order_ = 0;
  std::vector<Monomial> keys_;
  std::map<Monomial, std::size_t> index_;
  std::vector<std::size_t> parent_;
  std::vector<int> last_;
};

using BasisPtr = std::shared_ptr<const MonomialBasis>;

// Dense dictionary of monomial aggregates. Entry 0 is the count.
class SemiringVector {
 public:
  SemiringVector() = default;
  explicit SemiringVector(BasisPtr basis);
  SemiringVector(BasisPtr basis, std::vector<double> values);

  static SemiringVector zero(std::vector<std::string> features, int order);
  static SemiringVector one(std::vector<std::string> features, int order);

  const BasisPtr& basis() const { return basis_; }
  const std::vector<std::string>& features() const { return basis_->features(); }
  int order() const { return basis_->order(); }
  std::size_t size() const { return values_.size(); }

  double count() const { return values_[0]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  // Entry by monomial string ("x1^2*x2", "1"); throws SchemaError if absent
  // from the basis.
  double at(std::string_view monomial_string) const;
  // Entry by feature names; {} is the count.
  double at_names(std::initializer_list<std::string> names) const;

  // Same entries over a basis with the same features in another order.
  SemiringVector remap(const BasisPtr& target) const;

 private:
  BasisPtr basis_;
  std::vector<double> values_;
};

SemiringVector annotate(std::span<const double> features, const BasisPtr& basis);
SemiringVector annotate(std::span<const double> features,
                        std::vector<std::string> names, int order);
// Adds annotate(row) into out (same basis); no allocation.
void accumulate_row(const MonomialBasis& basis, std::span<const double> row,
                    std::span<double> out, std::vector<double>& scratch);

// Throws SchemaError on order or feature mismatch.
SemiringVector add(const SemiringVector& a, const SemiringVector& b);
// Graded product truncated at the common order. Feature lists must be equal
// or disjoint; the result's features are a's followed by b's new ones.
SemiringVector multiply(const SemiringVector& a, const SemiringVector& b);

// Precomputed index triples for multiplying vectors over two fixed bases.
class ProductPlan {
 public:
  ProductPlan(const BasisPtr& a, const BasisPtr& b);
  const BasisPtr& result_basis() const { return result_; }
  SemiringVector apply(const SemiringVector& a, const SemiringVector& b) const;

 private:
  struct Term {
    std::size_t a, b, out;
  };
  BasisPtr a_, b_, result_;
  std::vector<Term> terms_;
};

// E[p] = s[p] / s[c]; throws UndefinedStatistics when the count is not
// positive and finite.
SemiringVector statistics(const SemiringVector& s);

// Group vectors aligned with the join-key domain, or one group when the
// relation is union-only.
class AnnotatedRelation {
 public:
  AnnotatedRelation() = default;
  // Unkeyed relation with a single group.
  explicit AnnotatedRelation(SemiringVector single);
  // Keyed relation; one group per domain value, in domain order.
  AnnotatedRelation(JoinKey key, std::vector<SemiringVector> groups);

  bool keyed() const { return key_.has_value(); }
  const std::optional<JoinKey>& key() const { return key_; }
  const std::vector<SemiringVector>& groups() const { return groups_; }
  std::vector<SemiringVector>& groups() { return groups_; }
  const SemiringVector& group(std::size_t i) const { return groups_[i]; }
  const SemiringVector& group(std::string_view key_value) const;
  const BasisPtr& basis() const { return groups_.front().basis(); }
  const std::vector<std::string>& features() const { return basis()->features(); }
  int order() const { return basis()->order(); }

  // Sum of all groups.
  SemiringVector total() const;
  // Single-group relation holding total().
  AnnotatedRelation marginalize() const;
  // Reindexes groups to `domain`; values missing here become zero groups,
  // values absent from `domain` are dropped.
  AnnotatedRelation align_to(const JoinKey& key) const;

 private:
  std::optional<JoinKey> key_;
  std::vector<SemiringVector> groups_;
};

// Groups by the dataset's join key when it has one and use_key is set.
// Rows are summed sequentially in row order, so results are reproducible.
AnnotatedRelation aggregate(const Dataset& ds, int order, bool use_key = true);
// Per-key multiply; both relations keyed over the same domain, or both
// unkeyed (cartesian product).
AnnotatedRelation join_aggregate(const AnnotatedRelation& r1,
                                 const AnnotatedRelation& r2);
// Left fold of join_aggregate.
AnnotatedRelation join_aggregate(std::span<const AnnotatedRelation> rs);
// Per-key (or single-group) add; the feature sets must match as sets.
AnnotatedRelation union_aggregate(const AnnotatedRelation& r1,
                                  const AnnotatedRelation& r2);

}  // namespace dpsearch

#endif  // DPSEARCH_SEMIRING_H_
