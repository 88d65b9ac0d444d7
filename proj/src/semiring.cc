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

#include "dpsearch/semiring.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "dpsearch/errors.h"

namespace dpsearch {
namespace {

// Appends all nondecreasing index sequences of length `degree` over m
// features, in lexicographic order.
void enumerate(int m, int degree, Monomial& cur, std::vector<Monomial>& out) {
  if (static_cast<int>(cur.size()) == degree) {
    out.push_back(cur);
    return;
  }
  int start = cur.empty() ? 0 : cur.back();
  for (int f = start; f < m; ++f) {
    cur.push_back(f);
    enumerate(m, degree, cur, out);
    cur.pop_back();
  }
}

void require_same_basis(const SemiringVector& a, const SemiringVector& b,
                        const char* op) {
  if (a.order() != b.order()) {
    throw SchemaError(std::string(op) + ": order mismatch");
  }
  if (!a.basis()->same_as(*b.basis())) {
    throw SchemaError(std::string(op) + ": feature list mismatch");
  }
}

bool same_feature_set(const std::vector<std::string>& a,
                      const std::vector<std::string>& b) {
  return std::set<std::string>(a.begin(), a.end()) ==
             std::set<std::string>(b.begin(), b.end()) &&
         a.size() == b.size();
}

}  // namespace

BasisPtr MonomialBasis::make(std::vector<std::string> features, int order) {
  if (order < 0) throw PreconditionError("order must be >= 0");
  std::set<std::string> unique(features.begin(), features.end());
  if (unique.size() != features.size()) {
    throw SchemaError("duplicate feature names in monomial basis");
  }
  std::shared_ptr<MonomialBasis> b(new MonomialBasis());
  b->features_ = std::move(features);
  b->order_ = order;
  const int m = static_cast<int>(b->features_.size());
  for (int d = 0; d <= order; ++d) {
    Monomial cur;
    enumerate(m, d, cur, b->keys_);
    if (m == 0) break;
  }
  b->parent_.resize(b->keys_.size(), 0);
  b->last_.resize(b->keys_.size(), -1);
  for (std::size_t i = 0; i < b->keys_.size(); ++i) {
    b->index_.emplace(b->keys_[i], i);
  }
  for (std::size_t i = 1; i < b->keys_.size(); ++i) {
    Monomial p = b->keys_[i];
    b->last_[i] = p.back();
    p.pop_back();
    b->parent_[i] = b->index_.at(p);
  }
  return b;
}

std::optional<std::size_t> MonomialBasis::find(const Monomial& m) const {
  auto it = index_.find(m);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> MonomialBasis::find_names(
    std::span<const std::string> names) const {
  Monomial m;
  for (const auto& n : names) {
    auto it = std::find(features_.begin(), features_.end(), n);
    if (it == features_.end()) return std::nullopt;
    m.push_back(static_cast<int>(it - features_.begin()));
  }
  std::sort(m.begin(), m.end());
  return find(m);
}

std::string MonomialBasis::name(std::size_t i) const {
  const Monomial& m = keys_[i];
  if (m.empty()) return "1";
  std::string out;
  for (std::size_t j = 0; j < m.size();) {
    std::size_t e = j;
    while (e < m.size() && m[e] == m[j]) ++e;
    if (!out.empty()) out += '*';
    out += features_[static_cast<std::size_t>(m[j])];
    if (e - j > 1) out += "^" + std::to_string(e - j);
    j = e;
  }
  return out;
}

std::optional<Monomial> MonomialBasis::parse(std::string_view s) const {
  if (s == "1") return Monomial{};
  Monomial m;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t star = s.find('*', pos);
    if (star == std::string_view::npos) star = s.size();
    std::string_view part = s.substr(pos, star - pos);
    int exp = 1;
    std::size_t caret = part.find('^');
    std::string_view fname = part.substr(0, caret);
    if (caret != std::string_view::npos) {
      std::string_view es = part.substr(caret + 1);
      auto [p, ec] = std::from_chars(es.data(), es.data() + es.size(), exp);
      if (ec != std::errc() || p != es.data() + es.size() || exp < 1) {
        return std::nullopt;
      }
    }
    auto it = std::find(features_.begin(), features_.end(), fname);
    if (it == features_.end()) return std::nullopt;
    for (int e = 0; e < exp; ++e) {
      m.push_back(static_cast<int>(it - features_.begin()));
    }
    pos = star + 1;
  }
  std::sort(m.begin(), m.end());
  return m;
}

std::size_t MonomialBasis::index_of(std::string_view s) const {
  auto m = parse(s);
  std::optional<std::size_t> idx;
  if (m) idx = find(*m);
  if (!idx) throw SchemaError("monomial not in basis: " + std::string(s));
  return *idx;
}

SemiringVector::SemiringVector(BasisPtr basis)
    : basis_(std::move(basis)), values_(basis_->size(), 0.0) {}

SemiringVector::SemiringVector(BasisPtr basis, std::vector<double> values)
    : basis_(std::move(basis)), values_(std::move(values)) {
  if (values_.size() != basis_->size()) {
    throw SchemaError("value count does not match monomial basis");
  }
}

SemiringVector SemiringVector::zero(std::vector<std::string> features,
                                    int order) {
  return SemiringVector(MonomialBasis::make(std::move(features), order));
}

SemiringVector SemiringVector::one(std::vector<std::string> features,
                                   int order) {
  SemiringVector v = zero(std::move(features), order);
  v.values_[0] = 1.0;
  return v;
}

double SemiringVector::at(std::string_view monomial_string) const {
  return values_[basis_->index_of(monomial_string)];
}

double SemiringVector::at_names(std::initializer_list<std::string> names) const {
  std::vector<std::string> v(names);
  auto idx = basis_->find_names(v);
  if (!idx) throw SchemaError("monomial not in basis");
  return values_[*idx];
}

SemiringVector SemiringVector::remap(const BasisPtr& target) const {
  if (target->same_as(*basis_)) return SemiringVector(target, values_);
  if (target->order() != order() ||
      !same_feature_set(target->features(), features())) {
    throw SchemaError("remap: feature sets differ");
  }
  std::vector<int> to_target(features().size());
  for (std::size_t f = 0; f < features().size(); ++f) {
    to_target[f] = static_cast<int>(
        std::find(target->features().begin(), target->features().end(),
                  features()[f]) -
        target->features().begin());
  }
  SemiringVector out(target);
  for (std::size_t i = 0; i < size(); ++i) {
    Monomial m = basis_->key(i);
    for (int& f : m) f = to_target[static_cast<std::size_t>(f)];
    std::sort(m.begin(), m.end());
    out.values_[*target->find(m)] = values_[i];
  }
  return out;
}

void accumulate_row(const MonomialBasis& basis, std::span<const double> row,
                    std::span<double> out, std::vector<double>& scratch) {
  const std::size_t n = basis.size();
  scratch.resize(n);
  scratch[0] = 1.0;
  out[0] += 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    scratch[i] = scratch[basis.parent(i)] *
                 row[static_cast<std::size_t>(basis.last_factor(i))];
    out[i] += scratch[i];
  }
}

SemiringVector annotate(std::span<const double> features, const BasisPtr& basis) {
  if (features.size() != basis->features().size()) {
    throw SchemaError("annotate: row width does not match basis");
  }
  SemiringVector v(basis);
  std::vector<double> scratch;
  accumulate_row(*basis, features, v.values(), scratch);
  return v;
}

SemiringVector annotate(std::span<const double> features,
                        std::vector<std::string> names, int order) {
  if (order < 1) throw PreconditionError("annotate needs k >= 1");
  return annotate(features, MonomialBasis::make(std::move(names), order));
}

SemiringVector add(const SemiringVector& a, const SemiringVector& b) {
  require_same_basis(a, b, "add");
  SemiringVector out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

ProductPlan::ProductPlan(const BasisPtr& a, const BasisPtr& b) : a_(a), b_(b) {
  if (a->order() != b->order()) throw SchemaError("multiply: order mismatch");
  const auto& fa = a->features();
  const auto& fb = b->features();
  std::vector<int> b_to_out(fb.size());
  if (fa == fb) {
    result_ = a;
    for (std::size_t i = 0; i < fb.size(); ++i) b_to_out[i] = static_cast<int>(i);
  } else {
    std::set<std::string> sa(fa.begin(), fa.end());
    std::vector<std::string> out = fa;
    for (std::size_t i = 0; i < fb.size(); ++i) {
      if (sa.count(fb[i])) {
        throw SchemaError("multiply: feature lists overlap partially (" +
                          fb[i] + ")");
      }
      b_to_out[i] = static_cast<int>(out.size());
      out.push_back(fb[i]);
    }
    result_ = MonomialBasis::make(std::move(out), a->order());
  }
  const int k = a->order();
  Monomial merged;
  for (std::size_t i = 0; i < a->size(); ++i) {
    for (std::size_t j = 0; j < b->size(); ++j) {
      if (a->degree(i) + b->degree(j) > k) continue;
      merged = a->key(i);
      for (int f : b->key(j)) merged.push_back(b_to_out[static_cast<std::size_t>(f)]);
      std::sort(merged.begin(), merged.end());
      terms_.push_back({i, j, *result_->find(merged)});
    }
  }
}

SemiringVector ProductPlan::apply(const SemiringVector& a,
                                  const SemiringVector& b) const {
  if (!a.basis()->same_as(*a_) || !b.basis()->same_as(*b_)) {
    throw SchemaError("multiply: operand basis does not match plan");
  }
  SemiringVector out(result_);
  for (const Term& t : terms_) out[t.out] += a[t.a] * b[t.b];
  return out;
}

SemiringVector multiply(const SemiringVector& a, const SemiringVector& b) {
  return ProductPlan(a.basis(), b.basis()).apply(a, b);
}

SemiringVector statistics(const SemiringVector& s) {
  const double c = s.count();
  if (!(c > 0) || !std::isfinite(c)) {
    throw UndefinedStatistics("statistics undefined: count is not positive");
  }
  SemiringVector out = s;
  for (double& v : out.values()) v /= c;
  out[0] = 1.0;
  return out;
}

AnnotatedRelation::AnnotatedRelation(SemiringVector single) {
  groups_.push_back(std::move(single));
}

AnnotatedRelation::AnnotatedRelation(JoinKey key,
                                     std::vector<SemiringVector> groups)
    : key_(std::move(key)), groups_(std::move(groups)) {
  if (key_->domain.empty() || groups_.size() != key_->domain.size()) {
    throw SchemaError("groups must match the join-key domain exactly");
  }
  for (const auto& g : groups_) {
    if (!g.basis()->same_as(*groups_.front().basis())) {
      throw SchemaError("group vectors must share order and features");
    }
  }
}

const SemiringVector& AnnotatedRelation::group(std::string_view key_value) const {
  if (!key_) {
    if (key_value == "*") return groups_.front();
    throw SchemaError("relation is not keyed");
  }
  auto idx = key_->index_of(key_value);
  if (!idx) throw SchemaError("key value not in domain: " + std::string(key_value));
  return groups_[*idx];
}

SemiringVector AnnotatedRelation::total() const {
  SemiringVector out(basis());
  for (const auto& g : groups_) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
  }
  return out;
}

AnnotatedRelation AnnotatedRelation::marginalize() const {
  return AnnotatedRelation(total());
}

AnnotatedRelation AnnotatedRelation::align_to(const JoinKey& key) const {
  if (!key_) throw SchemaError("align_to: relation is not keyed");
  std::vector<SemiringVector> groups;
  groups.reserve(key.domain.size());
  for (const auto& v : key.domain) {
    auto idx = key_->index_of(v);
    groups.push_back(idx ? groups_[*idx] : SemiringVector(basis()));
  }
  return AnnotatedRelation(key, std::move(groups));
}

AnnotatedRelation aggregate(const Dataset& ds, int order, bool use_key) {
  if (order < 1) throw PreconditionError("aggregate needs k >= 1");
  BasisPtr basis = MonomialBasis::make(ds.schema().feature_names(), order);
  std::vector<double> scratch;
  if (!use_key || !ds.has_key()) {
    SemiringVector s(basis);
    for (std::size_t r = 0; r < ds.rows(); ++r) {
      accumulate_row(*basis, ds.row(r), s.values(), scratch);
    }
    return AnnotatedRelation(std::move(s));
  }
  const JoinKey& key = *ds.schema().join_key();
  std::vector<SemiringVector> groups(key.domain.size(), SemiringVector(basis));
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    accumulate_row(*basis, ds.row(r), groups[ds.keys()[r]].values(), scratch);
  }
  return AnnotatedRelation(key, std::move(groups));
}

AnnotatedRelation join_aggregate(const AnnotatedRelation& r1,
                                 const AnnotatedRelation& r2) {
  ProductPlan plan(r1.basis(), r2.basis());
  if (r1.keyed() != r2.keyed()) {
    throw SchemaError("join: one relation is keyed and the other is not");
  }
  if (!r1.keyed()) {
    return AnnotatedRelation(plan.apply(r1.group(0), r2.group(0)));
  }
  if (r1.key()->domain != r2.key()->domain) {
    throw SchemaError("join: join-key domains differ");
  }
  std::vector<SemiringVector> groups;
  groups.reserve(r1.groups().size());
  for (std::size_t g = 0; g < r1.groups().size(); ++g) {
    groups.push_back(plan.apply(r1.group(g), r2.group(g)));
  }
  return AnnotatedRelation(*r1.key(), std::move(groups));
}

AnnotatedRelation join_aggregate(std::span<const AnnotatedRelation> rs) {
  if (rs.empty()) throw PreconditionError("join of zero relations");
  AnnotatedRelation acc = rs[0];
  for (std::size_t i = 1; i < rs.size(); ++i) acc = join_aggregate(acc, rs[i]);
  return acc;
}

AnnotatedRelation union_aggregate(const AnnotatedRelation& r1,
                                  const AnnotatedRelation& r2) {
  if (r1.order() != r2.order()) throw SchemaError("union: order mismatch");
  if (!same_feature_set(r1.features(), r2.features())) {
    throw SchemaError("union: feature sets differ");
  }
  if (r1.keyed() != r2.keyed()) {
    throw SchemaError("union: one relation is keyed and the other is not");
  }
  if (r1.keyed() && r1.key()->domain != r2.key()->domain) {
    throw SchemaError("union: join-key domains differ");
  }
  AnnotatedRelation out = r1;
  for (std::size_t g = 0; g < out.groups().size(); ++g) {
    SemiringVector b = r2.group(g).remap(r1.basis());
    for (std::size_t i = 0; i < b.size(); ++i) out.groups()[g][i] += b[i];
  }
  return out;
}

}  // namespace dpsearch
