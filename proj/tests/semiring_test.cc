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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dpsearch/errors.h"
#include "test_util.h"

namespace dpsearch {
namespace {

using testing::exponent_vectors;
using testing::feature_names;
using testing::max_rel_error;
using testing::monomial_string;
using testing::random_rows;

Dataset single_column(const std::string& name, std::vector<double> values) {
  RowMatrix x(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = values[i];
  return Dataset::with_observed_bound(Schema({name}), std::move(x));
}

SemiringVector random_vector(CounterRng& rng, const std::vector<std::string>& names,
                             int k) {
  SemiringVector v(MonomialBasis::make(names, k));
  for (auto& x : v.values()) x = rng.uniform() * 4.0 - 2.0;
  return v;
}

void expect_vectors_near(const SemiringVector& a, const SemiringVector& b,
                         double rel = 1e-9) {
  SemiringVector bb = b.remap(a.basis());
  ASSERT_EQ(a.size(), bb.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(testing::close_rel(a[i], bb[i], rel))
        << a.basis()->name(i) << ": " << a[i] << " vs " << bb[i];
  }
}

TEST(MonomialBasisTest, CanonicalOrderAndNames) {
  auto b = MonomialBasis::make({"x1", "x2"}, 2);
  ASSERT_EQ(b->size(), 6u);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < b->size(); ++i) names.push_back(b->name(i));
  EXPECT_EQ(names, (std::vector<std::string>{"1", "x1", "x2", "x1^2", "x1*x2", "x2^2"}));
  EXPECT_EQ(b->index_of("x1*x2"), 4u);
  EXPECT_THROW(b->index_of("x1^3"), SchemaError);
  EXPECT_THROW(b->index_of("x3"), SchemaError);
}

TEST(MonomialBasisTest, SizeIsBinomial) {
  // C(m + k, k) monomials of degree <= k.
  EXPECT_EQ(MonomialBasis::make(feature_names("x", 3), 3)->size(), 20u);
  EXPECT_EQ(MonomialBasis::make(feature_names("x", 4), 2)->size(), 15u);
  EXPECT_EQ(MonomialBasis::make({"a"}, 4)->size(), 5u);
}

TEST(AnnotateTest, SingleFeatureOrderThree) {
  const double row[] = {2.0};
  SemiringVector v = annotate(row, {"A"}, 3);
  EXPECT_EQ(v.at("1"), 1.0);
  EXPECT_EQ(v.at("A"), 2.0);
  EXPECT_EQ(v.at("A^2"), 4.0);
  EXPECT_EQ(v.at("A^3"), 8.0);
}

TEST(AnnotateTest, ZeroRowIsCountOnly) {
  const double row[] = {0.0, 0.0};
  SemiringVector v = annotate(row, {"f1", "f2"}, 2);
  EXPECT_EQ(v.count(), 1.0);
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_EQ(v[i], 0.0);
}

TEST(AnnotateTest, TwoFeaturesOrderTwo) {
  const double row[] = {2.0, 3.0};
  SemiringVector v = annotate(row, {"f1", "f2"}, 2);
  EXPECT_EQ(v.values(), (std::vector<double>{1, 2, 3, 4, 6, 9}));
}

TEST(SemiringAlgebraTest, AddSumsColumns) {
  const double r2[] = {2.0}, r3[] = {3.0};
  SemiringVector s = add(annotate(r2, {"A"}, 1), annotate(r3, {"A"}, 1));
  EXPECT_EQ(s.at("1"), 2.0);
  EXPECT_EQ(s.at("A"), 5.0);
}

TEST(SemiringAlgebraTest, AddRejectsMismatchedBases) {
  const double r[] = {1.0};
  EXPECT_THROW(add(annotate(r, {"A"}, 2), annotate(r, {"A"}, 3)), SchemaError);
  EXPECT_THROW(add(annotate(r, {"A"}, 2), annotate(r, {"B"}, 2)), SchemaError);
}

TEST(SemiringAlgebraTest, CrossProductOfTwoSmallRelations) {
  AnnotatedRelation r1 = aggregate(single_column("A", {2, 3}), 3);
  AnnotatedRelation r2 = aggregate(single_column("B", {3, 4}), 3);
  const SemiringVector& s1 = r1.group(0);
  EXPECT_EQ(s1.values(), (std::vector<double>{2, 5, 13, 35}));
  SemiringVector j = multiply(s1, r2.group(0));
  EXPECT_EQ(j.count(), 4.0);
  EXPECT_EQ(j.at("A*B"), 35.0);
  EXPECT_EQ(j.at("A^2*B"), 91.0);
  EXPECT_DOUBLE_EQ(statistics(j).at("A*B"), 8.75);
  // Truncation: nothing of degree 4 exists.
  EXPECT_THROW(j.at("A^2*B^2"), SchemaError);

  // The relation-level join agrees with the vector product.
  AnnotatedRelation joined = join_aggregate(r1, r2);
  EXPECT_EQ(joined.group(0).values(), j.values());
}

TEST(SemiringAlgebraTest, MultiplyRejectsPartialOverlap) {
  CounterRng rng(3);
  SemiringVector a = random_vector(rng, {"x", "y"}, 2);
  SemiringVector b = random_vector(rng, {"y", "z"}, 2);
  EXPECT_THROW(multiply(a, b), SchemaError);
}

TEST(SemiringAlgebraTest, Axioms) {
  CounterRng rng(11);
  for (int k = 1; k <= 4; ++k) {
    for (std::size_t m = 1; m <= 3; ++m) {
      SCOPED_TRACE("k=" + std::to_string(k) + " m=" + std::to_string(m));
      auto names = feature_names("x", m);
      SemiringVector a = random_vector(rng, names, k);
      SemiringVector b = random_vector(rng, names, k);
      SemiringVector c = random_vector(rng, names, k);
      SemiringVector zero = SemiringVector::zero(names, k);
      SemiringVector one = SemiringVector::one(names, k);
      expect_vectors_near(add(a, b), add(b, a));
      expect_vectors_near(add(add(a, b), c), add(a, add(b, c)));
      expect_vectors_near(multiply(a, b), multiply(b, a));
      expect_vectors_near(multiply(multiply(a, b), c), multiply(a, multiply(b, c)));
      expect_vectors_near(multiply(a, add(b, c)), add(multiply(a, b), multiply(a, c)));
      expect_vectors_near(add(a, zero), a);
      expect_vectors_near(multiply(a, one), a);
      const SemiringVector annihilated = multiply(a, zero);
      for (double v : annihilated.values()) EXPECT_EQ(v, 0.0);
    }
  }
}

TEST(SemiringAlgebraTest, DisjointProductIsCommutativeUpToFeatureOrder) {
  CounterRng rng(5);
  SemiringVector a = random_vector(rng, {"a1", "a2"}, 3);
  SemiringVector b = random_vector(rng, {"b1"}, 3);
  SemiringVector ab = multiply(a, b);
  SemiringVector ba = multiply(b, a);
  EXPECT_EQ(ab.features(), (std::vector<std::string>{"a1", "a2", "b1"}));
  EXPECT_EQ(ba.features(), (std::vector<std::string>{"b1", "a1", "a2"}));
  expect_vectors_near(ab, ba);
}

TEST(SemiringAlgebraTest, TensorSlotsAgreeWithDictionaryEntries) {
  // Explicit ordered-tuple (tensor) representation for m = 2, k = 3: every
  // redundant slot (i1, ..., id) holds the sum of the products, and the
  // dictionary entry of its sorted multiset must equal it.
  CounterRng rng(8);
  const std::vector<std::string> names{"u", "v"};
  RowMatrix rows = random_rows(rng, 7, 2);
  SemiringVector s = aggregate(Dataset::with_observed_bound(Schema(names), rows), 3).total();
  for (int d = 1; d <= 3; ++d) {
    const int slots = 1 << d;
    for (int code = 0; code < slots; ++code) {
      std::vector<int> e(2, 0);
      double slot = 0.0;
      for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        double p = 1.0;
        for (int t = 0; t < d; ++t) p *= rows(r, (code >> t) & 1);
        slot += p;
      }
      for (int t = 0; t < d; ++t) ++e[(code >> t) & 1];
      EXPECT_NEAR(s.at(monomial_string(names, e)), slot, 1e-9 * std::max(1.0, std::abs(slot)));
    }
  }
}

TEST(StatisticsTest, DividesByCount) {
  const double row[] = {1.5, -2.0};
  SemiringVector v = annotate(row, {"a", "b"}, 2);
  EXPECT_EQ(statistics(v).values(), v.values());
  SemiringVector five = v;
  for (auto& x : five.values()) x *= 5.0;
  SemiringVector st = statistics(five);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_DOUBLE_EQ(st[i], v[i]);
}

TEST(StatisticsTest, UndefinedForNonPositiveCount) {
  SemiringVector z = SemiringVector::zero({"a"}, 2);
  EXPECT_THROW(statistics(z), UndefinedStatistics);
  z[0] = -1.0;
  EXPECT_THROW(statistics(z), UndefinedStatistics);
  z[0] = std::nan("");
  EXPECT_THROW(statistics(z), UndefinedStatistics);
}

TEST(AggregateTest, SingleRowEqualsAnnotation) {
  const std::vector<double> row{0.5, -1.25};
  RowMatrix x(1, 2);
  x << 0.5, -1.25;
  auto rel = aggregate(Dataset::with_observed_bound(Schema({"a", "b"}), x), 3);
  EXPECT_EQ(rel.group(0).values(), annotate(row, {"a", "b"}, 3).values());
}

TEST(AggregateTest, MissingKeyValueIsZeroGroup) {
  JoinKey key{"J", {"a", "b", "c"}};
  RowMatrix x(2, 1);
  x << 1.0, 2.0;
  Dataset ds(Schema({"x"}, key), x, {0, 1}, 2.0);
  auto rel = aggregate(ds, 2);
  ASSERT_TRUE(rel.keyed());
  for (double v : rel.group("c").values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(rel.group("a").at("x"), 1.0);
  EXPECT_EQ(rel.group("b").at("x^2"), 4.0);
  auto flat = aggregate(ds, 2, false);
  EXPECT_FALSE(flat.keyed());
  EXPECT_EQ(flat.group(0).values(), rel.total().values());
}

TEST(PushdownTest, UnionThenJoinOnSmallRelations) {
  JoinKey a{"A", {"a1", "a2"}};
  RowMatrix r3(2, 1), r1(4, 1), r2(4, 1);
  r3 << 2, 4;
  r1 << 1, 2, 3, 4;
  r2 << 3, 5, 1, 3;
  Dataset R3(Schema({"D"}, a), r3, {0, 1}, 4);
  Dataset R1(Schema({"C"}, a), r1, {0, 0, 1, 1}, 4);
  Dataset R2(Schema({"C"}, a), r2, {0, 0, 1, 1}, 5);
  auto u = union_aggregate(aggregate(R1, 2), aggregate(R2, 2));
  SemiringVector s = join_aggregate(u, aggregate(R3, 2)).total();
  EXPECT_EQ(s.at("D^2"), 80.0);
  EXPECT_EQ(s.at("D"), 24.0);
  EXPECT_EQ(s.at("1"), 8.0);
  EXPECT_EQ(s.at("C*D"), 66.0);
  EXPECT_EQ(s.at("C"), 22.0);
}

TEST(PushdownTest, JoinMatchesMaterializedJoin) {
  CounterRng rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 1 + rng() % 4;
    const std::size_t m1 = 1 + rng() % 2, m2 = 1 + rng() % 2;
    const int k = 1 + static_cast<int>(rng() % 3);
    const std::size_t n1 = 1 + rng() % 20, n2 = 1 + rng() % 20;
    JoinKey key = testing::numbered_key("J", d);
    testing::KeyedRows a{random_rows(rng, n1, m1), {}}, b{random_rows(rng, n2, m2), {}};
    for (std::size_t i = 0; i < n1; ++i) a.keys.push_back(rng() % d);
    for (std::size_t i = 0; i < n2; ++i) b.keys.push_back(rng() % d);
    auto na = feature_names("a", m1), nb = feature_names("b", m2);
    Dataset da(Schema(na, key), a.rows, a.keys, 10), db(Schema(nb, key), b.rows, b.keys, 10);
    SemiringVector s = join_aggregate(aggregate(da, k), aggregate(db, k)).total();
    auto names = na;
    names.insert(names.end(), nb.begin(), nb.end());
    EXPECT_LE(max_rel_error(s, testing::materialize_join(a, b), names, k), 1e-9);
  }
}

TEST(PushdownTest, UnionMatchesMaterializedUnion) {
  CounterRng rng(22);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng() % 3;
    const int k = 1 + static_cast<int>(rng() % 3);
    auto names = feature_names("x", m);
    RowMatrix a = random_rows(rng, 1 + rng() % 30, m), b = random_rows(rng, 1 + rng() % 30, m);
    // Second relation lists its columns in reverse order.
    std::vector<std::string> rev(names.rbegin(), names.rend());
    RowMatrix brev = b.rowwise().reverse();
    auto u = union_aggregate(aggregate(Dataset::with_observed_bound(Schema(names), a), k),
                             aggregate(Dataset::with_observed_bound(Schema(rev), brev), k));
    RowMatrix all(a.rows() + b.rows(), static_cast<Eigen::Index>(m));
    all << a, b;
    EXPECT_LE(max_rel_error(u.total(), all, names, k), 1e-9);
    EXPECT_EQ(u.total().count(), static_cast<double>(all.rows()));
  }
}

TEST(PushdownTest, CountComposition) {
  JoinKey key = testing::numbered_key("J", 3);
  RowMatrix x = RowMatrix::Ones(6, 1);
  Dataset a(Schema({"p"}, key), x, {0, 0, 1, 2, 2, 2}, 1);
  Dataset b(Schema({"q"}, key), x.topRows(4), {0, 1, 1, 2}, 1);
  auto j = join_aggregate(aggregate(a, 2), aggregate(b, 2));
  EXPECT_EQ(j.group(0).count(), 2.0);
  EXPECT_EQ(j.group(1).count(), 2.0);
  EXPECT_EQ(j.group(2).count(), 3.0);
  EXPECT_EQ(j.total().count(), 7.0);
}

TEST(PushdownTest, JoinWithZeroRelationIsZero) {
  JoinKey key = testing::numbered_key("J", 2);
  RowMatrix x(2, 1);
  x << 1, 2;
  auto r = aggregate(Dataset(Schema({"p"}, key), x, {0, 1}, 2), 2);
  AnnotatedRelation zero(key, {SemiringVector::zero({"q"}, 2), SemiringVector::zero({"q"}, 2)});
  const AnnotatedRelation joined = join_aggregate(r, zero);
  for (const auto& g : joined.groups()) {
    for (double v : g.values()) EXPECT_EQ(v, 0.0);
  }
  AnnotatedRelation uzero(key, {SemiringVector::zero({"p"}, 2), SemiringVector::zero({"p"}, 2)});
  EXPECT_EQ(union_aggregate(r, uzero).total().values(), r.total().values());
}

TEST(PushdownTest, JoinRejectsMismatchedDomains) {
  RowMatrix x(1, 1);
  x << 1;
  auto r1 = aggregate(Dataset(Schema({"p"}, testing::numbered_key("J", 2)), x, {0}, 1), 2);
  auto r2 = aggregate(Dataset(Schema({"q"}, testing::numbered_key("J", 3)), x, {0}, 1), 2);
  auto r3 = aggregate(Dataset::with_observed_bound(Schema({"q"}), x), 2);
  EXPECT_THROW(join_aggregate(r1, r2), SchemaError);
  EXPECT_THROW(join_aggregate(r1, r3), SchemaError);
}

TEST(PushdownTest, MarginalizeAndAlign) {
  JoinKey key{"J", {"a", "b"}};
  RowMatrix x(3, 1);
  x << 1, 2, 3;
  auto r = aggregate(Dataset(Schema({"p"}, key), x, {0, 1, 1}, 3), 2);
  auto flat = r.marginalize();
  EXPECT_FALSE(flat.keyed());
  EXPECT_EQ(flat.group("*").at("p"), 6.0);
  auto aligned = r.align_to(JoinKey{"J", {"b", "z"}});
  EXPECT_EQ(aligned.group("b").at("p"), 5.0);
  EXPECT_EQ(aligned.group("z").count(), 0.0);
}

}  // namespace
}  // namespace dpsearch
