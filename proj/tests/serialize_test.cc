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

#include "dpsearch/serialize.h"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dpsearch/errors.h"
#include "test_util.h"

namespace dpsearch {
namespace {

void expect_same_groups(const AnnotatedRelation& a, const AnnotatedRelation& b) {
  ASSERT_EQ(a.groups().size(), b.groups().size());
  EXPECT_EQ(a.features(), b.features());
  EXPECT_EQ(a.order(), b.order());
  for (std::size_t g = 0; g < a.groups().size(); ++g) {
    const auto& va = a.group(g).values();
    const auto& vb = b.group(g).values();
    ASSERT_EQ(va.size(), vb.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
      if (std::isnan(va[i])) {
        EXPECT_TRUE(std::isnan(vb[i]));
      } else {
        EXPECT_EQ(va[i], vb[i]);  // bit-exact
      }
    }
  }
}

Dataset keyed_data() {
  CounterRng rng(5);
  RowMatrix x = testing::random_rows(rng, 12, 2);
  std::vector<std::size_t> keys(12);
  for (std::size_t i = 0; i < 12; ++i) keys[i] = i % 3;
  return Dataset::with_observed_bound(Schema({"a", "b"}, testing::numbered_key("J", 3)),
                                      x, keys);
}

TEST(RelationJsonTest, KeyedRoundTrip) {
  AnnotatedRelation r = aggregate(keyed_data(), 3);
  Json j = relation_to_json(r);
  EXPECT_EQ(j["join_key"], "J");
  EXPECT_EQ(j["groups"].size(), 3u);
  EXPECT_TRUE(j["groups"]["k1"].contains("a^2*b"));
  AnnotatedRelation back = relation_from_json(parse_json_text(j.dump()));
  ASSERT_TRUE(back.keyed());
  EXPECT_EQ(back.key()->domain, r.key()->domain);
  expect_same_groups(r, back);
}

TEST(RelationJsonTest, UnkeyedAndNonFinite) {
  AnnotatedRelation r = aggregate(keyed_data(), 2, false);
  r.groups()[0][2] = std::nan("");
  Json j = relation_to_json(r);
  EXPECT_TRUE(j["join_key"].is_null());
  EXPECT_TRUE(j["groups"].contains("*"));
  AnnotatedRelation back = relation_from_json(parse_json_text(j.dump()));
  EXPECT_FALSE(back.keyed());
  expect_same_groups(r, back);
}

TEST(RelationJsonTest, RejectsMalformed) {
  Json j = relation_to_json(aggregate(keyed_data(), 2));
  Json missing = j;
  missing["groups"].erase("k0");
  EXPECT_THROW(relation_from_json(missing), SchemaError);
  Json bad = j;
  bad["order"] = "two";
  EXPECT_THROW(relation_from_json(bad), SchemaError);
  EXPECT_THROW(relation_from_json(Json::array()), SchemaError);
  EXPECT_THROW(parse_json_text("{"), SchemaError);
}

TEST(PrivatizedJsonTest, RoundTrip) {
  Dataset ds = keyed_data();
  PrivatizedStats s = fpm_privatize(ds, std::string("J"), 2, {0.5, 1e-5}, CounterRng(3));
  Json j = privatized_to_json(s);
  EXPECT_EQ(j["privacy"]["mechanism"], "fpm");
  EXPECT_EQ(j["privacy"]["k"], 2);
  PrivatizedStats back = privatized_from_json(parse_json_text(j.dump(2)));
  expect_same_groups(s.stats, back.stats);
  EXPECT_EQ(back.mechanism, s.mechanism);
  EXPECT_EQ(back.budget.epsilon, 0.5);
  EXPECT_EQ(back.budget.delta, 1e-5);
  EXPECT_EQ(back.cardinality, s.cardinality);
  EXPECT_EQ(back.norm_bound, s.norm_bound);
  EXPECT_EQ(back.join_mode, s.join_mode);
  EXPECT_EQ(back.seed_fingerprint, s.seed_fingerprint);
  ASSERT_EQ(back.noise.size(), s.noise.size());
  EXPECT_EQ(back.noise[0].scale, s.noise[0].scale);
  ASSERT_EQ(back.spends.size(), s.spends.size());
  EXPECT_EQ(back.spends[0].label, s.spends[0].label);
  // Writing again is byte-identical.
  EXPECT_EQ(privatized_to_json(back).dump(), j.dump());
}

TEST(PrivatizedJsonTest, RejectsBadPrivacyBlock) {
  Json j = privatized_to_json(fpm_privatize(keyed_data(), std::nullopt, 2, {1, 1e-6},
                                            CounterRng(1)));
  Json none = j;
  none.erase("privacy");
  EXPECT_THROW(privatized_from_json(none), SchemaError);
  Json mech = j;
  mech["privacy"]["mechanism"] = "magic";
  EXPECT_THROW(privatized_from_json(mech), SchemaError);
  Json order = j;
  order["privacy"]["k"] = 3;
  EXPECT_THROW(privatized_from_json(order), SchemaError);
}

TEST(FitJsonTest, Shape) {
  FitOutcome ok;
  ok.params = ModelParams{{"x"}, "y", Eigen::Vector2d(2.0, 0.5)};
  ok.r2_proxy = 0.75;
  const std::string want_ok =
      R"j({"theta":{"x":2.0,"(intercept)":0.5},"failed":false,"r2":0.75})j";
  const std::string want_failed = R"({"theta":{},"failed":true,"r2":0.0})";
  EXPECT_EQ(fit_to_json(ok).dump(), want_ok);
  EXPECT_EQ(fit_to_json(FitOutcome{}).dump(), want_failed);
}

TEST(FilesTest, MissingFile) {
  EXPECT_THROW(read_text_file("/nonexistent/dir/file.json"), DataError);
}

}  // namespace
}  // namespace dpsearch
