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

#include "dpsearch/search.h"

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "dpsearch/errors.h"
#include "test_util.h"

namespace dpsearch {
namespace {

constexpr std::size_t kKeys = 10;

PrivatizedStats exact(const Dataset& ds) {
  PrivatizedStats s;
  s.stats = aggregate(ds, 2);
  s.order = 2;
  s.norm_bound = ds.norm_bound();
  s.cardinality = ds.rows();
  return s;
}

// Planted world: y = x1 + sum_j c_j z_j(key) + noise, where each z_j lives
// in a per-key dimension table.
struct World {
  JoinKey key = testing::numbered_key("J", kKeys);
  std::vector<std::vector<double>> z;  // per table, per key
  std::vector<double> coef;
  double noise = 0.3;

  Dataset requester(std::size_t n, CounterRng& rng) const {
    std::normal_distribution<double> normal;
    RowMatrix x(static_cast<Eigen::Index>(n), 2);
    std::vector<std::size_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
      keys[i] = i % kKeys;
      double x1 = normal(rng), y = x1 + noise * normal(rng);
      for (std::size_t j = 0; j < z.size(); ++j) y += coef[j] * z[j][keys[i]];
      x.row(static_cast<Eigen::Index>(i)) << x1, y;
    }
    return Dataset::with_observed_bound(Schema({"x1", "y"}, key), x, keys);
  }

  Dataset table(std::size_t j) const {
    RowMatrix x(static_cast<Eigen::Index>(kKeys), 1);
    std::vector<std::size_t> keys(kKeys);
    for (std::size_t k = 0; k < kKeys; ++k) {
      x(static_cast<Eigen::Index>(k), 0) = z[j][k];
      keys[k] = k;
    }
    return Dataset::with_observed_bound(Schema({"z" + std::to_string(j)}, key), x, keys);
  }

  std::size_t add_table(double c, CounterRng& rng) {
    std::normal_distribution<double> normal;
    std::vector<double> v(kKeys);
    for (auto& e : v) e = normal(rng);
    z.push_back(v);
    coef.push_back(c);
    return z.size() - 1;
  }
};

SearchRequest make_request(const World& w, CounterRng& rng, std::size_t n = 200) {
  SearchRequest r;
  r.train = exact(w.requester(n, rng));
  r.test = exact(w.requester(n, rng));
  r.features = {"x1"};
  r.target = "y";
  r.max_iterations = 3;
  return r;
}

void add(Corpus& c, const Dataset& ds, AugType type, const std::string& id) {
  c.register_dataset(exact(ds), ds.schema(), type, id);
}

TEST(CorpusTest, Registration) {
  Corpus c;
  CounterRng rng(1);
  World w;
  w.add_table(1.0, rng);
  Dataset t = w.table(0);
  std::string a = c.register_dataset(exact(t), t.schema(), AugType::kJoin);
  std::string b = c.register_dataset(exact(t), t.schema(), AugType::kJoin);
  EXPECT_NE(a, b);
  EXPECT_EQ(c.size(), 2u);
  EXPECT_THROW(c.register_dataset(exact(t), t.schema(), AugType::kJoin, a),
               PreconditionError);
  Dataset plain = Dataset::with_observed_bound(Schema({"z0"}), t.features());
  EXPECT_THROW(c.register_dataset(exact(plain), plain.schema(), AugType::kJoin),
               SchemaError);
  EXPECT_THROW(c.register_dataset(exact(t), Schema({"other"}, w.key), AugType::kJoin),
               SchemaError);
  EXPECT_EQ(c.find(a)->id, a);
  EXPECT_EQ(c.find("missing"), nullptr);
}

TEST(DiscoverTest, FiltersBySchemaAndKey) {
  CounterRng rng(2);
  World w;
  w.add_table(1.0, rng);
  SearchRequest req = make_request(w, rng);
  Corpus empty;
  EXPECT_TRUE(discover(empty, req, AugType::kBoth).empty());

  Corpus c;
  add(c, w.table(0), AugType::kJoin, "a-join");
  add(c, w.requester(50, rng), AugType::kUnion, "b-union");
  // Union-only entries are never join candidates.
  add(c, w.table(0), AugType::kUnion, "c-union-only");
  EXPECT_EQ(discover(c, req, AugType::kUnion), std::vector<std::string>{"b-union"});
  EXPECT_EQ(discover(c, req, AugType::kJoin), std::vector<std::string>{"a-join"});
  // A join-capable entry with the request schema is a union candidate too.
  add(c, w.requester(50, rng), AugType::kBoth, "d-both");
  EXPECT_EQ(discover(c, req, AugType::kUnion),
            (std::vector<std::string>{"b-union", "d-both"}));
  // Different key name: no join.
  Dataset other = Dataset::with_observed_bound(
      Schema({"q"}, testing::numbered_key("K", kKeys)), w.table(0).features(),
      w.table(0).keys());
  add(c, other, AugType::kJoin, "e-other-key");
  EXPECT_EQ(discover(c, req, AugType::kJoin), std::vector<std::string>{"a-join"});
}

TEST(DiscoverTest, MarginalisedKeyEqualsUngroupedAggregate) {
  CounterRng rng(3);
  World w;
  Dataset keyed = w.requester(40, rng);
  Dataset plain = Dataset::with_observed_bound(Schema({"x1", "y"}), keyed.features());
  const auto got = aggregate(keyed, 2).marginalize().total().values();
  const auto want = aggregate(plain, 2).total().values();
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_TRUE(testing::close_rel(got[i], want[i], 1e-12)) << i;
  }
}

TEST(EvaluateCandidateTest, InformativeJoinImproves) {
  CounterRng rng(4);
  World w;
  w.add_table(2.0, rng);
  SearchRequest req = make_request(w, rng);
  Corpus c;
  add(c, w.table(0), AugType::kJoin, "z");
  const double base = evaluate_augmentation(c, req, {}).r2;
  const double with = evaluate_candidate(c, req, {}, {"z", AugType::kJoin});
  EXPECT_GT(with, base + 0.2);
}

TEST(EvaluateCandidateTest, NoiseFeatureBarelyMoves) {
  CounterRng rng(5);
  World w;
  w.add_table(0.0, rng);
  SearchRequest req = make_request(w, rng, 2000);
  Corpus c;
  add(c, w.table(0), AugType::kJoin, "noise");
  const double base = evaluate_augmentation(c, req, {}).r2;
  const double with = evaluate_candidate(c, req, {}, {"noise", AugType::kJoin});
  EXPECT_LT(std::abs(with - base), 0.02);
}

TEST(EvaluateCandidateTest, FailureScoresZero) {
  World w;
  RowMatrix x(6, 2);
  x << 1, 1, 1, 2, 1, 3, 1, 4, 1, 5, 1, 6;  // constant feature
  std::vector<std::size_t> keys{0, 1, 2, 3, 4, 5};
  Dataset d = Dataset::with_observed_bound(Schema({"x1", "y"}, w.key), x, keys);
  SearchRequest req{exact(d), exact(d), {"x1"}, "y", 2};
  Corpus c;
  add(c, d, AugType::kUnion, "same");
  AugmentedFit fit = evaluate_augmentation(c, req, {});
  EXPECT_TRUE(fit.fit.failed());
  EXPECT_EQ(fit.r2, 0.0);
  EXPECT_EQ(evaluate_candidate(c, req, {}, {"same", AugType::kUnion}), 0.0);
}

TEST(EvaluateCandidateTest, UnknownIdIsSchemaError) {
  CounterRng rng(6);
  World w;
  SearchRequest req = make_request(w, rng);
  Corpus c;
  EXPECT_THROW(evaluate_candidate(c, req, {}, {"nope", AugType::kJoin}), SchemaError);
}

TEST(GreedyTest, SinglePredictiveCandidate) {
  CounterRng rng(7);
  World w;
  w.add_table(2.0, rng);
  w.add_table(0.0, rng);
  w.noise = 0.0;
  SearchRequest req = make_request(w, rng);
  Corpus c;
  add(c, w.table(1), AugType::kJoin, "a-noise");
  add(c, w.table(0), AugType::kJoin, "b-signal");
  SearchResult r = greedy_search(c, req);
  ASSERT_EQ(r.chosen.size(), 1u);
  EXPECT_EQ(r.chosen[0], (Candidate{"b-signal", AugType::kJoin}));
  ASSERT_EQ(r.utility_trace.size(), 2u);
  EXPECT_NEAR(r.utility_trace[1], 1.0, 1e-9);
  ASSERT_FALSE(r.final_model.failed());
  EXPECT_NEAR(r.final_model.params->coefficient("z0"), 2.0, 1e-6);
}

TEST(GreedyTest, NoImprovement) {
  CounterRng rng(8);
  World w;
  w.noise = 0.0;
  SearchRequest req = make_request(w, rng);
  Corpus c;
  add(c, w.requester(30, rng), AugType::kUnion, "u");
  SearchResult r = greedy_search(c, req);
  EXPECT_TRUE(r.chosen.empty());
  ASSERT_EQ(r.utility_trace.size(), 1u);
  EXPECT_NEAR(r.utility_trace[0], 1.0, 1e-9);
}

TEST(GreedyTest, TieGoesToLowerId) {
  CounterRng rng(9);
  World w;
  w.add_table(1.5, rng);
  SearchRequest req = make_request(w, rng);
  Corpus c;
  add(c, w.table(0), AugType::kJoin, "t-2");
  add(c, w.table(0), AugType::kJoin, "t-1");
  SearchResult r = greedy_search(c, req);
  ASSERT_FALSE(r.chosen.empty());
  EXPECT_EQ(r.chosen[0].id, "t-1");
}

TEST(GreedyTest, MaxIterationsPrecondition) {
  CounterRng rng(10);
  World w;
  SearchRequest req = make_request(w, rng);
  req.max_iterations = 0;
  EXPECT_THROW(greedy_search(Corpus{}, req), PreconditionError);
}

struct PlantedCase {
  Corpus corpus;
  SearchRequest request;
};

std::unique_ptr<PlantedCase> random_case(std::uint64_t seed) {
  CounterRng rng(seed);
  auto out = std::make_unique<PlantedCase>();
  World w;
  const std::size_t tables = 2 + rng() % 3;
  for (std::size_t j = 0; j < tables; ++j) {
    w.add_table(rng.uniform() < 0.5 ? 0.0 : 0.5 + 1.5 * rng.uniform(), rng);
  }
  out->request = make_request(w, rng, 100);
  out->request.max_iterations = 2;
  std::vector<std::string> ids;
  for (std::size_t j = 0; j < tables; ++j) {
    add(out->corpus, w.table(j), AugType::kJoin, "c" + std::to_string(j));
  }
  const std::size_t unions = 1 + rng() % 2;
  for (std::size_t u = 0; u < unions && tables + u < 6; ++u) {
    add(out->corpus, w.requester(50, rng), AugType::kUnion, "u" + std::to_string(u));
  }
  return out;
}

std::set<std::string> chosen_ids(const std::vector<Candidate>& v) {
  std::set<std::string> s;
  for (const auto& c : v) s.insert(c.id);
  return s;
}

std::set<std::string> exhaustive(const PlantedCase& pc) {
  std::vector<Candidate> all;
  for (const auto& id : discover(pc.corpus, pc.request, AugType::kJoin)) {
    all.push_back({id, AugType::kJoin});
  }
  for (const auto& id : discover(pc.corpus, pc.request, AugType::kUnion)) {
    all.push_back({id, AugType::kUnion});
  }
  auto score = [&](std::vector<Candidate> set) {
    return evaluate_augmentation(pc.corpus, pc.request, set).r2;
  };
  std::vector<Candidate> best;
  double best_r2 = score({});
  for (std::size_t i = 0; i < all.size(); ++i) {
    double r = score({all[i]});
    if (r > best_r2 + 1e-6) best_r2 = r, best = {all[i]};
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      if (all[i].id == all[j].id) continue;
      double r = score({all[i], all[j]});
      if (r > best_r2 + 1e-6) best_r2 = r, best = {all[i], all[j]};
    }
  }
  return chosen_ids(best);
}

TEST(GreedyTest, AgreesWithExhaustiveSearch) {
  int agree = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto pc = random_case(1000 + s);
    SearchResult r = greedy_search(pc->corpus, pc->request);
    agree += chosen_ids(r.chosen) == exhaustive(*pc);
  }
  EXPECT_GE(agree, 90);
}

TEST(GreedyTest, TraceIncreasesAndSearchIsPure) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto pc = random_case(2000 + s);
    std::vector<std::vector<double>> before;
    for (const auto& e : pc->corpus.entries()) before.push_back(e->stats.stats.total().values());
    SearchResult a = greedy_search(pc->corpus, pc->request, {1e-6, 1});
    SearchResult b = greedy_search(pc->corpus, pc->request, {1e-6, 4});
    EXPECT_EQ(a.chosen, b.chosen);
    EXPECT_EQ(a.utility_trace, b.utility_trace);
    for (std::size_t i = 1; i < a.utility_trace.size(); ++i) {
      EXPECT_GT(a.utility_trace[i], a.utility_trace[i - 1] + 1e-6);
    }
    std::size_t i = 0;
    for (const auto& e : pc->corpus.entries()) {
      EXPECT_EQ(e->stats.stats.total().values(), before[i++]);
      EXPECT_EQ(e->stats.noise_draws, 0u);
    }
  }
}

}  // namespace
}  // namespace dpsearch
