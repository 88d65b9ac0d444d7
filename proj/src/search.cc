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
#include <cstdio>
#include <limits>
#include <mutex>
#include <set>

#include "dpsearch/errors.h"
#include "dpsearch/parallel.h"

namespace dpsearch {
namespace {

std::set<std::string> as_set(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

std::vector<std::string> request_columns(const SearchRequest& r) {
  std::vector<std::string> cols = r.features;
  cols.push_back(r.target);
  return cols;
}

const JoinKey& request_key(const SearchRequest& r) {
  if (!r.train.stats.keyed()) {
    throw SchemaError("request statistics carry no join key");
  }
  return *r.train.stats.key();
}

// A candidate's relation re-keyed to the request's domain.
AnnotatedRelation keyed_for(const CorpusEntry& e, const JoinKey& key) {
  if (!e.stats.stats.keyed() || e.stats.stats.key()->name != key.name) {
    throw SchemaError("candidate " + e.id + " is not keyed by " + key.name);
  }
  return e.stats.stats.align_to(key);
}

struct Side {
  AnnotatedRelation rel;
  double n = 0.0;
};

// Joins `base` with each candidate relation and returns corrected,
// normalised statistics.
SemiringVector join_side(const Side& base,
                         const std::vector<const CorpusEntry*>& joins,
                         const std::vector<std::string>& base_features) {
  if (joins.empty()) return base.rel.total();
  if (!base.rel.keyed()) throw SchemaError("cannot join an unkeyed relation");
  const JoinKey& key = *base.rel.key();
  AnnotatedRelation acc = base.rel;
  std::vector<JoinPartition> parts{{base_features, base.n}};
  for (const CorpusEntry* e : joins) {
    acc = join_aggregate(acc, keyed_for(*e, key));
    parts.push_back({e->stats.stats.features(),
                     static_cast<double>(e->stats.cardinality)});
  }
  return unbiased_cross_moments(acc.total(),
                                static_cast<double>(key.domain.size()), parts);
}

}  // namespace

std::string_view aug_type_name(AugType t) {
  switch (t) {
    case AugType::kJoin:
      return "join";
    case AugType::kUnion:
      return "union";
    case AugType::kBoth:
      return "both";
  }
  return "unknown";
}

Schema schema_of(const PrivatizedStats& stats) {
  return Schema(stats.stats.features(), stats.stats.key());
}

std::string Corpus::register_dataset(PrivatizedStats stats, Schema schema,
                                     AugType aug_type,
                                     std::optional<std::string> id) {
  if (as_set(schema.feature_names()) != as_set(stats.stats.features())) {
    throw SchemaError("schema features do not match the statistics");
  }
  if (aug_type != AugType::kUnion) {
    if (!schema.join_key() || !stats.stats.keyed()) {
      throw SchemaError("join-capable dataset needs a join-key domain");
    }
    if (schema.join_key()->domain != stats.stats.key()->domain) {
      throw SchemaError("schema key domain does not match the statistics");
    }
  }
  std::unique_lock lock(mu_);
  std::string key;
  if (id) {
    key = *id;
  } else {
    do {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "ds-%04zu", next_++);
      key = buf;
    } while (entries_.count(key));
  }
  if (key.empty()) throw PreconditionError("empty dataset id");
  if (entries_.count(key)) throw PreconditionError("duplicate dataset id: " + key);
  auto entry = std::make_shared<CorpusEntry>();
  entry->id = key;
  entry->stats = std::move(stats);
  entry->schema = std::move(schema);
  entry->aug_type = aug_type;
  entries_.emplace(key, std::move(entry));
  return key;
}

std::shared_ptr<const CorpusEntry> Corpus::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<const CorpusEntry>> Corpus::entries() const {
  std::shared_lock lock(mu_);
  std::vector<std::shared_ptr<const CorpusEntry>> out;
  for (const auto& [id, e] : entries_) out.push_back(e);
  return out;
}

std::size_t Corpus::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::vector<std::string> discover(const Corpus& corpus,
                                  const SearchRequest& request, AugType type) {
  std::vector<std::string> out;
  const auto columns = as_set(request_columns(request));
  for (const auto& e : corpus.entries()) {
    const auto& rel = e->stats.stats;
    if (type == AugType::kUnion || type == AugType::kBoth) {
      if (as_set(rel.features()) == columns && rel.order() == request.train.order) {
        out.push_back(e->id);
        continue;
      }
    }
    if (type == AugType::kJoin || type == AugType::kBoth) {
      if (e->aug_type == AugType::kUnion || !rel.keyed() ||
          !request.train.stats.keyed() || rel.order() != request.train.order) {
        continue;
      }
      const JoinKey& key = *request.train.stats.key();
      if (rel.key()->name != key.name) continue;
      std::set<std::string> dom(key.domain.begin(), key.domain.end());
      bool intersects = std::any_of(rel.key()->domain.begin(), rel.key()->domain.end(),
                                    [&](const auto& v) { return dom.count(v) > 0; });
      bool disjoint = std::none_of(rel.features().begin(), rel.features().end(),
                                   [&](const auto& f) { return columns.count(f) > 0; });
      if (intersects && disjoint) out.push_back(e->id);
    }
  }
  return out;
}

AugmentedFit evaluate_augmentation(const Corpus& corpus,
                                   const SearchRequest& request,
                                   std::span<const Candidate> chosen) {
  std::vector<const CorpusEntry*> unions, joins;
  std::vector<std::shared_ptr<const CorpusEntry>> hold;
  for (const auto& c : chosen) {
    auto e = corpus.find(c.id);
    if (!e) throw SchemaError("unknown dataset id: " + c.id);
    hold.push_back(e);
    (c.type == AugType::kJoin ? joins : unions).push_back(e.get());
  }
  const std::vector<std::string> base_cols = request_columns(request);

  Side train{request.train.stats, static_cast<double>(request.train.cardinality)};
  if (joins.empty()) {
    train.rel = train.rel.marginalize();
    for (const CorpusEntry* u : unions) {
      train.rel = union_aggregate(train.rel, u->stats.stats.marginalize());
      train.n += static_cast<double>(u->stats.cardinality);
    }
  } else {
    const JoinKey& key = request_key(request);
    train.rel = train.rel.align_to(key);
    for (const CorpusEntry* u : unions) {
      train.rel = union_aggregate(train.rel, keyed_for(*u, key));
      train.n += static_cast<double>(u->stats.cardinality);
    }
  }
  Side test{request.test.stats, static_cast<double>(request.test.cardinality)};
  if (!joins.empty()) {
    if (!test.rel.keyed()) throw SchemaError("test statistics carry no join key");
    test.rel = test.rel.align_to(request_key(request));
  }

  AugmentedFit out;
  out.features = request.features;
  for (const CorpusEntry* j : joins) {
    for (const auto& f : j->stats.stats.features()) out.features.push_back(f);
  }
  try {
    SemiringVector s_train = join_side(train, joins, base_cols);
    out.fit = fit_linear(s_train, out.features, request.target);
    if (out.fit.failed()) return out;
    SemiringVector s_test = join_side(test, joins, base_cols);
    out.r2 = evaluate(*out.fit.params, s_test).r2;
  } catch (const UndefinedStatistics&) {
    out.fit = FitOutcome{};
    out.r2 = 0.0;
  }
  return out;
}

double evaluate_candidate(const Corpus& corpus, const SearchRequest& request,
                          std::span<const Candidate> current,
                          const Candidate& candidate) {
  std::vector<Candidate> set(current.begin(), current.end());
  set.push_back(candidate);
  return evaluate_augmentation(corpus, request, set).r2;
}

SearchResult greedy_search(const Corpus& corpus, const SearchRequest& request,
                           const SearchOptions& options) {
  if (request.max_iterations < 1) {
    throw PreconditionError("max_iterations must be >= 1");
  }
  std::vector<Candidate> remaining;
  for (const auto& id : discover(corpus, request, AugType::kJoin)) {
    remaining.push_back({id, AugType::kJoin});
  }
  for (const auto& id : discover(corpus, request, AugType::kUnion)) {
    remaining.push_back({id, AugType::kUnion});
  }
  std::sort(remaining.begin(), remaining.end(), [](const auto& a, const auto& b) {
    return a.id != b.id ? a.id < b.id : a.type < b.type;
  });

  SearchResult result;
  double current = evaluate_augmentation(corpus, request, {}).r2;
  result.utility_trace.push_back(current);
  constexpr double kNotComposable = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < request.max_iterations && !remaining.empty();
       ++iter) {
    std::vector<double> scores(remaining.size(), kNotComposable);
    parallel_for(remaining.size(), options.threads, [&](std::size_t i) {
      try {
        scores[i] = evaluate_candidate(corpus, request, result.chosen, remaining[i]);
      } catch (const SchemaError&) {
        scores[i] = kNotComposable;
      }
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (scores[i] > scores[best] + 1e-12) best = i;
    }
    if (!(scores[best] > current + options.tie_epsilon)) break;
    const Candidate pick = remaining[best];
    result.chosen.push_back(pick);
    current = scores[best];
    result.utility_trace.push_back(current);
    std::erase_if(remaining, [&](const Candidate& c) { return c.id == pick.id; });
  }
  result.final_model = evaluate_augmentation(corpus, request, result.chosen).fit;
  return result;
}

}  // namespace dpsearch
