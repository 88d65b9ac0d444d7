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

#ifndef DPSEARCH_SEARCH_H_
#define DPSEARCH_SEARCH_H_

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsearch/mechanisms.h"
#include "dpsearch/regression.h"
#include "dpsearch/relation.h"

namespace dpsearch {

enum class AugType { kJoin, kUnion, kBoth };

std::string_view aug_type_name(AugType t);

struct CorpusEntry {
  std::string id;
  PrivatizedStats stats;
  Schema schema;
  AugType aug_type = AugType::kUnion;
};

// Registered releases keyed by id. Reads may run concurrently; registration
// takes an exclusive lock.
class Corpus {
 public:
  // Uses `id` when given, else the next "ds-NNNN". Throws PreconditionError
  // on a duplicate id and SchemaError when stats and schema disagree or a
  // join-capable entry lacks a key domain.
  std::string register_dataset(PrivatizedStats stats, Schema schema,
                               AugType aug_type,
                               std::optional<std::string> id = std::nullopt);

  std::shared_ptr<const CorpusEntry> find(const std::string& id) const;
  // Entries in id order.
  std::vector<std::shared_ptr<const CorpusEntry>> entries() const;
  std::size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const CorpusEntry>> entries_;
  std::size_t next_ = 1;
};

// Schema of the statistics inside a release (features and key).
Schema schema_of(const PrivatizedStats& stats);

struct SearchRequest {
  PrivatizedStats train;
  PrivatizedStats test;
  std::vector<std::string> features;
  std::string target;
  std::size_t max_iterations = 5;
};

struct Candidate {
  std::string id;
  AugType type = AugType::kUnion;  // kJoin or kUnion

  bool operator==(const Candidate&) const = default;
};

// Join candidates share the request's key name with an intersecting domain
// and bring at least one new feature; union candidates have the request's
// feature set (join-capable entries included with their key marginalised).
std::vector<std::string> discover(const Corpus& corpus,
                                  const SearchRequest& request, AugType type);

struct AugmentedFit {
  FitOutcome fit;
  double r2 = 0.0;  // on the test side; 0 on Failure
  std::vector<std::string> features;
};

// trainAug = (train U unions) joined with the join candidates; testAug =
// test joined with the same candidates. Joins go through the unbiased
// cross-moment correction. Throws SchemaError when the set cannot be
// composed.
AugmentedFit evaluate_augmentation(const Corpus& corpus,
                                   const SearchRequest& request,
                                   std::span<const Candidate> chosen);

double evaluate_candidate(const Corpus& corpus, const SearchRequest& request,
                          std::span<const Candidate> current,
                          const Candidate& candidate);

struct SearchOptions {
  double tie_epsilon = 1e-6;
  std::size_t threads = 1;
};

struct SearchResult {
  std::vector<Candidate> chosen;
  std::vector<double> utility_trace;
  FitOutcome final_model;
};

SearchResult greedy_search(const Corpus& corpus, const SearchRequest& request,
                           const SearchOptions& options = {});

}  // namespace dpsearch

#endif  // DPSEARCH_SEARCH_H_
