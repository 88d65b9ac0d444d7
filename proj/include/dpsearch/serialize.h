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

#ifndef DPSEARCH_SERIALIZE_H_
#define DPSEARCH_SERIALIZE_H_

#include <string>
#include <string_view>

#include "dpsearch/mechanisms.h"
#include "dpsearch/regression.h"
#include "dpsearch/semiring.h"
#include "json.hpp"

namespace dpsearch {

using Json = nlohmann::ordered_json;

// {order, features, join_key, join_key_domain, groups:{key:{mono:value}}};
// an unkeyed relation has join_key null and a single group "*". Doubles use
// shortest round-trip formatting; non-finite values are written as null and
// read back as NaN.
Json relation_to_json(const AnnotatedRelation& r);
AnnotatedRelation relation_from_json(const Json& j);

// Relation JSON plus a "privacy" block.
Json privatized_to_json(const PrivatizedStats& s);
PrivatizedStats privatized_from_json(const Json& j);

Json moments_to_json(const PrivatizedMoments& m);

// {theta:{name:value, "(intercept)":value}, failed, r2}.
Json fit_to_json(const FitOutcome& fit);

Json parse_json_text(std::string_view text);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace dpsearch

#endif  // DPSEARCH_SERIALIZE_H_
