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
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dpsearch/errors.h"

namespace dpsearch {
namespace {

Json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

double read_number(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw SchemaError("expected a number, got " + j.dump());
  return j.get<double>();
}

template <typename T>
T required(const Json& j, const char* field) {
  if (!j.contains(field)) {
    throw SchemaError(std::string("missing field: ") + field);
  }
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad field ") + field + ": " + e.what());
  }
}

Json group_to_json(const SemiringVector& g) {
  Json out = Json::object();
  for (std::size_t i = 0; i < g.size(); ++i) {
    out[g.basis()->name(i)] = number(g[i]);
  }
  return out;
}

SemiringVector group_from_json(const Json& j, const BasisPtr& basis) {
  if (!j.is_object()) throw SchemaError("group must be an object");
  SemiringVector v(basis);
  for (const auto& [mono, value] : j.items()) {
    v[basis->index_of(mono)] = read_number(value);
  }
  return v;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json noise_to_json(const NoiseSpec& n) {
  Json j;
  j["distribution"] =
      n.distribution == NoiseDistribution::kGaussian ? "gaussian" : "laplace";
  j["scale"] = number(n.scale);
  j["sensitivity"] = number(n.sensitivity);
  return j;
}

NoiseSpec noise_from_json(const Json& j) {
  NoiseSpec n;
  n.distribution = required<std::string>(j, "distribution") == "laplace"
                       ? NoiseDistribution::kLaplace
                       : NoiseDistribution::kGaussian;
  n.scale = read_number(j.at("scale"));
  n.sensitivity = read_number(j.at("sensitivity"));
  return n;
}

}  // namespace

Json relation_to_json(const AnnotatedRelation& r) {
  Json j;
  j["order"] = r.order();
  j["features"] = r.features();
  if (r.keyed()) {
    j["join_key"] = r.key()->name;
    j["join_key_domain"] = r.key()->domain;
  } else {
    j["join_key"] = nullptr;
    j["join_key_domain"] = nullptr;
  }
  Json groups = Json::object();
  if (r.keyed()) {
    for (std::size_t g = 0; g < r.groups().size(); ++g) {
      groups[r.key()->domain[g]] = group_to_json(r.group(g));
    }
  } else {
    groups["*"] = group_to_json(r.group(0));
  }
  j["groups"] = std::move(groups);
  return j;
}

AnnotatedRelation relation_from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("relation must be a JSON object");
  const int order = required<int>(j, "order");
  auto features = required<std::vector<std::string>>(j, "features");
  BasisPtr basis = MonomialBasis::make(std::move(features), order);
  if (!j.contains("groups") || !j["groups"].is_object()) {
    throw SchemaError("missing groups object");
  }
  const Json& groups = j["groups"];
  const bool keyed = j.contains("join_key_domain") && !j["join_key_domain"].is_null();
  if (!keyed) {
    if (groups.size() != 1 || !groups.contains("*")) {
      throw SchemaError("unkeyed relation needs exactly the group \"*\"");
    }
    return AnnotatedRelation(group_from_json(groups["*"], basis));
  }
  JoinKey key;
  key.name = j.contains("join_key") && j["join_key"].is_string()
                 ? j["join_key"].get<std::string>()
                 : std::string("key");
  key.domain = j["join_key_domain"].get<std::vector<std::string>>();
  if (groups.size() != key.domain.size()) {
    throw SchemaError("groups do not match join_key_domain");
  }
  std::vector<SemiringVector> vs;
  for (const auto& v : key.domain) {
    if (!groups.contains(v)) throw SchemaError("missing group for key " + v);
    vs.push_back(group_from_json(groups[v], basis));
  }
  return AnnotatedRelation(std::move(key), std::move(vs));
}

Json privatized_to_json(const PrivatizedStats& s) {
  Json j = relation_to_json(s.stats);
  Json p;
  p["mechanism"] = std::string(mechanism_name(s.mechanism));
  p["epsilon"] = number(s.budget.epsilon);
  p["delta"] = number(s.budget.delta);
  p["k"] = s.order;
  p["B"] = number(s.norm_bound);
  p["n"] = s.cardinality;
  p["join_mode"] = s.join_mode;
  p["sensitivity"] = s.noise.empty() ? Json(nullptr) : number(s.noise.front().sensitivity);
  p["noise"] = Json::array();
  for (const auto& n : s.noise) p["noise"].push_back(noise_to_json(n));
  p["log_noise_scale"] = number(s.log_noise_scale);
  p["guaranteed_failure"] = s.guaranteed_failure;
  p["spends"] = Json::array();
  for (const auto& sp : s.spends) {
    p["spends"].push_back(
        {{"label", sp.label}, {"epsilon", number(sp.epsilon)}, {"delta", number(sp.delta)}});
  }
  p["seed_fingerprint"] = hex64(s.seed_fingerprint);
  j["privacy"] = std::move(p);
  return j;
}

PrivatizedStats privatized_from_json(const Json& j) {
  PrivatizedStats s;
  s.stats = relation_from_json(j);
  if (!j.contains("privacy")) throw SchemaError("missing privacy block");
  const Json& p = j["privacy"];
  auto kind = parse_mechanism(required<std::string>(p, "mechanism"));
  if (!kind) throw SchemaError("unknown mechanism in privacy block");
  s.mechanism = *kind;
  s.budget.epsilon = read_number(p.at("epsilon"));
  s.budget.delta = read_number(p.at("delta"));
  s.order = required<int>(p, "k");
  s.norm_bound = read_number(p.at("B"));
  s.cardinality = required<std::size_t>(p, "n");
  s.join_mode = p.value("join_mode", s.stats.keyed());
  if (p.contains("noise")) {
    for (const auto& n : p["noise"]) s.noise.push_back(noise_from_json(n));
  }
  if (p.contains("log_noise_scale")) {
    s.log_noise_scale = read_number(p["log_noise_scale"]);
  }
  s.guaranteed_failure = p.value("guaranteed_failure", false);
  if (p.contains("spends")) {
    for (const auto& sp : p["spends"]) {
      s.spends.push_back({required<std::string>(sp, "label"),
                          read_number(sp.at("epsilon")),
                          read_number(sp.at("delta"))});
    }
  }
  if (p.contains("seed_fingerprint")) {
    s.seed_fingerprint =
        std::stoull(p["seed_fingerprint"].get<std::string>(), nullptr, 16);
  }
  if (s.order != s.stats.order()) {
    throw SchemaError("privacy block order disagrees with the statistics");
  }
  return s;
}

Json moments_to_json(const PrivatizedMoments& m) {
  Json j;
  j["union_opt"] = {{"feature", m.feature},
                    {"target", m.target},
                    {"var_x", number(m.var_x)},
                    {"cov_xy", number(m.cov_xy)},
                    {"n", m.n}};
  j["privacy"] = {{"mechanism", "fpm-union-opt"},
                  {"epsilon", number(m.budget.epsilon)},
                  {"delta", number(m.budget.delta)},
                  {"k", 2},
                  {"B", number(m.norm_bound)},
                  {"n", m.n},
                  {"sensitivity", number(m.noise.sensitivity)},
                  {"noise", Json::array({noise_to_json(m.noise)})},
                  {"seed_fingerprint", hex64(m.seed_fingerprint)}};
  return j;
}

Json fit_to_json(const FitOutcome& fit) {
  Json j;
  Json theta = Json::object();
  if (fit.params) {
    const auto& p = *fit.params;
    for (std::size_t i = 0; i < p.feature_names.size(); ++i) {
      theta[p.feature_names[i]] = number(p.theta(static_cast<Eigen::Index>(i)));
    }
    theta["(intercept)"] = number(p.intercept());
  }
  j["theta"] = std::move(theta);
  j["failed"] = fit.failed();
  j["r2"] = number(fit.r2_proxy);
  return j;
}

Json parse_json_text(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace dpsearch
