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

#include "dpsearch/relation.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dpsearch/errors.h"
#include "json.hpp"

namespace dpsearch {
namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Splits one CSV record; double quotes group fields containing commas.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

double parse_real(std::string_view cell, std::size_t line,
                  const std::string& column) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
      !std::isfinite(v)) {
    throw DataError("non-numeric value '" + std::string(cell) + "' in column " +
                    column + " at line " + std::to_string(line));
  }
  return v;
}

CategoricalDomain parse_domain(const json& j, const char* what) {
  if (!j.is_object() || !j.contains("name") || !j.contains("domain")) {
    throw SchemaError(std::string(what) + " must be {name, domain}");
  }
  CategoricalDomain d;
  d.name = j.at("name").get<std::string>();
  for (const auto& v : j.at("domain")) {
    d.domain.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  }
  return d;
}

}  // namespace

std::optional<std::size_t> CategoricalDomain::index_of(
    std::string_view value) const {
  auto it = std::find(domain.begin(), domain.end(), value);
  if (it == domain.end()) return std::nullopt;
  return static_cast<std::size_t>(it - domain.begin());
}

Schema::Schema(std::vector<std::string> feature_names,
               std::optional<JoinKey> join_key,
               std::vector<CategoricalDomain> categoricals)
    : features_(std::move(feature_names)),
      join_key_(std::move(join_key)),
      categoricals_(std::move(categoricals)) {
  std::set<std::string> names;
  for (const auto& f : features_) {
    if (f.empty()) throw SchemaError("empty feature name");
    if (f.find_first_of("*^") != std::string::npos) {
      throw SchemaError("feature name may not contain '*' or '^': " + f);
    }
    if (!names.insert(f).second) {
      throw SchemaError("duplicate feature name: " + f);
    }
  }
  auto check_domain = [&](const CategoricalDomain& d, const char* what) {
    if (d.name.empty()) throw SchemaError(std::string(what) + " without name");
    if (!names.insert(d.name).second) {
      throw SchemaError(std::string(what) + " name collides: " + d.name);
    }
    if (d.domain.empty()) {
      throw SchemaError(std::string(what) + " domain is empty: " + d.name);
    }
    std::set<std::string> values(d.domain.begin(), d.domain.end());
    if (values.size() != d.domain.size()) {
      throw SchemaError(std::string(what) + " domain has duplicates: " +
                        d.name);
    }
  };
  if (join_key_) check_domain(*join_key_, "join key");
  for (const auto& c : categoricals_) check_domain(c, "categorical column");
}

std::optional<std::size_t> Schema::feature_index(std::string_view name) const {
  auto it = std::find(features_.begin(), features_.end(), name);
  if (it == features_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - features_.begin());
}

Dataset::Dataset(Schema schema, RowMatrix features,
                 std::vector<std::size_t> keys, double norm_bound,
                 std::vector<std::vector<std::size_t>> categorical_codes)
    : schema_(std::move(schema)),
      features_(std::move(features)),
      keys_(std::move(keys)),
      codes_(std::move(categorical_codes)),
      norm_bound_(norm_bound) {
  if (features_.rows() < 1) throw PreconditionError("dataset needs n >= 1");
  if (static_cast<std::size_t>(features_.cols()) != schema_.num_features()) {
    throw SchemaError("feature matrix width does not match schema");
  }
  if (!(norm_bound_ >= 0.0)) throw PreconditionError("norm bound must be >= 0");
  if (schema_.join_key()) {
    if (keys_.size() != rows()) throw SchemaError("one key per row required");
    for (auto k : keys_) {
      if (k >= schema_.join_key()->domain.size()) {
        throw DataError("join key index outside domain");
      }
    }
  } else if (!keys_.empty()) {
    throw SchemaError("keys given for a schema without join key");
  }
  if (codes_.empty()) codes_.resize(schema_.categoricals().size());
  if (codes_.size() != schema_.categoricals().size()) {
    throw SchemaError("categorical code columns do not match schema");
  }
  for (std::size_t c = 0; c < codes_.size(); ++c) {
    if (codes_[c].size() != rows()) {
      throw SchemaError("categorical column length mismatch");
    }
    for (auto v : codes_[c]) {
      if (v >= schema_.categoricals()[c].domain.size()) {
        throw DataError("categorical code outside domain");
      }
    }
  }
}

Dataset Dataset::with_observed_bound(
    Schema schema, RowMatrix features, std::vector<std::size_t> keys,
    std::vector<std::vector<std::size_t>> categorical_codes) {
  double bound = features.rows() > 0 ? features.rowwise().norm().maxCoeff() : 0;
  return Dataset(std::move(schema), std::move(features), std::move(keys), bound,
                 std::move(categorical_codes));
}

double Dataset::max_row_norm() const {
  return features_.rowwise().norm().maxCoeff();
}

Schema parse_schema_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("features") || !j["features"].is_array()) {
    throw SchemaError("schema needs a features array");
  }
  std::vector<std::string> features = j["features"].get<std::vector<std::string>>();
  std::optional<JoinKey> key;
  if (j.contains("join_key") && !j["join_key"].is_null()) {
    key = parse_domain(j["join_key"], "join_key");
  }
  std::vector<CategoricalDomain> cats;
  if (j.contains("categorical")) {
    for (const auto& c : j["categorical"]) {
      cats.push_back(parse_domain(c, "categorical"));
    }
  }
  return Schema(std::move(features), std::move(key), std::move(cats));
}

Schema load_schema(const std::string& path) {
  return parse_schema_json(read_file(path));
}

std::string schema_to_json(const Schema& schema) {
  json j;
  j["features"] = schema.feature_names();
  if (schema.join_key()) {
    j["join_key"] = {{"name", schema.join_key()->name},
                     {"domain", schema.join_key()->domain}};
  } else {
    j["join_key"] = nullptr;
  }
  if (!schema.categoricals().empty()) {
    j["categorical"] = json::array();
    for (const auto& c : schema.categoricals()) {
      j["categorical"].push_back({{"name", c.name}, {"domain", c.domain}});
    }
  }
  return j.dump(2);
}

Dataset parse_csv(std::string_view text, const Schema& schema_hint) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!trim(line).empty()) lines.push_back(line);
    pos = nl + 1;
  }
  if (lines.empty()) throw DataError("CSV has no header row");
  std::vector<std::string> header = split_record(lines[0]);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column: " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto& features = schema_hint.feature_names();
  std::vector<std::size_t> feature_cols;
  for (const auto& f : features) feature_cols.push_back(column(f));
  std::optional<std::size_t> key_col;
  if (schema_hint.join_key()) key_col = column(schema_hint.join_key()->name);
  std::vector<std::size_t> cat_cols;
  for (const auto& c : schema_hint.categoricals()) {
    cat_cols.push_back(column(c.name));
  }

  std::size_t n = lines.size() - 1;
  if (n == 0) throw DataError("CSV has no data rows");
  RowMatrix x(static_cast<Eigen::Index>(n),
              static_cast<Eigen::Index>(features.size()));
  std::vector<std::size_t> keys;
  std::vector<std::vector<std::size_t>> codes(cat_cols.size());
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<std::string> cells = split_record(lines[r + 1]);
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(r + 2) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    for (std::size_t f = 0; f < features.size(); ++f) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) =
          parse_real(cells[feature_cols[f]], r + 2, features[f]);
    }
    if (key_col) {
      const std::string& v = cells[*key_col];
      auto idx = schema_hint.join_key()->index_of(v);
      if (!idx) {
        throw DataError("join key value '" + v + "' outside declared domain");
      }
      keys.push_back(*idx);
    }
    for (std::size_t c = 0; c < cat_cols.size(); ++c) {
      const std::string& v = cells[cat_cols[c]];
      auto idx = schema_hint.categoricals()[c].index_of(v);
      if (!idx) {
        throw DataError("undeclared category '" + v + "' in column " +
                        schema_hint.categoricals()[c].name);
      }
      codes[c].push_back(*idx);
    }
  }
  return Dataset::with_observed_bound(schema_hint, std::move(x),
                                      std::move(keys), std::move(codes));
}

Dataset load_csv(const std::string& path, const Schema& schema_hint) {
  return parse_csv(read_file(path), schema_hint);
}

namespace {

Dataset select_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
  RowMatrix x(static_cast<Eigen::Index>(rows.size()), ds.features().cols());
  std::vector<std::size_t> keys;
  std::vector<std::vector<std::size_t>> codes(ds.categorical_codes().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) =
        ds.features().row(static_cast<Eigen::Index>(rows[i]));
    if (ds.has_key()) keys.push_back(ds.keys()[rows[i]]);
    for (std::size_t c = 0; c < codes.size(); ++c) {
      codes[c].push_back(ds.categorical_codes()[c][rows[i]]);
    }
  }
  return Dataset::with_observed_bound(ds.schema(), std::move(x),
                                      std::move(keys), std::move(codes));
}

}  // namespace

Dataset remove_outliers(const Dataset& ds, double threshold_std) {
  const auto n = ds.features().rows();
  if (n < 2) throw PreconditionError("remove_outliers needs n >= 2");
  Eigen::RowVectorXd mean = ds.features().colwise().mean();
  RowMatrix centered = ds.features().rowwise() - mean;
  Eigen::RowVectorXd sd =
      (centered.array().square().colwise().sum() / static_cast<double>(n - 1))
          .sqrt();
  std::vector<std::size_t> keep;
  for (Eigen::Index r = 0; r < n; ++r) {
    bool outlier = false;
    for (Eigen::Index c = 0; c < centered.cols(); ++c) {
      if (sd(c) > 0 && std::abs(centered(r, c)) > threshold_std * sd(c)) {
        outlier = true;
        break;
      }
    }
    if (!outlier) keep.push_back(static_cast<std::size_t>(r));
  }
  if (keep.empty()) return ds;
  return select_rows(ds, keep);
}

Dataset bound_norm(const Dataset& ds, double B) {
  if (!(B > 0)) throw PreconditionError("bound_norm needs B > 0");
  double max_norm = ds.max_row_norm();
  double c = max_norm > B ? B / max_norm : 1.0;
  RowMatrix x = ds.features() * c;
  // Guard against the scaled maximum landing one ulp above B.
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double norm = x.row(r).norm();
    if (norm > B) x.row(r) *= B / norm;
  }
  return Dataset(ds.schema(), std::move(x), ds.keys(), B,
                 ds.categorical_codes());
}

Dataset reduce_dims(const Dataset& ds, std::size_t K,
                    const std::string& target) {
  const auto& names = ds.schema().feature_names();
  std::vector<Eigen::Index> proj;
  std::optional<Eigen::Index> target_col;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!target.empty() && names[i] == target) {
      target_col = static_cast<Eigen::Index>(i);
    } else {
      proj.push_back(static_cast<Eigen::Index>(i));
    }
  }
  if (!target.empty() && !target_col) {
    throw SchemaError("unknown target column: " + target);
  }
  if (K < 1 || K > proj.size()) {
    throw PreconditionError("reduce_dims needs 1 <= K <= number of features");
  }
  const Eigen::Index n = ds.features().rows();
  if (n < 2) throw PreconditionError("reduce_dims needs n >= 2");
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(proj.size()));
  for (std::size_t j = 0; j < proj.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) = ds.features().col(proj[j]);
  }
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues ascend; take the last K columns in descending order.
  Eigen::MatrixXd components(cov.rows(), static_cast<Eigen::Index>(K));
  for (std::size_t j = 0; j < K; ++j) {
    Eigen::VectorXd v =
        solver.eigenvectors().col(cov.cols() - 1 - static_cast<Eigen::Index>(j));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    components.col(static_cast<Eigen::Index>(j)) = v;
  }
  Eigen::MatrixXd scores = x * components;

  std::vector<std::string> out_names;
  for (std::size_t j = 0; j < K; ++j) out_names.push_back("pc" + std::to_string(j + 1));
  if (target_col) out_names.push_back(target);
  RowMatrix out(n, static_cast<Eigen::Index>(out_names.size()));
  out.leftCols(static_cast<Eigen::Index>(K)) = scores;
  if (target_col) out.col(out.cols() - 1) = ds.features().col(*target_col);
  Schema schema(out_names, ds.schema().join_key(), ds.schema().categoricals());
  return Dataset::with_observed_bound(std::move(schema), std::move(out),
                                      ds.keys(), ds.categorical_codes());
}

Dataset one_hot(const Dataset& ds, const std::string& column) {
  const auto& cats = ds.schema().categoricals();
  auto it = std::find_if(cats.begin(), cats.end(),
                         [&](const auto& c) { return c.name == column; });
  if (it == cats.end()) {
    throw SchemaError("not a declared categorical column: " + column);
  }
  const std::size_t ci = static_cast<std::size_t>(it - cats.begin());
  const CategoricalDomain& dom = *it;
  std::vector<std::string> names = ds.schema().feature_names();
  for (const auto& v : dom.domain) names.push_back(column + "=" + v);
  std::vector<CategoricalDomain> rest;
  std::vector<std::vector<std::size_t>> codes;
  for (std::size_t c = 0; c < cats.size(); ++c) {
    if (c == ci) continue;
    rest.push_back(cats[c]);
    codes.push_back(ds.categorical_codes()[c]);
  }
  const Eigen::Index n = ds.features().rows();
  const Eigen::Index m = ds.features().cols();
  RowMatrix x = RowMatrix::Zero(n, m + static_cast<Eigen::Index>(dom.domain.size()));
  x.leftCols(m) = ds.features();
  for (Eigen::Index r = 0; r < n; ++r) {
    x(r, m + static_cast<Eigen::Index>(ds.categorical_codes()[ci][static_cast<std::size_t>(r)])) = 1.0;
  }
  Schema schema(std::move(names), ds.schema().join_key(), std::move(rest));
  return Dataset::with_observed_bound(std::move(schema), std::move(x),
                                      ds.keys(), std::move(codes));
}

}  // namespace dpsearch
