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

#ifndef DPSEARCH_RELATION_H_
#define DPSEARCH_RELATION_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dpsearch {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A categorical column with a public, ordered domain.
struct CategoricalDomain {
  std::string name;
  std::vector<std::string> domain;

  std::optional<std::size_t> index_of(std::string_view value) const;
  bool operator==(const CategoricalDomain&) const = default;
};

// The join key is a categorical column whose domain is public.
using JoinKey = CategoricalDomain;

class Schema {
 public:
  Schema() = default;
  // Throws SchemaError when the invariants do not hold.
  explicit Schema(std::vector<std::string> feature_names,
                  std::optional<JoinKey> join_key = std::nullopt,
                  std::vector<CategoricalDomain> categoricals = {});

  const std::vector<std::string>& feature_names() const { return features_; }
  const std::optional<JoinKey>& join_key() const { return join_key_; }
  const std::vector<CategoricalDomain>& categoricals() const {
    return categoricals_;
  }
  std::size_t num_features() const { return features_.size(); }
  std::optional<std::size_t> feature_index(std::string_view name) const;

  bool operator==(const Schema&) const = default;

 private:
  std::vector<std::string> features_;
  std::optional<JoinKey> join_key_;
  std::vector<CategoricalDomain> categoricals_;
};

// Rows of real features with an optional join key per row (an index into
// the key domain) and optional categorical codes.
class Dataset {
 public:
  // Throws on shape mismatches, out-of-domain codes, or n = 0.
  Dataset(Schema schema, RowMatrix features, std::vector<std::size_t> keys,
          double norm_bound,
          std::vector<std::vector<std::size_t>> categorical_codes = {});

  // norm_bound set to the observed maximum row norm.
  static Dataset with_observed_bound(
      Schema schema, RowMatrix features, std::vector<std::size_t> keys = {},
      std::vector<std::vector<std::size_t>> categorical_codes = {});

  const Schema& schema() const { return schema_; }
  const RowMatrix& features() const { return features_; }
  const std::vector<std::size_t>& keys() const { return keys_; }
  const std::vector<std::vector<std::size_t>>& categorical_codes() const {
    return codes_;
  }
  double norm_bound() const { return norm_bound_; }
  std::size_t rows() const { return static_cast<std::size_t>(features_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(features_.cols()); }
  bool has_key() const { return schema_.join_key().has_value(); }
  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * cols(), cols()};
  }
  double max_row_norm() const;

 private:
  Schema schema_;
  RowMatrix features_;
  std::vector<std::size_t> keys_;
  std::vector<std::vector<std::size_t>> codes_;
  double norm_bound_;
};

// Schema sidecar: {features:[...], join_key:{name, domain}|null,
// categorical:[{name, domain}]?}.
Schema parse_schema_json(std::string_view text);
Schema load_schema(const std::string& path);
std::string schema_to_json(const Schema& schema);

Dataset parse_csv(std::string_view text, const Schema& schema_hint);
Dataset load_csv(const std::string& path, const Schema& schema_hint);

Dataset remove_outliers(const Dataset& ds, double threshold_std = 1.5);
Dataset bound_norm(const Dataset& ds, double B);
// Projects every feature except `target` onto the top-K principal
// components of the centered feature matrix (sample covariance). Output
// features are pc1..pcK followed by the target.
Dataset reduce_dims(const Dataset& ds, std::size_t K, const std::string& target);
Dataset one_hot(const Dataset& ds, const std::string& column);

}  // namespace dpsearch

#endif  // DPSEARCH_RELATION_H_
