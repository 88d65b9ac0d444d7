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

// Brute-force oracles shared by the unit and acceptance tests. None of
// them go through the semi-ring code they are used to check.

#ifndef DPSEARCH_TESTS_TEST_UTIL_H_
#define DPSEARCH_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dpsearch/relation.h"
#include "dpsearch/rng.h"
#include "dpsearch/semiring.h"

namespace dpsearch::testing {

inline std::vector<std::string> feature_names(const std::string& prefix,
                                              std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

inline RowMatrix random_rows(CounterRng& rng, std::size_t n, std::size_t m,
                             double lo = -2.0, double hi = 2.0) {
  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = lo + (hi - lo) * rng.uniform();
  }
  return x;
}

// Exponent vectors with total degree <= k over m features.
inline std::vector<std::vector<int>> exponent_vectors(std::size_t m, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> e(m, 0);
  auto rec = [&](auto&& self, std::size_t j, int left) -> void {
    if (j == m) {
      out.push_back(e);
      return;
    }
    for (int p = 0; p <= left; ++p) {
      e[j] = p;
      self(self, j + 1, left - p);
    }
    e[j] = 0;
  };
  rec(rec, 0, k);
  return out;
}

inline std::string monomial_string(const std::vector<std::string>& names,
                                   const std::vector<int>& e) {
  std::string s;
  for (std::size_t j = 0; j < e.size(); ++j) {
    if (e[j] == 0) continue;
    if (!s.empty()) s += "*";
    s += names[j];
    if (e[j] > 1) s += "^" + std::to_string(e[j]);
  }
  return s.empty() ? "1" : s;
}

inline double brute_monomial(const RowMatrix& rows, const std::vector<int>& e) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    double p = 1.0;
    for (std::size_t j = 0; j < e.size(); ++j) {
      for (int t = 0; t < e[j]; ++t) p *= rows(i, static_cast<Eigen::Index>(j));
    }
    sum += p;
  }
  return sum;
}

inline bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// Largest relative deviation between s and the brute-force aggregate of
// `rows`, over every monomial of degree <= k.
inline double max_rel_error(const SemiringVector& s, const RowMatrix& rows,
                            const std::vector<std::string>& names, int k) {
  double worst = 0.0;
  for (const auto& e : exponent_vectors(names.size(), k)) {
    const double want = brute_monomial(rows, e);
    const double got = s.at(monomial_string(names, e));
    worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
  }
  return worst;
}

struct KeyedRows {
  RowMatrix rows;
  std::vector<std::size_t> keys;
};

// Materialized equi-join: concatenated rows for every pair with equal keys.
inline RowMatrix materialize_join(const KeyedRows& a, const KeyedRows& b) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index i = 0; i < a.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows.rows(); ++j) {
      if (a.keys[static_cast<std::size_t>(i)] != b.keys[static_cast<std::size_t>(j)]) {
        continue;
      }
      std::vector<double> r;
      for (Eigen::Index c = 0; c < a.rows.cols(); ++c) r.push_back(a.rows(i, c));
      for (Eigen::Index c = 0; c < b.rows.cols(); ++c) r.push_back(b.rows(j, c));
      out.push_back(std::move(r));
    }
  }
  RowMatrix m(static_cast<Eigen::Index>(out.size()), a.rows.cols() + b.rows.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t c = 0; c < out[i].size(); ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = out[i][c];
    }
  }
  return m;
}

inline JoinKey numbered_key(const std::string& name, std::size_t d) {
  JoinKey key{name, {}};
  for (std::size_t v = 0; v < d; ++v) key.domain.push_back("k" + std::to_string(v));
  return key;
}

}  // namespace dpsearch::testing

#endif  // DPSEARCH_TESTS_TEST_UTIL_H_
