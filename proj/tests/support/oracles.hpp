// Copyright 2026 The CRDS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reference implementations used only by tests. Each one takes the slow,
// obvious route and shares no code with the library path it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "crds/random.hpp"

namespace crds::oracle {

struct EigenPairs {
  std::vector<double> values;               // descending
  std::vector<std::vector<double>> vectors;  // vectors[j] pairs with values[j]
};

/// Cyclic Jacobi rotations on a dense symmetric matrix (row-major, n x n).
inline EigenPairs jacobi_eigen(std::vector<double> a, std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a[x * n + x] > a[y * n + y]; });
  EigenPairs out;
  for (std::size_t j : order) {
    out.values.push_back(a[j * n + j]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k * n + j];
    out.vectors.push_back(std::move(col));
  }
  return out;
}

/// Covariance with 1/N normalization, from rows of doubles.
inline std::vector<double> covariance(const std::vector<std::vector<double>>& rows,
                                      std::vector<double>* mean_out = nullptr) {
  const std::size_t n = rows.size(), v = rows.front().size();
  std::vector<double> mean(v, 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < v; ++i) mean[i] += r[i];
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> c(v * v, 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j) c[i * v + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
  for (double& x : c) x /= static_cast<double>(n);
  if (mean_out) *mean_out = mean;
  return c;
}

/// Naive triple loop, double accumulation in increasing k, rounded to float.
inline std::vector<float> matmul_abt_float(const std::vector<float>& a, std::size_t m,
                                           const std::vector<float>& b, std::size_t t,
                                           std::size_t d) {
  std::vector<float> out(m * t);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k)
        s += static_cast<double>(a[i * d + k]) * static_cast<double>(b[j * d + k]);
      out[i * t + j] = static_cast<float>(s);
    }
  }
  return out;
}

/// Same product, kept in double.
inline std::vector<double> matmul_abt_double(const std::vector<float>& a, std::size_t m,
                                             const std::vector<float>& b, std::size_t t,
                                             std::size_t d) {
  std::vector<double> out(m * t);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k < d; ++k)
        s += static_cast<long double>(a[i * d + k]) * static_cast<long double>(b[j * d + k]);
      out[i * t + j] = static_cast<double>(s);
    }
  return out;
}

struct Pick {
  std::size_t pool_index;
  std::size_t test_index;
};

/// Re-simulates round-robin greedy retrieval, rescanning every row per pick.
inline std::vector<Pick> brute_force_round_robin(const std::vector<float>& scores,
                                                 std::size_t rows, std::size_t cols,
                                                 std::size_t k) {
  std::vector<bool> taken(rows, false);
  std::vector<Pick> picks;
  for (std::size_t step = 0; step < k; ++step) {
    const std::size_t j = step % cols;
    std::size_t best = rows;
    for (std::size_t i = 0; i < rows; ++i) {
      if (taken[i]) continue;
      if (best == rows || scores[i * cols + j] > scores[best * cols + j]) best = i;
    }
    taken[best] = true;
    picks.push_back({best, j});
  }
  return picks;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Scratch directory removed on scope exit.

// Rows drawn from an axis-scaled Gaussian (scales 0.5 to 5) mixed by a random
// dense matrix, so eigenvectors are not axis-aligned. Offset mean.
inline std::vector<float> anisotropic_gaussian(std::size_t n, std::size_t v, std::uint64_t seed) {
  SeededStream rng(seed);
  std::vector<double> mix(v * v);
  for (double& x : mix) x = rng.next_normal();
  std::vector<float> out(n * v);
  std::vector<double> z(v);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < v; ++i) {
      z[i] = rng.next_normal() * (0.5 + 4.5 * static_cast<double>(i) / static_cast<double>(v));
    }
    for (std::size_t j = 0; j < v; ++j) {
      double s = 1.0 + 0.1 * static_cast<double>(j);
      for (std::size_t i = 0; i < v; ++i) s += z[i] * mix[i * v + j] / std::sqrt(double(v));
      out[r * v + j] = static_cast<float>(s);
    }
  }
  return out;
}

// Scores on a coarse grid so ties are common. Values lie in [-1, 1].
inline std::vector<float> grid_scores(SeededStream& rng, std::size_t rows, std::size_t cols,
                                      std::size_t levels) {
  std::vector<float> out(rows * cols);
  for (float& x : out) {
    x = static_cast<float>(-1.0 + 2.0 * static_cast<double>(rng.next_below(levels)) /
                                      static_cast<double>(levels - 1));
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("crds-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace crds::oracle
