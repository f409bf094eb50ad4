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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "crds/embedding_provider.hpp"
#include "crds/matrix.hpp"

namespace crds {

inline constexpr double kDefaultEigenFloor = 1e-10;

/// Centering mean plus the leading beta columns of U * Lambda^{-1/2}.
///
/// Fit results are kept in double precision. apply() runs on the float32
/// rounding of the parameters, which is exactly what the transformer file
/// stores, so a persisted transformer reproduces apply() bit for bit.
class WhiteningTransformer {
 public:
  WhiteningTransformer(std::vector<double> mean, std::vector<double> matrix,
                       std::size_t beta, std::uint64_t fit_count,
                       std::vector<double> eigenvalues = {});

  std::size_t v() const { return mean_.size(); }
  std::size_t beta() const { return beta_; }
  std::uint64_t fit_count() const { return fit_count_; }
  std::span<const double> mean() const { return mean_; }
  /// v x beta, row-major.
  std::span<const double> matrix() const { return matrix_; }
  double matrix_at(std::size_t row, std::size_t col) const {
    return matrix_[row * beta_ + col];
  }
  /// Top-beta covariance eigenvalues, descending. Empty after a file load.
  std::span<const double> eigenvalues() const { return eigenvalues_; }

  std::span<const float> stored_mean() const { return mean_f_; }
  std::span<const float> stored_matrix() const { return matrix_f_; }

  std::vector<float> apply(std::span<const float> e) const;
  void apply_into(std::span<const float> e, std::span<float> out) const;

 private:
  std::vector<double> mean_;
  std::vector<double> matrix_;
  std::size_t beta_;
  std::uint64_t fit_count_;
  std::vector<double> eigenvalues_;
  std::vector<float> mean_f_;
  std::vector<float> matrix_f_;
};

/// Fits on N >= 2 samples (rows). Covariance uses the 1/N normalization.
/// Eigenvalues below eigen_floor * lambda_max are clamped before the inverse
/// square root. Each eigenvector column is sign-flipped so that its
/// largest-magnitude entry is positive.
WhiteningTransformer whitening_fit(MatrixView samples, std::size_t beta,
                                   double eigen_floor = kDefaultEigenFloor);

std::vector<float> whitening_apply(std::span<const float> e,
                                   const WhiteningTransformer& transformer);

/// Draws the fitting sample: the pool is split into `partitions` interleaved
/// parts, each contributes floor(F / partitions) last-layer embeddings
/// sampled without replacement under its own sub-seed, concatenated in
/// partition order. `workers` only bounds parallelism.
Matrix fit_sample_draw(const EmbeddingSource& pool, std::size_t fit_count,
                       std::size_t partitions, std::uint64_t seed,
                       std::size_t workers = 1);

}  // namespace crds
