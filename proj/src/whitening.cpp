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

#include "crds/whitening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "crds/error.hpp"
#include "crds/random.hpp"
#include "parallel.hpp"

namespace crds {

WhiteningTransformer::WhiteningTransformer(std::vector<double> mean,
                                           std::vector<double> matrix, std::size_t beta,
                                           std::uint64_t fit_count,
                                           std::vector<double> eigenvalues)
    : mean_(std::move(mean)),
      matrix_(std::move(matrix)),
      beta_(beta),
      fit_count_(fit_count),
      eigenvalues_(std::move(eigenvalues)) {
  if (mean_.empty() || beta_ == 0 || beta_ > mean_.size()) {
    throw InvalidArgument("whitening transformer needs 1 <= beta <= v");
  }
  if (matrix_.size() != mean_.size() * beta_) {
    throw InvalidArgument("whitening matrix must be v x beta");
  }
  if (!eigenvalues_.empty() && eigenvalues_.size() != beta_) {
    throw InvalidArgument("expected beta eigenvalues");
  }
  mean_f_.assign(mean_.begin(), mean_.end());
  matrix_f_.assign(matrix_.begin(), matrix_.end());
}

void WhiteningTransformer::apply_into(std::span<const float> e,
                                      std::span<float> out) const {
  const std::size_t v = mean_f_.size();
  if (e.size() != v) {
    throw InvalidArgument("whitening_apply: input has dim " + std::to_string(e.size()) +
                          ", transformer expects " + std::to_string(v));
  }
  if (out.size() != beta_) throw InvalidArgument("whitening_apply: output must hold beta floats");
  std::vector<double> acc(beta_, 0.0);
  for (std::size_t i = 0; i < v; ++i) {
    const double centered = static_cast<double>(e[i]) - static_cast<double>(mean_f_[i]);
    const float* row = matrix_f_.data() + i * beta_;
    for (std::size_t j = 0; j < beta_; ++j) acc[j] += centered * static_cast<double>(row[j]);
  }
  for (std::size_t j = 0; j < beta_; ++j) out[j] = static_cast<float>(acc[j]);
}

std::vector<float> WhiteningTransformer::apply(std::span<const float> e) const {
  std::vector<float> out(beta_);
  apply_into(e, out);
  return out;
}

std::vector<float> whitening_apply(std::span<const float> e,
                                   const WhiteningTransformer& transformer) {
  return transformer.apply(e);
}

WhiteningTransformer whitening_fit(MatrixView samples, std::size_t beta,
                                   double eigen_floor) {
  const std::size_t n = samples.rows;
  const std::size_t v = samples.cols;
  if (n < 2) throw InvalidArgument("whitening_fit needs at least 2 samples");
  if (beta == 0 || beta > v) {
    throw InvalidArgument("whitening_fit needs 1 <= beta <= v (beta=" +
                          std::to_string(beta) + ", v=" + std::to_string(v) + ")");
  }
  if (!(eigen_floor > 0.0)) throw InvalidArgument("eigen_floor must be positive");
  for (float x : samples.data) {
    if (!std::isfinite(x)) throw NumericError("whitening_fit: non-finite sample value");
  }

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor x = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                              Eigen::RowMajor>>(samples.data.data(),
                                                                static_cast<Eigen::Index>(n),
                                                                static_cast<Eigen::Index>(v))
                   .cast<double>();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw NumericError("whitening_fit: eigendecomposition did not converge");
  }
  // Eigen returns ascending eigenvalues; walk them from the top.
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  const Eigen::MatrixXd& u = solver.eigenvectors();
  const auto last = static_cast<Eigen::Index>(v) - 1;
  const double lambda_max = lambda(last);
  if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) {
    throw NumericError("whitening_fit: samples have zero variance");
  }
  const double floor = eigen_floor * lambda_max;

  std::vector<double> w(v * beta);
  std::vector<double> retained(beta);
  for (std::size_t j = 0; j < beta; ++j) {
    const Eigen::Index col = last - static_cast<Eigen::Index>(j);
    const double raw = lambda(col);
    retained[j] = std::max(raw, 0.0);
    const double scale = 1.0 / std::sqrt(std::max(raw, floor));

    Eigen::Index pivot = 0;
    u.col(col).cwiseAbs().maxCoeff(&pivot);
    const double sign = u(pivot, col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < v; ++i) {
      w[i * beta + j] = sign * u(static_cast<Eigen::Index>(i), col) * scale;
    }
  }

  std::vector<double> mean_out(mean.data(), mean.data() + v);
  return WhiteningTransformer(std::move(mean_out), std::move(w), beta, n,
                              std::move(retained));
}

Matrix fit_sample_draw(const EmbeddingSource& pool, std::size_t fit_count,
                       std::size_t partitions, std::uint64_t seed, std::size_t workers) {
  const std::size_t total = pool.size();
  if (partitions == 0) throw InvalidArgument("fit_sample_draw needs at least one partition");
  if (fit_count > total) {
    throw InvalidArgument("fit sample size F=" + std::to_string(fit_count) +
                          " exceeds pool size " + std::to_string(total));
  }
  const std::size_t quota = fit_count / partitions;
  const std::size_t v = pool.layer_dim();
  const std::size_t last_layer_offset = (pool.layer_count() - 1) * v;
  Matrix out(quota * partitions, v);

  auto draw_partition = [&](std::size_t p) {
    const std::size_t local_size = interleaved_count(total, partitions, p);
    // Partial Fisher-Yates over local positions, then sorted for sequential reads.
    std::vector<std::size_t> positions(local_size);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    SeededStream stream(mix_seed(seed, p));
    for (std::size_t i = 0; i < quota; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(stream.next_below(local_size - i));
      std::swap(positions[i], positions[j]);
    }
    positions.resize(quota);
    std::sort(positions.begin(), positions.end());

    std::vector<float> scratch(pool.row_width());
    for (std::size_t i = 0; i < quota; ++i) {
      const std::size_t global = p + positions[i] * partitions;
      const auto stack = pool.stack_row(global, scratch);
      std::copy_n(stack.begin() + static_cast<std::ptrdiff_t>(last_layer_offset), v,
                  out.row(p * quota + i).begin());
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, partitions));
  internal::run_workers(threads, [&](std::size_t t) {
    for (std::size_t p = t; p < partitions; p += threads) draw_partition(p);
  });
  return out;
}

}  // namespace crds
