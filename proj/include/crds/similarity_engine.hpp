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
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "crds/compression.hpp"
#include "crds/embedding_provider.hpp"
#include "crds/matrix.hpp"
#include "crds/similarity_matrix.hpp"
#include "crds/whitening.hpp"

namespace crds {

inline constexpr std::size_t kDefaultBlockSize = 8192;

enum class Method {
  kPlain,
  kCrdsR,
  kCrdsW,
  kBinarizedPool,
  kBinarizedTest,
  kBinarizedBoth,
  kAveragePool,
};

std::string_view method_name(Method method);
Method parse_method(std::string_view name);

struct MethodConfig {
  Method method = Method::kPlain;
  bool normalize = true;
  // crds_r only.
  std::uint64_t projection_seed = 0;
  std::optional<std::size_t> projection_width;  // default v / H
  EntryMode entry_mode = EntryMode::kUniform;
};

enum class Role { kPool, kTest };

/// Maps a raw H*v layer stack to the vector that enters the dot product.
/// Single-layer methods (plain, crds_w, binarized) read the last layer.
class Representation {
 public:
  Representation(const MethodConfig& config, std::size_t layer_count,
                 std::size_t layer_dim,
                 std::shared_ptr<const WhiteningTransformer> transformer = nullptr);

  std::size_t output_dim() const { return output_dim_; }
  std::size_t input_width() const { return layer_count_ * layer_dim_; }
  const MethodConfig& config() const { return config_; }

  void transform(std::span<const float> stack_row, Role role,
                 std::span<float> out) const;

  Provenance describe() const;

 private:
  MethodConfig config_;
  std::size_t layer_count_;
  std::size_t layer_dim_;
  std::size_t output_dim_ = 0;
  std::optional<ProjectionBank> bank_;
  std::shared_ptr<const WhiteningTransformer> transformer_;
};

/// e / ||e||_2; the zero vector maps to itself.
std::vector<float> l2_normalize(std::span<const float> e);
void l2_normalize_in_place(std::span<float> e);

/// pool_block * tests^T. Each score accumulates sequentially over the inner
/// dimension in double precision, so results do not depend on blocking.
Matrix similarity_block(MatrixView pool_block, MatrixView tests);

struct WorkerPlan {
  std::size_t pool_size = 0;
  std::size_t n_workers = 1;
  std::size_t block_size = kDefaultBlockSize;
  std::vector<std::vector<std::size_t>> assignments;
};

WorkerPlan make_worker_plan(std::size_t pool_size, std::size_t n_workers,
                            std::size_t block_size = kDefaultBlockSize);

struct WorkerBlock {
  Matrix rows;
  std::size_t pad_rows = 0;  // trailing rows to drop
};

/// Inverts the interleaved split: pool row p comes from worker p mod n at
/// local position p / n.
Matrix rearrange_rows(std::span<const WorkerBlock> blocks, const WorkerPlan& plan);

/// Asymmetric distributed similarity: tests are encoded by all workers,
/// gathered, transformed and shared read-only; each worker then streams its
/// interleaved pool rows in blocks against the shared test matrix. Output is
/// bitwise independent of n_workers and block_size.
SimilarityMatrix compute_similarity(const EmbeddingSource& pool,
                                    const EmbeddingSource& tests,
                                    const Representation& representation,
                                    const WorkerPlan& plan);

/// Gathered, transformed (and normalized if configured) test matrix.
Matrix encode_tests(const EmbeddingSource& tests, const Representation& representation,
                    std::size_t n_workers);

}  // namespace crds
