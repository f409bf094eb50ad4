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

#include "crds/similarity_engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crds/error.hpp"
#include "parallel.hpp"

namespace crds {
namespace {

// out (m x T) = pool (m x d) * tests_t (d x T). One double accumulator per
// output, summed in increasing k.
void block_product(MatrixView pool, std::span<const float> tests_t, std::size_t t_count,
                   std::span<float> out) {
  const std::size_t d = pool.cols;
  std::vector<double> acc(t_count);
  for (std::size_t i = 0; i < pool.rows; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const auto p = pool.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      const double pk = p[k];
      const float* t = tests_t.data() + k * t_count;
      for (std::size_t j = 0; j < t_count; ++j) acc[j] += pk * static_cast<double>(t[j]);
    }
    float* dst = out.data() + i * t_count;
    for (std::size_t j = 0; j < t_count; ++j) dst[j] = static_cast<float>(acc[j]);
  }
}

std::vector<float> transpose(MatrixView m) {
  std::vector<float> t(m.rows * m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) t[c * m.rows + r] = m.data[r * m.cols + c];
  }
  return t;
}

}  // namespace

std::string_view method_name(Method method) {
  switch (method) {
    case Method::kPlain: return "plain";
    case Method::kCrdsR: return "crds_r";
    case Method::kCrdsW: return "crds_w";
    case Method::kBinarizedPool: return "binarized_pool";
    case Method::kBinarizedTest: return "binarized_test";
    case Method::kBinarizedBoth: return "binarized_both";
    case Method::kAveragePool: return "avg_pool";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kPlain, Method::kCrdsR, Method::kCrdsW, Method::kBinarizedPool,
                   Method::kBinarizedTest, Method::kBinarizedBoth, Method::kAveragePool}) {
    if (method_name(m) == name) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(name) +
                        "' (expected plain, crds_r, crds_w, binarized_pool, "
                        "binarized_test, binarized_both or avg_pool)");
}

Representation::Representation(const MethodConfig& config, std::size_t layer_count,
                               std::size_t layer_dim,
                               std::shared_ptr<const WhiteningTransformer> transformer)
    : config_(config),
      layer_count_(layer_count),
      layer_dim_(layer_dim),
      transformer_(std::move(transformer)) {
  if (layer_count_ == 0 || layer_dim_ == 0) {
    throw InvalidArgument("representation needs H >= 1 and v >= 1");
  }
  switch (config_.method) {
    case Method::kCrdsR: {
      const std::size_t w =
          config_.projection_width.value_or(default_projection_width(layer_dim_, layer_count_));
      bank_ = make_projection_bank(config_.projection_seed, layer_dim_, w, layer_count_,
                                   config_.entry_mode);
      output_dim_ = layer_count_ * w;
      break;
    }
    case Method::kCrdsW:
      if (!transformer_) {
        throw StateError("method crds_w needs a fitted whitening transformer "
                         "(produce one with `crds fit-whiten`)");
      }
      if (transformer_->v() != layer_dim_) {
        throw InvalidArgument("whitening transformer expects v=" +
                              std::to_string(transformer_->v()) + " but embeddings have v=" +
                              std::to_string(layer_dim_));
      }
      output_dim_ = transformer_->beta();
      break;
    default:
      output_dim_ = layer_dim_;
      break;
  }
}

void Representation::transform(std::span<const float> stack_row, Role role,
                               std::span<float> out) const {
  if (stack_row.size() != input_width()) {
    throw InvalidArgument("stack row has " + std::to_string(stack_row.size()) +
                          " floats, representation expects " +
                          std::to_string(input_width()));
  }
  if (out.size() != output_dim_) throw InvalidArgument("output buffer has the wrong size");
  const auto last = stack_row.subspan((layer_count_ - 1) * layer_dim_, layer_dim_);

  switch (config_.method) {
    case Method::kPlain:
      std::copy(last.begin(), last.end(), out.begin());
      break;
    case Method::kCrdsR:
      crds_r_compose_into(stack_row, layer_count_, *bank_, out);
      break;
    case Method::kCrdsW:
      transformer_->apply_into(last, out);
      break;
    case Method::kAveragePool:
      average_pool_into(stack_row, layer_count_, out);
      break;
    case Method::kBinarizedPool:
    case Method::kBinarizedTest:
    case Method::kBinarizedBoth: {
      const bool binarize_this =
          config_.method == Method::kBinarizedBoth ||
          (config_.method == Method::kBinarizedPool && role == Role::kPool) ||
          (config_.method == Method::kBinarizedTest && role == Role::kTest);
      if (binarize_this) {
        binarize_into(last, out);
      } else {
        std::copy(last.begin(), last.end(), out.begin());
      }
      break;
    }
  }
  if (config_.normalize) l2_normalize_in_place(out);
}

Provenance Representation::describe() const {
  Provenance p;
  p["method"] = std::string(method_name(config_.method));
  p["normalize"] = config_.normalize ? "true" : "false";
  p["representation_dim"] = std::to_string(output_dim_);
  if (bank_) {
    p["projection_seed"] = std::to_string(bank_->seed());
    p["projection_width"] = std::to_string(bank_->output_dim());
    p["projection_layers"] = std::to_string(bank_->layer_count());
    p["entry_mode"] = std::string(entry_mode_name(bank_->entry_mode()));
  }
  if (transformer_ && config_.method == Method::kCrdsW) {
    p["beta"] = std::to_string(transformer_->beta());
    p["fit_count"] = std::to_string(transformer_->fit_count());
  }
  return p;
}

void l2_normalize_in_place(std::span<float> e) {
  double sq = 0.0;
  for (float x : e) {
    if (!std::isfinite(x)) throw NumericError("l2_normalize: non-finite component");
    sq += static_cast<double>(x) * x;
  }
  if (sq == 0.0) return;
  const double norm = std::sqrt(sq);
  for (float& x : e) x = static_cast<float>(x / norm);
}

std::vector<float> l2_normalize(std::span<const float> e) {
  std::vector<float> out(e.begin(), e.end());
  l2_normalize_in_place(out);
  return out;
}

Matrix similarity_block(MatrixView pool_block, MatrixView tests) {
  if (pool_block.cols != tests.cols) {
    throw InvalidArgument("similarity_block: pool dim " + std::to_string(pool_block.cols) +
                          " differs from test dim " + std::to_string(tests.cols));
  }
  Matrix out(pool_block.rows, tests.rows);
  block_product(pool_block, transpose(tests), tests.rows, out.values());
  return out;
}

WorkerPlan make_worker_plan(std::size_t pool_size, std::size_t n_workers,
                            std::size_t block_size) {
  if (block_size == 0) throw InvalidArgument("block_size must be at least 1");
  WorkerPlan plan;
  plan.pool_size = pool_size;
  plan.n_workers = n_workers;
  plan.block_size = block_size;
  plan.assignments = interleaved_split(pool_size, n_workers);
  return plan;
}

Matrix rearrange_rows(std::span<const WorkerBlock> blocks, const WorkerPlan& plan) {
  if (blocks.size() != plan.n_workers) {
    throw InvalidArgument("expected " + std::to_string(plan.n_workers) +
                          " worker blocks, got " + std::to_string(blocks.size()));
  }
  std::size_t cols = 0;
  bool have_cols = false;
  for (std::size_t w = 0; w < blocks.size(); ++w) {
    const WorkerBlock& b = blocks[w];
    if (b.pad_rows > b.rows.rows() ||
        b.rows.rows() - b.pad_rows != plan.assignments[w].size()) {
      throw InvalidArgument("worker " + std::to_string(w) + " block has " +
                            std::to_string(b.rows.rows()) + " rows (" +
                            std::to_string(b.pad_rows) + " padding), plan assigns " +
                            std::to_string(plan.assignments[w].size()));
    }
    if (b.rows.rows() == 0) continue;
    if (have_cols && b.rows.cols() != cols) {
      throw InvalidArgument("worker blocks disagree on column count");
    }
    cols = b.rows.cols();
    have_cols = true;
  }
  Matrix out(plan.pool_size, cols);
  const std::size_t n = plan.n_workers;
  for (std::size_t p = 0; p < plan.pool_size; ++p) {
    const auto src = blocks[p % n].rows.row(p / n);
    std::copy(src.begin(), src.end(), out.row(p).begin());
  }
  return out;
}

Matrix encode_tests(const EmbeddingSource& tests, const Representation& representation,
                    std::size_t n_workers) {
  const WorkerPlan plan = make_worker_plan(tests.size(), n_workers, 1);
  std::vector<WorkerBlock> blocks(n_workers);
  internal::run_workers(n_workers, [&](std::size_t w) {
    const auto& local = plan.assignments[w];
    Matrix encoded(local.size(), representation.output_dim());
    std::vector<float> scratch(tests.row_width());
    for (std::size_t r = 0; r < local.size(); ++r) {
      representation.transform(tests.stack_row(local[r], scratch), Role::kTest,
                               encoded.row(r));
    }
    blocks[w].rows = std::move(encoded);
  });
  Matrix gathered = rearrange_rows(blocks, plan);
  if (gathered.cols() == 0) gathered = Matrix(gathered.rows(), representation.output_dim());
  return gathered;
}

SimilarityMatrix compute_similarity(const EmbeddingSource& pool,
                                    const EmbeddingSource& tests,
                                    const Representation& representation,
                                    const WorkerPlan& plan) {
  if (tests.size() == 0) throw InvalidArgument("test set is empty");
  if (pool.layer_count() != tests.layer_count() || pool.layer_dim() != tests.layer_dim()) {
    throw InvalidArgument("pool embeddings (" + std::to_string(pool.layer_count()) + "x" +
                          std::to_string(pool.layer_dim()) + ") and test embeddings (" +
                          std::to_string(tests.layer_count()) + "x" +
                          std::to_string(tests.layer_dim()) + ") disagree");
  }
  if (pool.row_width() != representation.input_width()) {
    throw InvalidArgument("method configuration expects " +
                          std::to_string(representation.input_width()) +
                          " floats per item, shards hold " + std::to_string(pool.row_width()));
  }
  if (plan.pool_size != pool.size() || plan.assignments.size() != plan.n_workers) {
    throw InvalidArgument("worker plan does not cover the pool");
  }

  // Gather and broadcast: the test matrix is built once and shared read-only.
  const Matrix test_matrix = encode_tests(tests, representation, plan.n_workers);
  const std::vector<float> tests_t = transpose(test_matrix);
  const std::size_t t_count = test_matrix.rows();
  const std::size_t d = representation.output_dim();

  std::vector<WorkerBlock> blocks(plan.n_workers);
  internal::run_workers(plan.n_workers, [&](std::size_t w) {
    const auto& rows = plan.assignments[w];
    Matrix local(rows.size(), t_count);
    Matrix block(std::min(plan.block_size, rows.size()), d);
    std::vector<float> scratch(pool.row_width());
    for (std::size_t start = 0; start < rows.size(); start += plan.block_size) {
      const std::size_t m = std::min(plan.block_size, rows.size() - start);
      for (std::size_t r = 0; r < m; ++r) {
        representation.transform(pool.stack_row(rows[start + r], scratch), Role::kPool,
                                 block.row(r));
      }
      const MatrixView view(block.values().subspan(0, m * d), m, d);
      block_product(view, tests_t, t_count,
                    local.values().subspan(start * t_count, m * t_count));
    }
    blocks[w].rows = std::move(local);
  });

  SimilarityMatrix result;
  result.scores = rearrange_rows(blocks, plan);
  if (result.scores.cols() == 0) result.scores = Matrix(plan.pool_size, t_count);
  for (float s : result.scores.values()) {
    if (!std::isfinite(s)) throw NumericError("similarity produced a non-finite score");
  }
  result.provenance = representation.describe();
  result.provenance["rows"] = std::to_string(result.rows());
  result.provenance["cols"] = std::to_string(result.cols());
  return result;
}

}  // namespace crds
