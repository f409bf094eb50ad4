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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crds/storage.hpp"

namespace crds {

struct PoolItem {
  std::size_t index = 0;
  std::string text;
  std::size_t response_length = 0;  // characters of concatenated responses
};

struct TestItem {
  std::size_t index = 0;
  std::string text;
  std::string answer;  // carried along, never embedded
};

/// Hidden representations of one item at H encoder layers, stored as an
/// H x v row-major block.
class LayerStack {
 public:
  LayerStack() = default;
  LayerStack(std::size_t item_index, std::vector<int> layer_ids, std::size_t dim,
             std::vector<float> values);

  std::size_t item_index() const { return item_index_; }
  const std::vector<int>& layer_ids() const { return layer_ids_; }
  std::size_t layer_count() const { return layer_ids_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const float> layer(std::size_t h) const {
    return std::span<const float>(values_).subspan(h * dim_, dim_);
  }
  std::span<const float> values() const { return values_; }

  friend bool operator==(const LayerStack&, const LayerStack&) = default;

 private:
  std::size_t item_index_ = 0;
  std::vector<int> layer_ids_;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

enum class EncoderMode { kSynthetic, kIngest };

struct EncoderConfig {
  EncoderMode mode = EncoderMode::kSynthetic;
  std::size_t v = 4096;
  std::size_t layers = 18;
  std::vector<int> layer_ids;  // empty means 0..layers-1
  std::size_t truncation_length = 2048;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument when the fields are inconsistent.
  void validate() const;
  std::vector<int> resolved_layer_ids() const;
  /// Stable digest of every field that influences embeddings.
  std::string digest() const;
};

/// Worker i receives {i, i+n, i+2n, ...}; remainder rows land on low ranks.
std::vector<std::vector<std::size_t>> interleaved_split(std::size_t pool_size,
                                                        std::size_t n_workers);

/// Number of rows interleaved_split assigns to `worker`.
std::size_t interleaved_count(std::size_t pool_size, std::size_t n_workers,
                              std::size_t worker);

/// Deterministic stand-in for an LLM encoder. Each layer vector is a unit
/// Gaussian direction seeded by (config seed, text hash, layer id); text past
/// truncation_length characters does not participate.
LayerStack synthetic_encode(std::string_view item_text, std::size_t item_index,
                            const EncoderConfig& config);

/// Same as synthetic_encode but writes the H*v stack into `out`.
void synthetic_encode_into(std::string_view item_text, const EncoderConfig& config,
                           std::span<float> out);

struct ShardEntry {
  std::filesystem::path path;
  ShardHeader header;
  std::size_t real_rows() const { return header.count - header.pad_rows; }
};

/// Validated set of shards that jointly cover [0, total_count) under the
/// interleaved assignment. Entries are ordered by shard_index.
struct ShardSetDescriptor {
  std::vector<ShardEntry> shards;
  std::size_t total_count = 0;
  std::size_t v = 0;
  std::size_t layers = 0;
  std::size_t num_shards() const { return shards.size(); }
};

ShardSetDescriptor ingest_shards(std::span<const std::filesystem::path> shard_paths,
                                 const EncoderConfig& expected);

/// Read access to per-item layer stacks, flattened to H*v floats.
/// Implementations are immutable and safe to share between worker threads.
class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t layer_count() const = 0;
  virtual std::size_t layer_dim() const = 0;
  std::size_t row_width() const { return layer_count() * layer_dim(); }

  // The returned span either aliases `scratch` (row_width() floats) or
  // memory owned by the source.
  virtual std::span<const float> stack_row(std::size_t index,
                                           std::span<float> scratch) const = 0;
};

class SyntheticSource final : public EmbeddingSource {
 public:
  SyntheticSource(std::vector<std::string> texts, EncoderConfig config);

  std::size_t size() const override { return texts_.size(); }
  std::size_t layer_count() const override { return config_.layers; }
  std::size_t layer_dim() const override { return config_.v; }
  std::span<const float> stack_row(std::size_t index,
                                   std::span<float> scratch) const override;

 private:
  std::vector<std::string> texts_;
  EncoderConfig config_;
};

/// Serves rows straight out of memory-mapped shard payloads.
class ShardSetSource final : public EmbeddingSource {
 public:
  explicit ShardSetSource(const ShardSetDescriptor& descriptor);

  std::size_t size() const override { return total_; }
  std::size_t layer_count() const override { return layers_; }
  std::size_t layer_dim() const override { return v_; }
  std::span<const float> stack_row(std::size_t index,
                                   std::span<float> scratch) const override;

 private:
  std::vector<ShardFile> files_;
  std::size_t total_ = 0;
  std::size_t layers_ = 0;
  std::size_t v_ = 0;
};

}  // namespace crds
