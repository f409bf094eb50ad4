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

#include "crds/embedding_provider.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "crds/corpus.hpp"
#include "crds/error.hpp"
#include "crds/random.hpp"

namespace crds {

LayerStack::LayerStack(std::size_t item_index, std::vector<int> layer_ids,
                       std::size_t dim, std::vector<float> values)
    : item_index_(item_index),
      layer_ids_(std::move(layer_ids)),
      dim_(dim),
      values_(std::move(values)) {
  if (layer_ids_.empty() || dim_ == 0) {
    throw InvalidArgument("layer stack needs at least one layer of positive dimension");
  }
  if (!std::is_sorted(layer_ids_.begin(), layer_ids_.end(), std::less_equal<>())) {
    throw InvalidArgument("layer ids must be strictly increasing");
  }
  if (values_.size() != layer_ids_.size() * dim_) {
    throw InvalidArgument("layer stack values do not match H x v");
  }
}

void EncoderConfig::validate() const {
  if (v == 0) throw InvalidArgument("encoder v must be positive");
  if (layers == 0) throw InvalidArgument("encoder needs at least one layer");
  if (truncation_length == 0) {
    throw InvalidArgument("truncation_length must be positive");
  }
  if (!layer_ids.empty()) {
    if (layer_ids.size() != layers) {
      throw InvalidArgument("layer_ids has " + std::to_string(layer_ids.size()) +
                            " entries but layers = " + std::to_string(layers));
    }
    for (std::size_t i = 1; i < layer_ids.size(); ++i) {
      if (layer_ids[i] <= layer_ids[i - 1]) {
        throw InvalidArgument("layer_ids must be strictly increasing");
      }
    }
  }
}

std::vector<int> EncoderConfig::resolved_layer_ids() const {
  if (!layer_ids.empty()) return layer_ids;
  std::vector<int> ids(layers);
  for (std::size_t i = 0; i < layers; ++i) ids[i] = static_cast<int>(i);
  return ids;
}

std::string EncoderConfig::digest() const {
  std::ostringstream canonical;
  canonical << (mode == EncoderMode::kSynthetic ? "synthetic" : "ingest") << '|' << v
            << '|' << layers << '|';
  for (int id : resolved_layer_ids()) canonical << id << ',';
  canonical << '|' << truncation_length << '|' << seed;
  std::ostringstream hex;
  hex << std::hex;
  hex.width(16);
  hex.fill('0');
  hex << fnv1a64(canonical.str());
  return hex.str();
}

std::vector<std::vector<std::size_t>> interleaved_split(std::size_t pool_size,
                                                        std::size_t n_workers) {
  if (n_workers == 0) throw InvalidArgument("n_workers must be at least 1");
  std::vector<std::vector<std::size_t>> parts(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    parts[w].reserve(interleaved_count(pool_size, n_workers, w));
    for (std::size_t p = w; p < pool_size; p += n_workers) parts[w].push_back(p);
  }
  return parts;
}

std::size_t interleaved_count(std::size_t pool_size, std::size_t n_workers,
                              std::size_t worker) {
  if (n_workers == 0) throw InvalidArgument("n_workers must be at least 1");
  if (worker >= pool_size) return 0;
  return (pool_size - worker + n_workers - 1) / n_workers;
}

void synthetic_encode_into(std::string_view item_text, const EncoderConfig& config,
                           std::span<float> out) {
  if (out.size() != config.v * config.layers) {
    throw InvalidArgument("synthetic_encode output buffer has the wrong size");
  }
  const std::uint64_t text_seed = mix_seed(
      config.seed, fnv1a64(utf8_truncate(item_text, config.truncation_length)));
  const std::vector<int> ids = config.resolved_layer_ids();
  std::vector<double> draw(config.v);
  for (std::size_t h = 0; h < config.layers; ++h) {
    SeededStream stream(mix_seed(text_seed, static_cast<std::uint64_t>(ids[h])));
    double sq = 0.0;
    for (double& x : draw) {
      x = stream.next_normal();
      sq += x * x;
    }
    const double norm = std::sqrt(sq);
    float* dst = out.data() + h * config.v;
    for (std::size_t i = 0; i < config.v; ++i) {
      dst[i] = static_cast<float>(draw[i] / norm);
    }
  }
}

LayerStack synthetic_encode(std::string_view item_text, std::size_t item_index,
                            const EncoderConfig& config) {
  if (config.mode != EncoderMode::kSynthetic) {
    throw InvalidArgument("synthetic_encode requires a synthetic encoder config");
  }
  config.validate();
  std::vector<float> values(config.v * config.layers);
  synthetic_encode_into(item_text, config, values);
  return LayerStack(item_index, config.resolved_layer_ids(), config.v,
                    std::move(values));
}

ShardSetDescriptor ingest_shards(std::span<const std::filesystem::path> shard_paths,
                                 const EncoderConfig& expected) {
  if (shard_paths.empty()) throw CoverageError("no shard files given");
  const std::size_t expected_dim = expected.v * expected.layers;

  std::vector<ShardEntry> entries;
  entries.reserve(shard_paths.size());
  for (const auto& path : shard_paths) {
    // open() validates magic, version and declared sizes.
    ShardFile file = ShardFile::open(path);
    const ShardHeader& h = file.header();
    if (h.dim != expected_dim || h.layer_count != expected.layers) {
      throw FormatError(path.string() + ": dimension mismatch, shard has dim " +
                        std::to_string(h.dim) + " over " +
                        std::to_string(h.layer_count) + " layers, expected v=" +
                        std::to_string(expected.v) + " x H=" +
                        std::to_string(expected.layers));
    }
    entries.push_back({path, h});
  }

  const std::uint32_t num_shards = entries.front().header.num_shards;
  if (num_shards == 0) throw CoverageError("shard declares num_shards = 0");
  std::vector<const ShardEntry*> by_index(num_shards, nullptr);
  for (const ShardEntry& e : entries) {
    if (e.header.num_shards != num_shards) {
      throw CoverageError(e.path.string() + ": declares " +
                          std::to_string(e.header.num_shards) + " shards, others " +
                          std::to_string(num_shards));
    }
    if (e.header.shard_index >= num_shards) {
      throw CoverageError(e.path.string() + ": shard_index out of range");
    }
    if (by_index[e.header.shard_index] != nullptr) {
      throw CoverageError("shard_index " + std::to_string(e.header.shard_index) + " of " +
                          std::to_string(num_shards) + " claimed by both " +
                          by_index[e.header.shard_index]->path.string() + " and " +
                          e.path.string());
    }
    by_index[e.header.shard_index] = &e;
  }
  for (std::uint32_t i = 0; i < num_shards; ++i) {
    if (by_index[i] == nullptr) {
      throw CoverageError("missing shard " + std::to_string(i) + " of " +
                          std::to_string(num_shards));
    }
  }

  std::size_t total = 0;
  for (const ShardEntry* e : by_index) total += e->real_rows();
  for (std::uint32_t i = 0; i < num_shards; ++i) {
    const std::size_t want = interleaved_count(total, num_shards, i);
    if (by_index[i]->real_rows() != want) {
      throw CoverageError(by_index[i]->path.string() + ": holds " +
                          std::to_string(by_index[i]->real_rows()) +
                          " rows, interleaved coverage of " + std::to_string(total) +
                          " items needs " + std::to_string(want));
    }
  }

  ShardSetDescriptor descriptor;
  descriptor.total_count = total;
  descriptor.v = expected.v;
  descriptor.layers = expected.layers;
  for (const ShardEntry* e : by_index) descriptor.shards.push_back(*e);
  return descriptor;
}

SyntheticSource::SyntheticSource(std::vector<std::string> texts, EncoderConfig config)
    : texts_(std::move(texts)), config_(std::move(config)) {
  if (config_.mode != EncoderMode::kSynthetic) {
    throw InvalidArgument("SyntheticSource requires a synthetic encoder config");
  }
  config_.validate();
}

std::span<const float> SyntheticSource::stack_row(std::size_t index,
                                                  std::span<float> scratch) const {
  synthetic_encode_into(texts_.at(index), config_, scratch);
  return scratch;
}

ShardSetSource::ShardSetSource(const ShardSetDescriptor& descriptor)
    : total_(descriptor.total_count), layers_(descriptor.layers), v_(descriptor.v) {
  files_.reserve(descriptor.shards.size());
  for (const ShardEntry& e : descriptor.shards) files_.push_back(ShardFile::open(e.path));
}

std::span<const float> ShardSetSource::stack_row(std::size_t index,
                                                 std::span<float> /*scratch*/) const {
  if (index >= total_) throw InvalidArgument("pool index out of range");
  const std::size_t n = files_.size();
  return files_[index % n].row(index / n);
}

}  // namespace crds
