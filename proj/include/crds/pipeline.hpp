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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crds/compression.hpp"
#include "crds/embedding_provider.hpp"
#include "crds/selection.hpp"
#include "crds/similarity_engine.hpp"
#include "crds/whitening.hpp"

namespace crds {

enum class Selector { kRoundRobin, kRandom, kLength };

/// Flat key/value run configuration. Method-specific keys stay unset unless
/// given; setting a key that belongs to another method is a validation error.
struct PipelineConfig {
  EncoderConfig encoder;

  std::filesystem::path pool_path;  // JSONL
  std::filesystem::path test_path;  // JSONL
  std::vector<std::filesystem::path> pool_shards;  // ingest mode
  std::vector<std::filesystem::path> test_shards;  // ingest mode
  std::size_t synthetic_pool_size = 0;  // used when no pool file is given
  std::size_t synthetic_test_size = 0;
  std::uint64_t synthetic_corpus_seed = 0;

  std::filesystem::path out_dir = "crds_out";
  std::size_t num_shards = 8;
  std::size_t workers = 8;
  std::size_t block_size = kDefaultBlockSize;

  Method method = Method::kPlain;
  bool normalize = true;

  std::optional<std::size_t> w;
  std::optional<EntryMode> entry_mode;
  std::optional<std::uint64_t> projection_seed;

  std::optional<std::size_t> beta;
  std::optional<std::size_t> fit_count;
  std::optional<std::uint64_t> fit_seed;
  std::optional<double> eigen_floor;

  Selector selector = Selector::kRoundRobin;
  std::size_t k = 0;
  std::uint64_t selection_seed = 0;

  static constexpr std::size_t kDefaultBeta = 512;
  static constexpr std::size_t kDefaultFitCount = 500000;

  std::size_t beta_or_default() const { return beta.value_or(kDefaultBeta); }
  std::size_t fit_count_or_default() const {
    return fit_count.value_or(kDefaultFitCount);
  }

  void validate() const;
  MethodConfig method_config() const;

  /// Applies one "key=value" override (value parsed as JSON, falling back to
  /// a plain string).
  void set(std::string_view key, std::string_view value);
  /// Applies every key of a flat JSON object on top of the current values.
  void merge_json_text(std::string_view text);
  void merge_json_file(const std::filesystem::path& path);
};

std::string_view selector_name(Selector selector);

/// Artifact locations under out_dir.
struct ArtifactLayout {
  std::filesystem::path out_dir;
  std::size_t num_shards = 1;

  std::filesystem::path pool_shard(std::size_t i) const;
  std::filesystem::path test_shard() const;
  std::vector<std::filesystem::path> pool_shards() const;
  std::filesystem::path transformer() const { return out_dir / "whitening.crdw"; }
  std::filesystem::path similarity() const { return out_dir / "similarity.crsm"; }
  std::filesystem::path selection() const { return out_dir / "selection.jsonl"; }
};

ArtifactLayout layout_for(const PipelineConfig& config);

struct EmbedOutputs {
  std::vector<std::filesystem::path> pool_shards;
  std::filesystem::path test_shard;
};

// Each stage reads its inputs from disk, so any of them can be rerun alone.
EmbedOutputs run_embed(const PipelineConfig& config);
ShardSetDescriptor run_ingest(const PipelineConfig& config,
                              std::span<const std::filesystem::path> shard_paths);
WhiteningTransformer run_fit_whiten(const PipelineConfig& config);
SimilarityMatrix run_similarity(const PipelineConfig& config);
SelectionResult run_select(const PipelineConfig& config);

struct PipelineOutputs {
  std::vector<std::filesystem::path> artifacts;
  SelectionResult selection;
};

/// embed -> (fit-whiten) -> similarity -> select. With `resume`, stages whose
/// outputs already exist are skipped.
PipelineOutputs run_pipeline(const PipelineConfig& config, bool resume = false);

}  // namespace crds
