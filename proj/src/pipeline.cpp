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

#include "crds/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "crds/corpus.hpp"
#include "crds/error.hpp"
#include "crds/storage.hpp"
#include "parallel.hpp"

namespace crds {
namespace {

using nlohmann::json;

template <typename T>
T as(const json& value, std::string_view key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument("config key '" + std::string(key) + "' has the wrong type: " +
                          value.dump());
  }
}

std::vector<std::filesystem::path> as_paths(const json& value, std::string_view key) {
  std::vector<std::filesystem::path> out;
  if (value.is_string()) {
    out.emplace_back(value.get<std::string>());
  } else {
    for (const auto& p : as<std::vector<std::string>>(value, key)) out.emplace_back(p);
  }
  return out;
}

void apply_key(PipelineConfig& c, std::string_view key, const json& value) {
  if (key == "encoder_mode") {
    const auto mode = as<std::string>(value, key);
    if (mode == "synthetic") c.encoder.mode = EncoderMode::kSynthetic;
    else if (mode == "ingest") c.encoder.mode = EncoderMode::kIngest;
    else throw InvalidArgument("encoder_mode must be synthetic or ingest");
  } else if (key == "v") {
    c.encoder.v = as<std::size_t>(value, key);
  } else if (key == "layers" || key == "H") {
    c.encoder.layers = as<std::size_t>(value, key);
  } else if (key == "layer_ids") {
    c.encoder.layer_ids = as<std::vector<int>>(value, key);
  } else if (key == "truncation_length") {
    c.encoder.truncation_length = as<std::size_t>(value, key);
  } else if (key == "encoder_seed") {
    c.encoder.seed = as<std::uint64_t>(value, key);
  } else if (key == "pool") {
    c.pool_path = as<std::string>(value, key);
  } else if (key == "test") {
    c.test_path = as<std::string>(value, key);
  } else if (key == "pool_shards") {
    c.pool_shards = as_paths(value, key);
  } else if (key == "test_shards") {
    c.test_shards = as_paths(value, key);
  } else if (key == "synthetic_pool_size") {
    c.synthetic_pool_size = as<std::size_t>(value, key);
  } else if (key == "synthetic_test_size") {
    c.synthetic_test_size = as<std::size_t>(value, key);
  } else if (key == "synthetic_corpus_seed") {
    c.synthetic_corpus_seed = as<std::uint64_t>(value, key);
  } else if (key == "out_dir") {
    c.out_dir = as<std::string>(value, key);
  } else if (key == "num_shards") {
    c.num_shards = as<std::size_t>(value, key);
  } else if (key == "workers") {
    c.workers = as<std::size_t>(value, key);
  } else if (key == "block_size") {
    c.block_size = as<std::size_t>(value, key);
  } else if (key == "method") {
    c.method = parse_method(as<std::string>(value, key));
  } else if (key == "normalize") {
    c.normalize = as<bool>(value, key);
  } else if (key == "w") {
    c.w = as<std::size_t>(value, key);
  } else if (key == "entry_mode") {
    c.entry_mode = parse_entry_mode(as<std::string>(value, key));
  } else if (key == "projection_seed") {
    c.projection_seed = as<std::uint64_t>(value, key);
  } else if (key == "beta") {
    c.beta = as<std::size_t>(value, key);
  } else if (key == "fit_count") {
    c.fit_count = as<std::size_t>(value, key);
  } else if (key == "fit_seed") {
    c.fit_seed = as<std::uint64_t>(value, key);
  } else if (key == "eigen_floor") {
    c.eigen_floor = as<double>(value, key);
  } else if (key == "selector") {
    const auto s = as<std::string>(value, key);
    if (s == "round_robin") c.selector = Selector::kRoundRobin;
    else if (s == "random") c.selector = Selector::kRandom;
    else if (s == "length") c.selector = Selector::kLength;
    else throw InvalidArgument("selector must be round_robin, random or length");
  } else if (key == "k") {
    c.k = as<std::size_t>(value, key);
  } else if (key == "selection_seed") {
    c.selection_seed = as<std::uint64_t>(value, key);
  } else {
    throw InvalidArgument("unknown config key '" + std::string(key) + "'");
  }
}

std::string shard_name(std::string_view stem, std::size_t i, std::size_t n) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*s.%05zu-of-%05zu.crds", static_cast<int>(stem.size()),
                stem.data(), i, n);
  return buf;
}

void require_inputs(std::span<const std::filesystem::path> paths, std::string_view what,
                    std::string_view producer) {
  for (const auto& p : paths) {
    if (!std::filesystem::exists(p)) {
      throw IoError("missing " + std::string(what) + " '" + p.string() +
                    "'; produce it with `crds " + std::string(producer) + "`");
    }
  }
}

struct Corpus {
  std::vector<PoolItem> pool;
  std::vector<TestItem> tests;
};

Corpus load_corpus(const PipelineConfig& c) {
  Corpus corpus;
  if (c.pool_path.empty() || c.test_path.empty()) {
    if (c.synthetic_pool_size == 0) {
      throw InvalidArgument("synthetic mode needs 'pool' and 'test' JSONL paths or "
                            "'synthetic_pool_size'/'synthetic_test_size'");
    }
    auto generated = make_synthetic_corpus(c.synthetic_pool_size, c.synthetic_test_size,
                                           c.synthetic_corpus_seed);
    corpus.pool = std::move(generated.pool);
    corpus.tests = std::move(generated.tests);
  }
  if (!c.pool_path.empty()) {
    require_inputs(std::span(&c.pool_path, 1), "pool file", "embed --set pool=<jsonl>");
    corpus.pool = load_pool_jsonl(c.pool_path);
  }
  if (!c.test_path.empty()) {
    require_inputs(std::span(&c.test_path, 1), "test file", "embed --set test=<jsonl>");
    corpus.tests = load_tests_jsonl(c.test_path);
  }
  return corpus;
}

std::vector<std::filesystem::path> pool_shard_paths(const PipelineConfig& c) {
  return c.encoder.mode == EncoderMode::kIngest ? c.pool_shards : layout_for(c).pool_shards();
}

std::vector<std::filesystem::path> test_shard_paths(const PipelineConfig& c) {
  if (c.encoder.mode == EncoderMode::kIngest) return c.test_shards;
  return {layout_for(c).test_shard()};
}

ShardSetDescriptor open_shards(const PipelineConfig& c,
                               const std::vector<std::filesystem::path>& paths,
                               std::string_view what) {
  if (paths.empty()) throw InvalidArgument(std::string(what) + " shard list is empty");
  require_inputs(paths, what, c.encoder.mode == EncoderMode::kIngest ? "ingest" : "embed");
  return ingest_shards(paths, c.encoder);
}

// Encodes `texts` into shard `index` of `count` and writes it.
void write_encoded_shard(const std::vector<const std::string*>& texts,
                         const EncoderConfig& encoder, std::size_t index, std::size_t count,
                         const std::filesystem::path& path, std::size_t workers) {
  const std::size_t width = encoder.v * encoder.layers;
  Matrix rows(texts.size(), width);
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, texts.size()));
  internal::run_workers(threads, [&](std::size_t t) {
    for (std::size_t r = t; r < texts.size(); r += threads) {
      synthetic_encode_into(*texts[r], encoder, rows.row(r));
    }
  });
  ShardHeader header;
  header.count = rows.rows();
  header.dim = static_cast<std::uint32_t>(width);
  header.shard_index = static_cast<std::uint32_t>(index);
  header.num_shards = static_cast<std::uint32_t>(count);
  header.layer_count = static_cast<std::uint16_t>(encoder.layers);
  write_shard(rows, header, path);
}

void add_encoder_provenance(Provenance& p, const PipelineConfig& c) {
  p["encoder_digest"] = c.encoder.digest();
  p["encoder_mode"] = c.encoder.mode == EncoderMode::kSynthetic ? "synthetic" : "ingest";
  p["encoder_v"] = std::to_string(c.encoder.v);
  p["encoder_layers"] = std::to_string(c.encoder.layers);
  p["encoder_truncation_length"] = std::to_string(c.encoder.truncation_length);
  if (c.encoder.mode == EncoderMode::kSynthetic) {
    p["encoder_seed"] = std::to_string(c.encoder.seed);
  }
}

}  // namespace

std::string_view selector_name(Selector selector) {
  switch (selector) {
    case Selector::kRoundRobin: return "round_robin";
    case Selector::kRandom: return "random";
    case Selector::kLength: return "length";
  }
  return "unknown";
}

void PipelineConfig::validate() const {
  encoder.validate();
  if (encoder.layers > 0xffff) throw InvalidArgument("layers must fit in 16 bits");
  if (workers == 0) throw InvalidArgument("workers must be at least 1");
  if (num_shards == 0) throw InvalidArgument("num_shards must be at least 1");
  if (block_size == 0) throw InvalidArgument("block_size must be at least 1");

  const bool whitening_keys = beta || fit_count || fit_seed || eigen_floor;
  const bool projection_keys = w || entry_mode || projection_seed;
  if (whitening_keys && method != Method::kCrdsW) {
    throw InvalidArgument("beta/fit_count/fit_seed/eigen_floor apply only to method "
                          "crds_w, but method is " + std::string(method_name(method)));
  }
  if (projection_keys && method != Method::kCrdsR) {
    throw InvalidArgument("w/entry_mode/projection_seed apply only to method crds_r, "
                          "but method is " + std::string(method_name(method)));
  }
  if (method == Method::kCrdsW) {
    const std::size_t b = beta_or_default();
    if (b == 0 || b > encoder.v) {
      throw InvalidArgument("beta must satisfy 1 <= beta <= v (beta=" + std::to_string(b) +
                            ", v=" + std::to_string(encoder.v) + ")");
    }
    if (fit_count_or_default() < 2) throw InvalidArgument("fit_count must be at least 2");
    if (eigen_floor && !(*eigen_floor > 0.0)) {
      throw InvalidArgument("eigen_floor must be positive");
    }
  }
  if (method == Method::kCrdsR) {
    const std::size_t width = w.value_or(encoder.v / encoder.layers);
    if (width == 0 || width > encoder.v) {
      throw InvalidArgument("projection width must satisfy 1 <= w <= v");
    }
  }
}

MethodConfig PipelineConfig::method_config() const {
  MethodConfig m;
  m.method = method;
  m.normalize = normalize;
  m.projection_seed = projection_seed.value_or(0);
  m.projection_width = w;
  m.entry_mode = entry_mode.value_or(EntryMode::kUniform);
  return m;
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) parsed = std::string(value);
  apply_key(*this, key, parsed);
}

void PipelineConfig::merge_json_text(std::string_view text) {
  json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw InvalidArgument("config must be a JSON object of key/value pairs");
  }
  for (const auto& [key, value] : doc.items()) apply_key(*this, key, value);
}

void PipelineConfig::merge_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  merge_json_text(buf.str());
}

std::filesystem::path ArtifactLayout::pool_shard(std::size_t i) const {
  return out_dir / shard_name("pool", i, num_shards);
}

std::filesystem::path ArtifactLayout::test_shard() const {
  return out_dir / shard_name("test", 0, 1);
}

std::vector<std::filesystem::path> ArtifactLayout::pool_shards() const {
  std::vector<std::filesystem::path> out;
  for (std::size_t i = 0; i < num_shards; ++i) out.push_back(pool_shard(i));
  return out;
}

ArtifactLayout layout_for(const PipelineConfig& config) {
  return {config.out_dir, config.num_shards};
}

EmbedOutputs run_embed(const PipelineConfig& config) {
  config.validate();
  if (config.encoder.mode != EncoderMode::kSynthetic) {
    throw InvalidArgument("embed runs the synthetic encoder; for external embeddings "
                          "use `crds ingest`");
  }
  const Corpus corpus = load_corpus(config);
  if (corpus.tests.empty()) throw InvalidArgument("test set is empty");
  const ArtifactLayout layout = layout_for(config);
  std::filesystem::create_directories(layout.out_dir);

  EmbedOutputs out;
  const auto split = interleaved_split(corpus.pool.size(), config.num_shards);
  for (std::size_t s = 0; s < config.num_shards; ++s) {
    std::vector<const std::string*> texts;
    for (std::size_t p : split[s]) texts.push_back(&corpus.pool[p].text);
    write_encoded_shard(texts, config.encoder, s, config.num_shards, layout.pool_shard(s),
                        config.workers);
    out.pool_shards.push_back(layout.pool_shard(s));
  }
  std::vector<const std::string*> test_texts;
  for (const auto& t : corpus.tests) test_texts.push_back(&t.text);
  write_encoded_shard(test_texts, config.encoder, 0, 1, layout.test_shard(), config.workers);
  out.test_shard = layout.test_shard();
  return out;
}

ShardSetDescriptor run_ingest(const PipelineConfig& config,
                              std::span<const std::filesystem::path> shard_paths) {
  config.encoder.validate();
  return ingest_shards(shard_paths, config.encoder);
}

WhiteningTransformer run_fit_whiten(const PipelineConfig& config) {
  config.validate();
  if (config.method != Method::kCrdsW) {
    throw InvalidArgument("fit-whiten requires method crds_w");
  }
  const ShardSetDescriptor pool_desc = open_shards(config, pool_shard_paths(config), "pool shards");
  const ShardSetSource pool(pool_desc);
  const Matrix sample =
      fit_sample_draw(pool, config.fit_count_or_default(), pool_desc.num_shards(),
                      config.fit_seed.value_or(0), config.workers);
  WhiteningTransformer transformer = whitening_fit(
      sample, config.beta_or_default(), config.eigen_floor.value_or(kDefaultEigenFloor));
  const auto path = layout_for(config).transformer();
  std::filesystem::create_directories(path.parent_path());
  write_transformer(transformer, path);
  return transformer;
}

SimilarityMatrix run_similarity(const PipelineConfig& config) {
  config.validate();
  const ShardSetDescriptor pool_desc = open_shards(config, pool_shard_paths(config), "pool shards");
  const ShardSetDescriptor test_desc = open_shards(config, test_shard_paths(config), "test shards");
  const ShardSetSource pool(pool_desc);
  const ShardSetSource tests(test_desc);
  const ArtifactLayout layout = layout_for(config);

  std::shared_ptr<const WhiteningTransformer> transformer;
  if (config.method == Method::kCrdsW) {
    const auto path = layout.transformer();
    require_inputs(std::span(&path, 1), "whitening transformer", "fit-whiten");
    transformer = std::make_shared<const WhiteningTransformer>(read_transformer(path));
  }
  const Representation representation(config.method_config(), pool.layer_count(),
                                      pool.layer_dim(), transformer);
  const WorkerPlan plan = make_worker_plan(pool.size(), config.workers, config.block_size);
  SimilarityMatrix sim = compute_similarity(pool, tests, representation, plan);
  add_encoder_provenance(sim.provenance, config);
  if (config.method == Method::kCrdsW) {
    sim.provenance["fit_seed"] = std::to_string(config.fit_seed.value_or(0));
    sim.provenance["fit_partitions"] = std::to_string(pool_desc.num_shards());
    std::ostringstream floor;
    floor << config.eigen_floor.value_or(kDefaultEigenFloor);
    sim.provenance["eigen_floor"] = floor.str();
  }
  write_similarity(sim, layout.similarity());
  return sim;
}

SelectionResult run_select(const PipelineConfig& config) {
  config.validate();
  if (config.k == 0) throw InvalidArgument("selection budget 'k' must be set");
  const ArtifactLayout layout = layout_for(config);

  SelectionResult result;
  if (config.selector == Selector::kLength) {
    const Corpus corpus = load_corpus(config);
    result = length_select(corpus.pool, config.k);
  } else {
    const auto path = layout.similarity();
    require_inputs(std::span(&path, 1), "similarity matrix", "similarity");
    const SimilarityReadResult sim = read_similarity(path);
    if (config.selector == Selector::kRoundRobin) {
      result = round_robin_select(sim.matrix, config.k);
    } else {
      result = random_select(sim.matrix.rows(), config.k, config.selection_seed);
    }
  }
  result.metadata["selector"] = std::string(selector_name(config.selector));
  if (config.selector == Selector::kRandom) {
    result.metadata["selection_seed"] = std::to_string(config.selection_seed);
  }
  write_selection(result, layout.selection());
  return result;
}

PipelineOutputs run_pipeline(const PipelineConfig& config, bool resume) {
  config.validate();
  const ArtifactLayout layout = layout_for(config);
  auto all_exist = [](const std::vector<std::filesystem::path>& paths) {
    return std::all_of(paths.begin(), paths.end(),
                       [](const auto& p) { return std::filesystem::exists(p); });
  };

  PipelineOutputs out;
  if (config.encoder.mode == EncoderMode::kSynthetic) {
    std::vector<std::filesystem::path> shards = layout.pool_shards();
    shards.push_back(layout.test_shard());
    if (!(resume && all_exist(shards))) run_embed(config);
    out.artifacts = shards;
  } else {
    open_shards(config, config.pool_shards, "pool shards");
    open_shards(config, config.test_shards, "test shards");
  }

  if (config.method == Method::kCrdsW) {
    if (!(resume && std::filesystem::exists(layout.transformer()))) run_fit_whiten(config);
    out.artifacts.push_back(layout.transformer());
  }
  if (!(resume && all_exist({layout.similarity(), sidecar_path(layout.similarity())}))) {
    run_similarity(config);
  }
  out.artifacts.push_back(layout.similarity());
  out.artifacts.push_back(sidecar_path(layout.similarity()));

  out.selection = run_select(config);
  out.artifacts.push_back(layout.selection());
  return out;
}

}  // namespace crds
