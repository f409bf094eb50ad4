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

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "crds/corpus.hpp"
#include "crds/error.hpp"
#include "crds/random.hpp"
#include "crds/storage.hpp"
#include "support/oracles.hpp"

namespace crds {
namespace {

using Split = std::vector<std::vector<std::size_t>>;

EncoderConfig small_config(std::size_t v, std::size_t layers, std::uint64_t seed = 7) {
  EncoderConfig c;
  c.v = v;
  c.layers = layers;
  c.seed = seed;
  return c;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * b[i];
  return s;
}

// Writes interleaved shards of `rows` (count x dim) and returns their paths.
std::vector<std::filesystem::path> write_shards(const oracle::TempDir& dir, const Matrix& rows,
                                                std::size_t n, std::uint16_t layers,
                                                const std::string& stem = "s") {
  std::vector<std::filesystem::path> paths;
  const auto split = interleaved_split(rows.rows(), n);
  for (std::size_t s = 0; s < n; ++s) {
    Matrix m(split[s].size(), rows.cols());
    for (std::size_t r = 0; r < split[s].size(); ++r) {
      std::copy_n(rows.row(split[s][r]).begin(), rows.cols(), m.row(r).begin());
    }
    ShardHeader h;
    h.count = m.rows();
    h.dim = static_cast<std::uint32_t>(rows.cols());
    h.shard_index = static_cast<std::uint32_t>(s);
    h.num_shards = static_cast<std::uint32_t>(n);
    h.layer_count = layers;
    paths.push_back(dir / (stem + std::to_string(s) + ".crds"));
    write_shard(m, h, paths.back());
  }
  return paths;
}

TEST_CASE("interleaved_split follows the stride definition") {
  CHECK(interleaved_split(4, 2) == Split{{0, 2}, {1, 3}});
  CHECK(interleaved_split(5, 2) == Split{{0, 2, 4}, {1, 3}});
  CHECK(interleaved_split(7, 1) == Split{{0, 1, 2, 3, 4, 5, 6}});
  CHECK(interleaved_split(0, 3) == Split{{}, {}, {}});
  CHECK_THROWS_AS(interleaved_split(4, 0), InvalidArgument);
}

TEST_CASE("interleaved_split partitions every pool") {
  SeededStream rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t size = rng.next_below(300);
    const std::size_t n = 1 + rng.next_below(12);
    const auto parts = interleaved_split(size, n);
    std::vector<std::size_t> flat;
    std::size_t lo = size, hi = 0;
    for (std::size_t w = 0; w < n; ++w) {
      flat.insert(flat.end(), parts[w].begin(), parts[w].end());
      lo = std::min(lo, parts[w].size());
      hi = std::max(hi, parts[w].size());
      CHECK(parts[w].size() == interleaved_count(size, n, w));
    }
    std::sort(flat.begin(), flat.end());
    std::vector<std::size_t> expected(size);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    REQUIRE(flat == expected);
    CHECK(hi - std::min(lo, hi) <= 1);
  }
}

TEST_CASE("synthetic_encode is deterministic, normalized and truncates") {
  const EncoderConfig config = small_config(64, 3);
  const LayerStack a = synthetic_encode("what is 2 + 2?", 5, config);
  const LayerStack b = synthetic_encode("what is 2 + 2?", 5, config);
  CHECK(a == b);
  REQUIRE(a.layer_count() == 3);
  CHECK(a.dim() == 64);
  CHECK(a.item_index() == 5);
  for (std::size_t h = 0; h < 3; ++h) {
    CHECK(std::abs(std::sqrt(dot(a.layer(h), a.layer(h))) - 1.0) < 1e-6);
  }

  EncoderConfig trunc = small_config(32, 2);
  trunc.truncation_length = 10;
  CHECK(synthetic_encode("0123456789-tail-one", 0, trunc) ==
        synthetic_encode("0123456789-tail-two", 0, trunc));
  CHECK_FALSE(synthetic_encode("0123456789", 0, trunc) ==
              synthetic_encode("0123456780", 0, trunc));

  // Truncation counts characters, not bytes.
  trunc.truncation_length = 2;
  CHECK(synthetic_encode("\xc3\xa9\xc3\xa9xyz", 0, trunc) ==
        synthetic_encode("\xc3\xa9\xc3\xa9", 0, trunc));

  EncoderConfig other_seed = config;
  other_seed.seed = 8;
  CHECK_FALSE(synthetic_encode("q", 0, config) == synthetic_encode("q", 0, other_seed));
}

TEST_CASE("distinct layers of one item are nearly orthogonal") {
  EncoderConfig config = small_config(256, 2, 99);
  config.layer_ids = {16, 17};
  std::size_t small = 0;
  const std::size_t draws = 1000;
  for (std::size_t i = 0; i < draws; ++i) {
    const LayerStack s = synthetic_encode("text #" + std::to_string(i), i, config);
    if (std::abs(dot(s.layer(0), s.layer(1))) < 0.5) ++small;
  }
  CHECK(static_cast<double>(small) / draws >= 0.99);
}

TEST_CASE("encoder config and layer stack validation") {
  EncoderConfig c = small_config(8, 2);
  c.layer_ids = {3};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.layer_ids = {4, 4};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.layer_ids = {4, 9};
  CHECK_NOTHROW(c.validate());
  CHECK(synthetic_encode("x", 0, c).layer_ids() == std::vector<int>{4, 9});
  c.truncation_length = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);

  CHECK_THROWS_AS(LayerStack(0, {2, 1}, 1, {0.f, 0.f}), InvalidArgument);
  CHECK_THROWS_AS(LayerStack(0, {1}, 2, {0.f}), InvalidArgument);
  CHECK_THROWS_AS(LayerStack(0, {}, 2, {}), InvalidArgument);

  EncoderConfig ingest = small_config(8, 1);
  ingest.mode = EncoderMode::kIngest;
  CHECK_THROWS_AS(synthetic_encode("x", 0, ingest), InvalidArgument);
}

TEST_CASE("ingest_shards accounts for coverage") {
  oracle::TempDir dir("ingest");
  const EncoderConfig config = small_config(4, 2);
  Matrix rows(1000, 8);
  for (std::size_t r = 0; r < 1000; ++r)
    for (std::size_t c = 0; c < 8; ++c) rows(r, c) = static_cast<float>(r * 10 + c);

  const auto paths = write_shards(dir, rows, 4, 2);
  std::vector<std::filesystem::path> shuffled = {paths[2], paths[0], paths[3], paths[1]};
  const ShardSetDescriptor d = ingest_shards(shuffled, config);
  CHECK(d.total_count == 1000);
  CHECK(d.num_shards() == 4);
  for (std::size_t s = 0; s < 4; ++s) CHECK(d.shards[s].header.shard_index == s);

  const ShardSetSource source(d);
  std::vector<float> scratch(8);
  for (std::size_t p : {0, 1, 2, 3, 517, 999}) {
    const auto row = source.stack_row(p, scratch);
    CHECK(row[0] == static_cast<float>(p * 10));
    CHECK(row[7] == static_cast<float>(p * 10 + 7));
  }

  SUBCASE("dimension mismatch") {
    EncoderConfig wide = small_config(2048, 1);
    Matrix one(1, 4096);
    ShardHeader h;
    h.count = 1;
    h.dim = 4096;
    h.layer_count = 1;
    write_shard(one, h, dir / "wide.crds");
    const std::vector<std::filesystem::path> p = {dir / "wide.crds"};
    CHECK_THROWS_AS(ingest_shards(p, wide), FormatError);
  }
  SUBCASE("duplicate shard index") {
    const std::vector<std::filesystem::path> p = {paths[0], paths[0], paths[2], paths[3]};
    CHECK_THROWS_AS(ingest_shards(p, config), CoverageError);
  }
  SUBCASE("missing shard") {
    const std::vector<std::filesystem::path> p = {paths[0], paths[1], paths[3]};
    CHECK_THROWS_AS(ingest_shards(p, config), CoverageError);
  }
  SUBCASE("shard from a differently sized split") {
    Matrix other(10, 8);
    const auto other_paths = write_shards(dir, other, 4, 2, "other");
    const std::vector<std::filesystem::path> p = {paths[0], paths[1], paths[2], other_paths[3]};
    CHECK_THROWS_AS(ingest_shards(p, config), CoverageError);
  }
  SUBCASE("bad magic") {
    {
      std::ofstream f(dir / "junk.crds", std::ios::binary);
      f << std::string(64, 'X');
    }
    const std::vector<std::filesystem::path> p = {dir / "junk.crds"};
    CHECK_THROWS_AS(ingest_shards(p, config), FormatError);
  }
}

TEST_CASE("ingest_shards trims padded shards") {
  // 5 rows over 2 shards; a symmetric gather pads shard 1 to 3 rows.
  oracle::TempDir dir("pad");
  const EncoderConfig config = small_config(1, 1);
  ShardHeader h0;
  h0.count = 3;
  h0.dim = 1;
  h0.num_shards = 2;
  write_shard(Matrix(3, 1, {0.f, 2.f, 4.f}), h0, dir / "a.crds");
  ShardHeader h1 = h0;
  h1.shard_index = 1;
  h1.pad_rows = 1;
  write_shard(Matrix(3, 1, {1.f, 3.f, -9.f}), h1, dir / "b.crds");
  const std::vector<std::filesystem::path> p = {dir / "a.crds", dir / "b.crds"};
  const auto d = ingest_shards(p, config);
  CHECK(d.total_count == 5);
  const ShardSetSource source(d);
  std::vector<float> scratch(1);
  for (std::size_t i = 0; i < 5; ++i) CHECK(source.stack_row(i, scratch)[0] == float(i));
  CHECK_THROWS_AS(source.stack_row(5, scratch), InvalidArgument);
}

TEST_CASE("synthetic and shard sources agree") {
  oracle::TempDir dir("agree");
  const EncoderConfig config = small_config(16, 2);
  std::vector<std::string> texts;
  for (int i = 0; i < 11; ++i) texts.push_back("item " + std::to_string(i));
  const SyntheticSource synthetic(texts, config);
  Matrix rows(texts.size(), 32);
  std::vector<float> scratch(32);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto r = synthetic.stack_row(i, scratch);
    std::copy(r.begin(), r.end(), rows.row(i).begin());
  }
  const auto paths = write_shards(dir, rows, 3, 2);
  const ShardSetSource shards(ingest_shards(paths, config));
  std::vector<float> scratch2(32);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto a = synthetic.stack_row(i, scratch);
    const auto b = shards.stack_row(i, scratch2);
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST_CASE("pool records serialize dialogues and count response characters") {
  const PoolItem dialogue = parse_pool_record(
      R"({"id": 3, "messages": [{"role": "user", "content": "hi"},)"
      R"( {"role": "assistant", "content": "héllo"},)"
      R"( {"role": "user", "content": "more"}, {"role": "assistant", "content": "ok"}]})",
      3);
  CHECK(dialogue.text == "hi\nh\xc3\xa9llo\nmore\nok");
  CHECK(dialogue.response_length == 7);

  const PoolItem plain = parse_pool_record(R"({"id": "a", "text": "abc", "response_length": 9})", 0);
  CHECK(plain.text == "abc");
  CHECK(plain.response_length == 9);
  CHECK(parse_pool_record(R"({"text": "abcd"})", 0).response_length == 4);
  CHECK_THROWS_AS(parse_pool_record(R"({"id": 1})", 0), FormatError);

  CHECK(utf8_length("a\xc3\xa9\xe2\x82\xac") == 3);
  CHECK(utf8_truncate("a\xc3\xa9\xe2\x82\xac", 2) == "a\xc3\xa9");
  CHECK(utf8_truncate("abc", 10) == "abc");
}

TEST_CASE("synthetic corpus round-trips through JSONL") {
  oracle::TempDir dir("corpus");
  const SyntheticCorpus corpus = make_synthetic_corpus(50, 5, 3);
  write_pool_jsonl(corpus.pool, dir / "pool.jsonl");
  write_tests_jsonl(corpus.tests, dir / "test.jsonl");
  const auto pool = load_pool_jsonl(dir / "pool.jsonl");
  const auto tests = load_tests_jsonl(dir / "test.jsonl");
  REQUIRE(pool.size() == 50);
  REQUIRE(tests.size() == 5);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CHECK(pool[i].index == i);
    CHECK(pool[i].text == corpus.pool[i].text);
    CHECK(pool[i].response_length == corpus.pool[i].response_length);
  }
  CHECK(tests[2].text == corpus.pool[20].text);
}

}  // namespace
}  // namespace crds
