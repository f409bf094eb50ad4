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
#include <string>
#include <string_view>
#include <vector>

#include "crds/embedding_provider.hpp"

namespace crds {

/// Number of UTF-8 code points. Malformed bytes count as one character each.
std::size_t utf8_length(std::string_view text);

/// Prefix holding at most `max_chars` code points.
std::string_view utf8_truncate(std::string_view text, std::size_t max_chars);

// Line-delimited JSON records. A record carries either
//   {"id", "text", "response_length"?}
// or a dialogue {"id", "messages": [{"role", "content"}, ...]}; dialogues
// are flattened to their turns joined by '\n' and response_length counts
// the characters of the concatenated assistant turns. A bare "text" record
// without response_length counts its whole text.
std::vector<PoolItem> load_pool_jsonl(const std::filesystem::path& path);
std::vector<TestItem> load_tests_jsonl(const std::filesystem::path& path);

/// Parses a single pool record (exposed for tests).
PoolItem parse_pool_record(std::string_view json_line, std::size_t index);

/// Deterministic filler corpus for desk-scale runs. Test item j shares its
/// text with pool item (j * stride) so every test has an exact match.
struct SyntheticCorpus {
  std::vector<PoolItem> pool;
  std::vector<TestItem> tests;
};
SyntheticCorpus make_synthetic_corpus(std::size_t pool_size, std::size_t test_size,
                                      std::uint64_t seed);

void write_pool_jsonl(const std::vector<PoolItem>& pool, const std::filesystem::path& path);
void write_tests_jsonl(const std::vector<TestItem>& tests, const std::filesystem::path& path);

}  // namespace crds
