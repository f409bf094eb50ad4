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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crds/embedding_provider.hpp"
#include "crds/matrix.hpp"
#include "crds/similarity_matrix.hpp"

namespace crds {

struct SelectionEntry {
  std::size_t rank = 0;
  std::size_t pool_index = 0;
  std::optional<std::size_t> test_index;  // unset for reference selectors
  float score = 0.0f;

  friend bool operator==(const SelectionEntry&, const SelectionEntry&) = default;
};

struct SelectionResult {
  std::string method;
  std::size_t k = 0;
  std::size_t pool_size = 0;
  std::vector<SelectionEntry> entries;
  Provenance metadata;  // seeds and upstream provenance

  std::vector<std::size_t> pool_indices() const;
};

/// Cycles over test columns; each step claims the highest-scoring unselected
/// pool row of the current column (lowest pool index on ties).
SelectionResult round_robin_select(MatrixView scores, std::size_t k);
SelectionResult round_robin_select(const SimilarityMatrix& sim, std::size_t k);

SelectionResult random_select(std::size_t pool_size, std::size_t k, std::uint64_t seed);

/// Top-k by response length, longest first, lowest index on ties.
SelectionResult length_select(std::span<const PoolItem> pool, std::size_t k);

struct TestAgreement {
  std::size_t test_index = 0;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  std::size_t shared = 0;
};

struct OverlapReport {
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  std::size_t intersection = 0;
  std::size_t union_size = 0;
  double jaccard = 0.0;
  std::vector<TestAgreement> per_test;
};

OverlapReport selection_overlap(const SelectionResult& a, const SelectionResult& b);

/// Serialized as a JSON document (ordered keys).
std::string overlap_report_json(const OverlapReport& report);

}  // namespace crds
