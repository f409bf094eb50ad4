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

#include "crds/selection.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "crds/error.hpp"
#include "crds/random.hpp"
#include "support/oracles.hpp"

namespace crds {
namespace {

using Idx = std::vector<std::size_t>;

std::vector<std::size_t> per_test_counts(const SelectionResult& r, std::size_t cols) {
  std::vector<std::size_t> counts(cols, 0);
  for (const auto& e : r.entries) ++counts[*e.test_index];
  return counts;
}

TEST_CASE("round robin examples") {
  const Matrix s(4, 2, {0.9f, 0.1f, 0.8f, 0.95f, 0.7f, 0.2f, 0.1f, 0.3f});
  const SelectionResult r = round_robin_select(s, 3);
  CHECK(r.pool_indices() == Idx{0, 1, 2});
  REQUIRE(r.entries.size() == 3);
  CHECK(*r.entries[0].test_index == 0);
  CHECK(*r.entries[1].test_index == 1);
  CHECK(*r.entries[2].test_index == 0);
  CHECK(r.entries[1].score == 0.95f);
  CHECK(r.entries[2].rank == 2);
  CHECK(r.method == "round_robin");
  CHECK(r.k == 3);
  CHECK(r.pool_size == 4);

  const Matrix col(5, 1, {0.2f, 0.9f, 0.5f, 0.9f, -1.f});
  CHECK(round_robin_select(col, 3).pool_indices() == Idx{1, 3, 2});

  const Matrix flat(4, 2, std::vector<float>(8, 0.5f));
  CHECK(round_robin_select(flat, 3).pool_indices() == Idx{0, 1, 2});

  // A row claimed by test 0 is skipped when test 1 also prefers it.
  const Matrix shared(3, 2, {1.f, 1.f, 0.f, 0.5f, 0.2f, 0.f});
  CHECK(round_robin_select(shared, 3).pool_indices() == Idx{0, 1, 2});

  CHECK_THROWS_AS(round_robin_select(s, 0), InvalidArgument);
  CHECK_THROWS_AS(round_robin_select(s, 5), InvalidArgument);
  CHECK_THROWS_AS(round_robin_select(Matrix(3, 0), 1), InvalidArgument);
}

TEST_CASE("round robin matches the brute-force oracle") {
  SeededStream rng(31337);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t rows = 1 + rng.next_below(200);
    const std::size_t cols = 1 + rng.next_below(8);
    const std::size_t k = 1 + rng.next_below(rows);
    const auto scores = oracle::grid_scores(rng, rows, cols, 2 + rng.next_below(20));
    const SelectionResult r = round_robin_select(Matrix(rows, cols, scores), k);
    const auto picks = oracle::brute_force_round_robin(scores, rows, cols, k);
    REQUIRE(r.entries.size() == k);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(r.entries[i].pool_index == picks[i].pool_index);
      CHECK(*r.entries[i].test_index == picks[i].test_index);
      CHECK(r.entries[i].rank == i);
    }
    const auto counts = per_test_counts(r, cols);
    CHECK(*std::max_element(counts.begin(), counts.end()) -
              *std::min_element(counts.begin(), counts.end()) <=
          1);
    const auto idx = r.pool_indices();
    const std::set<std::size_t> unique(idx.begin(), idx.end());
    CHECK(unique.size() == k);
  }
}

TEST_CASE("round robin is invariant to increasing score transforms") {
  SeededStream rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 2 + rng.next_below(60), cols = 1 + rng.next_below(5);
    const auto scores = oracle::grid_scores(rng, rows, cols, 9);
    std::vector<float> shifted(scores.size());
    std::transform(scores.begin(), scores.end(), shifted.begin(),
                   [](float x) { return static_cast<float>(std::exp(3.0 * x) - 2.0); });
    const std::size_t k = 1 + rng.next_below(rows);
    CHECK(round_robin_select(Matrix(rows, cols, scores), k).pool_indices() ==
          round_robin_select(Matrix(rows, cols, shifted), k).pool_indices());
  }
}

TEST_CASE("round robin carries similarity provenance") {
  SimilarityMatrix sim;
  sim.scores = Matrix(3, 1, {0.1f, 0.3f, 0.2f});
  sim.provenance = {{"method", "crds_r"}, {"projection_seed", "4"}};
  const SelectionResult r = round_robin_select(sim, 2);
  CHECK(r.pool_indices() == Idx{1, 2});
  CHECK(r.metadata.at("method") == "crds_r");
  CHECK(r.metadata.at("projection_seed") == "4");
}

TEST_CASE("random_select") {
  Idx all = random_select(10, 10, 3).pool_indices();
  std::sort(all.begin(), all.end());
  CHECK(all == Idx{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(random_select(50, 7, 1).pool_indices() == random_select(50, 7, 1).pool_indices());
  CHECK(random_select(50, 7, 1).pool_indices() != random_select(50, 7, 2).pool_indices());
  const SelectionResult big = random_select(1'000'000, 70'000, 12);
  CHECK(big.method == "random");
  CHECK(big.metadata.at("selection_seed") == "12");
  CHECK_FALSE(big.entries.front().test_index.has_value());
  const auto idx = big.pool_indices();
  const std::set<std::size_t> unique(idx.begin(), idx.end());
  CHECK(unique.size() == 70'000);
  CHECK(*unique.rbegin() < 1'000'000);
  CHECK_THROWS_AS(random_select(5, 6, 0), InvalidArgument);

  // Each index is equally likely to be drawn.
  std::vector<int> hits(20, 0);
  for (std::uint64_t seed = 0; seed < 2000; ++seed)
    for (const std::size_t i : random_select(20, 5, seed).pool_indices()) ++hits[i];
  for (const int h : hits) CHECK(std::abs(h - 500) < 100);
}

TEST_CASE("length_select") {
  auto items = [](std::vector<std::size_t> lengths) {
    std::vector<PoolItem> pool;
    for (std::size_t i = 0; i < lengths.size(); ++i) pool.push_back({i, "x", lengths[i]});
    return pool;
  };
  CHECK(length_select(items({5, 10, 2}), 2).pool_indices() == Idx{1, 0});
  CHECK(length_select(items({5, 10, 2}), 3).pool_indices() == Idx{1, 0, 2});
  CHECK(length_select(items({4, 4, 4, 4}), 2).pool_indices() == Idx{0, 1});
  CHECK(length_select(items({5, 10, 2}), 1).entries[0].score == 10.f);
  CHECK_THROWS_AS(length_select(items({1}), 2), InvalidArgument);
}

TEST_CASE("selection_overlap") {
  auto picks = [](std::vector<std::size_t> idx, std::size_t pool = 10) {
    SelectionResult r;
    r.pool_size = pool;
    r.k = idx.size();
    for (std::size_t i = 0; i < idx.size(); ++i) r.entries.push_back({i, idx[i], i % 2, 0.f});
    return r;
  };
  CHECK(selection_overlap(picks({1, 2, 3}), picks({3, 2, 1})).jaccard == 1.0);
  CHECK(selection_overlap(picks({1, 2}), picks({3, 4})).jaccard == 0.0);
  const OverlapReport third = selection_overlap(picks({1, 2}), picks({5, 2}));
  CHECK(third.jaccard == doctest::Approx(1.0 / 3.0));
  CHECK(third.intersection == 1);
  CHECK(third.union_size == 3);
  REQUIRE(third.per_test.size() == 2);
  CHECK(third.per_test[0].shared == 0);
  CHECK(third.per_test[1].shared == 1);
  CHECK(selection_overlap(picks({}), picks({})).jaccard == 1.0);
  CHECK_THROWS_AS(selection_overlap(picks({1}, 10), picks({1}, 11)), InvalidArgument);
  CHECK(overlap_report_json(third).find("\"jaccard\"") != std::string::npos);
}

}  // namespace
}  // namespace crds
