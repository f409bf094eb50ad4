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

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "crds/error.hpp"
#include "crds/random.hpp"

namespace crds {
namespace {

void check_budget(std::size_t k, std::size_t pool_size) {
  if (k == 0) throw InvalidArgument("selection budget k must be positive");
  if (k > pool_size) {
    throw InvalidArgument("selection budget k=" + std::to_string(k) +
                          " exceeds pool size " + std::to_string(pool_size));
  }
}

}  // namespace

std::vector<std::size_t> SelectionResult::pool_indices() const {
  std::vector<std::size_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.pool_index);
  return out;
}

SelectionResult round_robin_select(MatrixView scores, std::size_t k) {
  const std::size_t rows = scores.rows;
  const std::size_t cols = scores.cols;
  check_budget(k, rows);
  if (cols == 0) throw InvalidArgument("similarity matrix has no test columns");
  if (rows > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("round_robin_select supports at most 2^32-1 pool rows");
  }

  // Each column's pool rows, best first; a cursor per column skips rows
  // already claimed through other columns.
  std::vector<std::vector<std::uint32_t>> order(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    auto& idx = order[j];
    idx.resize(rows);
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      return scores.data[a * cols + j] > scores.data[b * cols + j];
    });
  }

  std::vector<bool> taken(rows, false);
  std::vector<std::size_t> cursor(cols, 0);
  SelectionResult result;
  result.method = "round_robin";
  result.k = k;
  result.pool_size = rows;
  result.entries.reserve(k);
  for (std::size_t step = 0; step < k; ++step) {
    const std::size_t j = step % cols;
    std::size_t& c = cursor[j];
    while (taken[order[j][c]]) ++c;
    const std::size_t pick = order[j][c];
    taken[pick] = true;
    result.entries.push_back({step, pick, j, scores.data[pick * cols + j]});
  }
  return result;
}

SelectionResult round_robin_select(const SimilarityMatrix& sim, std::size_t k) {
  SelectionResult r = round_robin_select(MatrixView(sim.scores), k);
  r.metadata = sim.provenance;
  return r;
}

SelectionResult random_select(std::size_t pool_size, std::size_t k, std::uint64_t seed) {
  check_budget(k, pool_size);
  // Partial Fisher-Yates with a sparse swap map: O(k) memory.
  std::unordered_map<std::size_t, std::size_t> swapped;
  auto at = [&](std::size_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  SeededStream stream(seed);
  SelectionResult result;
  result.method = "random";
  result.k = k;
  result.pool_size = pool_size;
  result.metadata["selection_seed"] = std::to_string(seed);
  result.entries.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.next_below(pool_size - i));
    const std::size_t vi = at(i);
    const std::size_t vj = at(j);
    swapped[j] = vi;
    swapped[i] = vj;
    result.entries.push_back({i, vj, std::nullopt, 0.0f});
  }
  return result;
}

SelectionResult length_select(std::span<const PoolItem> pool, std::size_t k) {
  check_budget(k, pool.size());
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return pool[a].response_length > pool[b].response_length;
  });
  SelectionResult result;
  result.method = "length";
  result.k = k;
  result.pool_size = pool.size();
  result.entries.reserve(k);
  for (std::size_t r = 0; r < k; ++r) {
    result.entries.push_back(
        {r, pool[idx[r]].index, std::nullopt, static_cast<float>(pool[idx[r]].response_length)});
  }
  return result;
}

OverlapReport selection_overlap(const SelectionResult& a, const SelectionResult& b) {
  if (a.pool_size != b.pool_size) {
    throw InvalidArgument("selections are over different pools (" +
                          std::to_string(a.pool_size) + " vs " +
                          std::to_string(b.pool_size) + " items)");
  }
  const auto ia = a.pool_indices();
  const std::unordered_set<std::size_t> set_a(ia.begin(), ia.end());
  const auto ib = b.pool_indices();
  const std::unordered_set<std::size_t> set_b(ib.begin(), ib.end());

  OverlapReport report;
  report.size_a = set_a.size();
  report.size_b = set_b.size();
  for (std::size_t p : set_a) report.intersection += set_b.count(p);
  report.union_size = report.size_a + report.size_b - report.intersection;
  report.jaccard = report.union_size == 0
                       ? 1.0
                       : static_cast<double>(report.intersection) /
                             static_cast<double>(report.union_size);

  std::map<std::size_t, std::pair<std::unordered_set<std::size_t>,
                                  std::unordered_set<std::size_t>>> by_test;
  for (const auto& e : a.entries) {
    if (e.test_index) by_test[*e.test_index].first.insert(e.pool_index);
  }
  for (const auto& e : b.entries) {
    if (e.test_index) by_test[*e.test_index].second.insert(e.pool_index);
  }
  for (const auto& [test, sets] : by_test) {
    TestAgreement t;
    t.test_index = test;
    t.count_a = sets.first.size();
    t.count_b = sets.second.size();
    for (std::size_t p : sets.first) t.shared += sets.second.count(p);
    report.per_test.push_back(t);
  }
  return report;
}

std::string overlap_report_json(const OverlapReport& report) {
  nlohmann::json per_test = nlohmann::json::array();
  for (const auto& t : report.per_test) {
    per_test.push_back({{"test_index", t.test_index},
                        {"count_a", t.count_a},
                        {"count_b", t.count_b},
                        {"shared", t.shared}});
  }
  const nlohmann::json doc = {
      {"size_a", report.size_a},
      {"size_b", report.size_b},
      {"intersection", report.intersection},
      {"union", report.union_size},
      {"jaccard", report.jaccard},
      {"per_test", per_test},
  };
  return doc.dump(2) + "\n";
}

}  // namespace crds
