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
#include <span>
#include <string_view>
#include <vector>

#include "crds/embedding_provider.hpp"
#include "crds/matrix.hpp"

namespace crds {

enum class EntryMode { kUniform, kSign };

std::string_view entry_mode_name(EntryMode mode);
EntryMode parse_entry_mode(std::string_view name);

/// H independent v x w projection matrices, one per extracted layer.
/// Regenerated from the seed on demand; never persisted.
class ProjectionBank {
 public:
  ProjectionBank(std::uint64_t seed, std::size_t v, std::size_t w,
                 EntryMode mode, std::vector<Matrix> matrices);

  std::uint64_t seed() const { return seed_; }
  std::size_t input_dim() const { return v_; }
  std::size_t output_dim() const { return w_; }
  std::size_t layer_count() const { return matrices_.size(); }
  EntryMode entry_mode() const { return mode_; }
  const Matrix& matrix(std::size_t h) const { return matrices_[h]; }

  friend bool operator==(const ProjectionBank&, const ProjectionBank&) = default;

 private:
  std::uint64_t seed_;
  std::size_t v_;
  std::size_t w_;
  EntryMode mode_;
  std::vector<Matrix> matrices_;
};

/// Layer h draws from the sub-seed mix_seed(seed, h). Uniform entries are
/// i.i.d. U[-1, 1]; sign entries are i.i.d. +-1.
ProjectionBank make_projection_bank(std::uint64_t seed, std::size_t v, std::size_t w,
                                    std::size_t layers, EntryMode mode);

/// Per-layer width that keeps the concatenation at (or just under) v.
std::size_t default_projection_width(std::size_t v, std::size_t layers);

/// Row-vector product e * P.
std::vector<float> project(std::span<const float> e, const Matrix& projection);
void project_into(std::span<const float> e, const Matrix& projection,
                  std::span<float> out);

/// [e_1 P_1 | e_2 P_2 | ... | e_H P_H].
std::vector<float> crds_r_compose(const LayerStack& stack, const ProjectionBank& bank);
void crds_r_compose_into(std::span<const float> stack_values, std::size_t layers,
                         const ProjectionBank& bank, std::span<float> out);

std::vector<float> average_pool(const LayerStack& stack);
void average_pool_into(std::span<const float> stack_values, std::size_t layers,
                       std::span<float> out);

/// Sign pattern: +1 where the component is >= 0, else -1.
std::vector<float> binarize(std::span<const float> e);
void binarize_into(std::span<const float> e, std::span<float> out);

}  // namespace crds
