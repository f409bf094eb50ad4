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

#include "crds/compression.hpp"

#include <string>

#include "crds/error.hpp"
#include "crds/random.hpp"

namespace crds {

std::string_view entry_mode_name(EntryMode mode) {
  return mode == EntryMode::kSign ? "sign" : "uniform";
}

EntryMode parse_entry_mode(std::string_view name) {
  if (name == "uniform") return EntryMode::kUniform;
  if (name == "sign") return EntryMode::kSign;
  throw InvalidArgument("unknown entry_mode '" + std::string(name) +
                        "' (expected uniform or sign)");
}

ProjectionBank::ProjectionBank(std::uint64_t seed, std::size_t v, std::size_t w,
                               EntryMode mode, std::vector<Matrix> matrices)
    : seed_(seed), v_(v), w_(w), mode_(mode), matrices_(std::move(matrices)) {
  for (const Matrix& m : matrices_) {
    if (m.rows() != v_ || m.cols() != w_) {
      throw InvalidArgument("projection matrix shape differs from v x w");
    }
  }
}

ProjectionBank make_projection_bank(std::uint64_t seed, std::size_t v, std::size_t w,
                                    std::size_t layers, EntryMode mode) {
  if (w == 0 || w > v) {
    throw InvalidArgument("projection width must satisfy 1 <= w <= v (w=" +
                          std::to_string(w) + ", v=" + std::to_string(v) + ")");
  }
  if (layers == 0) throw InvalidArgument("projection bank needs H >= 1");

  std::vector<Matrix> matrices;
  matrices.reserve(layers);
  for (std::size_t h = 0; h < layers; ++h) {
    SeededStream stream(mix_seed(seed, h));
    Matrix p(v, w);
    for (float& x : p.values()) {
      if (mode == EntryMode::kUniform) {
        x = static_cast<float>(stream.next_symmetric());
      } else {
        x = (stream.next_u64() >> 63) != 0 ? 1.0f : -1.0f;
      }
    }
    matrices.push_back(std::move(p));
  }
  return ProjectionBank(seed, v, w, mode, std::move(matrices));
}

std::size_t default_projection_width(std::size_t v, std::size_t layers) {
  if (layers == 0) throw InvalidArgument("H must be at least 1");
  return v / layers;
}

void project_into(std::span<const float> e, const Matrix& projection,
                  std::span<float> out) {
  if (e.size() != projection.rows() || out.size() != projection.cols()) {
    throw InvalidArgument("project: e has dim " + std::to_string(e.size()) +
                          ", P is " + std::to_string(projection.rows()) + "x" +
                          std::to_string(projection.cols()));
  }
  const std::size_t w = projection.cols();
  std::vector<double> acc(w, 0.0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double ei = e[i];
    const auto row = projection.row(i);
    for (std::size_t j = 0; j < w; ++j) acc[j] += ei * static_cast<double>(row[j]);
  }
  for (std::size_t j = 0; j < w; ++j) out[j] = static_cast<float>(acc[j]);
}

std::vector<float> project(std::span<const float> e, const Matrix& projection) {
  std::vector<float> out(projection.cols());
  project_into(e, projection, out);
  return out;
}

void crds_r_compose_into(std::span<const float> stack_values, std::size_t layers,
                         const ProjectionBank& bank, std::span<float> out) {
  if (layers != bank.layer_count()) {
    throw InvalidArgument("stack has " + std::to_string(layers) +
                          " layers but the projection bank has " +
                          std::to_string(bank.layer_count()));
  }
  const std::size_t v = bank.input_dim();
  const std::size_t w = bank.output_dim();
  if (stack_values.size() != layers * v) {
    throw InvalidArgument("stack layer dimension does not match the projection bank");
  }
  if (out.size() != layers * w) throw InvalidArgument("output must hold H * w floats");
  for (std::size_t h = 0; h < layers; ++h) {
    project_into(stack_values.subspan(h * v, v), bank.matrix(h), out.subspan(h * w, w));
  }
}

std::vector<float> crds_r_compose(const LayerStack& stack, const ProjectionBank& bank) {
  std::vector<float> out(stack.layer_count() * bank.output_dim());
  crds_r_compose_into(stack.values(), stack.layer_count(), bank, out);
  return out;
}

void average_pool_into(std::span<const float> stack_values, std::size_t layers,
                       std::span<float> out) {
  if (layers == 0 || stack_values.empty()) {
    throw InvalidArgument("average_pool needs a non-empty stack");
  }
  const std::size_t v = out.size();
  if (stack_values.size() != layers * v) {
    throw InvalidArgument("average_pool output does not match the layer dimension");
  }
  for (std::size_t i = 0; i < v; ++i) {
    double sum = 0.0;
    for (std::size_t h = 0; h < layers; ++h) sum += stack_values[h * v + i];
    out[i] = static_cast<float>(sum / static_cast<double>(layers));
  }
}

std::vector<float> average_pool(const LayerStack& stack) {
  if (stack.layer_count() == 0) throw InvalidArgument("average_pool needs a non-empty stack");
  std::vector<float> out(stack.dim());
  average_pool_into(stack.values(), stack.layer_count(), out);
  return out;
}

void binarize_into(std::span<const float> e, std::span<float> out) {
  if (e.size() != out.size()) throw InvalidArgument("binarize: size mismatch");
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = e[i] >= 0.0f ? 1.0f : -1.0f;
}

std::vector<float> binarize(std::span<const float> e) {
  std::vector<float> out(e.size());
  binarize_into(e, out);
  return out;
}

}  // namespace crds
