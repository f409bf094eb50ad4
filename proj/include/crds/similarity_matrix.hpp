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

#include <map>
#include <string>

#include "crds/matrix.hpp"

namespace crds {

/// Free-form key/value provenance. Ordered so serialized sidecars are
/// byte-stable.
using Provenance = std::map<std::string, std::string>;

/// |X| x |T| scores with rows in original pool order.
struct SimilarityMatrix {
  Matrix scores;
  Provenance provenance;

  std::size_t rows() const { return scores.rows(); }
  std::size_t cols() const { return scores.cols(); }
};

}  // namespace crds
