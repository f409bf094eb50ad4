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

// Fixed-layout little-endian binary formats. Every file starts with a
// 64-byte header; the payload is row-major IEEE-754 binary32.
//
//   shard (.crds)        0 magic "CRDS"   4 u16 version   6 u16 dtype (1=f32)
//                        8 u64 count     16 u32 dim       20 u32 shard_index
//                       24 u32 num_shards 28 u32 pad_rows 32 u16 layer_count
//   transformer (.crdw)  0 magic "CRDW"   4 u16 version   8 u32 v
//                       12 u32 beta      16 u64 fit_count
//                        payload: mean (v) then W (v x beta)
//   similarity (.crsm)   0 magic "CRSM"   4 u16 version   8 u64 rows
//                       16 u32 cols
//
// Unlisted header bytes are zero on write and ignored on read.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "crds/matrix.hpp"
#include "crds/similarity_matrix.hpp"

namespace crds {

class WhiteningTransformer;
struct SelectionResult;

inline constexpr std::size_t kHeaderSize = 64;
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::uint16_t kDtypeFloat32 = 1;

struct ShardHeader {
  std::uint16_t version = kFormatVersion;
  std::uint16_t dtype = kDtypeFloat32;
  std::uint64_t count = 0;  // rows including pad rows
  std::uint32_t dim = 0;    // floats per row (layer_count * v)
  std::uint32_t shard_index = 0;
  std::uint32_t num_shards = 1;
  std::uint32_t pad_rows = 0;
  std::uint16_t layer_count = 1;

  friend bool operator==(const ShardHeader&, const ShardHeader&) = default;
};

/// Read-only memory mapping. Move-only.
class MappedFile {
 public:
  MappedFile() = default;
  explicit MappedFile(const std::filesystem::path& path);
  MappedFile(MappedFile&& other) noexcept;
  MappedFile& operator=(MappedFile&& other) noexcept;
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;
  ~MappedFile();

  std::span<const std::byte> bytes() const { return {data_, size_}; }

 private:
  void reset();

  const std::byte* data_ = nullptr;
  std::size_t size_ = 0;
};

/// Memory-mapped shard. The header is validated against the file length
/// before the payload is exposed.
class ShardFile {
 public:
  static ShardFile open(const std::filesystem::path& path);

  const ShardHeader& header() const { return header_; }
  MatrixView payload() const;
  std::span<const float> row(std::size_t r) const;

 private:
  MappedFile map_;
  ShardHeader header_;
};

struct ShardData {
  ShardHeader header;
  Matrix matrix;
};

void write_shard(MatrixView matrix, const ShardHeader& header,
                 const std::filesystem::path& path);
ShardData read_shard(const std::filesystem::path& path);

void write_transformer(const WhiteningTransformer& transformer,
                       const std::filesystem::path& path);
WhiteningTransformer read_transformer(const std::filesystem::path& path);

/// Sidecar path holding the provenance record of a similarity file.
std::filesystem::path sidecar_path(const std::filesystem::path& path);

struct SimilarityReadResult {
  SimilarityMatrix matrix;
  bool sidecar_missing = false;
};

void write_similarity(const SimilarityMatrix& sim, const std::filesystem::path& path);
SimilarityReadResult read_similarity(const std::filesystem::path& path);

/// Line-delimited JSON: one header record then one record per pick.
void write_selection(const SelectionResult& result, const std::filesystem::path& path);
SelectionResult read_selection(const std::filesystem::path& path);

/// Payload byte count rows*cols*4, rejecting 64-bit overflow.
std::uint64_t checked_payload_bytes(std::uint64_t rows, std::uint64_t cols);

}  // namespace crds
