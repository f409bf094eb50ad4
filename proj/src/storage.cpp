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

#include "crds/storage.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <array>
#include <bit>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "crds/error.hpp"
#include "crds/selection.hpp"
#include "crds/whitening.hpp"

static_assert(std::endian::native == std::endian::little,
              "payloads are written in host order, which must be little-endian");

namespace crds {
namespace {

using Header = std::array<unsigned char, kHeaderSize>;

constexpr char kShardMagic[4] = {'C', 'R', 'D', 'S'};
constexpr char kTransformerMagic[4] = {'C', 'R', 'D', 'W'};
constexpr char kSimilarityMagic[4] = {'C', 'R', 'S', 'M'};

template <typename T>
void put(Header& h, std::size_t offset, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    h[offset + i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
}

template <typename T>
T get(std::span<const std::byte> bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(std::to_integer<unsigned char>(bytes[offset + i]))
         << (8 * i);
  }
  return static_cast<T>(v);
}

Header new_header(const char (&magic)[4]) {
  Header h{};
  std::memcpy(h.data(), magic, 4);
  put<std::uint16_t>(h, 4, kFormatVersion);
  return h;
}

// Validates the common prelude and the exact file length. Nothing past the
// header is read before this succeeds.
void check_prelude(std::span<const std::byte> bytes, const char (&magic)[4],
                   const std::filesystem::path& path) {
  if (bytes.size() < kHeaderSize) {
    throw LengthError(path.string() + ": file shorter than the " +
                      std::to_string(kHeaderSize) + "-byte header");
  }
  if (std::memcmp(bytes.data(), magic, 4) != 0) {
    throw FormatError(path.string() + ": bad magic, expected \"" +
                      std::string(magic, 4) + "\"");
  }
  const auto version = get<std::uint16_t>(bytes, 4);
  if (version == 0) throw FormatError(path.string() + ": version 0 is invalid");
  if (version > kFormatVersion) {
    throw VersionError(path.string() + ": format version " + std::to_string(version) +
                       " is newer than supported version " +
                       std::to_string(kFormatVersion));
  }
}

void check_length(std::span<const std::byte> bytes, std::uint64_t payload,
                  const std::filesystem::path& path) {
  if (payload > std::numeric_limits<std::uint64_t>::max() - kHeaderSize) {
    throw LengthError(path.string() + ": declared size overflows");
  }
  const std::uint64_t expected = kHeaderSize + payload;
  if (bytes.size() != expected) {
    throw LengthError(path.string() + ": declared sizes need " +
                      std::to_string(expected) + " bytes, file has " +
                      std::to_string(bytes.size()));
  }
}

// Writes to a sibling temp file and renames, so readers never observe a
// partially written artifact.
void write_file(const std::filesystem::path& path, const Header& header,
                std::span<const std::span<const float>> payloads) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(header.data()), header.size());
    for (auto p : payloads) {
      out.write(reinterpret_cast<const char*>(p.data()),
                static_cast<std::streamsize>(p.size_bytes()));
    }
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::span<const float> float_payload(std::span<const std::byte> bytes,
                                     std::size_t count) {
  return {reinterpret_cast<const float*>(bytes.data() + kHeaderSize), count};
}

}  // namespace

std::uint64_t checked_payload_bytes(std::uint64_t rows, std::uint64_t cols) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  if (cols != 0 && rows > kMax / cols) {
    throw LengthError("rows x cols overflows 64-bit arithmetic");
  }
  const std::uint64_t elements = rows * cols;
  if (elements > kMax / sizeof(float)) {
    throw LengthError("payload byte count overflows 64-bit arithmetic");
  }
  return elements * sizeof(float);
}

// ---------------------------------------------------------------------------
// MappedFile

MappedFile::MappedFile(const std::filesystem::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) {
    throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
  }
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw IoError("cannot stat " + path.string());
  }
  size_ = static_cast<std::size_t>(st.st_size);
  if (size_ > 0) {
    void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
    if (p == MAP_FAILED) {
      ::close(fd);
      throw IoError("cannot map " + path.string() + ": " + std::strerror(errno));
    }
    data_ = static_cast<const std::byte*>(p);
  }
  ::close(fd);
}

MappedFile::MappedFile(MappedFile&& other) noexcept
    : data_(std::exchange(other.data_, nullptr)), size_(std::exchange(other.size_, 0)) {}

MappedFile& MappedFile::operator=(MappedFile&& other) noexcept {
  if (this != &other) {
    reset();
    data_ = std::exchange(other.data_, nullptr);
    size_ = std::exchange(other.size_, 0);
  }
  return *this;
}

MappedFile::~MappedFile() { reset(); }

void MappedFile::reset() {
  if (data_ != nullptr) ::munmap(const_cast<std::byte*>(data_), size_);
  data_ = nullptr;
  size_ = 0;
}

// ---------------------------------------------------------------------------
// Shards

ShardFile ShardFile::open(const std::filesystem::path& path) {
  ShardFile f;
  f.map_ = MappedFile(path);
  const auto bytes = f.map_.bytes();
  check_prelude(bytes, kShardMagic, path);

  ShardHeader& h = f.header_;
  h.version = get<std::uint16_t>(bytes, 4);
  h.dtype = get<std::uint16_t>(bytes, 6);
  h.count = get<std::uint64_t>(bytes, 8);
  h.dim = get<std::uint32_t>(bytes, 16);
  h.shard_index = get<std::uint32_t>(bytes, 20);
  h.num_shards = get<std::uint32_t>(bytes, 24);
  h.pad_rows = get<std::uint32_t>(bytes, 28);
  h.layer_count = get<std::uint16_t>(bytes, 32);

  if (h.dtype != kDtypeFloat32) {
    throw FormatError(path.string() + ": unsupported dtype code " + std::to_string(h.dtype));
  }
  check_length(bytes, checked_payload_bytes(h.count, h.dim), path);
  if (h.pad_rows > h.count) throw FormatError(path.string() + ": pad_rows exceeds count");
  if (h.layer_count == 0 || h.dim % h.layer_count != 0) {
    throw FormatError(path.string() + ": dim is not a multiple of layer_count");
  }
  if (h.num_shards == 0 || h.shard_index >= h.num_shards) {
    throw FormatError(path.string() + ": shard_index/num_shards inconsistent");
  }
  return f;
}

MatrixView ShardFile::payload() const {
  const auto rows = static_cast<std::size_t>(header_.count);
  return MatrixView(float_payload(map_.bytes(), rows * header_.dim), rows, header_.dim);
}

std::span<const float> ShardFile::row(std::size_t r) const {
  if (r >= header_.count) throw InvalidArgument("shard row out of range");
  return float_payload(map_.bytes(), static_cast<std::size_t>(header_.count) * header_.dim)
      .subspan(r * header_.dim, header_.dim);
}

void write_shard(MatrixView matrix, const ShardHeader& header,
                 const std::filesystem::path& path) {
  if (matrix.rows != header.count || matrix.cols != header.dim) {
    throw InvalidArgument("shard header does not match matrix shape");
  }
  if (header.pad_rows > header.count) throw InvalidArgument("pad_rows exceeds count");
  if (header.layer_count == 0 || header.dim % header.layer_count != 0) {
    throw InvalidArgument("dim is not a multiple of layer_count");
  }
  if (header.num_shards == 0 || header.shard_index >= header.num_shards) {
    throw InvalidArgument("shard_index must be below num_shards");
  }
  checked_payload_bytes(header.count, header.dim);
  Header h = new_header(kShardMagic);
  put<std::uint16_t>(h, 6, header.dtype);
  put<std::uint64_t>(h, 8, header.count);
  put<std::uint32_t>(h, 16, header.dim);
  put<std::uint32_t>(h, 20, header.shard_index);
  put<std::uint32_t>(h, 24, header.num_shards);
  put<std::uint32_t>(h, 28, header.pad_rows);
  put<std::uint16_t>(h, 32, header.layer_count);
  const std::span<const float> parts[] = {matrix.data};
  write_file(path, h, parts);
}

ShardData read_shard(const std::filesystem::path& path) {
  ShardFile f = ShardFile::open(path);
  const MatrixView view = f.payload();
  return {f.header(), Matrix(view.rows, view.cols,
                             std::vector<float>(view.data.begin(), view.data.end()))};
}

// ---------------------------------------------------------------------------
// Whitening transformer

void write_transformer(const WhiteningTransformer& transformer,
                       const std::filesystem::path& path) {
  Header h = new_header(kTransformerMagic);
  put<std::uint32_t>(h, 8, static_cast<std::uint32_t>(transformer.v()));
  put<std::uint32_t>(h, 12, static_cast<std::uint32_t>(transformer.beta()));
  put<std::uint64_t>(h, 16, transformer.fit_count());
  const std::span<const float> parts[] = {transformer.stored_mean(),
                                          transformer.stored_matrix()};
  write_file(path, h, parts);
}

WhiteningTransformer read_transformer(const std::filesystem::path& path) {
  MappedFile map(path);
  const auto bytes = map.bytes();
  check_prelude(bytes, kTransformerMagic, path);
  const auto v = get<std::uint32_t>(bytes, 8);
  const auto beta = get<std::uint32_t>(bytes, 12);
  const auto fit_count = get<std::uint64_t>(bytes, 16);
  if (v == 0 || beta == 0 || beta > v) {
    throw FormatError(path.string() + ": invalid dimensions v=" + std::to_string(v) +
                      " beta=" + std::to_string(beta) + " (need 1 <= beta <= v)");
  }
  const std::uint64_t floats = static_cast<std::uint64_t>(v) + std::uint64_t{v} * beta;
  check_length(bytes, floats * sizeof(float), path);
  const auto payload = float_payload(bytes, static_cast<std::size_t>(floats));
  std::vector<double> mean(payload.begin(), payload.begin() + v);
  std::vector<double> matrix(payload.begin() + v, payload.end());
  return WhiteningTransformer(std::move(mean), std::move(matrix), beta, fit_count);
}

// ---------------------------------------------------------------------------
// Similarity matrix

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".json";
  return p;
}

void write_similarity(const SimilarityMatrix& sim, const std::filesystem::path& path) {
  if (sim.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("similarity column count exceeds u32");
  }
  checked_payload_bytes(sim.rows(), sim.cols());
  Header h = new_header(kSimilarityMagic);
  put<std::uint64_t>(h, 8, sim.rows());
  put<std::uint32_t>(h, 16, static_cast<std::uint32_t>(sim.cols()));
  const std::span<const float> parts[] = {sim.scores.values()};
  write_file(path, h, parts);

  nlohmann::json record = nlohmann::json::object();
  for (const auto& [key, value] : sim.provenance) record[key] = value;
  write_text_file(sidecar_path(path), record.dump(2) + "\n");
}

SimilarityReadResult read_similarity(const std::filesystem::path& path) {
  MappedFile map(path);
  const auto bytes = map.bytes();
  check_prelude(bytes, kSimilarityMagic, path);
  const auto rows = get<std::uint64_t>(bytes, 8);
  const auto cols = get<std::uint32_t>(bytes, 16);
  check_length(bytes, checked_payload_bytes(rows, cols), path);
  const auto payload = float_payload(bytes, static_cast<std::size_t>(rows) * cols);

  SimilarityReadResult result;
  result.matrix.scores = Matrix(static_cast<std::size_t>(rows), cols,
                                std::vector<float>(payload.begin(), payload.end()));
  const auto sidecar = sidecar_path(path);
  if (!std::filesystem::exists(sidecar)) {
    result.sidecar_missing = true;
    return result;
  }
  std::ifstream in(sidecar);
  try {
    const nlohmann::json record = nlohmann::json::parse(in);
    for (const auto& [key, value] : record.items()) {
      result.matrix.provenance[key] = value.is_string() ? value.get<std::string>()
                                                        : value.dump();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(sidecar.string() + ": " + e.what());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Selection output

void write_selection(const SelectionResult& result, const std::filesystem::path& path) {
  std::ostringstream out;
  nlohmann::json header = {
      {"record", "header"},
      {"method", result.method},
      {"k", result.k},
      {"pool_size", result.pool_size},
      {"metadata", result.metadata},
  };
  out << header.dump() << '\n';
  for (const SelectionEntry& e : result.entries) {
    nlohmann::json rec = {
        {"rank", e.rank},
        {"pool_index", e.pool_index},
        {"test_index", e.test_index ? nlohmann::json(*e.test_index) : nlohmann::json()},
        {"score", e.score},
    };
    out << rec.dump() << '\n';
  }
  write_text_file(path, out.str());
}

SelectionResult read_selection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  SelectionResult result;
  std::string line;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const nlohmann::json rec = nlohmann::json::parse(line);
      if (line_no == 1) {
        if (rec.value("record", "") != "header") {
          throw FormatError(path.string() + ": first record must be the header");
        }
        result.method = rec.at("method").get<std::string>();
        result.k = rec.at("k").get<std::size_t>();
        result.pool_size = rec.at("pool_size").get<std::size_t>();
        if (rec.contains("metadata")) {
          result.metadata = rec.at("metadata").get<Provenance>();
        }
        continue;
      }
      SelectionEntry e;
      e.rank = rec.at("rank").get<std::size_t>();
      e.pool_index = rec.at("pool_index").get<std::size_t>();
      if (!rec.at("test_index").is_null()) e.test_index = rec.at("test_index").get<std::size_t>();
      e.score = rec.at("score").get<float>();
      result.entries.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
  if (line_no == 0) throw FormatError(path.string() + ": empty selection file");
  if (result.entries.size() != result.k) {
    throw FormatError(path.string() + ": header declares k=" + std::to_string(result.k) +
                      " but file holds " + std::to_string(result.entries.size()) +
                      " records");
  }
  return result;
}

}  // namespace crds
