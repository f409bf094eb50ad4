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

#include "crds/corpus.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

#include "crds/error.hpp"
#include "crds/random.hpp"

namespace crds {
namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Length in bytes of the code point starting at text[i].
std::size_t code_point_bytes(std::string_view text, std::size_t i) {
  const auto lead = static_cast<unsigned char>(text[i]);
  std::size_t len = 1;
  if ((lead & 0xE0) == 0xC0) len = 2;
  else if ((lead & 0xF0) == 0xE0) len = 3;
  else if ((lead & 0xF8) == 0xF0) len = 4;
  if (i + len > text.size()) return 1;
  for (std::size_t k = 1; k < len; ++k) {
    if (!is_continuation(static_cast<unsigned char>(text[i + k]))) return 1;
  }
  return len;
}

bool is_response_role(const std::string& role) {
  return role == "assistant" || role == "gpt" || role == "response" || role == "model";
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(line, index++);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < text.size(); i += code_point_bytes(text, i)) ++n;
  return n;
}

std::string_view utf8_truncate(std::string_view text, std::size_t max_chars) {
  std::size_t i = 0;
  for (std::size_t n = 0; n < max_chars && i < text.size(); ++n) {
    i += code_point_bytes(text, i);
  }
  return text.substr(0, i);
}

PoolItem parse_pool_record(std::string_view json_line, std::size_t index) {
  const nlohmann::json rec = nlohmann::json::parse(json_line);
  PoolItem item;
  item.index = index;
  if (rec.contains("messages")) {
    std::string text;
    std::string responses;
    bool first = true;
    for (const auto& turn : rec.at("messages")) {
      const std::string content = turn.at("content").get<std::string>();
      if (!first) text += '\n';
      text += content;
      first = false;
      if (is_response_role(turn.value("role", ""))) responses += content;
    }
    item.text = std::move(text);
    item.response_length = utf8_length(responses);
  } else if (rec.contains("text")) {
    item.text = rec.at("text").get<std::string>();
    item.response_length = rec.contains("response_length")
                               ? rec.at("response_length").get<std::size_t>()
                               : utf8_length(item.text);
  } else {
    throw FormatError("pool record needs \"text\" or \"messages\"");
  }
  return item;
}

std::vector<PoolItem> load_pool_jsonl(const std::filesystem::path& path) {
  std::vector<PoolItem> items;
  for_each_line(path, [&](const std::string& line, std::size_t index) {
    items.push_back(parse_pool_record(line, index));
  });
  return items;
}

std::vector<TestItem> load_tests_jsonl(const std::filesystem::path& path) {
  std::vector<TestItem> items;
  for_each_line(path, [&](const std::string& line, std::size_t index) {
    const nlohmann::json rec = nlohmann::json::parse(line);
    TestItem item;
    item.index = index;
    if (!rec.contains("text")) throw FormatError("test record needs \"text\"");
    item.text = rec.at("text").get<std::string>();
    if (rec.contains("answer") && rec.at("answer").is_string()) {
      item.answer = rec.at("answer").get<std::string>();
    }
    items.push_back(std::move(item));
  });
  return items;
}

SyntheticCorpus make_synthetic_corpus(std::size_t pool_size, std::size_t test_size,
                                      std::uint64_t seed) {
  if (test_size > 0 && pool_size == 0) {
    throw InvalidArgument("synthetic corpus with tests needs a non-empty pool");
  }
  static constexpr const char* kWords[] = {
      "solve", "the", "equation", "write", "a", "function", "that", "returns",
      "sum", "of", "list", "explain", "why", "proof", "integer", "prime",
      "story", "about", "river", "compute", "average", "speed", "train", "code"};
  constexpr std::size_t kWordCount = std::size(kWords);

  SyntheticCorpus corpus;
  corpus.pool.reserve(pool_size);
  SeededStream stream(mix_seed(seed, 0));
  for (std::size_t i = 0; i < pool_size; ++i) {
    std::string instruction = "item " + std::to_string(i) + ":";
    const std::size_t n_words = 4 + stream.next_below(12);
    for (std::size_t w = 0; w < n_words; ++w) {
      instruction += ' ';
      instruction += kWords[stream.next_below(kWordCount)];
    }
    const std::string response(stream.next_below(400), 'x');
    corpus.pool.push_back({i, instruction + "\n" + response, response.size()});
  }
  const std::size_t stride = test_size == 0 ? 1 : std::max<std::size_t>(1, pool_size / test_size);
  for (std::size_t j = 0; j < test_size; ++j) {
    const PoolItem& twin = corpus.pool[(j * stride) % pool_size];
    corpus.tests.push_back({j, twin.text, ""});
  }
  return corpus;
}

void write_pool_jsonl(const std::vector<PoolItem>& pool, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& item : pool) {
    out << nlohmann::json{{"id", item.index},
                          {"text", item.text},
                          {"response_length", item.response_length}}
               .dump()
        << '\n';
  }
}

void write_tests_jsonl(const std::vector<TestItem>& tests, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& item : tests) {
    out << nlohmann::json{{"id", item.index}, {"text", item.text}, {"answer", item.answer}}
               .dump()
        << '\n';
  }
}

}  // namespace crds
