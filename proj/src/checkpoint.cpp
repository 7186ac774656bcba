// Copyright 2026 The tabret Authors
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

#include "tabret/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tabret/table.hpp"

namespace tabret {

namespace {

constexpr const char* kFormat = "tabret-checkpoint";

uint32_t to_little(uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

uint64_t to_little(uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensorRef> tensors,
                     const nlohmann::json& metadata) {
  nlohmann::json header;
  header["format"] = kFormat;
  header["version"] = 1;
  header["dtype"] = "float32";
  header["metadata"] = metadata;
  header["tensors"] = nlohmann::json::array();
  size_t offset = 0;
  for (const auto& ref : tensors) {
    header["tensors"].push_back({{"name", ref.name}, {"shape", ref.tensor->shape}, {"offset", offset}});
    offset += ref.tensor->numel();
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  const uint64_t len = to_little(static_cast<uint64_t>(text.size()));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& ref : tensors) {
    for (float f : ref.tensor->data) {
      const uint32_t bits = to_little(std::bit_cast<uint32_t>(f));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
  if (!out) throw DataError("write failure on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len))) throw DataError(path.string() + ": truncated header");
  len = to_little(len);
  if (len > (uint64_t{1} << 32)) throw DataError(path.string() + ": implausible header length");
  std::string text(static_cast<size_t>(len), '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw DataError(path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": bad header: " + e.what());
  }
  if (header.value("format", "") != kFormat || header.value("dtype", "") != "float32") {
    throw DataError(path.string() + ": not a float32 tabret checkpoint");
  }
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() % sizeof(uint32_t) != 0) throw DataError(path.string() + ": data block is not a whole number of floats");
  const size_t total = raw.size() / sizeof(uint32_t);

  Checkpoint ck;
  ck.metadata = header.value("metadata", nlohmann::json::object());
  size_t expected_offset = 0;
  for (const auto& entry : header.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    const size_t offset = entry.at("offset").get<size_t>();
    const size_t n = numel(shape);
    if (offset != expected_offset || offset + n > total) {
      throw DataError(path.string() + ": tensor '" + entry.at("name").get<std::string>() + "' has a bad offset");
    }
    std::vector<float> values(n);
    for (size_t i = 0; i < n; ++i) {
      uint32_t bits;
      std::memcpy(&bits, raw.data() + (offset + i) * sizeof(uint32_t), sizeof(bits));
      values[i] = std::bit_cast<float>(to_little(bits));
    }
    ck.tensors.emplace_back(entry.at("name").get<std::string>(), Tensor<float>(std::move(shape), std::move(values)));
    expected_offset = offset + n;
  }
  if (expected_offset != total) throw DataError(path.string() + ": trailing data after last tensor");
  return ck;
}

}  // namespace tabret
