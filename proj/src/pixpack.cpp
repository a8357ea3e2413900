/* Copyright 2026 The Cadet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "cadet/pixpack.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "cadet/coco_json.hpp"
#include "cadet/error.hpp"

namespace cadet {
namespace {

constexpr char kMagic[8] = {'C', 'A', 'D', 'E', 'T', 'P', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), "truncated pixel pack ", path);
  return v;
}

}  // namespace

void write_pixpack(const DatasetSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  std::uint64_t count = 0;
  for (const auto& im : split.images)
    if (im.has_pixels()) ++count;
  write_pod(out, count);
  for (const auto& im : split.images) {
    if (!im.has_pixels()) continue;
    write_pod(out, static_cast<std::uint32_t>(im.id.size()));
    out.write(im.id.data(), static_cast<std::streamsize>(im.id.size()));
    write_pod(out, static_cast<std::uint32_t>(im.pixels.height()));
    write_pod(out, static_cast<std::uint32_t>(im.pixels.width()));
    write_pod(out, static_cast<std::uint32_t>(im.pixels.channels()));
    for (const auto& plane : im.pixels.planes)
      out.write(reinterpret_cast<const char*>(plane.data()),
                static_cast<std::streamsize>(sizeof(float) * plane.size()));
  }
  require(out.good(), "write failed for ", path);
}

void read_pixpack(DatasetSplit& split, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open ", path);
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::equal(magic, magic + 8, kMagic), path,
          ": not a pixel pack");
  const auto version = read_pod<std::uint32_t>(in, path);
  require(version == kVersion, path, ": unsupported pixel pack version ", version);
  std::unordered_map<std::string, AnnotatedImage*> by_id;
  for (auto& im : split.images) by_id[im.id] = &im;
  const auto count = read_pod<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id_len = read_pod<std::uint32_t>(in, path);
    std::string id(id_len, '\0');
    in.read(id.data(), id_len);
    const auto h = read_pod<std::uint32_t>(in, path);
    const auto w = read_pod<std::uint32_t>(in, path);
    const auto c = read_pod<std::uint32_t>(in, path);
    Image pixels(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
    for (auto& plane : pixels.planes) {
      in.read(reinterpret_cast<char*>(plane.data()),
              static_cast<std::streamsize>(sizeof(float) * plane.size()));
      require(in.good(), "truncated pixel pack ", path);
    }
    const auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    require(it->second->height == static_cast<int>(h) &&
                it->second->width == static_cast<int>(w),
            "image ", id, ": pixel pack extent mismatch");
    it->second->pixels = std::move(pixels);
  }
}

void save_split(const DatasetSplit& split, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_coco_json(split, dir + "/annotations.json");
  write_pixpack(split, dir + "/images.pix");
}

DatasetSplit load_split(const std::string& dir, std::optional<Role> expected_role) {
  DatasetSplit split = read_coco_json(dir + "/annotations.json", expected_role);
  const std::string pack = dir + "/images.pix";
  if (std::filesystem::exists(pack)) read_pixpack(split, pack);
  return split;
}

}  // namespace cadet
