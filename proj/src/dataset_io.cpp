/**
 * Copyright 2026 The comix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <comix/video.hpp>

#include "binary_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace comix {

using detail::get;
using detail::put;

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'V', 'D', '1'};
constexpr std::uint32_t kVersion = 1;
// 2^31 elements per video is far beyond any desk-scale clip stack.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.videos.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.num_classes));
  for (const Video& v : ds.videos) {
    put<std::uint32_t>(os, v.video_id);
    put<std::uint8_t>(os, static_cast<std::uint8_t>(v.domain));
    put<std::int32_t>(os, v.label);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(v.num_frames()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(v.height));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(v.width));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(v.channels));
    for (Eigen::Index i = 0; i < v.frames.size(); ++i) {
      put<float>(os, static_cast<float>(v.frames.data()[i]));
    }
  }
  if (!os) throw FormatError(FormatErrc::io_failure, "write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path, Split split) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string());
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (is.gcount() != 4) throw FormatError(FormatErrc::unexpected_eof, "unexpected EOF");
  if (magic != kMagic) throw FormatError(FormatErrc::bad_magic, "bad magic");
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) {
    throw FormatError(FormatErrc::bad_version, "unsupported CVD version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(is);
  Dataset ds;
  ds.split = split;
  ds.num_classes = static_cast<int>(get<std::uint32_t>(is));
  for (std::uint32_t n = 0; n < count; ++n) {
    Video v;
    v.video_id = get<std::uint32_t>(is);
    const auto domain = get<std::uint8_t>(is);
    if (domain > 1) throw FormatError(FormatErrc::shape_overflow, "invalid domain tag");
    v.domain = static_cast<Domain>(domain);
    v.label = get<std::int32_t>(is);
    const std::uint64_t t = get<std::uint32_t>(is);
    const std::uint64_t h = get<std::uint32_t>(is);
    const std::uint64_t w = get<std::uint32_t>(is);
    const std::uint64_t c = get<std::uint32_t>(is);
    if (t == 0 || h == 0 || w == 0 || c == 0) {
      throw FormatError(FormatErrc::shape_overflow, "zero extent in video header");
    }
    // Each factor is < 2^32; check progressively so the product cannot wrap.
    std::uint64_t elems = t;
    for (std::uint64_t f : {h, w, c}) {
      if (elems > kMaxElements / f) {
        throw FormatError(FormatErrc::shape_overflow, "shape overflow in video header");
      }
      elems *= f;
    }
    v.height = static_cast<int>(h);
    v.width = static_cast<int>(w);
    v.channels = static_cast<int>(c);
    v.frames.resize(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(h * w * c));
    for (std::uint64_t i = 0; i < elems; ++i) {
      v.frames.data()[i] = static_cast<double>(get<float>(is));
    }
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

}  // namespace comix
