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

#include <comix/encoder.hpp>

#include "binary_io.hpp"

#include <fstream>
#include <map>

namespace comix {

using detail::get;
using detail::put;

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'M', 'X', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxNameLength = 256;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 28;

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  params.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kVersion);
  std::uint32_t count = 0;
  params.for_each([&count](const char*, const Matrix&, ParamGroup) { ++count; });
  put<std::uint32_t>(os, count);
  params.for_each([&os](const char* name, const Matrix& m, ParamGroup) {
    const std::string n(name);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(n.size()));
    os.write(n.data(), static_cast<std::streamsize>(n.size()));
    put<std::uint32_t>(os, 2);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(os, m.data()[i]);
  });
  if (!os) throw FormatError(FormatErrc::io_failure, "write failed for " + path.string());
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string());
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (is.gcount() != 4) throw FormatError(FormatErrc::unexpected_eof, "unexpected EOF");
  if (magic != kMagic) throw FormatError(FormatErrc::bad_magic, "bad magic");
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) {
    throw FormatError(FormatErrc::bad_version, "unsupported CMX version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(is);
  std::map<std::string, Matrix> table;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get<std::uint32_t>(is);
    if (len == 0 || len > kMaxNameLength) {
      throw FormatError(FormatErrc::shape_overflow, "tensor name length out of range");
    }
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (is.gcount() != static_cast<std::streamsize>(len)) {
      throw FormatError(FormatErrc::unexpected_eof, "unexpected EOF");
    }
    const auto rank = get<std::uint32_t>(is);
    if (rank < 1 || rank > 2) throw FormatError(FormatErrc::shape_overflow, "unsupported tensor rank");
    std::uint64_t extents[2] = {1, 1};
    for (std::uint32_t r = 0; r < rank; ++r) extents[rank == 1 ? 1 : r] = get<std::uint32_t>(is);
    if (extents[0] == 0 || extents[1] == 0 || extents[0] > kMaxElements / extents[1]) {
      throw FormatError(FormatErrc::shape_overflow, "shape overflow for tensor " + name);
    }
    Matrix m(static_cast<Eigen::Index>(extents[0]), static_cast<Eigen::Index>(extents[1]));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>(is);
    table[name] = std::move(m);
  }
  EncoderParams params;
  params.for_each([&table](const char* name, Matrix& m, ParamGroup) {
    auto it = table.find(name);
    if (it == table.end()) {
      throw FormatError(FormatErrc::shape_overflow, std::string("checkpoint lacks tensor ") + name);
    }
    m = std::move(it->second);
  });
  params.validate();
  return params;
}

}  // namespace comix
