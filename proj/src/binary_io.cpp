// Copyright 2026 The shapemem Authors
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

#include "shapemem/binary_io.hpp"

#include <fstream>
#include <iterator>

#include "shapemem/error.hpp"

namespace shapemem {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kBudgetExceeds: return "BudgetExceeds";
    case ErrorCode::kEmptyTarget: return "EmptyTarget";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kBadLabel: return "BadLabel";
    case ErrorCode::kShrinkNotAllowed: return "ShrinkNotAllowed";
    case ErrorCode::kEmptyClasses: return "EmptyClasses";
    case ErrorCode::kDisjointnessViolated: return "DisjointnessViolated";
    case ErrorCode::kUnseenLabel: return "UnseenLabel";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kBadSpec: return "BadSpec";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kTooManyClasses: return "TooManyClasses";
    case ErrorCode::kConfig: return "ConfigError";
  }
  return "Unknown";
}

namespace binio {

void Writer::write_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

Reader Reader::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Reader(std::move(bytes));
}

void Reader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kBadMagic, "truncated payload");
}

bool Reader::expect_magic(std::string_view tag) {
  if (bytes_.size() - pos_ < tag.size()) return false;
  const bool ok = std::string_view(bytes_.data() + pos_, tag.size()) == tag;
  pos_ += tag.size();
  return ok;
}

std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  pos_ += 4;
  return v;
}

double Reader::f64() {
  need(8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return std::bit_cast<double>(bits);
}

void Reader::f64s(std::span<double> out) {
  need(out.size() * 8);
  for (double& v : out) v = f64();
}

std::string Reader::str() {
  const std::uint32_t len = u32();
  need(len);
  std::string s(bytes_.data() + pos_, len);
  pos_ += len;
  return s;
}

}  // namespace binio
}  // namespace shapemem
