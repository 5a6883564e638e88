// Copyright 2026 The prosody-mdn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Little-endian binary containers.
//
// Checkpoint layout (all integers little-endian):
//   char[4]   magic            "MDNP" predictor, "MDNE" extractor, "MDNR" reconstructor
//   u32       format version   (kCheckpointVersion)
//   u32       n                number of config integers
//   u32[n]    config integers  (model specific, see Save* functions)
//   u64       p                number of parameter values
//   f64[p]    parameters       tensors in ParameterSet order, each row-major
//   u64       checksum         FNV-1a 64 over every preceding byte

#ifndef PMDN_IO_HPP_
#define PMDN_IO_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pmdn/common.hpp"

namespace pmdn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t Fnv1a64(std::string_view bytes);

class ByteWriter {
 public:
  void PutMagic(std::string_view magic);
  void PutU32(std::uint32_t v);
  void PutU64(std::uint64_t v);
  void PutF64(double v);
  void PutVector(const ConstVectorRef &v);   // u64 length + values
  void PutMatrix(const ConstMatrixRef &m);   // u64 rows, u64 cols + row-major values
  // Appends the checksum and returns the finished buffer.
  std::string Finish();

 private:
  std::string buf_;
};

class ByteReader {
 public:
  // Verifies and strips the checksum trailer.
  explicit ByteReader(std::string bytes, std::string_view what);
  void ExpectMagic(std::string_view magic);
  std::uint32_t GetU32();
  std::uint64_t GetU64();
  double GetF64();
  Vector GetVector();
  Matrix GetMatrix();
  bool AtEnd() const { return pos_ == buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void Need(std::size_t n) const;
  std::string buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string ReadFileBytes(const std::string &path);
void WriteFileBytes(const std::string &path, std::string_view bytes);

struct Checkpoint {
  std::string magic;
  std::vector<std::uint32_t> config;
  Vector values;
};

std::string EncodeCheckpoint(const Checkpoint &ckpt);
Checkpoint DecodeCheckpoint(std::string bytes, std::string_view magic);

}  // namespace pmdn

#endif  // PMDN_IO_HPP_
