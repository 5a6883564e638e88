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

#include "pmdn/io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace pmdn {

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void ByteWriter::PutMagic(std::string_view magic) { buf_.append(magic); }

void ByteWriter::PutU32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::PutU64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::PutF64(double v) { PutU64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::PutVector(const ConstVectorRef &v) {
  PutU64(static_cast<std::uint64_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) PutF64(v(i));
}

void ByteWriter::PutMatrix(const ConstMatrixRef &m) {
  PutU64(static_cast<std::uint64_t>(m.rows()));
  PutU64(static_cast<std::uint64_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) PutF64(m(r, c));
}

std::string ByteWriter::Finish() {
  const std::uint64_t sum = Fnv1a64(buf_);
  PutU64(sum);
  return std::move(buf_);
}

ByteReader::ByteReader(std::string bytes, std::string_view what)
    : buf_(std::move(bytes)), what_(what) {
  if (buf_.size() < 8) throw InvalidInput(what_ + ": truncated file");
  const std::size_t body = buf_.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[body + i])) << (8 * i);
  if (stored != Fnv1a64(std::string_view(buf_).substr(0, body)))
    throw InvalidInput(what_ + ": checksum mismatch");
  buf_.resize(body);
}

void ByteReader::Need(std::size_t n) const {
  if (buf_.size() - pos_ < n) throw InvalidInput(what_ + ": truncated file");
}

void ByteReader::ExpectMagic(std::string_view magic) {
  Need(magic.size());
  if (std::string_view(buf_).substr(pos_, magic.size()) != magic)
    throw InvalidInput(what_ + ": expected magic " + std::string(magic));
  pos_ += magic.size();
}

std::uint32_t ByteReader::GetU32() {
  Need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::GetU64() {
  Need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::GetF64() { return std::bit_cast<double>(GetU64()); }

Vector ByteReader::GetVector() {
  const std::uint64_t n = GetU64();
  if (n > remaining() / 8) throw InvalidInput(what_ + ": truncated file");
  Vector v(static_cast<Index>(n));
  for (Index i = 0; i < v.size(); ++i) v(i) = GetF64();
  return v;
}

Matrix ByteReader::GetMatrix() {
  const std::uint64_t rows = GetU64(), cols = GetU64();
  if (cols != 0 && rows > remaining() / 8 / cols) throw InvalidInput(what_ + ": truncated file");
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = GetF64();
  return m;
}

std::string ReadFileBytes(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void WriteFileBytes(const std::string &path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("write failed for " + path);
}

std::string EncodeCheckpoint(const Checkpoint &ckpt) {
  if (ckpt.magic.size() != 4) throw InvalidInput("checkpoint magic must be 4 bytes");
  ByteWriter w;
  w.PutMagic(ckpt.magic);
  w.PutU32(kCheckpointVersion);
  w.PutU32(static_cast<std::uint32_t>(ckpt.config.size()));
  for (std::uint32_t v : ckpt.config) w.PutU32(v);
  w.PutU64(static_cast<std::uint64_t>(ckpt.values.size()));
  for (Index i = 0; i < ckpt.values.size(); ++i) w.PutF64(ckpt.values(i));
  return w.Finish();
}

Checkpoint DecodeCheckpoint(std::string bytes, std::string_view magic) {
  ByteReader r(std::move(bytes), "checkpoint");
  r.ExpectMagic(magic);
  const std::uint32_t version = r.GetU32();
  if (version != kCheckpointVersion)
    throw InvalidInput("checkpoint: unsupported format version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.magic = std::string(magic);
  const std::uint32_t n = r.GetU32();
  if (n > 1024) throw InvalidInput("checkpoint: implausible config length");
  for (std::uint32_t i = 0; i < n; ++i) ckpt.config.push_back(r.GetU32());
  const std::uint64_t count = r.GetU64();
  if (count > r.remaining() / 8) throw InvalidInput("checkpoint: truncated file");
  ckpt.values.resize(static_cast<Index>(count));
  for (Index i = 0; i < ckpt.values.size(); ++i) ckpt.values(i) = r.GetF64();
  if (!r.AtEnd()) throw InvalidInput("checkpoint: trailing bytes");
  return ckpt;
}

}  // namespace pmdn
