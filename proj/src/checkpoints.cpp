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

#include "pmdn/checkpoints.hpp"

#include <cmath>

#include "pmdn/io.hpp"

namespace pmdn {

namespace {

constexpr double kPpm = 1e6;

std::uint32_t ToPpm(double x) { return static_cast<std::uint32_t>(std::llround(x * kPpm)); }

void ExpectConfigSize(const Checkpoint &c, std::size_t n) {
  if (c.config.size() != n)
    throw InvalidInput(c.magic + " checkpoint: expected " + std::to_string(n) +
                       " config values, found " + std::to_string(c.config.size()));
}

void LoadValues(const Checkpoint &c, Vector &dst) {
  if (c.values.size() != dst.size())
    throw InvalidInput(c.magic + " checkpoint: parameter count " +
                       std::to_string(c.values.size()) + " does not match the config (" +
                       std::to_string(dst.size()) + ")");
  if (!c.values.allFinite()) throw InvalidInput(c.magic + " checkpoint: non-finite parameter");
  dst = c.values;
}

// Guards allocation against corrupted but checksum-consistent files.
constexpr std::uint32_t kMaxConfigValue = 1u << 16;

int Int(std::uint32_t v) {
  if (v > kMaxConfigValue) throw InvalidInput("checkpoint: implausible config value");
  return static_cast<int>(v);
}

}  // namespace

std::string EncodePredictor(const PredictorModel &model) {
  const PredictorConfig &c = model.config();
  return EncodeCheckpoint(
      {"MDNP",
       {std::uint32_t(c.context_dim), std::uint32_t(c.embedding_dim),
        std::uint32_t(c.num_components), std::uint32_t(c.conv_channels),
        std::uint32_t(c.conv_kernel), std::uint32_t(c.recurrent_width), ToPpm(c.dropout_rate)},
       model.params().values()});
}

PredictorModel DecodePredictor(std::string bytes) {
  const Checkpoint c = DecodeCheckpoint(std::move(bytes), "MDNP");
  ExpectConfigSize(c, 7);
  PredictorConfig cfg;
  cfg.context_dim = Int(c.config[0]);
  cfg.embedding_dim = Int(c.config[1]);
  cfg.num_components = Int(c.config[2]);
  cfg.conv_channels = Int(c.config[3]);
  cfg.conv_kernel = Int(c.config[4]);
  cfg.recurrent_width = Int(c.config[5]);
  cfg.dropout_rate = c.config[6] / kPpm;
  PredictorModel model(cfg);
  LoadValues(c, model.params().values());
  return model;
}

std::string EncodeExtractor(const ExtractorModel &model) {
  const ExtractorConfig &c = model.config();
  const Vector &p = model.params().values(), &b = model.buffers().values();
  Vector values(p.size() + b.size());
  values << p, b;
  return EncodeCheckpoint({"MDNE",
                           {std::uint32_t(c.mel_channels), std::uint32_t(c.channels1),
                            std::uint32_t(c.channels2), std::uint32_t(c.kernel),
                            std::uint32_t(c.embedding_dim), ToPpm(c.bn_momentum)},
                           values});
}

ExtractorModel DecodeExtractor(std::string bytes) {
  const Checkpoint c = DecodeCheckpoint(std::move(bytes), "MDNE");
  ExpectConfigSize(c, 6);
  ExtractorConfig cfg;
  cfg.mel_channels = Int(c.config[0]);
  cfg.channels1 = Int(c.config[1]);
  cfg.channels2 = Int(c.config[2]);
  cfg.kernel = Int(c.config[3]);
  cfg.embedding_dim = Int(c.config[4]);
  cfg.bn_momentum = c.config[5] / kPpm;
  ExtractorModel model(cfg);
  Vector all(model.params().size() + model.buffers().size());
  LoadValues(c, all);
  model.params().values() = all.head(model.params().size());
  model.buffers().values() = all.tail(model.buffers().size());
  return model;
}

std::string EncodeReconstructor(const Reconstructor &model) {
  const ReconstructorConfig &c = model.config();
  return EncodeCheckpoint({"MDNR",
                           {std::uint32_t(c.context_dim), std::uint32_t(c.embedding_dim),
                            std::uint32_t(c.mel_channels)},
                           model.params().values()});
}

Reconstructor DecodeReconstructor(std::string bytes) {
  const Checkpoint c = DecodeCheckpoint(std::move(bytes), "MDNR");
  ExpectConfigSize(c, 3);
  Reconstructor model({Int(c.config[0]), Int(c.config[1]), Int(c.config[2])});
  LoadValues(c, model.params().values());
  return model;
}

void SavePredictor(const std::string &path, const PredictorModel &model) {
  WriteFileBytes(path, EncodePredictor(model));
}
PredictorModel LoadPredictor(const std::string &path) {
  return DecodePredictor(ReadFileBytes(path));
}
void SaveExtractor(const std::string &path, const ExtractorModel &model) {
  WriteFileBytes(path, EncodeExtractor(model));
}
ExtractorModel LoadExtractor(const std::string &path) {
  return DecodeExtractor(ReadFileBytes(path));
}
void SaveReconstructor(const std::string &path, const Reconstructor &model) {
  WriteFileBytes(path, EncodeReconstructor(model));
}
Reconstructor LoadReconstructor(const std::string &path) {
  return DecodeReconstructor(ReadFileBytes(path));
}

}  // namespace pmdn
