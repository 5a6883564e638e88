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

// Prosody extractor: maps each phoneme's spectrogram segment (T x F) to a
// D-dimensional embedding.
//
//   segment as a one-channel T x F map
//     -> [conv 3x3 -> batch norm -> ReLU] x 2          (T x F x C2)
//     -> frame t becomes a vector of F * C2 values
//     -> forward GRU and backward GRU over frames, D/2 units each
//     -> [final forward state, final backward state]
//
// The convolutions carry no bias since batch norm would cancel it. Batch
// statistics are pooled over every position of every segment in the batch.

#ifndef PMDN_EXTRACTOR_HPP_
#define PMDN_EXTRACTOR_HPP_

#include <vector>

#include "pmdn/layers.hpp"
#include "pmdn/parameters.hpp"
#include "pmdn/predictor.hpp"

namespace pmdn {

// One segment per phoneme, frames x channels. Frame counts may differ.
using SegmentBatch = std::vector<Matrix>;

struct ExtractorConfig {
  int mel_channels = 8;   // F
  int channels1 = 8;
  int channels2 = 8;
  int kernel = 3;         // odd
  int embedding_dim = 4;  // D, even
  double bn_momentum = 0.9;

  int state_width() const { return embedding_dim / 2; }
  void Check() const;
  bool operator==(const ExtractorConfig &) const = default;
};

class ExtractorModel {
 public:
  enum Tensor : std::size_t {
    kConv1Weight,  // C1 x (k*k)
    kBn1Gain,
    kBn1Bias,
    kConv2Weight,  // C2 x (k*k*C1)
    kBn2Gain,
    kBn2Bias,
    kFwdInput,      // 3R x (F*C2)
    kFwdRecurrent,  // 3R x R
    kFwdBias,
    kBwdInput,
    kBwdRecurrent,
    kBwdBias,
    kNumTensors
  };
  enum Buffer : std::size_t { kBn1Mean, kBn1Var, kBn2Mean, kBn2Var, kNumBuffers };

  // Zero weights, unit batch-norm gains, running mean 0 and variance 1.
  explicit ExtractorModel(const ExtractorConfig &config);
  static ExtractorModel Initialized(const ExtractorConfig &config, std::uint64_t seed);

  const ExtractorConfig &config() const { return config_; }
  ParameterSet &params() { return params_; }
  const ParameterSet &params() const { return params_; }
  // Running batch-norm statistics; not trained by gradient.
  ParameterSet &buffers() { return buffers_; }
  const ParameterSet &buffers() const { return buffers_; }

 private:
  ExtractorConfig config_;
  ParameterSet params_;
  ParameterSet buffers_;
};

struct ExtractorCache {
  std::vector<Index> frames;
  Matrix col1, pre1, act1;
  BatchNormCache bn1;
  Matrix col2, pre2, act2;
  BatchNormCache bn2;
  std::vector<std::vector<GruStep>> fwd, bwd;
};

// One embedding row per segment. Train mode normalizes with batch statistics,
// eval mode with the running ones. Throws InvalidInput on an empty batch, an
// empty segment, a channel mismatch or non-finite entries.
ProsodySequence Extract(const ExtractorModel &model, const SegmentBatch &segments, Mode mode,
                        ExtractorCache *cache = nullptr);

// Back-propagates dE (one row per segment) through the cached forward pass and
// accumulates parameter gradients into *grad.
void ExtractorBackward(const ExtractorModel &model, const ExtractorCache &cache,
                       const ConstMatrixRef &dE, ParameterSet *grad);

// running <- momentum * running + (1 - momentum) * batch, from a train-mode cache.
void UpdateRunningStats(ExtractorModel &model, const ExtractorCache &cache);

}  // namespace pmdn

#endif  // PMDN_EXTRACTOR_HPP_
