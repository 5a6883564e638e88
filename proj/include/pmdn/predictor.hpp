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

// Autoregressive prosody predictor: a GMM mixture density network over
// per-phoneme prosody embeddings.
//
//   context (K x H)
//     -> [conv1d -> ReLU -> layer norm -> dropout] x 2      (K x C)
//     -> step k: GRU([conv_k, e_{k-1}])                     (R)
//     -> affine projection to M * (1 + 2D) head values
//
// e_0 and the initial recurrent state are zero vectors.

#ifndef PMDN_PREDICTOR_HPP_
#define PMDN_PREDICTOR_HPP_

#include <optional>
#include <span>
#include <vector>

#include "pmdn/gmm.hpp"
#include "pmdn/parameters.hpp"

namespace pmdn {

// Hidden phoneme encodings h, one row per phoneme.
struct ContextSequence {
  Matrix states;  // K x H
  Index length() const { return states.rows(); }
};

// Prosody embeddings e_1..e_K, one row per phoneme.
struct ProsodySequence {
  Matrix embeddings;  // K x D
  Index length() const { return embeddings.rows(); }
};

struct PredictorConfig {
  int context_dim = 16;      // H
  int embedding_dim = 4;     // D
  int num_components = 20;   // M
  int conv_channels = 16;
  int conv_kernel = 3;       // odd
  int recurrent_width = 16;
  double dropout_rate = 0.1;

  int head_size() const { return num_components * (1 + 2 * embedding_dim); }
  void Check() const;
  bool operator==(const PredictorConfig &) const = default;
};

class PredictorModel {
 public:
  // Tensor indices into params(), in checkpoint order.
  enum Tensor : std::size_t {
    kConv1Weight,  // C x (kernel * H)
    kConv1Bias,    // C
    kNorm1Gain,    // C
    kNorm1Bias,    // C
    kConv2Weight,  // C x (kernel * C)
    kConv2Bias,
    kNorm2Gain,
    kNorm2Bias,
    kGruInput,      // 3R x (C + D)
    kGruRecurrent,  // 3R x R
    kGruBias,       // 3R
    kProjWeight,    // M(1+2D) x R
    kProjBias,      // M(1+2D)
    kNumTensors
  };

  // Zero-initialized model (layer-norm gains included).
  explicit PredictorModel(const PredictorConfig &config);
  // Uniform(+-1/sqrt(fan_in)) weights and biases, unit layer-norm gains.
  static PredictorModel Initialized(const PredictorConfig &config, std::uint64_t seed);

  const PredictorConfig &config() const { return config_; }
  ParameterSet &params() { return params_; }
  const ParameterSet &params() const { return params_; }

  // Splits one projection output row into a head.
  RawMdnHead HeadFromOutput(const ConstVectorRef &out) const;

 private:
  PredictorConfig config_;
  ParameterSet params_;
};

// Teacher-forced forward pass. When prev is given it must have length K; the
// step k input is prev[k-1] (zero for k = 0). Without prev every previous
// embedding is zero. Train mode applies dropout and requires rng.
std::vector<RawMdnHead> PredictorForward(const PredictorModel &model,
                                         const ContextSequence &ctx,
                                         const ProsodySequence *prev, Mode mode,
                                         Rng *rng = nullptr);

// sum_k Nll(Activate(head_k), e_k) under teacher forcing.
double SequenceNll(const PredictorModel &model, const ContextSequence &ctx,
                   const ProsodySequence &target, Mode mode = Mode::kEval,
                   Rng *rng = nullptr);

// Per-step NLL values of the same quantity.
Vector StepNll(const PredictorModel &model, const ContextSequence &ctx,
               const ProsodySequence &target);

struct SequenceLossGrad {
  double loss = 0.0;
  ParameterSet grad;
};

// Loss and its gradient w.r.t. every predictor parameter. The gradient is
// scaled by `scale` and accumulated into *grad (layout of model.params()).
double SequenceNllGrad(const PredictorModel &model, const ContextSequence &ctx,
                       const ProsodySequence &target, Mode mode, Rng *rng,
                       double scale, ParameterSet *grad);

SequenceLossGrad SequenceGrad(const PredictorModel &model, const ContextSequence &ctx,
                              const ProsodySequence &target);

struct SequencePair {
  ContextSequence context;
  ProsodySequence target;
};

double BatchNll(const PredictorModel &model, std::span<const SequencePair> batch);
SequenceLossGrad BatchGrad(const PredictorModel &model, std::span<const SequencePair> batch);

// Runs the predictor one phoneme at a time in eval mode; the convolution
// stack is evaluated once up front.
class PredictorStepper {
 public:
  PredictorStepper(const PredictorModel &model, const ContextSequence &ctx);

  // Head for the next phoneme given the previous embedding.
  RawMdnHead Step(const ConstVectorRef &prev_embedding);
  Index position() const { return position_; }
  Index length() const { return conv_out_.rows(); }

 private:
  const PredictorModel &model_;
  Matrix conv_out_;
  Vector state_;
  Index position_ = 0;
};

// Autoregressive ancestral sampling: e_hat_k ~ GMM(step k | e_hat_{k-1}).
ProsodySequence SampleSequence(const PredictorModel &model, const ContextSequence &ctx,
                               Rng &rng, double temperature = 1.0);

}  // namespace pmdn

#endif  // PMDN_PREDICTOR_HPP_
