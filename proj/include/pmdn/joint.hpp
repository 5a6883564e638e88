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

// Joint training of extractor, predictor and a toy reconstructor.
//
//   e      = Extract(segments)
//   L_PP   = mean over sequences of SequenceNll(predictor, context, sg(e))
//   L_REC  = mean squared error of  decoder(h_k + proj e_k)  against the target
//   total  = beta * L_PP + L_REC
//
// sg() is a stop gradient: the extractor is trained by L_REC alone and the
// predictor by beta * L_PP alone.

#ifndef PMDN_JOINT_HPP_
#define PMDN_JOINT_HPP_

#include <functional>
#include <span>
#include <vector>

#include "pmdn/extractor.hpp"
#include "pmdn/predictor.hpp"
#include "pmdn/synth.hpp"
#include "pmdn/training.hpp"

namespace pmdn {

struct ReconstructorConfig {
  int context_dim = 16;   // H
  int embedding_dim = 4;  // D
  int mel_channels = 8;   // F

  void Check() const;
  bool operator==(const ReconstructorConfig &) const = default;
};

// Affine decoder  target_k ~ W (h_k + P e_k) + b.
class Reconstructor {
 public:
  enum Tensor : std::size_t { kProjWeight, kDecoderWeight, kDecoderBias, kNumTensors };

  explicit Reconstructor(const ReconstructorConfig &config);
  static Reconstructor Initialized(const ReconstructorConfig &config, std::uint64_t seed);

  const ReconstructorConfig &config() const { return config_; }
  ParameterSet &params() { return params_; }
  const ParameterSet &params() const { return params_; }

 private:
  ReconstructorConfig config_;
  ParameterSet params_;
};

struct JointItem {
  ContextSequence context;  // K x H
  SegmentBatch segments;    // K segments, each T_k x F
  Matrix target;            // K x F
  Index length() const { return context.length(); }
};

std::vector<JointItem> JointItems(const SyntheticCorpus &corpus);

struct JointModels {
  ExtractorModel extractor;
  PredictorModel predictor;
  Reconstructor reconstructor;
};

// Consistent models for a corpus spec: H, D and F follow the generator.
JointModels MakeJointModels(const GeneratorSpec &spec, const PredictorConfig &predictor,
                            std::uint64_t seed);

struct JointOptions {
  double beta = 0.02;
  // Ablation: replace every extracted embedding with zeros.
  bool zero_embeddings = false;
  void Check() const;
};

struct JointLossReport {
  double total = 0.0;
  double l_pp = 0.0;
  double l_rec = 0.0;
  double beta = 0.0;
};

struct JointGradients {
  ParameterSet extractor;
  // Extractor gradient contributed by the beta * L_PP term. The stop gradient
  // makes it identically zero; kept so callers can assert that.
  ParameterSet extractor_from_pp;
  ParameterSet predictor;
  ParameterSet reconstructor;

  static JointGradients ZerosLike(const JointModels &models);
  void SetZero();
};

// Loss over a minibatch. Batch-norm statistics are pooled across every
// segment of every item. Gradients, if requested, are accumulated. Train mode
// needs rng for predictor dropout. Throws InvalidInput naming the component
// when a loss term is not finite.
JointLossReport JointLoss(const JointModels &models, std::span<const JointItem> batch,
                          const JointOptions &options, Mode mode, Rng *rng = nullptr,
                          JointGradients *grads = nullptr, ExtractorCache *cache = nullptr);

struct JointTrace {
  // Per-epoch means over minibatches.
  std::vector<double> total, l_pp, l_rec;
};

using JointEpochCallback = std::function<void(int epoch, const JointModels &)>;

// Adam on all three parameter sets every step; batch-norm running statistics
// follow each train-mode batch. Streams are derived from schedule.seed as in
// TrainPredictor. Throws TrainingDiverged on a non-finite loss.
JointTrace TrainJoint(JointModels &models, std::span<const JointItem> corpus,
                      const Schedule &schedule, const JointOptions &options,
                      const JointEpochCallback &on_epoch = {});

// Eval-mode loss over the whole data set (sequence-weighted L_PP, entry-weighted L_REC).
JointLossReport EvaluateJoint(const JointModels &models, std::span<const JointItem> data,
                              const JointOptions &options);

}  // namespace pmdn

#endif  // PMDN_JOINT_HPP_
