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

#ifndef PMDN_TRAINING_HPP_
#define PMDN_TRAINING_HPP_

#include <functional>
#include <span>
#include <vector>

#include "pmdn/predictor.hpp"

namespace pmdn {

struct Schedule {
  int epochs = 20;
  double learning_rate = 1e-3;
  int batch_size = 16;
  std::uint64_t seed = 1;

  void Check() const;
};

// Adam with bias correction. A zero learning rate leaves parameters
// bit-identical.
class Adam {
 public:
  explicit Adam(Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void Step(Vector &params, const Vector &grad);
  std::int64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  Vector m_, v_;
  std::int64_t t_ = 0;
};

struct TrainTrace {
  // Mean per-sequence NLL over the minibatches of each epoch.
  std::vector<double> epoch_loss;
};

// Called after every epoch with the zero-based epoch index.
using EpochCallback = std::function<void(int epoch, const PredictorModel &)>;

// Minimizes the mean sequence NLL over minibatches with Adam. Shuffling and
// dropout draw from streams derived from schedule.seed. Throws
// TrainingDiverged on a non-finite minibatch loss.
TrainTrace TrainPredictor(PredictorModel &model, std::span<const SequencePair> corpus,
                          const Schedule &schedule, const EpochCallback &on_epoch = {});

// Mean log-likelihood per phoneme (eval mode).
double MeanLogLikPerPhoneme(const PredictorModel &model, std::span<const SequencePair> data);

}  // namespace pmdn

#endif  // PMDN_TRAINING_HPP_
