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

#include "pmdn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pmdn {

void Schedule::Check() const {
  if (epochs < 0) throw InvalidInput("schedule: epochs must be >= 0");
  if (batch_size < 1) throw InvalidInput("schedule: batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw InvalidInput("schedule: learning_rate must be finite and >= 0");
}

Adam::Adam(Index size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(Vector::Zero(size)),
      v_(Vector::Zero(size)) {}

void Adam::Step(Vector &params, const Vector &grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  if (lr_ == 0.0) return;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

TrainTrace TrainPredictor(PredictorModel &model, std::span<const SequencePair> corpus,
                          const Schedule &schedule, const EpochCallback &on_epoch) {
  schedule.Check();
  if (corpus.empty()) throw InvalidInput("training corpus is empty");
  // Shape problems surface here; anything thrown inside the loop afterwards
  // comes from non-finite intermediate values.
  const PredictorConfig &cfg = model.config();
  for (const SequencePair &pair : corpus) {
    if (pair.context.length() < 1 || pair.target.length() != pair.context.length() ||
        pair.context.states.cols() != cfg.context_dim ||
        pair.target.embeddings.cols() != cfg.embedding_dim)
      throw InvalidInput("training corpus: sequence shapes do not match the model");
    if (!pair.context.states.allFinite() || !pair.target.embeddings.allFinite())
      throw InvalidInput("training corpus: non-finite entry");
  }

  Rng shuffle_rng(MixSeed(schedule.seed, 0));
  Rng dropout_rng(MixSeed(schedule.seed, 1));
  Adam adam(model.params().size(), schedule.learning_rate);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainTrace trace;
  std::int64_t step = 0;
  ParameterSet grad = model.params().ZerosLike();
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      grad.values().setZero();
      double loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const SequencePair &pair = corpus[order[i]];
        try {
          loss += SequenceNllGrad(model, pair.context, pair.target, Mode::kTrain,
                                  &dropout_rng, scale, &grad);
        } catch (const InvalidInput &e) {
          throw TrainingDiverged("predictor training diverged at step " +
                                     std::to_string(step + 1) + ": " + e.what(),
                                 step + 1);
        }
      }
      loss *= scale;
      ++step;
      if (!std::isfinite(loss) || !grad.values().allFinite())
        throw TrainingDiverged("predictor training diverged at step " + std::to_string(step),
                               step);
      adam.Step(model.params().values(), grad.values());
      epoch_loss += loss;
      ++batches;
    }
    trace.epoch_loss.push_back(epoch_loss / batches);
    if (on_epoch) on_epoch(epoch, model);
  }
  return trace;
}

double MeanLogLikPerPhoneme(const PredictorModel &model, std::span<const SequencePair> data) {
  double total = 0.0;
  Index phonemes = 0;
  for (const SequencePair &pair : data) {
    total -= SequenceNll(model, pair.context, pair.target);
    phonemes += pair.target.length();
  }
  return phonemes > 0 ? total / static_cast<double>(phonemes) : 0.0;
}

}  // namespace pmdn
