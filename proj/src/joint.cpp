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

#include "pmdn/joint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pmdn {

void ReconstructorConfig::Check() const {
  if (context_dim < 1 || embedding_dim < 1 || mel_channels < 1)
    throw InvalidInput("reconstructor config: all sizes must be >= 1");
}

Reconstructor::Reconstructor(const ReconstructorConfig &config) : config_(config) {
  config_.Check();
  params_.Add("proj.weight", config.context_dim, config.embedding_dim);
  params_.Add("decoder.weight", config.mel_channels, config.context_dim);
  params_.Add("decoder.bias", config.mel_channels);
}

Reconstructor Reconstructor::Initialized(const ReconstructorConfig &config,
                                         std::uint64_t seed) {
  Reconstructor model(config);
  Rng rng(seed);
  model.params_.InitUniform(kProjWeight, config.embedding_dim, rng);
  model.params_.InitUniform(kDecoderWeight, config.context_dim, rng);
  model.params_.InitUniform(kDecoderBias, config.context_dim, rng);
  return model;
}

std::vector<JointItem> JointItems(const SyntheticCorpus &corpus) {
  std::vector<JointItem> items;
  items.reserve(corpus.items.size());
  for (const CorpusItem &item : corpus.items)
    items.push_back({item.context, item.segments, item.recon_target});
  return items;
}

JointModels MakeJointModels(const GeneratorSpec &spec, const PredictorConfig &predictor,
                            std::uint64_t seed) {
  ExtractorConfig ecfg;
  ecfg.mel_channels = spec.mel_channels;
  ecfg.embedding_dim = spec.embedding_dim;
  PredictorConfig pcfg = predictor;
  pcfg.context_dim = spec.context_dim;
  pcfg.embedding_dim = spec.embedding_dim;
  const ReconstructorConfig rcfg{spec.context_dim, spec.embedding_dim, spec.mel_channels};
  return {ExtractorModel::Initialized(ecfg, MixSeed(seed, 1)),
          PredictorModel::Initialized(pcfg, MixSeed(seed, 2)),
          Reconstructor::Initialized(rcfg, MixSeed(seed, 3))};
}

void JointOptions::Check() const {
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw InvalidInput("joint loss: beta must be finite and >= 0");
}

JointGradients JointGradients::ZerosLike(const JointModels &models) {
  return {models.extractor.params().ZerosLike(), models.extractor.params().ZerosLike(),
          models.predictor.params().ZerosLike(), models.reconstructor.params().ZerosLike()};
}

void JointGradients::SetZero() {
  extractor.values().setZero();
  extractor_from_pp.values().setZero();
  predictor.values().setZero();
  reconstructor.values().setZero();
}

namespace {

void CheckModels(const JointModels &m) {
  const Index D = m.extractor.config().embedding_dim;
  if (m.predictor.config().embedding_dim != D || m.reconstructor.config().embedding_dim != D)
    throw InvalidInput("joint models disagree on the embedding dimension");
  if (m.predictor.config().context_dim != m.reconstructor.config().context_dim)
    throw InvalidInput("joint models disagree on the context dimension");
  if (m.extractor.config().mel_channels != m.reconstructor.config().mel_channels)
    throw InvalidInput("joint models disagree on the channel count");
}

void CheckItem(const JointModels &m, const JointItem &item) {
  const Index K = item.length();
  if (K < 1) throw InvalidInput("joint item: empty sequence");
  if (item.context.states.cols() != m.reconstructor.config().context_dim)
    throw InvalidInput("joint item: context width does not match the models");
  if (static_cast<Index>(item.segments.size()) != K || item.target.rows() != K ||
      item.target.cols() != m.reconstructor.config().mel_channels)
    throw InvalidInput("joint item: segment or target count does not match the context");
  if (!item.context.states.allFinite() || !item.target.allFinite())
    throw InvalidInput("joint item: non-finite entry");
}

}  // namespace

JointLossReport JointLoss(const JointModels &models, std::span<const JointItem> batch,
                          const JointOptions &options, Mode mode, Rng *rng,
                          JointGradients *grads, ExtractorCache *cache) {
  options.Check();
  CheckModels(models);
  if (batch.empty()) throw InvalidInput("joint loss: empty batch");
  for (const JointItem &item : batch) CheckItem(models, item);

  const Index D = models.extractor.config().embedding_dim;
  Index phonemes = 0;
  for (const JointItem &item : batch) phonemes += item.length();

  ExtractorCache local;
  ExtractorCache &ec = cache ? *cache : local;
  Matrix E;
  if (options.zero_embeddings) {
    E = Matrix::Zero(phonemes, D);
  } else {
    SegmentBatch all;
    all.reserve(phonemes);
    for (const JointItem &item : batch)
      all.insert(all.end(), item.segments.begin(), item.segments.end());
    E = Extract(models.extractor, all, mode, &ec).embeddings;
    if (!E.allFinite()) throw InvalidInput("joint loss: extractor produced non-finite embeddings");
  }

  JointLossReport report;
  report.beta = options.beta;
  const double n = static_cast<double>(batch.size());

  // Prosody prediction term; the embeddings enter as constants.
  Index row = 0;
  for (const JointItem &item : batch) {
    const ProsodySequence target{E.middleRows(row, item.length())};
    double nll;
    if (grads && options.beta > 0.0)
      nll = SequenceNllGrad(models.predictor, item.context, target, mode, rng,
                            options.beta / n, &grads->predictor);
    else
      nll = SequenceNll(models.predictor, item.context, target, mode, rng);
    report.l_pp += nll;
    row += item.length();
  }
  report.l_pp /= n;
  if (!std::isfinite(report.l_pp))
    throw InvalidInput("joint loss: predictor term L_PP is not finite");

  // Reconstruction term.
  const ParameterSet &rp = models.reconstructor.params();
  const auto P = rp[Reconstructor::kProjWeight];
  const auto W = rp[Reconstructor::kDecoderWeight];
  const auto b = rp.Col(Reconstructor::kDecoderBias);
  const Index F = W.rows();
  const double entries = static_cast<double>(phonemes * F);
  Matrix dE = Matrix::Zero(phonemes, D);
  row = 0;
  for (const JointItem &item : batch) {
    const Index K = item.length();
    const Matrix e = E.middleRows(row, K);
    const Matrix z = item.context.states + e * P.transpose();
    Matrix resid = z * W.transpose();
    resid.rowwise() += b.transpose();
    resid -= item.target;
    report.l_rec += resid.squaredNorm();
    if (grads) {
      const Matrix du = (2.0 / entries) * resid;
      ParameterSet &g = grads->reconstructor;
      g[Reconstructor::kDecoderWeight] += du.transpose() * z;
      g.Col(Reconstructor::kDecoderBias) += du.colwise().sum().transpose();
      const Matrix dz = du * W;
      g[Reconstructor::kProjWeight] += dz.transpose() * e;
      dE.middleRows(row, K) = dz * P;
    }
    row += K;
  }
  report.l_rec /= entries;
  if (!std::isfinite(report.l_rec))
    throw InvalidInput("joint loss: reconstruction term L_REC is not finite");

  if (grads && !options.zero_embeddings)
    ExtractorBackward(models.extractor, ec, dE, &grads->extractor);

  report.total = options.beta * report.l_pp + report.l_rec;
  return report;
}

JointTrace TrainJoint(JointModels &models, std::span<const JointItem> corpus,
                      const Schedule &schedule, const JointOptions &options,
                      const JointEpochCallback &on_epoch) {
  schedule.Check();
  options.Check();
  CheckModels(models);
  if (corpus.empty()) throw InvalidInput("training corpus is empty");
  for (const JointItem &item : corpus) {
    CheckItem(models, item);
    for (const Matrix &s : item.segments)
      if (s.rows() < 1 || s.cols() != models.extractor.config().mel_channels || !s.allFinite())
        throw InvalidInput("training corpus: malformed segment");
  }

  Rng shuffle_rng(MixSeed(schedule.seed, 0));
  Rng dropout_rng(MixSeed(schedule.seed, 1));
  Adam adam_e(models.extractor.params().size(), schedule.learning_rate);
  Adam adam_p(models.predictor.params().size(), schedule.learning_rate);
  Adam adam_r(models.reconstructor.params().size(), schedule.learning_rate);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  JointTrace trace;
  JointGradients grads = JointGradients::ZerosLike(models);
  ExtractorCache cache;
  std::vector<JointItem> batch;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0, l_pp = 0.0, l_rec = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(corpus[order[i]]);
      grads.SetZero();
      ++step;
      JointLossReport r;
      try {
        r = JointLoss(models, batch, options, Mode::kTrain, &dropout_rng, &grads, &cache);
      } catch (const InvalidInput &e) {
        throw TrainingDiverged(
            "joint training diverged at step " + std::to_string(step) + ": " + e.what(), step);
      }
      if (!grads.extractor.values().allFinite() || !grads.predictor.values().allFinite() ||
          !grads.reconstructor.values().allFinite())
        throw TrainingDiverged("joint training diverged at step " + std::to_string(step) +
                                   ": non-finite gradient",
                               step);
      adam_e.Step(models.extractor.params().values(), grads.extractor.values());
      adam_p.Step(models.predictor.params().values(), grads.predictor.values());
      adam_r.Step(models.reconstructor.params().values(), grads.reconstructor.values());
      if (!options.zero_embeddings) UpdateRunningStats(models.extractor, cache);
      total += r.total;
      l_pp += r.l_pp;
      l_rec += r.l_rec;
      ++batches;
    }
    trace.total.push_back(total / batches);
    trace.l_pp.push_back(l_pp / batches);
    trace.l_rec.push_back(l_rec / batches);
    if (on_epoch) on_epoch(epoch, models);
  }
  return trace;
}

JointLossReport EvaluateJoint(const JointModels &models, std::span<const JointItem> data,
                              const JointOptions &options) {
  return JointLoss(models, data, options, Mode::kEval);
}

}  // namespace pmdn
