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

#include "pmdn/predictor.hpp"

#include <cmath>

#include "pmdn/layers.hpp"

namespace pmdn {

void PredictorConfig::Check() const {
  if (context_dim < 1 || embedding_dim < 1 || num_components < 1 || conv_channels < 1 ||
      recurrent_width < 1)
    throw InvalidInput("predictor config: all sizes must be >= 1");
  if (conv_kernel < 1 || conv_kernel % 2 == 0)
    throw InvalidInput("predictor config: conv_kernel must be odd");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw InvalidInput("predictor config: dropout_rate must lie in [0, 1)");
}

PredictorModel::PredictorModel(const PredictorConfig &config) : config_(config) {
  config_.Check();
  const Index H = config.context_dim, D = config.embedding_dim, C = config.conv_channels,
              R = config.recurrent_width, k = config.conv_kernel, P = config.head_size();
  params_.Add("conv1.weight", C, k * H);
  params_.Add("conv1.bias", C);
  params_.Add("norm1.gain", C);
  params_.Add("norm1.bias", C);
  params_.Add("conv2.weight", C, k * C);
  params_.Add("conv2.bias", C);
  params_.Add("norm2.gain", C);
  params_.Add("norm2.bias", C);
  params_.Add("gru.input", 3 * R, C + D);
  params_.Add("gru.recurrent", 3 * R, R);
  params_.Add("gru.bias", 3 * R);
  params_.Add("proj.weight", P, R);
  params_.Add("proj.bias", P);
}

PredictorModel PredictorModel::Initialized(const PredictorConfig &config,
                                           std::uint64_t seed) {
  PredictorModel model(config);
  Rng rng(seed);
  ParameterSet &p = model.params_;
  const Index H = config.context_dim, D = config.embedding_dim, C = config.conv_channels,
              R = config.recurrent_width, k = config.conv_kernel;
  p.InitUniform(kConv1Weight, k * H, rng);
  p.InitUniform(kConv1Bias, k * H, rng);
  p.Col(kNorm1Gain).setOnes();
  p.InitUniform(kConv2Weight, k * C, rng);
  p.InitUniform(kConv2Bias, k * C, rng);
  p.Col(kNorm2Gain).setOnes();
  p.InitUniform(kGruInput, C + D, rng);
  p.InitUniform(kGruRecurrent, R, rng);
  p.InitUniform(kGruBias, R, rng);
  p.InitUniform(kProjWeight, R, rng);
  p.InitUniform(kProjBias, R, rng);
  return model;
}

RawMdnHead PredictorModel::HeadFromOutput(const ConstVectorRef &out) const {
  const Index M = config_.num_components, D = config_.embedding_dim;
  RawMdnHead head(M, D);
  head.alpha = out.head(M);
  head.m = Eigen::Map<const Matrix>(out.data() + M, M, D);
  head.v = Eigen::Map<const Matrix>(out.data() + M + M * D, M, D);
  return head;
}

namespace {

using T = PredictorModel::Tensor;

Vector FlattenHead(const HeadGradient &g) {
  const Index M = g.NumComponents(), D = g.Dim();
  Vector out(M * (1 + 2 * D));
  out.head(M) = g.alpha;
  Eigen::Map<Matrix>(out.data() + M, M, D) = g.m;
  Eigen::Map<Matrix>(out.data() + M + M * D, M, D) = g.v;
  return out;
}

struct ConvBlockCache {
  Matrix col;
  Matrix pre;
  LayerNormCache norm;
  Matrix mask;  // empty in eval mode
};

struct ForwardCache {
  ConvBlockCache blocks[2];
  Matrix conv_out;
  std::vector<GruStep> steps;
  std::vector<Vector> outputs;
};

Matrix ConvBlockForward(const ParameterSet &p, std::size_t first, const Matrix &x,
                        const PredictorConfig &cfg, Mode mode, Rng *rng,
                        ConvBlockCache *cache) {
  cache->col = Im2Col1d(x, cfg.conv_kernel);
  cache->pre = cache->col * p[first].transpose();
  cache->pre.rowwise() += p.Col(first + 1).transpose();
  const Matrix relu = cache->pre.cwiseMax(0.0);
  Matrix y = LayerNormForward(relu, p.Col(first + 2), p.Col(first + 3), &cache->norm);
  cache->mask.resize(0, 0);
  if (mode == Mode::kTrain && cfg.dropout_rate > 0.0) {
    if (rng == nullptr) throw InvalidInput("train mode forward needs a random stream");
    std::bernoulli_distribution keep(1.0 - cfg.dropout_rate);
    const double scale = 1.0 / (1.0 - cfg.dropout_rate);
    cache->mask.resize(y.rows(), y.cols());
    for (Index i = 0; i < y.size(); ++i)
      cache->mask.data()[i] = keep(*rng) ? scale : 0.0;
    y.array() *= cache->mask.array();
  }
  return y;
}

Matrix ConvBlockBackward(const ParameterSet &p, std::size_t first, const Matrix &dy_in,
                         const PredictorConfig &cfg, Index in_channels,
                         const ConvBlockCache &cache, ParameterSet *grad) {
  Matrix dy = dy_in;
  if (cache.mask.size() > 0) dy.array() *= cache.mask.array();
  Matrix dpre = LayerNormBackward(dy, cache.norm, p.Col(first + 2), grad->Col(first + 2),
                                  grad->Col(first + 3));
  dpre.array() *= (cache.pre.array() > 0.0).cast<double>();
  (*grad)[first].noalias() += dpre.transpose() * cache.col;
  grad->Col(first + 1) += dpre.colwise().sum().transpose();
  const Matrix dcol = dpre * p[first];
  return Col2Im1d(dcol, in_channels, cfg.conv_kernel);
}

void CheckInputs(const PredictorConfig &cfg, const ContextSequence &ctx,
                 const ProsodySequence *prev) {
  if (ctx.length() < 1) throw InvalidInput("context: empty sequence");
  if (ctx.states.cols() != cfg.context_dim)
    throw InvalidInput("context: width " + std::to_string(ctx.states.cols()) +
                       " does not match config " + std::to_string(cfg.context_dim));
  if (!ctx.states.allFinite()) throw InvalidInput("context: non-finite entry");
  if (prev != nullptr) {
    if (prev->length() != ctx.length())
      throw InvalidInput("embeddings: length differs from context");
    if (prev->embeddings.cols() != cfg.embedding_dim)
      throw InvalidInput("embeddings: width does not match config");
    if (!prev->embeddings.allFinite()) throw InvalidInput("embeddings: non-finite entry");
  }
}

Matrix ConvStack(const PredictorModel &model, const Matrix &ctx, Mode mode, Rng *rng,
                 ForwardCache *cache) {
  const ParameterSet &p = model.params();
  const Matrix h1 =
      ConvBlockForward(p, T::kConv1Weight, ctx, model.config(), mode, rng, &cache->blocks[0]);
  return ConvBlockForward(p, T::kConv2Weight, h1, model.config(), mode, rng,
                          &cache->blocks[1]);
}

void Forward(const PredictorModel &model, const ContextSequence &ctx,
             const ProsodySequence *prev, Mode mode, Rng *rng, ForwardCache *cache) {
  const PredictorConfig &cfg = model.config();
  CheckInputs(cfg, ctx, prev);
  const ParameterSet &p = model.params();
  const Index K = ctx.length(), C = cfg.conv_channels, D = cfg.embedding_dim,
              R = cfg.recurrent_width;

  cache->conv_out = ConvStack(model, ctx.states, mode, rng, cache);
  cache->steps.assign(K, GruStep{});
  cache->outputs.assign(K, Vector());
  Vector state = Vector::Zero(R);
  Vector input(C + D);
  for (Index k = 0; k < K; ++k) {
    input.head(C) = cache->conv_out.row(k).transpose();
    if (prev != nullptr && k > 0)
      input.tail(D) = prev->embeddings.row(k - 1).transpose();
    else
      input.tail(D).setZero();
    GruForward(p[T::kGruInput], p[T::kGruRecurrent], p.Col(T::kGruBias), input, state,
               &cache->steps[k]);
    state = cache->steps[k].h;
    cache->outputs[k] = p[T::kProjWeight] * state + p.Col(T::kProjBias);
  }
}

// dout[k] is dLoss/d(output_k).
void Backward(const PredictorModel &model, const ForwardCache &cache,
              const std::vector<Vector> &dout, ParameterSet *grad) {
  const PredictorConfig &cfg = model.config();
  const ParameterSet &p = model.params();
  const Index K = static_cast<Index>(cache.steps.size()), C = cfg.conv_channels,
              R = cfg.recurrent_width;

  Matrix dconv = Matrix::Zero(K, C);
  Vector dstate = Vector::Zero(R);
  Vector dx, dh_prev;
  for (Index k = K - 1; k >= 0; --k) {
    (*grad)[T::kProjWeight].noalias() += dout[k] * cache.steps[k].h.transpose();
    grad->Col(T::kProjBias) += dout[k];
    dstate.noalias() += p[T::kProjWeight].transpose() * dout[k];
    GruBackward(cache.steps[k], p[T::kGruInput], p[T::kGruRecurrent], dstate,
                (*grad)[T::kGruInput], (*grad)[T::kGruRecurrent], grad->Col(T::kGruBias),
                &dx, &dh_prev);
    // The tail of dx belongs to the previous embedding, which is data here.
    dconv.row(k) = dx.head(C).transpose();
    dstate = dh_prev;
  }
  const Matrix d1 = ConvBlockBackward(p, T::kConv2Weight, dconv, cfg, C,
                                      cache.blocks[1], grad);
  ConvBlockBackward(p, T::kConv1Weight, d1, cfg, cfg.context_dim, cache.blocks[0], grad);
}

void CheckTarget(const PredictorConfig &cfg, const ContextSequence &ctx,
                 const ProsodySequence &target) {
  if (target.length() != ctx.length())
    throw InvalidInput("target: length differs from context");
  if (target.embeddings.cols() != cfg.embedding_dim)
    throw InvalidInput("target: width does not match config");
}

}  // namespace

std::vector<RawMdnHead> PredictorForward(const PredictorModel &model,
                                         const ContextSequence &ctx,
                                         const ProsodySequence *prev, Mode mode, Rng *rng) {
  ForwardCache cache;
  Forward(model, ctx, prev, mode, rng, &cache);
  std::vector<RawMdnHead> heads;
  heads.reserve(cache.outputs.size());
  for (const Vector &out : cache.outputs) heads.push_back(model.HeadFromOutput(out));
  return heads;
}

double SequenceNll(const PredictorModel &model, const ContextSequence &ctx,
                   const ProsodySequence &target, Mode mode, Rng *rng) {
  CheckTarget(model.config(), ctx, target);
  const auto heads = PredictorForward(model, ctx, &target, mode, rng);
  double total = 0.0;
  for (Index k = 0; k < target.length(); ++k)
    total += Nll(Activate(heads[k]), target.embeddings.row(k).transpose());
  return total;
}

Vector StepNll(const PredictorModel &model, const ContextSequence &ctx,
               const ProsodySequence &target) {
  CheckTarget(model.config(), ctx, target);
  const auto heads = PredictorForward(model, ctx, &target, Mode::kEval);
  Vector out(target.length());
  for (Index k = 0; k < target.length(); ++k)
    out(k) = Nll(Activate(heads[k]), target.embeddings.row(k).transpose());
  return out;
}

double SequenceNllGrad(const PredictorModel &model, const ContextSequence &ctx,
                       const ProsodySequence &target, Mode mode, Rng *rng,
                       double scale, ParameterSet *grad) {
  CheckTarget(model.config(), ctx, target);
  ForwardCache cache;
  Forward(model, ctx, &target, mode, rng, &cache);
  const Index K = ctx.length();
  std::vector<Vector> dout(K);
  double total = 0.0;
  HeadGradient head_grad;
  for (Index k = 0; k < K; ++k) {
    total += NllAndGrad(model.HeadFromOutput(cache.outputs[k]),
                        target.embeddings.row(k).transpose(), &head_grad);
    dout[k] = scale * FlattenHead(head_grad);
  }
  Backward(model, cache, dout, grad);
  return total;
}

SequenceLossGrad SequenceGrad(const PredictorModel &model, const ContextSequence &ctx,
                              const ProsodySequence &target) {
  SequenceLossGrad out{0.0, model.params().ZerosLike()};
  out.loss = SequenceNllGrad(model, ctx, target, Mode::kEval, nullptr, 1.0, &out.grad);
  return out;
}

double BatchNll(const PredictorModel &model, std::span<const SequencePair> batch) {
  double total = 0.0;
  for (const SequencePair &pair : batch) total += SequenceNll(model, pair.context, pair.target);
  return total;
}

SequenceLossGrad BatchGrad(const PredictorModel &model, std::span<const SequencePair> batch) {
  SequenceLossGrad out{0.0, model.params().ZerosLike()};
  for (const SequencePair &pair : batch)
    out.loss += SequenceNllGrad(model, pair.context, pair.target, Mode::kEval, nullptr, 1.0,
                                &out.grad);
  return out;
}

PredictorStepper::PredictorStepper(const PredictorModel &model, const ContextSequence &ctx)
    : model_(model) {
  CheckInputs(model.config(), ctx, nullptr);
  ForwardCache cache;
  conv_out_ = ConvStack(model, ctx.states, Mode::kEval, nullptr, &cache);
  state_ = Vector::Zero(model.config().recurrent_width);
}

RawMdnHead PredictorStepper::Step(const ConstVectorRef &prev_embedding) {
  const PredictorConfig &cfg = model_.config();
  if (position_ >= length()) throw InvalidInput("stepper: sequence exhausted");
  if (prev_embedding.size() != cfg.embedding_dim)
    throw InvalidInput("stepper: previous embedding has wrong width");
  const ParameterSet &p = model_.params();
  const Index C = cfg.conv_channels;
  Vector input(C + cfg.embedding_dim);
  input.head(C) = conv_out_.row(position_).transpose();
  input.tail(cfg.embedding_dim) = prev_embedding;
  GruStep step;
  GruForward(p[T::kGruInput], p[T::kGruRecurrent], p.Col(T::kGruBias), input, state_, &step);
  state_ = step.h;
  ++position_;
  return model_.HeadFromOutput(p[T::kProjWeight] * state_ + p.Col(T::kProjBias));
}

ProsodySequence SampleSequence(const PredictorModel &model, const ContextSequence &ctx,
                               Rng &rng, double temperature) {
  PredictorStepper stepper(model, ctx);
  const Index K = ctx.length(), D = model.config().embedding_dim;
  ProsodySequence out{Matrix(K, D)};
  Vector prev = Vector::Zero(D);
  for (Index k = 0; k < K; ++k) {
    prev = Sample(Activate(stepper.Step(prev)), rng, temperature);
    out.embeddings.row(k) = prev.transpose();
  }
  return out;
}

}  // namespace pmdn
