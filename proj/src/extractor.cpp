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

#include "pmdn/extractor.hpp"

namespace pmdn {

void ExtractorConfig::Check() const {
  if (mel_channels < 1 || channels1 < 1 || channels2 < 1)
    throw InvalidInput("extractor config: channel counts must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw InvalidInput("extractor config: kernel must be odd");
  if (embedding_dim < 2 || embedding_dim % 2 != 0)
    throw InvalidInput("extractor config: embedding_dim must be even and >= 2");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0))
    throw InvalidInput("extractor config: bn_momentum must lie in [0, 1)");
}

ExtractorModel::ExtractorModel(const ExtractorConfig &config) : config_(config) {
  config_.Check();
  const Index k = config.kernel, C1 = config.channels1, C2 = config.channels2,
              F = config.mel_channels, R = config.state_width();
  params_.Add("conv1.weight", C1, k * k);
  params_.Add("bn1.gain", C1);
  params_.Add("bn1.bias", C1);
  params_.Add("conv2.weight", C2, k * k * C1);
  params_.Add("bn2.gain", C2);
  params_.Add("bn2.bias", C2);
  for (const char *dir : {"gru_fwd", "gru_bwd"}) {
    params_.Add(std::string(dir) + ".input", 3 * R, F * C2);
    params_.Add(std::string(dir) + ".recurrent", 3 * R, R);
    params_.Add(std::string(dir) + ".bias", 3 * R);
  }
  params_.Col(kBn1Gain).setOnes();
  params_.Col(kBn2Gain).setOnes();

  buffers_.Add("bn1.running_mean", C1);
  buffers_.Add("bn1.running_var", C1);
  buffers_.Add("bn2.running_mean", C2);
  buffers_.Add("bn2.running_var", C2);
  buffers_.Col(kBn1Var).setOnes();
  buffers_.Col(kBn2Var).setOnes();
}

ExtractorModel ExtractorModel::Initialized(const ExtractorConfig &config, std::uint64_t seed) {
  ExtractorModel model(config);
  Rng rng(seed);
  ParameterSet &p = model.params_;
  const Index k = config.kernel, C1 = config.channels1, C2 = config.channels2,
              F = config.mel_channels, R = config.state_width();
  p.InitUniform(kConv1Weight, k * k, rng);
  p.InitUniform(kConv2Weight, k * k * C1, rng);
  for (std::size_t base : {std::size_t{kFwdInput}, std::size_t{kBwdInput}}) {
    p.InitUniform(base, F * C2, rng);
    p.InitUniform(base + 1, R, rng);
    p.InitUniform(base + 2, R, rng);
  }
  return model;
}

namespace {

using T = ExtractorModel::Tensor;
using B = ExtractorModel::Buffer;

void CheckSegments(const SegmentBatch &segments, Index bins) {
  if (segments.empty()) throw InvalidInput("extract: empty segment batch");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Matrix &s = segments[i];
    if (s.rows() < 1)
      throw InvalidInput("extract: segment " + std::to_string(i) + " has no frames");
    if (s.cols() != bins)
      throw InvalidInput("extract: segment " + std::to_string(i) + " has " +
                         std::to_string(s.cols()) + " channels, expected " +
                         std::to_string(bins));
    if (!s.allFinite())
      throw InvalidInput("extract: segment " + std::to_string(i) + " has non-finite entries");
  }
}

// Stacks per-segment im2col blocks of a (sum T*F) x C feature map.
Matrix StackedIm2Col(const Matrix &x, const std::vector<Index> &frames, Index bins,
                     int kernel) {
  Matrix out(x.rows(), kernel * kernel * x.cols());
  Index row = 0;
  for (Index T : frames) {
    const Index n = T * bins;
    out.middleRows(row, n) = Im2Col2d(x.middleRows(row, n), T, bins, kernel);
    row += n;
  }
  return out;
}

}  // namespace

ProsodySequence Extract(const ExtractorModel &model, const SegmentBatch &segments, Mode mode,
                        ExtractorCache *cache) {
  const ExtractorConfig &cfg = model.config();
  CheckSegments(segments, cfg.mel_channels);
  ExtractorCache local;
  ExtractorCache &c = cache ? *cache : local;
  const ParameterSet &p = model.params();
  const ParameterSet &buf = model.buffers();
  const Index F = cfg.mel_channels, R = cfg.state_width();

  c.frames.clear();
  Index positions = 0;
  for (const Matrix &s : segments) {
    c.frames.push_back(s.rows());
    positions += s.rows() * F;
  }
  // One input channel: position t*F + f holds segment(t, f).
  Matrix input(positions, 1);
  Index row = 0;
  for (const Matrix &s : segments) {
    input.middleRows(row, s.size()) = Eigen::Map<const Vector>(s.data(), s.size());
    row += s.size();
  }

  c.col1 = StackedIm2Col(input, c.frames, F, cfg.kernel);
  c.pre1 = c.col1 * p[T::kConv1Weight].transpose();
  const Matrix norm1 = BatchNormForward(c.pre1, p.Col(T::kBn1Gain), p.Col(T::kBn1Bias),
                                        buf.Col(B::kBn1Mean), buf.Col(B::kBn1Var), mode, &c.bn1);
  c.act1 = norm1.cwiseMax(0.0);

  c.col2 = StackedIm2Col(c.act1, c.frames, F, cfg.kernel);
  c.pre2 = c.col2 * p[T::kConv2Weight].transpose();
  const Matrix norm2 = BatchNormForward(c.pre2, p.Col(T::kBn2Gain), p.Col(T::kBn2Bias),
                                        buf.Col(B::kBn2Mean), buf.Col(B::kBn2Var), mode, &c.bn2);
  c.act2 = norm2.cwiseMax(0.0);

  const Index N = static_cast<Index>(segments.size());
  const Index width = F * cfg.channels2;
  ProsodySequence out{Matrix(N, 2 * R)};
  c.fwd.assign(N, {});
  c.bwd.assign(N, {});
  row = 0;
  for (Index i = 0; i < N; ++i) {
    const Index frames = c.frames[i];
    // Rows t*F .. t*F+F-1 of act2 are contiguous, so frame t is one vector.
    auto frame = [&](Index t) {
      return Eigen::Map<const Vector>(c.act2.data() + (row + t * F) * cfg.channels2, width);
    };
    Vector h = Vector::Zero(R);
    c.fwd[i].resize(frames);
    for (Index t = 0; t < frames; ++t) {
      GruForward(p[T::kFwdInput], p[T::kFwdRecurrent], p.Col(T::kFwdBias), frame(t), h,
                 &c.fwd[i][t]);
      h = c.fwd[i][t].h;
    }
    out.embeddings.row(i).head(R) = h.transpose();
    h.setZero();
    c.bwd[i].resize(frames);
    for (Index s = 0; s < frames; ++s) {
      GruForward(p[T::kBwdInput], p[T::kBwdRecurrent], p.Col(T::kBwdBias),
                 frame(frames - 1 - s), h, &c.bwd[i][s]);
      h = c.bwd[i][s].h;
    }
    out.embeddings.row(i).tail(R) = h.transpose();
    row += frames * F;
  }
  return out;
}

void ExtractorBackward(const ExtractorModel &model, const ExtractorCache &c,
                       const ConstMatrixRef &dE, ParameterSet *grad) {
  const ExtractorConfig &cfg = model.config();
  const ParameterSet &p = model.params();
  const Index F = cfg.mel_channels, R = cfg.state_width(), C2 = cfg.channels2;
  const Index N = static_cast<Index>(c.frames.size());
  if (dE.rows() != N || dE.cols() != 2 * R)
    throw InvalidInput("extractor backward: gradient shape does not match the batch");

  ParameterSet &g = *grad;
  Matrix dact2 = Matrix::Zero(c.act2.rows(), C2);
  Index row = 0;
  Vector dx, dh_prev;
  for (Index i = 0; i < N; ++i) {
    const Index frames = c.frames[i];
    auto dframe = [&](Index t) {
      return Eigen::Map<Vector>(dact2.data() + (row + t * F) * C2, F * C2);
    };
    Vector dh = dE.row(i).head(R).transpose();
    for (Index t = frames - 1; t >= 0; --t) {
      GruBackward(c.fwd[i][t], p[T::kFwdInput], p[T::kFwdRecurrent], dh, g[T::kFwdInput],
                  g[T::kFwdRecurrent], g.Col(T::kFwdBias), &dx, &dh_prev);
      dframe(t) += dx;
      dh = dh_prev;
    }
    dh = dE.row(i).tail(R).transpose();
    for (Index s = frames - 1; s >= 0; --s) {
      GruBackward(c.bwd[i][s], p[T::kBwdInput], p[T::kBwdRecurrent], dh, g[T::kBwdInput],
                  g[T::kBwdRecurrent], g.Col(T::kBwdBias), &dx, &dh_prev);
      dframe(frames - 1 - s) += dx;
      dh = dh_prev;
    }
    row += frames * F;
  }

  const Matrix dnorm2 = (c.act2.array() > 0.0).select(dact2, 0.0);
  const Matrix dpre2 =
      BatchNormBackward(dnorm2, c.bn2, p.Col(T::kBn2Gain), g.Col(T::kBn2Gain), g.Col(T::kBn2Bias));
  g[T::kConv2Weight] += dpre2.transpose() * c.col2;
  const Matrix dcol2 = dpre2 * p[T::kConv2Weight];

  Matrix dact1(c.act1.rows(), c.act1.cols());
  row = 0;
  for (Index frames : c.frames) {
    const Index n = frames * F;
    dact1.middleRows(row, n) =
        Col2Im2d(dcol2.middleRows(row, n), frames, F, cfg.channels1, cfg.kernel);
    row += n;
  }
  const Matrix dnorm1 = (c.act1.array() > 0.0).select(dact1, 0.0);
  const Matrix dpre1 =
      BatchNormBackward(dnorm1, c.bn1, p.Col(T::kBn1Gain), g.Col(T::kBn1Gain), g.Col(T::kBn1Bias));
  g[T::kConv1Weight] += dpre1.transpose() * c.col1;
}

void UpdateRunningStats(ExtractorModel &model, const ExtractorCache &cache) {
  if (!cache.bn1.batch_stats || !cache.bn2.batch_stats)
    throw InvalidInput("running statistics need a train-mode forward pass");
  const double mom = model.config().bn_momentum;
  ParameterSet &buf = model.buffers();
  buf.Col(B::kBn1Mean) = mom * buf.Col(B::kBn1Mean) + (1.0 - mom) * cache.bn1.mean;
  buf.Col(B::kBn1Var) = mom * buf.Col(B::kBn1Var) + (1.0 - mom) * cache.bn1.variance;
  buf.Col(B::kBn2Mean) = mom * buf.Col(B::kBn2Mean) + (1.0 - mom) * cache.bn2.mean;
  buf.Col(B::kBn2Var) = mom * buf.Col(B::kBn2Var) + (1.0 - mom) * cache.bn2.variance;
}

}  // namespace pmdn
