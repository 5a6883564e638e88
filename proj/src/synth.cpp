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

#include "pmdn/synth.hpp"

#include <cmath>
#include <numbers>

#include "pmdn/gmm.hpp"
#include "pmdn/io.hpp"

namespace pmdn {

namespace {

constexpr std::uint32_t kCorpusVersion = 1;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

Matrix Gaussian(Index rows, Index cols, double scale, Rng &rng) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double MinPairwiseDistance(const Matrix &points) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < points.rows(); ++i)
    for (Index j = i + 1; j < points.rows(); ++j)
      best = std::min(best, (points.row(i) - points.row(j)).norm());
  return best;
}

// log of the transition probabilities out of `prev` (or the initial
// distribution when prev < 0) for a class with the given logits.
Vector LogTransition(const Vector &logits, int prev, double persistence) {
  Vector l = logits;
  if (prev >= 0) l(prev) += persistence;
  return l.array() - LogSumExp(l);
}

}  // namespace

void GeneratorSpec::Check() const {
  if (n_modes < 1) throw InvalidInput("generator: n_modes must be >= 1");
  if (embedding_dim < 1 || context_dim < 1 || n_classes < 1 || mel_channels < 1)
    throw InvalidInput("generator: dimensions must be >= 1");
  if (min_length < 1 || max_length < min_length)
    throw InvalidInput("generator: need 1 <= min_length <= max_length");
  if (min_frames < 1 || max_frames < min_frames)
    throw InvalidInput("generator: need 1 <= min_frames <= max_frames");
  if (!(separation > 0.0) || !std::isfinite(separation))
    throw InvalidInput("generator: separation must be > 0");
  if (!(noise > 0.0) || !std::isfinite(noise)) throw InvalidInput("generator: noise must be > 0");
  if (!(segment_noise >= 0.0) || !(context_jitter >= 0.0))
    throw InvalidInput("generator: segment_noise and context_jitter must be >= 0");
  if (!(anisotropy > 0.0 && anisotropy <= 1.0))
    throw InvalidInput("generator: anisotropy must lie in (0, 1]");
  if (!std::isfinite(persistence)) throw InvalidInput("generator: persistence must be finite");
}

SyntheticProcess::SyntheticProcess(const GeneratorSpec &spec) : spec_(spec) {
  spec_.Check();
  const Index D = spec.embedding_dim, H = spec.context_dim, F = spec.mel_channels,
              C = spec.n_classes, J = spec.n_modes;
  Rng rng(MixSeed(~spec.seed, 0x5eed));

  class_embedding_ = Gaussian(C, H, 1.0, rng);
  class_logits_ = Gaussian(C, J, 1.0, rng);
  class_offset_ = Gaussian(C, D, 0.5 * spec.noise, rng);

  // Well-spread mode centres: first draw whose closest pair is at least 1.5
  // apart in unit scale, else the most spread of 1000 draws.
  Matrix best;
  double best_gap = -1.0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Matrix candidate = Gaussian(J, D, 1.0, rng);
    const double gap = J > 1 ? MinPairwiseDistance(candidate) : 1.5;
    if (gap > best_gap) {
      best_gap = gap;
      best = std::move(candidate);
    }
    if (best_gap >= 1.5) break;
  }
  mode_mean_ = spec.separation * best;

  for (Index j = 0; j < J; ++j) {
    Eigen::MatrixXd g = Gaussian(D, D, 1.0, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    rotation_.push_back(Matrix(qr.householderQ()));
  }
  axis_scale_ = Vector::Constant(D, spec.anisotropy);
  axis_scale_(0) = 1.0;

  render_u_ = Gaussian(F, D, 1.0 / std::sqrt(static_cast<double>(D)), rng);
  render_b_ = Gaussian(F, 1, 0.5, rng).col(0);
  render_w_ = Gaussian(F, D, 1.0 / std::sqrt(static_cast<double>(D)), rng);
}

Vector SyntheticProcess::ModeMean(int mode, int cls) const {
  return (mode_mean_.row(mode) + class_offset_.row(cls)).transpose();
}

Matrix SyntheticProcess::ModeCovariance(int mode) const {
  const Matrix scaled = rotation_[mode] * (spec_.noise * axis_scale_).asDiagonal();
  return scaled * scaled.transpose();
}

double SyntheticProcess::ComponentLogDensity(int mode, int cls, const ConstVectorRef &e) const {
  const Index D = spec_.embedding_dim;
  const Vector diff = e - ModeMean(mode, cls);
  // Whitened coordinates; scale by noise after rotating to avoid forming the
  // (possibly underflowing) covariance.
  const Vector u = (rotation_[mode].transpose() * diff).cwiseQuotient(axis_scale_) / spec_.noise;
  return -D * kHalfLog2Pi - D * std::log(spec_.noise) - axis_scale_.array().log().sum() -
         0.5 * u.squaredNorm();
}

Vector SyntheticProcess::StepLogDensity(const std::vector<int> &classes,
                                        const Matrix &embeddings) const {
  const Index K = embeddings.rows(), J = spec_.n_modes;
  if (static_cast<Index>(classes.size()) != K || embeddings.cols() != spec_.embedding_dim)
    throw InvalidInput("ground truth: classes and embeddings disagree in shape");
  Vector out(K);
  Vector log_post;  // log p(z_{k-1} | e_<k)
  for (Index k = 0; k < K; ++k) {
    const int c = classes[k];
    if (c < 0 || c >= spec_.n_classes) throw InvalidInput("ground truth: class out of range");
    const Vector logits = class_logits_.row(c).transpose();
    Vector log_prior(J);
    if (k == 0) {
      log_prior = LogTransition(logits, -1, spec_.persistence);
    } else {
      for (Index j = 0; j < J; ++j) {
        Vector terms(J);
        for (Index i = 0; i < J; ++i)
          terms(i) = log_post(i) + LogTransition(logits, static_cast<int>(i), spec_.persistence)(j);
        log_prior(j) = LogSumExp(terms);
      }
    }
    Vector joint(J);
    for (Index j = 0; j < J; ++j)
      joint(j) = log_prior(j) + ComponentLogDensity(static_cast<int>(j), c,
                                                    embeddings.row(k).transpose());
    const double step = LogSumExp(joint);
    log_post = joint.array() - step;
    out(k) = std::min(step, kMaxStepLogDensity);
  }
  return out;
}

CorpusItem SyntheticProcess::GenerateItem(std::uint64_t index) const {
  const GeneratorSpec &s = spec_;
  const Index D = s.embedding_dim, H = s.context_dim, F = s.mel_channels;
  Rng rng(MixSeed(s.seed, index));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Index K = std::uniform_int_distribution<int>(s.min_length, s.max_length)(rng);

  CorpusItem item;
  item.context.states.resize(K, H);
  item.truth.embeddings.resize(K, D);
  item.recon_target.resize(K, F);
  int prev_mode = -1;
  for (Index k = 0; k < K; ++k) {
    const int c = std::uniform_int_distribution<int>(0, s.n_classes - 1)(rng);
    for (Index h = 0; h < H; ++h)
      item.context.states(k, h) = class_embedding_(c, h) + s.context_jitter * normal(rng);

    const Vector log_p =
        LogTransition(class_logits_.row(c).transpose(), prev_mode, s.persistence);
    const double u = uniform(rng);
    int mode = s.n_modes - 1;
    double cumulative = 0.0;
    for (int j = 0; j < s.n_modes; ++j) {
      cumulative += std::exp(log_p(j));
      if (u < cumulative) {
        mode = j;
        break;
      }
    }
    Vector z(D);
    for (Index d = 0; d < D; ++d) z(d) = normal(rng);
    const Vector e =
        ModeMean(mode, c) + s.noise * (rotation_[mode] * z.cwiseProduct(axis_scale_));
    item.truth.embeddings.row(k) = e.transpose();

    const Vector amp = render_u_ * e + render_b_;
    const Vector wave = render_w_ * e;
    const int T = std::uniform_int_distribution<int>(s.min_frames, s.max_frames)(rng);
    Matrix seg(T, F);
    for (int t = 0; t < T; ++t) {
      const double phase = std::sin(2.0 * std::numbers::pi * (t + 0.5) / T);
      for (Index f = 0; f < F; ++f)
        seg(t, f) = amp(f) + wave(f) * phase + s.segment_noise * normal(rng);
    }
    item.segments.push_back(std::move(seg));
    item.recon_target.row(k) = amp.transpose();
    item.classes.push_back(c);
    item.modes.push_back(mode);
    prev_mode = mode;
  }
  item.step_log_density = StepLogDensity(item.classes, item.truth.embeddings);
  return item;
}

SyntheticCorpus Generate(const GeneratorSpec &spec, std::size_t count,
                         std::uint64_t first_index) {
  if (count < 1) throw InvalidInput("generate: count must be >= 1");
  const SyntheticProcess process(spec);
  SyntheticCorpus corpus{spec, first_index, {}};
  corpus.items.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    corpus.items.push_back(process.GenerateItem(first_index + i));
  return corpus;
}

double TrueLogLik(const CorpusItem &item) { return item.step_log_density.sum(); }

std::vector<SequencePair> PredictorPairs(const SyntheticCorpus &corpus) {
  std::vector<SequencePair> pairs;
  pairs.reserve(corpus.items.size());
  for (const CorpusItem &item : corpus.items) pairs.push_back({item.context, item.truth});
  return pairs;
}

std::string EncodeCorpus(const SyntheticCorpus &corpus) {
  const GeneratorSpec &s = corpus.spec;
  ByteWriter w;
  w.PutMagic("MDNC");
  w.PutU32(kCorpusVersion);
  for (int v : {s.n_modes, s.embedding_dim, s.context_dim, s.min_length, s.max_length,
                s.n_classes, s.mel_channels, s.min_frames, s.max_frames})
    w.PutU32(static_cast<std::uint32_t>(v));
  w.PutU64(s.seed);
  for (double v : {s.separation, s.noise, s.segment_noise, s.context_jitter, s.anisotropy,
                   s.persistence})
    w.PutF64(v);
  w.PutU64(corpus.first_index);
  w.PutU64(corpus.items.size());
  for (const CorpusItem &item : corpus.items) {
    const Index K = item.length();
    w.PutU32(static_cast<std::uint32_t>(K));
    for (int c : item.classes) w.PutU32(static_cast<std::uint32_t>(c));
    for (int m : item.modes) w.PutU32(static_cast<std::uint32_t>(m));
    w.PutMatrix(item.context.states);
    w.PutMatrix(item.truth.embeddings);
    w.PutVector(item.step_log_density);
    w.PutMatrix(item.recon_target);
    for (const Matrix &seg : item.segments) w.PutMatrix(seg);
  }
  return w.Finish();
}

SyntheticCorpus DecodeCorpus(std::string bytes) {
  ByteReader r(std::move(bytes), "corpus");
  r.ExpectMagic("MDNC");
  const std::uint32_t version = r.GetU32();
  if (version != kCorpusVersion)
    throw InvalidInput("corpus: unsupported format version " + std::to_string(version));
  SyntheticCorpus corpus;
  GeneratorSpec &s = corpus.spec;
  for (int *v : {&s.n_modes, &s.embedding_dim, &s.context_dim, &s.min_length, &s.max_length,
                 &s.n_classes, &s.mel_channels, &s.min_frames, &s.max_frames})
    *v = static_cast<int>(r.GetU32());
  s.seed = r.GetU64();
  for (double *v : {&s.separation, &s.noise, &s.segment_noise, &s.context_jitter,
                    &s.anisotropy, &s.persistence})
    *v = r.GetF64();
  s.Check();
  corpus.first_index = r.GetU64();
  const std::uint64_t count = r.GetU64();
  for (std::uint64_t i = 0; i < count; ++i) {
    CorpusItem item;
    const std::uint32_t K = r.GetU32();
    if (K > r.remaining()) throw InvalidInput("corpus: truncated file");
    for (std::uint32_t k = 0; k < K; ++k) item.classes.push_back(static_cast<int>(r.GetU32()));
    for (std::uint32_t k = 0; k < K; ++k) item.modes.push_back(static_cast<int>(r.GetU32()));
    item.context.states = r.GetMatrix();
    item.truth.embeddings = r.GetMatrix();
    item.step_log_density = r.GetVector();
    item.recon_target = r.GetMatrix();
    for (std::uint32_t k = 0; k < K; ++k) item.segments.push_back(r.GetMatrix());
    if (item.context.length() != K || item.truth.length() != K ||
        item.step_log_density.size() != K || item.recon_target.rows() != K)
      throw InvalidInput("corpus: item fields disagree in length");
    corpus.items.push_back(std::move(item));
  }
  if (!r.AtEnd()) throw InvalidInput("corpus: trailing bytes");
  return corpus;
}

void SaveCorpus(const std::string &path, const SyntheticCorpus &corpus) {
  WriteFileBytes(path, EncodeCorpus(corpus));
}

SyntheticCorpus LoadCorpus(const std::string &path) { return DecodeCorpus(ReadFileBytes(path)); }

}  // namespace pmdn
