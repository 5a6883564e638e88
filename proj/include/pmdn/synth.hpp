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

// Synthetic prosody corpora with an exactly known generative density.
//
// Each phoneme k has a class c_k (uniform). Its context row is a fixed class
// embedding plus jitter. A hidden mode z_k is drawn with
//   logit(z_k = j) = class_logits[c_k, j] + persistence * [z_{k-1} == j]
// and the embedding is e_k ~ N(mode_mean[j] + class_offset[c_k], Sigma_j),
// where Sigma_j = noise^2 * Q_j diag(1, a^2, ..., a^2) Q_j^T is an elongated,
// randomly rotated full-covariance Gaussian (a = anisotropy).
//
// The per-step log-density log p(e_k | e_<k, c_<=k) is computed exactly by
// forward filtering over the hidden modes.
//
// A segment of T_k frames x F bins renders the embedding:
//   seg[t, f] = u_f + w_f * sin(2 pi (t + 0.5) / T_k) + segment_noise * eps,
// with u = A e + b, w = B e. The reconstruction target is u, the clean
// frame average.

#ifndef PMDN_SYNTH_HPP_
#define PMDN_SYNTH_HPP_

#include <string>
#include <vector>

#include "pmdn/predictor.hpp"

namespace pmdn {

struct GeneratorSpec {
  int n_modes = 4;
  int embedding_dim = 4;   // D
  int context_dim = 16;    // H
  int min_length = 8;      // K range, inclusive
  int max_length = 16;
  double separation = 3.0;
  double noise = 1.0;
  std::uint64_t seed = 1;

  int n_classes = 8;
  int mel_channels = 8;    // F
  int min_frames = 3;
  int max_frames = 8;
  double segment_noise = 0.1;
  double context_jitter = 0.1;
  double anisotropy = 0.3;
  double persistence = 2.0;

  void Check() const;
  bool operator==(const GeneratorSpec &) const = default;
};

// Per-step log-densities are reported no higher than this; only reached in
// the vanishing-noise limit.
inline constexpr double kMaxStepLogDensity = 1e3;

struct CorpusItem {
  ContextSequence context;        // K x H
  std::vector<Matrix> segments;   // K of T_k x F
  ProsodySequence truth;          // K x D
  Vector step_log_density;        // K, log p(e_k | e_<k, context)
  Matrix recon_target;            // K x F
  std::vector<int> classes;
  std::vector<int> modes;

  Index length() const { return context.length(); }
};

struct SyntheticCorpus {
  GeneratorSpec spec;
  std::uint64_t first_index = 0;
  std::vector<CorpusItem> items;
};

// The fixed generative process derived from a spec (independent of item
// indices), shared by every corpus generated from the same spec.
class SyntheticProcess {
 public:
  explicit SyntheticProcess(const GeneratorSpec &spec);

  const GeneratorSpec &spec() const { return spec_; }
  CorpusItem GenerateItem(std::uint64_t index) const;

  // Exact log p(e_k | e_<k, classes) for every step, clamped at
  // kMaxStepLogDensity.
  Vector StepLogDensity(const std::vector<int> &classes, const Matrix &embeddings) const;

  // Mean of mode j under class c.
  Vector ModeMean(int mode, int cls) const;
  // Full covariance of mode j.
  Matrix ModeCovariance(int mode) const;
  // Unnormalized log-probabilities of the modes for class c before the
  // persistence bonus.
  Vector ClassLogits(int cls) const { return class_logits_.row(cls).transpose(); }

 private:
  double ComponentLogDensity(int mode, int cls, const ConstVectorRef &e) const;

  GeneratorSpec spec_;
  Matrix class_embedding_;   // n_classes x H
  Matrix class_logits_;      // n_classes x n_modes
  Matrix class_offset_;      // n_classes x D
  Matrix mode_mean_;         // n_modes x D
  std::vector<Matrix> rotation_;  // n_modes of D x D orthogonal
  Vector axis_scale_;        // D: (1, a, ..., a)
  Matrix render_u_;          // F x D
  Vector render_b_;          // F
  Matrix render_w_;          // F x D
};

// Items first_index .. first_index + count - 1. Each item draws from its own
// stream seeded by (spec.seed, item index), so disjoint index ranges give
// independent corpora from the same process.
SyntheticCorpus Generate(const GeneratorSpec &spec, std::size_t count,
                         std::uint64_t first_index = 0);

// Stored exact log-density of the whole sequence.
double TrueLogLik(const CorpusItem &item);

std::vector<SequencePair> PredictorPairs(const SyntheticCorpus &corpus);

// Corpus file: "MDNC", u32 version, spec, first_index, items; checksum trailer.
std::string EncodeCorpus(const SyntheticCorpus &corpus);
SyntheticCorpus DecodeCorpus(std::string bytes);
void SaveCorpus(const std::string &path, const SyntheticCorpus &corpus);
SyntheticCorpus LoadCorpus(const std::string &path);

}  // namespace pmdn

#endif  // PMDN_SYNTH_HPP_
