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

#include "pmdn/eval.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <thread>

namespace pmdn {

std::string FormatNumber(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- sweep

namespace {

SweepEntry TrainEntry(int M, const std::vector<SequencePair> &train,
                      const std::vector<SequencePair> &heldout, const SweepConfig &config) {
  SweepEntry entry;
  entry.num_components = M;
  entry.seed = config.schedule.seed;
  PredictorConfig pcfg = config.predictor;
  pcfg.num_components = M;
  PredictorModel model = PredictorModel::Initialized(pcfg, MixSeed(entry.seed, 2));

  const auto start = std::chrono::steady_clock::now();
  try {
    TrainPredictor(model, train, config.schedule, [&](int epoch, const PredictorModel &m) {
      try {
        entry.train_loglik.push_back(MeanLogLikPerPhoneme(m, train));
        entry.heldout_loglik.push_back(MeanLogLikPerPhoneme(m, heldout));
      } catch (const InvalidInput &e) {
        throw TrainingDiverged("evaluation after epoch " + std::to_string(epoch + 1) +
                                   " failed: " + e.what(),
                               -1);
      }
    });
    entry.model = std::move(model);
  } catch (const TrainingDiverged &e) {
    entry.diverged = e.what();
  }
  entry.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return entry;
}

}  // namespace

SweepResult RunSweep(const SyntheticCorpus &train, const SyntheticCorpus &heldout,
                     const SweepConfig &config) {
  if (config.components.empty()) throw InvalidInput("sweep: no component counts given");
  for (std::size_t i = 0; i < config.components.size(); ++i) {
    if (config.components[i] < 1) throw InvalidInput("sweep: component counts must be >= 1");
    if (i > 0 && config.components[i] <= config.components[i - 1])
      throw InvalidInput("sweep: component counts must be strictly increasing");
  }
  config.schedule.Check();
  PredictorConfig pcfg = config.predictor;
  pcfg.context_dim = train.spec.context_dim;
  if (pcfg.context_dim != heldout.spec.context_dim ||
      pcfg.embedding_dim != train.spec.embedding_dim ||
      pcfg.embedding_dim != heldout.spec.embedding_dim)
    throw InvalidInput("sweep: predictor and corpus dimensions disagree");
  SweepConfig cfg = config;
  cfg.predictor = pcfg;

  const std::vector<SequencePair> train_pairs = PredictorPairs(train);
  const std::vector<SequencePair> held_pairs = PredictorPairs(heldout);
  SweepResult result;
  result.entries.resize(cfg.components.size());
  if (cfg.single_thread) {
    for (std::size_t i = 0; i < cfg.components.size(); ++i)
      result.entries[i] = TrainEntry(cfg.components[i], train_pairs, held_pairs, cfg);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < cfg.components.size(); ++i)
      workers.emplace_back([&, i] {
        result.entries[i] = TrainEntry(cfg.components[i], train_pairs, held_pairs, cfg);
      });
    for (std::thread &w : workers) w.join();
  }
  return result;
}

void WriteSweepCsv(std::ostream &out, const SweepResult &result) {
  out << "M,epoch,split,loglik\n";
  for (const SweepEntry &e : result.entries) {
    for (std::size_t i = 0; i < e.train_loglik.size(); ++i)
      out << e.num_components << ',' << i + 1 << ",train," << FormatNumber(e.train_loglik[i])
          << '\n';
    for (std::size_t i = 0; i < e.heldout_loglik.size(); ++i)
      out << e.num_components << ',' << i + 1 << ",heldout,"
          << FormatNumber(e.heldout_loglik[i]) << '\n';
  }
}

CeilingCheck CompareToTruth(const PredictorModel &model, const SyntheticCorpus &data) {
  if (data.items.size() < 2) throw InvalidInput("ceiling check needs at least two sequences");
  const double n = static_cast<double>(data.items.size());
  double phonemes = 0.0, model_sum = 0.0, true_sum = 0.0;
  std::vector<double> diff;
  for (const CorpusItem &item : data.items) {
    const double m = -SequenceNll(model, item.context, item.truth);
    const double t = TrueLogLik(item);
    model_sum += m;
    true_sum += t;
    diff.push_back(m - t);
    phonemes += static_cast<double>(item.length());
  }
  const double mean = (model_sum - true_sum) / n;
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  CeilingCheck c;
  c.model_loglik = model_sum / phonemes;
  c.true_loglik = true_sum / phonemes;
  // Per-sequence standard error, rescaled from per-sequence to per-phoneme units.
  c.difference_se = std::sqrt(ss / (n - 1.0) / n) * n / phonemes;
  return c;
}

// ---------------------------------------------------------------- diversity

namespace {

double MeanPairwiseDistance(const std::vector<Matrix> &samples) {
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      sum += (samples[i] - samples[j]).norm();
      ++pairs;
    }
  return sum / pairs;
}

void Summarize(DiversityReport &r, const DiversityOptions &options) {
  const std::size_t n = r.per_context.size();
  double total = 0.0;
  for (double d : r.per_context) total += d;
  r.mean_distance = total / static_cast<double>(n);

  Rng rng(MixSeed(options.seed, 0xb007));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> means(options.bootstrap_rounds);
  for (double &m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += r.per_context[pick(rng)];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  r.lower = quantile(0.025);
  r.upper = quantile(0.975);
  r.half_width = 0.5 * (r.upper - r.lower);
}

void CheckDiversityOptions(const DiversityOptions &o, std::size_t contexts) {
  if (o.n_samples < 3) throw InvalidInput("diversity: n_samples must be >= 3");
  if (!(o.temperature >= 0.0) || !std::isfinite(o.temperature))
    throw InvalidInput("diversity: temperature must be finite and >= 0");
  if (o.bootstrap_rounds < 1) throw InvalidInput("diversity: bootstrap_rounds must be >= 1");
  if (contexts == 0) throw InvalidInput("diversity: no contexts");
}

}  // namespace

DiversityReport Diversity(const PredictorModel &model, const std::vector<ContextSequence> &contexts,
                          const DiversityOptions &options) {
  CheckDiversityOptions(options, contexts.size());
  DiversityReport r;
  std::vector<Matrix> samples(options.n_samples);
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    Rng rng(MixSeed(options.seed, c));
    for (Matrix &s : samples)
      s = SampleSequence(model, contexts[c], rng, options.temperature).embeddings;
    r.per_context.push_back(MeanPairwiseDistance(samples));
  }
  Summarize(r, options);
  return r;
}

std::pair<DiversityReport, DiversityReport> CompareDiversity(
    const PredictorModel &a, const PredictorModel &b,
    const std::vector<ContextSequence> &contexts, const DiversityOptions &options) {
  if (a.config().embedding_dim != b.config().embedding_dim)
    throw InvalidInput("diversity: models disagree on the embedding dimension");
  if (a.config().context_dim != b.config().context_dim)
    throw InvalidInput("diversity: models disagree on the context dimension");
  return {Diversity(a, contexts, options), Diversity(b, contexts, options)};
}

void WriteDiversityCsv(std::ostream &out, const std::string &label, const DiversityReport &r) {
  for (std::size_t c = 0; c < r.per_context.size(); ++c)
    out << label << ',' << c << ',' << FormatNumber(r.per_context[c]) << '\n';
}

// ---------------------------------------------------------------- gradcheck

namespace {

double RelErr(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

Vector Differences(const std::function<double(const Vector &)> &f, Vector x, double h) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x(i);
    x(i) = saved + h;
    const double up = f(x);
    x(i) = saved - h;
    const double down = f(x);
    x(i) = saved;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

Matrix Gaussian(Index rows, Index cols, Rng &rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Head <-> flat vector [alpha, m, v].
Vector Flatten(const RawMdnHead &h) {
  Vector out(h.alpha.size() + 2 * h.m.size());
  out << h.alpha, Eigen::Map<const Vector>(h.m.data(), h.m.size()),
      Eigen::Map<const Vector>(h.v.data(), h.v.size());
  return out;
}

RawMdnHead Unflatten(const Vector &x, Index M, Index D) {
  RawMdnHead h(M, D);
  h.alpha = x.head(M);
  h.m = Eigen::Map<const Matrix>(x.data() + M, M, D);
  h.v = Eigen::Map<const Matrix>(x.data() + M + M * D, M, D);
  return h;
}

}  // namespace

bool GradcheckReport::pass() const {
  return std::all_of(groups.begin(), groups.end(), [](const GroupError &g) { return g.pass(); });
}

GradcheckReport Gradcheck(const GradcheckOptions &options) {
  if (options.mixture_instances < 1 || options.sequence_instances < 1)
    throw InvalidInput("gradcheck: instance counts must be >= 1");
  if (!(options.step > 0.0)) throw InvalidInput("gradcheck: step must be > 0");
  GradcheckReport report;
  Rng rng(options.seed);

  // Mixture NLL, groups gmm.alpha / gmm.m / gmm.v.
  const Index M = 3, D = 2;
  double worst[3] = {0.0, 0.0, 0.0};
  for (int n = 0; n < options.mixture_instances; ++n) {
    RawMdnHead head(M, D);
    head.alpha = Gaussian(M, 1, rng, 1.0);
    head.m = Gaussian(M, D, rng, 1.0);
    head.v = Gaussian(M, D, rng, 0.5);
    const Vector y = Gaussian(D, 1, rng, 1.5);
    HeadGradient g = NllGrad(head, y);
    if (options.corrupt_group == "gmm.alpha") g.alpha = -g.alpha;
    if (options.corrupt_group == "gmm.m") g.m = -g.m;
    if (options.corrupt_group == "gmm.v") g.v = -g.v;
    const Vector analytic = Flatten(g);
    const Vector fd = Differences(
        [&](const Vector &x) { return Nll(Activate(Unflatten(x, M, D)), y); }, Flatten(head),
        options.step);
    for (Index i = 0; i < analytic.size(); ++i) {
      const int group = i < M ? 0 : (i < M + M * D ? 1 : 2);
      worst[group] = std::max(worst[group], RelErr(analytic(i), fd(i)));
    }
  }
  const char *names[3] = {"gmm.alpha", "gmm.m", "gmm.v"};
  for (int k = 0; k < 3; ++k)
    report.groups.push_back({names[k], worst[k], options.mixture_threshold});

  // Full sequence model, grouped by tensor name prefix.
  PredictorConfig pcfg;
  pcfg.context_dim = 4;
  pcfg.embedding_dim = 2;
  pcfg.num_components = 2;
  pcfg.conv_channels = 3;
  pcfg.recurrent_width = 5;
  pcfg.dropout_rate = 0.0;
  std::vector<GroupError> seq;
  for (int n = 0; n < options.sequence_instances; ++n) {
    PredictorModel model = PredictorModel::Initialized(pcfg, MixSeed(options.seed, n));
    model.params().values() += Gaussian(model.params().size(), 1, rng, 0.3);
    const ContextSequence ctx{Gaussian(3, pcfg.context_dim, rng, 1.0)};
    const ProsodySequence target{Gaussian(3, pcfg.embedding_dim, rng, 1.0)};
    SequenceLossGrad lg = SequenceGrad(model, ctx, target);
    const Vector fd = Differences(
        [&](const Vector &x) {
          PredictorModel m = model;
          m.params().values() = x;
          return SequenceNll(m, ctx, target);
        },
        model.params().values(), options.step);
    for (const TensorInfo &t : model.params().tensors()) {
      const std::string group = t.group();
      auto it = std::find_if(seq.begin(), seq.end(),
                             [&](const GroupError &g) { return g.group == group; });
      if (it == seq.end()) {
        seq.push_back({group, 0.0, options.sequence_threshold});
        it = seq.end() - 1;
      }
      const double sign = group == options.corrupt_group ? -1.0 : 1.0;
      for (Index i = t.offset; i < t.offset + t.size(); ++i)
        it->max_relative_error =
            std::max(it->max_relative_error, RelErr(sign * lg.grad.values()(i), fd(i)));
    }
  }
  report.groups.insert(report.groups.end(), seq.begin(), seq.end());

  RawMdnHead single(1, 1);
  single.alpha(0) = 0.7;
  single.m(0, 0) = -0.3;
  single.v(0, 0) = 0.2;
  report.single_component_alpha_grad = NllGrad(single, Vector::Constant(1, 1.1)).alpha(0);
  return report;
}

}  // namespace pmdn
