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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Details go to stderr.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include "pmdn/checkpoints.hpp"
#include "pmdn/em.hpp"
#include "pmdn/eval.hpp"
#include "pmdn/io.hpp"
#include "pmdn/joint.hpp"

#ifndef PMDN_CLI_PATH
#error "PMDN_CLI_PATH must name the command-line binary"
#endif

namespace {

using namespace pmdn;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::ostream &log() { return std::cerr; }

Matrix Gaussian(Index rows, Index cols, Rng &rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// ---------------------------------------------------------------- 1

bool GradientCorrectness() {
  const auto start = Clock::now();
  GradcheckOptions opt;  // 100 mixture and 20 sequence instances, step 1e-5
  const GradcheckReport report = Gradcheck(opt);
  const double secs = Seconds(start);
  for (const GroupError &g : report.groups)
    log() << "  " << g.group << " max rel err " << g.max_relative_error << " (limit "
          << g.threshold << ")\n";
  log() << "  runtime " << secs << " s\n";
  return report.pass() && report.single_component_alpha_grad == 0.0 && secs < 60.0 &&
         opt.mixture_instances >= 100 && opt.sequence_instances >= 20;
}

// ---------------------------------------------------------------- 2

double NaiveLogDensity(const GmmParams &g, const Vector &y) {
  double p = 0.0;
  for (Index j = 0; j < g.NumComponents(); ++j) {
    double c = g.weights(j);
    for (Index d = 0; d < g.Dim(); ++d) {
      const double v = g.variances(j, d), r = y(d) - g.means(j, d);
      c *= std::exp(-0.5 * r * r / v) / std::sqrt(2.0 * std::numbers::pi * v);
    }
    p += c;
  }
  return std::log(p);
}

bool LikelihoodConsistency() {
  Rng rng(21);
  double worst = 0.0;
  int tested = 0;
  for (int n = 0; n < 2000; ++n) {
    const Index M = 1 + n % 6, D = 1 + n % 4;
    RawMdnHead head(M, D);
    head.alpha = Gaussian(M, 1, rng);
    head.m = Gaussian(M, D, rng);
    head.v = Gaussian(M, D, rng, 0.5);
    const GmmParams g = Activate(head);
    const Vector y = Gaussian(D, 1, rng, 2.0);
    const double naive = NaiveLogDensity(g, y);
    if (!std::isfinite(naive) || naive < -600.0) continue;  // underflowing instance
    worst = std::max(worst, std::abs(LogDensity(g, y) - naive));
    ++tested;
  }
  log() << "  log-sum-exp vs naive: " << tested << " instances, max abs diff " << worst << '\n';

  GeneratorSpec spec;
  spec.seed = 8;
  const SyntheticCorpus corpus = Generate(spec, 200);
  Index rows = 0;
  for (const CorpusItem &item : corpus.items) rows += item.length();
  Matrix data(rows, spec.embedding_dim);
  rows = 0;
  for (const CorpusItem &item : corpus.items) {
    data.middleRows(rows, item.length()) = item.truth.embeddings;
    rows += item.length();
  }
  double em_worst = 0.0;
  for (int M : {1, 2, 4, 8}) {
    EmConfig cfg;
    cfg.num_components = M;
    cfg.seed = static_cast<std::uint64_t>(M);
    const EmResult fit = EmFit(data, cfg);
    em_worst = std::max(em_worst, std::abs(fit.trace.back() - MeanLogLik(fit.gmm, data)));
  }
  log() << "  EM final trace vs evaluation: max abs diff " << em_worst << '\n';
  return tested >= 1000 && worst <= 1e-10 && em_worst <= 1e-9;
}

// ---------------------------------------------------------------- 3 and 4

struct SweepOutcome {
  SweepResult result;
  SyntheticCorpus heldout;
  double seconds = 0.0;
};

SweepOutcome RunComponentSweep() {
  GeneratorSpec spec;  // 4 modes
  spec.seed = 2024;
  const SyntheticCorpus train = Generate(spec, 4000);
  SweepOutcome out{{}, Generate(spec, 1000, 1u << 20), 0.0};
  SweepConfig cfg;
  cfg.components = {1, 10, 20};
  cfg.predictor.context_dim = spec.context_dim;
  cfg.predictor.embedding_dim = spec.embedding_dim;
  cfg.schedule.epochs = 100;
  cfg.schedule.learning_rate = 1e-3;
  cfg.schedule.batch_size = 16;
  cfg.schedule.seed = 7;
  const auto start = Clock::now();
  out.result = RunSweep(train, out.heldout, cfg);
  out.seconds = Seconds(start);
  return out;
}

bool ComponentSweep(const SweepOutcome &sweep) {
  double ll[3];
  bool ok = true;
  for (int i = 0; i < 3; ++i) {
    const SweepEntry &e = sweep.result.entries[i];
    if (e.diverged) {
      log() << "  M=" << e.num_components << " diverged: " << *e.diverged << '\n';
      return false;
    }
    const CeilingCheck c = CompareToTruth(*e.model, sweep.heldout);
    ll[i] = e.heldout_loglik.back();
    log() << "  M=" << e.num_components << " heldout " << ll[i] << " train "
          << e.train_loglik.back() << " (gap " << e.train_loglik.back() - ll[i] << ") truth "
          << c.true_loglik << " se " << c.difference_se << " seconds " << e.seconds << '\n';
    ok = ok && c.within(3.0);
  }
  const double gain_low = ll[1] - ll[0], gain_high = ll[2] - ll[1];
  log() << "  gain 1->10 " << gain_low << ", gain 10->20 " << gain_high << ", total "
        << sweep.seconds << " s\n";
  return ok && ll[2] > ll[1] && ll[1] > ll[0] && gain_high < gain_low &&
         sweep.seconds < 30.0 * 60.0;
}

bool DiversityComparison(const SweepOutcome &sweep) {
  const SweepEntry &single = sweep.result.entries[0];
  const SweepEntry &mixture = sweep.result.entries[2];
  if (!single.model || !mixture.model) return false;
  std::vector<ContextSequence> contexts;
  for (const CorpusItem &item : sweep.heldout.items) contexts.push_back(item.context);
  DiversityOptions opt;
  opt.n_samples = 16;
  opt.seed = 99;
  const auto [m20, m1] = CompareDiversity(*mixture.model, *single.model, contexts, opt);
  log() << "  M=20 " << m20.mean_distance << " [" << m20.lower << ", " << m20.upper << "]\n"
        << "  M=1  " << m1.mean_distance << " [" << m1.lower << ", " << m1.upper << "]\n"
        << "  contexts " << contexts.size() << '\n';
  return contexts.size() >= 100 && m20.mean_distance > m1.mean_distance && m20.lower > m1.upper;
}

// ---------------------------------------------------------------- 5

bool JointStructure() {
  GeneratorSpec spec;
  PredictorConfig pcfg;
  pcfg.num_components = 4;
  bool ok = true;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    JointModels models = MakeJointModels(spec, pcfg, seed);
    std::vector<JointItem> batch;
    for (Index K : {4, 7, 2}) {
      JointItem item{{Gaussian(K, spec.context_dim, rng)}, {}, Gaussian(K, spec.mel_channels, rng)};
      for (Index k = 0; k < K; ++k)
        item.segments.push_back(Gaussian(1 + (k * 3 + seed) % 8, spec.mel_channels, rng));
      batch.push_back(std::move(item));
    }
    JointOptions opt;
    opt.beta = 0.02;
    JointGradients g = JointGradients::ZerosLike(models);
    JointGradients g0 = JointGradients::ZerosLike(models);
    Rng r1(seed), r2(seed);
    const JointLossReport r = JointLoss(models, batch, opt, Mode::kEval, &r1, &g);

    // Independent evaluation of both terms by separate calls.
    double l_pp = 0.0;
    double sq = 0.0, entries = 0.0;
    const ParameterSet &rp = models.reconstructor.params();
    for (const JointItem &item : batch) {
      const ProsodySequence e = Extract(models.extractor, item.segments, Mode::kEval);
      l_pp += SequenceNll(models.predictor, item.context, e);
      Matrix u = (item.context.states + e.embeddings * rp[Reconstructor::kProjWeight].transpose()) *
                 rp[Reconstructor::kDecoderWeight].transpose();
      u.rowwise() += rp.Col(Reconstructor::kDecoderBias).transpose();
      sq += (u - item.target).squaredNorm();
      entries += static_cast<double>(u.size());
    }
    l_pp /= static_cast<double>(batch.size());
    const double independent = 0.02 * l_pp + sq / entries;
    worst = std::max(worst, std::abs(r.total - independent));

    // Stop gradient: zero contribution from L_PP, and the extractor gradient
    // is the same with or without the prediction term.
    JointOptions none = opt;
    none.beta = 0.0;
    JointLoss(models, batch, none, Mode::kEval, &r2, &g0);
    ok = ok && (g.extractor_from_pp.values().array() == 0.0).all() &&
         g.extractor.values() == g0.extractor.values() &&
         (g.extractor.values().array() != 0.0).any() && r.beta == 0.02;
  }
  log() << "  max |total - (0.02 L_PP + L_REC)| " << worst << '\n';
  return ok && worst <= 1e-12;
}

// ---------------------------------------------------------------- 6

bool ReconstructionAblation() {
  GeneratorSpec spec;
  spec.seed = 33;
  const std::vector<JointItem> train = JointItems(Generate(spec, 400));
  const std::vector<JointItem> held = JointItems(Generate(spec, 200, 1u << 20));
  PredictorConfig pcfg;
  Schedule schedule;
  schedule.epochs = 10;
  schedule.learning_rate = 3e-3;
  schedule.batch_size = 16;
  schedule.seed = 5;
  double final_train[2], final_held[2];
  for (int ablate = 0; ablate < 2; ++ablate) {
    JointModels models = MakeJointModels(spec, pcfg, 5);
    JointOptions opt;
    opt.zero_embeddings = ablate == 1;
    const JointTrace trace = TrainJoint(models, train, schedule, opt);
    final_train[ablate] = trace.l_rec.back();
    final_held[ablate] = EvaluateJoint(models, held, opt).l_rec;
  }
  log() << "  final L_REC with embeddings: train " << final_train[0] << " heldout "
        << final_held[0] << "\n  final L_REC zeroed:          train " << final_train[1]
        << " heldout " << final_held[1] << '\n';
  return final_train[0] < final_train[1] && final_held[0] < final_held[1];
}

// ---------------------------------------------------------------- 7

struct RunOutput {
  int status = -1;
  std::string stdout_text;
};

RunOutput RunCli(const std::string &args, const std::filesystem::path &dir) {
  const std::filesystem::path out = dir / "stdout.txt";
  const std::string cmd = std::string("cd '") + dir.string() + "' && '" + PMDN_CLI_PATH + "' " +
                          args + " > '" + out.string() + "' 2>/dev/null";
  RunOutput r;
  r.status = std::system(cmd.c_str());
  std::ifstream in(out, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.stdout_text = ss.str();
  return r;
}

std::string Slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool CliDeterminism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "pmdn_acceptance_cli";
  fs::remove_all(root);
  const fs::path dirs[2] = {root / "a", root / "b"};
  struct Command {
    std::string args;
    std::vector<std::string> files;
  };
  const std::string small = " --count 40 --seed 11 --single-thread";
  const std::vector<Command> commands = {
      {"generate --out corpus.bin" + small, {"corpus.bin"}},
      {"generate --out held.bin --first-index 5000" + small, {"held.bin"}},
      {"train --corpus corpus.bin --components 3 --epochs 2 --out m3.mdnp --seed 4 "
       "--single-thread",
       {"m3.mdnp"}},
      {"train --corpus corpus.bin --components 1 --epochs 2 --out m1.mdnp --seed 4 "
       "--single-thread",
       {"m1.mdnp"}},
      {"train-joint --corpus corpus.bin --heldout held.bin --components 2 --epochs 2 --out joint "
       "--seed 4 --single-thread",
       {"joint.mdne", "joint.mdnp", "joint.mdnr"}},
      {"sweep --corpus corpus.bin --heldout held.bin --sweep 1,2 --epochs 2 --out sweep.csv "
       "--seed 4 --single-thread",
       {"sweep.csv"}},
      {"sample --model m3.mdnp --corpus held.bin --out samples.csv --seed 4 --single-thread",
       {"samples.csv"}},
      {"sample --model m1.mdnp --corpus held.bin --out zero.csv --temperature 0 --seed 4 "
       "--single-thread",
       {"zero.csv"}},
      {"diversity --model m3.mdnp --model-b m1.mdnp --corpus held.bin --out div.csv --seed 4 "
       "--single-thread",
       {"div.csv"}},
      {"gradcheck --seed 4 --single-thread --out grad.csv", {"grad.csv"}},
  };
  bool ok = true;
  for (const Command &c : commands) {
    RunOutput r[2];
    for (int k = 0; k < 2; ++k) {
      fs::create_directories(dirs[k]);
      r[k] = RunCli(c.args, dirs[k]);
    }
    bool same = r[0].status == 0 && r[1].status == 0 && r[0].stdout_text == r[1].stdout_text;
    for (const std::string &f : c.files) {
      const std::string a = Slurp(dirs[0] / f), b = Slurp(dirs[1] / f);
      same = same && !a.empty() && a == b;
    }
    log() << "  " << (same ? "identical" : "DIFFERENT") << ": "
          << c.args.substr(0, c.args.find(' ')) << " (" << c.files.front() << ")\n";
    ok = ok && same;
  }
  fs::remove_all(root);
  return ok;
}

// ---------------------------------------------------------------- 8

bool SamplingStatistics() {
  GmmParams g;
  g.weights = Vector(3);
  g.weights << 0.5, 0.3, 0.2;
  g.means = Matrix(3, 2);
  g.means << -2.0, 0.0, 1.0, 3.0, 4.0, -1.0;
  g.variances = Matrix(3, 2);
  g.variances << 1.0, 0.25, 0.5, 2.0, 0.1, 1.5;
  const int n = 100000;
  Rng rng(12345);
  Vector counts = Vector::Zero(3);
  Matrix draws(n, 2);
  for (int i = 0; i < n; ++i) {
    Index c;
    draws.row(i) = Sample(g, rng, 1.0, &c).transpose();
    counts(c) += 1.0;
  }
  bool ok = true;
  for (Index j = 0; j < 3; ++j) {
    const double p = g.weights(j), se = std::sqrt(p * (1.0 - p) / n);
    const double z = (counts(j) / n - p) / se;
    log() << "  component " << j << " frequency z " << z << '\n';
    ok = ok && std::abs(z) < 3.0;
  }
  for (Index d = 0; d < 2; ++d) {
    // Analytic mixture moments about the origin.
    double m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (Index j = 0; j < 3; ++j) {
      const double mu = g.means(j, d), v = g.variances(j, d), w = g.weights(j);
      m1 += w * mu;
      m2 += w * (mu * mu + v);
      m3 += w * (mu * mu * mu + 3.0 * mu * v);
      m4 += w * (std::pow(mu, 4) + 6.0 * mu * mu * v + 3.0 * v * v);
    }
    const double var = m2 - m1 * m1;
    const double mu4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * std::pow(m1, 4);
    const double mean_hat = draws.col(d).mean();
    const double var_hat = (draws.col(d).array() - mean_hat).square().sum() / (n - 1);
    const double z_mean = (mean_hat - m1) / std::sqrt(var / n);
    const double z_var = (var_hat - var) / std::sqrt((mu4 - var * var) / n);
    log() << "  dim " << d << " mean z " << z_mean << ", variance z " << z_var << '\n';
    ok = ok && std::abs(z_mean) < 3.0 && std::abs(z_var) < 3.0;
  }
  GmmParams single;
  single.weights = Vector::Ones(1);
  single.means = Matrix(1, 3);
  single.means << 0.1, -7.25, 1e-3;
  single.variances = Matrix(1, 3);
  single.variances << 2.0, 0.5, 9.0;
  for (int i = 0; i < 100; ++i)
    ok = ok && Sample(single, rng, 0.0) == Vector(single.means.row(0).transpose());
  return ok;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char *name, const std::function<bool()> &check) {
    log() << "[" << id << "] " << name << '\n';
    const auto start = Clock::now();
    bool pass = false;
    try {
      pass = check();
    } catch (const std::exception &e) {
      log() << "  exception: " << e.what() << '\n';
    }
    std::cout << (pass ? "PASS" : "FAIL") << "  " << id << "  " << name << "  ("
              << static_cast<int>(Seconds(start)) << " s)" << std::endl;
    if (!pass) ++failures;
  };

  report(1, "gradient correctness", GradientCorrectness);
  report(2, "likelihood consistency", LikelihoodConsistency);
  SweepOutcome sweep;
  bool sweep_ran = false;
  report(3, "component sweep ordering and truth ceiling", [&] {
    sweep = RunComponentSweep();
    sweep_ran = true;
    return ComponentSweep(sweep);
  });
  report(4, "sample diversity, 20 components vs 1", [&] {
    return sweep_ran && DiversityComparison(sweep);
  });
  report(5, "joint loss composition and stop gradient", JointStructure);
  report(6, "extracted embeddings aid reconstruction", ReconstructionAblation);
  report(7, "command-line determinism", CliDeterminism);
  report(8, "sampling statistics", SamplingStatistics);
  return failures == 0 ? 0 : 1;
}
