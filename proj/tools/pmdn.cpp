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

// Command-line driver.
//
//   pmdn generate     --count N --out corpus.bin
//   pmdn train        --corpus corpus.bin --components M --out model.mdnp
//   pmdn train-joint  --corpus corpus.bin --out prefix     (prefix.mdne/.mdnp/.mdnr)
//   pmdn sweep        --corpus train.bin --heldout held.bin --sweep 1,10,20 --out sweep.csv
//   pmdn sample       --model model.mdnp --corpus held.bin --out samples.csv
//   pmdn diversity    --model a.mdnp --model-b b.mdnp --corpus held.bin --out div.csv
//   pmdn gradcheck
//
// Every option may also come from --config FILE, one "key = value" per line
// with '#' comments; keys are the long option names without dashes.
// Exit status: 0 success, 1 failed check or diverged training, 2 bad input.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pmdn/checkpoints.hpp"
#include "pmdn/eval.hpp"
#include "pmdn/io.hpp"
#include "pmdn/joint.hpp"

namespace {

using namespace pmdn;

constexpr int kExitFailed = 1;
constexpr int kExitInvalid = 2;

struct Settings {
  std::uint64_t seed = 1;
  std::string out;
  bool single_thread = false;
  double temperature = 1.0;

  GeneratorSpec spec;
  int count = 2000;
  std::uint64_t first_index = 0;

  PredictorConfig predictor;
  Schedule schedule;
  std::vector<int> sweep{1, 10, 20};

  std::string corpus, heldout, model, model_b;
  int n_samples = 16;
  int max_contexts = 0;  // 0: all
  double beta = 0.02;
  bool zero_embeddings = false;
  std::string corrupt;
};

void AddOptions(CLI::App &app, Settings &s) {
  app.set_config("--config", "", "key = value configuration file");
  app.add_option("--seed", s.seed, "random seed");
  app.add_option("--out", s.out, "output file (or prefix for train-joint)");
  app.add_flag("--single-thread", s.single_thread, "run sweep entries sequentially");
  app.add_option("--temperature", s.temperature, "sampling temperature")->check(
      CLI::NonNegativeNumber);

  app.add_option("--count", s.count, "sequences to generate");
  app.add_option("--first-index", s.first_index, "index of the first generated sequence");
  app.add_option("--modes", s.spec.n_modes, "prosody modes of the generator");
  app.add_option("--embedding-dim", s.spec.embedding_dim, "prosody embedding size D");
  app.add_option("--context-dim", s.spec.context_dim, "context state size H");
  app.add_option("--min-length", s.spec.min_length, "shortest sequence");
  app.add_option("--max-length", s.spec.max_length, "longest sequence");
  app.add_option("--separation", s.spec.separation, "mode spread in noise units");
  app.add_option("--noise", s.spec.noise, "within-mode standard deviation");
  app.add_option("--classes", s.spec.n_classes, "phoneme classes");
  app.add_option("--mel-channels", s.spec.mel_channels, "segment channels F");
  app.add_option("--anisotropy", s.spec.anisotropy, "minor/major axis ratio of a mode");
  app.add_option("--persistence", s.spec.persistence, "logit bonus for repeating a mode");

  app.add_option("--components", s.predictor.num_components, "mixture components M");
  app.add_option("--conv-channels", s.predictor.conv_channels, "predictor conv channels");
  app.add_option("--recurrent-width", s.predictor.recurrent_width, "predictor GRU width");
  app.add_option("--dropout", s.predictor.dropout_rate, "predictor dropout rate");
  app.add_option("--epochs", s.schedule.epochs, "training epochs");
  app.add_option("--learning-rate", s.schedule.learning_rate, "Adam step size");
  app.add_option("--batch-size", s.schedule.batch_size, "sequences per step");
  app.add_option("--sweep", s.sweep, "component counts for sweep")->delimiter(',');

  app.add_option("--corpus", s.corpus, "corpus file");
  app.add_option("--heldout", s.heldout, "held-out corpus file");
  app.add_option("--model", s.model, "predictor checkpoint");
  app.add_option("--model-b", s.model_b, "second predictor checkpoint");
  app.add_option("--n-samples", s.n_samples, "samples per context");
  app.add_option("--max-contexts", s.max_contexts, "use at most this many contexts");
  app.add_option("--beta", s.beta, "weight of the prediction loss");
  app.add_flag("--zero-embeddings", s.zero_embeddings, "ablation: zero every embedding");
  app.add_option("--corrupt", s.corrupt, "gradcheck fault injection group");
}

std::string RequireOut(const Settings &s) {
  if (s.out.empty()) throw InvalidInput("--out is required");
  return s.out;
}

SyntheticCorpus RequireCorpus(const std::string &path, const char *flag) {
  if (path.empty()) throw InvalidInput(std::string(flag) + " is required");
  return LoadCorpus(path);
}

// Writes to --out when given, stdout otherwise.
void Emit(const Settings &s, const std::string &text) {
  if (s.out.empty()) {
    std::cout << text;
  } else {
    WriteFileBytes(s.out, text);
  }
}

PredictorConfig PredictorFor(const Settings &s, const GeneratorSpec &spec) {
  PredictorConfig p = s.predictor;
  p.context_dim = spec.context_dim;
  p.embedding_dim = spec.embedding_dim;
  return p;
}

int CmdGenerate(const Settings &s) {
  GeneratorSpec spec = s.spec;
  spec.seed = s.seed;
  if (s.count < 1) throw InvalidInput("--count must be >= 1");
  const SyntheticCorpus corpus = Generate(spec, s.count, s.first_index);
  SaveCorpus(RequireOut(s), corpus);
  double ll = 0.0;
  Index phonemes = 0;
  for (const CorpusItem &item : corpus.items) {
    ll += TrueLogLik(item);
    phonemes += item.length();
  }
  std::cout << "sequences " << corpus.items.size() << "\nphonemes " << phonemes
            << "\ntrue_loglik_per_phoneme " << FormatNumber(ll / phonemes) << '\n';
  return 0;
}

int CmdTrain(const Settings &s) {
  const std::string out = RequireOut(s);
  const SyntheticCorpus corpus = RequireCorpus(s.corpus, "--corpus");
  PredictorModel model =
      PredictorModel::Initialized(PredictorFor(s, corpus.spec), MixSeed(s.seed, 2));
  Schedule schedule = s.schedule;
  schedule.seed = s.seed;
  const std::vector<SequencePair> pairs = PredictorPairs(corpus);
  const TrainTrace trace = TrainPredictor(model, pairs, schedule);
  SavePredictor(out, model);
  std::cout << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.epoch_loss.size(); ++i)
    std::cout << i + 1 << ',' << FormatNumber(trace.epoch_loss[i]) << '\n';
  std::cout << "# train_loglik_per_phoneme " << FormatNumber(MeanLogLikPerPhoneme(model, pairs))
            << '\n';
  return 0;
}

int CmdTrainJoint(const Settings &s) {
  const std::string prefix = RequireOut(s);
  const SyntheticCorpus corpus = RequireCorpus(s.corpus, "--corpus");
  JointModels models = MakeJointModels(corpus.spec, s.predictor, s.seed);
  Schedule schedule = s.schedule;
  schedule.seed = s.seed;
  JointOptions options;
  options.beta = s.beta;
  options.zero_embeddings = s.zero_embeddings;
  const std::vector<JointItem> items = JointItems(corpus);
  const JointTrace trace = TrainJoint(models, items, schedule, options);
  SaveExtractor(prefix + ".mdne", models.extractor);
  SavePredictor(prefix + ".mdnp", models.predictor);
  SaveReconstructor(prefix + ".mdnr", models.reconstructor);
  std::cout << "epoch,total,l_pp,l_rec\n";
  for (std::size_t i = 0; i < trace.total.size(); ++i)
    std::cout << i + 1 << ',' << FormatNumber(trace.total[i]) << ','
              << FormatNumber(trace.l_pp[i]) << ',' << FormatNumber(trace.l_rec[i]) << '\n';
  if (!s.heldout.empty()) {
    const std::vector<JointItem> held = JointItems(LoadCorpus(s.heldout));
    const JointLossReport r = EvaluateJoint(models, held, options);
    std::cout << "# heldout total " << FormatNumber(r.total) << " l_pp " << FormatNumber(r.l_pp)
              << " l_rec " << FormatNumber(r.l_rec) << '\n';
  }
  return 0;
}

int CmdSweep(const Settings &s) {
  const SyntheticCorpus train = RequireCorpus(s.corpus, "--corpus");
  const SyntheticCorpus held = RequireCorpus(s.heldout, "--heldout");
  SweepConfig cfg;
  cfg.components = s.sweep;
  cfg.predictor = PredictorFor(s, train.spec);
  cfg.schedule = s.schedule;
  cfg.schedule.seed = s.seed;
  cfg.single_thread = s.single_thread;
  const SweepResult result = RunSweep(train, held, cfg);
  std::ostringstream csv;
  WriteSweepCsv(csv, result);
  Emit(s, csv.str());

  int status = 0;
  for (const SweepEntry &e : result.entries) {
    std::cerr << "M=" << e.num_components << " seconds " << FormatNumber(e.seconds) << '\n';
    if (e.diverged) {
      std::cerr << "M=" << e.num_components << " diverged: " << *e.diverged << '\n';
      status = kExitFailed;
      continue;
    }
    const CeilingCheck c = CompareToTruth(*e.model, held);
    std::cerr << "M=" << e.num_components << " heldout " << FormatNumber(c.model_loglik)
              << " truth " << FormatNumber(c.true_loglik) << " se "
              << FormatNumber(c.difference_se) << '\n';
  }
  return status;
}

int CmdSample(const Settings &s) {
  if (s.model.empty()) throw InvalidInput("--model is required");
  const PredictorModel model = LoadPredictor(s.model);
  const SyntheticCorpus corpus = RequireCorpus(s.corpus, "--corpus");
  if (model.config().context_dim != corpus.spec.context_dim ||
      model.config().embedding_dim != corpus.spec.embedding_dim)
    throw InvalidInput("model and corpus dimensions disagree");
  const SyntheticProcess truth(corpus.spec);
  const std::size_t n = s.max_contexts > 0
                            ? std::min<std::size_t>(s.max_contexts, corpus.items.size())
                            : corpus.items.size();
  std::ostringstream csv;
  csv << "sequence,step";
  for (int d = 0; d < model.config().embedding_dim; ++d) csv << ",e" << d;
  csv << ",true_log_density\n";
  for (std::size_t i = 0; i < n; ++i) {
    const CorpusItem &item = corpus.items[i];
    Rng rng(MixSeed(s.seed, i));
    const ProsodySequence e = SampleSequence(model, item.context, rng, s.temperature);
    const Vector ld = truth.StepLogDensity(item.classes, e.embeddings);
    for (Index k = 0; k < e.length(); ++k) {
      csv << i << ',' << k;
      for (Index d = 0; d < e.embeddings.cols(); ++d)
        csv << ',' << FormatNumber(e.embeddings(k, d));
      csv << ',' << FormatNumber(ld(k)) << '\n';
    }
  }
  Emit(s, csv.str());
  return 0;
}

int CmdDiversity(const Settings &s) {
  if (s.model.empty() || s.model_b.empty())
    throw InvalidInput("--model and --model-b are required");
  const PredictorModel a = LoadPredictor(s.model);
  const PredictorModel b = LoadPredictor(s.model_b);
  const SyntheticCorpus corpus = RequireCorpus(s.corpus, "--corpus");
  std::vector<ContextSequence> contexts;
  for (const CorpusItem &item : corpus.items) {
    if (s.max_contexts > 0 && static_cast<int>(contexts.size()) == s.max_contexts) break;
    contexts.push_back(item.context);
  }
  DiversityOptions opt;
  opt.n_samples = s.n_samples;
  opt.temperature = s.temperature;
  opt.seed = s.seed;
  const auto [ra, rb] = CompareDiversity(a, b, contexts, opt);
  std::ostringstream csv;
  csv << "model,context,distance\n";
  WriteDiversityCsv(csv, "a", ra);
  WriteDiversityCsv(csv, "b", rb);
  Emit(s, csv.str());
  for (const auto &[label, r] : {std::pair{"a", &ra}, std::pair{"b", &rb}})
    std::cout << label << " mean " << FormatNumber(r->mean_distance) << " ci ["
              << FormatNumber(r->lower) << ", " << FormatNumber(r->upper) << "] half_width "
              << FormatNumber(r->half_width) << '\n';
  return 0;
}

int CmdGradcheck(const Settings &s) {
  GradcheckOptions opt;
  opt.seed = s.seed;
  opt.corrupt_group = s.corrupt;
  const GradcheckReport report = Gradcheck(opt);
  std::ostringstream text;
  text << "group,max_relative_error,threshold,status\n";
  for (const GroupError &g : report.groups)
    text << g.group << ',' << FormatNumber(g.max_relative_error) << ','
         << FormatNumber(g.threshold) << ',' << (g.pass() ? "pass" : "FAIL") << '\n';
  text << "# single-component alpha gradient " << FormatNumber(report.single_component_alpha_grad)
       << '\n';
  Emit(s, text.str());
  for (const GroupError &g : report.groups)
    if (!g.pass()) std::cerr << "gradient check failed for group " << g.group << '\n';
  return report.pass() ? 0 : kExitFailed;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Mixture density prosody models on synthetic corpora"};
  Settings s;
  AddOptions(app, s);
  app.require_subcommand(1);
  std::function<int(const Settings &)> command;
  auto verb = [&](const char *name, const char *help, int (*fn)(const Settings &)) {
    app.add_subcommand(name, help)->fallthrough()->callback([&, fn] { command = fn; });
  };
  verb("generate", "write a synthetic corpus", CmdGenerate);
  verb("train", "train one predictor", CmdTrain);
  verb("train-joint", "train extractor, predictor and reconstructor jointly", CmdTrainJoint);
  verb("sweep", "train one predictor per component count", CmdSweep);
  verb("sample", "sample prosody sequences for corpus contexts", CmdSample);
  verb("diversity", "compare sample diversity of two predictors", CmdDiversity);
  verb("gradcheck", "finite-difference audit of the analytic gradients", CmdGradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }
  try {
    return command(s);
  } catch (const InvalidInput &e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const TrainingDiverged &e) {
    std::cerr << e.what() << '\n';
    return kExitFailed;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}
