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

// Experiments on top of the models: component-count sweep, sample diversity
// and a finite-difference gradient audit.

#ifndef PMDN_EVAL_HPP_
#define PMDN_EVAL_HPP_

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pmdn/predictor.hpp"
#include "pmdn/synth.hpp"
#include "pmdn/training.hpp"

namespace pmdn {

// ---------------------------------------------------------------- sweep

struct SweepConfig {
  std::vector<int> components{1, 10, 20};  // strictly increasing
  PredictorConfig predictor;  // num_components is overridden per entry
  Schedule schedule;
  // One thread per entry unless set. Every entry uses the same schedule seed
  // and owns its model and streams, so results are identical either way.
  bool single_thread = true;
};

struct SweepEntry {
  int num_components = 0;
  std::uint64_t seed = 0;               // schedule seed, shared by all entries
  std::vector<double> train_loglik;     // mean per phoneme after each epoch
  std::vector<double> heldout_loglik;
  double seconds = 0.0;
  std::optional<std::string> diverged;  // message if training aborted
  std::optional<PredictorModel> model;  // final model unless diverged
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // ordered as SweepConfig::components
};

// Trains one predictor per component count on `train` and tracks mean
// log-likelihood per phoneme on both splits. A diverging entry is recorded
// and the sweep continues.
SweepResult RunSweep(const SyntheticCorpus &train, const SyntheticCorpus &heldout,
                     const SweepConfig &config);

// Header "M,epoch,split,loglik"; split is "train" or "heldout"; epochs count
// from 1.
void WriteSweepCsv(std::ostream &out, const SweepResult &result);

// Model log-likelihood against the generator's exact log-likelihood on the
// same sequences. Both are per phoneme; se is the standard error of the
// per-sequence difference, scaled the same way.
struct CeilingCheck {
  double model_loglik = 0.0;
  double true_loglik = 0.0;
  double difference_se = 0.0;
  bool within(double n_se = 3.0) const {
    return model_loglik <= true_loglik + n_se * difference_se;
  }
};
CeilingCheck CompareToTruth(const PredictorModel &model, const SyntheticCorpus &data);

// ---------------------------------------------------------------- diversity

struct DiversityReport {
  double mean_distance = 0.0;  // mean over contexts
  double half_width = 0.0;     // bootstrap 95% interval half-width
  double lower = 0.0, upper = 0.0;
  std::vector<double> per_context;
};

struct DiversityOptions {
  int n_samples = 16;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  int bootstrap_rounds = 2000;
};

// Mean pairwise Euclidean distance between n_samples sampled sequences per
// context (each sequence flattened to K*D values), averaged over contexts.
DiversityReport Diversity(const PredictorModel &model, const std::vector<ContextSequence> &contexts,
                          const DiversityOptions &options);

// Both models see the same per-context random streams. Throws InvalidInput
// when the models disagree on D or H.
std::pair<DiversityReport, DiversityReport> CompareDiversity(
    const PredictorModel &a, const PredictorModel &b,
    const std::vector<ContextSequence> &contexts, const DiversityOptions &options);

// Header "model,context,distance"; one row per context and model label.
void WriteDiversityCsv(std::ostream &out, const std::string &label, const DiversityReport &r);

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
  int mixture_instances = 100;
  int sequence_instances = 20;
  double mixture_threshold = 1e-4;
  double sequence_threshold = 1e-3;
  double step = 1e-5;
  std::uint64_t seed = 1;
  // Fault injection: negate the analytic gradient of this group.
  std::string corrupt_group;
};

struct GroupError {
  std::string group;
  double max_relative_error = 0.0;
  double threshold = 0.0;
  bool pass() const { return max_relative_error < threshold; }
};

struct GradcheckReport {
  std::vector<GroupError> groups;
  // Mixture-weight gradient of a single-component, one-dimensional head.
  double single_component_alpha_grad = 0.0;
  bool pass() const;
};

// Relative error is |a - b| / max(|a|, |b|, 1e-4).
GradcheckReport Gradcheck(const GradcheckOptions &options);

// Shortest round-trip decimal text, independent of locale.
std::string FormatNumber(double x);

}  // namespace pmdn

#endif  // PMDN_EVAL_HPP_
