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

// Expectation-maximization for diagonal GMMs. Used as a gradient-free
// reference for the mixture density network likelihoods.

#ifndef PMDN_EM_HPP_
#define PMDN_EM_HPP_

#include <vector>

#include "pmdn/gmm.hpp"

namespace pmdn {

struct EmConfig {
  int num_components = 1;
  int max_iters = 200;
  double tolerance = 1e-8;  // on the change of mean log-likelihood
  double variance_floor = kVarianceFloor;
  std::uint64_t seed = 1;

  void Check() const;
};

struct EmResult {
  GmmParams gmm;
  // Mean log-likelihood of the data under the parameters at each iteration;
  // the last entry belongs to `gmm`.
  std::vector<double> trace;
  int reseeds = 0;
};

// data is N x D, one observation per row. k-means++ seeding, then E/M
// alternation until the mean log-likelihood gains less than the tolerance.
// A component whose total responsibility vanishes is re-seeded at the
// worst-explained point; the trace is only guaranteed monotone between
// re-seeds.
EmResult EmFit(const ConstMatrixRef &data, const EmConfig &cfg);

// Mean log-likelihood of the rows of data under gmm.
double MeanLogLik(const GmmParams &gmm, const ConstMatrixRef &data);

}  // namespace pmdn

#endif  // PMDN_EM_HPP_
