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

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pmdn/em.hpp"

using namespace pmdn;
using namespace pmdn::testing;

namespace {

Matrix TwoModeData(int n, std::uint64_t seed, double sep = 3.0) {
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal;
  Matrix x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = (coin(rng) ? sep : -sep) + normal(rng);
  return x;
}

bool Monotone(const std::vector<double> &trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] < trace[i - 1] - 1e-9) return false;
  return true;
}

}  // namespace

TEST_CASE("em: single component is the closed-form ML estimate") {
  Rng rng(1);
  const Matrix data = RandomMatrix(200, 3, rng, 2.0);
  EmConfig cfg;
  const EmResult fit = EmFit(data, cfg);
  const Vector mean = data.colwise().mean().transpose();
  const Vector var =
      (data.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  CHECK((Vector(fit.gmm.means.row(0).transpose()) - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((Vector(fit.gmm.variances.row(0).transpose()) - var).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fit.gmm.weights(0) == 1.0);
}

TEST_CASE("em: recovers a two-mode 1-D mixture") {
  const Matrix data = TwoModeData(5000, 17);
  EmConfig cfg;
  cfg.num_components = 2;
  cfg.seed = 4;
  const EmResult fit = EmFit(data, cfg);
  const double lo = fit.gmm.means.col(0).minCoeff(), hi = fit.gmm.means.col(0).maxCoeff();
  CHECK(std::abs(lo + 3.0) < 0.15);
  CHECK(std::abs(hi - 3.0) < 0.15);
  CHECK(Monotone(fit.trace));
  CHECK(fit.reseeds == 0);
}

TEST_CASE("em: identical points clamp to the variance floor") {
  const Matrix data = Matrix::Constant(50, 2, 1.25);
  EmConfig cfg;
  cfg.num_components = 3;
  const EmResult fit = EmFit(data, cfg);
  CHECK((fit.gmm.variances.array() == cfg.variance_floor).all());
  CHECK((fit.gmm.means.array() - 1.25).abs().maxCoeff() < 1e-12);
  CHECK(std::abs(fit.gmm.weights.sum() - 1.0) < 1e-12);
}

TEST_CASE("em: input validation") {
  EmConfig cfg;
  cfg.num_components = 5;
  CHECK_THROWS_AS(EmFit(Matrix::Zero(4, 2), cfg), InvalidInput);
  cfg.num_components = 1;
  cfg.tolerance = 0.0;
  CHECK_THROWS_AS(EmFit(Matrix::Zero(4, 2), cfg), InvalidInput);
}

TEST_CASE("em: empty components are re-seeded") {
  // Two tight clusters, max one iteration per restart: force a component with
  // no mass by placing it far away after initialization is impossible through
  // the public API, so use many components on few distinct points instead.
  Matrix data(6, 1);
  data << 0.0, 0.0, 0.0, 10.0, 10.0, 10.0;
  EmConfig cfg;
  cfg.num_components = 4;
  cfg.max_iters = 20;
  const EmResult fit = EmFit(data, cfg);
  CHECK(fit.gmm.weights.allFinite());
  CHECK(std::abs(fit.gmm.weights.sum() - 1.0) < 1e-12);
  CHECK(fit.gmm.means.allFinite());
}

TEST_CASE("em: properties on seeded multi-modal data") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix data = TwoModeData(1000, 100 + seed);
    EmConfig one;
    one.seed = seed;
    EmConfig two = one;
    two.num_components = 2;
    const EmResult f1 = EmFit(data, one), f2 = EmFit(data, two);
    CHECK(Monotone(f2.trace));
    CHECK(f2.trace.back() > f1.trace.back());
    CHECK(std::abs(MeanLogLik(f2.gmm, data) - f2.trace.back()) < 1e-9);
    CHECK(std::abs(MeanLogLik(f1.gmm, data) - f1.trace.back()) < 1e-9);
  }
}
