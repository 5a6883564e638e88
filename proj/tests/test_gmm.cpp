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
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "pmdn/gmm.hpp"

using namespace pmdn;
using namespace pmdn::testing;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

GmmParams MakeGmm(std::vector<double> w, std::vector<double> mu, std::vector<double> var,
                  Index dim) {
  GmmParams g;
  const Index M = static_cast<Index>(w.size());
  g.weights = Eigen::Map<Vector>(w.data(), M);
  g.means = Eigen::Map<Matrix>(mu.data(), M, dim);
  g.variances = Eigen::Map<Matrix>(var.data(), M, dim);
  return g;
}

RawMdnHead RandomHead(Index M, Index D, Rng &rng) {
  RawMdnHead h(M, D);
  h.alpha = RandomVector(M, rng);
  h.m = RandomMatrix(M, D, rng);
  h.v = RandomMatrix(M, D, rng, 0.5);
  return h;
}

Vector Flatten(const RawMdnHead &h) {
  const Index M = h.NumComponents(), D = h.Dim();
  Vector x(M + 2 * M * D);
  x.head(M) = h.alpha;
  x.segment(M, M * D) = Eigen::Map<const Vector>(h.m.data(), M * D);
  x.tail(M * D) = Eigen::Map<const Vector>(h.v.data(), M * D);
  return x;
}

RawMdnHead Unflatten(const Vector &x, Index M, Index D) {
  RawMdnHead h(M, D);
  h.alpha = x.head(M);
  h.m = Eigen::Map<const Matrix>(x.data() + M, M, D);
  h.v = Eigen::Map<const Matrix>(x.data() + M + M * D, M, D);
  return h;
}

}  // namespace

TEST_CASE("activate: softmax weights and exp variances") {
  RawMdnHead raw(2, 1);
  GmmParams g = Activate(raw);
  CHECK(g.weights(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.weights(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK((g.variances.array() == 1.0).all());

  raw.alpha << 0.0, std::log(3.0);
  g = Activate(raw);
  CHECK(std::abs(g.weights(0) - 0.25) < 1e-15);
  CHECK(std::abs(g.weights(1) - 0.75) < 1e-15);
}

TEST_CASE("activate: large logits do not overflow and variances respect the floor") {
  RawMdnHead raw(3, 2);
  raw.alpha << 1000.0, 999.0, -1000.0;
  raw.v << -50.0, 0.0, 1.0, -2.0, -30.0, 3.0;
  const GmmParams g = Activate(raw);
  CHECK(g.weights.allFinite());
  CHECK(std::abs(g.weights.sum() - 1.0) < 1e-12);
  CHECK(g.variances(0, 0) == kVarianceFloor);
  CHECK(g.variances(2, 0) == kVarianceFloor);
  CHECK(g.variances.minCoeff() >= kVarianceFloor);
}

TEST_CASE("activate: non-finite input names the field") {
  RawMdnHead raw(2, 2);
  raw.m(1, 0) = std::nan("");
  CHECK_THROWS_WITH_AS(Activate(raw), doctest::Contains("m:"), InvalidInput);
  raw.m(1, 0) = 0.0;
  raw.v(0, 1) = INFINITY;
  CHECK_THROWS_WITH_AS(Activate(raw), doctest::Contains("v:"), InvalidInput);
  raw.v(0, 1) = 0.0;
  raw.alpha(0) = -INFINITY;
  CHECK_THROWS_WITH_AS(Activate(raw), doctest::Contains("alpha:"), InvalidInput);
}

TEST_CASE("log_density and nll: closed-form cases") {
  const Vector y0 = Vector::Zero(1);
  const GmmParams one = MakeGmm({1.0}, {0.0}, {1.0}, 1);
  CHECK(LogDensity(one, y0) == doctest::Approx(-kHalfLog2Pi).epsilon(1e-14));
  CHECK(Nll(one, y0) == doctest::Approx(0.918939).epsilon(1e-6));

  const GmmParams twin = MakeGmm({0.5, 0.5}, {0.0, 0.0}, {1.0, 1.0}, 1);
  CHECK(std::abs(LogDensity(twin, y0) + kHalfLog2Pi) < 1e-14);

  const GmmParams sym = MakeGmm({0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0}, 1);
  CHECK(std::abs(LogDensity(sym, y0) - (-kHalfLog2Pi - 0.5)) < 1e-14);
  CHECK(Nll(sym, y0) == doctest::Approx(1.418939).epsilon(1e-6));

  CHECK_THROWS_AS(LogDensity(sym, Vector::Zero(2)), InvalidInput);
}

TEST_CASE("nll matches naive direct evaluation (M=3, D=2)") {
  const GmmParams g =
      MakeGmm({0.2, 0.5, 0.3}, {0.0, 1.0, -1.0, 0.5, 2.0, -2.0}, {1.0, 0.5, 2.0, 0.3, 0.7, 1.5}, 2);
  Vector y(2);
  y << 0.3, -0.4;
  const double naive = -std::log(NaiveMixtureDensity(g.weights, g.means, g.variances, y));
  CHECK(std::abs(Nll(g, y) - naive) < 1e-10);
}

TEST_CASE("property: log-sum-exp agrees with naive evaluation where it does not underflow") {
  Rng rng(7);
  std::uniform_int_distribution<int> mdist(1, 5), ddist(1, 4);
  std::uniform_real_distribution<double> within(-6.0, 6.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index M = mdist(rng), D = ddist(rng);
    const GmmParams g = Activate(RandomHead(M, D, rng));
    Vector y(D);
    const Index anchor = trial % M;
    for (Index d = 0; d < D; ++d)
      y(d) = g.means(anchor, d) + within(rng) * std::sqrt(g.variances(anchor, d));
    const double naive = std::log(NaiveMixtureDensity(g.weights, g.means, g.variances, y));
    CHECK(std::abs(LogDensity(g, y) - naive) < 1e-10);
  }
}

TEST_CASE("property: invariance under component permutation and logit shift") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Index M = 1 + trial % 5, D = 1 + trial % 4;
    RawMdnHead raw = RandomHead(M, D, rng);
    const Vector y = RandomVector(D, rng);
    const GmmParams g = Activate(raw);
    CHECK(std::abs(g.weights.sum() - 1.0) < 1e-12);

    GmmParams permuted = g;
    for (Index i = 0; i < M; ++i) {
      permuted.weights(i) = g.weights(M - 1 - i);
      permuted.means.row(i) = g.means.row(M - 1 - i);
      permuted.variances.row(i) = g.variances.row(M - 1 - i);
    }
    CHECK(std::abs(LogDensity(permuted, y) - LogDensity(g, y)) < 1e-12);

    RawMdnHead shifted = raw;
    shifted.alpha.array() += 3.25;
    const GmmParams gs = Activate(shifted);
    CHECK((gs.weights - g.weights).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(LogDensity(gs, y) - LogDensity(g, y)) < 1e-12);
    const HeadGradient a = NllGrad(raw, y), b = NllGrad(shifted, y);
    CHECK((Flatten(a) - Flatten(b)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("nll_grad: symmetric and single-component cases") {
  RawMdnHead raw(2, 1);
  raw.m << -1.0, 1.0;
  const HeadGradient g = NllGrad(raw, Vector::Zero(1));
  CHECK(g.alpha(0) == 0.0);
  CHECK(g.alpha(1) == 0.0);

  RawMdnHead single(1, 3);
  single.alpha << 2.5;
  single.m << 0.1, -0.2, 0.3;
  single.v << 0.4, -0.1, 0.2;
  Vector y(3);
  y << 1.0, 2.0, -3.0;
  CHECK(NllGrad(single, y).alpha(0) == 0.0);
}

TEST_CASE("nll_grad matches central finite differences on 100 random heads") {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index M = 1 + trial % 5, D = 1 + (trial / 5) % 4;
    const RawMdnHead raw = RandomHead(M, D, rng);
    const Vector y = RandomVector(D, rng, 1.5);
    const Vector analytic = Flatten(NllGrad(raw, y));
    const Vector numeric = CentralDifferences(
        [&](const Vector &x) { return Nll(Activate(Unflatten(x, M, D)), y); }, Flatten(raw));
    worst = std::max(worst, MaxRelativeError(analytic, numeric));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("nll_grad: floored variances get zero v-gradient") {
  RawMdnHead raw(1, 2);
  raw.v << -40.0, 0.0;
  Vector y(2);
  y << 0.5, 0.5;
  const HeadGradient g = NllGrad(raw, y);
  CHECK(g.v(0, 0) == 0.0);
  CHECK(g.v(0, 1) != 0.0);
}

TEST_CASE("sample: zero temperature returns the mean; seeding is deterministic") {
  const GmmParams g = MakeGmm({1.0}, {0.7, -1.3}, {2.0, 0.5}, 2);
  Rng rng(3);
  const Observation y = Sample(g, rng, 0.0);
  CHECK(y(0) == 0.7);
  CHECK(y(1) == -1.3);

  const GmmParams mix = MakeGmm({0.3, 0.7}, {-2.0, 2.0}, {1.0, 1.0}, 1);
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) CHECK(Sample(mix, a)(0) == Sample(mix, b)(0));
  CHECK_THROWS_AS(Sample(mix, a, -1.0), InvalidInput);
}

TEST_CASE("sample: empirical moments match the analytic mixture within 3 standard errors") {
  // w=(0.3,0.7), mu=(-2,2), var=1: mean 0.8, variance 1 + 4 - 0.64 = 4.36.
  const GmmParams mix = MakeGmm({0.3, 0.7}, {-2.0, 2.0}, {1.0, 1.0}, 1);
  Rng rng(12345);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = Sample(mix, rng)(0);
    sum += y;
    sum_sq += y * y;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 0.8) < 3.0 * std::sqrt(4.36 / n));
  const double var = sum_sq / n - mean * mean;
  // Var of the sample variance is about (mu4 - sigma^4) / n; mu4 is the fourth
  // central moment, mixed over N(mu_i - 0.8, 1).
  auto m4 = [](double shift) { return std::pow(shift, 4) + 6 * shift * shift + 3; };
  const double mu4 = 0.3 * m4(-2.8) + 0.7 * m4(1.2);
  CHECK(std::abs(var - 4.36) < 3.0 * std::sqrt((mu4 - 4.36 * 4.36) / n));

  // Component selection frequency: with zero temperature the draw equals the
  // selected mean, so the selection is observed exactly.
  Rng rng2(777);
  int chosen_first = 0;
  for (int i = 0; i < n; ++i)
    if (Sample(mix, rng2, 0.0)(0) == -2.0) ++chosen_first;
  const double freq = static_cast<double>(chosen_first) / n;
  CHECK(std::abs(freq - 0.3) < 3.0 * std::sqrt(0.3 * 0.7 / n));
}
