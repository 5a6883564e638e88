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

#include "pmdn/em.hpp"

#include <cmath>
#include <limits>

namespace pmdn {

namespace {

// Responsibility mass below which a component counts as empty.
constexpr double kEmptyMass = 1e-10;

// k-means++ centres followed by a hard assignment for weights and variances.
GmmParams KMeansPlusPlusInit(const ConstMatrixRef &data, const EmConfig &cfg, Rng &rng) {
  const Index N = data.rows(), D = data.cols(), M = cfg.num_components;
  std::vector<Index> centres;
  centres.push_back(std::uniform_int_distribution<Index>(0, N - 1)(rng));
  Vector dist2 = (data.rowwise() - data.row(centres[0])).rowwise().squaredNorm();
  while (static_cast<Index>(centres.size()) < M) {
    Index next;
    if (dist2.sum() > 0.0) {
      std::discrete_distribution<Index> pick(dist2.data(), dist2.data() + N);
      next = pick(rng);
    } else {
      next = std::uniform_int_distribution<Index>(0, N - 1)(rng);
    }
    centres.push_back(next);
    dist2 = dist2.cwiseMin((data.rowwise() - data.row(next)).rowwise().squaredNorm());
  }

  const Vector global_mean = data.colwise().mean().transpose();
  const Vector global_var =
      (data.rowwise() - global_mean.transpose()).array().square().colwise().mean().transpose();

  GmmParams gmm;
  gmm.means.resize(M, D);
  for (Index i = 0; i < M; ++i) gmm.means.row(i) = data.row(centres[i]);
  Vector count = Vector::Zero(M);
  Matrix sum_sq = Matrix::Zero(M, D);
  for (Index n = 0; n < N; ++n) {
    Index best = 0;
    (gmm.means.rowwise() - data.row(n)).rowwise().squaredNorm().minCoeff(&best);
    count(best) += 1.0;
    sum_sq.row(best) += (data.row(n) - gmm.means.row(best)).array().square().matrix();
  }
  gmm.variances.resize(M, D);
  for (Index i = 0; i < M; ++i) {
    if (count(i) > 1.0)
      gmm.variances.row(i) = sum_sq.row(i) / count(i);
    else
      gmm.variances.row(i) = global_var.transpose();
  }
  gmm.variances = gmm.variances.cwiseMax(cfg.variance_floor);
  gmm.weights = (count.array() + 1.0) / (count.sum() + static_cast<double>(M));
  return gmm;
}

}  // namespace

void EmConfig::Check() const {
  if (num_components < 1) throw InvalidInput("em: num_components must be >= 1");
  if (max_iters < 1) throw InvalidInput("em: max_iters must be >= 1");
  if (!(tolerance > 0.0)) throw InvalidInput("em: tolerance must be > 0");
  if (!(variance_floor > 0.0)) throw InvalidInput("em: variance_floor must be > 0");
}

double MeanLogLik(const GmmParams &gmm, const ConstMatrixRef &data) {
  double total = 0.0;
  for (Index n = 0; n < data.rows(); ++n) total += LogDensity(gmm, data.row(n).transpose());
  return total / static_cast<double>(data.rows());
}

EmResult EmFit(const ConstMatrixRef &data, const EmConfig &cfg) {
  cfg.Check();
  const Index N = data.rows(), D = data.cols(), M = cfg.num_components;
  if (N < M)
    throw InvalidInput("em: " + std::to_string(N) + " points for " + std::to_string(M) +
                       " components");
  if (D < 1 || !data.allFinite()) throw InvalidInput("em: data must be finite with D >= 1");

  Rng rng(cfg.seed);
  EmResult result;
  result.gmm = KMeansPlusPlusInit(data, cfg, rng);

  Matrix gamma(N, M);
  Vector point_ll(N);
  for (int iter = 0;; ++iter) {
    // E step.
    for (Index n = 0; n < N; ++n) {
      const Vector lj = ComponentLogJoint(result.gmm, data.row(n).transpose());
      const double max = lj.maxCoeff();
      const Vector p = (lj.array() - max).exp();
      const double sum = p.sum();
      point_ll(n) = max + std::log(sum);
      gamma.row(n) = (p / sum).transpose();
    }
    const double mean_ll = point_ll.mean();
    const bool converged =
        !result.trace.empty() && mean_ll - result.trace.back() < cfg.tolerance;
    result.trace.push_back(mean_ll);
    if (converged || iter + 1 >= cfg.max_iters) break;

    // M step.
    const Vector mass = gamma.colwise().sum().transpose();
    GmmParams next;
    next.weights.resize(M);
    next.means.resize(M, D);
    next.variances.resize(M, D);
    for (Index i = 0; i < M; ++i) {
      if (mass(i) < kEmptyMass) {
        Index worst = 0;
        point_ll.minCoeff(&worst);
        next.means.row(i) = data.row(worst);
        next.variances.row(i) = result.gmm.variances.colwise().maxCoeff();
        next.weights(i) = 1.0 / static_cast<double>(N);
        point_ll(worst) = std::numeric_limits<double>::infinity();
        ++result.reseeds;
        continue;
      }
      next.weights(i) = mass(i) / static_cast<double>(N);
      next.means.row(i) = (gamma.col(i).transpose() * data) / mass(i);
      const Matrix centred = data.rowwise() - next.means.row(i);
      next.variances.row(i) =
          (gamma.col(i).transpose() * centred.array().square().matrix()) / mass(i);
    }
    next.weights /= next.weights.sum();
    next.variances = next.variances.cwiseMax(cfg.variance_floor);
    result.gmm = std::move(next);
  }
  return result;
}

}  // namespace pmdn
