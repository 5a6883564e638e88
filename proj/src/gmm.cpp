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

#include "pmdn/gmm.hpp"

#include <cmath>

namespace pmdn {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

void CheckDims(const GmmParams &gmm, const Eigen::Ref<const Vector> &y) {
  if (y.size() != gmm.Dim())
    throw InvalidInput("observation has dimension " + std::to_string(y.size()) +
                       ", mixture has " + std::to_string(gmm.Dim()));
  if (!y.allFinite()) throw InvalidInput("observation: non-finite entry");
}

}  // namespace

void RawMdnHead::Check() const {
  const Index M = alpha.size();
  if (M < 1) throw InvalidInput("alpha: need at least one component");
  if (m.rows() != M || v.rows() != M)
    throw InvalidInput("m/v: row count must equal number of components");
  if (m.cols() < 1 || v.cols() != m.cols())
    throw InvalidInput("m/v: inconsistent or empty dimension");
  if (!alpha.allFinite()) throw InvalidInput("alpha: non-finite entry");
  if (!m.allFinite()) throw InvalidInput("m: non-finite entry");
  if (!v.allFinite()) throw InvalidInput("v: non-finite entry");
}

void GmmParams::Check() const {
  const Index M = weights.size();
  if (M < 1) throw InvalidInput("weights: need at least one component");
  if (means.rows() != M || variances.rows() != M || means.cols() < 1 ||
      variances.cols() != means.cols())
    throw InvalidInput("means/variances: inconsistent shapes");
  if (!weights.allFinite() || !means.allFinite() || !variances.allFinite())
    throw InvalidInput("mixture parameters: non-finite entry");
  if ((weights.array() <= 0.0).any()) throw InvalidInput("weights: must be positive");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw InvalidInput("weights: must sum to one");
  if ((variances.array() <= 0.0).any()) throw InvalidInput("variances: must be positive");
}

double LogSumExp(const Eigen::Ref<const Vector> &x) {
  const double max = x.maxCoeff();
  if (!std::isfinite(max)) return max;
  return max + std::log((x.array() - max).exp().sum());
}

GmmParams Activate(const RawMdnHead &raw) {
  raw.Check();
  GmmParams gmm;
  const double max_alpha = raw.alpha.maxCoeff();
  gmm.weights = (raw.alpha.array() - max_alpha).exp();
  gmm.weights /= gmm.weights.sum();
  gmm.means = raw.m;
  gmm.variances = raw.v.array().exp().max(kVarianceFloor);
  return gmm;
}

Vector ComponentLogJoint(const GmmParams &gmm, const Eigen::Ref<const Vector> &y) {
  CheckDims(gmm, y);
  const Index M = gmm.NumComponents(), D = gmm.Dim();
  Vector out(M);
  for (Index i = 0; i < M; ++i) {
    double acc = std::log(gmm.weights(i)) - D * kHalfLog2Pi;
    for (Index d = 0; d < D; ++d) {
      const double var = gmm.variances(i, d);
      const double diff = y(d) - gmm.means(i, d);
      acc -= 0.5 * std::log(var) + 0.5 * diff * diff / var;
    }
    out(i) = acc;
  }
  return out;
}

double LogDensity(const GmmParams &gmm, const Eigen::Ref<const Vector> &y) {
  return LogSumExp(ComponentLogJoint(gmm, y));
}

namespace {

// Normalized max-shifted exponentials, the same form as the softmax weights,
// so symmetric configurations give exactly equal responsibilities.
Vector Posterior(const Vector &log_joint) {
  Vector gamma = (log_joint.array() - log_joint.maxCoeff()).exp();
  return gamma / gamma.sum();
}

}  // namespace

Vector Responsibilities(const GmmParams &gmm, const Eigen::Ref<const Vector> &y) {
  return Posterior(ComponentLogJoint(gmm, y));
}

double NllAndGrad(const RawMdnHead &raw, const Eigen::Ref<const Vector> &y,
                  HeadGradient *grad) {
  const GmmParams gmm = Activate(raw);
  const Vector lj = ComponentLogJoint(gmm, y);
  const double log_p = LogSumExp(lj);
  if (grad == nullptr) return -log_p;

  const Index M = gmm.NumComponents(), D = gmm.Dim();
  const Vector gamma = Posterior(lj);
  *grad = HeadGradient(M, D);
  grad->alpha = gmm.weights - gamma;
  for (Index i = 0; i < M; ++i) {
    for (Index d = 0; d < D; ++d) {
      const double var = gmm.variances(i, d);
      const double diff = gmm.means(i, d) - y(d);
      grad->m(i, d) = gamma(i) * diff / var;
      // Clamped log-variances do not influence the loss locally.
      const bool clamped = std::exp(raw.v(i, d)) < kVarianceFloor;
      grad->v(i, d) = clamped ? 0.0 : gamma(i) * 0.5 * (1.0 - diff * diff / var);
    }
  }
  return -log_p;
}

HeadGradient NllGrad(const RawMdnHead &raw, const Eigen::Ref<const Vector> &y) {
  HeadGradient grad;
  NllAndGrad(raw, y, &grad);
  return grad;
}

Observation Sample(const GmmParams &gmm, Rng &rng, double temperature, Index *chosen) {
  if (!(temperature >= 0.0) || !std::isfinite(temperature))
    throw InvalidInput("temperature: must be finite and >= 0");
  const Index M = gmm.NumComponents(), D = gmm.Dim();

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  Index component = M - 1;
  double cumulative = 0.0;
  for (Index i = 0; i < M; ++i) {
    cumulative += gmm.weights(i);
    if (u < cumulative) {
      component = i;
      break;
    }
  }

  // Noise is drawn even at zero temperature so the stream advances the same
  // way for every temperature.
  std::normal_distribution<double> normal(0.0, 1.0);
  Observation y(D);
  for (Index d = 0; d < D; ++d) {
    const double z = normal(rng);
    y(d) = gmm.means(component, d) +
           temperature * std::sqrt(gmm.variances(component, d)) * z;
  }
  if (chosen) *chosen = component;
  return y;
}

}  // namespace pmdn
