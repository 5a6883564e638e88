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

// Diagonal-covariance Gaussian mixtures as produced by a mixture density
// network head: unconstrained outputs -> constrained parameters, stable
// log-density, analytic NLL gradients and ancestral sampling.

#ifndef PMDN_GMM_HPP_
#define PMDN_GMM_HPP_

#include "pmdn/common.hpp"

namespace pmdn {

// Variances are clamped to at least this value after exponentiation.
inline constexpr double kVarianceFloor = 1e-6;

// Unconstrained network outputs for one observation.
//   alpha: M weight logits, m: M x D means, v: M x D log-variances.
struct RawMdnHead {
  Vector alpha;
  Matrix m;
  Matrix v;

  RawMdnHead() = default;
  RawMdnHead(Index num_components, Index dim)
      : alpha(Vector::Zero(num_components)),
        m(Matrix::Zero(num_components, dim)),
        v(Matrix::Zero(num_components, dim)) {}

  Index NumComponents() const { return alpha.size(); }
  Index Dim() const { return m.cols(); }

  // Throws InvalidInput naming the offending field.
  void Check() const;
};

// Gradients have the shape of the head they differentiate.
using HeadGradient = RawMdnHead;

struct GmmParams {
  Vector weights;    // M, positive, sums to one
  Matrix means;      // M x D
  Matrix variances;  // M x D, >= kVarianceFloor

  Index NumComponents() const { return weights.size(); }
  Index Dim() const { return means.cols(); }

  void Check() const;
};

// A single embedding e_k.
using Observation = Vector;

// Softmax weights (max-subtracted), identity means, exp(v) variances floored.
GmmParams Activate(const RawMdnHead &raw);

// Per-component log(w_i) + log N(y; mu_i, diag(var_i)).
Vector ComponentLogJoint(const GmmParams &gmm, const Eigen::Ref<const Vector> &y);

// log sum_i w_i N(y; mu_i, diag(var_i)) via log-sum-exp.
double LogDensity(const GmmParams &gmm, const Eigen::Ref<const Vector> &y);

inline double Nll(const GmmParams &gmm, const Eigen::Ref<const Vector> &y) {
  return -LogDensity(gmm, y);
}

// Posterior component probabilities gamma_i.
Vector Responsibilities(const GmmParams &gmm, const Eigen::Ref<const Vector> &y);

// NLL of y under Activate(raw); gradient w.r.t. the raw head is written to
// *grad when non-null. Log-variances that sit on the floor get zero gradient.
double NllAndGrad(const RawMdnHead &raw, const Eigen::Ref<const Vector> &y,
                  HeadGradient *grad);

HeadGradient NllGrad(const RawMdnHead &raw, const Eigen::Ref<const Vector> &y);

// Ancestral sampling. temperature scales the standard deviations; zero
// returns the selected component mean exactly. The chosen component index is
// stored in *component when given.
Observation Sample(const GmmParams &gmm, Rng &rng, double temperature = 1.0,
                   Index *component = nullptr);

// Numerically stable log(sum(exp(x))).
double LogSumExp(const Eigen::Ref<const Vector> &x);

}  // namespace pmdn

#endif  // PMDN_GMM_HPP_
