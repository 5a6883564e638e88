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

// Forward/backward building blocks shared by the predictor and the extractor.
// Backward functions accumulate parameter gradients (+=) and return the
// gradient with respect to their input.

#ifndef PMDN_LAYERS_HPP_
#define PMDN_LAYERS_HPP_

#include "pmdn/common.hpp"

namespace pmdn {

inline constexpr double kNormEpsilon = 1e-5;

// --- 1-D "same" convolution over time. x is T x Cin. Column j*Cin + c of the
// result holds x(t + j - pad, c), zero outside [0, T).
Matrix Im2Col1d(const ConstMatrixRef &x, int kernel);
Matrix Col2Im1d(const ConstMatrixRef &dcol, Index in_channels, int kernel);

// --- 2-D "same" convolution. Feature maps are (T*F) x C with position t*F + f.
// Column (dt*kernel + df)*Cin + c holds x at (t + dt - pad, f + df - pad).
Matrix Im2Col2d(const ConstMatrixRef &x, Index frames, Index bins, int kernel);
Matrix Col2Im2d(const ConstMatrixRef &dcol, Index frames, Index bins,
                Index in_channels, int kernel);

// --- Layer normalization across the columns of each row.
struct LayerNormCache {
  Matrix xhat;
  Vector inv_std;
};
Matrix LayerNormForward(const ConstMatrixRef &x, const ConstVectorRef &gain,
                        const ConstVectorRef &bias, LayerNormCache *cache);
Matrix LayerNormBackward(const ConstMatrixRef &dy, const LayerNormCache &cache,
                         const ConstVectorRef &gain, VectorRef dgain, VectorRef dbias);

// --- Batch normalization of each column over all rows.
struct BatchNormCache {
  Matrix xhat;
  Vector mean;      // statistics used for normalization
  Vector variance;  // biased
  Vector inv_std;
  bool batch_stats = true;
};
Matrix BatchNormForward(const ConstMatrixRef &x, const ConstVectorRef &gain,
                        const ConstVectorRef &bias, const ConstVectorRef &running_mean,
                        const ConstVectorRef &running_var, Mode mode,
                        BatchNormCache *cache);
Matrix BatchNormBackward(const ConstMatrixRef &dy, const BatchNormCache &cache,
                         const ConstVectorRef &gain, VectorRef dgain, VectorRef dbias);

// --- Gated recurrent unit. W is 3R x In, U is 3R x R, b is 3R; row blocks
// are [update z; reset r; candidate n]:
//   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
//   n = tanh(Wn x + Un (r .* h) + bn), h' = (1 - z) .* n + z .* h.
struct GruStep {
  Vector x, h_prev, z, r, n, h;
};
void GruForward(const ConstMatrixRef &W, const ConstMatrixRef &U, const ConstVectorRef &b,
                const ConstVectorRef &x, const ConstVectorRef &h_prev, GruStep *step);
// dh is the gradient w.r.t. step.h. Writes dx and dh_prev.
void GruBackward(const GruStep &step, const ConstMatrixRef &W, const ConstMatrixRef &U,
                 const ConstVectorRef &dh, MatrixRef dW, MatrixRef dU, VectorRef db,
                 Vector *dx, Vector *dh_prev);

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace pmdn

#endif  // PMDN_LAYERS_HPP_
