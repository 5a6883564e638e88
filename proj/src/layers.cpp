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

#include "pmdn/layers.hpp"

#include <cmath>

namespace pmdn {

Matrix Im2Col1d(const ConstMatrixRef &x, int kernel) {
  const Index T = x.rows(), C = x.cols(), pad = (kernel - 1) / 2;
  Matrix col = Matrix::Zero(T, kernel * C);
  for (Index t = 0; t < T; ++t) {
    for (int j = 0; j < kernel; ++j) {
      const Index src = t + j - pad;
      if (src < 0 || src >= T) continue;
      col.block(t, j * C, 1, C) = x.row(src);
    }
  }
  return col;
}

Matrix Col2Im1d(const ConstMatrixRef &dcol, Index in_channels, int kernel) {
  const Index T = dcol.rows(), C = in_channels, pad = (kernel - 1) / 2;
  Matrix dx = Matrix::Zero(T, C);
  for (Index t = 0; t < T; ++t) {
    for (int j = 0; j < kernel; ++j) {
      const Index src = t + j - pad;
      if (src < 0 || src >= T) continue;
      dx.row(src) += dcol.block(t, j * C, 1, C);
    }
  }
  return dx;
}

Matrix Im2Col2d(const ConstMatrixRef &x, Index frames, Index bins, int kernel) {
  const Index C = x.cols(), pad = (kernel - 1) / 2;
  Matrix col = Matrix::Zero(frames * bins, kernel * kernel * C);
  for (Index t = 0; t < frames; ++t) {
    for (Index f = 0; f < bins; ++f) {
      const Index row = t * bins + f;
      for (int dt = 0; dt < kernel; ++dt) {
        const Index st = t + dt - pad;
        if (st < 0 || st >= frames) continue;
        for (int df = 0; df < kernel; ++df) {
          const Index sf = f + df - pad;
          if (sf < 0 || sf >= bins) continue;
          col.block(row, (dt * kernel + df) * C, 1, C) = x.row(st * bins + sf);
        }
      }
    }
  }
  return col;
}

Matrix Col2Im2d(const ConstMatrixRef &dcol, Index frames, Index bins,
                Index in_channels, int kernel) {
  const Index C = in_channels, pad = (kernel - 1) / 2;
  Matrix dx = Matrix::Zero(frames * bins, C);
  for (Index t = 0; t < frames; ++t) {
    for (Index f = 0; f < bins; ++f) {
      const Index row = t * bins + f;
      for (int dt = 0; dt < kernel; ++dt) {
        const Index st = t + dt - pad;
        if (st < 0 || st >= frames) continue;
        for (int df = 0; df < kernel; ++df) {
          const Index sf = f + df - pad;
          if (sf < 0 || sf >= bins) continue;
          dx.row(st * bins + sf) += dcol.block(row, (dt * kernel + df) * C, 1, C);
        }
      }
    }
  }
  return dx;
}

Matrix LayerNormForward(const ConstMatrixRef &x, const ConstVectorRef &gain,
                        const ConstVectorRef &bias, LayerNormCache *cache) {
  const Index rows = x.rows(), cols = x.cols();
  cache->xhat.resize(rows, cols);
  cache->inv_std.resize(rows);
  Matrix y(rows, cols);
  for (Index t = 0; t < rows; ++t) {
    const double mean = x.row(t).mean();
    const double var = (x.row(t).array() - mean).square().mean();
    const double inv_std = 1.0 / std::sqrt(var + kNormEpsilon);
    cache->inv_std(t) = inv_std;
    cache->xhat.row(t) = (x.row(t).array() - mean) * inv_std;
    y.row(t) = cache->xhat.row(t).array() * gain.transpose().array() +
               bias.transpose().array();
  }
  return y;
}

Matrix LayerNormBackward(const ConstMatrixRef &dy, const LayerNormCache &cache,
                         const ConstVectorRef &gain, VectorRef dgain, VectorRef dbias) {
  const Index rows = dy.rows(), cols = dy.cols();
  dgain += (dy.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
  dbias += dy.colwise().sum().transpose();
  Matrix dx(rows, cols);
  for (Index t = 0; t < rows; ++t) {
    const Eigen::RowVectorXd dxhat = dy.row(t).array() * gain.transpose().array();
    const double mean_d = dxhat.mean();
    const double mean_dx = (dxhat.array() * cache.xhat.row(t).array()).mean();
    dx.row(t) = cache.inv_std(t) *
                (dxhat.array() - mean_d - cache.xhat.row(t).array() * mean_dx);
  }
  return dx;
}

Matrix BatchNormForward(const ConstMatrixRef &x, const ConstVectorRef &gain,
                        const ConstVectorRef &bias, const ConstVectorRef &running_mean,
                        const ConstVectorRef &running_var, Mode mode,
                        BatchNormCache *cache) {
  cache->batch_stats = (mode == Mode::kTrain);
  if (cache->batch_stats) {
    cache->mean = x.colwise().mean().transpose();
    cache->variance =
        (x.rowwise() - cache->mean.transpose()).array().square().colwise().mean().transpose();
  } else {
    cache->mean = running_mean;
    cache->variance = running_var;
  }
  cache->inv_std = (cache->variance.array() + kNormEpsilon).rsqrt();
  cache->xhat = (x.rowwise() - cache->mean.transpose()).array().rowwise() *
                cache->inv_std.transpose().array();
  Matrix y = cache->xhat.array().rowwise() * gain.transpose().array();
  y.rowwise() += bias.transpose();
  return y;
}

Matrix BatchNormBackward(const ConstMatrixRef &dy, const BatchNormCache &cache,
                         const ConstVectorRef &gain, VectorRef dgain, VectorRef dbias) {
  dgain += (dy.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
  dbias += dy.colwise().sum().transpose();
  const Matrix dxhat = dy.array().rowwise() * gain.transpose().array();
  if (!cache.batch_stats) {
    return dxhat.array().rowwise() * cache.inv_std.transpose().array();
  }
  const Eigen::RowVectorXd mean_d = dxhat.colwise().mean();
  const Eigen::RowVectorXd mean_dx = (dxhat.array() * cache.xhat.array()).colwise().mean();
  Matrix dx = (dxhat.rowwise() - mean_d).array() -
              cache.xhat.array().rowwise() * mean_dx.array();
  return dx.array().rowwise() * cache.inv_std.transpose().array();
}

void GruForward(const ConstMatrixRef &W, const ConstMatrixRef &U, const ConstVectorRef &b,
                const ConstVectorRef &x, const ConstVectorRef &h_prev, GruStep *step) {
  const Index R = h_prev.size();
  step->x = x;
  step->h_prev = h_prev;
  const Vector wx = W * x + b;
  const Vector uh = U.topRows(2 * R) * h_prev;
  step->z = (wx.head(R) + uh.head(R)).unaryExpr(&Sigmoid);
  step->r = (wx.segment(R, R) + uh.segment(R, R)).unaryExpr(&Sigmoid);
  const Vector rh = step->r.cwiseProduct(h_prev);
  step->n = (wx.tail(R) + U.bottomRows(R) * rh).array().tanh();
  step->h = (1.0 - step->z.array()) * step->n.array() + step->z.array() * h_prev.array();
}

void GruBackward(const GruStep &step, const ConstMatrixRef &W, const ConstMatrixRef &U,
                 const ConstVectorRef &dh, MatrixRef dW, MatrixRef dU, VectorRef db,
                 Vector *dx, Vector *dh_prev) {
  const Index R = step.h.size();
  const Vector dn = dh.array() * (1.0 - step.z.array());
  const Vector dz = dh.array() * (step.h_prev.array() - step.n.array());
  Vector dhp = dh.array() * step.z.array();

  Vector da(3 * R);
  da.head(R) = dz.array() * step.z.array() * (1.0 - step.z.array());
  da.tail(R) = dn.array() * (1.0 - step.n.array().square());

  const Vector rh = step.r.cwiseProduct(step.h_prev);
  const Vector drh = U.bottomRows(R).transpose() * da.tail(R);
  const Vector dr = drh.cwiseProduct(step.h_prev);
  dhp += drh.cwiseProduct(step.r);
  da.segment(R, R) = dr.array() * step.r.array() * (1.0 - step.r.array());

  dW.noalias() += da * step.x.transpose();
  db += da;
  dU.topRows(2 * R).noalias() += da.head(2 * R) * step.h_prev.transpose();
  dU.bottomRows(R).noalias() += da.tail(R) * rh.transpose();

  *dx = W.transpose() * da;
  dhp.noalias() += U.topRows(2 * R).transpose() * da.head(2 * R);
  *dh_prev = std::move(dhp);
}

}  // namespace pmdn
