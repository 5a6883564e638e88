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

#ifndef PMDN_PARAMETERS_HPP_
#define PMDN_PARAMETERS_HPP_

#include <string>
#include <vector>

#include "pmdn/common.hpp"

namespace pmdn {

struct TensorInfo {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index offset = 0;

  Index size() const { return rows * cols; }
  // Parameter group used for reporting, i.e. the name up to the first '.'.
  std::string group() const { return name.substr(0, name.find('.')); }
};

// Named row-major tensors packed into one contiguous vector. The packing order
// is the order of Add() calls; checkpoints and optimizers rely on it.
class ParameterSet {
 public:
  std::size_t Add(std::string name, Index rows, Index cols = 1);

  Eigen::Map<Matrix> operator[](std::size_t i) {
    const TensorInfo &t = tensors_.at(i);
    return {values_.data() + t.offset, t.rows, t.cols};
  }
  Eigen::Map<const Matrix> operator[](std::size_t i) const {
    const TensorInfo &t = tensors_.at(i);
    return {values_.data() + t.offset, t.rows, t.cols};
  }
  // Column view of a vector-shaped tensor.
  Eigen::Map<Vector> Col(std::size_t i) {
    const TensorInfo &t = tensors_.at(i);
    return {values_.data() + t.offset, t.size()};
  }
  Eigen::Map<const Vector> Col(std::size_t i) const {
    const TensorInfo &t = tensors_.at(i);
    return {values_.data() + t.offset, t.size()};
  }

  std::size_t Find(const std::string &name) const;

  Vector &values() { return values_; }
  const Vector &values() const { return values_; }
  const std::vector<TensorInfo> &tensors() const { return tensors_; }
  Index size() const { return values_.size(); }

  // Same layout, all zeros.
  ParameterSet ZerosLike() const;
  bool SameLayout(const ParameterSet &other) const;

  // Uniform(-s, s) with s = 1/sqrt(fan_in).
  void InitUniform(std::size_t i, Index fan_in, Rng &rng);

 private:
  std::vector<TensorInfo> tensors_;
  Vector values_;
};

}  // namespace pmdn

#endif  // PMDN_PARAMETERS_HPP_
