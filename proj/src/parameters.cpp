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

#include "pmdn/parameters.hpp"

#include <cmath>

namespace pmdn {

std::size_t ParameterSet::Add(std::string name, Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw InvalidInput("tensor " + name + ": empty shape");
  TensorInfo t{std::move(name), rows, cols, values_.size()};
  const Index old = values_.size();
  values_.conservativeResize(old + t.size());
  values_.tail(t.size()).setZero();
  tensors_.push_back(std::move(t));
  return tensors_.size() - 1;
}

std::size_t ParameterSet::Find(const std::string &name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return i;
  throw InvalidInput("no tensor named " + name);
}

ParameterSet ParameterSet::ZerosLike() const {
  ParameterSet out;
  out.tensors_ = tensors_;
  out.values_ = Vector::Zero(values_.size());
  return out;
}

bool ParameterSet::SameLayout(const ParameterSet &other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const TensorInfo &a = tensors_[i], &b = other.tensors_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

void ParameterSet::InitUniform(std::size_t i, Index fan_in, Rng &rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-s, s);
  for (double &x : Col(i)) x = dist(rng);
}

}  // namespace pmdn
