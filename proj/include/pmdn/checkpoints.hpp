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

// Model checkpoints in the container described in io.hpp.
//
//   magic  config integers
//   MDNP   H, D, M, conv_channels, conv_kernel, recurrent_width, dropout (ppm)
//   MDNE   F, channels1, channels2, kernel, D, bn_momentum (ppm)
//   MDNR   H, D, F
//
// Extractor values are the parameters followed by the running statistics.

#ifndef PMDN_CHECKPOINTS_HPP_
#define PMDN_CHECKPOINTS_HPP_

#include <string>

#include "pmdn/extractor.hpp"
#include "pmdn/joint.hpp"
#include "pmdn/predictor.hpp"

namespace pmdn {

std::string EncodePredictor(const PredictorModel &model);
PredictorModel DecodePredictor(std::string bytes);
std::string EncodeExtractor(const ExtractorModel &model);
ExtractorModel DecodeExtractor(std::string bytes);
std::string EncodeReconstructor(const Reconstructor &model);
Reconstructor DecodeReconstructor(std::string bytes);

void SavePredictor(const std::string &path, const PredictorModel &model);
PredictorModel LoadPredictor(const std::string &path);
void SaveExtractor(const std::string &path, const ExtractorModel &model);
ExtractorModel LoadExtractor(const std::string &path);
void SaveReconstructor(const std::string &path, const Reconstructor &model);
Reconstructor LoadReconstructor(const std::string &path);

}  // namespace pmdn

#endif  // PMDN_CHECKPOINTS_HPP_
