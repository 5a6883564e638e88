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
#include "extractor_oracle.hpp"
#include "oracles.hpp"
#include "pmdn/checkpoints.hpp"
#include "pmdn/extractor.hpp"

using namespace pmdn;
using namespace pmdn::testing;

namespace {

ExtractorConfig SmallConfig() {
  ExtractorConfig c;
  c.mel_channels = 4;
  c.channels1 = 2;
  c.channels2 = 3;
  c.embedding_dim = 4;
  return c;
}

SegmentBatch RandomSegments(Rng &rng, Index bins, std::initializer_list<Index> frames) {
  SegmentBatch out;
  for (Index T : frames) out.push_back(RandomMatrix(T, bins, rng));
  return out;
}

// Random running statistics so eval mode differs from train mode.
void PerturbBuffers(ExtractorModel &model, Rng &rng) {
  ParameterSet &b = model.buffers();
  for (std::size_t i = 0; i < b.tensors().size(); ++i) {
    Vector v = RandomVector(b.tensors()[i].size(), rng, 0.5);
    if (i % 2 == 1) v = v.array().abs() + 0.5;
    b.Col(i) = v;
  }
}

}  // namespace

TEST_CASE("extract: matches the scalar oracle in both modes") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    ExtractorModel model = ExtractorModel::Initialized(ExtractorConfig{}, seed);
    model.params().values() += RandomVector(model.params().size(), rng, 0.3);
    PerturbBuffers(model, rng);
    const SegmentBatch segs = RandomSegments(rng, 8, {3, 1, 5, 8, 2});
    const Matrix train = Extract(model, segs, Mode::kTrain).embeddings;
    const Matrix eval = Extract(model, segs, Mode::kEval).embeddings;
    CHECK((train - OracleExtract(model, segs, true)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((eval - OracleExtract(model, segs, false)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(eval.cols() == 4);
  }
}

TEST_CASE("extract: single-frame segment") {
  Rng rng(3);
  const ExtractorModel model = ExtractorModel::Initialized(SmallConfig(), 3);
  const SegmentBatch segs = RandomSegments(rng, 4, {1});
  const Matrix e = Extract(model, segs, Mode::kEval).embeddings;
  REQUIRE(e.rows() == 1);
  CHECK(e.cols() == 4);
  CHECK(e.allFinite());
  CHECK((e - OracleExtract(model, segs, false)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("extract: eval mode is deterministic and batch independent") {
  Rng rng(4);
  ExtractorModel model = ExtractorModel::Initialized(ExtractorConfig{}, 4);
  PerturbBuffers(model, rng);
  const SegmentBatch segs = RandomSegments(rng, 8, {4, 6, 3, 7});
  const Matrix a = Extract(model, segs, Mode::kEval).embeddings;
  const Matrix b = Extract(model, segs, Mode::kEval).embeddings;
  CHECK(a == b);
  const SegmentBatch first(segs.begin(), segs.begin() + 2), second(segs.begin() + 2, segs.end());
  Matrix split(4, a.cols());
  split << Extract(model, first, Mode::kEval).embeddings,
      Extract(model, second, Mode::kEval).embeddings;
  CHECK((split - a).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("extract: invalid input") {
  const ExtractorModel model = ExtractorModel::Initialized(SmallConfig(), 1);
  CHECK_THROWS_AS(Extract(model, {}, Mode::kEval), InvalidInput);
  CHECK_THROWS_AS(Extract(model, {Matrix(0, 4)}, Mode::kEval), InvalidInput);
  CHECK_THROWS_AS(Extract(model, {Matrix::Zero(3, 5)}, Mode::kEval), InvalidInput);
  Matrix bad = Matrix::Zero(2, 4);
  bad(1, 1) = NAN;
  CHECK_THROWS_AS(Extract(model, {bad}, Mode::kEval), InvalidInput);
  ExtractorConfig odd = SmallConfig();
  odd.embedding_dim = 3;
  CHECK_THROWS_AS(ExtractorModel{odd}, InvalidInput);
}

TEST_CASE("extract: gradients match finite differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    ExtractorModel model = ExtractorModel::Initialized(SmallConfig(), seed);
    model.params().values() += RandomVector(model.params().size(), rng, 0.2);
    PerturbBuffers(model, rng);
    const SegmentBatch segs = RandomSegments(rng, 4, {2, 1, 3});
    const Mode mode = seed % 2 == 0 ? Mode::kTrain : Mode::kEval;
    const Matrix G = RandomMatrix(3, 4, rng);

    ExtractorCache cache;
    Extract(model, segs, mode, &cache);
    ParameterSet grad = model.params().ZerosLike();
    ExtractorBackward(model, cache, G, &grad);

    auto loss = [&](const Vector &theta) {
      ExtractorModel m = model;
      m.params().values() = theta;
      return (Extract(m, segs, mode).embeddings.array() * G.array()).sum();
    };
    const Vector fd = CentralDifferences(loss, model.params().values());
    worst = std::max(worst, MaxRelativeError(grad.values(), fd));
  }
  MESSAGE("max relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("extract: running statistics follow the batch") {
  Rng rng(8);
  ExtractorModel model = ExtractorModel::Initialized(SmallConfig(), 8);
  const SegmentBatch segs = RandomSegments(rng, 4, {3, 4});
  ExtractorCache cache;
  Extract(model, segs, Mode::kTrain, &cache);
  UpdateRunningStats(model, cache);
  const auto &b = model.buffers();
  CHECK((Vector(b.Col(ExtractorModel::kBn1Mean)) - 0.1 * cache.bn1.mean).cwiseAbs().maxCoeff() <
        1e-15);
  CHECK((Vector(b.Col(ExtractorModel::kBn2Var)) -
         (0.9 * Vector::Ones(3) + 0.1 * cache.bn2.variance))
            .cwiseAbs()
            .maxCoeff() < 1e-15);
  ExtractorCache eval;
  Extract(model, segs, Mode::kEval, &eval);
  CHECK_THROWS_AS(UpdateRunningStats(model, eval), InvalidInput);
}

TEST_CASE("extract: checkpoint round trip keeps parameters and statistics") {
  Rng rng(2);
  ExtractorModel model = ExtractorModel::Initialized(ExtractorConfig{}, 2);
  PerturbBuffers(model, rng);
  const std::string bytes = EncodeExtractor(model);
  const ExtractorModel back = DecodeExtractor(bytes);
  CHECK(back.config() == model.config());
  CHECK(back.params().values() == model.params().values());
  CHECK(back.buffers().values() == model.buffers().values());
  CHECK(EncodeExtractor(back) == bytes);
  CHECK_THROWS_AS(DecodePredictor(bytes), InvalidInput);
  std::string bad = bytes;
  bad[bad.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(DecodeExtractor(bad), InvalidInput);
}
