/**
 * Copyright 2026 The comix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "helpers.hpp"

#include <comix/encoder.hpp>

#include <doctest.h>

#include <fstream>
#include <numeric>

using namespace comix;

namespace {

EncoderConfig config(Eigen::Index input, Eigen::Index classes = 4) {
  EncoderConfig cfg;
  cfg.input_dim = input;
  cfg.num_classes = classes;
  return cfg;
}

ClipBatch random_clips(int n, Eigen::Index dim, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ClipBatch cb;
  cb.clip_len = 1;
  cb.clips.resize(n, dim);
  for (int k = 0; k < n; ++k) cb.starts.push_back(k);
  for (Eigen::Index i = 0; i < cb.clips.size(); ++i) cb.clips.data()[i] = u(rng);
  return cb;
}

}  // namespace

TEST_CASE("parameter shapes follow the configured widths") {
  Rng rng(1);
  const EncoderParams p = init_encoder(config(64), rng);
  CHECK(p.w1.rows() == 64);
  CHECK(p.w1.cols() == 32);
  CHECK(p.w2.cols() == 32);
  CHECK(p.gcn[0].weight.rows() == 32);
  CHECK(p.gcn[0].weight.cols() == 16);
  CHECK(p.gcn[1].weight.cols() == 16);
  CHECK(p.gcn[2].weight.cols() == 4);
  CHECK(p.gcn[0].phi.rows() == 32);
  CHECK(p.gcn[2].phi_prime.rows() == 16);
  CHECK(p.num_classes() == 4);
  CHECK(p.num_parameters() ==
        static_cast<std::size_t>(64 * 32 + 32 + 32 * 32 + 32 + 32 * 16 + 2 * 32 * 32 + 16 * 16 +
                                 2 * 16 * 16 + 16 * 4 + 2 * 16 * 16));
  CHECK_THROWS_AS((void)init_encoder(config(64, 1), rng), std::invalid_argument);
}

TEST_CASE("similarity adjacency special cases") {
  Rng rng(2);
  const Matrix phi = Matrix::Random(3, 3);
  CHECK(similarity_adjacency(Matrix::Random(1, 3), phi, phi).weights == Matrix::Ones(1, 1));
  const SimilarityAdjacency uniform =
      similarity_adjacency(Matrix::Random(5, 3), Matrix::Zero(3, 3), Matrix::Zero(3, 3));
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) CHECK(uniform.weights(i, j) == doctest::Approx(0.2).epsilon(1e-15));
  }
}

TEST_CASE("adjacency rows sum to one") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix nodes(16, 8), phi(8, 8), phi_p(8, 8);
    for (Matrix* m : {&nodes, &phi, &phi_p}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = g(rng);
    }
    const Matrix a = similarity_adjacency(nodes, phi, phi_p).weights;
    CHECK((a.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
    CHECK(a.minCoeff() >= 0.0);
  }
}

TEST_CASE("logits match an independent forward pass") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const testing::EncoderInstance inst = testing::random_encoder_instance(rng, 0.0);
    ClipBatch cb;
    cb.clips = inst.clips;
    const Matrix z = infer(inst.params, cb);
    const Matrix expected = oracle::encoder_forward(inst.params, inst.clips).logits;
    CHECK((z - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("logits do not depend on clip order") {
  Rng rng(5);
  const EncoderParams p = init_encoder(config(12), rng);
  const ClipBatch cb = random_clips(10, 12, rng);
  std::vector<int> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  ClipBatch shuffled = cb;
  for (int k = 0; k < 10; ++k) shuffled.clips.row(k) = cb.clips.row(perm[static_cast<std::size_t>(k)]);
  CHECK((infer(p, cb) - infer(p, shuffled)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("featurizer gradients match finite differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const testing::EncoderInstance inst = testing::random_encoder_instance(rng);
    const Matrix clips = inst.clips;
    const std::vector<Matrix> leaves = {inst.params.w1, inst.params.b1, inst.params.w2, inst.params.b2};
    const ad::GradCheckReport r = ad::finite_difference_check(
        [&clips](ad::Tape& t, std::span<const ad::Var> v) {
          EncoderVars vars;
          vars.w1 = v[0];
          vars.b1 = v[1];
          vars.w2 = v[2];
          vars.b2 = v[3];
          return featurize_clips(t.constant(clips), vars);
        },
        leaves, 1e-5, 1e-4);
    INFO("max_rel_err=" << r.max_rel_err << " " << r.diagnostic);
    CHECK(r.passed);
  }
}

TEST_CASE("end-to-end encoder gradients match finite differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const testing::EncoderInstance inst = testing::random_encoder_instance(rng);
    const Matrix clips = inst.clips;
    const ad::GradCheckReport r = ad::finite_difference_check(
        [&clips](ad::Tape& t, std::span<const ad::Var> v) {
          return gcn_forward(featurize_clips(t.constant(clips), testing::vars_from(v)), testing::vars_from(v));
        },
        testing::leaves_of(inst.params), 1e-5, 1e-3);
    INFO("max_rel_err=" << r.max_rel_err << " leaf=" << r.worst_leaf << " " << r.diagnostic);
    CHECK(r.passed);
  }
}

TEST_CASE("gradients are laid out like the parameters") {
  Rng rng(8);
  const EncoderParams p = init_encoder(config(6, 3), rng);
  const ClipBatch cb = random_clips(4, 6, rng);
  ad::Tape t;
  const EncoderVars vars = bind(t, p);
  t.backward(ad::sum(encode(t, cb, vars)));
  const EncoderParams g = gradients(t, vars);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes_p, shapes_g;
  p.for_each([&](const char*, const Matrix& m, ParamGroup) { shapes_p.emplace_back(m.rows(), m.cols()); });
  g.for_each([&](const char*, const Matrix& m, ParamGroup) { shapes_g.emplace_back(m.rows(), m.cols()); });
  CHECK(shapes_p == shapes_g);
  CHECK(g.w1.cwiseAbs().sum() > 0.0);
}

TEST_CASE("dropout needs an rng and changes the output only when active") {
  Rng rng(9);
  const EncoderParams p = init_encoder(config(6), rng);
  const ClipBatch cb = random_clips(6, 6, rng);
  ad::Tape t;
  const EncoderVars vars = bind(t, p, false);
  CHECK_THROWS_AS((void)encode(t, cb, vars, {0.5, nullptr}), std::invalid_argument);
  Rng drop(1);
  const Matrix with = encode(t, cb, vars, {0.5, &drop}).value();
  CHECK(with != infer(p, cb));
  CHECK(encode(t, cb, vars, {0.0, &drop}).value() == infer(p, cb));
}

TEST_CASE("CMX1 checkpoints round-trip and reject corruption") {
  const auto dir = testing::temp_dir("cmx");
  Rng rng(10);
  const EncoderParams p = init_encoder(config(20), rng);
  save_checkpoint(p, dir / "a.cmx");
  CHECK(load_checkpoint(dir / "a.cmx") == p);

  std::ifstream in(dir / "a.cmx", std::ios::binary);
  std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CMX1");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 13);  // tensor count
  CHECK(std::string(bytes.begin() + 16, bytes.begin() + 29) == "featurizer.w1");

  auto write = [&](const std::string& name, const std::vector<char>& b) {
    std::ofstream(dir / name, std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
    try {
      (void)load_checkpoint(dir / name);
    } catch (const FormatError& e) {
      return e.code;
    }
    FAIL("corrupt checkpoint accepted");
    return FormatErrc::io_failure;
  };
  std::vector<char> magic = bytes;
  magic[3] = '2';
  CHECK(write("magic.cmx", magic) == FormatErrc::bad_magic);
  CHECK(write("short.cmx", std::vector<char>(bytes.begin(), bytes.end() - 8)) == FormatErrc::unexpected_eof);
  std::vector<char> fewer = bytes;
  fewer[8] = 12;
  CHECK(write("fewer.cmx", std::vector<char>(fewer.begin(), fewer.end())) == FormatErrc::shape_overflow);
}
