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

#pragma once

#include "oracles.hpp"

#include <comix/losses.hpp>

#include <filesystem>
#include <string>

namespace testing {

/// Rows of the stacked embedding matrix in oracle video order: fast, slow,
/// then mixed fast and mixed slow when present.
inline comix::Matrix stack(const std::vector<oracle::Video>& vids) {
  std::vector<const oracle::Vec*> rows;
  for (const auto& v : vids) {
    for (const oracle::Vec* e : oracle::embeddings(v, v.mixed_fast.has_value())) rows.push_back(e);
  }
  comix::Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front()->size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < rows[r]->size(); ++k) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = (*rows[r])[k];
    }
  }
  return m;
}

/// Embedding batch whose entries are row slices of `z` (laid out as stack()).
inline comix::EmbeddingBatch batch_from(const comix::ad::Var& z, const std::vector<oracle::Video>& vids,
                                        comix::Domain domain = comix::Domain::source) {
  using namespace comix;
  EmbeddingBatch batch;
  Eigen::Index r = 0;
  for (const auto& v : vids) {
    batch.add({v.id, domain, Speed::fast, Provenance::original, ad::rows(z, r++, 1)});
    batch.add({v.id, domain, Speed::slow, Provenance::original, ad::rows(z, r++, 1)});
    if (v.mixed_fast) {
      batch.add({v.id, domain, Speed::fast, Provenance::mixed, ad::rows(z, r++, 1)});
      batch.add({v.id, domain, Speed::slow, Provenance::mixed, ad::rows(z, r++, 1)});
    }
  }
  return batch;
}

inline comix::PseudoLabelSet pseudo_of(const std::vector<oracle::Video>& vids) {
  comix::PseudoLabelSet set;
  set.threshold = 0.7;
  for (const auto& v : vids) {
    if (v.pseudo) set.entries.push_back({v.id, *v.pseudo, 1.0});
  }
  return set;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("comix_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing

namespace testing {

inline std::vector<comix::Matrix> leaves_of(const comix::EncoderParams& p) {
  std::vector<comix::Matrix> out;
  p.for_each([&out](const char*, const comix::Matrix& m, comix::ParamGroup) { out.push_back(m); });
  return out;
}

/// EncoderVars over tape leaves in EncoderParams::for_each order.
inline comix::EncoderVars vars_from(std::span<const comix::ad::Var> v) {
  comix::EncoderVars e{v[0], v[1], v[2], v[3], {}};
  for (std::size_t l = 0; l < comix::kGcnLayers; ++l) e.gcn[l] = {v[4 + 3 * l], v[5 + 3 * l], v[6 + 3 * l]};
  return e;
}

}  // namespace testing

namespace testing {

struct EncoderInstance {
  comix::EncoderParams params;
  comix::Matrix clips;
};

/// Small random encoder and clip batch that is well conditioned for central
/// differences: every ReLU pre-activation stays at least `margin` away from
/// zero, so no difference straddles a kink, and the node features entering
/// each graph layer keep a relative spread of at least `min_spread`. Collapsed
/// nodes make the adjacency irrelevant, leaving gradients below the rounding
/// noise of the differences.
inline EncoderInstance random_encoder_instance(std::mt19937_64& rng, double margin = 1e-3,
                                               double min_spread = 0.05) {
  std::uniform_int_distribution<int> dim(2, 8);
  std::uniform_int_distribution<int> classes(2, 4);
  std::uniform_int_distribution<int> nodes(2, 5);
  std::uniform_real_distribution<double> pixel(0.0, 1.0);
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  for (;;) {
    comix::EncoderConfig cfg;
    cfg.input_dim = dim(rng);
    cfg.hidden_dim = dim(rng);
    cfg.feature_dim = dim(rng);
    cfg.gcn_dim = dim(rng);
    cfg.num_classes = classes(rng);
    EncoderInstance inst{comix::init_encoder(cfg, rng), comix::Matrix(nodes(rng), cfg.input_dim)};
    for (comix::Matrix* b : {&inst.params.b1, &inst.params.b2}) {
      for (Eigen::Index i = 0; i < b->size(); ++i) b->data()[i] = bias(rng);
    }
    for (Eigen::Index i = 0; i < inst.clips.size(); ++i) inst.clips.data()[i] = pixel(rng);
    const oracle::EncoderTrace trace = oracle::encoder_forward(inst.params, inst.clips);
    if (trace.min_relu_margin >= margin && trace.min_node_spread >= min_spread) return inst;
  }
}

}  // namespace testing
