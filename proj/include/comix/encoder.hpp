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

#include <comix/autodiff.hpp>
#include <comix/video.hpp>

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace comix {

struct EncoderConfig {
  Eigen::Index input_dim = 0;  // clip_len * H * W * C
  Eigen::Index hidden_dim = 32;
  Eigen::Index feature_dim = 32;
  Eigen::Index gcn_dim = 16;
  Eigen::Index num_classes = 4;
  /// Dropout after each hidden GCN activation. 0 disables it.
  double dropout = 0.0;
};

enum class ParamGroup { featurizer, gcn };

struct GcnLayer {
  Matrix weight;     // d_in x d_out
  Matrix phi;        // d_in x d_in, applied as phi * z
  Matrix phi_prime;  // d_in x d_in
};

inline constexpr int kGcnLayers = 3;

struct EncoderParams {
  Matrix w1;  // input_dim x hidden_dim
  Matrix b1;  // 1 x hidden_dim
  Matrix w2;  // hidden_dim x feature_dim
  Matrix b2;  // 1 x feature_dim
  std::array<GcnLayer, kGcnLayers> gcn;

  Eigen::Index input_dim() const { return w1.rows(); }
  Eigen::Index num_classes() const { return gcn.back().weight.cols(); }

  /// Visits every tensor as (name, tensor, group) in a fixed order.
  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("featurizer.w1", self.w1, ParamGroup::featurizer);
    f("featurizer.b1", self.b1, ParamGroup::featurizer);
    f("featurizer.w2", self.w2, ParamGroup::featurizer);
    f("featurizer.b2", self.b2, ParamGroup::featurizer);
    static const std::array<std::array<const char*, 3>, kGcnLayers> names = {{
        {"gcn.0.weight", "gcn.0.phi", "gcn.0.phi_prime"},
        {"gcn.1.weight", "gcn.1.phi", "gcn.1.phi_prime"},
        {"gcn.2.weight", "gcn.2.phi", "gcn.2.phi_prime"},
    }};
    for (int l = 0; l < kGcnLayers; ++l) {
      const auto& n = names[static_cast<std::size_t>(l)];
      auto& layer = self.gcn[static_cast<std::size_t>(l)];
      f(n[0], layer.weight, ParamGroup::gcn);
      f(n[1], layer.phi, ParamGroup::gcn);
      f(n[2], layer.phi_prime, ParamGroup::gcn);
    }
  }
  template <typename F>
  void for_each(F&& f) { visit(*this, std::forward<F>(f)); }
  template <typename F>
  void for_each(F&& f) const { visit(*this, std::forward<F>(f)); }

  std::size_t num_parameters() const;
  /// Throws ShapeError if the layer dimensions do not chain.
  void validate() const;

  friend bool operator==(const EncoderParams& a, const EncoderParams& b);
};

/// Xavier-uniform weights, zero biases.
EncoderParams init_encoder(const EncoderConfig& cfg, Rng& rng);
/// All-zero parameters of the given shape.
EncoderParams zero_encoder(const EncoderConfig& cfg);

/// Parameters bound to a tape, mirroring EncoderParams.
struct EncoderVars {
  ad::Var w1, b1, w2, b2;
  struct Layer {
    ad::Var weight, phi, phi_prime;
  };
  std::array<Layer, kGcnLayers> gcn;
};

EncoderVars bind(ad::Tape& tape, const EncoderParams& params, bool trainable = true);

/// Gradient of the last backward pass, laid out like `params`.
EncoderParams gradients(const ad::Tape& tape, const EncoderVars& vars);

/// Row-stochastic n x n affinity matrix.
struct SimilarityAdjacency {
  Matrix weights;
};

/// flatten -> affine -> tanh -> affine, one row per clip.
ad::Var featurize_clips(const ad::Var& clips, const EncoderVars& vars);

/// softmax_j((phi z_i)^T (phi' z_j)) for the rows z_i of `nodes`.
ad::Var similarity_adjacency(const ad::Var& nodes, const ad::Var& phi, const ad::Var& phi_prime);
SimilarityAdjacency similarity_adjacency(const Matrix& nodes, const Matrix& phi,
                                         const Matrix& phi_prime);

struct GcnOptions {
  double dropout = 0.0;
  Rng* dropout_rng = nullptr;  // required when dropout > 0
};

/// Three similarity-graph convolutions (ReLU, ReLU, identity); the adjacency
/// of each layer is recomputed from that layer's input nodes. Returns the
/// 1 x c mean over nodes.
ad::Var gcn_forward(const ad::Var& features, const EncoderVars& vars, GcnOptions opts = {});

/// Logits of one clip batch: gcn_forward(featurize_clips(clips)).
ad::Var encode(ad::Tape& tape, const ClipBatch& clips, const EncoderVars& vars,
               GcnOptions opts = {});

/// Gradient-free logits (1 x c) for evaluation.
Matrix infer(const EncoderParams& params, const ClipBatch& clips);

// CMX1 checkpoints.
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace comix
