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

#include <comix/encoder.hpp>

#include <cmath>
#include <stdexcept>

namespace comix {

namespace {

Matrix xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

std::array<Eigen::Index, kGcnLayers + 1> gcn_dims(const EncoderConfig& cfg) {
  return {cfg.feature_dim, cfg.gcn_dim, cfg.gcn_dim, cfg.num_classes};
}

void check_config(const EncoderConfig& cfg) {
  if (cfg.input_dim < 1 || cfg.hidden_dim < 1 || cfg.feature_dim < 1 || cfg.gcn_dim < 1 ||
      cfg.num_classes < 2) {
    throw std::invalid_argument("encoder dimensions must be positive (and at least 2 classes)");
  }
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) {
    throw std::invalid_argument("dropout must lie in [0, 1)");
  }
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& cfg, Rng& rng) {
  check_config(cfg);
  EncoderParams p;
  p.w1 = xavier(cfg.input_dim, cfg.hidden_dim, rng);
  p.b1 = Matrix::Zero(1, cfg.hidden_dim);
  p.w2 = xavier(cfg.hidden_dim, cfg.feature_dim, rng);
  p.b2 = Matrix::Zero(1, cfg.feature_dim);
  const auto dims = gcn_dims(cfg);
  for (int l = 0; l < kGcnLayers; ++l) {
    const Eigen::Index din = dims[static_cast<std::size_t>(l)];
    const Eigen::Index dout = dims[static_cast<std::size_t>(l) + 1];
    auto& layer = p.gcn[static_cast<std::size_t>(l)];
    layer.weight = xavier(din, dout, rng);
    layer.phi = xavier(din, din, rng);
    layer.phi_prime = xavier(din, din, rng);
  }
  return p;
}

EncoderParams zero_encoder(const EncoderConfig& cfg) {
  Rng rng(0);
  EncoderParams p = init_encoder(cfg, rng);
  p.for_each([](const char*, Matrix& m, ParamGroup) { m.setZero(); });
  return p;
}

std::size_t EncoderParams::num_parameters() const {
  std::size_t n = 0;
  for_each([&n](const char*, const Matrix& m, ParamGroup) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

void EncoderParams::validate() const {
  auto expect = [](const char* what, const Matrix& m, Eigen::Index r, Eigen::Index c) {
    if (m.rows() != r || m.cols() != c) throw ShapeError(what, shape_of(m), Shape{r, c});
  };
  expect("featurizer.b1", b1, 1, w1.cols());
  expect("featurizer.w2", w2, w1.cols(), w2.cols());
  expect("featurizer.b2", b2, 1, w2.cols());
  Eigen::Index din = w2.cols();
  for (const GcnLayer& layer : gcn) {
    expect("gcn.weight", layer.weight, din, layer.weight.cols());
    expect("gcn.phi", layer.phi, din, din);
    expect("gcn.phi_prime", layer.phi_prime, din, din);
    din = layer.weight.cols();
  }
  for_each([](const char* name, const Matrix& m, ParamGroup) {
    if (!m.allFinite()) throw NonFiniteError(std::string("parameter ") + name + " is not finite");
  });
}

bool operator==(const EncoderParams& a, const EncoderParams& b) {
  bool same = true;
  std::vector<const Matrix*> rhs;
  b.for_each([&rhs](const char*, const Matrix& m, ParamGroup) { rhs.push_back(&m); });
  std::size_t i = 0;
  a.for_each([&](const char*, const Matrix& m, ParamGroup) {
    const Matrix& o = *rhs[i++];
    same = same && m.rows() == o.rows() && m.cols() == o.cols() && m == o;
  });
  return same;
}

EncoderVars bind(ad::Tape& tape, const EncoderParams& params, bool trainable) {
  params.validate();
  auto leaf = [&](const Matrix& m, const char* name) {
    return trainable ? tape.variable(m, name) : tape.constant(m);
  };
  EncoderVars v;
  v.w1 = leaf(params.w1, "featurizer.w1");
  v.b1 = leaf(params.b1, "featurizer.b1");
  v.w2 = leaf(params.w2, "featurizer.w2");
  v.b2 = leaf(params.b2, "featurizer.b2");
  for (std::size_t l = 0; l < params.gcn.size(); ++l) {
    v.gcn[l].weight = leaf(params.gcn[l].weight, "gcn.weight");
    v.gcn[l].phi = leaf(params.gcn[l].phi, "gcn.phi");
    v.gcn[l].phi_prime = leaf(params.gcn[l].phi_prime, "gcn.phi_prime");
  }
  return v;
}

EncoderParams gradients(const ad::Tape& tape, const EncoderVars& vars) {
  auto g = [&tape](const ad::Var& v) {
    const Matrix& gr = tape.grad(v);
    return gr.size() == 0 ? Matrix::Zero(v.rows(), v.cols()).eval() : gr;
  };
  EncoderParams out;
  out.w1 = g(vars.w1);
  out.b1 = g(vars.b1);
  out.w2 = g(vars.w2);
  out.b2 = g(vars.b2);
  for (std::size_t l = 0; l < vars.gcn.size(); ++l) {
    out.gcn[l].weight = g(vars.gcn[l].weight);
    out.gcn[l].phi = g(vars.gcn[l].phi);
    out.gcn[l].phi_prime = g(vars.gcn[l].phi_prime);
  }
  return out;
}

ad::Var featurize_clips(const ad::Var& clips, const EncoderVars& vars) {
  if (clips.cols() != vars.w1.rows()) {
    throw ShapeError("featurize_clips", clips.shape(), vars.w1.shape());
  }
  ad::Var h = ad::tanh(ad::add_row_broadcast(ad::matmul(clips, vars.w1), vars.b1));
  return ad::add_row_broadcast(ad::matmul(h, vars.w2), vars.b2);
}

ad::Var similarity_adjacency(const ad::Var& nodes, const ad::Var& phi, const ad::Var& phi_prime) {
  // Rows are nodes, so phi * z_i becomes row i of nodes * phi^T.
  ad::Var left = ad::matmul(nodes, ad::transpose(phi));
  ad::Var right = ad::matmul(nodes, ad::transpose(phi_prime));
  return ad::softmax_rows(ad::matmul(left, ad::transpose(right)));
}

SimilarityAdjacency similarity_adjacency(const Matrix& nodes, const Matrix& phi,
                                         const Matrix& phi_prime) {
  ad::Tape tape;
  ad::Var a = similarity_adjacency(tape.constant(nodes), tape.constant(phi),
                                   tape.constant(phi_prime));
  return {a.value()};
}

ad::Var gcn_forward(const ad::Var& features, const EncoderVars& vars, GcnOptions opts) {
  if (features.cols() != vars.gcn.front().weight.rows()) {
    throw ShapeError("gcn_forward", features.shape(), vars.gcn.front().weight.shape());
  }
  if (opts.dropout > 0.0 && opts.dropout_rng == nullptr) {
    throw std::invalid_argument("gcn_forward: dropout requires an rng");
  }
  ad::Var h = features;
  for (std::size_t l = 0; l < vars.gcn.size(); ++l) {
    const auto& layer = vars.gcn[l];
    ad::Var adj = similarity_adjacency(h, layer.phi, layer.phi_prime);
    h = ad::matmul(ad::matmul(adj, h), layer.weight);
    if (l + 1 < vars.gcn.size()) {
      h = ad::relu(h);
      if (opts.dropout > 0.0) {
        std::bernoulli_distribution keep(1.0 - opts.dropout);
        Matrix mask(h.rows(), h.cols());
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
          mask.data()[i] = keep(*opts.dropout_rng) ? 1.0 / (1.0 - opts.dropout) : 0.0;
        }
        h = ad::hadamard(h, h.tape()->constant(std::move(mask)));
      }
    }
  }
  return ad::col_mean(h);
}

ad::Var encode(ad::Tape& tape, const ClipBatch& clips, const EncoderVars& vars, GcnOptions opts) {
  ad::Var x = tape.constant(clips.clips);
  return gcn_forward(featurize_clips(x, vars), vars, opts);
}

Matrix infer(const EncoderParams& params, const ClipBatch& clips) {
  ad::Tape tape;
  EncoderVars vars = bind(tape, params, false);
  return encode(tape, clips, vars).value();
}

}  // namespace comix
