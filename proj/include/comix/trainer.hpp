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

#include <comix/background.hpp>
#include <comix/encoder.hpp>
#include <comix/losses.hpp>
#include <comix/pseudolabel.hpp>
#include <comix/video.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace comix {

enum class TrainMode { unsupervised, semi_supervised };

struct TrainConfig {
  // Clip sampling.
  int clip_len = 4;
  int fast_clips = 16;
  std::vector<int> slow_candidates = {12, 8, 4};
  int fixed_slow_clips = 8;  // used when random_speed is off
  bool clip_jitter = false;

  // Objective.
  double tau = 0.5;
  double gamma = 0.5;
  double pl_threshold = 0.7;
  double label_smoothing = 0.1;
  double lambda_bgm = 0.1;
  double lambda_tpl = 0.01;

  // Optimization.
  int batch_size = 8;  // split equally over the two domains
  double lr_featurizer = 0.01;
  double lr_gcn = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-7;
  int warmstart_iters = 300;
  int adapt_iters = 300;
  int eval_every = 50;
  int checkpoint_every = 0;
  std::uint64_t seed = 0;

  TrainMode mode = TrainMode::unsupervised;
  int k_shots = 0;

  // Encoder sizes.
  int hidden_dim = 32;
  int feature_dim = 32;
  int gcn_dim = 16;
  double dropout = 0.0;

  // Ablation switches.
  bool enable_bgm = true;
  bool enable_tpl = true;
  bool enable_src_contrastive = true;
  bool random_speed = true;
  bool supcon_denominator = false;
  bool mixed_background_variant = false;
  bool self_training_ce = false;

  void validate() const;
  LossOptions loss_options() const;
  EncoderConfig encoder_config(const Dataset& reference) const;
};

struct Datasets {
  Dataset source_train;
  Dataset source_test;
  Dataset target_train;
  Dataset target_test;
};

/// Per-parameter momentum buffers, shaped like EncoderParams.
struct OptimizerState {
  std::optional<EncoderParams> velocity;
};

/// SGD with momentum; weight decay is added to the gradient before the
/// momentum update. Featurizer and GCN tensors use separate learning rates.
void sgd_update(const TrainConfig& cfg, EncoderParams& params, const EncoderParams& grad,
                OptimizerState& state);

struct StepReport {
  int step = 0;
  LossBreakdown loss;
  std::size_t pseudo_count = 0;
  std::optional<double> pseudo_accuracy;
  int slow_clips = 0;
  double mean_lambda = 0.0;
};

/// Everything adapt_step needs besides the batch itself.
struct StepContext {
  const BackgroundCache* backgrounds = nullptr;
  /// Revealed target videos (semi-supervised); may be empty.
  std::vector<const Video*> labeled_target;
};

/// One joint update on a source and a target batch of equal size.
StepReport adapt_step(const TrainConfig& cfg, std::span<const Video* const> source_batch,
                      std::span<const Video* const> target_batch, const StepContext& ctx,
                      EncoderParams& params, OptimizerState& opt, Rng& rng);

/// One update on the source cross-entropy alone, drawing randomness exactly as
/// adapt_step does so the two are comparable step for step.
void source_ce_step(const TrainConfig& cfg, std::span<const Video* const> source_batch,
                    std::span<const Video* const> target_batch, EncoderParams& params,
                    OptimizerState& opt, Rng& rng);

/// Source-only warm start: warmstart_iters steps of smoothed CE on fast clips.
EncoderParams pretrain_source(const TrainConfig& cfg, const Dataset& source_train,
                              EncoderParams params);

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::uint32_t> video_ids;
  std::vector<int> labels;
  std::vector<int> predictions;
  Matrix logits;  // one row per video
};

/// Base-branch (fast_clips) predictions over every video of `ds`.
EvalReport evaluate(const TrainConfig& cfg, const EncoderParams& params, const Dataset& ds);

/// k revealed target videos per class, first in dataset order.
std::vector<const Video*> reveal_target_labels(const Dataset& target_train, int k_shots);

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const StepReport& r, std::optional<double> src_acc, std::optional<double> tgt_acc);

  static const char* header();

 private:
  std::ofstream out_;
};

struct RunOptions {
  std::filesystem::path out_dir;  // empty: no files
  /// Warm-started parameters; when absent a warm start is trained first.
  std::optional<EncoderParams> warm_start;
  /// Called after every step.
  std::function<void(const StepReport&)> on_step;
};

struct RunReport {
  EvalReport baseline_source;
  EvalReport baseline_target;
  EvalReport final_source;
  EvalReport final_target;
  std::vector<StepReport> steps;
  EncoderParams params;
};

/// Warm start (unless provided), then adapt_iters joint steps with periodic
/// evaluation, metrics and checkpoints under out_dir.
RunReport run_adaptation(const TrainConfig& cfg, const Datasets& data, const RunOptions& options);

}  // namespace comix
