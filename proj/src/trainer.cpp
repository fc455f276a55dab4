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

#include <comix/trainer.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace comix {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (clip_len < 1) fail("clip_len must be >= 1");
  if (slow_candidates.empty()) fail("slow_candidates must not be empty");
  for (int s : slow_candidates) {
    if (s < 1) fail("slow clip counts must be >= 1");
    if (s >= fast_clips) fail("fast_clips must exceed every slow candidate");
  }
  if (fixed_slow_clips < 1 || fixed_slow_clips >= fast_clips) {
    fail("fixed_slow_clips must lie in [1, fast_clips)");
  }
  if (batch_size < 2 || batch_size % 2 != 0) fail("batch_size must be even and >= 2");
  if (!(lr_featurizer > 0.0) || !(lr_gcn > 0.0)) fail("learning rates must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (!(pl_threshold > 0.0 && pl_threshold <= 1.0)) fail("pl_threshold must lie in (0, 1]");
  if (warmstart_iters < 0 || adapt_iters < 0) fail("iteration counts must be non-negative");
  if (eval_every < 0 || checkpoint_every < 0) fail("eval_every/checkpoint_every must be >= 0");
  if (mode == TrainMode::semi_supervised && k_shots < 1) fail("semi_supervised mode needs k_shots >= 1");
  if (hidden_dim < 1 || feature_dim < 1 || gcn_dim < 1) fail("encoder dimensions must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  loss_options().weights.validate();
}

LossOptions TrainConfig::loss_options() const {
  LossOptions o;
  o.weights = {lambda_bgm, lambda_tpl, tau, label_smoothing};
  o.enable_bgm = enable_bgm;
  o.enable_tpl = enable_tpl;
  o.enable_src_contrastive = enable_src_contrastive;
  o.denominator = supcon_denominator ? Denominator::supcon : Denominator::as_printed;
  o.self_training_ce = self_training_ce;
  return o;
}

EncoderConfig TrainConfig::encoder_config(const Dataset& reference) const {
  if (reference.videos.empty()) throw std::invalid_argument("reference dataset is empty");
  EncoderConfig e;
  e.input_dim = reference.videos.front().frame_size() * clip_len;
  e.hidden_dim = hidden_dim;
  e.feature_dim = feature_dim;
  e.gcn_dim = gcn_dim;
  e.num_classes = reference.num_classes;
  e.dropout = dropout;
  return e;
}

void sgd_update(const TrainConfig& cfg, EncoderParams& params, const EncoderParams& grad,
                OptimizerState& state) {
  if (!state.velocity) {
    state.velocity = params;
    state.velocity->for_each([](const char*, Matrix& m, ParamGroup) { m.setZero(); });
  }
  std::vector<const Matrix*> grads;
  grad.for_each([&grads](const char*, const Matrix& g, ParamGroup) { grads.push_back(&g); });
  std::vector<Matrix*> velocity;
  state.velocity->for_each([&velocity](const char*, Matrix& v, ParamGroup) { velocity.push_back(&v); });
  std::size_t i = 0;
  params.for_each([&](const char* name, Matrix& p, ParamGroup group) {
    const Matrix& g = *grads[i];
    Matrix& v = *velocity[i];
    ++i;
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw ShapeError(std::string("sgd_update ") + name, shape_of(g), shape_of(p));
    }
    const double lr = group == ParamGroup::featurizer ? cfg.lr_featurizer : cfg.lr_gcn;
    v = cfg.momentum * v + g + cfg.weight_decay * p;
    p -= lr * v;
  });
}

namespace {

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count, Rng& rng) {
  if (count > population) {
    throw std::invalid_argument("cannot draw " + std::to_string(count) + " videos from " +
                                std::to_string(population));
  }
  std::vector<std::size_t> idx(population);
  for (std::size_t i = 0; i < population; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

template <typename Videos>
std::vector<const Video*> sample_videos(const Videos& pool, std::size_t count, Rng& rng) {
  std::vector<const Video*> out;
  for (std::size_t i : sample_indices(pool.size(), count, rng)) {
    if constexpr (std::is_pointer_v<typename Videos::value_type>) {
      out.push_back(pool[i]);
    } else {
      out.push_back(&pool[i]);
    }
  }
  return out;
}

struct SampledVideo {
  const Video* video = nullptr;
  ClipBatch fast;
  ClipBatch slow;
  ClipBatch mixed_fast;
  ClipBatch mixed_slow;
  double lambda = 0.0;
};

// Randomness is drawn in a fixed order (speed, clip offsets, mixing weights,
// labeled target draw, dropout masks) so that the CE-only step and the full
// step consume identical streams.
struct StepSample {
  int slow_clips = 0;
  std::vector<SampledVideo> source;
  std::vector<SampledVideo> target;
  std::vector<ClipBatch> labeled_target;
  std::vector<int> labeled_target_labels;
};

StepSample draw_step(const TrainConfig& cfg, std::span<const Video* const> source_batch,
                     std::span<const Video* const> target_batch, const StepContext& ctx,
                     Rng& rng) {
  if (source_batch.size() != target_batch.size() || source_batch.empty()) {
    throw std::invalid_argument("source and target batches must be non-empty and of equal size");
  }
  StepSample s;
  s.slow_clips = cfg.random_speed ? choose_slow_speed(cfg.slow_candidates, rng) : cfg.fixed_slow_clips;
  const ClipOptions copts{cfg.clip_jitter};
  auto sample = [&](const Video* v) {
    SampledVideo sv;
    sv.video = v;
    sv.fast = sample_clips(*v, cfg.fast_clips, cfg.clip_len, rng, copts);
    sv.fast.speed = Speed::fast;
    sv.slow = sample_clips(*v, s.slow_clips, cfg.clip_len, rng, copts);
    sv.slow.speed = Speed::slow;
    return sv;
  };
  for (const Video* v : source_batch) s.source.push_back(sample(v));
  for (const Video* v : target_batch) s.target.push_back(sample(v));

  if (cfg.enable_bgm) {
    if (ctx.backgrounds == nullptr) throw std::invalid_argument("background mixing needs a background cache");
    for (std::size_t i = 0; i < s.source.size(); ++i) {
      const BackgroundFrame& bg_src = ctx.backgrounds->at(s.source[i].video->video_id);
      const BackgroundFrame& bg_tgt = ctx.backgrounds->at(s.target[i].video->video_id);
      // Slot pairing: source slot i takes target slot i's background and vice versa.
      BackgroundFrame for_source = bg_tgt;
      BackgroundFrame for_target = bg_src;
      if (cfg.mixed_background_variant) {
        const double mu = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        for_source = blend_backgrounds(bg_src, bg_tgt, mu);
        for_target = for_source;
      }
      for (auto [sv, bg] : {std::pair{&s.source[i], &for_source}, std::pair{&s.target[i], &for_target}}) {
        sv->lambda = sample_mix_coefficient(cfg.gamma, rng);
        sv->mixed_fast = mix_clips(sv->fast, *bg, sv->lambda);
        sv->mixed_slow = mix_clips(sv->slow, *bg, sv->lambda);
      }
    }
  }

  if (cfg.mode == TrainMode::semi_supervised && !ctx.labeled_target.empty()) {
    const std::size_t n = std::min(ctx.labeled_target.size(), source_batch.size());
    for (const Video* v : sample_videos(ctx.labeled_target, n, rng)) {
      ClipBatch cb = sample_clips(*v, cfg.fast_clips, cfg.clip_len, rng, copts);
      s.labeled_target.push_back(std::move(cb));
      s.labeled_target_labels.push_back(v->label);
    }
  }
  return s;
}

std::vector<int> labels_of(const std::vector<SampledVideo>& vids) {
  std::vector<int> labels;
  for (const SampledVideo& sv : vids) {
    if (sv.video->label < 0) {
      throw std::invalid_argument("source video " + std::to_string(sv.video->video_id) + " is unlabeled");
    }
    labels.push_back(sv.video->label);
  }
  return labels;
}

GcnOptions gcn_options(const TrainConfig& cfg, Rng& rng) { return {cfg.dropout, &rng}; }

}  // namespace

StepReport adapt_step(const TrainConfig& cfg, std::span<const Video* const> source_batch,
                      std::span<const Video* const> target_batch, const StepContext& ctx,
                      EncoderParams& params, OptimizerState& opt, Rng& rng) {
  StepSample sample = draw_step(cfg, source_batch, target_batch, ctx, rng);
  const std::vector<int> src_labels = labels_of(sample.source);

  ad::Tape tape;
  EncoderVars vars = bind(tape, params);
  EmbeddingBatch batch;
  auto encode_domain = [&](const std::vector<SampledVideo>& vids, Domain domain) {
    for (const SampledVideo& sv : vids) {
      const std::uint32_t id = sv.video->video_id;
      batch.add({id, domain, Speed::fast, Provenance::original,
                 encode(tape, sv.fast, vars, gcn_options(cfg, rng))});
      batch.add({id, domain, Speed::slow, Provenance::original,
                 encode(tape, sv.slow, vars, gcn_options(cfg, rng))});
      if (cfg.enable_bgm) {
        batch.add({id, domain, Speed::fast, Provenance::mixed,
                   encode(tape, sv.mixed_fast, vars, gcn_options(cfg, rng))});
        batch.add({id, domain, Speed::slow, Provenance::mixed,
                   encode(tape, sv.mixed_slow, vars, gcn_options(cfg, rng))});
      }
    }
  };
  encode_domain(sample.source, Domain::source);
  encode_domain(sample.target, Domain::target);

  const ContrastiveBatchView src = make_view(batch, Domain::source, cfg.enable_bgm);
  const ContrastiveBatchView tgt = make_view(batch, Domain::target, cfg.enable_bgm);

  // Pseudo-labels come from forward values only.
  std::vector<std::pair<std::uint32_t, Vector>> fused;
  for (const auto& v : tgt.videos) {
    fused.emplace_back(v.video_id, fuse_logits(tgt.stacked.value().row(static_cast<Eigen::Index>(v.fast)),
                                               tgt.stacked.value().row(static_cast<Eigen::Index>(v.slow))));
  }
  const PseudoLabelSet pseudo = assign_pseudo_labels(fused, cfg.pl_threshold);

  std::optional<LabeledLogits> labeled;
  if (!sample.labeled_target.empty()) {
    std::vector<ad::Var> logits;
    for (const ClipBatch& cb : sample.labeled_target) {
      logits.push_back(encode(tape, cb, vars, gcn_options(cfg, rng)));
    }
    labeled = LabeledLogits{ad::vstack(logits), sample.labeled_target_labels};
  }

  StepReport report;
  TotalLoss loss;
  try {
    loss = total_loss(src, tgt, src_labels, pseudo, cfg.loss_options(), labeled);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(std::string("adapt_step aborted: ") + e.what());
  }
  if (!std::isfinite(loss.values.total)) {
    std::ostringstream os;
    os << "adapt_step aborted: non-finite loss (ce=" << loss.values.ce
       << " bgm_src=" << loss.values.bgm_src << " bgm_tgt=" << loss.values.bgm_tgt
       << " tpl=" << loss.values.tpl << ")";
    throw NonFiniteError(os.str());
  }
  tape.backward(loss.total);
  sgd_update(cfg, params, gradients(tape, vars), opt);

  report.loss = loss.values;
  report.pseudo_count = pseudo.size();
  report.slow_clips = sample.slow_clips;
  if (!pseudo.empty()) {
    std::size_t correct = 0;
    for (const auto& e : pseudo.entries) {
      for (const SampledVideo& sv : sample.target) {
        if (sv.video->video_id == e.video_id && sv.video->label == e.label) ++correct;
      }
    }
    report.pseudo_accuracy = static_cast<double>(correct) / static_cast<double>(pseudo.size());
  }
  double lambda_sum = 0.0;
  for (const auto* group : {&sample.source, &sample.target}) {
    for (const SampledVideo& sv : *group) lambda_sum += sv.lambda;
  }
  report.mean_lambda = lambda_sum / static_cast<double>(sample.source.size() + sample.target.size());
  return report;
}

void source_ce_step(const TrainConfig& cfg, std::span<const Video* const> source_batch,
                    std::span<const Video* const> target_batch, EncoderParams& params,
                    OptimizerState& opt, Rng& rng) {
  StepContext ctx;
  BackgroundCache cache;
  if (cfg.enable_bgm) {
    for (const auto* group : {&source_batch, &target_batch}) {
      for (const Video* v : *group) {
        Dataset one;
        one.videos.push_back(*v);
        cache.add(one);
      }
    }
    ctx.backgrounds = &cache;
  }
  StepSample sample = draw_step(cfg, source_batch, target_batch, ctx, rng);
  const std::vector<int> src_labels = labels_of(sample.source);

  ad::Tape tape;
  EncoderVars vars = bind(tape, params);
  std::vector<ad::Var> logits;
  for (const SampledVideo& sv : sample.source) {
    logits.push_back(encode(tape, sv.fast, vars, gcn_options(cfg, rng)));
  }
  ad::Var ce = ce_smoothed(ad::vstack(logits), src_labels, cfg.label_smoothing);
  tape.backward(ce);
  sgd_update(cfg, params, gradients(tape, vars), opt);
}

EncoderParams pretrain_source(const TrainConfig& cfg, const Dataset& source_train,
                              EncoderParams params) {
  cfg.validate();
  for (const Video& v : source_train.videos) {
    if (v.label < 0) {
      throw std::invalid_argument("source video " + std::to_string(v.video_id) + " is unlabeled");
    }
  }
  if (cfg.warmstart_iters == 0) return params;
  Rng rng(derive_seed(cfg.seed, 0x77a3));
  OptimizerState opt;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                              source_train.videos.size());
  const ClipOptions copts{cfg.clip_jitter};
  for (int it = 0; it < cfg.warmstart_iters; ++it) {
    ad::Tape tape;
    EncoderVars vars = bind(tape, params);
    std::vector<ad::Var> logits;
    std::vector<int> labels;
    for (const Video* v : sample_videos(source_train.videos, n, rng)) {
      ClipBatch cb = sample_clips(*v, cfg.fast_clips, cfg.clip_len, rng, copts);
      logits.push_back(encode(tape, cb, vars, gcn_options(cfg, rng)));
      labels.push_back(v->label);
    }
    ad::Var ce = ce_smoothed(ad::vstack(logits), labels, cfg.label_smoothing);
    tape.backward(ce);
    sgd_update(cfg, params, gradients(tape, vars), opt);
  }
  return params;
}

EvalReport evaluate(const TrainConfig& cfg, const EncoderParams& params, const Dataset& ds) {
  EvalReport r;
  const int c = static_cast<int>(params.num_classes());
  r.logits.resize(static_cast<Eigen::Index>(ds.videos.size()), c);
  std::vector<int> seen(static_cast<std::size_t>(c), 0);
  std::vector<int> hit(static_cast<std::size_t>(c), 0);
  int labeled = 0;
  int correct = 0;
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    const Video& v = ds.videos[i];
    const std::vector<int> starts = clip_starts(v.num_frames(), cfg.fast_clips, cfg.clip_len);
    const Matrix z = infer(params, clips_at(v, starts, cfg.clip_len));
    r.logits.row(static_cast<Eigen::Index>(i)) = z.row(0);
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < z.cols(); ++k) {
      if (z(0, k) > z(0, best)) best = k;
    }
    const int pred = static_cast<int>(best);
    r.video_ids.push_back(v.video_id);
    r.labels.push_back(v.label);
    r.predictions.push_back(pred);
    if (v.label >= 0 && v.label < c) {
      ++labeled;
      ++seen[static_cast<std::size_t>(v.label)];
      if (pred == v.label) {
        ++correct;
        ++hit[static_cast<std::size_t>(v.label)];
      }
    }
  }
  r.accuracy = labeled > 0 ? static_cast<double>(correct) / labeled : 0.0;
  for (int k = 0; k < c; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    r.per_class_accuracy.push_back(seen[kk] > 0 ? static_cast<double>(hit[kk]) / seen[kk] : 0.0);
  }
  return r;
}

std::vector<const Video*> reveal_target_labels(const Dataset& target_train, int k_shots) {
  std::vector<int> taken(static_cast<std::size_t>(std::max(target_train.num_classes, 0)), 0);
  std::vector<const Video*> out;
  for (const Video& v : target_train.videos) {
    if (v.label < 0 || v.label >= target_train.num_classes) continue;
    int& t = taken[static_cast<std::size_t>(v.label)];
    if (t < k_shots) {
      ++t;
      out.push_back(&v);
    }
  }
  return out;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open metrics file " + path.string());
  out_ << header() << '\n';
}

const char* MetricsWriter::header() {
  return "step,L_total,L_ce,L_bgm_src,L_bgm_tgt,L_tpl,A_size,pl_accuracy,s,mean_lambda,"
         "src_test_acc,tgt_test_acc";
}

void MetricsWriter::write(const StepReport& r, std::optional<double> src_acc,
                          std::optional<double> tgt_acc) {
  auto opt = [](std::optional<double> v) {
    std::ostringstream os;
    if (v) os << std::setprecision(17) << *v;
    return os.str();
  };
  out_ << std::setprecision(17) << r.step << ',' << r.loss.total << ',' << r.loss.ce << ','
       << r.loss.bgm_src << ',' << r.loss.bgm_tgt << ',' << r.loss.tpl << ',' << r.pseudo_count
       << ',' << opt(r.pseudo_accuracy) << ',' << r.slow_clips << ',' << r.mean_lambda << ','
       << opt(src_acc) << ',' << opt(tgt_acc) << '\n';
  out_.flush();
}

RunReport run_adaptation(const TrainConfig& cfg, const Datasets& data, const RunOptions& options) {
  cfg.validate();
  RunReport report;
  const BackgroundCache backgrounds = [&] {
    BackgroundCache cache(data.source_train);
    cache.add(data.target_train);
    return cache;
  }();

  EncoderParams params;
  if (options.warm_start) {
    params = *options.warm_start;
  } else {
    Rng init_rng(derive_seed(cfg.seed, 0x1417));
    params = pretrain_source(cfg, data.source_train,
                             init_encoder(cfg.encoder_config(data.source_train), init_rng));
  }
  report.baseline_source = evaluate(cfg, params, data.source_test);
  report.baseline_target = evaluate(cfg, params, data.target_test);

  std::optional<MetricsWriter> metrics;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    metrics.emplace(options.out_dir / "metrics.csv");
    save_checkpoint(params, options.out_dir / "warmstart.cmx");
  }

  StepContext ctx;
  ctx.backgrounds = &backgrounds;
  if (cfg.mode == TrainMode::semi_supervised) {
    ctx.labeled_target = reveal_target_labels(data.target_train, cfg.k_shots);
  }
  Rng rng(derive_seed(cfg.seed, 0xada7));
  OptimizerState opt;
  const std::size_t half = static_cast<std::size_t>(cfg.batch_size / 2);
  for (int step = 1; step <= cfg.adapt_iters; ++step) {
    const auto src = sample_videos(data.source_train.videos, half, rng);
    const auto tgt = sample_videos(data.target_train.videos, half, rng);
    StepReport r = adapt_step(cfg, src, tgt, ctx, params, opt, rng);
    r.step = step;
    std::optional<double> src_acc;
    std::optional<double> tgt_acc;
    if ((cfg.eval_every > 0 && step % cfg.eval_every == 0) || step == cfg.adapt_iters) {
      src_acc = evaluate(cfg, params, data.source_test).accuracy;
      tgt_acc = evaluate(cfg, params, data.target_test).accuracy;
    }
    if (metrics) metrics->write(r, src_acc, tgt_acc);
    if (!options.out_dir.empty() && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      save_checkpoint(params, options.out_dir / ("step_" + std::to_string(step) + ".cmx"));
    }
    if (options.on_step) options.on_step(r);
    report.steps.push_back(r);
  }
  report.final_source =
      cfg.adapt_iters == 0 ? report.baseline_source : evaluate(cfg, params, data.source_test);
  report.final_target =
      cfg.adapt_iters == 0 ? report.baseline_target : evaluate(cfg, params, data.target_test);
  if (!options.out_dir.empty()) save_checkpoint(params, options.out_dir / "final.cmx");
  report.params = std::move(params);
  return report;
}

}  // namespace comix
