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

#include <comix/background.hpp>
#include <comix/encoder.hpp>
#include <comix/losses.hpp>
#include <comix/pseudolabel.hpp>
#include <comix/trainer.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace comix;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Admits a random non-empty subset with labels in [0, classes).
void random_pseudo(std::vector<oracle::Video>& vids, int classes, std::mt19937_64& rng, std::size_t min_admitted = 1) {
  std::size_t admitted = 0;
  while (admitted < std::min(min_admitted, vids.size())) {
    admitted = 0;
    for (auto& v : vids) {
      v.pseudo.reset();
      if (uniform_int(rng, 0, 2) > 0) {
        v.pseudo = uniform_int(rng, 0, classes - 1);
        ++admitted;
      }
    }
  }
}

std::vector<int> random_labels(std::size_t n, int classes, std::mt19937_64& rng) {
  std::vector<int> out(n);
  for (int& l : out) l = uniform_int(rng, 0, classes - 1);
  return out;
}

std::vector<oracle::Video> without_mixed(std::vector<oracle::Video> vids) {
  for (auto& v : vids) v.mixed_fast = v.mixed_slow = std::nullopt;
  return vids;
}

Matrix rows_of(const std::vector<oracle::Vec>& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < rows[r].size(); ++k) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
  }
  return m;
}

struct Objective {
  std::vector<oracle::Video> src, tgt;
  std::vector<int> src_labels;
  std::vector<oracle::Vec> labeled;
  std::vector<int> labeled_labels;
  LossOptions options;
};

Objective random_objective(std::mt19937_64& rng) {
  Objective o;
  const auto b = static_cast<std::size_t>(uniform_int(rng, 1, 4));
  const int c = uniform_int(rng, 2, 4);
  o.src = oracle::random_videos(b, static_cast<std::size_t>(c), true, rng, 0);
  o.tgt = oracle::random_videos(b, static_cast<std::size_t>(c), true, rng, 100);
  random_pseudo(o.tgt, c, rng);
  o.src_labels = random_labels(b, c, rng);
  const int n_labeled = uniform_int(rng, 0, 2);
  for (int i = 0; i < n_labeled; ++i) o.labeled.push_back(oracle::random_vec(static_cast<std::size_t>(c), rng));
  o.labeled_labels = random_labels(o.labeled.size(), c, rng);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  o.options.weights.lambda_bgm = w(rng);
  o.options.weights.lambda_tpl = w(rng);
  o.options.weights.tau = 0.1 + w(rng);
  o.options.weights.label_smoothing = 0.3 * w(rng);
  return o;
}

// Library objective with the embeddings taken from tape leaves.
ad::Var library_total(const Objective& o, const ad::Var& zs, const ad::Var& zt, const std::optional<ad::Var>& zl) {
  EmbeddingBatch batch = testing::batch_from(zs, o.src, Domain::source);
  const EmbeddingBatch target = testing::batch_from(zt, o.tgt, Domain::target);
  for (const EmbeddingEntry& e : target.entries()) batch.add(e);
  std::optional<LabeledLogits> labeled;
  if (zl) labeled = LabeledLogits{*zl, o.labeled_labels};
  return total_loss(make_view(batch, Domain::source, true), make_view(batch, Domain::target, true), o.src_labels,
                    testing::pseudo_of(o.tgt), o.options, labeled)
      .total;
}

double oracle_total(const Objective& o) {
  const LossWeights& w = o.options.weights;
  double ce = 0.0;
  for (std::size_t i = 0; i < o.src.size(); ++i) ce += oracle::ce(o.src[i].fast, o.src_labels[i], w.label_smoothing);
  for (std::size_t i = 0; i < o.labeled.size(); ++i) ce += oracle::ce(o.labeled[i], o.labeled_labels[i], w.label_smoothing);
  ce /= static_cast<double>(o.src.size() + o.labeled.size());
  return ce + w.lambda_bgm * (oracle::bgm(o.src, w.tau) + oracle::bgm(o.tgt, w.tau)) +
         w.lambda_tpl * oracle::tpl(without_mixed(o.tgt), w.tau);
}

struct Contrastive {
  double tcl, bgm, tpl, tpl_supcon;
};

Contrastive library_contrastive(const std::vector<oracle::Video>& vids, double tau) {
  ad::Tape t;
  const ad::Var z = t.constant(testing::stack(vids));
  const EmbeddingBatch batch = testing::batch_from(z, vids);
  const ContrastiveBatchView plain = make_view(batch, Domain::source, false);
  const ContrastiveBatchView full = make_view(batch, Domain::source, vids.front().mixed_fast.has_value());
  const PseudoLabelSet pseudo = testing::pseudo_of(vids);
  return {tcl_loss(plain, tau).loss.item(), bgm_loss(full, tau).loss.item(), tpl_loss(plain, pseudo, tau).loss.item(),
          tpl_loss(plain, pseudo, tau, Denominator::supcon).loss.item()};
}

// 1: central-difference gradient checks of every loss and of the encoder.
void gradient_suite() {
  const auto t0 = Clock::now();
  constexpr double kStep = 1e-5;
  constexpr double kTol = 1e-3;
  std::mt19937_64 rng(20240601);
  int checked = 0;
  int passed = 0;
  double worst = 0.0;
  std::string worst_what;
  auto record = [&](const ad::GradCheckReport& r, const std::string& what) {
    ++checked;
    if (r.passed) ++passed;
    if (!r.passed) std::printf("  %s: %s\n", what.c_str(), r.diagnostic.c_str());
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_what = what;
    }
  };

  for (int trial = 0; trial < 25; ++trial) {
    // One video has no negatives and a constant contrastive loss.
    const auto b = static_cast<std::size_t>(uniform_int(rng, 2, 4));
    const int c = uniform_int(rng, 2, 4);
    auto vids = oracle::random_videos(b, static_cast<std::size_t>(c), true, rng);
    random_pseudo(vids, c, rng, 2);
    const PseudoLabelSet pseudo = testing::pseudo_of(vids);
    const std::vector<Matrix> leaves = {testing::stack(vids)};
    const double tau = 0.5;
    record(ad::finite_difference_check(
               [&](ad::Tape&, std::span<const ad::Var> v) {
                 return tcl_loss(make_view(testing::batch_from(v[0], vids), Domain::source, false), tau).loss;
               },
               leaves, kStep, kTol),
           "tcl");
    record(ad::finite_difference_check(
               [&](ad::Tape&, std::span<const ad::Var> v) {
                 return bgm_loss(make_view(testing::batch_from(v[0], vids), Domain::source, true), tau).loss;
               },
               leaves, kStep, kTol),
           "bgm");
    record(ad::finite_difference_check(
               [&](ad::Tape&, std::span<const ad::Var> v) {
                 return tpl_loss(make_view(testing::batch_from(v[0], vids), Domain::source, false), pseudo, tau).loss;
               },
               leaves, kStep, kTol),
           "tpl");

    const std::vector<int> labels = random_labels(b, c, rng);
    std::vector<oracle::Vec> logits;
    for (std::size_t i = 0; i < b; ++i) logits.push_back(oracle::random_vec(static_cast<std::size_t>(c), rng));
    record(ad::finite_difference_check(
               [&](ad::Tape&, std::span<const ad::Var> v) { return ce_smoothed(v[0], labels, 0.1); },
               std::vector<Matrix>{rows_of(logits)}, kStep, kTol),
           "ce");

    const Objective o = random_objective(rng);
    std::vector<Matrix> total_leaves = {testing::stack(o.src), testing::stack(o.tgt)};
    if (!o.labeled.empty()) total_leaves.push_back(rows_of(o.labeled));
    record(ad::finite_difference_check(
               [&](ad::Tape&, std::span<const ad::Var> v) {
                 return library_total(o, v[0], v[1], v.size() > 2 ? std::optional<ad::Var>(v[2]) : std::nullopt);
               },
               total_leaves, kStep, kTol),
           "total");
  }

  for (int trial = 0; trial < 50; ++trial) {
    const testing::EncoderInstance inst = testing::random_encoder_instance(rng);
    const Matrix clips = inst.clips;
    Matrix weights(1, inst.params.num_classes());
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index k = 0; k < weights.size(); ++k) weights(0, k) = g(rng);
    record(ad::finite_difference_check(
               [&](ad::Tape& t, std::span<const ad::Var> v) {
                 const EncoderVars vars = testing::vars_from(v);
                 return ad::hadamard(gcn_forward(featurize_clips(t.constant(clips), vars), vars), t.constant(weights));
               },
               testing::leaves_of(inst.params), kStep, kTol),
           "encoder");
  }

  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << passed << "/" << checked << " instances within rel. tol 1e-3, worst " << fmt("%.2e", worst) << " (" << worst_what
    << "), " << fmt("%.1f", secs) << " s";
  report(1, passed == checked && checked >= 100 && secs < 60.0, d.str());
}

// 2: library losses against pair enumeration.
void oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  double worst = 0.0;
  int instances = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto b = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    const int c = uniform_int(rng, 2, 4);
    const double tau = 0.1 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto vids = oracle::random_videos(b, static_cast<std::size_t>(c), true, rng);
    random_pseudo(vids, c, rng);
    const Contrastive lib = library_contrastive(vids, tau);
    const auto plain = without_mixed(vids);
    worst = std::max({worst, std::abs(lib.tcl - oracle::tcl(plain, tau)), std::abs(lib.bgm - oracle::bgm(vids, tau)),
                      std::abs(lib.tpl - oracle::tpl(plain, tau)),
                      std::abs(lib.tpl_supcon - oracle::tpl(plain, tau, true))});

    const Objective o = random_objective(rng);
    ad::Tape t;
    const std::optional<ad::Var> zl =
        o.labeled.empty() ? std::nullopt : std::optional<ad::Var>(t.constant(rows_of(o.labeled)));
    const double total = library_total(o, t.constant(testing::stack(o.src)), t.constant(testing::stack(o.tgt)), zl).item();
    worst = std::max(worst, std::abs(total - oracle_total(o)));
    ++instances;
  }
  const double secs = seconds_since(t0);
  report(2, worst <= 1e-12 && secs < 10.0,
         std::to_string(instances) + " instances, max abs diff " + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s");
}

const DomainPair& small_pair() {
  static const DomainPair p = [] {
    GenConfig g;
    g.videos_per_class = 4;
    g.test_videos_per_class = 2;
    g.seed = 3;
    return generate_domain_pair(g);
  }();
  return p;
}

// 3: exact reductions.
void reductions() {
  std::mt19937_64 rng(5);
  bool bgm_is_tcl = true;
  for (int trial = 0; trial < 100; ++trial) {
    const auto vids = oracle::random_videos(static_cast<std::size_t>(uniform_int(rng, 1, 4)),
                                            static_cast<std::size_t>(uniform_int(rng, 2, 4)), false, rng);
    ad::Tape t;
    const EmbeddingBatch batch = testing::batch_from(t.constant(testing::stack(vids)), vids);
    const ContrastiveBatchView view = make_view(batch, Domain::source, false);
    bgm_is_tcl = bgm_is_tcl && bgm_loss(view, 0.5).loss.item() == tcl_loss(view, 0.5).loss.item();
  }

  bool step_is_ce = true;
  const DomainPair& d = small_pair();
  for (bool bgm : {true, false}) {
    TrainConfig cfg;
    cfg.lambda_bgm = 0.0;
    cfg.lambda_tpl = 0.0;
    cfg.enable_bgm = bgm;
    std::vector<const Video*> src, tgt;
    for (std::size_t i = 0; i < 4; ++i) {
      src.push_back(&d.source_train.videos[i * 4]);
      tgt.push_back(&d.target_train.videos[i * 4 + 1]);
    }
    BackgroundCache cache(d.source_train);
    cache.add(d.target_train);
    const StepContext ctx{&cache, {}};
    Rng init(1);
    EncoderParams pa = init_encoder(cfg.encoder_config(d.source_train), init);
    EncoderParams pb = pa;
    OptimizerState oa, ob;
    Rng ra(9), rb(9);
    for (int step = 0; step < 5; ++step) {
      const EncoderParams before = pa;
      (void)adapt_step(cfg, src, tgt, ctx, pa, oa, ra);
      source_ce_step(cfg, src, tgt, pb, ob, rb);
      step_is_ce = step_is_ce && pa == pb && !(pa == before);
    }
  }

  bool mix_identity = true;
  for (const Video& v : d.source_train.videos) {
    const BackgroundFrame bg = extract_background_tmf(d.target_train.videos[v.video_id % d.target_train.videos.size()]);
    mix_identity = mix_identity && mix_background(v, bg, 0.0).frames == v.frames;
  }

  report(3, bgm_is_tcl && step_is_ce && mix_identity,
         std::string("bgm==tcl without mixed rows: ") + (bgm_is_tcl ? "yes" : "no") +
             "; zero-weight step == source CE step: " + (step_is_ce ? "yes" : "no") +
             "; mix at lambda 0 is identity: " + (mix_identity ? "yes" : "no"));
}

// 4: invariances.
void invariances() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  double worst_loss = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int c = uniform_int(rng, 2, 4);
    auto vids = oracle::random_videos(static_cast<std::size_t>(uniform_int(rng, 2, 4)), static_cast<std::size_t>(c),
                                      true, rng);
    random_pseudo(vids, c, rng);
    const Contrastive base = library_contrastive(vids, 0.5);

    auto scaled = vids;
    for (auto& v : scaled) {
      for (oracle::Vec* e : {&v.fast, &v.slow, &*v.mixed_fast, &*v.mixed_slow}) {
        const double a = scale(rng);
        for (double& x : *e) x *= a;
      }
    }
    auto permuted = vids;
    std::shuffle(permuted.begin(), permuted.end(), rng);
    for (const auto& other : {scaled, permuted}) {
      const Contrastive s = library_contrastive(other, 0.5);
      worst_loss = std::max({worst_loss, std::abs(s.tcl - base.tcl), std::abs(s.bgm - base.bgm),
                             std::abs(s.tpl - base.tpl), std::abs(s.tpl_supcon - base.tpl_supcon)});
    }
  }

  double worst_row = 0.0;
  std::normal_distribution<double> g(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = uniform_int(rng, 1, 16);
    const int k = uniform_int(rng, 1, 32);
    Matrix nodes(n, k), phi(k, k), phi_p(k, k);
    for (Matrix* m : {&nodes, &phi, &phi_p}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = g(rng);
    }
    const Matrix a = similarity_adjacency(nodes, phi, phi_p).weights;
    worst_row = std::max(worst_row, (a.rowwise().sum().array() - 1.0).abs().maxCoeff());
  }

  double worst_diff = 0.0;
  const DomainPair& d = small_pair();
  std::uniform_real_distribution<double> lam(0.0, 1.0);
  for (const Video& v : d.source_train.videos) {
    const BackgroundFrame bg = extract_background_tmf(d.target_train.videos[v.video_id % d.target_train.videos.size()]);
    const double lambda = lam(rng);
    const Video m = mix_background(v, bg, lambda);
    for (Eigen::Index t = 1; t < v.frames.rows(); ++t) {
      const Matrix d_out = m.frames.row(t) - m.frames.row(t - 1);
      const Matrix d_in = (1.0 - lambda) * (v.frames.row(t) - v.frames.row(t - 1));
      worst_diff = std::max(worst_diff, (d_out - d_in).cwiseAbs().maxCoeff());
    }
  }

  // Pixels lie in [0, 1], so 4 ulp of 1.0 bounds the rounding of the blend.
  const double rounding = 4.0 * std::numeric_limits<double>::epsilon();
  report(4, worst_loss <= 1e-12 && worst_row <= 1e-9 && worst_diff <= rounding,
         "scale/permutation max diff " + fmt("%.2e", worst_loss) + "; adjacency row sum error " + fmt("%.2e", worst_row) +
             "; frame difference error " + fmt("%.2e", worst_diff));
}

struct BenchmarkSeed {
  double source_only = 0.0;
  double full = 0.0;
  double tcl_only = 0.0;
  double semi1 = 0.0;
  double semi3 = 0.0;
};

TrainConfig benchmark_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.batch_size = 16;
  cfg.warmstart_iters = 300;
  cfg.adapt_iters = 300;
  cfg.eval_every = 300;
  return cfg;
}

Datasets benchmark_data(std::uint64_t seed) {
  GenConfig g;
  g.num_classes = 4;
  g.test_videos_per_class = 25;
  g.seed = 100 + seed;
  const DomainPair p = generate_domain_pair(g);
  return {p.source_train, p.source_test, p.target_train, p.target_test};
}

struct Benchmark {
  std::vector<BenchmarkSeed> seeds;
  double seconds = 0.0;
};

Benchmark run_benchmark() {
  const auto t0 = Clock::now();
  Benchmark b;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Datasets data = benchmark_data(seed);
    BenchmarkSeed r;
    const TrainConfig full = benchmark_config(seed);
    const RunReport full_run = run_adaptation(full, data, {});
    r.source_only = full_run.baseline_target.accuracy;
    r.full = full_run.final_target.accuracy;

    TrainConfig tcl = full;
    tcl.enable_bgm = false;
    tcl.enable_tpl = false;
    r.tcl_only = run_adaptation(tcl, data, {}).final_target.accuracy;

    TrainConfig semi = full;
    semi.mode = TrainMode::semi_supervised;
    semi.k_shots = 1;
    r.semi1 = run_adaptation(semi, data, {}).final_target.accuracy;
    semi.k_shots = 3;
    r.semi3 = run_adaptation(semi, data, {}).final_target.accuracy;

    std::printf("  seed %d: source-only %.3f  full %.3f  tcl-only %.3f  semi(1) %.3f  semi(3) %.3f\n",
                static_cast<int>(seed), r.source_only, r.full, r.tcl_only, r.semi1, r.semi3);
    std::fflush(stdout);
    b.seeds.push_back(r);
  }
  b.seconds = seconds_since(t0);
  return b;
}

double mean_of(const Benchmark& b, double BenchmarkSeed::*field) {
  double s = 0.0;
  for (const BenchmarkSeed& r : b.seeds) s += r.*field;
  return s / static_cast<double>(b.seeds.size());
}

// 5: synthetic adaptation benchmark.
void adaptation_benchmark(const Benchmark& b) {
  const double base = mean_of(b, &BenchmarkSeed::source_only);
  const double full = mean_of(b, &BenchmarkSeed::full);
  const double tcl = mean_of(b, &BenchmarkSeed::tcl_only);
  report(5, full >= base + 0.05 && full >= tcl && b.seconds < 900.0,
         "mean target acc: source-only " + fmt("%.3f", base) + ", full " + fmt("%.3f", full) + " (" +
             fmt("%+.1f", 100.0 * (full - base)) + " pp), tcl-only " + fmt("%.3f", tcl) + "; benchmark " +
             fmt("%.0f", b.seconds) + " s");
}

// 6: pseudo-label admission.
void pseudo_labels() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 3.0);
  const std::vector<double> thresholds = {0.0001, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0};
  bool monotone = true;
  for (int batch = 0; batch < 1000; ++batch) {
    const int c = uniform_int(rng, 2, 6);
    std::vector<std::pair<std::uint32_t, Vector>> fused;
    for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(uniform_int(rng, 1, 8)); ++i) {
      Vector fast(c), slow(c);
      for (Eigen::Index k = 0; k < c; ++k) {
        fast(k) = g(rng);
        slow(k) = g(rng);
      }
      fused.emplace_back(i, fuse_logits(fast, slow));
    }
    std::vector<std::uint32_t> prev;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      std::vector<std::uint32_t> ids;
      for (const auto& e : assign_pseudo_labels(fused, thresholds[t]).entries) ids.push_back(e.video_id);
      std::sort(ids.begin(), ids.end());
      // Raising the threshold may only remove videos.
      if (t > 0) monotone = monotone && std::includes(prev.begin(), prev.end(), ids.begin(), ids.end());
      prev = ids;
    }
  }

  bool uniform_rejected = true;
  std::uniform_real_distribution<double> level(-50.0, 50.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector z = Vector::Constant(4, level(rng));
    const std::pair<std::uint32_t, Vector> one[] = {{0u, fuse_logits(z, z)}};
    uniform_rejected = uniform_rejected && assign_pseudo_labels(one, 0.7).empty();
  }
  report(6, monotone && uniform_rejected,
         std::string("monotone over 1000 batches: ") + (monotone ? "yes" : "no") +
             "; uniform c=4 never admitted at 0.7: " + (uniform_rejected ? "yes" : "no"));
}

// 7: uniform speed sampling.
void speed_sampling() {
  const int candidates[] = {12, 8, 4};
  Rng rng(derive_seed(2024, 7));
  int counts[3] = {0, 0, 0};
  constexpr int kDraws = 3000;
  for (int i = 0; i < kDraws; ++i) {
    const int s = choose_slow_speed(candidates, rng);
    for (int k = 0; k < 3; ++k) counts[k] += s == candidates[k];
  }
  const double expected = kDraws / 3.0;
  double chi2 = 0.0;
  for (int n : counts) chi2 += (n - expected) * (n - expected) / expected;
  // Two degrees of freedom: the survival function is exp(-x / 2).
  const double critical = -2.0 * std::log(0.01);
  report(7, counts[0] + counts[1] + counts[2] == kDraws && chi2 < critical,
         "counts " + std::to_string(counts[0]) + "/" + std::to_string(counts[1]) + "/" + std::to_string(counts[2]) +
             ", chi2 " + fmt("%.3f", chi2) + " < " + fmt("%.3f", critical));
}

// 8: two identical runs produce identical files.
void determinism() {
  TrainConfig cfg = benchmark_config(0);
  cfg.eval_every = 50;
  cfg.checkpoint_every = 100;
  const Datasets data = benchmark_data(0);
  const auto a = testing::temp_dir("accept_run_a");
  const auto b = testing::temp_dir("accept_run_b");
  (void)run_adaptation(cfg, data, {a, std::nullopt, {}});
  (void)run_adaptation(cfg, data, {b, std::nullopt, {}});
  int files = 0;
  bool same = true;
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    const auto name = entry.path().filename();
    ++files;
    same = same && std::filesystem::exists(b / name) && slurp(a / name) == slurp(b / name);
  }
  for (const auto& entry : std::filesystem::directory_iterator(b)) same = same && std::filesystem::exists(a / entry.path().filename());
  const bool has_outputs = std::filesystem::exists(a / "metrics.csv") && std::filesystem::exists(a / "final.cmx");
  report(8, same && has_outputs, std::to_string(files) + " files (metrics CSV and checkpoints) " +
                                     (same ? "bit-identical" : "differ"));
}

// 9: semi-supervised trend.
void semi_supervised(const Benchmark& b) {
  const double unsup = mean_of(b, &BenchmarkSeed::full);
  const double s1 = mean_of(b, &BenchmarkSeed::semi1);
  const double s3 = mean_of(b, &BenchmarkSeed::semi3);
  report(9, s3 >= s1 && s1 >= unsup,
         "mean target acc: semi(3) " + fmt("%.3f", s3) + ", semi(1) " + fmt("%.3f", s1) + ", unsupervised " +
             fmt("%.3f", unsup));
}

}  // namespace

int main() {
  gradient_suite();
  oracle_equivalence();
  reductions();
  invariances();
  const Benchmark bench = run_benchmark();
  adaptation_benchmark(bench);
  pseudo_labels();
  speed_sampling();
  determinism();
  semi_supervised(bench);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
