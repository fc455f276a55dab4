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
#include <comix/pseudolabel.hpp>
#include <comix/video.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace comix {

struct LossWeights {
  double lambda_bgm = 0.1;
  double lambda_tpl = 0.01;
  double tau = 0.5;
  double label_smoothing = 0.1;

  void validate() const;
};

/// exp(cos(u, v) / tau).
template <typename A, typename B>
double h_kernel(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v, double tau) {
  if (u.size() != v.size()) throw ShapeError("h_kernel", shape_of(u), shape_of(v));
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) {
    throw std::domain_error("h_kernel: zero-norm embedding");
  }
  const double dot = u.reshaped().dot(v.reshaped());
  return std::exp(dot / (nu * nv) / tau);
}

struct EmbeddingEntry {
  std::uint32_t video_id = 0;
  Domain domain = Domain::source;
  Speed speed = Speed::fast;
  Provenance provenance = Provenance::original;
  ad::Var z;  // 1 x c logits
};

/// Logit vectors of one step, at most one per (video, speed, provenance).
class EmbeddingBatch {
 public:
  void add(EmbeddingEntry entry);
  const std::vector<EmbeddingEntry>& entries() const { return entries_; }
  const EmbeddingEntry* find(std::uint32_t video_id, Speed speed, Provenance provenance) const;

 private:
  std::vector<EmbeddingEntry> entries_;
};

/// One domain's embeddings stacked into a single matrix, with the row of each
/// video's fast/slow (and optionally mixed) logits.
struct ContrastiveBatchView {
  struct VideoRows {
    std::uint32_t video_id = 0;
    std::size_t fast = 0;
    std::size_t slow = 0;
    std::optional<std::size_t> mixed_fast;
    std::optional<std::size_t> mixed_slow;
  };

  ad::Var stacked;
  std::vector<VideoRows> videos;

  std::size_t size() const { return videos.size(); }
  bool has_mixed() const;
};

/// Builds the view for `domain` in batch order of first appearance. Mixed
/// entries are included only when `include_mixed` is set.
ContrastiveBatchView make_view(const EmbeddingBatch& batch, Domain domain, bool include_mixed);

/// One anchor's term: -(1/|P|) sum_p log(h(a, p) / (sum_P h(a, .) + sum_N h(a, .))).
/// `negatives` may repeat rows; each occurrence adds one h to the denominator.
struct AnchorTerm {
  std::size_t anchor = 0;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

enum class Denominator {
  /// Denominators exactly as in the defining formulas.
  as_printed,
  /// Every non-anchor embedding appears once in the denominator.
  supcon,
};

std::vector<AnchorTerm> tcl_terms(const ContrastiveBatchView& view, std::size_t video);
std::vector<AnchorTerm> bgm_terms(const ContrastiveBatchView& view, std::size_t video);
std::vector<AnchorTerm> tpl_terms(const ContrastiveBatchView& view, const PseudoLabelSet& pseudo,
                                  std::size_t video, Denominator denominator = Denominator::as_printed);

struct ContrastiveResult {
  ad::Var loss;  // 1 x 1, mean over anchors
  std::size_t anchors = 0;
  std::size_t empty_positive = 0;
};

/// Mean of the anchor terms over the rows of `stacked`. Terms with no
/// positives contribute 0 and are counted in `empty_positive`.
ContrastiveResult contrastive_loss(const ad::Var& stacked, std::span<const AnchorTerm> terms,
                                   double tau);

/// Temporal contrastive loss over both anchor directions of every video.
ContrastiveResult tcl_loss(const ContrastiveBatchView& view, double tau);
/// Background-mixed loss over the four anchor pairings per video; reduces to
/// tcl_loss when the view has no mixed rows.
ContrastiveResult bgm_loss(const ContrastiveBatchView& view, double tau);
/// Pseudo-label supervised contrastive loss over the admitted videos.
ContrastiveResult tpl_loss(const ContrastiveBatchView& view, const PseudoLabelSet& pseudo,
                           double tau, Denominator denominator = Denominator::as_printed);

/// Mean label-smoothed cross-entropy of the rows of `logits`: the target puts
/// 1 - eps on the label and eps / (c - 1) on every other class.
ad::Var ce_smoothed(const ad::Var& logits, std::span<const int> labels, double eps);
double ce_smoothed(const Matrix& logits, int label, double eps);

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;
  double bgm_src = 0.0;
  double bgm_tgt = 0.0;
  double tpl = 0.0;
  std::size_t empty_positive = 0;
};

struct TotalLoss {
  ad::Var total;
  LossBreakdown values;
};

/// ce + lambda_bgm * (bgm_src + bgm_tgt) + lambda_tpl * tpl.
TotalLoss compose_total(const ad::Var& ce, const ad::Var& bgm_src, const ad::Var& bgm_tgt,
                        const ad::Var& tpl, const LossWeights& weights);

struct LossOptions {
  LossWeights weights;
  bool enable_bgm = true;               // false: plain temporal contrastive loss
  bool enable_tpl = true;
  bool enable_src_contrastive = true;
  Denominator denominator = Denominator::as_printed;
  /// Replace the pseudo-label contrastive term by CE on the pseudo-labels.
  bool self_training_ce = false;
};

/// Labeled target logits (semi-supervised mode), one row per video.
struct LabeledLogits {
  ad::Var logits;
  std::vector<int> labels;
};

/// Full objective for one step. `src_labels[i]` labels source video i of
/// `src`; CE uses the fast original logits. Rows of `labeled` join the source
/// rows in a single CE mean.
TotalLoss total_loss(const ContrastiveBatchView& src, const ContrastiveBatchView& tgt,
                     std::span<const int> src_labels, const PseudoLabelSet& pseudo,
                     const LossOptions& options, const std::optional<LabeledLogits>& labeled = {});

/// Fast original logits of every video in the view, stacked in view order.
ad::Var fast_logits(const ContrastiveBatchView& view);

}  // namespace comix
