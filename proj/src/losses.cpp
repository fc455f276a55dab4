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

#include <comix/losses.hpp>

#include <algorithm>
#include <functional>
#include <string>

namespace comix {

void LossWeights::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(lambda_bgm >= 0.0) || !(lambda_tpl >= 0.0)) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw std::invalid_argument("label smoothing must lie in [0, 1)");
  }
}

void EmbeddingBatch::add(EmbeddingEntry entry) {
  if (find(entry.video_id, entry.speed, entry.provenance) != nullptr) {
    throw std::invalid_argument("duplicate embedding for video " + std::to_string(entry.video_id));
  }
  if (entry.z.rows() != 1) throw ShapeError("EmbeddingBatch::add", entry.z.shape(), Shape{1, entry.z.cols()});
  entries_.push_back(std::move(entry));
}

const EmbeddingEntry* EmbeddingBatch::find(std::uint32_t video_id, Speed speed,
                                           Provenance provenance) const {
  for (const EmbeddingEntry& e : entries_) {
    if (e.video_id == video_id && e.speed == speed && e.provenance == provenance) return &e;
  }
  return nullptr;
}

bool ContrastiveBatchView::has_mixed() const {
  return std::any_of(videos.begin(), videos.end(),
                     [](const VideoRows& v) { return v.mixed_fast.has_value(); });
}

ContrastiveBatchView make_view(const EmbeddingBatch& batch, Domain domain, bool include_mixed) {
  std::vector<std::uint32_t> order;
  for (const EmbeddingEntry& e : batch.entries()) {
    if (e.domain == domain && std::find(order.begin(), order.end(), e.video_id) == order.end()) {
      order.push_back(e.video_id);
    }
  }
  ContrastiveBatchView view;
  std::vector<ad::Var> rows;
  auto take = [&](std::uint32_t id, Speed s, Provenance p, bool required) -> std::optional<std::size_t> {
    const EmbeddingEntry* e = batch.find(id, s, p);
    if (e == nullptr) {
      if (required) {
        throw std::invalid_argument("video " + std::to_string(id) + " lacks its " +
                                    (s == Speed::fast ? "fast" : "slow") +
                                    (p == Provenance::mixed ? " mixed" : "") + " embedding");
      }
      return std::nullopt;
    }
    rows.push_back(e->z);
    return rows.size() - 1;
  };
  for (std::uint32_t id : order) {
    ContrastiveBatchView::VideoRows v;
    v.video_id = id;
    v.fast = *take(id, Speed::fast, Provenance::original, true);
    v.slow = *take(id, Speed::slow, Provenance::original, true);
    if (include_mixed) {
      v.mixed_fast = take(id, Speed::fast, Provenance::mixed, true);
      v.mixed_slow = take(id, Speed::slow, Provenance::mixed, true);
    }
    view.videos.push_back(v);
  }
  if (rows.empty()) throw std::invalid_argument("no embeddings for the requested domain");
  view.stacked = ad::vstack(rows);
  return view;
}

namespace {

std::vector<std::size_t> rows_of(const ContrastiveBatchView::VideoRows& v, bool with_mixed) {
  std::vector<std::size_t> r = {v.fast, v.slow};
  if (with_mixed && v.mixed_fast) {
    r.push_back(*v.mixed_fast);
    r.push_back(*v.mixed_slow);
  }
  return r;
}

std::vector<AnchorTerm> instance_terms(const ContrastiveBatchView& view, std::size_t video,
                                       bool with_mixed) {
  if (video >= view.size()) throw std::out_of_range("anchor video index out of range");
  const std::vector<std::size_t> own = rows_of(view.videos[video], with_mixed);
  std::vector<std::size_t> others;
  for (std::size_t j = 0; j < view.size(); ++j) {
    if (j == video) continue;
    for (std::size_t r : rows_of(view.videos[j], with_mixed)) others.push_back(r);
  }
  std::vector<AnchorTerm> terms;
  for (std::size_t a : own) {
    AnchorTerm t;
    t.anchor = a;
    for (std::size_t p : own) {
      if (p != a) t.positives.push_back(p);
    }
    t.negatives = others;
    terms.push_back(std::move(t));
  }
  return terms;
}

}  // namespace

std::vector<AnchorTerm> tcl_terms(const ContrastiveBatchView& view, std::size_t video) {
  return instance_terms(view, video, false);
}

std::vector<AnchorTerm> bgm_terms(const ContrastiveBatchView& view, std::size_t video) {
  return instance_terms(view, video, true);
}

std::vector<AnchorTerm> tpl_terms(const ContrastiveBatchView& view, const PseudoLabelSet& pseudo,
                                  std::size_t video, Denominator denominator) {
  if (video >= view.size()) throw std::out_of_range("anchor video index out of range");
  const auto& vi = view.videos[video];
  const PseudoLabelSet::Entry* mine = pseudo.find(vi.video_id);
  if (mine == nullptr) {
    throw std::invalid_argument("video " + std::to_string(vi.video_id) +
                                " is not in the pseudo-labeled subset");
  }
  std::vector<AnchorTerm> terms;
  for (std::size_t anchor : {vi.fast, vi.slow}) {
    AnchorTerm t;
    t.anchor = anchor;
    for (std::size_t p = 0; p < view.size(); ++p) {
      const auto& vp = view.videos[p];
      const PseudoLabelSet::Entry* e = pseudo.find(vp.video_id);
      if (e == nullptr) continue;
      const bool same = e->label == mine->label;
      for (std::size_t r : {vp.slow, vp.fast}) {
        if (same && r != anchor) t.positives.push_back(r);
        if (p != video) {
          // As printed, every other admitted video is in the denominator even
          // when it is also a positive.
          if (denominator == Denominator::as_printed || !same) t.negatives.push_back(r);
        }
      }
    }
    terms.push_back(std::move(t));
  }
  return terms;
}

ContrastiveResult contrastive_loss(const ad::Var& stacked, std::span<const AnchorTerm> terms,
                                   double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  ad::Tape& tape = *stacked.tape();
  ContrastiveResult out;
  out.anchors = terms.size();
  std::vector<std::size_t> anchors;
  std::vector<const AnchorTerm*> live;
  for (const AnchorTerm& t : terms) {
    if (t.positives.empty()) {
      ++out.empty_positive;
      continue;
    }
    anchors.push_back(t.anchor);
    live.push_back(&t);
  }
  if (live.empty()) {
    out.loss = tape.constant(Matrix::Zero(1, 1));
    return out;
  }

  const auto m = stacked.rows();
  const auto k = static_cast<Eigen::Index>(live.size());
  Matrix multiplicity = Matrix::Zero(k, m);
  Matrix positive_weight = Matrix::Zero(k, m);
  for (Eigen::Index i = 0; i < k; ++i) {
    const AnchorTerm& t = *live[static_cast<std::size_t>(i)];
    const double w = 1.0 / static_cast<double>(t.positives.size());
    for (std::size_t p : t.positives) {
      multiplicity(i, static_cast<Eigen::Index>(p)) += 1.0;
      positive_weight(i, static_cast<Eigen::Index>(p)) += w;
    }
    for (std::size_t n : t.negatives) multiplicity(i, static_cast<Eigen::Index>(n)) += 1.0;
  }

  // log h(a, p) is exactly the scaled cosine, so the numerators need no exp/log.
  ad::Var unit = ad::row_normalize(stacked);
  ad::Var sims = ad::scale(ad::matmul(unit, ad::transpose(unit)), 1.0 / tau);
  ad::Var anchor_sims = ad::gather_rows(sims, anchors);
  ad::Var denom =
      ad::row_sum(ad::hadamard(ad::exp(anchor_sims), tape.constant(std::move(multiplicity))));
  ad::Var numer = ad::sum(ad::hadamard(anchor_sims, tape.constant(std::move(positive_weight))));
  ad::Var total = ad::sub(ad::sum(ad::log(denom)), numer);
  out.loss = ad::scale(total, 1.0 / static_cast<double>(terms.size()));
  return out;
}

namespace {

ContrastiveResult aggregate(const ContrastiveBatchView& view, double tau,
                            const std::function<std::vector<AnchorTerm>(std::size_t)>& terms_of,
                            const std::function<bool(std::size_t)>& include) {
  std::vector<AnchorTerm> terms;
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (!include(i)) continue;
    for (AnchorTerm& t : terms_of(i)) terms.push_back(std::move(t));
  }
  return contrastive_loss(view.stacked, terms, tau);
}

}  // namespace

ContrastiveResult tcl_loss(const ContrastiveBatchView& view, double tau) {
  return aggregate(
      view, tau, [&](std::size_t i) { return tcl_terms(view, i); },
      [](std::size_t) { return true; });
}

ContrastiveResult bgm_loss(const ContrastiveBatchView& view, double tau) {
  return aggregate(
      view, tau, [&](std::size_t i) { return bgm_terms(view, i); },
      [](std::size_t) { return true; });
}

ContrastiveResult tpl_loss(const ContrastiveBatchView& view, const PseudoLabelSet& pseudo,
                           double tau, Denominator denominator) {
  return aggregate(
      view, tau, [&](std::size_t i) { return tpl_terms(view, pseudo, i, denominator); },
      [&](std::size_t i) { return pseudo.find(view.videos[i].video_id) != nullptr; });
}

ad::Var ce_smoothed(const ad::Var& logits, std::span<const int> labels, double eps) {
  const Eigen::Index c = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw ShapeError("ce_smoothed labels", logits.shape(),
                     Shape{static_cast<Eigen::Index>(labels.size()), c});
  }
  if (c < 2) throw std::invalid_argument("ce_smoothed needs at least two classes");
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("label smoothing must lie in [0, 1)");
  Matrix target = Matrix::Constant(logits.rows(), c, eps / static_cast<double>(c - 1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(c) + ")");
    }
    target(static_cast<Eigen::Index>(i), labels[i]) = 1.0 - eps;
  }
  ad::Var logp = ad::log_softmax_rows(logits);
  ad::Var nll = ad::sum(ad::hadamard(logp, logits.tape()->constant(std::move(target))));
  return ad::scale(nll, -1.0 / static_cast<double>(logits.rows()));
}

double ce_smoothed(const Matrix& logits, int label, double eps) {
  ad::Tape tape;
  const int labels[] = {label};
  return ce_smoothed(tape.constant(logits), labels, eps).item();
}

TotalLoss compose_total(const ad::Var& ce, const ad::Var& bgm_src, const ad::Var& bgm_tgt,
                        const ad::Var& tpl, const LossWeights& weights) {
  weights.validate();
  TotalLoss out;
  out.total = ad::add(ad::add(ce, ad::scale(ad::add(bgm_src, bgm_tgt), weights.lambda_bgm)),
                      ad::scale(tpl, weights.lambda_tpl));
  out.values.ce = ce.item();
  out.values.bgm_src = bgm_src.item();
  out.values.bgm_tgt = bgm_tgt.item();
  out.values.tpl = tpl.item();
  out.values.total = out.total.item();
  return out;
}

ad::Var fast_logits(const ContrastiveBatchView& view) {
  std::vector<std::size_t> idx;
  for (const auto& v : view.videos) idx.push_back(v.fast);
  return ad::gather_rows(view.stacked, idx);
}

TotalLoss total_loss(const ContrastiveBatchView& src, const ContrastiveBatchView& tgt,
                     std::span<const int> src_labels, const PseudoLabelSet& pseudo,
                     const LossOptions& options, const std::optional<LabeledLogits>& labeled) {
  ad::Tape& tape = *src.stacked.tape();
  const LossWeights& w = options.weights;
  ad::Var ce;
  if (labeled && !labeled->labels.empty()) {
    std::vector<int> labels(src_labels.begin(), src_labels.end());
    labels.insert(labels.end(), labeled->labels.begin(), labeled->labels.end());
    const ad::Var rows[] = {fast_logits(src), labeled->logits};
    ce = ce_smoothed(ad::vstack(rows), labels, w.label_smoothing);
  } else {
    ce = ce_smoothed(fast_logits(src), src_labels, w.label_smoothing);
  }

  auto contrastive = [&](const ContrastiveBatchView& view) {
    if (options.enable_bgm) return bgm_loss(view, w.tau);
    return tcl_loss(view, w.tau);
  };
  std::size_t empty = 0;
  ad::Var zero = tape.constant(Matrix::Zero(1, 1));
  ad::Var bgm_src = zero;
  if (options.enable_src_contrastive) {
    ContrastiveResult r = contrastive(src);
    bgm_src = r.loss;
    empty += r.empty_positive;
  }
  ContrastiveResult rt = contrastive(tgt);
  empty += rt.empty_positive;
  ad::Var tpl = zero;
  if (options.enable_tpl && options.self_training_ce) {
    std::vector<std::size_t> rows;
    std::vector<int> labels;
    for (const auto& v : tgt.videos) {
      if (const PseudoLabelSet::Entry* e = pseudo.find(v.video_id)) {
        rows.push_back(v.fast);
        labels.push_back(e->label);
      }
    }
    if (!rows.empty()) {
      tpl = ce_smoothed(ad::gather_rows(tgt.stacked, rows), labels, w.label_smoothing);
    }
  } else if (options.enable_tpl) {
    ContrastiveResult r = tpl_loss(tgt, pseudo, w.tau, options.denominator);
    tpl = r.loss;
    empty += r.empty_positive;
  }
  TotalLoss out = compose_total(ce, bgm_src, rt.loss, tpl, w);
  out.values.empty_positive = empty;
  return out;
}

}  // namespace comix
