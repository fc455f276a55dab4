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

#include <comix/tensor.hpp>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace comix {

struct PseudoLabelSet {
  struct Entry {
    std::uint32_t video_id = 0;
    int label = 0;
    double confidence = 0.0;
  };

  std::vector<Entry> entries;
  double threshold = 0.0;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  const Entry* find(std::uint32_t video_id) const;
};

/// Mean of the base-branch and auxiliary-branch logits.
template <typename A, typename B>
Vector fuse_logits(const Eigen::MatrixBase<A>& fast, const Eigen::MatrixBase<B>& slow) {
  if (fast.size() != slow.size()) throw ShapeError("fuse_logits", shape_of(fast), shape_of(slow));
  Vector out(fast.size());
  for (Eigen::Index i = 0; i < fast.size(); ++i) {
    out(i) = 0.5 * (fast.reshaped()(i) + slow.reshaped()(i));
  }
  return out;
}

/// Stable softmax of a logit vector.
Vector softmax(const Vector& logits);

/// Admits a video when its largest softmax probability is >= threshold; the
/// label is the argmax, ties resolved toward the lowest class index.
PseudoLabelSet assign_pseudo_labels(std::span<const std::pair<std::uint32_t, Vector>> fused,
                                    double threshold);

}  // namespace comix
