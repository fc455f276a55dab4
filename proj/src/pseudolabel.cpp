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

#include <comix/pseudolabel.hpp>

#include <stdexcept>
#include <string>

namespace comix {

const PseudoLabelSet::Entry* PseudoLabelSet::find(std::uint32_t video_id) const {
  for (const Entry& e : entries) {
    if (e.video_id == video_id) return &e;
  }
  return nullptr;
}

Vector softmax(const Vector& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

PseudoLabelSet assign_pseudo_labels(std::span<const std::pair<std::uint32_t, Vector>> fused,
                                    double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("pseudo-label threshold must lie in (0, 1], got " +
                                std::to_string(threshold));
  }
  PseudoLabelSet out;
  out.threshold = threshold;
  for (const auto& [id, z] : fused) {
    if (out.find(id) != nullptr) {
      throw std::invalid_argument("duplicate video id " + std::to_string(id) + " in pseudo-labeling");
    }
    const Vector p = softmax(z);
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < p.size(); ++k) {
      if (p(k) > p(best)) best = k;
    }
    if (p(best) >= threshold) {
      out.entries.push_back({id, static_cast<int>(best), p(best)});
    }
  }
  return out;
}

}  // namespace comix
