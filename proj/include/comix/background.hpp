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

#include <comix/video.hpp>

#include <cstdint>
#include <unordered_map>

namespace comix {

struct BackgroundFrame {
  std::uint32_t source_video_id = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  /// 1 x (H * W * C), same pixel layout as a row of Video::frames.
  Matrix pixels;
};

/// Pixel-wise temporal median over all frames of `video`.
BackgroundFrame extract_background_tmf(const Video& video);

/// Draws lambda ~ U[0, gamma]. Throws for gamma outside [0, 1].
double sample_mix_coefficient(double gamma, Rng& rng);

/// (1 - lambda) * frames + lambda * background, applied to every row.
template <typename Derived>
Matrix convex_mix(const Eigen::MatrixBase<Derived>& frames, const Matrix& background,
                  double lambda) {
  if (background.rows() != 1 || background.cols() != frames.cols()) {
    throw ShapeError("convex_mix", shape_of(frames), shape_of(background));
  }
  return ((1.0 - lambda) * frames).rowwise() + lambda * background.row(0);
}

/// Every frame blended with `bg` at weight lambda. The result keeps the label
/// and id of `video` and is marked Provenance::mixed.
Video mix_background(const Video& video, const BackgroundFrame& bg, double lambda);

/// Clip-level equivalent of mix_background; each clip row holds clip_len
/// frames, each blended with `bg`.
ClipBatch mix_clips(const ClipBatch& clips, const BackgroundFrame& bg, double lambda);

/// weight * a + (1 - weight) * b; used by the cross-domain background variant.
BackgroundFrame blend_backgrounds(const BackgroundFrame& a, const BackgroundFrame& b,
                                  double weight);

/// Backgrounds computed once per dataset, keyed by video id.
class BackgroundCache {
 public:
  BackgroundCache() = default;
  explicit BackgroundCache(const Dataset& ds) { add(ds); }

  void add(const Dataset& ds);
  const BackgroundFrame& at(std::uint32_t video_id) const;
  bool contains(std::uint32_t video_id) const { return frames_.contains(video_id); }
  std::size_t size() const { return frames_.size(); }

 private:
  std::unordered_map<std::uint32_t, BackgroundFrame> frames_;
};

}  // namespace comix
