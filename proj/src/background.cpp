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

#include <comix/autodiff.hpp>
#include <comix/background.hpp>

#include <stdexcept>
#include <string>

namespace comix {

BackgroundFrame extract_background_tmf(const Video& video) {
  if (video.num_frames() < 1) throw std::invalid_argument("background of an empty video");
  BackgroundFrame bg;
  bg.source_video_id = video.video_id;
  bg.height = video.height;
  bg.width = video.width;
  bg.channels = video.channels;
  bg.pixels.resize(1, video.frames.cols());
  std::vector<double> series(static_cast<std::size_t>(video.num_frames()));
  for (Eigen::Index p = 0; p < video.frames.cols(); ++p) {
    for (Eigen::Index t = 0; t < video.frames.rows(); ++t) {
      series[static_cast<std::size_t>(t)] = video.frames(t, p);
    }
    bg.pixels(0, p) = ad::median(series);
  }
  return bg;
}

double sample_mix_coefficient(double gamma, Rng& rng) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1], got " + std::to_string(gamma));
  }
  if (gamma == 0.0) return 0.0;
  return std::uniform_real_distribution<double>(0.0, gamma)(rng);
}

namespace {

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("mixing weight must lie in [0, 1], got " + std::to_string(lambda));
  }
}

}  // namespace

Video mix_background(const Video& video, const BackgroundFrame& bg, double lambda) {
  check_lambda(lambda);
  if (bg.height != video.height || bg.width != video.width || bg.channels != video.channels) {
    throw ShapeError("mix_background", Shape{video.height, video.width * video.channels},
                     Shape{bg.height, bg.width * bg.channels});
  }
  Video out = video;
  out.frames = convex_mix(video.frames, bg.pixels, lambda);
  out.provenance = Provenance::mixed;
  return out;
}

ClipBatch mix_clips(const ClipBatch& clips, const BackgroundFrame& bg, double lambda) {
  check_lambda(lambda);
  const Eigen::Index fs = bg.pixels.cols();
  if (clips.clip_len < 1 || clips.clips.cols() != fs * clips.clip_len) {
    throw ShapeError("mix_clips", shape_of(clips.clips), Shape{clips.clips.rows(), fs * clips.clip_len});
  }
  ClipBatch out = clips;
  out.provenance = Provenance::mixed;
  const Matrix tiled = bg.pixels.replicate(1, clips.clip_len);
  out.clips = convex_mix(clips.clips, tiled, lambda);
  return out;
}

BackgroundFrame blend_backgrounds(const BackgroundFrame& a, const BackgroundFrame& b,
                                  double weight) {
  check_lambda(weight);
  if (a.pixels.cols() != b.pixels.cols()) {
    throw ShapeError("blend_backgrounds", shape_of(a.pixels), shape_of(b.pixels));
  }
  BackgroundFrame out = a;
  out.pixels = weight * a.pixels + (1.0 - weight) * b.pixels;
  return out;
}

void BackgroundCache::add(const Dataset& ds) {
  for (const Video& v : ds.videos) frames_.insert_or_assign(v.video_id, extract_background_tmf(v));
}

const BackgroundFrame& BackgroundCache::at(std::uint32_t video_id) const {
  auto it = frames_.find(video_id);
  if (it == frames_.end()) {
    throw std::out_of_range("no cached background for video " + std::to_string(video_id));
  }
  return it->second;
}

}  // namespace comix
