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

#include <comix/video.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace comix {

const char* to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

BackgroundStyle parse_background_style(const std::string& name) {
  if (name == "smooth") return BackgroundStyle::smooth;
  if (name == "stripes") return BackgroundStyle::stripes;
  if (name == "checker") return BackgroundStyle::checker;
  if (name == "noise") return BackgroundStyle::noise;
  throw std::invalid_argument("unknown background style '" + name + "'");
}

const char* to_string(BackgroundStyle s) {
  switch (s) {
    case BackgroundStyle::smooth: return "smooth";
    case BackgroundStyle::stripes: return "stripes";
    case BackgroundStyle::checker: return "checker";
    case BackgroundStyle::noise: return "noise";
  }
  return "?";
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Pixels are stored as doubles but kept exactly representable in f32 so the
// CVD1 round trip is lossless.
double quantize(double v) { return static_cast<double>(static_cast<float>(std::clamp(v, 0.0, 1.0))); }

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double triangle(double v) {
  const double f = v - std::floor(v);
  return 1.0 - std::abs(2.0 * f - 1.0);
}

int patch_size(int height, int width) { return std::max(2, std::min(height, width) / 4); }

struct Position {
  int x;
  int y;
};

Position trajectory(const MotionSpec& m, int t, int frames, int height, int width) {
  const int p = patch_size(height, width);
  const double sx = width - p;
  const double sy = height - p;
  const double u = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
  constexpr double kCycles = 2.0;
  const double w = kCycles * u + m.phase;
  const double tri = triangle(w);
  const double two_pi = 2.0 * std::numbers::pi;
  double x = 0.0;
  double y = 0.0;
  switch (m.kind) {
    case TrajectoryKind::sweep_horizontal:
      x = tri * sx;
      y = m.offset * sy / 4.0;
      break;
    case TrajectoryKind::sweep_vertical:
      x = m.offset * sx / 4.0;
      y = tri * sy;
      break;
    case TrajectoryKind::sweep_diagonal:
      x = tri * sx;
      y = tri * sy;
      break;
    case TrajectoryKind::orbit: {
      const double r = (0.25 + 0.1 * m.offset) * std::min(sx, sy);
      x = sx / 2.0 + r * std::cos(two_pi * w);
      y = sy / 2.0 + r * std::sin(two_pi * w);
      break;
    }
    case TrajectoryKind::sweep_horizontal_low:
      x = tri * sx;
      y = sy - m.offset * sy / 4.0;
      break;
    case TrajectoryKind::sweep_vertical_right:
      x = sx - m.offset * sx / 4.0;
      y = tri * sy;
      break;
    case TrajectoryKind::sweep_antidiagonal:
      x = tri * sx;
      y = sy - tri * sy;
      break;
    case TrajectoryKind::figure_eight: {
      const double r = (0.3 + 0.1 * m.offset) * std::min(sx, sy);
      x = sx / 2.0 + r * std::sin(two_pi * w);
      y = sy / 2.0 + 0.5 * r * std::sin(2.0 * two_pi * w);
      break;
    }
  }
  const int xi = std::clamp(static_cast<int>(std::lround(x)), 0, static_cast<int>(sx));
  const int yi = std::clamp(static_cast<int>(std::lround(y)), 0, static_cast<int>(sy));
  return {xi, yi};
}

Matrix patch_texture(const MotionSpec& m, int p, int channels) {
  Rng rng(m.texture_seed);
  Matrix tex(p * p, channels);
  for (Eigen::Index i = 0; i < tex.size(); ++i) tex.data()[i] = quantize(uniform(rng, 0.85, 1.0));
  return tex;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

MotionSpec make_motion_spec(int class_id, std::uint64_t seed) {
  if (class_id < 0 || class_id >= kMaxClasses) {
    throw std::invalid_argument("class id " + std::to_string(class_id) + " out of range [0, " +
                                std::to_string(kMaxClasses) + ")");
  }
  Rng rng(seed);
  MotionSpec m;
  m.class_id = class_id;
  m.kind = static_cast<TrajectoryKind>(class_id);
  m.texture_seed = rng();
  m.phase = uniform(rng, 0.0, 1.0);
  m.offset = uniform(rng, 0.0, 1.0);
  return m;
}

Matrix render_background(BackgroundStyle style, int height, int width, int channels,
                         std::uint64_t seed) {
  Rng rng(seed);
  const double two_pi = 2.0 * std::numbers::pi;
  Matrix bg(1, static_cast<Eigen::Index>(height) * width * channels);
  std::vector<double> tint(static_cast<std::size_t>(channels), 1.0);
  if (channels > 1) {
    for (double& t : tint) t = uniform(rng, 0.8, 1.0);
  }

  auto fill = [&](auto&& value_at) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double v = value_at(x, y);
        for (int c = 0; c < channels; ++c) {
          bg(0, (static_cast<Eigen::Index>(y) * width + x) * channels + c) =
              quantize(v * tint[static_cast<std::size_t>(c)]);
        }
      }
    }
  };

  switch (style) {
    case BackgroundStyle::smooth: {
      const double base = uniform(rng, 0.15, 0.35);
      double amp[2], fx[2], fy[2], ph[2];
      for (int k = 0; k < 2; ++k) {
        amp[k] = uniform(rng, 0.04, 0.08);
        const double theta = uniform(rng, 0.0, two_pi);
        const double freq = uniform(rng, 0.3, 1.2);
        fx[k] = freq * std::cos(theta) / width;
        fy[k] = freq * std::sin(theta) / height;
        ph[k] = uniform(rng, 0.0, two_pi);
      }
      fill([&](int x, int y) {
        double v = base;
        for (int k = 0; k < 2; ++k) v += amp[k] * std::sin(two_pi * (fx[k] * x + fy[k] * y) + ph[k]);
        return v;
      });
      break;
    }
    case BackgroundStyle::stripes: {
      const double base = uniform(rng, 0.45, 0.6);
      const double amp = uniform(rng, 0.2, 0.3);
      const double theta = uniform(rng, 0.0, std::numbers::pi);
      const double freq = uniform(rng, 2.5, 4.0);
      const double ph = uniform(rng, 0.0, two_pi);
      fill([&](int x, int y) {
        const double s = (x * std::cos(theta) + y * std::sin(theta)) / width;
        return base + amp * std::sin(two_pi * freq * s + ph);
      });
      break;
    }
    case BackgroundStyle::checker: {
      const double base = uniform(rng, 0.4, 0.6);
      const double amp = uniform(rng, 0.15, 0.25);
      const int cell = 2 + static_cast<int>(rng() % 3);
      const int sx = static_cast<int>(rng() % static_cast<std::uint64_t>(cell));
      fill([&](int x, int y) {
        const bool on = (((x + sx) / cell) + (y / cell)) % 2 == 0;
        return base + (on ? amp : -amp);
      });
      break;
    }
    case BackgroundStyle::noise: {
      const double base = uniform(rng, 0.3, 0.6);
      std::vector<double> px(static_cast<std::size_t>(height) * width);
      for (double& v : px) v = base + uniform(rng, -0.2, 0.2);
      fill([&](int x, int y) { return px[static_cast<std::size_t>(y) * width + x]; });
      break;
    }
  }
  return bg;
}

Matrix foreground_mask(const MotionSpec& motion, int frames, int height, int width,
                       int channels) {
  const int p = patch_size(height, width);
  Matrix mask = Matrix::Zero(frames, static_cast<Eigen::Index>(height) * width * channels);
  for (int t = 0; t < frames; ++t) {
    const Position pos = trajectory(motion, t, frames, height, width);
    for (int dy = 0; dy < p; ++dy) {
      for (int dx = 0; dx < p; ++dx) {
        for (int c = 0; c < channels; ++c) {
          mask(t, (static_cast<Eigen::Index>(pos.y + dy) * width + pos.x + dx) * channels + c) = 1.0;
        }
      }
    }
  }
  return mask;
}

Video render_video(const MotionSpec& motion, const Matrix& background, int frames, int height,
                   int width, int channels) {
  const Eigen::Index frame_size = static_cast<Eigen::Index>(height) * width * channels;
  if (background.rows() != 1 || background.cols() != frame_size) {
    throw ShapeError("render_video background", shape_of(background), Shape{1, frame_size});
  }
  const int p = patch_size(height, width);
  const Matrix tex = patch_texture(motion, p, channels);
  Video v;
  v.label = motion.class_id;
  v.height = height;
  v.width = width;
  v.channels = channels;
  v.frames = background.replicate(frames, 1);
  for (int t = 0; t < frames; ++t) {
    const Position pos = trajectory(motion, t, frames, height, width);
    for (int dy = 0; dy < p; ++dy) {
      for (int dx = 0; dx < p; ++dx) {
        for (int c = 0; c < channels; ++c) {
          v.frames(t, (static_cast<Eigen::Index>(pos.y + dy) * width + pos.x + dx) * channels + c) =
              tex(dy * p + dx, c);
        }
      }
    }
  }
  return v;
}

DomainPair generate_domain_pair(const GenConfig& cfg) {
  if (cfg.num_classes < 2 || cfg.num_classes > kMaxClasses) {
    throw std::invalid_argument("num_classes must be in [2, " + std::to_string(kMaxClasses) +
                                "], got " + std::to_string(cfg.num_classes));
  }
  if (cfg.height < 4 || cfg.width < 4 || cfg.channels < 1) {
    throw std::invalid_argument("frames must be at least 4x4 with one channel");
  }
  const int needed = cfg.fast_clips * cfg.clip_len;
  if (cfg.frames < needed) {
    throw std::invalid_argument("frames=" + std::to_string(cfg.frames) +
                                " too small for fast sampling: need at least " +
                                std::to_string(needed) + " (fast_clips * clip_len)");
  }

  DomainPair out;
  std::uint32_t next_id = 0;
  auto build = [&](Dataset& ds, Domain domain, Split split, int per_class) {
    ds.num_classes = cfg.num_classes;
    ds.split = split;
    const BackgroundStyle style =
        domain == Domain::source ? cfg.source_background : cfg.target_background;
    for (int i = 0; i < per_class; ++i) {
      for (int k = 0; k < cfg.num_classes; ++k) {
        const auto idx = static_cast<std::uint64_t>(i) * kMaxClasses + static_cast<std::uint64_t>(k);
        const auto d = static_cast<std::uint64_t>(domain);
        const auto s = static_cast<std::uint64_t>(split);
        const MotionSpec m = make_motion_spec(k, derive_seed(cfg.seed, 1 + d, s, idx));
        const Matrix bg =
            render_background(style, cfg.height, cfg.width, cfg.channels,
                              derive_seed(cfg.seed, 3 + d, s, idx));
        Video v = render_video(m, bg, cfg.frames, cfg.height, cfg.width, cfg.channels);
        v.video_id = next_id++;
        v.domain = domain;
        ds.videos.push_back(std::move(v));
      }
    }
  };
  build(out.source_train, Domain::source, Split::train, cfg.videos_per_class);
  build(out.source_test, Domain::source, Split::test, cfg.test_videos_per_class);
  build(out.target_train, Domain::target, Split::train, cfg.videos_per_class);
  build(out.target_test, Domain::target, Split::test, cfg.test_videos_per_class);
  return out;
}

std::vector<int> clip_starts(int num_frames, int n, int clip_len, Rng* rng, ClipOptions opts) {
  if (n < 1 || clip_len < 1) throw std::invalid_argument("clip count and clip_len must be >= 1");
  if (static_cast<long>(n) * clip_len > num_frames) {
    throw std::invalid_argument("cannot sample " + std::to_string(n) + " clips of length " +
                                std::to_string(clip_len) + " from " + std::to_string(num_frames) +
                                " frames");
  }
  std::vector<int> starts(static_cast<std::size_t>(n));
  if (n == 1) {
    starts[0] = 0;
    return starts;
  }
  const int span = num_frames - clip_len;
  const int stride = span / (n - 1);
  const int slack = span - stride * (n - 1);
  int offset = slack / 2;
  if (opts.jitter && rng != nullptr && slack > 0) {
    offset = std::uniform_int_distribution<int>(0, slack)(*rng);
  }
  for (int k = 0; k < n; ++k) starts[static_cast<std::size_t>(k)] = offset + k * stride;
  return starts;
}

ClipBatch clips_at(const Video& video, std::span<const int> starts, int clip_len) {
  ClipBatch cb;
  cb.video_id = video.video_id;
  cb.clip_len = clip_len;
  cb.starts.assign(starts.begin(), starts.end());
  const Eigen::Index fs = video.frame_size();
  cb.clips.resize(static_cast<Eigen::Index>(starts.size()), fs * clip_len);
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const int s = starts[k];
    if (s < 0 || s + clip_len > video.num_frames()) {
      throw std::out_of_range("clip start " + std::to_string(s) + " outside video of " +
                              std::to_string(video.num_frames()) + " frames");
    }
    // Row-major frames: clip_len consecutive rows are contiguous.
    cb.clips.row(static_cast<Eigen::Index>(k)) =
        Eigen::Map<const Eigen::RowVectorXd>(video.frames.row(s).data(), fs * clip_len);
  }
  return cb;
}

ClipBatch sample_clips(const Video& video, int n, int clip_len, Rng& rng, ClipOptions opts) {
  const std::vector<int> starts = clip_starts(video.num_frames(), n, clip_len, &rng, opts);
  return clips_at(video, starts, clip_len);
}

int choose_slow_speed(std::span<const int> candidates, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("no slow-speed candidates");
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(rng)];
}

}  // namespace comix
