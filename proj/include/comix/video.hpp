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
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace comix {

using Rng = std::mt19937_64;

enum class Domain : std::uint8_t { source = 0, target = 1 };
enum class Split : std::uint8_t { train = 0, test = 1 };
enum class Speed : std::uint8_t { fast = 0, slow = 1 };
enum class Provenance : std::uint8_t { original = 0, mixed = 1 };

const char* to_string(Domain d);

/// A frame stack. `frames` holds one frame per row, each row the H x W x C
/// pixels of that frame in row-major order, intensities in [0, 1].
struct Video {
  std::uint32_t video_id = 0;
  Domain domain = Domain::source;
  /// Class id in [0, c), or -1 when unlabeled. Target-train labels are kept
  /// for diagnostics only; the trainer never optimizes against them unless
  /// they are revealed in semi-supervised mode.
  std::int32_t label = -1;
  /// In-memory only; CVD1 files always hold originals.
  Provenance provenance = Provenance::original;
  int height = 0;
  int width = 0;
  int channels = 0;
  Matrix frames;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  Eigen::Index frame_size() const { return static_cast<Eigen::Index>(height) * width * channels; }

  friend bool operator==(const Video& a, const Video& b) {
    return a.video_id == b.video_id && a.domain == b.domain && a.label == b.label &&
           a.height == b.height && a.width == b.width && a.channels == b.channels &&
           a.frames.rows() == b.frames.rows() && a.frames.cols() == b.frames.cols() &&
           a.frames == b.frames;
  }
};

struct Dataset {
  std::vector<Video> videos;
  int num_classes = 0;
  Split split = Split::train;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.num_classes == b.num_classes && a.videos == b.videos;
  }
};

/// n clips of clip_len consecutive frames. Row k of `clips` is clip k
/// flattened frame-major (clip_len x H x W x C).
struct ClipBatch {
  std::uint32_t video_id = 0;
  Speed speed = Speed::fast;
  Provenance provenance = Provenance::original;
  int clip_len = 0;
  std::vector<int> starts;
  Matrix clips;

  int num_clips() const { return static_cast<int>(starts.size()); }
};

enum class TrajectoryKind : std::uint8_t {
  sweep_horizontal,
  sweep_vertical,
  sweep_diagonal,
  orbit,
  sweep_horizontal_low,
  sweep_vertical_right,
  sweep_antidiagonal,
  figure_eight,
};

inline constexpr int kMaxClasses = 8;

/// What a foreground pattern does. Two videos with the same MotionSpec render
/// the same foreground pixels at the same places regardless of background.
struct MotionSpec {
  int class_id = 0;
  TrajectoryKind kind = TrajectoryKind::sweep_horizontal;
  std::uint64_t texture_seed = 0;
  double phase = 0.0;   // in [0, 1)
  double offset = 0.0;  // lateral offset of the path, in [0, 1)
};

enum class BackgroundStyle : std::uint8_t { smooth, stripes, checker, noise };

BackgroundStyle parse_background_style(const std::string& name);
const char* to_string(BackgroundStyle s);

struct GenConfig {
  int num_classes = 4;
  int videos_per_class = 25;
  int test_videos_per_class = 10;
  int frames = 64;
  int height = 16;
  int width = 16;
  int channels = 1;
  int clip_len = 4;
  int fast_clips = 16;
  BackgroundStyle source_background = BackgroundStyle::smooth;
  BackgroundStyle target_background = BackgroundStyle::stripes;
  std::uint64_t seed = 7;
};

struct DomainPair {
  Dataset source_train;
  Dataset source_test;
  Dataset target_train;
  Dataset target_test;
};

/// Deterministic in `cfg.seed`; each video draws from its own derived stream,
/// so the result does not depend on generation order.
DomainPair generate_domain_pair(const GenConfig& cfg);

MotionSpec make_motion_spec(int class_id, std::uint64_t seed);
/// Static background image, one row of H x W x C pixels.
Matrix render_background(BackgroundStyle style, int height, int width, int channels,
                         std::uint64_t seed);
/// Composites the foreground of `motion` over `background` for `frames` frames.
Video render_video(const MotionSpec& motion, const Matrix& background, int frames, int height,
                   int width, int channels);
/// Per-frame foreground mask (1 where the pattern is drawn), same layout as
/// Video::frames.
Matrix foreground_mask(const MotionSpec& motion, int frames, int height, int width,
                       int channels);

struct ClipOptions {
  /// Random global offset within the rounding slack instead of centering.
  bool jitter = false;
};

/// Uniformly spaced clip starts: stride = floor((T - clip_len) / (n - 1)), with
/// the rounding slack split evenly before the first and after the last clip.
std::vector<int> clip_starts(int num_frames, int n, int clip_len, Rng* rng = nullptr,
                             ClipOptions opts = {});

ClipBatch sample_clips(const Video& video, int n, int clip_len, Rng& rng, ClipOptions opts = {});
/// Same as sample_clips but with explicit starts.
ClipBatch clips_at(const Video& video, std::span<const int> starts, int clip_len);

int choose_slow_speed(std::span<const int> candidates, Rng& rng);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

// CVD1 dataset files.

enum class FormatErrc { bad_magic, bad_version, unexpected_eof, shape_overflow, io_failure };

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrc code, const std::string& what) : std::runtime_error(what), code(code) {}
  FormatErrc code;
};

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path, Split split = Split::train);

}  // namespace comix
