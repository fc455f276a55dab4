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

#include <comix/config.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace comix {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("not a number: '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw std::invalid_argument("not a boolean: '" + text + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Key {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw std::out_of_range(what);
}

Key int_key(int GenConfig::*gen, int TrainConfig::*train, int lo, int hi) {
  return {[=](RunConfig& c, const std::string& v) {
            const int x = parse_number<int>(v);
            require(x >= lo && x <= hi, "value " + v + " outside [" + std::to_string(lo) + ", " +
                                            std::to_string(hi) + "]");
            if (gen) c.gen.*gen = x;
            if (train) c.train.*train = x;
          },
          [=](const RunConfig& c) { return std::to_string(train ? c.train.*train : c.gen.*gen); }};
}

Key double_key(double TrainConfig::*field, double lo, double hi, bool open_lo = false) {
  return {[=](RunConfig& c, const std::string& v) {
            const double x = parse_number<double>(v);
            const bool lo_ok = open_lo ? x > lo : x >= lo;
            require(lo_ok && x <= hi, "value " + v + " outside " + (open_lo ? "(" : "[") +
                                          format_double(lo) + ", " + format_double(hi) + "]");
            c.train.*field = x;
          },
          [=](const RunConfig& c) { return format_double(c.train.*field); }};
}

Key bool_key(bool TrainConfig::*field) {
  return {[=](RunConfig& c, const std::string& v) { c.train.*field = parse_bool(v); },
          [=](const RunConfig& c) { return std::string(c.train.*field ? "true" : "false"); }};
}

Key style_key(BackgroundStyle GenConfig::*field) {
  return {[=](RunConfig& c, const std::string& v) { c.gen.*field = parse_background_style(v); },
          [=](const RunConfig& c) { return std::string(to_string(c.gen.*field)); }};
}

const std::map<std::string, Key>& keys() {
  constexpr int kBig = 1 << 24;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  static const std::map<std::string, Key> table = {
      {"num_classes", int_key(&GenConfig::num_classes, nullptr, 2, kMaxClasses)},
      {"videos_per_class", int_key(&GenConfig::videos_per_class, nullptr, 1, kBig)},
      {"test_videos_per_class", int_key(&GenConfig::test_videos_per_class, nullptr, 1, kBig)},
      {"frames", int_key(&GenConfig::frames, nullptr, 1, kBig)},
      {"height", int_key(&GenConfig::height, nullptr, 2, 4096)},
      {"width", int_key(&GenConfig::width, nullptr, 2, 4096)},
      {"channels", int_key(&GenConfig::channels, nullptr, 1, 4)},
      {"clip_len", int_key(&GenConfig::clip_len, &TrainConfig::clip_len, 1, kBig)},
      {"fast_clips", int_key(&GenConfig::fast_clips, &TrainConfig::fast_clips, 2, kBig)},
      {"source_background", style_key(&GenConfig::source_background)},
      {"target_background", style_key(&GenConfig::target_background)},
      {"seed",
       {[](RunConfig& c, const std::string& v) {
          c.gen.seed = c.train.seed = parse_number<std::uint64_t>(v);
        },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"slow_candidates",
       {[](RunConfig& c, const std::string& v) {
          std::vector<int> out;
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) {
            const int x = parse_number<int>(trim(item));
            require(x >= 1, "slow clip count " + trim(item) + " must be >= 1");
            out.push_back(x);
          }
          require(!out.empty(), "slow_candidates must not be empty");
          c.train.slow_candidates = out;
        },
        [](const RunConfig& c) {
          std::string s;
          for (int x : c.train.slow_candidates) s += (s.empty() ? "" : ",") + std::to_string(x);
          return s;
        }}},
      {"fixed_slow_clips", int_key(nullptr, &TrainConfig::fixed_slow_clips, 1, kBig)},
      {"clip_jitter", bool_key(&TrainConfig::clip_jitter)},
      {"tau", double_key(&TrainConfig::tau, 0.0, kInf, true)},
      {"gamma", double_key(&TrainConfig::gamma, 0.0, 1.0)},
      {"pl_threshold", double_key(&TrainConfig::pl_threshold, 0.0, 1.0, true)},
      {"label_smoothing", double_key(&TrainConfig::label_smoothing, 0.0, 1.0)},
      {"lambda_bgm", double_key(&TrainConfig::lambda_bgm, 0.0, kInf)},
      {"lambda_tpl", double_key(&TrainConfig::lambda_tpl, 0.0, kInf)},
      {"batch_size", int_key(nullptr, &TrainConfig::batch_size, 2, 4096)},
      {"lr_featurizer", double_key(&TrainConfig::lr_featurizer, 0.0, kInf, true)},
      {"lr_gcn", double_key(&TrainConfig::lr_gcn, 0.0, kInf, true)},
      {"momentum", double_key(&TrainConfig::momentum, 0.0, 0.999999)},
      {"weight_decay", double_key(&TrainConfig::weight_decay, 0.0, kInf)},
      {"warmstart_iters", int_key(nullptr, &TrainConfig::warmstart_iters, 0, kBig)},
      {"adapt_iters", int_key(nullptr, &TrainConfig::adapt_iters, 0, kBig)},
      {"eval_every", int_key(nullptr, &TrainConfig::eval_every, 0, kBig)},
      {"checkpoint_every", int_key(nullptr, &TrainConfig::checkpoint_every, 0, kBig)},
      {"mode",
       {[](RunConfig& c, const std::string& v) {
          if (v == "unsupervised") {
            c.train.mode = TrainMode::unsupervised;
          } else if (v == "semi_supervised") {
            c.train.mode = TrainMode::semi_supervised;
          } else {
            throw std::invalid_argument("mode must be unsupervised or semi_supervised, got '" + v + "'");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.train.mode == TrainMode::unsupervised ? "unsupervised" : "semi_supervised");
        }}},
      {"k_shots", int_key(nullptr, &TrainConfig::k_shots, 0, kBig)},
      {"hidden_dim", int_key(nullptr, &TrainConfig::hidden_dim, 1, 4096)},
      {"feature_dim", int_key(nullptr, &TrainConfig::feature_dim, 1, 4096)},
      {"gcn_dim", int_key(nullptr, &TrainConfig::gcn_dim, 1, 4096)},
      {"dropout", double_key(&TrainConfig::dropout, 0.0, 0.99)},
      {"enable_bgm", bool_key(&TrainConfig::enable_bgm)},
      {"enable_tpl", bool_key(&TrainConfig::enable_tpl)},
      {"enable_src_contrastive", bool_key(&TrainConfig::enable_src_contrastive)},
      {"random_speed", bool_key(&TrainConfig::random_speed)},
      {"supcon_denominator", bool_key(&TrainConfig::supcon_denominator)},
      {"mixed_background_variant", bool_key(&TrainConfig::mixed_background_variant)},
      {"self_training_ce", bool_key(&TrainConfig::self_training_ce)},
  };
  return table;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string content = trim(raw.substr(0, raw.find('#')));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    const std::string where = " (line " + std::to_string(line) + ")";
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'" + where, line);
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key" + where, line);
    const auto it = keys().find(key);
    if (it == keys().end()) throw ConfigError("unknown key '" + key + "'" + where, line);
    if (value.empty()) throw ConfigError("missing value for '" + key + "'" + where, line);
    try {
      it->second.set(cfg, value);
    } catch (const std::exception& e) {
      throw ConfigError(key + ": " + e.what() + where, line);
    }
  }
  try {
    cfg.train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what(), 0);
  }
  if (cfg.gen.clip_len != cfg.train.clip_len || cfg.gen.fast_clips != cfg.train.fast_clips) {
    throw ConfigError("invalid configuration: clip settings disagree", 0);
  }
  if (cfg.gen.frames < cfg.gen.fast_clips * cfg.gen.clip_len) {
    throw ConfigError("invalid configuration: frames must be at least fast_clips * clip_len = " +
                          std::to_string(cfg.gen.fast_clips * cfg.gen.clip_len),
                      0);
  }
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, key] : keys()) out += name + " = " + key.get(cfg) + "\n";
  return out;
}

}  // namespace comix
