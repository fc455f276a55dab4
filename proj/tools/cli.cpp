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

#include "cli.hpp"

#include <comix/background.hpp>
#include <comix/config.hpp>
#include <comix/encoder.hpp>
#include <comix/trainer.hpp>
#include <comix/video.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef COMIX_VERSION
#define COMIX_VERSION "v0.1.0"
#endif

namespace comix::cli {
namespace {

namespace fs = std::filesystem;

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("COMIX_LOG");
  if (env == nullptr) return LogLevel::info;
  const std::string v = env;
  if (v == "error") return LogLevel::error;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::info;
}

void log(LogLevel level, const std::string& msg) {
  static const LogLevel threshold = log_level();
  if (level > threshold) return;
  static const char* tags[] = {"error", "info", "debug"};
  std::cerr << "[comix " << tags[static_cast<int>(level)] << "] " << msg << '\n';
}

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data_src;
  std::string data_tgt;
  std::string test_src;
  std::string test_tgt;
  std::string checkpoint;
  std::optional<int> iters;
  bool no_warmstart = false;
};

std::uint64_t fnv1a64(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

RunConfig load_config(const Flags& f) {
  RunConfig cfg = f.config.empty() ? parse_config_text("") : parse_config(f.config);
  if (f.seed) cfg.gen.seed = cfg.train.seed = *f.seed;
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  nlohmann::ordered_json j;
  j["version"] = COMIX_VERSION;
  j["command"] = command;
  j["config"] = to_config_text(cfg);
  nlohmann::ordered_json in = nlohmann::ordered_json::array();
  for (const fs::path& p : inputs) in.push_back({{"path", p.string()}, {"fnv1a64", hex64(fnv1a64(p))}});
  j["inputs"] = in;
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const fs::path& p : outputs) out.push_back(p.string());
  j["outputs"] = out;
  fs::create_directories(dir);
  const fs::path path = dir / "manifest.json";
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
  log(LogLevel::debug, "wrote " + path.string());
}

fs::path test_split_of(const std::string& train, const std::string& explicit_test) {
  if (!explicit_test.empty()) return explicit_test;
  fs::path p(train);
  std::string name = p.filename().string();
  const auto pos = name.rfind("train");
  if (pos == std::string::npos) {
    throw UsageError("cannot derive the test split of " + train + "; pass it explicitly");
  }
  name.replace(pos, 5, "test");
  return p.parent_path() / name;
}

void require_flag(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw UsageError(std::string(command) + ": " + flag + " is required");
}

int cmd_gen_data(const Flags& f) {
  require_flag(f.out, "--out", "gen-data");
  const RunConfig cfg = load_config(f);
  const fs::path dir(f.out);
  const std::vector<fs::path> outputs = {dir / "source_train.cvd", dir / "source_test.cvd",
                                         dir / "target_train.cvd", dir / "target_test.cvd"};
  write_manifest(dir, "gen-data", cfg, f.config.empty() ? std::vector<fs::path>{} : std::vector<fs::path>{f.config},
                 outputs);
  const DomainPair pair = generate_domain_pair(cfg.gen);
  save_dataset(pair.source_train, outputs[0]);
  save_dataset(pair.source_test, outputs[1]);
  save_dataset(pair.target_train, outputs[2]);
  save_dataset(pair.target_test, outputs[3]);
  log(LogLevel::info, "generated " + std::to_string(pair.source_train.videos.size()) +
                          " train videos per domain in " + dir.string());
  return kExitOk;
}

std::vector<fs::path> with_config(const Flags& f, std::vector<fs::path> inputs) {
  if (!f.config.empty()) inputs.insert(inputs.begin(), f.config);
  return inputs;
}

void print_accuracy(const char* what, const EvalReport& r) {
  std::cout << what << "_accuracy " << std::setprecision(6) << r.accuracy << '\n';
}

int cmd_pretrain(const Flags& f) {
  require_flag(f.data_src, "--data-src", "pretrain");
  require_flag(f.out, "--out", "pretrain");
  RunConfig cfg = load_config(f);
  if (f.iters) cfg.train.warmstart_iters = *f.iters;
  cfg.train.validate();
  const fs::path dir(f.out);
  const fs::path test_path = test_split_of(f.data_src, f.test_src);
  const fs::path ckpt = dir / "warmstart.cmx";
  write_manifest(dir, "pretrain", cfg, with_config(f, {f.data_src, test_path}), {ckpt});
  const Dataset train = load_dataset(f.data_src, Split::train);
  const Dataset test = load_dataset(test_path, Split::test);
  Rng init_rng(derive_seed(cfg.train.seed, 0x1417));
  const EncoderParams init = init_encoder(cfg.train.encoder_config(train), init_rng);
  log(LogLevel::info, "pretraining for " + std::to_string(cfg.train.warmstart_iters) + " iterations");
  const EncoderParams params = pretrain_source(cfg.train, train, init);
  save_checkpoint(params, ckpt);
  print_accuracy("source_test", evaluate(cfg.train, params, test));
  return kExitOk;
}

int cmd_adapt(const Flags& f) {
  require_flag(f.data_src, "--data-src", "adapt");
  require_flag(f.data_tgt, "--data-tgt", "adapt");
  require_flag(f.out, "--out", "adapt");
  if (f.checkpoint.empty() && !f.no_warmstart) {
    throw UsageError(
        "adapt: a warm-started checkpoint is required; run `pretrain` and pass --checkpoint, "
        "or pass --no-warmstart to adapt from a random initialization");
  }
  RunConfig cfg = load_config(f);
  if (f.iters) cfg.train.adapt_iters = *f.iters;
  cfg.train.validate();
  const fs::path dir(f.out);
  const fs::path src_test = test_split_of(f.data_src, f.test_src);
  const fs::path tgt_test = test_split_of(f.data_tgt, f.test_tgt);
  std::vector<fs::path> inputs = with_config(f, {f.data_src, src_test, f.data_tgt, tgt_test});
  if (!f.checkpoint.empty()) inputs.push_back(f.checkpoint);
  std::vector<fs::path> outputs = {dir / "metrics.csv", dir / "warmstart.cmx", dir / "final.cmx"};
  write_manifest(dir, "adapt", cfg, inputs, outputs);

  Datasets data;
  data.source_train = load_dataset(f.data_src, Split::train);
  data.source_test = load_dataset(src_test, Split::test);
  data.target_train = load_dataset(f.data_tgt, Split::train);
  data.target_test = load_dataset(tgt_test, Split::test);
  RunOptions opts;
  opts.out_dir = dir;
  if (!f.checkpoint.empty()) {
    opts.warm_start = load_checkpoint(f.checkpoint);
  } else {
    Rng init_rng(derive_seed(cfg.train.seed, 0x1417));
    opts.warm_start = init_encoder(cfg.train.encoder_config(data.source_train), init_rng);
  }
  opts.on_step = [](const StepReport& r) {
    std::ostringstream os;
    os << "step " << r.step << " loss " << r.loss.total << " |A| " << r.pseudo_count;
    log(LogLevel::debug, os.str());
  };
  const RunReport report = run_adaptation(cfg.train, data, opts);
  print_accuracy("source_test", report.final_source);
  print_accuracy("target_test", report.final_target);
  return kExitOk;
}

int cmd_eval(const Flags& f) {
  require_flag(f.checkpoint, "--checkpoint", "eval");
  if (f.data_src.empty() && f.data_tgt.empty()) throw UsageError("eval: pass --data-src and/or --data-tgt");
  const RunConfig cfg = load_config(f);
  const EncoderParams params = load_checkpoint(f.checkpoint);
  nlohmann::ordered_json j;
  for (auto [path, name] : {std::pair{&f.data_src, "source"}, std::pair{&f.data_tgt, "target"}}) {
    if (path->empty()) continue;
    const EvalReport r = evaluate(cfg.train, params, load_dataset(*path, Split::test));
    print_accuracy(name, r);
    j[name] = {{"path", *path}, {"accuracy", r.accuracy}, {"per_class_accuracy", r.per_class_accuracy}};
  }
  if (!f.out.empty()) {
    std::vector<fs::path> inputs = with_config(f, {f.checkpoint});
    for (const std::string* p : {&f.data_src, &f.data_tgt}) {
      if (!p->empty()) inputs.push_back(*p);
    }
    const fs::path dir(f.out);
    write_manifest(dir, "eval", cfg, inputs, {dir / "eval.json"});
    std::ofstream(dir / "eval.json", std::ios::trunc) << j.dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_export_embeddings(const Flags& f) {
  require_flag(f.checkpoint, "--checkpoint", "export-embeddings");
  require_flag(f.out, "--out", "export-embeddings");
  if (f.data_src.empty() && f.data_tgt.empty()) {
    throw UsageError("export-embeddings: pass --data-src and/or --data-tgt");
  }
  const RunConfig cfg = load_config(f);
  const EncoderParams params = load_checkpoint(f.checkpoint);
  const fs::path dir(f.out);
  const fs::path csv = dir / "embeddings.csv";
  std::vector<fs::path> inputs = with_config(f, {f.checkpoint});
  for (const std::string* p : {&f.data_src, &f.data_tgt}) {
    if (!p->empty()) inputs.push_back(*p);
  }
  write_manifest(dir, "export-embeddings", cfg, inputs, {csv});
  std::ofstream out(csv, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + csv.string());
  out << "video_id,domain,label";
  for (Eigen::Index k = 0; k < params.num_classes(); ++k) out << ",z_" << k;
  out << '\n' << std::setprecision(17);
  for (const std::string* p : {&f.data_src, &f.data_tgt}) {
    if (p->empty()) continue;
    const Dataset ds = load_dataset(*p);
    const EvalReport r = evaluate(cfg.train, params, ds);
    for (std::size_t i = 0; i < ds.videos.size(); ++i) {
      const Video& v = ds.videos[i];
      out << v.video_id << ',' << to_string(v.domain) << ',' << v.label;
      for (Eigen::Index k = 0; k < r.logits.cols(); ++k) out << ',' << r.logits(static_cast<Eigen::Index>(i), k);
      out << '\n';
    }
  }
  log(LogLevel::info, "wrote " + csv.string());
  return kExitOk;
}

int cmd_export_backgrounds(const Flags& f) {
  require_flag(f.out, "--out", "export-backgrounds");
  if (f.data_src.empty() && f.data_tgt.empty()) {
    throw UsageError("export-backgrounds: pass --data-src and/or --data-tgt");
  }
  const RunConfig cfg = load_config(f);
  const fs::path dir(f.out);
  std::vector<fs::path> inputs = with_config(f, {});
  std::vector<std::pair<fs::path, fs::path>> jobs;
  for (const std::string* p : {&f.data_src, &f.data_tgt}) {
    if (p->empty()) continue;
    inputs.push_back(*p);
    jobs.emplace_back(*p, dir / (fs::path(*p).stem().string() + "_backgrounds.cvd"));
  }
  std::vector<fs::path> outputs;
  for (const auto& job : jobs) outputs.push_back(job.second);
  write_manifest(dir, "export-backgrounds", cfg, inputs, outputs);
  for (const auto& [in, out] : jobs) {
    Dataset ds = load_dataset(in);
    for (Video& v : ds.videos) v.frames = extract_background_tmf(v).pixels;
    save_dataset(ds, out);
    log(LogLevel::info, "wrote " + out.string());
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Contrastive video domain adaptation on synthetic data", "comix"};
  app.require_subcommand(1);
  Flags f;
  auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "Configuration file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "Seed for all randomness (overrides the config)");
    sub->add_option("--out", f.out, "Output directory");
  };
  auto data = [&f](CLI::App* sub) {
    sub->add_option("--data-src", f.data_src, "Source CVD1 file");
    sub->add_option("--data-tgt", f.data_tgt, "Target CVD1 file");
  };
  auto splits = [&f](CLI::App* sub) {
    sub->add_option("--test-src", f.test_src, "Source test split (default: name with train -> test)");
    sub->add_option("--test-tgt", f.test_tgt, "Target test split (default: name with train -> test)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "Generate the synthetic source/target datasets");
  common(gen);
  CLI::App* pre = app.add_subcommand("pretrain", "Source-only warm start");
  common(pre);
  data(pre);
  splits(pre);
  pre->add_option("--iters", f.iters, "Warm-start iterations (overrides the config)");
  CLI::App* adapt = app.add_subcommand("adapt", "Joint adaptation from a warm-started checkpoint");
  common(adapt);
  data(adapt);
  splits(adapt);
  adapt->add_option("--checkpoint", f.checkpoint, "Warm-started checkpoint");
  adapt->add_option("--iters", f.iters, "Adaptation iterations (overrides the config)");
  adapt->add_flag("--no-warmstart", f.no_warmstart, "Adapt from a random initialization");
  CLI::App* ev = app.add_subcommand("eval", "Accuracy of a checkpoint");
  common(ev);
  data(ev);
  ev->add_option("--checkpoint", f.checkpoint, "Checkpoint to evaluate");
  CLI::App* emb = app.add_subcommand("export-embeddings", "Per-video logits as CSV");
  common(emb);
  data(emb);
  emb->add_option("--checkpoint", f.checkpoint, "Checkpoint");
  CLI::App* bgs = app.add_subcommand("export-backgrounds", "Temporal-median backgrounds as CVD1 (T = 1)");
  common(bgs);
  data(bgs);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(f);
    if (pre->parsed()) return cmd_pretrain(f);
    if (adapt->parsed()) return cmd_adapt(f);
    if (ev->parsed()) return cmd_eval(f);
    if (emb->parsed()) return cmd_export_embeddings(f);
    if (bgs->parsed()) return cmd_export_backgrounds(f);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    log(LogLevel::error, e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace comix::cli
