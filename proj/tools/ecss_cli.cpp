// Copyright 2026 The ecss-desk Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ecss/ecss.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Input problems exit with 1, everything else with 2.
struct Failure {
  int code;
  std::string message;
};

int exit_code(ecss_status s) {
  switch (s) {
    case ECSS_ERR_IO:
    case ECSS_ERR_RUNTIME:
      return 2;
    default:
      return 1;
  }
}

void check(ecss_status s, const std::string& context) {
  if (s != ECSS_OK) throw Failure{exit_code(s), context + ": " + ecss_last_error()};
}

std::string take(char* s) {
  std::string out = s == nullptr ? "" : s;
  ecss_string_free(s);
  return out;
}

struct CorpusPtr {
  ecss_corpus* p = nullptr;
  ~CorpusPtr() { ecss_corpus_free(p); }
};

struct ModelPtr {
  ecss_model* p = nullptr;
  ~ModelPtr() { ecss_model_free(p); }
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out.good()) throw Failure{2, "cannot write '" + path.string() + "'"};
  spdlog::info("wrote {}", path.string());
}

std::string read_file(const fs::path& path, const std::string& flag) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw Failure{1, flag + ": cannot read '" + path.string() + "'"};
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{2, "--out-dir: cannot create '" + dir.string() + "': " + ec.message()};
}

fs::path under(const fs::path& dir, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : dir / p;
}

struct Options {
  std::string corpus;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int steps = 2000;
  int batch = 16;
  int context_length = 10;
  std::string lengths = "2,3,6,9,10,13,14";
  std::string ablate = "none";
  std::string label_mode = "paper_skewed";
  unsigned threads = 1;
  std::string profile = "lite";
  std::string split = "test";
  double learning_rate = 1e-3;
  int warmup = 0;
  int log_every = 100;
  // gen-data
  std::size_t n = 100;
  std::string out = "corpus.jsonl";
  double persistence = 0.6;
  double mean_turns = 9.3;
  int vocab = 64;
  // train / eval / predict / plot
  std::string resume;
  std::string checkpoint;
  std::string context;
  std::string report;
};

std::string train_config(const Options& o) {
  json overrides = {{"profile", o.profile},        {"ablation", o.ablate},
                    {"seed", o.seed},              {"max_steps", o.steps},
                    {"batch_size", o.batch},       {"context_length", o.context_length},
                    {"threads", o.threads},        {"learning_rate", o.learning_rate},
                    {"warmup_steps", o.warmup}};
  char* out = nullptr;
  check(ecss_train_config(overrides.dump().c_str(), &out), "training configuration");
  return take(out);
}

void echo_config(const fs::path& dir, const std::string& command, const Options& o,
                 const json& extra) {
  json j;
  j["command"] = command;
  j["version"] = ecss_version();
  j["flags"] = {{"corpus", o.corpus},           {"out_dir", o.out_dir},
                {"seed", o.seed},               {"steps", o.steps},
                {"batch", o.batch},             {"context_length", o.context_length},
                {"lengths", o.lengths},         {"ablate", o.ablate},
                {"label_mode", o.label_mode},   {"threads", o.threads},
                {"profile", o.profile},         {"split", o.split},
                {"learning_rate", o.learning_rate}, {"warmup", o.warmup},
                {"n", o.n},                     {"out", o.out},
                {"persistence", o.persistence}, {"mean_turns", o.mean_turns},
                {"vocab", o.vocab},             {"resume", o.resume},
                {"checkpoint", o.checkpoint},   {"context", o.context},
                {"report", o.report}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_file(dir / (command + ".config.json"), j.dump(2) + "\n");
}

void load_split(const Options& o, ecss_split split, CorpusPtr& out) {
  if (o.corpus.empty()) throw Failure{1, "--corpus is required"};
  CorpusPtr all;
  check(ecss_corpus_load(o.corpus.c_str(), &all.p), "--corpus '" + o.corpus + "'");
  check(ecss_corpus_split(all.p, split, &out.p), "--corpus split");
  if (ecss_corpus_size(out.p) == 0)
    throw Failure{1, "--corpus '" + o.corpus + "' has no conversations in the requested split"};
}

ecss_split parse_split(const std::string& s) {
  if (s == "train") return ECSS_SPLIT_TRAIN;
  if (s == "val") return ECSS_SPLIT_VAL;
  if (s == "test") return ECSS_SPLIT_TEST;
  throw Failure{1, "--split: unknown split '" + s + "'"};
}

// Streams loss rows to a CSV as training proceeds.
struct MetricsSink {
  std::ofstream out;
  bool with_run = false;
  int log_every = 100;

  MetricsSink(const fs::path& path, bool run_column, int every)
      : out(path, std::ios::binary | std::ios::trunc), with_run(run_column), log_every(every) {
    if (!out.good()) throw Failure{2, "cannot write '" + path.string() + "'"};
    out << (with_run ? "run," : "") << ecss_metrics_header() << "\n";
  }

  static void callback(const char* run, const ecss_losses* l, void* user) {
    auto* self = static_cast<MetricsSink*>(user);
    char* row = nullptr;
    if (ecss_metrics_row(l, &row) != ECSS_OK) return;
    if (self->with_run) self->out << run << ",";
    self->out << row << "\n";
    ecss_string_free(row);
    if (self->log_every > 0 && l->step % self->log_every == 0)
      spdlog::info("[{}] step {} total {:.6f} cl_emo {:.4f} cl_int {:.4f} pro {:.4f} fs2 {:.4f}",
                   run, l->step, l->total, l->l_cl_emo, l->l_cl_int, l->l_mse_pro, l->l_fs2);
  }
};

std::vector<int> parse_lengths(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Failure{1, "--lengths: '" + item + "' is not a positive integer"};
    }
  }
  if (out.empty()) throw Failure{1, "--lengths: no lengths given"};
  return out;
}

void cmd_gen_data(const Options& o) {
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  const json cfg = {{"n_conversations", o.n},   {"mean_turns", o.mean_turns},
                    {"vocab_size", o.vocab},    {"label_mode", o.label_mode},
                    {"persistence", o.persistence}, {"seed", o.seed},
                    {"threads", o.threads}};
  CorpusPtr c;
  check(ecss_corpus_generate(cfg.dump().c_str(), &c.p), "gen-data");
  const fs::path out = under(dir, o.out);
  check(ecss_corpus_save(c.p, out.string().c_str()), "--out '" + out.string() + "'");
  char* stats = nullptr;
  check(ecss_corpus_stats(c.p, &stats), "corpus statistics");
  const std::string s = take(stats);
  spdlog::info("generated {} conversations into {}", ecss_corpus_size(c.p), out.string());
  echo_config(dir, "gen-data", o, {{"generator", cfg}, {"stats", json::parse(s)}});
}

void cmd_train(const Options& o) {
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  CorpusPtr train;
  load_split(o, ECSS_SPLIT_TRAIN, train);
  MetricsSink sink(dir / "metrics.csv", false, o.log_every);
  ModelPtr m;
  if (!o.resume.empty()) {
    check(ecss_train_resume(train.p, o.resume.c_str(), o.steps, o.threads,
                            &MetricsSink::callback, &sink, &m.p),
          "--resume '" + o.resume + "'");
  } else {
    const std::string cfg = train_config(o);
    check(ecss_train(train.p, cfg.c_str(), &MetricsSink::callback, &sink, &m.p), "train");
  }
  const fs::path ckpt = dir / "checkpoint.ecss";
  check(ecss_model_save(m.p, ckpt.string().c_str()), "checkpoint '" + ckpt.string() + "'");
  char* cfg = nullptr;
  check(ecss_model_config(m.p, &cfg), "model configuration");
  echo_config(dir, "train", o, {{"train_config", json::parse(take(cfg))},
                                 {"final_step", ecss_model_step(m.p)}});
}

void cmd_eval(const Options& o) {
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  if (o.checkpoint.empty()) throw Failure{1, "--checkpoint is required"};
  ModelPtr m;
  check(ecss_model_load(o.checkpoint.c_str(), &m.p), "--checkpoint '" + o.checkpoint + "'");
  CorpusPtr test;
  load_split(o, parse_split(o.split), test);
  char* report = nullptr;
  char* csv = nullptr;
  check(ecss_evaluate(m.p, test.p, o.context_length, o.threads, &report, &csv), "eval");
  const std::string rj = take(report);
  write_file(dir / "eval_report.json", rj + "\n");
  write_file(dir / "eval_report.csv", take(csv));
  for (const char* which : {"emotion", "intensity"}) {
    char* grid = nullptr;
    check(ecss_plot_confusion(rj.c_str(), which, nullptr, &grid), "confusion grid");
    write_file(dir / (std::string(which) + "_confusion.csv"), take(grid));
  }
  const json r = json::parse(rj);
  spdlog::info("emotion accuracy {:.4f}, intensity accuracy {:.4f}, MAE-M {:.4f}",
               r["emotion_accuracy"].get<double>(), r["intensity_accuracy"].get<double>(),
               r["mae"]["mel"].get<double>());
  echo_config(dir, "eval", o, {{"model_config", r["config"]}});
}

void cmd_sweep(const Options& o) {
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  const std::vector<int> lengths = parse_lengths(o.lengths);
  CorpusPtr train, test;
  load_split(o, ECSS_SPLIT_TRAIN, train);
  load_split(o, ECSS_SPLIT_TEST, test);
  const std::string cfg = train_config(o);
  MetricsSink sink(dir / "sweep_metrics.csv", true, o.log_every);
  char* csv = nullptr;
  char* js = nullptr;
  check(ecss_sweep(train.p, test.p, cfg.c_str(), lengths.data(), lengths.size(),
                   &MetricsSink::callback, &sink, &csv, &js),
        "sweep");
  write_file(dir / "sweep.csv", take(csv));
  write_file(dir / "sweep.json", take(js) + "\n");
  echo_config(dir, "sweep", o, {{"train_config", json::parse(cfg)}, {"lengths", lengths}});
}

void cmd_ablate(const Options& o) {
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  CorpusPtr train, test;
  load_split(o, ECSS_SPLIT_TRAIN, train);
  load_split(o, ECSS_SPLIT_TEST, test);
  const std::string cfg = train_config(o);
  MetricsSink sink(dir / "ablation_metrics.csv", true, o.log_every);
  char* csv = nullptr;
  char* js = nullptr;
  check(ecss_ablate(train.p, test.p, cfg.c_str(), &MetricsSink::callback, &sink, &csv, &js),
        "ablate");
  write_file(dir / "ablation.csv", take(csv));
  write_file(dir / "ablation.json", take(js) + "\n");
  echo_config(dir, "ablate", o, {{"train_config", json::parse(cfg)}});
}

void cmd_predict(const Options& o) {
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  if (o.checkpoint.empty()) throw Failure{1, "--checkpoint is required"};
  if (o.context.empty()) throw Failure{1, "--context is required"};
  ModelPtr m;
  check(ecss_model_load(o.checkpoint.c_str(), &m.p), "--checkpoint '" + o.checkpoint + "'");
  const std::string ctx = read_file(o.context, "--context");
  const fs::path mel = dir / "prediction.mel";
  char* result = nullptr;
  check(ecss_predict(m.p, ctx.c_str(), o.context_length, mel.string().c_str(), &result),
        "--context '" + o.context + "'");
  const std::string r = take(result);
  write_file(dir / "prediction.json", r + "\n");
  const json j = json::parse(r);
  spdlog::info("predicted {} / {} over {} frames", j["emotion"].get<std::string>(),
               j["intensity"].get<std::string>(), j["frames"].get<long>());
  echo_config(dir, "predict", o, {});
}

void cmd_plot(const Options& o) {
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  if (o.report.empty()) throw Failure{1, "--report is required"};
  const std::string r = read_file(o.report, "--report");
  for (const char* which : {"emotion", "intensity"}) {
    char* svg = nullptr;
    check(ecss_plot_confusion(r.c_str(), which, &svg, nullptr),
          "--report '" + o.report + "'");
    write_file(dir / (std::string(which) + "_confusion.svg"), take(svg));
  }
  echo_config(dir, "plot", o, {});
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("ecss");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  const char* level = std::getenv("ECSS_LOG");
  spdlog::set_level(level != nullptr ? spdlog::level::from_str(level) : spdlog::level::info);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Emotion-aware conversational speech synthesis at desk scale"};
  app.require_subcommand(1);
  Options o;

  auto add_out_dir = [&](CLI::App* c) {
    c->add_option("--out-dir", o.out_dir, "Directory for every output")->capture_default_str();
  };
  auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", o.threads, "Worker threads")
        ->check(CLI::PositiveNumber)->capture_default_str();
  };
  auto add_training = [&](CLI::App* c) {
    c->add_option("--corpus", o.corpus, "Corpus JSONL")->required();
    c->add_option("--seed", o.seed, "Run seed")->capture_default_str();
    c->add_option("--steps", o.steps, "Optimizer steps")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    c->add_option("--batch", o.batch, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--context-length", o.context_length, "History turns J")
        ->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--profile", o.profile, "Model dimensions")
        ->check(CLI::IsMember({"lite", "paper"}))->capture_default_str();
    c->add_option("--lr", o.learning_rate, "Adam learning rate")->capture_default_str();
    c->add_option("--warmup", o.warmup, "Learning-rate warmup steps")->capture_default_str();
    c->add_option("--log-every", o.log_every, "Log a loss line every N steps (0 disables)")
        ->capture_default_str();
    add_out_dir(c);
    add_threads(c);
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dialogue corpus");
  gen->add_option("--n", o.n, "Conversations")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--seed", o.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", o.out, "Output JSONL, relative to --out-dir")->capture_default_str();
  gen->add_option("--label-mode", o.label_mode, "Label marginals")
      ->check(CLI::IsMember({"paper_skewed", "balanced"}))->capture_default_str();
  gen->add_option("--persistence", o.persistence, "Probability a label carries to the next turn")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  gen->add_option("--mean-turns", o.mean_turns, "Mean turns per conversation")->capture_default_str();
  gen->add_option("--vocab", o.vocab, "Vocabulary size")->capture_default_str();
  add_out_dir(gen);
  add_threads(gen);

  auto* train = app.add_subcommand("train", "Train on the train split");
  add_training(train);
  train->add_option("--ablate", o.ablate, "Ablation")
      ->check(CLI::IsMember({"none", "emotion", "intensity", "speaker", "audio", "supcon"}))
      ->capture_default_str();
  train->add_option("--resume", o.resume, "Checkpoint to continue up to --steps");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  eval->add_option("--corpus", o.corpus, "Corpus JSONL")->required();
  eval->add_option("--split", o.split, "Split to evaluate")
      ->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();
  eval->add_option("--context-length", o.context_length, "History turns J")
      ->check(CLI::PositiveNumber)->capture_default_str();
  add_out_dir(eval);
  add_threads(eval);

  auto* sweep = app.add_subcommand("sweep", "Context-length sweep");
  add_training(sweep);
  sweep->add_option("--lengths", o.lengths, "Comma-separated context lengths")
      ->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "Baseline plus the five ablations");
  add_training(ablate);

  auto* predict = app.add_subcommand("predict", "Render one utterance from its context");
  predict->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  predict->add_option("--context", o.context, "Context JSON")->required();
  predict->add_option("--context-length", o.context_length, "History turns J")
      ->check(CLI::PositiveNumber)->capture_default_str();
  add_out_dir(predict);

  auto* plot = app.add_subcommand("plot", "Confusion heatmaps from an eval report");
  plot->add_option("--report", o.report, "eval_report.json")->required();
  add_out_dir(plot);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) cmd_gen_data(o);
    else if (*train) cmd_train(o);
    else if (*eval) cmd_eval(o);
    else if (*sweep) cmd_sweep(o);
    else if (*ablate) cmd_ablate(o);
    else if (*predict) cmd_predict(o);
    else if (*plot) cmd_plot(o);
  } catch (const Failure& f) {
    spdlog::error("{}", f.message);
    return f.code;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
