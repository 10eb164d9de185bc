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

#include "ecss/ecss.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "corpus/corpus.hpp"
#include "eval/eval.hpp"
#include "model/config.hpp"
#include "train/train.hpp"
#include "util/error.hpp"

using nlohmann::json;
namespace ec = ecss::corpus;
namespace em = ecss::model;
namespace et = ecss::train;
namespace ev = ecss::eval;

struct ecss_corpus {
  ec::Corpus data;
};

struct ecss_model {
  et::TrainConfig config;
  em::Model model;
  et::AdamState adam;
};

namespace {

thread_local std::string g_last_error;

ecss_status status_of(ecss::ErrorKind k) {
  switch (k) {
    case ecss::ErrorKind::kValidation: return ECSS_ERR_VALIDATION;
    case ecss::ErrorKind::kConfig: return ECSS_ERR_CONFIG;
    case ecss::ErrorKind::kParse: return ECSS_ERR_PARSE;
    case ecss::ErrorKind::kLookup: return ECSS_ERR_LOOKUP;
    case ecss::ErrorKind::kIo: return ECSS_ERR_IO;
    case ecss::ErrorKind::kIntegrity: return ECSS_ERR_INTEGRITY;
    case ecss::ErrorKind::kRuntime: return ECSS_ERR_RUNTIME;
  }
  return ECSS_ERR_RUNTIME;
}

struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void need(const void* p, const char* what) {
  if (p == nullptr) throw ArgumentError(std::string(what) + " is null");
}

template <typename F>
ecss_status guarded(F&& fn) {
  g_last_error.clear();
  try {
    fn();
    return ECSS_OK;
  } catch (const ArgumentError& e) {
    g_last_error = e.what();
    return ECSS_ERR_ARGUMENT;
  } catch (const ecss::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return ECSS_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ECSS_ERR_RUNTIME;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ECSS_ERR_RUNTIME;
  }
}


char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out != nullptr) *out = dup(s);
}

json parse_json(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    ecss::fail(ecss::ErrorKind::kParse, std::string(what) + ": " + e.what());
  }
}

ecss_losses c_losses(const et::LossBreakdown& l) {
  return {l.step,     l.l_cl_emo,  l.l_cl_int,     l.l_mse_pro,    l.l_fs2,     l.total,
          l.fs2_mel,  l.fs2_pitch, l.fs2_energy,   l.fs2_duration, l.probe_emo, l.probe_int};
}

json losses_json(const et::LossBreakdown& l) {
  return {{"step", l.step},         {"l_cl_emo", l.l_cl_emo}, {"l_cl_int", l.l_cl_int},
          {"l_mse_pro", l.l_mse_pro}, {"l_fs2", l.l_fs2},     {"total", l.total},
          {"probe_emo", l.probe_emo}, {"probe_int", l.probe_int}};
}

et::TrainConfig parse_train_config(const char* text) {
  return et::train_config_from_json(parse_json(text, "train config"));
}

ev::StepHook hook_of(ecss_step_callback cb, void* user) {
  if (cb == nullptr) return {};
  return [cb, user](const std::string& run, const et::LossBreakdown& l) {
    const ecss_losses c = c_losses(l);
    cb(run.c_str(), &c, user);
  };
}

}  // namespace

extern "C" {

const char* ecss_last_error(void) { return g_last_error.c_str(); }

const char* ecss_version(void) { return "0.1.0"; }

void ecss_string_free(char* s) { std::free(s); }

ecss_status ecss_corpus_generate(const char* config_json, ecss_corpus** out) {
  return guarded([&] {
    need(out, "out");
    const json j = parse_json(config_json, "generator config");
    require(j.is_object(), ecss::ErrorKind::kParse, "generator config must be an object");
    ec::GeneratorConfig g;
    for (const auto& [key, value] : j.items()) {
      if (key == "n_conversations") g.n_conversations = value.get<std::size_t>();
      else if (key == "mean_turns") g.mean_turns = value.get<double>();
      else if (key == "vocab_size") g.vocab_size = value.get<int>();
      else if (key == "label_mode") g.label_mode = ec::parse_label_mode(value.get<std::string>());
      else if (key == "persistence") g.persistence = value.get<double>();
      else if (key == "seed") g.seed = value.get<std::uint64_t>();
      else if (key == "threads") g.threads = value.get<unsigned>();
      else ecss::fail(ecss::ErrorKind::kConfig, "unknown generator option '" + key + "'");
    }
    g.validate();
    *out = new ecss_corpus{ec::generate_corpus(g)};
  });
}

ecss_status ecss_corpus_load(const char* path, ecss_corpus** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ecss_corpus{ec::load_corpus(path)};
  });
}

ecss_status ecss_corpus_save(const ecss_corpus* corpus, const char* path) {
  return guarded([&] {
    need(corpus, "corpus");
    need(path, "path");
    ec::save_corpus(corpus->data, path);
  });
}

ecss_status ecss_corpus_split(const ecss_corpus* corpus, ecss_split split, ecss_corpus** out) {
  return guarded([&] {
    need(corpus, "corpus");
    need(out, "out");
    require(split >= ECSS_SPLIT_TRAIN && split <= ECSS_SPLIT_TEST,
            ecss::ErrorKind::kValidation, "unknown split");
    *out = new ecss_corpus{ec::select_split(corpus->data, static_cast<ec::Split>(split))};
  });
}

ecss_status ecss_corpus_stats(const ecss_corpus* corpus, char** json_out) {
  return guarded([&] {
    need(corpus, "corpus");
    const ec::CorpusStats s = ec::corpus_stats(corpus->data);
    json j;
    j["conversations"] = s.conversations;
    j["utterances"] = s.utterances;
    j["mean_turns"] = s.mean_turns;
    for (int e = 0; e < ec::kNumEmotions; ++e)
      j["emotion"][std::string(ec::emotion_name(static_cast<ec::Emotion>(e)))] =
          s.emotion[static_cast<std::size_t>(e)];
    for (int i = 0; i < ec::kNumIntensities; ++i)
      j["intensity"][std::string(ec::intensity_name(static_cast<ec::Intensity>(i)))] =
          s.intensity[static_cast<std::size_t>(i)];
    j["speaker"] = s.speaker;
    put(json_out, j.dump(2));
  });
}

size_t ecss_corpus_size(const ecss_corpus* corpus) {
  return corpus == nullptr ? 0 : corpus->data.size();
}

void ecss_corpus_free(ecss_corpus* corpus) { delete corpus; }

ecss_status ecss_train_config(const char* overrides_json, char** json_out) {
  return guarded([&] {
    const json o = parse_json(overrides_json, "overrides");
    require(o.is_object(), ecss::ErrorKind::kParse, "overrides must be an object");
    et::TrainConfig c;
    if (o.contains("profile")) c.model = em::profile_by_name(o["profile"].get<std::string>());
    if (o.contains("ablation"))
      c.model.ablation = em::parse_ablation(o["ablation"].get<std::string>());
    json j = et::to_json(c);
    for (const auto& [key, value] : o.items()) {
      if (key == "profile" || key == "ablation") continue;
      if (key == "model") {
        require(value.is_object(), ecss::ErrorKind::kParse, "'model' must be an object");
        for (const auto& [mk, mv] : value.items()) {
          require(j["model"].contains(mk), ecss::ErrorKind::kConfig,
                  "unknown model option '" + mk + "'");
          j["model"][mk] = mv;
        }
        continue;
      }
      require(j.contains(key), ecss::ErrorKind::kConfig, "unknown training option '" + key + "'");
      j[key] = value;
    }
    put(json_out, et::to_json(et::train_config_from_json(j)).dump(2));
  });
}

ecss_status ecss_train(const ecss_corpus* train_set, const char* config_json,
                       ecss_step_callback on_step, void* user, ecss_model** out) {
  return guarded([&] {
    need(train_set, "train_set");
    need(out, "out");
    const et::TrainConfig cfg = parse_train_config(config_json);
    et::Trainer trainer(cfg, train_set->data);
    const auto hook = hook_of(on_step, user);
    trainer.run([&](const et::LossBreakdown& l) {
      if (hook) hook("train", l);
    });
    *out = new ecss_model{cfg, std::move(trainer.model()), std::move(trainer.adam())};
  });
}

ecss_status ecss_train_resume(const ecss_corpus* train_set, const char* checkpoint_path,
                              long max_steps, unsigned threads, ecss_step_callback on_step,
                              void* user, ecss_model** out) {
  return guarded([&] {
    need(train_set, "train_set");
    need(checkpoint_path, "checkpoint_path");
    need(out, "out");
    const et::Checkpoint ckpt = et::load_checkpoint(checkpoint_path);
    et::TrainConfig cfg = ckpt.config;
    cfg.max_steps = static_cast<int>(max_steps);
    if (threads > 0) cfg.threads = threads;
    et::Trainer trainer = et::resume_trainer(ckpt, cfg, train_set->data);
    const auto hook = hook_of(on_step, user);
    trainer.run([&](const et::LossBreakdown& l) {
      if (hook) hook("train", l);
    });
    *out = new ecss_model{cfg, std::move(trainer.model()), std::move(trainer.adam())};
  });
}

ecss_status ecss_model_save(const ecss_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    et::save_checkpoint(path, model->config, model->model, model->adam);
  });
}

ecss_status ecss_model_load(const char* path, ecss_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    const et::Checkpoint ckpt = et::load_checkpoint(path);
    em::Model m(ckpt.config.model, ckpt.config.seed);
    et::AdamState adam = et::AdamState::zeros(m.params());
    et::restore(ckpt, m, &adam);
    *out = new ecss_model{ckpt.config, std::move(m), std::move(adam)};
  });
}

ecss_status ecss_model_config(const ecss_model* model, char** json_out) {
  return guarded([&] {
    need(model, "model");
    put(json_out, et::to_json(model->config).dump(2));
  });
}

long ecss_model_step(const ecss_model* model) {
  return model == nullptr ? -1 : model->adam.step;
}

void ecss_model_free(ecss_model* model) { delete model; }

const char* ecss_metrics_header(void) {
  static const std::string header = et::metrics_header();
  return header.c_str();
}

ecss_status ecss_metrics_row(const ecss_losses* losses, char** row_out) {
  return guarded([&] {
    need(losses, "losses");
    et::LossBreakdown l;
    l.step = losses->step;
    l.l_cl_emo = losses->l_cl_emo;
    l.l_cl_int = losses->l_cl_int;
    l.l_mse_pro = losses->l_mse_pro;
    l.l_fs2 = losses->l_fs2;
    l.total = losses->total;
    put(row_out, et::metrics_row(l));
  });
}

ecss_status ecss_evaluate(const ecss_model* model, const ecss_corpus* test_set,
                          int context_length, unsigned threads, char** report_json,
                          char** report_csv) {
  return guarded([&] {
    need(model, "model");
    need(test_set, "test_set");
    const int len = context_length > 0 ? context_length : model->config.context_length;
    const ev::EvalReport r =
        ev::evaluate(model->model, test_set->data, len, threads > 0 ? threads : 1);
    put(report_json, ev::report_json(r).dump(2));
    put(report_csv, ev::report_csv(r));
  });
}

ecss_status ecss_sweep(const ecss_corpus* train_set, const ecss_corpus* test_set,
                       const char* config_json, const int* lengths, size_t n_lengths,
                       ecss_step_callback on_step, void* user, char** csv_out,
                       char** json_out) {
  return guarded([&] {
    need(train_set, "train_set");
    need(test_set, "test_set");
    const et::TrainConfig cfg = parse_train_config(config_json);
    std::vector<int> ls = ev::kSweepLengths;
    if (lengths != nullptr && n_lengths > 0) ls.assign(lengths, lengths + n_lengths);
    const auto rows =
        ev::context_sweep(train_set->data, test_set->data, cfg, ls, hook_of(on_step, user));
    json j = json::array();
    for (const auto& r : rows)
      j.push_back({{"context_length", r.context_length},
                   {"report", ev::report_json(r.report)},
                   {"final_losses", losses_json(r.final_losses)}});
    put(csv_out, ev::sweep_csv(rows));
    put(json_out, j.dump(2));
  });
}

ecss_status ecss_ablate(const ecss_corpus* train_set, const ecss_corpus* test_set,
                        const char* config_json, ecss_step_callback on_step, void* user,
                        char** csv_out, char** json_out) {
  return guarded([&] {
    need(train_set, "train_set");
    need(test_set, "test_set");
    const et::TrainConfig cfg = parse_train_config(config_json);
    const auto rows =
        ev::ablation_suite(train_set->data, test_set->data, cfg, hook_of(on_step, user));
    json j = json::array();
    for (const auto& r : rows)
      j.push_back({{"ablation", r.name},
                   {"report", ev::report_json(r.report)},
                   {"final_losses", losses_json(r.final_losses)},
                   {"nodes_j10", r.counts_at_10.nodes},
                   {"edges_j10", r.counts_at_10.edges}});
    put(csv_out, ev::ablation_csv(rows));
    put(json_out, j.dump(2));
  });
}

ecss_status ecss_predict(const ecss_model* model, const char* context_json,
                         int context_length, const char* mel_path, char** result_json) {
  return guarded([&] {
    need(model, "model");
    need(context_json, "context_json");
    need(mel_path, "mel_path");
    json ctx = parse_json(context_json, "context");
    require(ctx.is_object(), ecss::ErrorKind::kParse, "context must be an object");
    require(ctx.contains("current_index") && ctx["current_index"].is_number_integer(),
            ecss::ErrorKind::kValidation, "context: missing integer field 'current_index'");
    const int index = ctx["current_index"].get<int>();
    ctx.erase("current_index");
    const ec::Conversation conv = ec::conversation_from_json(ctx.dump());
    require(index >= 0 && index < static_cast<int>(conv.turns.size()),
            ecss::ErrorKind::kValidation,
            "context: current_index " + std::to_string(index) + " is outside the conversation");
    const int len = context_length > 0 ? context_length : model->config.context_length;
    const ec::ContextWindow window = ec::slice_context(conv, index, len);
    const ev::RenderedPrediction p = ev::predict(model->model, window);
    ev::write_mel(mel_path, p.acoustics.mel);
    json j;
    j["conversation_id"] = conv.id;
    j["current_index"] = index;
    j["history_length"] = window.history_length();
    j["emotion"] = ec::emotion_name(static_cast<ec::Emotion>(p.emotion));
    j["intensity"] = ec::intensity_name(static_cast<ec::Intensity>(p.intensity));
    j["emotion_logits"] = p.emotion_logits;
    j["intensity_logits"] = p.intensity_logits;
    j["emotion_fallback"] = p.emotion_fallback;
    j["intensity_fallback"] = p.intensity_fallback;
    j["durations"] = p.durations;
    j["frames"] = p.acoustics.mel.rows();
    j["mel_bins"] = p.acoustics.mel.cols();
    j["pitch"] = p.acoustics.pitch;
    j["energy"] = p.acoustics.energy;
    j["log_duration"] = p.acoustics.log_duration;
    j["mel_path"] = mel_path;
    put(result_json, j.dump(2));
  });
}

ecss_status ecss_plot_confusion(const char* report_json, const char* which, char** svg_out,
                                char** csv_out) {
  return guarded([&] {
    need(report_json, "report_json");
    need(which, "which");
    const json r = parse_json(report_json, "report");
    const std::string w = which;
    require(w == "emotion" || w == "intensity", ecss::ErrorKind::kValidation,
            "unknown confusion '" + w + "', expected emotion or intensity");
    const std::string key = w + "_confusion";
    require(r.contains(key), ecss::ErrorKind::kValidation, "report has no '" + key + "'");
    const auto c = r[key].get<ev::Confusion>();
    const auto names = w == "emotion" ? ev::emotion_names() : ev::intensity_names();
    require(c.size() == names.size(), ecss::ErrorKind::kValidation,
            "'" + key + "' is not " + std::to_string(names.size()) + " x " +
                std::to_string(names.size()));
    put(svg_out, ev::confusion_svg(c, names, w + " confusion (rows: truth)"));
    put(csv_out, ev::confusion_csv(c, names));
  });
}

}  // extern "C"
