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

// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Usage: acceptance [--only 1,3,9] [--threads N]

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ecg/ecg.hpp"
#include "eval/eval.hpp"
#include "model/encoders.hpp"
#include "model/hgt.hpp"
#include "model/renderer.hpp"
#include "model/synthesizer.hpp"
#include "support.hpp"
#include "train/train.hpp"

namespace {

using namespace ecss;
using ad::Mat;
using ad::Tape;
using ad::Var;
using ecg::NodeKind;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& s) {
    if (!detail.empty()) detail += "; ";
    detail += s;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---- 1: graph structure -------------------------------------------------

using Triple = std::tuple<ecg::NodeRef, ecg::NodeRef, std::string>;

// Brute-force enumeration from the five-tuple: history turns carry all
// kinds, the current turn Text and Speaker; cross-kind pairs link within a
// turn, same-kind chains link adjacent turns, both directions.
std::pair<std::set<ecg::NodeRef>, std::set<Triple>> enumerate(int J, const std::set<NodeKind>& kept) {
  const NodeKind all[] = {NodeKind::kText, NodeKind::kAudio, NodeKind::kSpeaker, NodeKind::kEmotion,
                          NodeKind::kIntensity};
  const NodeKind chained[] = {NodeKind::kText, NodeKind::kAudio, NodeKind::kEmotion, NodeKind::kIntensity};
  auto present = [&](NodeKind k, int t) {
    return kept.count(k) > 0 && (t < J || k == NodeKind::kText || k == NodeKind::kSpeaker);
  };
  std::set<ecg::NodeRef> nodes;
  std::set<Triple> edges;
  for (int t = 0; t <= J; ++t)
    for (NodeKind k : all)
      if (present(k, t)) nodes.insert({k, t});
  for (int t = 0; t <= J; ++t)
    for (int a = 0; a < 5; ++a)
      for (int b = a + 1; b < 5; ++b)
        if (present(all[a], t) && present(all[b], t)) {
          const std::string r = "x" + std::to_string(std::min(static_cast<int>(all[a]), static_cast<int>(all[b]))) +
                                std::to_string(std::max(static_cast<int>(all[a]), static_cast<int>(all[b])));
          edges.insert({{all[a], t}, {all[b], t}, r});
          edges.insert({{all[b], t}, {all[a], t}, r});
        }
  for (NodeKind k : chained)
    for (int t = 0; t < J; ++t)
      if (present(k, t) && present(k, t + 1)) {
        const std::string r = "c" + std::to_string(static_cast<int>(k));
        edges.insert({{k, t}, {k, t + 1}, r});
        edges.insert({{k, t + 1}, {k, t}, r});
      }
  return {nodes, edges};
}

// Relation identity by endpoint kinds, matching the naming in enumerate().
std::set<Triple> built_triples(const ecg::EcgGraph& g) {
  std::set<Triple> out;
  for (const auto& e : g.edges) {
    const auto& s = g.nodes[static_cast<std::size_t>(e.src)];
    const auto& d = g.nodes[static_cast<std::size_t>(e.dst)];
    const int a = static_cast<int>(s.kind), b = static_cast<int>(d.kind);
    const std::string r = a == b ? "c" + std::to_string(a)
                                 : "x" + std::to_string(std::min(a, b)) + std::to_string(std::max(a, b));
    out.insert({s, d, r});
  }
  return out;
}

Outcome criterion1() {
  Outcome o;
  Stopwatch sw;
  const std::set<NodeKind> all{NodeKind::kText, NodeKind::kAudio, NodeKind::kSpeaker, NodeKind::kEmotion,
                               NodeKind::kIntensity};
  for (int J = 1; J <= 14; ++J) {
    const auto g = ecg::build_ecg(J);
    const auto [nodes, edges] = enumerate(J, all);
    const std::set<ecg::NodeRef> got_nodes(g.nodes.begin(), g.nodes.end());
    o.require(g.node_count() == static_cast<std::size_t>(5 * J + 2), "J=" + std::to_string(J) + " node count");
    o.require(g.edge_count() == static_cast<std::size_t>(28 * J - 4), "J=" + std::to_string(J) + " edge count");
    o.require(got_nodes == nodes && got_nodes.size() == g.node_count(), "J=" + std::to_string(J) + " node set");
    o.require(built_triples(g) == edges && edges.size() == g.edge_count(), "J=" + std::to_string(J) + " edge set");
  }
  const double t = sw.seconds();
  o.require(t < 1.0, "took " + fmt("%.3f s", t));
  o.note(fmt("%.3f s", t));
  return o;
}

// ---- 2: gradient suite ---------------------------------------------------

Outcome criterion2() {
  Outcome o;
  Stopwatch sw;
  const model::ModelConfig cfg = model::toy_profile();
  auto record = [&](const char* op, const testing::GradReport& r) {
    o.require(r.checked > 0, std::string(op) + " checked nothing");
    o.require(r.max_rel <= 1e-4, std::string(op) + " " + fmt("%.2e", r.max_rel) + " at " + r.worst);
  };
  auto prefix = [](const char* p) { return [p](const std::string& n) { return n.rfind(p, 0) == 0; }; };

  {
    ad::ParamStore ps;
    Rng rng(1);
    auto table = model::EmbeddingTable::create(ps, "emb", 7, 5, rng);
    const Mat w = testing::random_mat(1, 5, rng);
    record("embedding", testing::check_param_grads(ps, [&](Tape& tape) {
             nn::Ctx ctx{tape, ps};
             return ad::add(ad::dot_const(ad::tanh(table.lookup(ctx, 3)), w), ad::dot_const(table.lookup(ctx, 5), w));
           }));
  }
  {
    model::ModelConfig c = cfg;
    c.hgt_layers = 2;
    ad::ParamStore ps;
    Rng rng(2);
    auto hgt = model::Hgt::create(ps, c, rng);
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (ps.name(i).find(".mu.") != std::string::npos) ps.value(i)(0, 0) = 0.6 + 0.05 * static_cast<double>(i % 5);
    const auto g = ecg::build_ecg(2);
    std::vector<Mat> feats;
    for (const auto& n : g.nodes)
      feats.push_back(testing::random_mat(1, n.kind == NodeKind::kText ? c.text_dim : c.node_dim, rng));
    const Mat w = testing::random_mat(static_cast<Eigen::Index>(g.nodes.size()), c.hgt_hidden, rng);
    record("hgt", testing::check_param_grads(ps, [&](Tape& tape) {
             nn::Ctx ctx{tape, ps};
             std::vector<Var> in;
             for (const auto& f : feats) in.push_back(tape.constant(f));
             return ad::dot_const(hgt.forward(ctx, g, in).h, w);
           }, 12));
  }
  {
    ad::ParamStore ps;
    Rng rng(3);
    auto r = model::Renderer::create(ps, cfg, rng);
    const Mat seq = testing::random_mat(3, cfg.hgt_hidden, rng);
    for (const char* name : {"render.emotion", "render.intensity"}) {
      const auto& pred = std::string(name) == "render.emotion" ? r.emotion : r.intensity;
      const Mat wf = testing::random_mat(1, cfg.feature_dim, rng);
      const Mat wl = testing::random_mat(1, pred.classes, rng);
      record(name, testing::check_param_grads(ps, [&](Tape& tape) {
               nn::Ctx ctx{tape, ps};
               auto out = pred(ctx, tape.constant(seq), false);
               return ad::add(ad::dot_const(out.feature, wf), ad::dot_const(out.logits, wl));
             }, 24, 1e-5, prefix(name)));
    }
    const Mat q = testing::random_mat(1, cfg.text_dim, rng);
    const Mat h = testing::random_mat(2, cfg.hgt_hidden, rng);
    const Mat w = testing::random_mat(1, cfg.prosody_dim, rng);
    record("prosody attention", testing::check_param_grads(ps, [&](Tape& tape) {
             nn::Ctx ctx{tape, ps};
             return ad::dot_const(r.prosody(ctx, tape.constant(q), tape.constant(h)), w);
           }, 24, 1e-5, prefix("render.prosody")));
  }
  {
    ad::ParamStore ps;
    Rng rng(4);
    auto text = model::TextEncoder::create(ps, cfg, rng);
    auto agg = model::Aggregator::create(ps, cfg, rng);
    auto va = model::VarianceAdaptor::create(ps, cfg, rng);
    auto dec = model::MelDecoder::create(ps, cfg, rng);
    ps.value(agg.weights) << 0.3, -0.2, 0.1, 0.5, -0.4;

    const std::vector<int> tokens{2, 8, 5};
    const Mat wt = testing::random_mat(3, cfg.model_dim, rng);
    record("text encoder", testing::check_param_grads(ps, [&](Tape& tape) {
             nn::Ctx ctx{tape, ps};
             return ad::dot_const(text(ctx, tokens).tokens, wt);
           }, 24, 1e-5, prefix("syn.text")));

    const int dims[model::kNumStreams] = {cfg.model_dim, cfg.model_dim, cfg.feature_dim, cfg.feature_dim,
                                          cfg.prosody_dim};
    std::vector<Mat> streams;
    for (int d : dims) streams.push_back(testing::random_mat(1, d, rng));
    const Mat wa = testing::random_mat(1, cfg.model_dim, rng);
    record("aggregator", testing::check_param_grads(ps, [&](Tape& tape) {
             nn::Ctx ctx{tape, ps};
             std::array<Var, model::kNumStreams> s;
             for (std::size_t i = 0; i < s.size(); ++i) s[i] = tape.constant(streams[i]);
             return ad::dot_const(agg(ctx, s), wa);
           }, 24, 1e-5, prefix("syn.agg")));

    const Mat x = testing::random_mat(3, cfg.model_dim, rng);
    const std::vector<int> d{1, 3, 2};
    const Mat wf = testing::random_mat(6, cfg.model_dim, rng);
    const Mat wd = testing::random_mat(3, 1, rng);
    record("variance adaptor", testing::check_param_grads(ps, [&](Tape& tape) {
             nn::Ctx ctx{tape, ps};
             auto out = va(ctx, tape.constant(x), &d, nullptr, nullptr);
             return ad::add(ad::dot_const(out.frames, wf), ad::dot_const(out.log_duration, wd));
           }, 24, 1e-5, prefix("syn.va")));

    const Mat frames = testing::random_mat(3, cfg.model_dim, rng);
    const Mat wm = testing::random_mat(3, cfg.mel_bins, rng);
    record("mel decoder", testing::check_param_grads(ps, [&](Tape& tape) {
             nn::Ctx ctx{tape, ps};
             return ad::dot_const(dec(ctx, tape.constant(frames)), wm);
           }, 24, 1e-5, prefix("syn.dec")));
  }
  const double t = sw.seconds();
  o.require(t < 60.0, "took " + fmt("%.1f s", t));
  o.note(fmt("%.1f s", t));
  return o;
}

// ---- 3: contrastive loss -------------------------------------------------

Outcome criterion3() {
  Outcome o;
  Stopwatch sw;
  auto value = [](const Mat& f, const std::vector<int>& labels, double tau, model::SupConInfo* info) {
    Tape tape;
    return model::supcon_loss(tape.constant(f), labels, tau, info).scalar();
  };
  // Anchors 0 and 1 share a label and direction; anchor 2 has no positive.
  // Each contributing anchor scores -log(e / (e + 1)).
  Mat f(3, 2);
  f << 1, 0, 1, 0, 0, 1;
  model::SupConInfo info;
  const double v = value(f, {0, 0, 1}, 1.0, &info);
  const double want = -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(0.0)));
  o.require(std::abs(v - want) <= 1e-9, "3-vector example " + fmt("%.12f", v));
  o.require(std::abs(v - 0.3133) < 5e-5, "3-vector example is not about 0.3133");
  o.require(info.contributing_anchors == 2, "anchor without positives was not skipped");

  Mat pair(2, 3);
  pair << 0.2, -1, 3, 0.2, -1, 3;
  for (double tau : {0.1, 1.0}) o.require(std::abs(value(pair, {4, 4}, tau, nullptr)) <= 1e-9, "identical pair");

  model::SupConInfo none;
  o.require(value(f, {0, 1, 2}, 1.0, &none) == 0.0 && none.no_positives, "positive-free batch");
  const double t = sw.seconds();
  o.require(t < 1.0, "took " + fmt("%.3f s", t));
  o.note("loss " + fmt("%.6f", v));
  return o;
}

// ---- shared training helpers --------------------------------------------

corpus::Corpus generate(std::size_t n, corpus::LabelMode mode, double persistence, std::uint64_t seed,
                        unsigned threads = 1) {
  corpus::GeneratorConfig g;
  g.n_conversations = n;
  g.label_mode = mode;
  g.persistence = persistence;
  g.seed = seed;
  g.threads = threads;
  return corpus::generate_corpus(g);
}

std::string corpus_bytes(const corpus::Corpus& c) {
  std::string out;
  for (const auto& conv : c) out += corpus::conversation_to_json(conv) + "\n";
  return out;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same_losses(const train::LossBreakdown& a, const train::LossBreakdown& b) {
  return a.step == b.step && same_bits(a.l_cl_emo, b.l_cl_emo) && same_bits(a.l_cl_int, b.l_cl_int) &&
         same_bits(a.l_mse_pro, b.l_mse_pro) && same_bits(a.l_fs2, b.l_fs2) && same_bits(a.total, b.total);
}

unsigned g_threads = 1;

// ---- 4: overfit ----------------------------------------------------------

Outcome criterion4() {
  Outcome o;
  Stopwatch sw;
  const auto data = generate(8, corpus::LabelMode::kPaperSkewed, 0.6, 4);
  train::TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_steps = 2000;
  cfg.seed = 4;
  cfg.threads = g_threads;
  train::Trainer trainer(cfg, data);
  double at10 = 0.0, last = 0.0, emo10 = 0.0, int10 = 0.0, rest10 = 0.0;
  train::LossBreakdown final;
  trainer.run([&](const train::LossBreakdown& l) {
    if (l.step == 10) {
      at10 = l.total;
      emo10 = l.l_cl_emo;
      int10 = l.l_cl_int;
      rest10 = l.l_mse_pro + l.l_fs2;
    }
    last = l.total;
    final = l;
  });
  const double t = sw.seconds();
  o.require(last <= 0.1 * at10, "final total " + fmt("%.4f", last) + " > 10% of step-10 total " + fmt("%.4f", at10));
  o.require(t <= 300.0, "took " + fmt("%.0f s", t));
  o.note("step 10: total " + fmt("%.4f", at10) + " (cl_emo " + fmt("%.4f", emo10) + ", cl_int " +
         fmt("%.4f", int10) + ", pro+fs2 " + fmt("%.4f", rest10) + ")");
  o.note("step 2000: total " + fmt("%.4f", last) + " (cl_emo " + fmt("%.4f", final.l_cl_emo) + ", cl_int " +
         fmt("%.4f", final.l_cl_int) + ", pro+fs2 " + fmt("%.4f", final.l_mse_pro + final.l_fs2) + ")");
  o.note(fmt("%.0f s", t));
  return o;
}

// ---- 5 and 6: separability and geometry ----------------------------------

struct SeparabilityRun {
  eval::EvalReport full;
  std::optional<eval::EvalReport> cross_entropy;
  double seconds = 0.0;
};

eval::EvalReport train_and_evaluate(const corpus::Corpus& train_set, const corpus::Corpus& test_set,
                                    bool cross_entropy, double* seconds) {
  Stopwatch sw;
  train::TrainConfig cfg;
  cfg.max_steps = 5000;
  cfg.seed = 5;
  cfg.threads = g_threads;
  cfg.model.ablation.cross_entropy = cross_entropy;
  train::Trainer trainer(cfg, train_set);
  trainer.run();
  auto report = eval::evaluate(trainer.model(), test_set, cfg.context_length, g_threads);
  if (seconds) *seconds = sw.seconds();
  return report;
}

struct SeparabilityData {
  corpus::Corpus train_set, test_set;
};

SeparabilityData& separability_data() {
  static SeparabilityData d = [] {
    const auto all = generate(700, corpus::LabelMode::kBalanced, 0.9, 5);
    return SeparabilityData{corpus::select_split(all, corpus::Split::kTrain),
                            corpus::select_split(all, corpus::Split::kTest)};
  }();
  return d;
}

SeparabilityRun& separability_run() {
  static SeparabilityRun run = [] {
    SeparabilityRun r;
    r.full = train_and_evaluate(separability_data().train_set, separability_data().test_set, false, &r.seconds);
    return r;
  }();
  return run;
}

std::string diagonal(const eval::Confusion& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "/" : "") + std::to_string(c[i][i]);
  return s;
}

Outcome criterion5() {
  Outcome o;
  auto& run = separability_run();
  const auto& r = run.full;
  o.require(r.emotion_accuracy >= 0.80, "emotion accuracy " + fmt("%.4f", r.emotion_accuracy) + " < 0.80");
  o.require(r.intensity_accuracy >= 0.85, "intensity accuracy " + fmt("%.4f", r.intensity_accuracy) + " < 0.85");
  o.require(eval::strictly_dominant_diagonal(r.emotion), "emotion diagonal not strictly dominant");
  o.require(run.seconds <= 1200.0, "took " + fmt("%.0f s", run.seconds));
  o.note("emotion " + fmt("%.4f", r.emotion_accuracy) + ", intensity " + fmt("%.4f", r.intensity_accuracy) +
         ", " + std::to_string(r.samples) + " test windows, emotion diagonal " + diagonal(r.emotion));
  o.note(fmt("%.0f s", run.seconds));
  return o;
}

Outcome criterion6() {
  Outcome o;
  auto& run = separability_run();
  if (!run.cross_entropy)
    run.cross_entropy =
        train_and_evaluate(separability_data().train_set, separability_data().test_set, true, nullptr);
  const double gap = run.full.emotion_cosine_gap;
  const double ce = run.cross_entropy->emotion_cosine_gap;
  o.require(gap >= 0.2, "gap " + fmt("%.4f", gap) + " < 0.2");
  o.require(ce < gap, "ablation gap " + fmt("%.4f", ce) + " not below " + fmt("%.4f", gap));
  o.note("gap " + fmt("%.4f", gap) + ", without contrastive loss " + fmt("%.4f", ce));
  return o;
}

// ---- 7: ablation harness -------------------------------------------------

Outcome criterion7() {
  Outcome o;
  const auto all = generate(60, corpus::LabelMode::kPaperSkewed, 0.6, 7);
  const auto train_set = corpus::select_split(all, corpus::Split::kTrain);
  const auto test_set = corpus::select_split(all, corpus::Split::kTest);
  train::TrainConfig base;
  base.max_steps = 20;
  base.batch_size = 8;
  base.seed = 7;
  base.threads = g_threads;
  const auto rows = eval::ablation_suite(train_set, test_set, base);
  o.require(rows.size() == 6, std::to_string(rows.size()) + " rows");
  const std::vector<std::string> names{"full", "w/o emotion", "w/o intensity", "w/o speaker", "w/o audio",
                                       "w/o contrastive"};
  const std::set<NodeKind> every{NodeKind::kText, NodeKind::kAudio, NodeKind::kSpeaker, NodeKind::kEmotion,
                                 NodeKind::kIntensity};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (i < names.size()) o.require(row.name == names[i], "row " + std::to_string(i) + " is " + row.name);
    o.require(row.report.samples > 0, row.name + " evaluated nothing");
    o.require(row.report.graph_counts_ok, row.name + " graph counts");
    std::set<NodeKind> kept = every;
    for (NodeKind k : row.ablation.dropped_kinds()) kept.erase(k);
    const auto [nodes, edges] = enumerate(10, kept);
    o.require(row.counts_at_10.nodes == nodes.size() && row.counts_at_10.edges == edges.size(),
              row.name + " counts " + std::to_string(row.counts_at_10.nodes) + "/" +
                  std::to_string(row.counts_at_10.edges) + " vs " + std::to_string(nodes.size()) + "/" +
                  std::to_string(edges.size()));
    const auto g = ecg::build_ecg(10, ecg::make_schema(row.ablation.dropped_kinds()));
    o.require(g.node_count() == nodes.size() && g.edge_count() == edges.size(), row.name + " built graph");
  }
  o.note(std::to_string(rows.size()) + " rows");
  return o;
}

// ---- 8: context sweep ----------------------------------------------------

Outcome criterion8() {
  Outcome o;
  const auto all = generate(60, corpus::LabelMode::kPaperSkewed, 0.6, 8);
  const auto train_set = corpus::select_split(all, corpus::Split::kTrain);
  const auto test_set = corpus::select_split(all, corpus::Split::kTest);
  train::TrainConfig base;
  base.max_steps = 10;
  base.batch_size = 8;
  base.seed = 8;
  base.threads = g_threads;
  const auto first = eval::context_sweep(train_set, test_set, base, eval::kSweepLengths);
  const auto second = eval::context_sweep(train_set, test_set, base, eval::kSweepLengths);
  o.require(first.size() == 7, std::to_string(first.size()) + " rows");
  for (std::size_t i = 0; i < first.size(); ++i) {
    o.require(first[i].context_length == eval::kSweepLengths[i], "row order");
    o.require(first[i].report.samples > 0, "length " + std::to_string(first[i].context_length) + " empty report");
  }
  const std::string a = eval::sweep_csv(first), b = eval::sweep_csv(second);
  o.require(a == b, "CSV differs on repeat");
  o.note(std::to_string(a.size()) + " CSV bytes, identical on repeat");
  return o;
}

// ---- 9: metric oracles ---------------------------------------------------

Outcome criterion9() {
  Outcome o;
  Stopwatch sw;
  Rng rng(9);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 7));
    const int bins = 1 + static_cast<int>(rng.uniform_int(0, 9));
    corpus::AcousticTargets target;
    eval::AcousticPrediction pred;
    int frames = 0;
    for (int i = 0; i < n; ++i) {
      target.duration.push_back(1 + static_cast<int>(rng.uniform_int(0, 4)));
      frames += target.duration.back();
      target.pitch.push_back(rng.normal());
      target.energy.push_back(rng.normal());
      pred.pitch.push_back(rng.normal());
      pred.energy.push_back(rng.normal());
      pred.log_duration.push_back(rng.normal());
    }
    target.mel = testing::random_mat(frames, bins, rng);
    pred.mel = testing::random_mat(frames, bins, rng);

    double mae_m = 0, mae_p = 0, mae_e = 0, mae_d = 0, se_p = 0, se_e = 0, se_d = 0;
    for (int i = 0; i < frames; ++i)
      for (int j = 0; j < bins; ++j) mae_m += std::abs(pred.mel(i, j) - target.mel(i, j));
    mae_m /= static_cast<double>(frames * bins);
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double ld = std::log(static_cast<double>(target.duration[k]));
      mae_p += std::abs(pred.pitch[k] - target.pitch[k]) / n;
      mae_e += std::abs(pred.energy[k] - target.energy[k]) / n;
      mae_d += std::abs(pred.log_duration[k] - ld) / n;
      se_p += (pred.pitch[k] - target.pitch[k]) * (pred.pitch[k] - target.pitch[k]) / n;
      se_e += (pred.energy[k] - target.energy[k]) * (pred.energy[k] - target.energy[k]) / n;
      se_d += (pred.log_duration[k] - ld) * (pred.log_duration[k] - ld) / n;
    }
    const auto m = eval::mae_metrics(pred, target);
    Tape tape;
    const auto f = model::fs2_loss(tape.constant(pred.mel), tape.constant(model::column(pred.pitch)),
                                   tape.constant(model::column(pred.energy)),
                                   tape.constant(model::column(pred.log_duration)), target);
    for (double err : {m.mel - mae_m, m.pitch - mae_p, m.energy - mae_e, m.duration - mae_d,
                       f.mel.scalar() - mae_m, f.pitch.scalar() - se_p, f.energy.scalar() - se_e,
                       f.duration.scalar() - se_d, f.total.scalar() - (mae_m + se_p + se_e + se_d)})
      worst = std::max(worst, std::abs(err));
  }
  const double t = sw.seconds();
  o.require(worst <= 1e-9, "max deviation " + fmt("%.2e", worst));
  o.require(t < 10.0, "took " + fmt("%.2f s", t));
  o.note("max deviation " + fmt("%.1e", worst) + " over 100 cases");
  return o;
}

// ---- 10: determinism and persistence -------------------------------------

Outcome criterion10() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "ecss_acceptance_10";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const auto one = generate(50, corpus::LabelMode::kPaperSkewed, 0.6, 10, 1);
  const auto four = generate(50, corpus::LabelMode::kPaperSkewed, 0.6, 10, 4);
  o.require(corpus_bytes(one) == corpus_bytes(four), "corpus differs across thread counts");

  train::TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 6;
  cfg.context_length = 3;
  cfg.seed = 10;

  auto train_to = [&](unsigned threads, const fs::path& path) {
    train::TrainConfig c = cfg;
    c.threads = threads;
    train::Trainer t(c, one);
    std::vector<train::LossBreakdown> losses;
    t.run([&](const train::LossBreakdown& l) { losses.push_back(l); });
    train::save_checkpoint(path, c, t.model(), t.adam());
    return losses;
  };
  const auto serial = train_to(1, dir / "t1.ecss");
  const auto parallel = train_to(3, dir / "t3.ecss");
  bool same = serial.size() == parallel.size();
  for (std::size_t i = 0; same && i < serial.size(); ++i) same = same_losses(serial[i], parallel[i]);
  o.require(same, "loss trajectory differs across thread counts");
  // The stored config records the thread count, so compare the tensors.
  const auto c1 = train::load_checkpoint(dir / "t1.ecss");
  const auto c3 = train::load_checkpoint(dir / "t3.ecss");
  bool tensors = c1.tensors.size() == c3.tensors.size();
  for (std::size_t i = 0; tensors && i < c1.tensors.size(); ++i)
    tensors = c1.tensors[i].first == c3.tensors[i].first &&
              c1.tensors[i].second.size() == c3.tensors[i].second.size() &&
              std::memcmp(c1.tensors[i].second.data(), c3.tensors[i].second.data(),
                          sizeof(double) * static_cast<std::size_t>(c1.tensors[i].second.size())) == 0;
  o.require(tensors, "parameters differ across thread counts");

  train::TrainConfig half = cfg;
  half.threads = 1;
  half.max_steps = 3;
  {
    train::Trainer t(half, one);
    t.run();
    train::save_checkpoint(dir / "half.ecss", half, t.model(), t.adam());
  }
  train::TrainConfig rest = cfg;
  rest.threads = 1;
  auto resumed = train::resume_trainer(train::load_checkpoint(dir / "half.ecss"), rest, one);
  std::vector<train::LossBreakdown> tail;
  resumed.run([&](const train::LossBreakdown& l) { tail.push_back(l); });
  train::save_checkpoint(dir / "resumed.ecss", rest, resumed.model(), resumed.adam());
  bool trajectory = tail.size() == 3;
  for (std::size_t i = 0; trajectory && i < tail.size(); ++i) trajectory = same_losses(tail[i], serial[i + 3]);
  o.require(trajectory, "resumed loss trajectory differs");
  o.require(file_bytes(dir / "resumed.ecss") == file_bytes(dir / "t1.ecss"), "resumed checkpoint differs");
  fs::remove_all(dir);
  o.note("corpus, 6-step trajectory and resume at step 3 bit-identical");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecss acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',')->check(CLI::Range(1, 10));
  app.add_option("--threads", g_threads, "Worker threads for training and evaluation")->check(CLI::Range(1u, 64u));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8,
                                                       criterion9, criterion10};
  const char* titles[] = {"graph structure oracle",   "gradient suite",   "contrastive loss oracle",
                          "overfit",                  "separability",     "contrastive geometry",
                          "ablation harness",         "context sweep",    "metric oracles",
                          "determinism and persistence"};
  bool all_pass = true;
  for (int i = 1; i <= 10; ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), i) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(i - 1)]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    all_pass = all_pass && o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", i, titles[i - 1], o.detail.c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
