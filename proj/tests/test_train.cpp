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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "support.hpp"
#include "train/train.hpp"
#include "util/error.hpp"

namespace ecss::train {
namespace {

using ad::Mat;

corpus::Corpus toy_corpus(const model::ModelConfig& cfg, int n, int turns, std::uint64_t seed) {
  Rng rng(seed);
  corpus::Corpus c;
  for (int i = 0; i < n; ++i) c.push_back(testing::toy_conversation(cfg, rng, "t" + std::to_string(i), turns));
  return c;
}

TrainConfig toy_train(int steps = 4) {
  TrainConfig c;
  c.model = model::toy_profile();
  c.batch_size = 3;
  c.context_length = 2;
  c.max_steps = steps;
  c.seed = 17;
  return c;
}

std::filesystem::path temp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ecss_train_" + name);
}

void expect_same_params(const model::Model& a, const model::Model& b) {
  ASSERT_EQ(a.params().size(), b.params().size());
  for (std::size_t i = 0; i < a.params().size(); ++i)
    ASSERT_EQ(a.params().value(i), b.params().value(i)) << a.params().name(i);
}

TEST(TotalLoss, SumsTheFourTerms) {
  const auto l = total_loss(0.1, 0.2, 0.3, 0.4);
  EXPECT_NEAR(l.total, 1.0, 1e-15);
  EXPECT_EQ(l.l_cl_emo, 0.1);
  EXPECT_EQ(l.l_fs2, 0.4);
}

TEST(Adam, MatchesScalarRecurrence) {
  ad::ParamStore ps;
  ps.add("w", Mat::Constant(1, 2, 0.5));
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  auto state = AdamState::zeros(ps);
  double w = 0.5, m = 0, v = 0;
  const double gs[] = {0.3, -1.2, 0.05, 2.0, -0.7};
  for (int t = 1; t <= 5; ++t) {
    const double g = gs[t - 1];
    adam_step(ps, {Mat::Constant(1, 2, g)}, state, cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.98 * v + 0.02 * g * g;
    w -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.98, t))) + 1e-9);
    EXPECT_NEAR(ps.value(0)(0, 1), w, 1e-15);
  }
  EXPECT_EQ(state.step, 5);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ad::ParamStore ps;
  ps.add("w", Mat::Zero(1, 3));
  TrainConfig cfg;
  auto state = AdamState::zeros(ps);
  Mat g(1, 3);
  g << 4.0, -0.01, 0.0;
  adam_step(ps, {g}, state, cfg);
  EXPECT_NEAR(ps.value(0)(0, 0), -1e-3, 1e-9);
  EXPECT_NEAR(ps.value(0)(0, 1), 1e-3, 1e-9);
  EXPECT_EQ(ps.value(0)(0, 2), 0.0);
}

TEST(Adam, ZeroOrMissingGradientLeavesParameters) {
  ad::ParamStore ps;
  ps.add("a", Mat::Constant(2, 2, 1.5));
  ps.add("b", Mat::Constant(1, 2, -3.0));
  TrainConfig cfg;
  auto state = AdamState::zeros(ps);
  adam_step(ps, {Mat::Zero(2, 2), Mat()}, state, cfg);
  EXPECT_EQ(ps.value(0), Mat::Constant(2, 2, 1.5));
  EXPECT_EQ(ps.value(1), Mat::Constant(1, 2, -3.0));
}

TEST(Sampler, DeterministicDistinctAndInRange) {
  const auto cfg = model::toy_profile();
  auto corpus = toy_corpus(cfg, 20, 5, 1);
  for (long step : {0L, 1L, 99L}) {
    const auto a = sample_batch(corpus, 8, 3, step);
    EXPECT_EQ(a, sample_batch(corpus, 8, 3, step));
    std::set<int> convs;
    for (const auto& w : a) {
      convs.insert(w.conversation);
      EXPECT_GE(w.index, 1);
      EXPECT_LT(w.index, 5);
    }
    EXPECT_EQ(convs.size(), 8u);
  }
  EXPECT_NE(sample_batch(corpus, 8, 3, 0), sample_batch(corpus, 8, 3, 1));
  EXPECT_NE(sample_batch(corpus, 8, 3, 0), sample_batch(corpus, 8, 4, 0));
  // Larger than the corpus: conversations repeat.
  EXPECT_EQ(sample_batch(corpus, 50, 3, 0).size(), 50u);
}

TEST(Sampler, AllWindowsSkipsFirstTurns) {
  const auto cfg = model::toy_profile();
  auto corpus = toy_corpus(cfg, 3, 4, 2);
  corpus[1].turns.resize(2);
  const auto w = all_windows(corpus);
  EXPECT_EQ(w.size(), 3u + 1u + 3u);
  EXPECT_EQ(w.front(), (WindowRef{0, 1}));
}

TEST(Config, JsonRoundTripAndValidation) {
  TrainConfig c = toy_train();
  c.learning_rate = 2e-4;
  c.model.ablation.drop_audio = true;
  const auto back = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.model, c.model);
  TrainConfig bad = c;
  bad.batch_size = 1;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.learning_rate = 0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Metrics, HeaderAndRow) {
  EXPECT_EQ(metrics_header(), "step,l_cl_emo,l_cl_int,l_mse_pro,l_fs2,total");
  auto l = total_loss(0.5, 0.25, 1, 2);
  l.step = 7;
  const auto row = metrics_row(l);
  EXPECT_EQ(row.substr(0, 2), "7,");
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 5);
}

// Batch of three J=2 windows where two current turns share their labels, so
// both contrastive terms have positives.
struct GradFixture {
  TrainConfig cfg = toy_train();
  corpus::Corpus corpus;
  std::vector<WindowRef> batch{{0, 3}, {1, 2}, {2, 3}};

  explicit GradFixture(bool cross_entropy) {
    cfg.model.dropout = 0.0;
    cfg.model.ablation.cross_entropy = cross_entropy;
    corpus = toy_corpus(cfg.model, 3, 4, 5);
    auto set = [&](int c, int t, corpus::Emotion e, corpus::Intensity i) {
      auto& u = corpus[static_cast<std::size_t>(c)].turns[static_cast<std::size_t>(t)];
      u.emotion = e;
      u.intensity = i;
    };
    set(0, 3, corpus::Emotion::kSad, corpus::Intensity::kStrong);
    set(1, 2, corpus::Emotion::kSad, corpus::Intensity::kStrong);
    set(2, 3, corpus::Emotion::kFear, corpus::Intensity::kWeak);
  }
};

bool is_head(const std::string& n) { return n.find(".head.") != std::string::npos; }

// The step is squeezed from both sides on the full model: ReLU and the mel
// absolute error put kinks within reach of h = 1e-4, while the contrastive
// run has gradients near 1e-8 that roundoff swamps at h = 1e-5.
constexpr double kContrastiveStep = 1e-4;
constexpr double kCrossEntropyStep = 1e-5;

TEST(FullModelGradients, ContrastiveObjectiveMatchesFiniteDifferences) {
  GradFixture f(false);
  model::Model m(f.cfg.model, 3);
  const auto r = compute_batch(m, f.corpus, f.batch, f.cfg, 0);
  EXPECT_GT(r.losses.l_cl_emo, 0.0);
  EXPECT_GT(r.losses.l_cl_int, 0.0);
  auto eval = [&](bool head) {
    return [&, head] {
      const auto l = compute_batch(m, f.corpus, f.batch, f.cfg, 0).losses;
      return head ? l.probe_emo + l.probe_int : l.total;
    };
  };
  auto body = testing::check_grads_against(m.params(), r.grads, eval(false), 4, kContrastiveStep,
                                           [](const std::string& n) { return !is_head(n); });
  EXPECT_GT(body.checked, 400u);
  EXPECT_LT(body.max_rel, 1e-4) << body.worst;
  auto head = testing::check_grads_against(m.params(), r.grads, eval(true), 8, kContrastiveStep, is_head);
  EXPECT_GT(head.checked, 0u);
  EXPECT_LT(head.max_rel, 1e-4) << head.worst;
}

TEST(FullModelGradients, CrossEntropyAblationMatchesFiniteDifferences) {
  GradFixture f(true);
  model::Model m(f.cfg.model, 4);
  const auto r = compute_batch(m, f.corpus, f.batch, f.cfg, 0);
  EXPECT_EQ(r.losses.l_cl_emo, r.losses.probe_emo);
  EXPECT_EQ(r.losses.l_cl_int, r.losses.probe_int);
  auto rep = testing::check_grads_against(
      m.params(), r.grads, [&] { return compute_batch(m, f.corpus, f.batch, f.cfg, 0).losses.total; }, 4,
      kCrossEntropyStep);
  EXPECT_GT(rep.checked, 400u);
  EXPECT_LT(rep.max_rel, 1e-4) << rep.worst;
}

TEST(ComputeBatch, ThreadCountDoesNotChangeResults) {
  TrainConfig cfg = toy_train();
  cfg.batch_size = 5;
  auto corpus = toy_corpus(cfg.model, 8, 5, 6);
  model::Model m(cfg.model, 1);
  const auto batch = sample_batch(corpus, 5, 1, 0);
  cfg.threads = 1;
  const auto a = compute_batch(m, corpus, batch, cfg, 0);
  cfg.threads = 3;
  const auto b = compute_batch(m, corpus, batch, cfg, 0);
  EXPECT_EQ(metrics_row(a.losses), metrics_row(b.losses));
  EXPECT_EQ(a.losses.total, b.losses.total);
  for (std::size_t i = 0; i < a.grads.size(); ++i) EXPECT_EQ(a.grads[i], b.grads[i]) << i;
}

TEST(ComputeBatch, GraphCountsFollowTheSchema) {
  TrainConfig cfg = toy_train();
  cfg.model.ablation.drop_audio = true;
  auto corpus = toy_corpus(cfg.model, 4, 5, 7);
  model::Model m(cfg.model, 1);
  const std::vector<WindowRef> batch{{0, 4}, {1, 1}, {2, 2}};
  const auto r = compute_batch(m, corpus, batch, cfg, 0);
  const auto schema = ecg::make_schema({ecg::NodeKind::kAudio});
  EXPECT_EQ(r.graph_counts[0], ecg::expected_counts(2, schema));
  EXPECT_EQ(r.graph_counts[1], ecg::expected_counts(1, schema));
  EXPECT_EQ(r.graph_counts[2], ecg::expected_counts(2, schema));
}

TEST(ComputeBatch, EmotionAblationZeroesItsContrastiveTerm) {
  TrainConfig cfg = toy_train();
  cfg.model.ablation.drop_emotion = true;
  auto corpus = toy_corpus(cfg.model, 4, 5, 8);
  Trainer t(cfg, corpus);
  const auto l = t.train_step();
  EXPECT_EQ(l.l_cl_emo, 0.0);
  EXPECT_EQ(l.probe_emo, 0.0);
  EXPECT_TRUE(std::isfinite(l.total));
}

TEST(Trainer, ThreadCountDoesNotChangeTraining) {
  auto cfg = toy_train(3);
  auto corpus = toy_corpus(cfg.model, 6, 5, 9);
  cfg.threads = 1;
  Trainer a(cfg, corpus);
  a.run();
  cfg.threads = 3;
  Trainer b(cfg, corpus);
  b.run();
  expect_same_params(a.model(), b.model());
}

TEST(Checkpoint, RoundTripKeepsEveryTensor) {
  auto cfg = toy_train(2);
  auto corpus = toy_corpus(cfg.model, 4, 4, 10);
  Trainer t(cfg, corpus);
  t.run();
  const auto path = temp("rt.ecss");
  save_checkpoint(path, t.config(), t.model(), t.adam());
  const auto ck = load_checkpoint(path);
  EXPECT_EQ(ck.version, kCheckpointVersion);
  EXPECT_EQ(to_json(ck.config), to_json(t.config()));
  EXPECT_EQ(ck.tensors.size(), 3 * t.model().params().size() + 1);
  model::Model fresh(cfg.model, 99);
  AdamState adam = AdamState::zeros(fresh.params());
  restore(ck, fresh, &adam);
  expect_same_params(fresh, t.model());
  EXPECT_EQ(adam.step, 2);
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    EXPECT_EQ(adam.m[i], t.adam().m[i]);
    EXPECT_EQ(adam.v[i], t.adam().v[i]);
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, DamageIsAnIntegrityError) {
  auto cfg = toy_train(1);
  auto corpus = toy_corpus(cfg.model, 3, 3, 11);
  Trainer t(cfg, corpus);
  const auto path = temp("dmg.ecss");
  save_checkpoint(path, t.config(), t.model(), t.adam());
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto expect_integrity = [&](const std::string& data, const char* what) {
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << data;
    }
    try {
      load_checkpoint(path);
      ADD_FAILURE() << what << ": expected integrity error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kIntegrity) << what;
    }
  };
  expect_integrity(bytes.substr(0, bytes.size() / 2), "truncated");
  std::string flipped = bytes;
  flipped[flipped.size() / 2] = static_cast<char>(flipped[flipped.size() / 2] ^ 0x40);
  expect_integrity(flipped, "bit flip");
  expect_integrity("XXXX" + bytes.substr(4), "magic");
  std::filesystem::remove(path);
  try {
    load_checkpoint(path);
    FAIL() << "expected io error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST(Checkpoint, RefusesADifferentModelConfiguration) {
  auto cfg = toy_train(1);
  cfg.model.ablation.drop_speaker = true;
  auto corpus = toy_corpus(cfg.model, 3, 3, 12);
  Trainer t(cfg, corpus);
  const auto path = temp("abl.ecss");
  save_checkpoint(path, t.config(), t.model(), t.adam());
  model::Model plain(model::toy_profile(), 1);
  try {
    restore(load_checkpoint(path), plain, nullptr);
    FAIL() << "expected config error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, ResumeIsBitExact) {
  auto cfg = toy_train(4);
  auto corpus = toy_corpus(cfg.model, 6, 5, 13);
  Trainer straight(cfg, corpus);
  std::vector<std::string> rows;
  straight.run([&](const LossBreakdown& l) { rows.push_back(metrics_row(l)); });

  auto half = cfg;
  half.max_steps = 2;
  Trainer first(half, corpus);
  first.run();
  const auto path = temp("resume.ecss");
  save_checkpoint(path, first.config(), first.model(), first.adam());
  auto more = cfg;
  more.threads = 2;
  Trainer second = resume_trainer(load_checkpoint(path), more, corpus);
  EXPECT_EQ(second.step(), 2);
  std::vector<std::string> tail;
  second.run([&](const LossBreakdown& l) { tail.push_back(metrics_row(l)); });
  ASSERT_EQ(tail.size(), 2u);
  EXPECT_EQ(tail[0], rows[2]);
  EXPECT_EQ(tail[1], rows[3]);
  expect_same_params(second.model(), straight.model());

  auto changed = cfg;
  changed.learning_rate = 5e-3;
  EXPECT_THROW(resume_trainer(load_checkpoint(path), changed, corpus), Error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace ecss::train
