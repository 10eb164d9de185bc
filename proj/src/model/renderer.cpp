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

#include "model/renderer.hpp"

#include <cmath>

#include "corpus/corpus.hpp"
#include "util/error.hpp"

namespace ecss::model {

SequencePredictor SequencePredictor::create(ad::ParamStore& ps,
                                            const std::string& name, int in,
                                            int lstm_hidden, int feature_dim,
                                            int classes, bool pooled, Rng& rng) {
  SequencePredictor p;
  p.pooled = pooled;
  p.classes = classes;
  p.feature_dim = feature_dim;
  p.conv1 = nn::Conv1d::create(ps, name + ".conv1", in, in, 3, rng);
  p.conv2 = nn::Conv1d::create(ps, name + ".conv2", in, in, 3, rng);
  p.forward_lstm = nn::Lstm::create(ps, name + ".lstm.fwd", in, lstm_hidden, rng);
  p.backward_lstm = nn::Lstm::create(ps, name + ".lstm.bwd", in, lstm_hidden, rng);
  p.fc1 = nn::Linear::create(ps, name + ".fc1", 2 * lstm_hidden, feature_dim, rng);
  p.fc2 = nn::Linear::create(ps, name + ".fc2", feature_dim, feature_dim, rng);
  p.head = nn::Linear::create(ps, name + ".head", feature_dim, classes, rng);
  return p;
}

PredictorOutput SequencePredictor::operator()(const Ctx& ctx, Var seq,
                                              bool detach_head) const {
  require(seq.valid() && seq.rows() >= 1, ErrorKind::kValidation,
          "predictor needs at least one node");
  Var x = ad::relu(conv1(ctx, seq));
  x = ad::relu(conv2(ctx, x));
  const auto fwd = forward_lstm.run(ctx, x, false);
  const auto bwd = backward_lstm.run(ctx, x, true);
  const int n = static_cast<int>(fwd.size());
  PredictorOutput out;
  if (!pooled) {
    const Var both[2] = {fwd.back(), bwd.front()};
    out.feature = fc2(ctx, ad::relu(fc1(ctx, ad::concat_cols(both))));
  } else {
    std::vector<Var> steps;
    for (int t = 0; t < n; ++t) {
      const Var both[2] = {fwd[static_cast<std::size_t>(t)],
                           bwd[static_cast<std::size_t>(t)]};
      steps.push_back(ad::concat_cols(both));
    }
    Var s = n == 1 ? steps[0] : ad::concat_rows(steps);
    Var y = fc2(ctx, ad::relu(fc1(ctx, s)));
    if (n > 1) {
      Var pool = ad::scale(
          ad::add(ad::slice_rows(y, 0, n - 1), ad::slice_rows(y, 1, n - 1)), 0.5);
      y = pool;
    }
    out.feature = ad::mean_rows(y);
  }
  out.logits = head(ctx, detach_head ? ad::detach(out.feature) : out.feature);
  return out;
}

PredictorOutput SequencePredictor::fallback(const Ctx& ctx) const {
  PredictorOutput out;
  out.feature = ctx.constant(ad::Mat::Zero(1, feature_dim));
  out.logits = ctx.constant(ad::Mat::Zero(1, classes));
  out.fallback = true;
  return out;
}

ProsodyPredictor ProsodyPredictor::create(ad::ParamStore& ps,
                                          const ModelConfig& cfg, Rng& rng) {
  ProsodyPredictor p;
  p.heads = cfg.prosody_heads;
  p.q = nn::Linear::create(ps, "render.prosody.q", cfg.text_dim, cfg.hgt_hidden, rng);
  p.k = nn::Linear::create(ps, "render.prosody.k", cfg.hgt_hidden, cfg.hgt_hidden, rng);
  p.v = nn::Linear::create(ps, "render.prosody.v", cfg.hgt_hidden, cfg.hgt_hidden, rng);
  p.o = nn::Linear::create(ps, "render.prosody.o", cfg.hgt_hidden, cfg.prosody_dim, rng);
  return p;
}

namespace {

std::vector<Var> prosody_heads(const ProsodyPredictor& p, const Ctx& ctx,
                               Var query, Var history, std::vector<Var>* weights) {
  const int dim = p.q.out;
  const int dh = dim / p.heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  Var qv = p.q(ctx, query);
  Var kv = p.k(ctx, history);
  Var vv = p.v(ctx, history);
  std::vector<Var> out;
  for (int h = 0; h < p.heads; ++h) {
    Var att = ad::softmax_rows(ad::scale(
        ad::matmul_nt(ad::slice_cols(qv, h * dh, dh), ad::slice_cols(kv, h * dh, dh)),
        inv));
    if (weights != nullptr) weights->push_back(att);
    out.push_back(ad::matmul(att, ad::slice_cols(vv, h * dh, dh)));
  }
  return out;
}

}  // namespace

Var ProsodyPredictor::operator()(const Ctx& ctx, Var query, Var history) const {
  require(history.valid() && history.rows() >= 1, ErrorKind::kValidation,
          "prosody predictor needs at least one history text node");
  const auto per_head = prosody_heads(*this, ctx, query, history, nullptr);
  return o(ctx, per_head.size() == 1 ? per_head[0] : ad::concat_cols(per_head));
}

ad::Mat ProsodyPredictor::attention(const Ctx& ctx, Var query, Var history) const {
  std::vector<Var> weights;
  prosody_heads(*this, ctx, query, history, &weights);
  ad::Mat out(heads, history.rows());
  for (int h = 0; h < heads; ++h) out.row(h) = weights[static_cast<std::size_t>(h)].value();
  return out;
}

Renderer Renderer::create(ad::ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
  Renderer r;
  r.emotion = SequencePredictor::create(ps, "render.emotion", cfg.hgt_hidden,
                                        cfg.lstm_hidden, cfg.feature_dim,
                                        corpus::kNumEmotions, false, rng);
  r.intensity = SequencePredictor::create(ps, "render.intensity", cfg.hgt_hidden,
                                          cfg.lstm_hidden, cfg.feature_dim,
                                          corpus::kNumIntensities, true, rng);
  r.prosody = ProsodyPredictor::create(ps, cfg, rng);
  return r;
}

PredictorOutput Renderer::predict_emotion(const Ctx& ctx, const EncodedGraph& g,
                                          bool detach_head) const {
  Var seq = g.history_rows(ecg::NodeKind::kEmotion);
  if (!seq.valid()) return emotion.fallback(ctx);
  return emotion(ctx, seq, detach_head);
}

PredictorOutput Renderer::predict_intensity(const Ctx& ctx, const EncodedGraph& g,
                                            bool detach_head) const {
  Var seq = g.history_rows(ecg::NodeKind::kIntensity);
  if (!seq.valid()) return intensity.fallback(ctx);
  return intensity(ctx, seq, detach_head);
}

Var Renderer::predict_prosody(const Ctx& ctx, const EncodedGraph& g,
                              Var current_text_feature) const {
  return prosody(ctx, current_text_feature, g.history_rows(ecg::NodeKind::kText));
}

Var supcon_loss(Var features, const std::vector<int>& labels, double tau,
                SupConInfo* info) {
  require(tau > 0.0, ErrorKind::kConfig, "temperature must be > 0");
  require(static_cast<std::size_t>(features.rows()) == labels.size(),
          ErrorKind::kValidation, "one label per feature row required");
  SupConInfo local;
  ad::Tape& tape = *features.tape();
  if (features.rows() < 2) {
    local.batch_too_small = true;
    if (info != nullptr) *info = local;
    return tape.constant(ad::Mat::Zero(1, 1));
  }
  Var unit = ad::l2_normalize_rows(features);
  Var logits = ad::scale(ad::matmul_nt(unit, unit), 1.0 / tau);
  Var loss = ad::supcon_from_logits(logits, labels, &local.contributing_anchors);
  local.no_positives = local.contributing_anchors == 0;
  if (info != nullptr) *info = local;
  return loss;
}

Var prosody_mse(Var pred, const ad::Mat& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          ErrorKind::kValidation, "prosody prediction and target differ in shape");
  return ad::mean_squared_error(pred, target);
}

}  // namespace ecss::model
