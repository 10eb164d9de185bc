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

#pragma once

#include <vector>

#include "model/config.hpp"
#include "model/hgt.hpp"
#include "nn/layers.hpp"

namespace ecss::model {

struct PredictorOutput {
  Var feature;  // 1 x feature_dim
  Var logits;   // 1 x classes
  bool fallback = false;
};

// Conv x2 -> BiLSTM -> FC -> ReLU -> FC over a sequence of node encodings.
// `pooled` selects the intensity variant: the FC stack runs per step and is
// followed by average pooling (kernel 2, stride 1) and a mean over steps;
// otherwise the final states of both directions feed the FC stack.
struct SequencePredictor {
  nn::Conv1d conv1, conv2;
  nn::Lstm forward_lstm, backward_lstm;
  nn::Linear fc1, fc2, head;
  bool pooled = false;
  int classes = 0;
  int feature_dim = 0;

  static SequencePredictor create(ad::ParamStore& ps, const std::string& name,
                                  int in, int lstm_hidden, int feature_dim,
                                  int classes, bool pooled, Rng& rng);

  // seq: J x in. With detach_head, the logits head sees a detached copy of
  // the feature so its loss trains only the head.
  PredictorOutput operator()(const Ctx& ctx, Var seq, bool detach_head) const;
  // Zero feature, uniform logits.
  PredictorOutput fallback(const Ctx& ctx) const;
};

// Multi-head attention with the current text feature as query and history
// text encodings as keys and values.
struct ProsodyPredictor {
  nn::Linear q, k, v, o;
  int heads = 2;

  static ProsodyPredictor create(ad::ParamStore& ps, const ModelConfig& cfg,
                                 Rng& rng);
  // query: 1 x text_dim, history: J x hidden -> 1 x prosody_dim
  Var operator()(const Ctx& ctx, Var query, Var history) const;
  // Attention weights, heads x J, for inspection.
  ad::Mat attention(const Ctx& ctx, Var query, Var history) const;
};

struct RenderedFeatures {
  PredictorOutput emotion;
  PredictorOutput intensity;
  Var prosody;  // 1 x prosody_dim
};

struct Renderer {
  SequencePredictor emotion, intensity;
  ProsodyPredictor prosody;

  static Renderer create(ad::ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  PredictorOutput predict_emotion(const Ctx& ctx, const EncodedGraph& g,
                                  bool detach_head) const;
  PredictorOutput predict_intensity(const Ctx& ctx, const EncodedGraph& g,
                                    bool detach_head) const;
  Var predict_prosody(const Ctx& ctx, const EncodedGraph& g,
                      Var current_text_feature) const;
};

struct SupConInfo {
  int contributing_anchors = 0;
  bool no_positives = false;
  bool batch_too_small = false;
};

// Supervised contrastive loss over the rows of `features` (B x d) with cosine
// similarity; zero rows have similarity 0 with everything.
Var supcon_loss(Var features, const std::vector<int>& labels, double tau,
                SupConInfo* info = nullptr);

Var prosody_mse(Var pred, const ad::Mat& target);

}  // namespace ecss::model
