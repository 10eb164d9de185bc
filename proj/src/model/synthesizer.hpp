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

#include <array>
#include <span>
#include <vector>

#include "corpus/corpus.hpp"
#include "model/config.hpp"
#include "nn/layers.hpp"

namespace ecss::model {

using ad::Var;
using nn::Ctx;

struct EncodedText {
  Var tokens;  // n x model_dim
  Var pooled;  // 1 x model_dim, mean over tokens
};

struct TextEncoder {
  std::size_t embedding = 0;  // vocab x model_dim
  std::vector<nn::FftBlock> blocks;
  int vocab = 0;
  int dim = 0;

  static TextEncoder create(ad::ParamStore& ps, const ModelConfig& cfg, Rng& rng);
  EncodedText operator()(const Ctx& ctx, std::span<const int> tokens) const;
};

enum class Stream : int { kContent = 0, kSpeaker, kEmotion, kIntensity, kProsody };
inline constexpr int kNumStreams = 5;

// Softmax-weighted sum of per-stream bias-free projections.
struct Aggregator {
  std::size_t weights = 0;  // 1 x 5, zero-initialized
  std::array<nn::Linear, kNumStreams> proj;

  static Aggregator create(ad::ParamStore& ps, const ModelConfig& cfg, Rng& rng);
  Var operator()(const Ctx& ctx, const std::array<Var, kNumStreams>& streams) const;
};

struct VariancePredictor {
  nn::Conv1d conv1, conv2;
  nn::Linear out;

  static VariancePredictor create(ad::ParamStore& ps, const std::string& name,
                                  int dim, Rng& rng);
  Var operator()(const Ctx& ctx, Var x) const;  // n x 1
};

struct VarianceOutput {
  Var log_duration;  // n x 1
  Var pitch;         // n x 1
  Var energy;        // n x 1
  Var frames;        // sum(durations) x model_dim
  std::vector<int> durations;
};

// Frame-to-token map of the length regulator.
std::vector<int> expand_durations(std::span<const int> durations);
// round(exp(log d)) clamped to >= 1.
std::vector<int> durations_from_log(const ad::Mat& log_duration);

struct VarianceAdaptor {
  VariancePredictor duration, pitch, energy;
  nn::Linear pitch_embed, energy_embed;  // 1 -> model_dim

  static VarianceAdaptor create(ad::ParamStore& ps, const ModelConfig& cfg,
                                Rng& rng);
  // Teacher durations drive length regulation when given; teacher pitch and
  // energy, when given, replace the predictions in the embedding add-back.
  VarianceOutput operator()(const Ctx& ctx, Var x,
                            const std::vector<int>* teacher_durations,
                            const std::vector<double>* teacher_pitch,
                            const std::vector<double>* teacher_energy) const;
};

struct MelDecoder {
  std::vector<nn::FftBlock> blocks;
  nn::Linear out;
  int dim = 0;

  static MelDecoder create(ad::ParamStore& ps, const ModelConfig& cfg, Rng& rng);
  Var operator()(const Ctx& ctx, Var frames) const;
};

struct Fs2Loss {
  Var total;
  Var mel;       // MAE
  Var pitch;     // MSE
  Var energy;    // MSE
  Var duration;  // MSE on log durations
};

Fs2Loss fs2_loss(Var mel, Var pitch, Var energy, Var log_duration,
                 const corpus::AcousticTargets& targets);

ad::Mat column(std::span<const double> v);

}  // namespace ecss::model
