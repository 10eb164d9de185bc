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

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecg/ecg.hpp"

namespace ecss::model {

enum class TextMode { kHashedNgram, kExternal };

// Ablation switches. Node-kind drops filter the graph schema; cross_entropy
// swaps both contrastive terms for cross-entropy on the logits heads.
struct Ablation {
  bool drop_emotion = false;
  bool drop_intensity = false;
  bool drop_speaker = false;
  bool drop_audio = false;
  bool cross_entropy = false;

  std::vector<ecg::NodeKind> dropped_kinds() const;
  // "none", "emotion", ..., "supcon", or a '+'-joined combination.
  std::string name() const;
  bool operator==(const Ablation&) const = default;
};

// Parses one of emotion|intensity|speaker|audio|supcon|none.
Ablation parse_ablation(std::string_view name);

struct ModelConfig {
  std::string profile = "lite";

  int vocab_size = 64;
  int hash_bins = 1024;
  int text_dim = 64;   // text node features
  int node_dim = 32;   // audio/speaker/emotion/intensity node features
  int audio_dim = 256;  // stored audio_feat length

  int hgt_hidden = 32;
  int hgt_heads = 2;
  int hgt_layers = 1;
  bool hgt_layer_norm = false;

  int lstm_hidden = 32;
  int feature_dim = 32;  // emotion/intensity feature heads
  int prosody_heads = 2;
  int prosody_dim = 256;

  int model_dim = 32;
  int ffn_dim = 64;
  int encoder_layers = 4;
  int encoder_heads = 2;
  int decoder_layers = 2;
  int decoder_heads = 2;
  int mel_bins = 80;
  double dropout = 0.2;

  double tau = 0.1;

  TextMode text_mode = TextMode::kHashedNgram;
  std::string text_embeddings_path;

  Ablation ablation;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Dimensions from the published model setup, decoder included.
ModelConfig paper_profile();
// Reduced widths and a two-block decoder for CPU training.
ModelConfig lite_profile();
// Tiny widths for finite-difference checks.
ModelConfig toy_profile();
// "lite" or "paper".
ModelConfig profile_by_name(std::string_view name);

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace ecss::model
