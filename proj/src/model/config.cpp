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

#include "model/config.hpp"

#include "util/error.hpp"

namespace ecss::model {

std::vector<ecg::NodeKind> Ablation::dropped_kinds() const {
  std::vector<ecg::NodeKind> out;
  if (drop_audio) out.push_back(ecg::NodeKind::kAudio);
  if (drop_speaker) out.push_back(ecg::NodeKind::kSpeaker);
  if (drop_emotion) out.push_back(ecg::NodeKind::kEmotion);
  if (drop_intensity) out.push_back(ecg::NodeKind::kIntensity);
  return out;
}

std::string Ablation::name() const {
  std::string out;
  auto add = [&](bool on, const char* n) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += n;
  };
  add(drop_emotion, "emotion");
  add(drop_intensity, "intensity");
  add(drop_speaker, "speaker");
  add(drop_audio, "audio");
  add(cross_entropy, "supcon");
  return out.empty() ? "none" : out;
}

Ablation parse_ablation(std::string_view name) {
  Ablation a;
  if (name == "none") return a;
  if (name == "emotion") {
    a.drop_emotion = true;
  } else if (name == "intensity") {
    a.drop_intensity = true;
  } else if (name == "speaker") {
    a.drop_speaker = true;
  } else if (name == "audio") {
    a.drop_audio = true;
  } else if (name == "supcon") {
    a.cross_entropy = true;
  } else {
    fail(ErrorKind::kConfig, "unknown ablation '" + std::string(name) +
                                 "' (expected emotion|intensity|speaker|audio|"
                                 "supcon|none)");
  }
  return a;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    require(v >= 1, ErrorKind::kConfig, std::string(name) + " must be >= 1");
  };
  positive(vocab_size, "vocab_size");
  positive(hash_bins, "hash_bins");
  positive(text_dim, "text_dim");
  positive(node_dim, "node_dim");
  positive(audio_dim, "audio_dim");
  positive(hgt_hidden, "hgt_hidden");
  positive(hgt_heads, "hgt_heads");
  positive(hgt_layers, "hgt_layers");
  positive(lstm_hidden, "lstm_hidden");
  positive(feature_dim, "feature_dim");
  positive(prosody_heads, "prosody_heads");
  positive(prosody_dim, "prosody_dim");
  positive(model_dim, "model_dim");
  positive(ffn_dim, "ffn_dim");
  positive(encoder_layers, "encoder_layers");
  positive(encoder_heads, "encoder_heads");
  positive(decoder_layers, "decoder_layers");
  positive(decoder_heads, "decoder_heads");
  positive(mel_bins, "mel_bins");
  require(hgt_hidden % hgt_heads == 0, ErrorKind::kConfig,
          "hgt_hidden must be divisible by hgt_heads");
  require(hgt_hidden % prosody_heads == 0, ErrorKind::kConfig,
          "hgt_hidden must be divisible by prosody_heads");
  require(model_dim % encoder_heads == 0 && model_dim % decoder_heads == 0,
          ErrorKind::kConfig, "model_dim must be divisible by the head counts");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::kConfig,
          "dropout must lie in [0, 1)");
  require(tau > 0.0, ErrorKind::kConfig, "tau must be > 0");
  require(text_mode == TextMode::kHashedNgram || !text_embeddings_path.empty(),
          ErrorKind::kConfig, "external text mode needs an embeddings path");
}

ModelConfig paper_profile() {
  ModelConfig c;
  c.profile = "paper";
  c.text_dim = 512;
  c.node_dim = 256;
  c.hgt_hidden = 384;
  c.hgt_heads = 2;
  c.hgt_layers = 1;
  c.lstm_hidden = 256;
  c.feature_dim = 256;
  c.prosody_heads = 2;
  c.prosody_dim = 256;
  c.model_dim = 256;
  c.ffn_dim = 256;
  c.encoder_layers = 4;
  c.decoder_layers = 6;
  return c;
}

ModelConfig lite_profile() { return ModelConfig{}; }

ModelConfig toy_profile() {
  ModelConfig c;
  c.profile = "toy";
  c.vocab_size = 12;
  c.hash_bins = 16;
  c.text_dim = 6;
  c.node_dim = 4;
  c.audio_dim = 5;
  c.hgt_hidden = 4;
  c.hgt_heads = 2;
  c.lstm_hidden = 3;
  c.feature_dim = 4;
  c.prosody_heads = 2;
  c.prosody_dim = 5;
  c.model_dim = 4;
  c.ffn_dim = 6;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.mel_bins = 3;
  return c;
}

ModelConfig profile_by_name(std::string_view name) {
  if (name == "lite") return lite_profile();
  if (name == "paper") return paper_profile();
  if (name == "toy") return toy_profile();
  fail(ErrorKind::kConfig,
       "unknown profile '" + std::string(name) + "' (expected lite|paper)");
}

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["profile"] = c.profile;
  j["vocab_size"] = c.vocab_size;
  j["hash_bins"] = c.hash_bins;
  j["text_dim"] = c.text_dim;
  j["node_dim"] = c.node_dim;
  j["audio_dim"] = c.audio_dim;
  j["hgt_hidden"] = c.hgt_hidden;
  j["hgt_heads"] = c.hgt_heads;
  j["hgt_layers"] = c.hgt_layers;
  j["hgt_layer_norm"] = c.hgt_layer_norm;
  j["lstm_hidden"] = c.lstm_hidden;
  j["feature_dim"] = c.feature_dim;
  j["prosody_heads"] = c.prosody_heads;
  j["prosody_dim"] = c.prosody_dim;
  j["model_dim"] = c.model_dim;
  j["ffn_dim"] = c.ffn_dim;
  j["encoder_layers"] = c.encoder_layers;
  j["encoder_heads"] = c.encoder_heads;
  j["decoder_layers"] = c.decoder_layers;
  j["decoder_heads"] = c.decoder_heads;
  j["mel_bins"] = c.mel_bins;
  j["dropout"] = c.dropout;
  j["tau"] = c.tau;
  j["text_mode"] =
      c.text_mode == TextMode::kHashedNgram ? "hashed_ngram" : "external_file";
  j["text_embeddings_path"] = c.text_embeddings_path;
  j["ablation"] = {{"drop_emotion", c.ablation.drop_emotion},
                   {"drop_intensity", c.ablation.drop_intensity},
                   {"drop_speaker", c.ablation.drop_speaker},
                   {"drop_audio", c.ablation.drop_audio},
                   {"cross_entropy", c.ablation.cross_entropy}};
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.profile = j.at("profile").get<std::string>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.hash_bins = j.at("hash_bins").get<int>();
    c.text_dim = j.at("text_dim").get<int>();
    c.node_dim = j.at("node_dim").get<int>();
    c.audio_dim = j.at("audio_dim").get<int>();
    c.hgt_hidden = j.at("hgt_hidden").get<int>();
    c.hgt_heads = j.at("hgt_heads").get<int>();
    c.hgt_layers = j.at("hgt_layers").get<int>();
    c.hgt_layer_norm = j.at("hgt_layer_norm").get<bool>();
    c.lstm_hidden = j.at("lstm_hidden").get<int>();
    c.feature_dim = j.at("feature_dim").get<int>();
    c.prosody_heads = j.at("prosody_heads").get<int>();
    c.prosody_dim = j.at("prosody_dim").get<int>();
    c.model_dim = j.at("model_dim").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.encoder_layers = j.at("encoder_layers").get<int>();
    c.encoder_heads = j.at("encoder_heads").get<int>();
    c.decoder_layers = j.at("decoder_layers").get<int>();
    c.decoder_heads = j.at("decoder_heads").get<int>();
    c.mel_bins = j.at("mel_bins").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.tau = j.at("tau").get<double>();
    const auto mode = j.at("text_mode").get<std::string>();
    require(mode == "hashed_ngram" || mode == "external_file",
            ErrorKind::kParse, "unknown text_mode '" + mode + "'");
    c.text_mode =
        mode == "hashed_ngram" ? TextMode::kHashedNgram : TextMode::kExternal;
    c.text_embeddings_path = j.at("text_embeddings_path").get<std::string>();
    const auto& a = j.at("ablation");
    c.ablation.drop_emotion = a.at("drop_emotion").get<bool>();
    c.ablation.drop_intensity = a.at("drop_intensity").get<bool>();
    c.ablation.drop_speaker = a.at("drop_speaker").get<bool>();
    c.ablation.drop_audio = a.at("drop_audio").get<bool>();
    c.ablation.cross_entropy = a.at("cross_entropy").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace ecss::model
